//! Discrete-event simulation of the two-class non-preemptive priority
//! retrial queue, measuring the time-stationary orbit distribution.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::params::{ModelParams, RetrialRate};
use crate::service::{ServiceKind, ServiceModel, ServiceType};

/// Orbit sizes tracked individually; larger sizes fall into an overflow bin.
pub const DEFAULT_N_CAP: usize = 64;
/// Orbit size treated as runaway growth.
pub const DRIFT_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ModelParams,
    pub model: ServiceModel,
    pub seed: u64,
    pub warmup_events: u64,
    pub measure_events: u64,
    pub batches: usize,
    pub n_cap: usize,
}

impl SimConfig {
    /// Defaults: 10⁷ measured events in 32 batches, warm-up from [`default_warmup`].
    pub fn new(params: ModelParams, model: ServiceModel, seed: u64) -> Self {
        let warmup_events = default_warmup(&params);
        Self {
            params,
            model,
            seed,
            warmup_events,
            measure_events: 10_000_000,
            batches: 32,
            n_cap: DEFAULT_N_CAP,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.params.rho() >= 1.0 {
            return Err(Error::Unstable { rho: self.params.rho() });
        }
        if self.params.nu.is_infinite() {
            return Err(Error::InvalidParameter("simulation needs a finite retrial rate nu".into()));
        }
        if self.batches < 2 {
            return Err(Error::InvalidParameter("at least two batches are needed for confidence intervals".into()));
        }
        if self.measure_events < 100 * self.batches as u64 {
            return Err(Error::InvalidParameter(format!(
                "measure_events = {} must be >= 100 * batches = {}",
                self.measure_events,
                100 * self.batches
            )));
        }
        if self.n_cap == 0 {
            return Err(Error::InvalidParameter("n_cap must be positive".into()));
        }
        Ok(())
    }
}

/// max(10⁶, 100 × relaxation estimate) events, the relaxation time taken as
/// E[B]/(1 − ρ)² converted to events through the total event rate.
pub fn default_warmup(params: &ModelParams) -> u64 {
    let rho = params.rho();
    let tau = params.mean_b() / (1.0 - rho).powi(2);
    let rate = 3.0 * params.lambda();
    let relax = 100.0 * tau * rate;
    if relax.is_finite() {
        (relax as u64).max(1_000_000)
    } else {
        1_000_000
    }
}

/// Time-average orbit distribution with 95% batch-means half-widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    pub q_emp: Vec<f64>,
    pub q_hw: Vec<f64>,
    pub r_emp: Vec<f64>,
    pub r_hw: Vec<f64>,
    pub p2_emp: Vec<f64>,
    pub p2_hw: Vec<f64>,
    /// Time fraction with orbit size above n_cap.
    pub overflow: f64,
    pub utilization: f64,
    pub utilization_hw: f64,
    /// Fraction of class-2 arrivals that found the server busy.
    pub blocked_fraction: f64,
    pub blocked_hw: f64,
    pub batches: usize,
    pub measured_events: u64,
    pub measured_time: f64,
    pub warnings: Vec<String>,
}

impl EmpiricalDist {
    /// CSV with columns n, q_emp, q_hw, r_emp, r_hw, p2_emp, p2_hw.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::InvalidParameter(format!("CSV write failed: {e}"));
        wr.write_record(["n", "q_emp", "q_hw", "r_emp", "r_hw", "p2_emp", "p2_hw"]).map_err(err)?;
        for n in 0..self.q_emp.len() {
            wr.write_record([
                n.to_string(),
                self.q_emp[n].to_string(),
                self.q_hw[n].to_string(),
                self.r_emp[n].to_string(),
                self.r_hw[n].to_string(),
                self.p2_emp[n].to_string(),
                self.p2_hw[n].to_string(),
            ])
            .map_err(err)?;
        }
        wr.flush().map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
        Ok(())
    }
}

/// One service-time draw.
pub fn sample_service<R: Rng + ?Sized>(model: &ServiceModel, rng: &mut R) -> f64 {
    match model.kind() {
        ServiceKind::Exponential { mu } => Exp::new(*mu).expect("validated rate").sample(rng),
        ServiceKind::Erlang { k, mu } => Gamma::new(f64::from(*k), 1.0 / mu).expect("validated shape").sample(rng),
        ServiceKind::GammaShape { k, mu } => Gamma::new(*k, 1.0 / mu).expect("validated shape").sample(rng),
        ServiceKind::HyperExponential { weights, rates } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut idx = rates.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    idx = i;
                    break;
                }
            }
            Exp::new(rates[idx]).expect("validated rate").sample(rng)
        }
        ServiceKind::Deterministic { d } => *d,
        ServiceKind::Pareto { p, x0 } => {
            // inverse CDF of P(X > x) = (x0/x)^p
            let u: f64 = 1.0 - rng.random::<f64>();
            x0 * u.powf(-1.0 / p)
        }
        ServiceKind::PowerLawCutoff { p, r_c, x0 } => {
            // envelope x0 + Exp(R_c); density ratio ∝ x^{−p}, accept with (x0/x)^p
            let env = Exp::new(*r_c).expect("validated rate");
            loop {
                let x = x0 + env.sample(rng);
                let u: f64 = rng.random();
                if u <= (x0 / x).powf(*p) {
                    break x;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // declaration order is the tie-break order at equal timestamps
    Completion,
    Arrival1,
    Arrival2,
    Retrial,
}

/// Event record for trace-based property checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub busy_before: bool,
    pub queue1: u64,
    pub orbit: u64,
    /// Scheduled completion before and after handling the event.
    pub completion_before: f64,
    pub completion_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Completion,
    Arrival1,
    Arrival2,
    Retrial,
}

const STREAM_ARRIVAL1: u64 = 1;
const STREAM_ARRIVAL2: u64 = 2;
const STREAM_RETRIAL: u64 = 3;
const STREAM_SERVICE: u64 = 4;

struct Streams {
    a1: ChaCha8Rng,
    a2: ChaCha8Rng,
    retrial: ChaCha8Rng,
    service: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mk = |stream| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(stream);
            r
        };
        Self {
            a1: mk(STREAM_ARRIVAL1),
            a2: mk(STREAM_ARRIVAL2),
            retrial: mk(STREAM_RETRIAL),
            service: mk(STREAM_SERVICE),
        }
    }
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate > 0.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        -u.ln() / rate
    } else {
        f64::INFINITY
    }
}

struct Queue<'a> {
    cfg: &'a SimConfig,
    nu: f64,
    rng: Streams,
    t: f64,
    busy: bool,
    queue1: u64,
    orbit: u64,
    next_a1: f64,
    next_a2: f64,
    next_done: f64,
    next_retrial: f64,
}

impl<'a> Queue<'a> {
    fn new(cfg: &'a SimConfig, nu: f64) -> Self {
        let mut rng = Streams::new(cfg.seed);
        let next_a1 = exp_draw(&mut rng.a1, cfg.params.lambda1);
        let next_a2 = exp_draw(&mut rng.a2, cfg.params.lambda2);
        Self {
            cfg,
            nu,
            rng,
            t: 0.0,
            busy: false,
            queue1: 0,
            orbit: 0,
            next_a1,
            next_a2,
            next_done: f64::INFINITY,
            next_retrial: f64::INFINITY,
        }
    }

    fn start_service(&mut self) {
        self.busy = true;
        self.next_done = self.t + sample_service(&self.cfg.model, &mut self.rng.service);
        self.next_retrial = f64::INFINITY;
    }

    fn go_idle(&mut self) {
        self.busy = false;
        self.next_done = f64::INFINITY;
        // one exponential race at rate k·ν replaces k retrying customers
        self.next_retrial = self.t + exp_draw(&mut self.rng.retrial, self.orbit as f64 * self.nu);
    }

    fn next_event(&self) -> (f64, EventKind) {
        let mut best = (self.next_done, EventKind::Completion);
        for cand in [
            (self.next_a1, EventKind::Arrival1),
            (self.next_a2, EventKind::Arrival2),
            (self.next_retrial, EventKind::Retrial),
        ] {
            if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                best = cand;
            }
        }
        best
    }

    /// Advances to and handles the next event. Returns its kind and
    /// whether a class-2 arrival found the server busy.
    fn step(&mut self, trace: Option<&mut Vec<TraceEvent>>) -> Result<(EventKind, bool)> {
        let (t, kind) = self.next_event();
        let busy_before = self.busy;
        let completion_before = self.next_done;
        self.t = t;
        let mut blocked = false;
        match kind {
            EventKind::Completion => {
                if self.queue1 > 0 {
                    self.queue1 -= 1;
                    self.start_service();
                } else {
                    self.go_idle();
                }
            }
            EventKind::Arrival1 => {
                self.next_a1 = t + exp_draw(&mut self.rng.a1, self.cfg.params.lambda1);
                if self.busy {
                    // non-preemptive: wait behind the current service
                    self.queue1 += 1;
                } else {
                    self.start_service();
                }
            }
            EventKind::Arrival2 => {
                self.next_a2 = t + exp_draw(&mut self.rng.a2, self.cfg.params.lambda2);
                if self.busy {
                    blocked = true;
                    self.orbit += 1;
                    if self.orbit > DRIFT_LIMIT {
                        return Err(Error::UnstableDrift { orbit: self.orbit });
                    }
                } else {
                    self.start_service();
                }
            }
            EventKind::Retrial => {
                debug_assert!(!self.busy && self.orbit > 0);
                self.orbit -= 1;
                self.start_service();
            }
        }
        debug_assert!(kind != EventKind::Arrival1 || !busy_before || self.next_done == completion_before);
        if let Some(tr) = trace {
            tr.push(TraceEvent {
                time: t,
                kind: match kind {
                    EventKind::Completion => TraceKind::Completion,
                    EventKind::Arrival1 => TraceKind::Arrival1,
                    EventKind::Arrival2 => TraceKind::Arrival2,
                    EventKind::Retrial => TraceKind::Retrial,
                },
                busy_before,
                queue1: self.queue1,
                orbit: self.orbit,
                completion_before,
                completion_after: self.next_done,
            });
        }
        Ok((kind, blocked))
    }
}

/// Per-batch accumulators.
#[derive(Debug, Clone)]
struct BatchData {
    /// time fractions with the server idle / busy per orbit size (last bin = overflow)
    idle: Vec<Vec<f64>>,
    busy: Vec<Vec<f64>>,
    blocked: Vec<f64>,
    events: u64,
    time: f64,
}

fn run_batches(cfg: &SimConfig, trace: Option<&mut Vec<TraceEvent>>) -> Result<BatchData> {
    cfg.validate()?;
    let RetrialRate::Finite(nu) = cfg.params.nu else { unreachable!() };
    let mut q = Queue::new(cfg, nu);
    let mut trace = trace;
    for _ in 0..cfg.warmup_events {
        q.step(trace.as_deref_mut())?;
    }
    // batch length in time from the warm-up event rate
    let rate = if cfg.warmup_events > 0 && q.t > 0.0 {
        cfg.warmup_events as f64 / q.t
    } else {
        3.0 * cfg.params.lambda()
    };
    let batch_len = cfg.measure_events as f64 / rate / cfg.batches as f64;
    let bins = cfg.n_cap + 2;
    let mut data = BatchData {
        idle: vec![vec![0.0; bins]; cfg.batches],
        busy: vec![vec![0.0; bins]; cfg.batches],
        blocked: vec![0.0; cfg.batches],
        events: 0,
        time: 0.0,
    };
    let start = q.t;
    for b in 0..cfg.batches {
        let end = start + (b + 1) as f64 * batch_len;
        let mut arrivals2 = 0u64;
        let mut blocked = 0u64;
        let mut last = start + b as f64 * batch_len;
        loop {
            let (tn, _) = q.next_event();
            let upto = tn.min(end);
            let bin = (q.orbit as usize).min(cfg.n_cap + 1);
            let dt = upto - last;
            if q.busy {
                data.busy[b][bin] += dt;
            } else {
                data.idle[b][bin] += dt;
            }
            last = upto;
            if tn > end {
                break;
            }
            let (kind, was_blocked) = q.step(trace.as_deref_mut())?;
            data.events += 1;
            if kind == EventKind::Arrival2 {
                arrivals2 += 1;
                blocked += u64::from(was_blocked);
            }
        }
        for v in data.idle[b].iter_mut().chain(data.busy[b].iter_mut()) {
            *v /= batch_len;
        }
        data.blocked[b] = if arrivals2 > 0 { blocked as f64 / arrivals2 as f64 } else { 0.0 };
    }
    data.time = batch_len * cfg.batches as f64;
    Ok(data)
}

fn mean_hw(xs: &[f64], t975: f64) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, t975 * (var / n).sqrt())
}

fn summarize(cfg: &SimConfig, parts: Vec<BatchData>) -> Result<EmpiricalDist> {
    let idle: Vec<&Vec<f64>> = parts.iter().flat_map(|p| p.idle.iter()).collect();
    let busy: Vec<&Vec<f64>> = parts.iter().flat_map(|p| p.busy.iter()).collect();
    let blocked: Vec<f64> = parts.iter().flat_map(|p| p.blocked.iter().copied()).collect();
    let nb = idle.len();
    let t975 = StudentsT::new(0.0, 1.0, (nb - 1) as f64)
        .map_err(|e| Error::InvalidParameter(format!("Student-t setup failed: {e}")))?
        .inverse_cdf(0.975);
    let n_cap = cfg.n_cap;
    let mut out = EmpiricalDist {
        q_emp: Vec::with_capacity(n_cap + 1),
        q_hw: Vec::with_capacity(n_cap + 1),
        r_emp: Vec::with_capacity(n_cap + 1),
        r_hw: Vec::with_capacity(n_cap + 1),
        p2_emp: Vec::with_capacity(n_cap + 1),
        p2_hw: Vec::with_capacity(n_cap + 1),
        overflow: 0.0,
        utilization: 0.0,
        utilization_hw: 0.0,
        blocked_fraction: 0.0,
        blocked_hw: 0.0,
        batches: nb,
        measured_events: parts.iter().map(|p| p.events).sum(),
        measured_time: parts.iter().map(|p| p.time).sum(),
        warnings: Vec::new(),
    };
    for n in 0..=n_cap {
        let qs: Vec<f64> = idle.iter().map(|b| b[n]).collect();
        let rs: Vec<f64> = busy.iter().map(|b| b[n]).collect();
        let ps: Vec<f64> = qs.iter().zip(&rs).map(|(a, b)| a + b).collect();
        let (m, h) = mean_hw(&qs, t975);
        out.q_emp.push(m);
        out.q_hw.push(h);
        let (m, h) = mean_hw(&rs, t975);
        out.r_emp.push(m);
        out.r_hw.push(h);
        let (m, h) = mean_hw(&ps, t975);
        out.p2_emp.push(m);
        out.p2_hw.push(h);
    }
    let over: Vec<f64> = idle.iter().zip(&busy).map(|(a, b)| a[n_cap + 1] + b[n_cap + 1]).collect();
    out.overflow = mean_hw(&over, t975).0;
    let util: Vec<f64> = busy.iter().map(|b| b.iter().sum()).collect();
    (out.utilization, out.utilization_hw) = mean_hw(&util, t975);
    (out.blocked_fraction, out.blocked_hw) = mean_hw(&blocked, t975);
    if cfg.model.service_type() == ServiceType::Type3 {
        out.warnings.push(
            "heavy-tailed service: convergence to stationarity is slow, empirical probabilities may be biased".into(),
        );
    }
    if out.overflow > 0.0 {
        out.warnings.push(format!("orbit exceeded n_cap = {} for a time fraction {:.3e}", n_cap, out.overflow));
    }
    Ok(out)
}

/// Runs one replication.
pub fn simulate(cfg: &SimConfig) -> Result<EmpiricalDist> {
    let data = run_batches(cfg, None)?;
    summarize(cfg, vec![data])
}

/// Runs one replication and records every event.
pub fn simulate_traced(cfg: &SimConfig) -> Result<(EmpiricalDist, Vec<TraceEvent>)> {
    let mut trace = Vec::new();
    let data = run_batches(cfg, Some(&mut trace))?;
    Ok((summarize(cfg, vec![data])?, trace))
}

/// Independent replications with seeds `seeds`, run concurrently; batches are pooled.
pub fn simulate_replications(cfg: &SimConfig, seeds: &[u64]) -> Result<EmpiricalDist> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("at least one seed is required".into()));
    }
    let parts = seeds
        .par_iter()
        .map(|&seed| {
            let c = SimConfig { seed, ..cfg.clone() };
            run_batches(&c, None)
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(cfg, parts)
}
