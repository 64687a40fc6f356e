pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod implicit;
pub mod oracle;
pub mod params;
pub mod quadrature;
pub mod roots;
pub mod service;
pub mod sim;
pub mod validate;
pub mod special;

pub use error::{Error, Result};
pub use implicit::{CaseTag, ImplicitMap, SingularityProfile};
pub use params::{ModelParams, RetrialRate};
pub use service::{LstSingularData, ServiceKind, ServiceModel, ServiceType};
