//! Hybrid probabilistic networks with neutral-valued categorical and
//! three-range continuous variables.

pub mod condmodels;
pub mod evaluation;
pub mod inference;
pub mod mcmc;
pub mod netspec;
pub mod numeric;
pub mod priors;
pub mod rng;
#[cfg(feature = "server")]
pub mod server;

pub use condmodels::{BetaRegParams, CatLogisticParams, CondError, CondParams, NetworkParams};
pub use netspec::{CNode, ContinuousScale, NetError, NetworkSpec, Typology, Value, VariableDef};
pub use priors::{PriorEntry, PriorError, PriorSpec, PriorSummary, VarPrior};
pub use mcmc::{Chain, Dataset, McmcConfig, McmcError};
