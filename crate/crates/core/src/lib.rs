//! Coverage and handover analysis for UAVs served by a terrestrial cellular
//! network: closed-form-plus-quadrature evaluation and a Monte Carlo
//! simulator of the same model.

pub mod analytic;
pub mod association;
pub mod config;
pub mod error;
pub mod geometry;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod sweep;
pub mod validate;

pub use analytic::{CoverageBreakdown, HandoverContext, TargetDensity};
pub use config::{load_config, parse_config};
pub use association::AssociationPolicy;
pub use error::{Error, Result};
pub use model::{AntennaModel, ChannelParams, EnvironmentParams, LinkType, SystemParams, Waypoint};
pub use montecarlo::{EpisodeOutcome, McEstimate, McOptions, McSummary};
pub use quadrature::QuadratureSpec;
