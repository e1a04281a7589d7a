//! Best-arm identification for generalized linear bandits.
//!
//! The [`engine`] runs GLGapE: after a short random exploratory phase it
//! repeatedly fits the maximum-likelihood parameter of a generalized linear
//! reward model, picks the most ambiguous pair of arms, and either stops or
//! plays the arm that shrinks that pair's confidence set fastest (an L1
//! allocation solved by a small simplex). [`baselines`] provides GapE, which
//! ignores the features, for comparison.

pub mod baselines;
pub mod confidence;
pub mod design;
pub mod engine;
pub mod environment;
pub mod error;
pub mod estimator;
pub mod linalg;
pub mod linkfn;
pub mod lp;
pub mod rng;
pub mod selector;
pub mod theory;

pub use baselines::{run_gape, GapeConfig};
pub use confidence::{AlphaMode, WidthSchedule};
pub use design::DesignState;
pub use engine::{run_glgape, Diagnostics, RunConfig, RunResult, TraceRecord};
pub use environment::{
    instance_stats, load_instance_csv, sample_instance, write_instance_csv, BanditInstance, Environment,
    InstanceStats,
};
pub use error::{Error, Result};
pub use linkfn::{LinkKind, LinkModel};
pub use rng::{stream_rng, SimRng, Stream};
