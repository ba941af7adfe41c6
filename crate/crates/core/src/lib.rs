//! Factorization threshold random networks.
//!
//! Every node carries a Pareto-distributed weight `w` and a direction `x`
//! drawn uniformly from the unit sphere; the pair `(i, j)` is linked when the
//! dot product of the latent vectors `w_i x_i` and `w_j x_j` reaches a
//! threshold `theta`. Directed and link-function variants reweight the two
//! endpoints with separate exponents and pass the dot product through a
//! monotone function first.
//!
//! The crate is organised as:
//!
//! * [`model`]: domain types, samplers and the edge predicates;
//! * [`generator`]: pruned, parallel, deterministic graph materialisation;
//! * [`analytics`]: closed-form edge, wedge and variance probabilities,
//!   threshold calibration and growth schedules;
//! * [`statfit`]: CCDFs, discrete power-law fitting with KS bootstrap and
//!   Monte-Carlo estimators that mirror every closed form;
//! * [`growth`]: growth sweeps, concentration reports and growth-curve fits;
//! * [`io`]: edge list / node table / series formats and run manifests.

pub mod analytics;
mod error;
pub mod generator;
pub mod growth;
pub mod io;
pub mod model;
pub mod quad;
pub mod rng;
pub mod statfit;
pub mod zeta;

pub use error::{Error, Result};
pub use generator::{generate, generate_with, GenerateOptions, Graph};
pub use model::{EdgeRule, LinkFn, ModelConfig, Node, ParetoParams};
