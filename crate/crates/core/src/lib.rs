//! Transient birth-and-death chains and their cutpoints.
//!
//! - [`resistance`]: exact ruin, escape and cutpoint probabilities for chains
//!   parameterized by edge resistances, with certified tail sums.
//! - [`trajectory`]: simulation, censored and exact cutpoint detection,
//!   conditioned descents and the loop-erasure splice.
//! - [`tree_walk`]: occupation numbers, transition counts, last-exit
//!   pointers and loop-erasure of tree walks; rebuilding transition counts
//!   from occupation numbers by leaf peeling.
//! - [`stack_machine`]: running a chain from per-state successor stacks,
//!   reordering popped stacks and resampling uniform orderings.
//! - [`experiments`]: seeded Monte Carlo estimators compared against the
//!   exact formulas.

pub mod error;
pub mod experiments;
pub mod kernel;
pub mod resistance;
pub mod rng;
pub mod stack_machine;
pub mod stats;
pub mod sum;
pub mod trajectory;
pub mod tree_walk;

pub use error::{Error, Result};
pub use resistance::{Bounded, ChainLaw, Enclosure, ProfileSpec, ResistanceProfile, TailTable};
pub use rng::StreamKey;
pub use trajectory::{State, StopRule, Trajectory};
