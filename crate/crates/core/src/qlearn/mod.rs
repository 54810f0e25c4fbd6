//! Growing-batch Q-learning.
//!
//! Every transition an agent observes is appended to its batch. At each
//! policy update the Bellman targets are recomputed from the current network
//! over the whole batch and held fixed while RPROP runs a round of full-batch
//! epochs on the squared TD error.

mod batch;
mod epsilon;
mod learner;
mod net;
mod rprop;

pub use batch::{batch_gradient, compute_targets, train, FeatureScaler, GrowingBatch, TrainReport, Transition};
pub use epsilon::{select_action, EpsilonSchedule};
pub use learner::{LearnerConfig, QLearner, RewardScaling};
pub use net::{QApproximator, Workspace};
pub use rprop::{RpropParams, RpropState};
