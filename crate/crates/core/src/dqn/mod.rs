//! Value-function machinery: feedforward Q-network with hand-written
//! backpropagation, AdamW, replay memory, target network, ε-greedy selection
//! and the squared TD loss.

mod checkpoint;
mod fpmode;
mod gradcheck;
mod learner;
mod network;
mod optim;
mod replay;
mod scalar;
mod schedule;

pub use checkpoint::{Checkpoint, OptimizerState, CHECKPOINT_FORMAT_VERSION};
pub use fpmode::FlushDenormals;
pub use gradcheck::{check_td_gradients, relative_error, GradCheckReport};
pub use learner::{
    argmax, greedy_action, select_action, sync_target, td_loss_and_gradients, td_targets,
    train_step, train_step_in, Learner, TargetNetwork, Workspace,
};
pub use network::{BackwardScratch, ForwardCache, Gradients, Layer, QNetwork};
pub use optim::{AdamW, AdamWConfig};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use scalar::Scalar;
pub use schedule::EpsilonSchedule;
