//! Deep deterministic policy gradients over continuous products.

pub mod adam;
pub mod ddpg;
pub mod mlp;
pub mod replay;

pub use adam::Adam;
pub use ddpg::{
    average_reward, critic_target, ddpg_train, greedy_average_reward, random_average_reward, DdpgNets, DdpgParams,
    DdpgRun, FeatureMap, Transition,
};
pub use mlp::{mse_gradients, Gradients, Mlp, OutputActivation, Trace};
pub use replay::ReplayBuffer;
