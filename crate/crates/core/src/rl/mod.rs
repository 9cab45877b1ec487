//! Advantage actor-critic agent built on hand-differentiated MLPs.

mod agent;
pub mod nn;
mod persist;
mod train;

pub use agent::{
    a2c_gradients, a2c_update, a2c_update_in_place, entropy, select_action, softmax, A2cGradients, ActionChoice,
    PolicyModel, Transition, UpdateConfig, UpdateDiagnostics, MODEL_VERSION,
};
pub use persist::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC};
pub use train::{
    action_force, features, run_rl_episode, train, train_from, EpisodeRecord, RewardConfig, RlController, TrainConfig,
    TrainFailure, TrainingLog, OBS_DIM,
};
