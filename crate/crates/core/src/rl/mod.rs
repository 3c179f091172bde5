//! Policy-gradient engine: network, optimizer and PPO update.

pub mod adam;
pub mod mlp;
pub mod policy;
pub mod ppo;

pub use adam::Adam;
pub use mlp::Mlp;
pub use policy::{
    greedy_action, load_policy, load_policy_for, log_prob_from_logits, sample_action, save_policy, ActMode,
    ActionSample, PolicyNetwork, SavedPolicy, DEFAULT_HIDDEN, POLICY_SCHEMA_VERSION,
};
pub use ppo::{
    compute_gae, ppo_loss, ppo_loss_and_grad, ppo_update, prepare_samples, LossBreakdown, PpoConfig, Sample,
    Trajectory, Transition,
};
