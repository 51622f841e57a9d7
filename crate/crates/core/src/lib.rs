//! Reward scoring for timestamped-evidence video reasoning rollouts, plus
//! the pieces around it: the policy-update and preference losses, caption
//! debiasing, the evaluator HTTP gateway and reward-stage scheduling.

pub mod debias;
pub mod format;
pub mod gateway;
pub mod margin;
pub mod metrics;
pub mod policy;
pub mod reward;
pub mod scheduler;
pub mod text;
