//! Scalar kernels for group-relative advantages, the clipped policy
//! objective and the odds-ratio preference loss.
//!
//! Everything here works on numbers the training framework already has
//! (rewards, probability ratios, length-normalized log-probabilities); no
//! gradients are taken. The clipped objective is a scalar kernel so it can
//! be aggregated per token or per sequence by the caller.

use thiserror::Error;

/// Default group size (generations per prompt).
pub const DEFAULT_NUM_GENERATIONS: usize = 8;
/// Default clip width.
pub const DEFAULT_EPSILON: f64 = 0.2;
/// Default KL weight.
pub const DEFAULT_BETA: f64 = 0.01;
/// Default weight of the odds-ratio term.
pub const DEFAULT_LAMBDA: f64 = 0.5;

/// Probabilities at or above 1 are clamped to this before forming odds.
pub const MAX_PROBABILITY: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("a reward group needs at least 2 rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("expected a group of {expected} rewards, got {got}")]
    GroupSizeMismatch { expected: usize, got: usize },
    #[error("non-finite reward in group")]
    NonFinite,
}

/// The rewards of the K responses sampled for one prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardGroup {
    rewards: Vec<f64>,
}

impl RewardGroup {
    pub fn new(rewards: Vec<f64>) -> Result<Self, PolicyError> {
        if rewards.len() < 2 {
            return Err(PolicyError::GroupTooSmall(rewards.len()));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(PolicyError::NonFinite);
        }
        Ok(Self { rewards })
    }

    /// Like [`RewardGroup::new`] but also checks the configured group size.
    pub fn with_size(rewards: Vec<f64>, expected: usize) -> Result<Self, PolicyError> {
        if rewards.len() != expected {
            return Err(PolicyError::GroupSizeMismatch {
                expected,
                got: rewards.len(),
            });
        }
        Self::new(rewards)
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }
}

/// `A_i = (r_i - mean) / std` with the population standard deviation.
/// A unanimous group yields all zeros.
pub fn group_advantages(group: &RewardGroup) -> Vec<f64> {
    let r = &group.rewards;
    if r.iter().all(|&x| x == r[0]) {
        return vec![0.0; r.len()];
    }
    let k = r.len() as f64;
    let mean = r.iter().sum::<f64>() / k;
    let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    let std = var.sqrt();
    r.iter().map(|x| (x - mean) / std).collect()
}

/// Inputs of one clipped-objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoStepInputs {
    /// `pi_theta / pi_theta_old`.
    pub ratio: f64,
    pub advantage: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// Caller-estimated `KL(pi_theta || pi_ref)`.
    pub kl_value: f64,
}

impl GrpoStepInputs {
    pub fn new(ratio: f64, advantage: f64, kl_value: f64) -> Self {
        Self {
            ratio,
            advantage,
            epsilon: DEFAULT_EPSILON,
            beta: DEFAULT_BETA,
            kl_value,
        }
    }
}

/// `min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A) - beta * kl`.
pub fn grpo_step_objective(inp: &GrpoStepInputs) -> f64 {
    let clipped = inp.ratio.clamp(1.0 - inp.epsilon, 1.0 + inp.epsilon);
    let surrogate = (inp.ratio * inp.advantage).min(clipped * inp.advantage);
    surrogate - inp.beta * inp.kl_value
}

/// The "k3" KL estimator `r - ln r - 1` for `r = pi_ref / pi_theta`.
///
/// One of several unbiased estimators; non-negative for every `r > 0`.
pub fn k3_kl_estimate(ratio: f64) -> f64 {
    ratio - ratio.ln() - 1.0
}

/// Length-normalized log-probabilities of a chosen and a rejected response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceLogProbs {
    pub logp_chosen: f64,
    pub logp_rejected: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrpoLoss {
    pub total: f64,
    pub l_sft: f64,
    pub l_or: f64,
    /// Set when a probability was >= 1 and had to be clamped.
    pub degenerate_probability: bool,
}

/// `ln(P / (1 - P))` for `P = exp(logp)`, clamping `P` below 1.
fn log_odds(logp: f64) -> (f64, bool) {
    let max_logp = MAX_PROBABILITY.ln();
    let degenerate = logp >= 0.0;
    let lp = if logp > max_logp { max_logp } else { logp };
    // ln(1 - e^lp) without cancellation near lp = 0.
    let log1m = if lp > -std::f64::consts::LN_2 {
        (-lp.exp_m1()).ln()
    } else {
        (-lp.exp()).ln_1p()
    };
    (lp - log1m, degenerate)
}

/// `-ln sigmoid(x)` computed without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// `l_sft = -logp_chosen`, `l_or = -ln sigmoid(ln(odds_chosen / odds_rejected))`,
/// `total = l_sft + lambda * l_or`.
pub fn orpo_loss(p: &PreferenceLogProbs) -> OrpoLoss {
    let (lo_w, dw) = log_odds(p.logp_chosen);
    let (lo_l, dl) = log_odds(p.logp_rejected);
    let l_sft = -p.logp_chosen;
    let l_or = neg_log_sigmoid(lo_w - lo_l);
    OrpoLoss {
        total: l_sft + p.lambda * l_or,
        l_sft,
        l_or,
        degenerate_probability: dw || dl,
    }
}

/// Analytic `(d l_or / d logp_chosen, d l_or / d logp_rejected)`.
///
/// With `x = ln(odds_w / odds_l)`, `d x / d logp = 1 / (1 - P)`, so the
/// partials are `-(1 - sigmoid(x)) / (1 - P_w)` and
/// `(1 - sigmoid(x)) / (1 - P_l)`.
pub fn orpo_or_gradient(p: &PreferenceLogProbs) -> (f64, f64) {
    let (lo_w, _) = log_odds(p.logp_chosen);
    let (lo_l, _) = log_odds(p.logp_rejected);
    let x = lo_w - lo_l;
    // 1 - sigmoid(x) = sigmoid(-x)
    let s_neg = if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    };
    let one_minus = |logp: f64| -logp.min(MAX_PROBABILITY.ln()).exp_m1();
    (
        -s_neg / one_minus(p.logp_chosen),
        s_neg / one_minus(p.logp_rejected),
    )
}
