//! Four-term reward: goal progress, action smoothness, exploration and
//! proximity.
//!
//! `total` is always exactly `progress + smoothness + exploration + proximity`.
//! Optional terminal shaping (success bonus, crash penalty) is reported in a
//! separate field and never folded into `total`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub lambda_d: f64,
    pub lambda_e: f64,
    pub alpha: f64,
    pub lambda_a: [f64; 6],
    pub lambda_g: f64,
    pub lambda_p: f64,
    /// Collision radius, m. Also the crash sphere.
    pub d_coll: f64,
    /// The exploration term is off unless asked for.
    pub enable_n_t: bool,
    pub success_bonus: f64,
    pub crash_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda_d: 2.0,
            lambda_e: 1.0,
            alpha: 0.5,
            lambda_a: [0.05; 6],
            lambda_g: 0.01,
            lambda_p: 0.02,
            d_coll: 0.4,
            enable_n_t: false,
            success_bonus: 10.0,
            crash_penalty: -10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_e", self.lambda_e),
            ("alpha", self.alpha),
            ("lambda_g", self.lambda_g),
            ("lambda_p", self.lambda_p),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err((name, format!("must be finite and non-negative, got {v}")));
            }
        }
        if !self.lambda_a.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(("lambda_a", "weights must be finite and non-negative".into()));
        }
        if !(self.d_coll > 0.0) {
            return Err(("d_coll", "must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub progress: f64,
    pub smoothness: f64,
    pub exploration: f64,
    pub proximity: f64,
    pub total: f64,
    /// Terminal shaping, outside the four-term sum.
    pub terminal: f64,
}

impl RewardBreakdown {
    /// Value handed to a learner: four-term total plus terminal shaping.
    pub fn shaped(&self) -> f64 {
        self.total + self.terminal
    }
}

/// λ_d (d_prev − d_now) + λ_e exp(−α d_now²)
pub fn progress_reward(d_prev: f64, d_now: f64, cfg: &RewardConfig) -> f64 {
    cfg.lambda_d * (d_prev - d_now) + cfg.lambda_e * (-cfg.alpha * d_now * d_now).exp()
}

/// −‖λ_a ⊙ (a_now − a_prev)‖₂
pub fn smoothness_penalty(a_now: &[f64; 6], a_prev: &[f64; 6], cfg: &RewardConfig) -> f64 {
    let sq: f64 = (0..6)
        .map(|i| {
            let d = cfg.lambda_a[i] * (a_now[i] - a_prev[i]);
            d * d
        })
        .sum();
    -sq.sqrt()
}

pub fn exploration_reward(transitions: usize, cfg: &RewardConfig) -> f64 {
    if cfg.enable_n_t {
        cfg.lambda_g * transitions as f64
    } else {
        0.0
    }
}

pub fn proximity_penalty(near_count: usize, cfg: &RewardConfig) -> f64 {
    -cfg.lambda_p * near_count as f64
}

/// Everything the four terms need for one transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardInputs {
    pub d_prev: f64,
    pub d_now: f64,
    pub action: [f64; 6],
    pub prev_action: [f64; 6],
    pub transitions: usize,
    pub near_count: usize,
}

pub fn total_reward(inputs: &RewardInputs, cfg: &RewardConfig) -> RewardBreakdown {
    let progress = progress_reward(inputs.d_prev, inputs.d_now, cfg);
    let smoothness = smoothness_penalty(&inputs.action, &inputs.prev_action, cfg);
    let exploration = exploration_reward(inputs.transitions, cfg);
    let proximity = proximity_penalty(inputs.near_count, cfg);
    RewardBreakdown {
        progress,
        smoothness,
        exploration,
        proximity,
        total: progress + smoothness + exploration + proximity,
        terminal: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn progress_examples() {
        let cfg = RewardConfig::default();
        assert_eq!(progress_reward(0.0, 0.0, &cfg), cfg.lambda_e);
        let pure = RewardConfig { lambda_d: 1.0, lambda_e: 0.0, ..Default::default() };
        assert_eq!(progress_reward(3.0, 2.0, &pure), 1.0);
        let both = RewardConfig { lambda_d: 1.0, lambda_e: 1.0, alpha: 0.5, ..Default::default() };
        assert!((progress_reward(2.0, 1.0, &both) - (1.0 + (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn smoothness_examples() {
        let unit = RewardConfig { lambda_a: [1.0; 6], ..Default::default() };
        let a = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_eq!(smoothness_penalty(&a, &a, &unit), 0.0);
        assert_eq!(smoothness_penalty(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 6], &unit), -1.0);
        let w = RewardConfig { lambda_a: [2.0, 1.0, 1.0, 1.0, 1.0, 1.0], ..Default::default() };
        let d = smoothness_penalty(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0], &[0.0; 6], &w);
        assert!((d + 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exploration_examples() {
        let on = RewardConfig { enable_n_t: true, lambda_g: 0.01, ..Default::default() };
        assert_eq!(exploration_reward(0, &on), 0.0);
        assert!((exploration_reward(250, &on) - 2.5).abs() < 1e-12);
        assert_eq!(exploration_reward(250, &RewardConfig::default()), 0.0);
    }

    #[test]
    fn proximity_examples() {
        let cfg = RewardConfig { lambda_p: 0.02, ..Default::default() };
        assert_eq!(proximity_penalty(0, &cfg), 0.0);
        assert!((proximity_penalty(10, &cfg) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn at_goal_total_is_lambda_e() {
        let cfg = RewardConfig::default();
        let r = total_reward(
            &RewardInputs { d_prev: 0.0, d_now: 0.0, action: [0.0; 6], prev_action: [0.0; 6], transitions: 0, near_count: 0 },
            &cfg,
        );
        assert_eq!(r.total, cfg.lambda_e);
    }

    #[test]
    fn zeroed_terms_leave_the_rest() {
        let inputs = RewardInputs {
            d_prev: 4.0,
            d_now: 3.5,
            action: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            prev_action: [0.0; 6],
            transitions: 40,
            near_count: 7,
        };
        let only_p = RewardConfig { lambda_d: 0.0, lambda_e: 0.0, lambda_a: [0.0; 6], enable_n_t: false, ..Default::default() };
        let r = total_reward(&inputs, &only_p);
        assert_eq!(r.total, proximity_penalty(7, &only_p));
        let no_p = RewardConfig { lambda_p: 0.0, ..Default::default() };
        assert_eq!(total_reward(&inputs, &no_p).proximity, 0.0);
    }

    fn action() -> impl Strategy<Value = [f64; 6]> {
        prop::array::uniform6(-2.0f64..2.0)
    }

    proptest! {
        #[test]
        fn signs_and_additivity(d_prev in 0.0f64..20.0, d_now in 0.0f64..20.0, a in action(), b in action(),
                                tr in 0usize..5000, near in 0usize..500, enable in any::<bool>()) {
            let cfg = RewardConfig { enable_n_t: enable, ..Default::default() };
            let r = total_reward(&RewardInputs { d_prev, d_now, action: a, prev_action: b, transitions: tr, near_count: near }, &cfg);
            prop_assert_eq!(r.total, r.progress + r.smoothness + r.exploration + r.proximity);
            prop_assert!(r.smoothness <= 0.0);
            prop_assert!(r.proximity <= 0.0);
            prop_assert!(r.exploration >= 0.0);
            if d_prev >= d_now {
                prop_assert!(r.progress >= cfg.lambda_e * (-cfg.alpha * d_now * d_now).exp());
            }
        }

        #[test]
        fn doubling_lambda_g_doubles_n_t(tr in 0usize..100_000, g in 0.0f64..1.0) {
            let one = RewardConfig { enable_n_t: true, lambda_g: g, ..Default::default() };
            let two = RewardConfig { lambda_g: 2.0 * g, ..one.clone() };
            prop_assert_eq!(exploration_reward(tr, &two), 2.0 * exploration_reward(tr, &one));
        }
    }
}
