//! Preference-loss kernel: DPO with additive gas and security rewards.
//!
//! For a pair with policy/reference log-probabilities of the chosen and
//! rejected completions, the preference logit is
//!
//! ```text
//! z = (policy_chosen - ref_chosen) - (policy_rejected - ref_rejected)
//! l_dpo = -ln sigmoid(tau * z) = softplus(-tau * z)
//! ```
//!
//! The extra rewards favor cheaper and safer chosen completions:
//! `r_extra = alpha * r_gas + beta * r_sec`, and the total is
//! `l_total = l_dpo + lambda * (-r_extra)`, i.e. a reward for the chosen
//! side lowers the loss.

use serde::{Deserialize, Serialize};

use crate::config::{Config, GasRewardMode};

/// Log-probabilities of the chosen and rejected completions under the
/// trained policy and the frozen reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogProbs {
    pub policy_chosen: f64,
    pub policy_rejected: f64,
    pub ref_chosen: f64,
    pub ref_rejected: f64,
}

/// One line of loss_inputs.jsonl: everything needed to score a pair.
///
/// `gas_*` are optional because only gas-objective pairs carry measurements;
/// when either side is missing the gas reward is 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossInput {
    pub pair_id: String,
    pub logp: LogProbs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_chosen: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_rejected: Option<u64>,
    pub safe_chosen: bool,
    pub safe_rejected: bool,
}

/// Per-pair loss decomposition, one line of loss_report.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBreakdown {
    pub pair_id: String,
    /// Preference logit `z` before scaling by `tau`.
    pub z: f64,
    pub l_dpo: f64,
    /// Gas reward, in the units of `gas_reward_mode`.
    pub r_g: f64,
    /// Security reward, always -1, 0, or 1.
    pub r_v: i32,
    pub r_extra: f64,
    pub l_total: f64,
    /// Which gas mode produced `r_g`, so a report is self-describing.
    pub gas_reward_mode: GasRewardMode,
}

/// Numerically stable `ln(1 + e^x)`: exact for large positive `x` (returns
/// `x`) and underflows gracefully to 0 for large negative `x`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `-ln sigmoid(tau * z)`, the DPO loss for preference logit `z`.
pub fn dpo_loss(z: f64, tau: f64) -> f64 {
    softplus(-(tau * z))
}

/// Gas reward for choosing the cheaper completion. Positive when the chosen
/// side uses less gas. Zero when either measurement is absent.
pub fn gas_reward(gas_chosen: Option<u64>, gas_rejected: Option<u64>, mode: GasRewardMode) -> f64 {
    let (Some(gc), Some(gr)) = (gas_chosen, gas_rejected) else {
        return 0.0;
    };
    let diff = gr as f64 - gc as f64;
    match mode {
        GasRewardMode::Raw => diff,
        GasRewardMode::RelativeClipped => {
            let scale = gr.max(gc).max(1) as f64;
            (diff / scale).clamp(-1.0, 1.0)
        }
    }
}

/// Security reward: `safe_chosen - safe_rejected`, always in `{-1, 0, 1}`.
pub fn security_reward(safe_chosen: bool, safe_rejected: bool) -> i32 {
    i32::from(safe_chosen) - i32::from(safe_rejected)
}

/// Computes the full loss decomposition for one pair.
pub fn compute_loss(input: &LossInput, config: &Config) -> LossBreakdown {
    let lp = &input.logp;
    let z = (lp.policy_chosen - lp.ref_chosen) - (lp.policy_rejected - lp.ref_rejected);
    let l_dpo = dpo_loss(z, config.tau);
    let r_g = gas_reward(input.gas_chosen, input.gas_rejected, config.gas_reward_mode);
    let r_v = security_reward(input.safe_chosen, input.safe_rejected);
    let r_extra = config.alpha * r_g + config.beta * f64::from(r_v);
    let l_total = l_dpo + config.lambda * (-r_extra);
    LossBreakdown {
        pair_id: input.pair_id.clone(),
        z,
        l_dpo,
        r_g,
        r_v,
        r_extra,
        l_total,
        gas_reward_mode: config.gas_reward_mode,
    }
}

/// Batch aggregates over per-pair breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSummary {
    pub count: usize,
    pub sum_l_dpo: f64,
    pub mean_l_dpo: f64,
    pub sum_r_extra: f64,
    pub mean_r_extra: f64,
    pub sum_l_total: f64,
    pub mean_l_total: f64,
}

/// One line of loss_report.jsonl: per-pair breakdowns followed by a single
/// summary line with the batch sums and means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossReportLine {
    Pair(LossBreakdown),
    Summary(LossSummary),
}

/// Sums and means over a batch. An empty batch yields zero sums and zero
/// means rather than NaN.
pub fn summarize(breakdowns: &[LossBreakdown]) -> LossSummary {
    let count = breakdowns.len();
    let sum_l_dpo: f64 = breakdowns.iter().map(|b| b.l_dpo).sum();
    let sum_r_extra: f64 = breakdowns.iter().map(|b| b.r_extra).sum();
    let sum_l_total: f64 = breakdowns.iter().map(|b| b.l_total).sum();
    let denom = if count == 0 { 1.0 } else { count as f64 };
    LossSummary {
        count,
        sum_l_dpo,
        mean_l_dpo: sum_l_dpo / denom,
        sum_r_extra,
        mean_r_extra: sum_r_extra / denom,
        sum_l_total,
        mean_l_total: sum_l_total / denom,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(z_parts: (f64, f64, f64, f64)) -> LossInput {
        LossInput {
            pair_id: "p::x::a::b".into(),
            logp: LogProbs {
                policy_chosen: z_parts.0,
                policy_rejected: z_parts.1,
                ref_chosen: z_parts.2,
                ref_rejected: z_parts.3,
            },
            gas_chosen: None,
            gas_rejected: None,
            safe_chosen: false,
            safe_rejected: false,
        }
    }

    /// Flips chosen and rejected everywhere.
    fn swapped(i: &LossInput) -> LossInput {
        LossInput {
            pair_id: i.pair_id.clone(),
            logp: LogProbs {
                policy_chosen: i.logp.policy_rejected,
                policy_rejected: i.logp.policy_chosen,
                ref_chosen: i.logp.ref_rejected,
                ref_rejected: i.logp.ref_chosen,
            },
            gas_chosen: i.gas_rejected,
            gas_rejected: i.gas_chosen,
            safe_chosen: i.safe_rejected,
            safe_rejected: i.safe_chosen,
        }
    }

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(softplus(0.0), std::f64::consts::LN_2);
    }

    #[test]
    fn indifferent_pair_costs_ln_two() {
        // All four log-probabilities equal: z = 0, sigmoid = 1/2.
        let b = compute_loss(&input((-3.2, -3.2, -3.2, -3.2)), &Config::default());
        assert_eq!(b.z, 0.0);
        assert_eq!(b.l_dpo, std::f64::consts::LN_2);
    }

    #[test]
    fn unit_logit_at_default_tau() {
        // z = 1, tau = 0.1: l = ln(1 + e^-0.1)
        let b = compute_loss(&input((-1.0, -2.0, -1.0, -1.0)), &Config::default());
        assert_eq!(b.z, 1.0);
        assert!((b.l_dpo - 0.6443966600735709).abs() < 1e-12);
    }

    #[test]
    fn gas_reward_modes() {
        assert_eq!(
            gas_reward(Some(50_000), Some(60_000), GasRewardMode::Raw),
            10_000.0
        );
        assert_eq!(
            gas_reward(Some(60_000), Some(50_000), GasRewardMode::Raw),
            -10_000.0
        );
        let r = gas_reward(Some(50_000), Some(60_000), GasRewardMode::RelativeClipped);
        assert!((r - 0.16666666666666666).abs() < 1e-15);
        // One side dropping to zero saturates the relative reward.
        assert_eq!(gas_reward(Some(0), Some(5), GasRewardMode::RelativeClipped), 1.0);
        assert_eq!(gas_reward(Some(5), Some(0), GasRewardMode::RelativeClipped), -1.0);
        assert_eq!(gas_reward(Some(0), Some(0), GasRewardMode::RelativeClipped), 0.0);
        // Missing measurements contribute nothing.
        assert_eq!(gas_reward(None, Some(10), GasRewardMode::Raw), 0.0);
        assert_eq!(gas_reward(Some(10), None, GasRewardMode::RelativeClipped), 0.0);
    }

    #[test]
    fn relative_gas_reward_is_always_clipped() {
        for (gc, gr) in [(0, 1), (1, 0), (1, u64::MAX), (u64::MAX, 1), (7, 7)] {
            let r = gas_reward(Some(gc), Some(gr), GasRewardMode::RelativeClipped);
            assert!((-1.0..=1.0).contains(&r), "gc={gc} gr={gr} r={r}");
        }
    }

    #[test]
    fn security_reward_truth_table() {
        assert_eq!(security_reward(true, false), 1);
        assert_eq!(security_reward(false, true), -1);
        assert_eq!(security_reward(true, true), 0);
        assert_eq!(security_reward(false, false), 0);
    }

    #[test]
    fn total_combines_rewards_with_lambda() {
        let mut i = input((-1.0, -2.0, -1.0, -1.0)); // z = 1
        i.gas_chosen = Some(50_000);
        i.gas_rejected = Some(60_000);
        i.safe_chosen = true;
        let b = compute_loss(&i, &Config::default());
        assert!((b.r_extra - 1.1666666666666667).abs() < 1e-12);
        let want = 0.6443966600735709 - 0.5 * 1.1666666666666667;
        assert!((b.l_total - want).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_total_is_exactly_dpo() {
        let config = Config {
            lambda: 0.0,
            ..Config::default()
        };
        let mut i = input((-1.0, -2.5, -0.5, -1.0));
        i.gas_chosen = Some(10);
        i.gas_rejected = Some(90);
        i.safe_chosen = true;
        let b = compute_loss(&i, &config);
        assert_eq!(b.l_total, b.l_dpo);
    }

    #[test]
    fn zero_weights_silence_rewards_exactly() {
        let config = Config {
            alpha: 0.0,
            beta: 0.0,
            ..Config::default()
        };
        let mut i = input((-1.0, -2.5, -0.5, -1.0));
        i.gas_chosen = Some(10);
        i.gas_rejected = Some(90);
        i.safe_chosen = true;
        let b = compute_loss(&i, &config);
        assert_eq!(b.r_extra, 0.0);
        assert_eq!(b.l_total, b.l_dpo);
    }

    #[test]
    fn swapping_sides_negates_logit_and_rewards() {
        let mut i = input((-1.25, -2.5, -0.5, -1.75));
        i.gas_chosen = Some(48_000);
        i.gas_rejected = Some(52_000);
        i.safe_chosen = true;
        let config = Config::default();
        let b = compute_loss(&i, &config);
        let s = compute_loss(&swapped(&i), &config);
        assert_eq!(s.z, -b.z);
        assert_eq!(s.r_g, -b.r_g);
        assert_eq!(s.r_v, -b.r_v);
        assert_eq!(s.r_extra, -b.r_extra);
        // softplus(-u) - softplus(u) = -u, so the two losses differ by tau*z.
        assert!((s.l_dpo - b.l_dpo - config.tau * b.z).abs() < 1e-12);
    }

    #[test]
    fn summary_means_match_sums() {
        let config = Config::default();
        let batch: Vec<LossBreakdown> = [
            input((-1.0, -1.0, -1.0, -1.0)),
            input((-1.0, -2.0, -1.0, -1.0)),
        ]
        .iter()
        .map(|i| compute_loss(i, &config))
        .collect();
        let s = summarize(&batch);
        assert_eq!(s.count, 2);
        assert!((s.mean_l_dpo * 2.0 - s.sum_l_dpo).abs() < 1e-15);
        let want_sum = std::f64::consts::LN_2 + 0.6443966600735709;
        assert!((s.sum_l_dpo - want_sum).abs() < 1e-12);
    }

    #[test]
    fn empty_batch_summary_is_zero_not_nan() {
        let s = summarize(&[]);
        assert_eq!(s.count, 0);
        assert_eq!(s.mean_l_total, 0.0);
        assert_eq!(s.sum_l_total, 0.0);
    }

    #[test]
    fn report_lines_distinguish_pairs_from_summary() {
        let config = Config::default();
        let b = compute_loss(&input((-1.0, -2.0, -1.0, -1.0)), &config);
        let s = summarize(std::slice::from_ref(&b));
        let pair_line = serde_json::to_string(&LossReportLine::Pair(b.clone())).unwrap();
        let summary_line = serde_json::to_string(&LossReportLine::Summary(s)).unwrap();
        assert_eq!(
            serde_json::from_str::<LossReportLine>(&pair_line).unwrap(),
            LossReportLine::Pair(b)
        );
        assert_eq!(
            serde_json::from_str::<LossReportLine>(&summary_line).unwrap(),
            LossReportLine::Summary(s)
        );
    }

    #[test]
    fn loss_input_schema_round_trip() {
        let line = r#"{"pair_id":"p1::gas::a::b","logp":{"policy_chosen":-1.5,"policy_rejected":-2.0,"ref_chosen":-1.0,"ref_rejected":-1.25},"gas_chosen":48000,"gas_rejected":52000,"safe_chosen":true,"safe_rejected":true}"#;
        let parsed: LossInput = serde_json::from_str(line).unwrap();
        assert_eq!(parsed.gas_chosen, Some(48_000));
        let back = serde_json::to_string(&parsed).unwrap();
        let reparsed: LossInput = serde_json::from_str(&back).unwrap();
        assert_eq!(reparsed, parsed);
    }
}
