//! The extended DPO loss, decomposed pair by pair.
//!
//! Three pairs with different reward situations, scored under the default
//! configuration and again with raw gas rewards:
//!
//! ```text
//! cargo run --example loss_breakdown
//! ```

use prefopt::config::{Config, GasRewardMode};
use prefopt::loss::{compute_loss, summarize, LogProbs, LossInput};

fn main() {
    let pairs = vec![
        // The policy already prefers the chosen side, and it is cheaper.
        LossInput {
            pair_id: "p1::gas::fast::slow".to_string(),
            logp: LogProbs {
                policy_chosen: -10.1,
                policy_rejected: -12.4,
                ref_chosen: -11.0,
                ref_rejected: -11.8,
            },
            gas_chosen: Some(45_000),
            gas_rejected: Some(52_000),
            safe_chosen: true,
            safe_rejected: true,
        },
        // Indifferent policy: z = 0, so the DPO term is exactly ln 2.
        LossInput {
            pair_id: "p2::correctness::ok::broken".to_string(),
            logp: LogProbs {
                policy_chosen: -9.5,
                policy_rejected: -9.5,
                ref_chosen: -9.5,
                ref_rejected: -9.5,
            },
            gas_chosen: None,
            gas_rejected: None,
            safe_chosen: true,
            safe_rejected: true,
        },
        // Security pair: the chosen side is clean, the rejected one is not.
        LossInput {
            pair_id: "p3::security::safe::unsafe".to_string(),
            logp: LogProbs {
                policy_chosen: -8.2,
                policy_rejected: -7.9,
                ref_chosen: -8.4,
                ref_rejected: -8.0,
            },
            gas_chosen: None,
            gas_rejected: None,
            safe_chosen: true,
            safe_rejected: false,
        },
    ];

    let config = Config::default();
    println!(
        "defaults: tau={} lambda={} alpha={} beta={} gas_reward_mode={:?}",
        config.tau, config.lambda, config.alpha, config.beta, config.gas_reward_mode
    );
    println!();

    let mut breakdowns = Vec::new();
    println!(
        "{:<30} {:>7} {:>9} {:>9} {:>4} {:>9}",
        "pair", "z", "l_dpo", "r_g", "r_v", "l_total"
    );
    for input in &pairs {
        let b = compute_loss(input, &config);
        println!(
            "{:<30} {:>7.3} {:>9.6} {:>9.6} {:>4} {:>9.6}",
            b.pair_id, b.z, b.l_dpo, b.r_g, b.r_v, b.l_total
        );
        breakdowns.push(b);
    }
    let summary = summarize(&breakdowns);
    println!(
        "\nsummary over {} pairs: mean l_dpo={:.6} mean r_extra={:.6} mean l_total={:.6}",
        summary.count, summary.mean_l_dpo, summary.mean_r_extra, summary.mean_l_total
    );

    // Raw gas rewards keep the unit difference instead of normalizing it.
    let raw_config = Config {
        gas_reward_mode: GasRewardMode::Raw,
        ..Config::default()
    };
    let raw = compute_loss(&pairs[0], &raw_config);
    println!(
        "\nsame gas pair, gas_reward_mode=raw: r_g = {} (52000 - 45000 gas units)",
        raw.r_g
    );

    // With lambda = 0 the extra rewards vanish and only DPO remains.
    let plain = Config {
        lambda: 0.0,
        ..Config::default()
    };
    let b = compute_loss(&pairs[0], &plain);
    assert_eq!(b.l_total, b.l_dpo);
    println!("lambda = 0 reduces l_total to the plain DPO term: {:.6}", b.l_total);
}
