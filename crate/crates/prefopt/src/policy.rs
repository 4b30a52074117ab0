//! A toy tabular policy and a finite-difference gradient checker for the
//! preference loss.
//!
//! The policy is a `contexts x vocab` table of logits; token probabilities
//! are an independent softmax per context and a sequence is a list of
//! `(context, token)` steps. This is deliberately the smallest model with a
//! non-trivial softmax Jacobian: enough to verify the analytic DPO gradient
//! against central finite differences without pulling in a tensor library.

use rand::Rng;

use crate::loss::softplus;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Tabular softmax policy: `theta[context][token]` logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    pub theta: Vec<Vec<f64>>,
}

impl ToyPolicy {
    /// All-zero logits: uniform over the vocabulary in every context.
    pub fn uniform(contexts: usize, vocab: usize) -> ToyPolicy {
        ToyPolicy {
            theta: vec![vec![0.0; vocab]; contexts],
        }
    }

    /// Logits drawn uniformly from `[-2, 2]`.
    pub fn random<R: Rng>(contexts: usize, vocab: usize, rng: &mut R) -> ToyPolicy {
        ToyPolicy {
            theta: (0..contexts)
                .map(|_| (0..vocab).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect(),
        }
    }

    pub fn contexts(&self) -> usize {
        self.theta.len()
    }

    pub fn vocab(&self) -> usize {
        self.theta.first().map_or(0, Vec::len)
    }

    /// Log-probabilities of every token in one context, max-shifted for
    /// stability.
    pub fn log_softmax(&self, context: usize) -> Vec<f64> {
        let row = &self.theta[context];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        row.iter().map(|t| t - lse).collect()
    }

    pub fn softmax(&self, context: usize) -> Vec<f64> {
        self.log_softmax(context).iter().map(|lp| lp.exp()).collect()
    }

    /// Log-probability of a sequence of `(context, token)` steps: the sum of
    /// per-step token log-probabilities.
    pub fn sequence_logprob(&self, sequence: &[(usize, usize)]) -> f64 {
        sequence
            .iter()
            .map(|&(ctx, tok)| self.log_softmax(ctx)[tok])
            .sum()
    }
}

/// One preference example over toy sequences. Reference log-probabilities
/// are fixed constants: the reference model is frozen during optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceExample {
    pub chosen: Vec<(usize, usize)>,
    pub rejected: Vec<(usize, usize)>,
    pub ref_logp_chosen: f64,
    pub ref_logp_rejected: f64,
    /// Constant extra-reward term `lambda * (-r_extra)` added to the total
    /// loss; it does not depend on the policy parameters.
    pub reward_term: f64,
}

impl PreferenceExample {
    /// Random sequences of length `1..=max_len` plus random reference
    /// log-probabilities and a random reward term.
    pub fn random<R: Rng>(
        contexts: usize,
        vocab: usize,
        max_len: usize,
        rng: &mut R,
    ) -> PreferenceExample {
        let seq = |rng: &mut R| -> Vec<(usize, usize)> {
            let len = rng.gen_range(1..=max_len);
            (0..len)
                .map(|_| (rng.gen_range(0..contexts), rng.gen_range(0..vocab)))
                .collect()
        };
        PreferenceExample {
            chosen: seq(rng),
            rejected: seq(rng),
            ref_logp_chosen: rng.gen_range(-3.0..0.0),
            ref_logp_rejected: rng.gen_range(-3.0..0.0),
            reward_term: rng.gen_range(-1.0..1.0),
        }
    }
}

/// Preference logit `z` for a toy example under `policy`.
pub fn policy_logit(policy: &ToyPolicy, example: &PreferenceExample) -> f64 {
    (policy.sequence_logprob(&example.chosen) - example.ref_logp_chosen)
        - (policy.sequence_logprob(&example.rejected) - example.ref_logp_rejected)
}

/// DPO loss of the toy example: `softplus(-tau * z)`.
pub fn policy_dpo_loss(policy: &ToyPolicy, example: &PreferenceExample, tau: f64) -> f64 {
    softplus(-(tau * policy_logit(policy, example)))
}

/// Total loss: DPO plus the example's constant reward term.
pub fn policy_total_loss(policy: &ToyPolicy, example: &PreferenceExample, tau: f64) -> f64 {
    policy_dpo_loss(policy, example, tau) + example.reward_term
}

/// Analytic gradient of the loss with respect to every logit.
///
/// With `m[v]` the count of token `v` among the steps of a sequence that use
/// context `ctx`, and `L` that sequence's step count in `ctx`, the gradient
/// of the sequence log-probability is `m[v] - L * p(v | ctx)`; the chain
/// rule through `softplus(-tau * z)` contributes `-tau * sigmoid(-tau * z)`.
///
/// The reward term is constant in the logits, so this is the gradient of
/// both [`policy_dpo_loss`] and [`policy_total_loss`].
pub fn policy_loss_grad(
    policy: &ToyPolicy,
    example: &PreferenceExample,
    tau: f64,
) -> Vec<Vec<f64>> {
    let contexts = policy.contexts();
    let vocab = policy.vocab();
    let mut count_chosen = vec![vec![0i64; vocab]; contexts];
    let mut count_rejected = vec![vec![0i64; vocab]; contexts];
    let mut len_chosen = vec![0i64; contexts];
    let mut len_rejected = vec![0i64; contexts];
    for &(ctx, tok) in &example.chosen {
        count_chosen[ctx][tok] += 1;
        len_chosen[ctx] += 1;
    }
    for &(ctx, tok) in &example.rejected {
        count_rejected[ctx][tok] += 1;
        len_rejected[ctx] += 1;
    }

    let z = policy_logit(policy, example);
    let coeff = -tau * sigmoid(-(tau * z));
    let mut grad = vec![vec![0.0; vocab]; contexts];
    for ctx in 0..contexts {
        let p = policy.softmax(ctx);
        let dl = (len_chosen[ctx] - len_rejected[ctx]) as f64;
        for v in 0..vocab {
            let dz = (count_chosen[ctx][v] - count_rejected[ctx][v]) as f64 - dl * p[v];
            grad[ctx][v] = coeff * dz;
        }
    }
    grad
}

/// Central-difference gradient of an arbitrary scalar function of the
/// policy: `(f(theta + h) - f(theta - h)) / (2h)` per coordinate.
pub fn numeric_grad<F: Fn(&ToyPolicy) -> f64>(
    policy: &ToyPolicy,
    step: f64,
    f: F,
) -> Vec<Vec<f64>> {
    let mut probe = policy.clone();
    let mut grad = vec![vec![0.0; policy.vocab()]; policy.contexts()];
    #[allow(clippy::needless_range_loop)]
    for ctx in 0..policy.contexts() {
        for v in 0..policy.vocab() {
            let original = probe.theta[ctx][v];
            probe.theta[ctx][v] = original + step;
            let plus = f(&probe);
            probe.theta[ctx][v] = original - step;
            let minus = f(&probe);
            probe.theta[ctx][v] = original;
            grad[ctx][v] = (plus - minus) / (2.0 * step);
        }
    }
    grad
}

/// Result of comparing the analytic gradient against finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Coordinate `(context, token)` with the largest relative error.
    pub worst: (usize, usize),
    pub ok: bool,
}

/// Checks the analytic gradient of the total loss against central
/// differences with step `h`. Relative error per coordinate is
/// `|a - n| / max(|a|, |n|, 0.01)`; the floor keeps near-zero coordinates
/// from amplifying finite-difference noise.
pub fn grad_check(
    policy: &ToyPolicy,
    example: &PreferenceExample,
    tau: f64,
    h: f64,
    tol: f64,
) -> GradCheck {
    let analytic = policy_loss_grad(policy, example, tau);
    let numeric = numeric_grad(policy, h, |p| policy_total_loss(p, example, tau));
    let mut max_rel_err = 0.0;
    let mut worst = (0, 0);
    for ctx in 0..policy.contexts() {
        for v in 0..policy.vocab() {
            let a = analytic[ctx][v];
            let n = numeric[ctx][v];
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-2);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (ctx, v);
            }
        }
    }
    GradCheck {
        max_rel_err,
        worst,
        ok: max_rel_err <= tol,
    }
}
