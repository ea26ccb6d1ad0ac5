//! Pairwise, anchor and listwise (Plackett-Luce) preference losses with
//! closed-form gradients with respect to the scores.
//!
//! Every `-log σ(t)` is evaluated as `softplus(-t)` through the branch-free
//! form `max(x, 0) + log1p(exp(-|x|))`, which neither overflows nor loses the
//! small tail for large `|t|`.
//!
//! ```text
//! dpo(Sw, Sl)   = -log σ(Sw - Sl)
//! anchor(Sw, δ) = -log σ(Sw - δ)
//! listwise(S)   = Σ_k [ logsumexp(S_k..S_z) - S_k ]
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Hyperparams, LossBreakdown};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("score list is empty")]
    EmptyList,
    #[error("list needs at least 2 entries, got {0}")]
    ListTooShort(usize),
    #[error("beta must be finite and > 0, got {0}")]
    InvalidBeta(f64),
}

/// `log(1 + e^x)` without overflow or underflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, evaluated on the side that keeps `exp` bounded.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(v: f64, what: &'static str) -> Result<(), LossError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(LossError::NonFinite(what))
    }
}

/// Policy and reference log-likelihoods of one response under one conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyLogProbs {
    pub theta: f64,
    pub reference: f64,
}

impl PolicyLogProbs {
    pub fn new(theta: f64, reference: f64) -> Self {
        Self { theta, reference }
    }
}

/// `β · (log π_θ − log π_ref)`.
pub fn score(beta: f64, lp: PolicyLogProbs) -> Result<f64, LossError> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(LossError::InvalidBeta(beta));
    }
    check_finite(lp.theta, "policy log-prob")?;
    check_finite(lp.reference, "reference log-prob")?;
    Ok(beta * (lp.theta - lp.reference))
}

/// Loss value with gradients for a two-argument loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairLoss {
    pub value: f64,
    /// dL/dSw
    pub grad_chosen: f64,
    /// dL/dSl (or dL/dδ for the anchor)
    pub grad_other: f64,
}

/// `-log σ(Sw − Sl)`.
pub fn dpo_loss(chosen: f64, rejected: f64) -> Result<PairLoss, LossError> {
    check_finite(chosen, "chosen score")?;
    check_finite(rejected, "rejected score")?;
    let margin = chosen - rejected;
    let s = sigmoid(-margin);
    Ok(PairLoss {
        value: softplus(-margin),
        grad_chosen: -s,
        grad_other: s,
    })
}

/// `-log σ(Sw − δ)`.
pub fn anchor_loss(chosen: f64, delta: f64) -> Result<PairLoss, LossError> {
    check_finite(delta, "anchor margin")?;
    dpo_loss(chosen, delta).map_err(|e| match e {
        LossError::NonFinite(_) => LossError::NonFinite("chosen score"),
        other => other,
    })
}

/// Plackett-Luce negative log-likelihood of the order `S_1 > … > S_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ListLoss {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Listwise ranking loss over `scores`, best first.
///
/// Suffix log-sum-exps are built right to left in one pass:
/// `r_k = S_k + softplus(r_{k+1} − S_k)`, and the k-th term of the loss is
/// exactly that softplus. At `z = 2` the only non-zero term is
/// `softplus(S_2 − S_1)`, the same expression [`dpo_loss`] evaluates.
pub fn listwise_loss(scores: &[f64]) -> Result<ListLoss, LossError> {
    let z = scores.len();
    if z == 0 {
        return Err(LossError::EmptyList);
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(LossError::NonFinite("list score"));
    }

    // suffix[k] = log Σ_{j≥k} exp(S_j)
    let mut suffix = vec![0.0; z];
    let mut terms = vec![0.0; z];
    suffix[z - 1] = scores[z - 1];
    for k in (0..z - 1).rev() {
        let t = softplus(suffix[k + 1] - scores[k]);
        terms[k] = t;
        suffix[k] = scores[k] + t;
    }
    let value = terms.iter().sum();

    // dL/dS_m = -1 + Σ_{k≤m} exp(S_m − r_k); every summand is ≤ 1.
    let grad = (0..z)
        .map(|m| {
            let mass: f64 = suffix[..=m].iter().map(|r| (scores[m] - r).exp()).sum();
            mass - 1.0
        })
        .collect();
    Ok(ListLoss { value, grad })
}

/// Which terms of the joint objective are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub dpo: bool,
    pub anchor: bool,
    pub listwise: bool,
}

impl Objective {
    /// DPO + anchor + listwise.
    pub const FULL: Objective = Objective {
        dpo: true,
        anchor: true,
        listwise: true,
    };
    /// Text-only pairwise DPO.
    pub const DPO_ONLY: Objective = Objective {
        dpo: true,
        anchor: false,
        listwise: false,
    };
}

impl Default for Objective {
    fn default() -> Self {
        Self::FULL
    }
}

/// Joint loss with gradients with respect to every score and policy log-prob.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub breakdown: LossBreakdown,
    /// dL/dS for the chosen response on the original image (DPO + anchor).
    pub grad_chosen_score: f64,
    /// dL/dS for the rejected response on the original image.
    pub grad_rejected_score: f64,
    /// dL/dS_k for the chosen response on each list image.
    pub grad_list_scores: Vec<f64>,
    /// The same gradients expressed w.r.t. the policy log-probs (`β ·` the above).
    pub grad_chosen_logp: f64,
    pub grad_rejected_logp: f64,
    pub grad_list_logp: Vec<f64>,
}

/// Sum of the active objective terms for one sample.
pub fn total_loss(
    hyper: &Hyperparams,
    objective: Objective,
    chosen: PolicyLogProbs,
    rejected: PolicyLogProbs,
    list: &[PolicyLogProbs],
) -> Result<TotalLoss, LossError> {
    if !(hyper.beta.is_finite() && hyper.beta > 0.0) {
        return Err(LossError::InvalidBeta(hyper.beta));
    }
    if list.len() < 2 {
        return Err(LossError::ListTooShort(list.len()));
    }
    let beta = hyper.beta;
    let sw = score(beta, chosen)?;
    let sl = score(beta, rejected)?;
    let list_scores = list.iter().map(|&lp| score(beta, lp)).collect::<Result<Vec<_>, _>>()?;

    let mut grad_w = 0.0;
    let mut grad_l = 0.0;
    let mut grad_list = vec![0.0; list.len()];

    let dpo = if objective.dpo {
        let p = dpo_loss(sw, sl)?;
        grad_w += p.grad_chosen;
        grad_l += p.grad_other;
        p.value
    } else {
        0.0
    };
    let anchor = if objective.anchor {
        let p = anchor_loss(sw, hyper.delta)?;
        grad_w += p.grad_chosen;
        p.value
    } else {
        0.0
    };
    let listwise = if objective.listwise {
        let l = listwise_loss(&list_scores)?;
        grad_list = l.grad;
        l.value
    } else {
        0.0
    };

    Ok(TotalLoss {
        breakdown: LossBreakdown::new(dpo, anchor, listwise),
        grad_chosen_score: grad_w,
        grad_rejected_score: grad_l,
        grad_chosen_logp: beta * grad_w,
        grad_rejected_logp: beta * grad_l,
        grad_list_logp: grad_list.iter().map(|g| beta * g).collect(),
        grad_list_scores: grad_list,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn score_examples() {
        assert_eq!(score(1.0, PolicyLogProbs::new(-3.0, -3.0)).unwrap(), 0.0);
        assert!((score(0.1, PolicyLogProbs::new(1.0, -1.0)).unwrap() - 0.2).abs() < 1e-15);
        assert!((score(0.5, PolicyLogProbs::new(-1.3, -2.1)).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            score(0.0, PolicyLogProbs::new(0.0, 0.0)),
            Err(LossError::InvalidBeta(_))
        ));
        assert!(matches!(
            score(1.0, PolicyLogProbs::new(f64::NAN, 0.0)),
            Err(LossError::NonFinite(_))
        ));
    }

    #[test]
    fn dpo_examples() {
        assert!((dpo_loss(0.3, 0.3).unwrap().value - LN2).abs() < 1e-15);
        // softplus(-1) = ln(1 + e^-1)
        assert!((dpo_loss(1.0, 0.0).unwrap().value - 0.313_261_687_518_222_8).abs() < 1e-15);
        let big = dpo_loss(50.0, 0.0).unwrap();
        assert!(big.value >= 0.0 && big.value < 1e-20);
        let neg = dpo_loss(-50.0, 0.0).unwrap();
        assert!((neg.value - 50.0).abs() < 1e-12);
        assert!(dpo_loss(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn dpo_gradient_signs() {
        let p = dpo_loss(0.0, 0.0).unwrap();
        assert_eq!(p.grad_chosen, -0.5);
        assert_eq!(p.grad_other, 0.5);
    }

    #[test]
    fn anchor_examples() {
        assert!((anchor_loss(0.7, 0.7).unwrap().value - LN2).abs() < 1e-15);
        // softplus(-2) = ln(1 + e^-2)
        assert!((anchor_loss(2.0, 0.0).unwrap().value - 0.126_928_011_042_972_6).abs() < 1e-15);
        assert!(anchor_loss(800.0, 0.0).unwrap().value == 0.0);
        assert!(anchor_loss(0.0, f64::NAN).is_err());
    }

    #[test]
    fn listwise_examples() {
        assert_eq!(listwise_loss(&[3.2]).unwrap().value, 0.0);
        assert_eq!(listwise_loss(&[3.2]).unwrap().grad, vec![0.0]);
        let eq = listwise_loss(&[0.4, 0.4, 0.4]).unwrap();
        assert!((eq.value - 6f64.ln()).abs() < 1e-12);
        assert_eq!(listwise_loss(&[]), Err(LossError::EmptyList));
        assert!(listwise_loss(&[0.0, f64::NEG_INFINITY]).is_err());
    }

    #[test]
    fn listwise_pair_is_dpo() {
        for &(a, b) in &[(0.0, 0.0), (1.0, -2.5), (-30.0, 40.0), (1e-3, 7.0)] {
            assert_eq!(
                listwise_loss(&[a, b]).unwrap().value.to_bits(),
                dpo_loss(a, b).unwrap().value.to_bits()
            );
        }
    }

    #[test]
    fn listwise_extreme_scores_stay_finite() {
        let l = listwise_loss(&[-700.0, 0.0, 700.0]).unwrap();
        assert!(l.value.is_finite());
        // Reverse order: the loss is dominated by 700 + 700 + 700.
        assert!((l.value - 2100.0).abs() < 1e-9);
        assert!(l.grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn total_uniform_case() {
        let h = Hyperparams::new(0.1, 0.0, 3).unwrap();
        let lp = PolicyLogProbs::new(-1.0, -1.0);
        let t = total_loss(&h, Objective::FULL, lp, lp, &[lp; 3]).unwrap();
        assert!((t.breakdown.dpo - LN2).abs() < 1e-15);
        assert!((t.breakdown.anchor - LN2).abs() < 1e-15);
        assert!((t.breakdown.listwise - 6f64.ln()).abs() < 1e-12);
        assert!((t.breakdown.total - 3.178_053_830_347_945_6).abs() < 1e-12);
        // Anchor and DPO both pull the chosen score with -1/2.
        assert_eq!(t.grad_chosen_score, -1.0);
        assert!((t.grad_chosen_logp - -0.1).abs() < 1e-15);
    }

    #[test]
    fn total_respects_disabled_terms() {
        let h = Hyperparams::new(1.0, 0.0, 3).unwrap();
        let lp = PolicyLogProbs::new(0.0, 0.0);
        let t = total_loss(&h, Objective::DPO_ONLY, lp, lp, &[lp; 3]).unwrap();
        assert_eq!(t.breakdown.anchor, 0.0);
        assert_eq!(t.breakdown.listwise, 0.0);
        assert!(t.grad_list_scores.iter().all(|&g| g == 0.0));
        assert_eq!(t.breakdown.total, t.breakdown.dpo);
    }

    #[test]
    fn total_needs_two_list_entries() {
        let h = Hyperparams::new(1.0, 0.0, 2).unwrap();
        let lp = PolicyLogProbs::new(0.0, 0.0);
        assert_eq!(
            total_loss(&h, Objective::FULL, lp, lp, &[lp]),
            Err(LossError::ListTooShort(1))
        );
    }

    #[test]
    fn sigmoid_tails() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
    }
}
