//! Confusion counts, derived rates and rank-based AUC.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("AUC needs at least one positive and one negative (got {positives} / {negatives})")]
    SingleClassOnly { positives: usize, negatives: usize },
    #[error("score {0} is not finite")]
    NonFiniteScore(usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    #[inline]
    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Metrics for one evaluation regime, in the on-disk JSON layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub cutoff: Option<f64>,
    pub pairs: u64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub auc: Option<f64>,
}

impl EvalReport {
    pub fn from_confusion(mode: impl Into<String>, cutoff: Option<f64>, c: Confusion, auc: Option<f64>) -> Self {
        Self {
            mode: mode.into(),
            cutoff,
            pairs: c.total(),
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
            accuracy: c.accuracy(),
            precision: c.precision(),
            recall: c.recall(),
            auc,
        }
    }

    pub fn confusion(&self) -> Confusion {
        Confusion {
            tp: self.tp,
            fp: self.fp,
            tn: self.tn,
            fn_: self.fn_,
        }
    }
}

/// Mann–Whitney AUC with midranks for ties:
/// `(sum of positive ranks - P(P+1)/2) / (P Q)`.
///
/// Ranks are kept doubled so the whole statistic is integer arithmetic and
/// matches a pairwise count bit for bit.
pub fn auc(scored: &[(f64, bool)]) -> Result<f64, MetricError> {
    if let Some(i) = scored.iter().position(|(s, _)| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(i));
    }
    let positives = scored.iter().filter(|(_, l)| *l).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClassOnly { positives, negatives });
    }

    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_unstable_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    // Twice the sum of 1-based midranks of the positives.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[start]].0 {
            end += 1;
        }
        // ranks start+1 ..= end; midrank*2 = start + 1 + end
        let doubled_midrank = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| scored[i].1).count() as u128;
        doubled_rank_sum += doubled_midrank * pos_in_group;
        start = end;
    }
    let p = positives as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * negatives as u128) as f64)
}
