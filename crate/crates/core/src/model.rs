//! Saturated one-way logistic model for grouped binomial data.
//!
//! With one parameter per group the maximum likelihood fit has a closed form:
//! the log-odds of group `i` is `log(y_i / (n_i - y_i))` and its Wald variance
//! is `1/y_i + 1/(n_i - y_i)`. Groups are independent, so the covariance of
//! the log-odds vector is diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-group sample sizes and responder counts. Index 0 is the control; the
/// remaining groups are in increasing dose order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoseGroupData {
    labels: Vec<String>,
    n: Vec<u64>,
    y: Vec<u64>,
}

impl DoseGroupData {
    pub fn new(labels: Vec<String>, n: Vec<u64>, y: Vec<u64>) -> Result<Self> {
        if labels.len() != n.len() || n.len() != y.len() {
            return Err(Error::InvalidData(format!(
                "length mismatch: {} labels, {} sizes, {} counts",
                labels.len(),
                n.len(),
                y.len()
            )));
        }
        if n.len() < 2 {
            return Err(Error::InvalidData(
                "need a control and at least one dose group".into(),
            ));
        }
        for (i, (&ni, &yi)) in n.iter().zip(&y).enumerate() {
            if ni == 0 {
                return Err(Error::InvalidData(format!(
                    "group {} ({}) has zero subjects",
                    i, labels[i]
                )));
            }
            if yi > ni {
                return Err(Error::InvalidData(format!(
                    "group {} ({}) has {} responders out of {}",
                    i, labels[i], yi, ni
                )));
            }
        }
        Ok(Self { labels, n, y })
    }

    /// Builds data with labels `0, 1, ..., k`.
    pub fn from_counts(n: &[u64], y: &[u64]) -> Result<Self> {
        let labels = (0..n.len()).map(|i| i.to_string()).collect();
        Self::new(labels, n.to_vec(), y.to_vec())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn sizes(&self) -> &[u64] {
        &self.n
    }

    pub fn responders(&self) -> &[u64] {
        &self.y
    }

    /// Number of groups including the control.
    pub fn groups(&self) -> usize {
        self.n.len()
    }

    /// Number of dose groups (`k`).
    pub fn doses(&self) -> usize {
        self.n.len() - 1
    }
}

/// What to do with a group whose responder count is 0 or `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Add half a success and half a failure to the affected group only.
    #[default]
    Haldane,
    /// Refuse to fit.
    Reject,
    /// Limit of the iterative ML fit: the boundary group's log-odds diverges
    /// and its variance grows without bound.
    Unbounded,
}

impl std::str::FromStr for BoundaryPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "haldane" => Ok(Self::Haldane),
            "reject" => Ok(Self::Reject),
            "unbounded" => Ok(Self::Unbounded),
            other => Err(format!("unknown boundary policy `{other}` (expected haldane or reject)")),
        }
    }
}

impl std::fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Haldane => "haldane",
            Self::Reject => "reject",
            Self::Unbounded => "unbounded",
        })
    }
}

/// Group log-odds and their Wald variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub eta: Vec<f64>,
    pub var_eta: Vec<f64>,
    pub correction_applied: Vec<bool>,
    /// Observed group sizes, before any boundary correction. Williams
    /// pooling weights use these.
    pub sizes: Vec<u64>,
}

impl ModelFit {
    pub fn groups(&self) -> usize {
        self.eta.len()
    }

    /// True if any group needed a boundary correction.
    pub fn corrected(&self) -> bool {
        self.correction_applied.iter().any(|&c| c)
    }

    /// Fitted response probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| 1.0 / (1.0 + (-e).exp())).collect()
    }
}

const UNBOUNDED_LOG_ODDS: f64 = 25.0;
const UNBOUNDED_VARIANCE: f64 = 1e12;

fn is_boundary(n: u64, y: u64) -> bool {
    y == 0 || y == n
}

/// Fits the saturated one-way logit model in closed form.
pub fn fit_saturated_logit(data: &DoseGroupData, policy: BoundaryPolicy) -> Result<ModelFit> {
    let (n, y) = (data.sizes(), data.responders());
    if n.iter().zip(y).all(|(&ni, &yi)| is_boundary(ni, yi)) {
        return Err(Error::NoInformation);
    }

    let groups = data.groups();
    let mut eta = Vec::with_capacity(groups);
    let mut var_eta = Vec::with_capacity(groups);
    let mut correction_applied = Vec::with_capacity(groups);
    for i in 0..groups {
        let (ni, yi) = (n[i], y[i]);
        let (succ, fail, corrected) = if is_boundary(ni, yi) {
            match policy {
                BoundaryPolicy::Reject => {
                    return Err(Error::BoundaryCount {
                        group: i,
                        label: data.labels()[i].clone(),
                        responders: yi,
                        size: ni,
                    })
                }
                BoundaryPolicy::Haldane => (yi as f64 + 0.5, (ni - yi) as f64 + 0.5, true),
                BoundaryPolicy::Unbounded => {
                    let sign = if yi == 0 { -1.0 } else { 1.0 };
                    eta.push(sign * UNBOUNDED_LOG_ODDS);
                    var_eta.push(UNBOUNDED_VARIANCE);
                    correction_applied.push(true);
                    continue;
                }
            }
        } else {
            (yi as f64, (ni - yi) as f64, false)
        };
        eta.push((succ / fail).ln());
        var_eta.push(1.0 / succ + 1.0 / fail);
        correction_applied.push(corrected);
    }
    Ok(ModelFit {
        eta,
        var_eta,
        correction_applied,
        sizes: n.to_vec(),
    })
}
