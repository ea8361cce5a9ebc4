//! Closed testing under a monotone order restriction.
//!
//! With `pi_0 <= pi_1 <= ... <= pi_k`, the closure of the many-to-one
//! hypotheses collapses to a chain: `H_0i` is rejected only together with
//! every top segment `{0, i..k}`, so each dose gets the intersection-union
//! p-value `max_{j >= i} S_j` for per-level tests `S_j`. Two level tests are
//! provided: the single contrast `D_j - C` (variant P) and the global
//! Williams test on groups `0..=j` (variant C).

use serde::{Deserialize, Serialize};

use crate::contrasts::{
    contrast_test, dunnett_matrix, global_maxt_p, pad_to_full, single_contrast_p, williams_matrix,
    TestReport,
};
use crate::error::{Error, Result};
use crate::model::{fit_saturated_logit, BoundaryPolicy, DoseGroupData, ModelFit};
use crate::mvn::MvnOptions;

fn check_fit(fit: &ModelFit) -> Result<usize> {
    if fit.groups() < 2 {
        return Err(Error::InvalidData(format!(
            "need a control and at least one dose, got {} groups",
            fit.groups()
        )));
    }
    Ok(fit.groups() - 1)
}

/// Running maximum from the top dose down.
fn chain_max(level_p: &[f64]) -> Vec<f64> {
    let mut out = level_p.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    out
}

/// Variant P: level `j` is tested by the single contrast `D_j - C`.
pub fn ctp_pairwise(fit: &ModelFit) -> Result<Vec<f64>> {
    let k = check_fit(fit)?;
    let level = (1..=k)
        .map(|j| single_contrast_p(fit, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(chain_max(&level))
}

/// Global Williams p-value on groups `0..=top`, using zero-padded contrasts
/// and the full-model covariance.
fn subset_williams_p(fit: &ModelFit, top: usize, opts: &MvnOptions) -> Result<f64> {
    let g = fit.groups();
    let indices: Vec<usize> = (0..=top).collect();
    let sub = williams_matrix(&fit.sizes[..=top])?;
    let cm = pad_to_full(&sub, g, &indices)?;
    global_maxt_p(fit, &cm, opts)
}

/// Variant C: level `j >= 2` is the global Williams test on groups `0..=j`;
/// level 1 is the single contrast `D_1 - C`.
pub fn ctp_williams(fit: &ModelFit, opts: &MvnOptions) -> Result<Vec<f64>> {
    let k = check_fit(fit)?;
    let mut level = Vec::with_capacity(k);
    level.push(single_contrast_p(fit, 1)?);
    for j in 2..=k {
        level.push(subset_williams_p(fit, j, opts)?);
    }
    Ok(chain_max(&level))
}

/// maxT adjusted p-values over the Dunnett family, one per dose.
pub fn dunnett_baseline(fit: &ModelFit, opts: &MvnOptions) -> Result<Vec<f64>> {
    check_fit(fit)?;
    let report = contrast_test(fit, &dunnett_matrix(&fit.sizes)?, opts)?;
    Ok(report.rows.iter().map(|r| r.p_adjusted).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilliamsResult {
    /// Rows in builder order; row 0 is `D_max - C`.
    pub report: TestReport,
    /// Minimum adjusted p-value.
    pub global: f64,
}

impl WilliamsResult {
    /// Adjusted p-value of the `D_max - C` row.
    pub fn top_dose(&self) -> f64 {
        self.report.rows[0].p_adjusted
    }
}

/// maxT test over the full Williams family.
pub fn williams_baseline(fit: &ModelFit, opts: &MvnOptions) -> Result<WilliamsResult> {
    check_fit(fit)?;
    let report = contrast_test(fit, &williams_matrix(&fit.sizes)?, opts)?;
    let global = report.min_adjusted();
    Ok(WilliamsResult { report, global })
}

/// One dose-vs-control row of an analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseEntry {
    pub dose: usize,
    pub label: String,
    pub p_dunnett: f64,
    /// Only the top dose carries a Williams p-value.
    pub p_williams: Option<f64>,
    pub p_pairwise: f64,
    pub p_subset_williams: f64,
}

/// All four procedures applied to one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtpResult {
    pub entries: Vec<DoseEntry>,
    pub williams_global: f64,
    pub alpha: f64,
    pub seed: u64,
    pub boundary_policy: BoundaryPolicy,
    pub corrected_groups: Vec<usize>,
}

impl CtpResult {
    /// Doses rejected by variant P at `alpha`.
    pub fn rejected_pairwise(&self) -> Vec<usize> {
        self.rejected(|e| e.p_pairwise)
    }

    /// Doses rejected by variant C at `alpha`.
    pub fn rejected_subset_williams(&self) -> Vec<usize> {
        self.rejected(|e| e.p_subset_williams)
    }

    fn rejected(&self, p: impl Fn(&DoseEntry) -> f64) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| p(e) <= self.alpha)
            .map(|e| e.dose)
            .collect()
    }
}

/// Fits `data` and runs Dunnett, Williams and both closed testing variants.
pub fn analyze(
    data: &DoseGroupData,
    policy: BoundaryPolicy,
    alpha: f64,
    opts: &MvnOptions,
) -> Result<CtpResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidData(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let fit = fit_saturated_logit(data, policy)?;
    let k = data.doses();
    let dunnett = dunnett_baseline(&fit, opts)?;
    let williams = williams_baseline(&fit, opts)?;
    let pairwise = ctp_pairwise(&fit)?;
    let subset = ctp_williams(&fit, opts)?;
    let entries = (1..=k)
        .map(|i| DoseEntry {
            dose: i,
            label: data.labels()[i].clone(),
            p_dunnett: dunnett[i - 1],
            p_williams: (i == k).then(|| williams.top_dose()),
            p_pairwise: pairwise[i - 1],
            p_subset_williams: subset[i - 1],
        })
        .collect();
    Ok(CtpResult {
        entries,
        williams_global: williams.global,
        alpha,
        seed: opts.seed,
        boundary_policy: policy,
        corrected_groups: fit
            .correction_applied
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::norm_sf;
    use approx::assert_abs_diff_eq;

    fn fit(n: &[u64], y: &[u64]) -> ModelFit {
        fit_saturated_logit(&DoseGroupData::from_counts(n, y).unwrap(), BoundaryPolicy::Haldane).unwrap()
    }

    fn liarozole() -> ModelFit {
        fit(&[34, 35, 36, 34], &[2, 6, 4, 13])
    }

    // Reference values from an independent MVN integration of the same
    // statistics; the published table agrees to its printed precision.
    #[test]
    fn liarozole_variants() {
        let f = liarozole();
        let opts = MvnOptions::default();
        let p = ctp_pairwise(&f).unwrap();
        for (a, e) in p.iter().zip([0.22095326, 0.22095326, 0.00231616]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-7);
        }
        let c = ctp_williams(&f, &opts).unwrap();
        for (a, e) in c.iter().zip([0.15294039, 0.15294039, 0.00392881]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-4);
        }
        let d = dunnett_baseline(&f, &opts).unwrap();
        for (a, e) in d.iter().zip([0.15352028, 0.36232045, 0.00564586]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-4);
        }
        let w = williams_baseline(&f, &opts).unwrap();
        assert_abs_diff_eq!(w.global, 0.00392872, epsilon = 1e-4);
        assert_eq!(w.global, w.top_dose());
        assert_eq!(c[2], ctp_williams(&f, &opts).unwrap()[2]);
    }

    #[test]
    fn decreasing_raw_p_gives_raw() {
        // responses rise steeply so raw p falls with dose
        let f = fit(&[40, 40, 40, 40], &[4, 10, 16, 24]);
        let p = ctp_pairwise(&f).unwrap();
        for j in 1..=3 {
            assert_eq!(p[j - 1], single_contrast_p(&f, j).unwrap());
        }
    }

    #[test]
    fn single_dose_collapses() {
        let f = fit(&[30, 30], &[5, 12]);
        let opts = MvnOptions::default();
        let raw = norm_sf((f.eta[1] - f.eta[0]) / (f.var_eta[0] + f.var_eta[1]).sqrt());
        assert_eq!(ctp_pairwise(&f).unwrap(), vec![raw]);
        assert_eq!(ctp_williams(&f, &opts).unwrap(), vec![raw]);
        assert_eq!(dunnett_baseline(&f, &opts).unwrap(), vec![raw]);
        assert_eq!(williams_baseline(&f, &opts).unwrap().global, raw);
    }

    #[test]
    fn top_of_tree_is_global_williams() {
        let f = fit(&[20, 25, 30, 22, 28], &[3, 5, 9, 8, 14]);
        let opts = MvnOptions::default();
        let c = ctp_williams(&f, &opts).unwrap();
        let w = williams_baseline(&f, &opts).unwrap();
        assert_abs_diff_eq!(c[3], w.global, epsilon = 1e-4);
    }

    #[test]
    fn analyze_layout() {
        let data = DoseGroupData::new(
            ["0", "50", "75", "150"].map(String::from).to_vec(),
            vec![34, 35, 36, 34],
            vec![2, 6, 4, 13],
        )
        .unwrap();
        let r = analyze(&data, BoundaryPolicy::Haldane, 0.05, &MvnOptions::default()).unwrap();
        assert_eq!(r.entries.len(), 3);
        assert_eq!(r.entries[2].label, "150");
        assert!(r.entries[0].p_williams.is_none());
        assert!(r.entries[2].p_williams.is_some());
        assert_eq!(r.rejected_pairwise(), vec![3]);
        assert_eq!(r.rejected_subset_williams(), vec![3]);
        assert!(r.corrected_groups.is_empty());
        assert!(analyze(&data, BoundaryPolicy::Haldane, 1.5, &MvnOptions::default()).is_err());
    }

    #[test]
    fn analyze_reject_policy() {
        let data = DoseGroupData::from_counts(&[20, 20, 20], &[0, 3, 8]).unwrap();
        let err = analyze(&data, BoundaryPolicy::Reject, 0.05, &MvnOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BoundaryCount { group: 0, .. }));
        let r = analyze(&data, BoundaryPolicy::Haldane, 0.05, &MvnOptions::default()).unwrap();
        assert_eq!(r.corrected_groups, vec![0]);
    }

    #[test]
    fn chain_max_is_suffix_max() {
        assert_eq!(chain_max(&[0.1, 0.3, 0.2, 0.05]), vec![0.3, 0.3, 0.2, 0.05]);
        assert_eq!(chain_max(&[0.4]), vec![0.4]);
        assert!(chain_max(&[]).is_empty());
    }
}
