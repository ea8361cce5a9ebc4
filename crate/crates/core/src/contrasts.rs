//! Dunnett and Williams contrast matrices and the contrast test on the
//! log-odds scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelFit;
use crate::mvn::{adjust_maxt, mvn_upper_orthant_complement, norm_sf, MvnOptions, MvnSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    Dunnett,
    Williams,
    Single,
    SubsetWilliams,
}

/// Named contrast rows over all groups of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastMatrix {
    rows: Vec<(String, Vec<f64>)>,
    kind: ContrastKind,
}

impl ContrastMatrix {
    /// Checks that every row sums to zero, has both signs, and that all rows
    /// have the same length.
    pub fn new(rows: Vec<(String, Vec<f64>)>, kind: ContrastKind) -> Result<Self> {
        let Some(width) = rows.first().map(|(_, c)| c.len()) else {
            return Err(Error::InvalidContrast("no rows".into()));
        };
        for (name, coef) in &rows {
            if coef.len() != width {
                return Err(Error::InvalidContrast(format!(
                    "row `{name}` has {} coefficients, expected {width}",
                    coef.len()
                )));
            }
            let sum: f64 = coef.iter().sum();
            if sum.abs() > 1e-12 {
                return Err(Error::InvalidContrast(format!("row `{name}` sums to {sum}")));
            }
            if !coef.iter().any(|&c| c < 0.0) || !coef.iter().any(|&c| c > 0.0) {
                return Err(Error::InvalidContrast(format!(
                    "row `{name}` needs a negative and a positive coefficient"
                )));
            }
        }
        Ok(Self { rows, kind })
    }

    /// Single contrast of dose `dose` against the control in `groups` groups.
    pub fn single(groups: usize, dose: usize) -> Result<Self> {
        if dose == 0 || dose >= groups {
            return Err(Error::InvalidContrast(format!(
                "dose index {dose} out of range for {groups} groups"
            )));
        }
        let mut c = vec![0.0; groups];
        c[0] = -1.0;
        c[dose] = 1.0;
        Self::new(vec![(format!("D{dose} - C"), c)], ContrastKind::Single)
    }

    pub fn rows(&self) -> &[(String, Vec<f64>)] {
        &self.rows
    }

    pub fn kind(&self) -> ContrastKind {
        self.kind
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.rows[0].1.len()
    }

    /// Replaces row names.
    pub fn renamed<I: IntoIterator<Item = String>>(mut self, names: I) -> Self {
        for (row, name) in self.rows.iter_mut().zip(names) {
            row.0 = name;
        }
        self
    }
}

fn check_groups(n: &[u64]) -> Result<()> {
    if n.len() < 2 {
        return Err(Error::InvalidContrast(format!(
            "need at least 2 groups, got {}",
            n.len()
        )));
    }
    Ok(())
}

/// Many-to-one contrasts: row `i` compares dose `i` with the control.
pub fn dunnett_matrix(n: &[u64]) -> Result<ContrastMatrix> {
    check_groups(n)?;
    let g = n.len();
    let rows = (1..g)
        .map(|i| {
            let mut c = vec![0.0; g];
            c[0] = -1.0;
            c[i] = 1.0;
            (format!("D{i} - C"), c)
        })
        .collect();
    ContrastMatrix::new(rows, ContrastKind::Dunnett)
}

/// Williams-type contrasts: row `q` compares the control with the
/// size-weighted pool of the `q` highest doses. Row 1 is `D_max - C`.
pub fn williams_matrix(n: &[u64]) -> Result<ContrastMatrix> {
    check_groups(n)?;
    let g = n.len();
    let k = g - 1;
    let rows = (1..=k)
        .map(|q| {
            let pooled = g - q..g;
            let total: u64 = n[pooled.clone()].iter().sum();
            let mut c = vec![0.0; g];
            c[0] = -1.0;
            for j in pooled.clone() {
                c[j] = n[j] as f64 / total as f64;
            }
            let name = if q == 1 {
                format!("D{k} - C")
            } else {
                format!("D{}..D{k} - C", g - q)
            };
            (name, c)
        })
        .collect();
    ContrastMatrix::new(rows, ContrastKind::Williams)
}

/// Scatters contrasts defined on a subset of groups into a `full_size`
/// model, with zeros at excluded positions.
pub fn pad_to_full(
    sub: &ContrastMatrix,
    full_size: usize,
    subset_indices: &[usize],
) -> Result<ContrastMatrix> {
    if subset_indices.len() != sub.ncols() {
        return Err(Error::InvalidContrast(format!(
            "{} subset indices for {} columns",
            subset_indices.len(),
            sub.ncols()
        )));
    }
    if subset_indices.first() != Some(&0) {
        return Err(Error::InvalidContrast("subset must include the control (index 0)".into()));
    }
    if subset_indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidContrast("subset indices must be strictly increasing".into()));
    }
    if subset_indices.iter().any(|&i| i >= full_size) {
        return Err(Error::InvalidContrast(format!(
            "subset index out of range for {full_size} groups"
        )));
    }
    let kind = match sub.kind() {
        ContrastKind::Williams | ContrastKind::SubsetWilliams => ContrastKind::SubsetWilliams,
        other => other,
    };
    let rows = sub
        .rows()
        .iter()
        .map(|(name, coef)| {
            let mut full = vec![0.0; full_size];
            for (&idx, &c) in subset_indices.iter().zip(coef) {
                full[idx] = c;
            }
            (name.clone(), full)
        })
        .collect();
    ContrastMatrix::new(rows, kind)
}

/// One contrast row of a test report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub name: String,
    /// Log odds ratio.
    pub estimate: f64,
    pub stderr: f64,
    pub t: f64,
    /// One-sided upper p-value.
    pub p_raw: f64,
    /// maxT adjusted one-sided p-value.
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub rows: Vec<ContrastRow>,
    pub correlation: Vec<Vec<f64>>,
}

impl TestReport {
    /// Smallest adjusted p-value, i.e. the p-value of the global maxT test.
    pub fn min_adjusted(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.p_adjusted)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-row statistics (with `p_adjusted` unset), the validated correlation,
/// and its raw row-major entries.
pub(crate) fn statistics(
    fit: &ModelFit,
    cm: &ContrastMatrix,
) -> Result<(Vec<ContrastRow>, MvnSpec, Vec<f64>)> {
    let g = fit.groups();
    if cm.ncols() != g {
        return Err(Error::InvalidContrast(format!(
            "contrast has {} columns but the model has {g} groups",
            cm.ncols()
        )));
    }
    let m = cm.nrows();
    let mut rows = Vec::with_capacity(m);
    for (name, c) in cm.rows() {
        let estimate: f64 = c.iter().zip(&fit.eta).map(|(c, e)| c * e).sum();
        let var: f64 = c.iter().zip(&fit.var_eta).map(|(c, v)| c * c * v).sum();
        if !(var > 0.0) {
            return Err(Error::ZeroStdErr(name.clone()));
        }
        let stderr = var.sqrt();
        let t = estimate / stderr;
        rows.push(ContrastRow {
            name: name.clone(),
            estimate,
            stderr,
            t,
            p_raw: norm_sf(t),
            p_adjusted: f64::NAN,
        });
    }

    let mut corr = vec![0.0; m * m];
    for q in 0..m {
        corr[q * m + q] = 1.0;
        for r in 0..q {
            let cov: f64 = (0..g)
                .map(|i| cm.rows[q].1[i] * cm.rows[r].1[i] * fit.var_eta[i])
                .sum();
            let v = (cov / (rows[q].stderr * rows[r].stderr)).clamp(-1.0, 1.0);
            corr[q * m + r] = v;
            corr[r * m + q] = v;
        }
    }
    let spec = MvnSpec::new(m, &corr)?;
    Ok((rows, spec, corr))
}

/// Wald contrast test with one-sided ("greater") maxT adjusted p-values.
pub fn contrast_test(fit: &ModelFit, cm: &ContrastMatrix, opts: &MvnOptions) -> Result<TestReport> {
    let (mut rows, spec, corr) = statistics(fit, cm)?;
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let adjusted = adjust_maxt(&t, &spec, opts)?;
    for (row, p) in rows.iter_mut().zip(adjusted) {
        row.p_adjusted = p;
    }
    Ok(TestReport {
        rows,
        correlation: corr.chunks(spec.dimension()).map(<[f64]>::to_vec).collect(),
    })
}

/// p-value of the global maxT test, equal to `contrast_test(..).min_adjusted()`
/// but needing a single integral.
pub fn global_maxt_p(fit: &ModelFit, cm: &ContrastMatrix, opts: &MvnOptions) -> Result<f64> {
    let (rows, spec, _) = statistics(fit, cm)?;
    let (idx, _) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.t.total_cmp(&b.1.t))
        .expect("contrast matrix has rows");
    let raw = rows[idx].p_raw;
    if spec.dimension() == 1 {
        return Ok(raw);
    }
    let est = mvn_upper_orthant_complement(&spec, rows[idx].t, opts)?.value;
    Ok(est.clamp(raw, (spec.dimension() as f64 * raw).min(1.0)))
}

/// Raw one-sided p-value of a single contrast row of dose `dose` vs control.
pub fn single_contrast_p(fit: &ModelFit, dose: usize) -> Result<f64> {
    let cm = ContrastMatrix::single(fit.groups(), dose)?;
    let (rows, _, _) = statistics(fit, &cm)?;
    Ok(rows[0].p_raw)
}
