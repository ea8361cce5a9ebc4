//! Multivariate normal rectangle probabilities and maxT adjusted p-values.
//!
//! `P(T_1 < b, ..., T_m < b)` for `T ~ N(0, R)` is computed by Genz's
//! separation-of-variables transform with variable reordering, integrated by
//! a randomized rank-1 Kronecker lattice. The first variable is integrated
//! exactly, so an `m`-variate probability is an `(m - 1)`-dimensional
//! integral. Error estimates come from independent random shifts.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use libm::erfc;

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const EIGEN_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-10;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`, accurate for large `x`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile (Wichura's AS241, about 1e-16 relative error).
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                + 67265.770927008700853)
                * r
                + 45921.953931549871457)
                * r
                + 13731.693765509461125)
                * r
                + 1971.5909503065514427)
                * r
                + 133.14166789178437745)
                * r
                + 3.387132872796366608)
            / (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                + 39307.89580009271061)
                * r
                + 21213.794301586595867)
                * r
                + 5394.1960214247511077)
                * r
                + 687.1870074920579083)
                * r
                + 42.313330701600911252)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734)
            / (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                + 0.0151986665636164571966)
                * r
                + 0.14810397642748007459)
                * r
                + 0.68976733498510000455)
                * r
                + 1.6763848301838038494)
                * r
                + 2.05319162663775882187)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772)
            / (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                + 1.8463183175100546818e-5)
                * r
                + 7.868691311456132591e-4)
                * r
                + 0.0148753612908506148525)
                * r
                + 0.13692988092273580531)
                * r
                + 0.59983220655588793769)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// A validated correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnSpec {
    correlation: DMatrix<f64>,
}

impl MvnSpec {
    /// Validates `correlation` (row-major, `dim * dim`). Slightly negative
    /// eigenvalues down to `-1e-10` are clipped to zero and the matrix is
    /// rescaled to unit diagonal.
    pub fn new(dim: usize, correlation: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCorrelation("dimension must be at least 1".into()));
        }
        if correlation.len() != dim * dim {
            return Err(Error::InvalidCorrelation(format!(
                "expected {} entries, got {}",
                dim * dim,
                correlation.len()
            )));
        }
        let r = DMatrix::from_row_slice(dim, dim, correlation);
        for i in 0..dim {
            if (r[(i, i)] - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {}",
                    r[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (r[(i, j)], r[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-8 {
                    return Err(Error::InvalidCorrelation(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
                if a.abs() > 1.0 + 1e-8 {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry ({i},{j}) = {a} outside [-1, 1]"
                    )));
                }
            }
        }
        let r = (&r + r.transpose()) * 0.5;
        if dim == 1 {
            return Ok(Self { correlation: r });
        }

        let eig = SymmetricEigen::new(r.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig < -EIGEN_TOL {
            return Err(Error::NotPsd(min_eig));
        }
        let correlation = if min_eig < 0.0 {
            let clipped = eig.eigenvalues.map(|v| v.max(0.0));
            let rebuilt = &eig.eigenvectors
                * DMatrix::from_diagonal(&clipped)
                * eig.eigenvectors.transpose();
            let scale: Vec<f64> = (0..dim).map(|i| rebuilt[(i, i)].sqrt()).collect();
            DMatrix::from_fn(dim, dim, |i, j| {
                if i == j {
                    1.0
                } else {
                    (rebuilt[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0)
                }
            })
        } else {
            r
        };
        Ok(Self { correlation })
    }

    /// Identity correlation of the given dimension.
    pub fn independent(dim: usize) -> Self {
        Self {
            correlation: DMatrix::identity(dim.max(1), dim.max(1)),
        }
    }

    pub fn dimension(&self) -> usize {
        self.correlation.nrows()
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }
}

/// Integration effort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    /// Target for the reported absolute error (three standard errors).
    pub abs_tol: f64,
    /// Number of independent random shifts.
    pub shifts: usize,
    /// Lattice points per shift in the first pass; doubled until `abs_tol` is met.
    pub initial_points: usize,
    /// Cap on integrand evaluations across all shifts.
    pub max_evals: usize,
    pub seed: u64,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            abs_tol: 5e-5,
            shifts: 12,
            initial_points: 64,
            max_evals: 4_000_000,
            seed: 0x6d76_6e5f_6b65_726e,
        }
    }
}

impl MvnOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// An integrated probability with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Three standard errors across random shifts. Zero for closed forms.
    pub error: f64,
    pub evals: usize,
}

/// Lower Cholesky factor after Genz-Bretz reordering for a common upper bound.
struct Factor {
    /// Row-major lower triangle.
    l: Vec<f64>,
    m: usize,
}

impl Factor {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.m + j]
    }

    /// Pivoted Cholesky that at each step picks the remaining variable with
    /// the smallest conditional probability of staying below `bound`.
    fn new(r: &DMatrix<f64>, bound: f64) -> Self {
        let m = r.nrows();
        let mut c: Vec<f64> = (0..m * m).map(|k| r[(k / m, k % m)]).collect();
        let mut l = vec![0.0; m * m];
        let mut y_mean = vec![0.0; m];

        let swap = |c: &mut Vec<f64>, l: &mut Vec<f64>, a: usize, b: usize| {
            if a == b {
                return;
            }
            for k in 0..m {
                c.swap(a * m + k, b * m + k);
            }
            for k in 0..m {
                c.swap(k * m + a, k * m + b);
            }
            for k in 0..m {
                l.swap(a * m + k, b * m + k);
            }
        };

        for i in 0..m {
            let mut best = i;
            let mut best_prob = f64::INFINITY;
            for j in i..m {
                let mut s = c[j * m + j];
                let mut shift = 0.0;
                for k in 0..i {
                    s -= l[j * m + k] * l[j * m + k];
                    shift += l[j * m + k] * y_mean[k];
                }
                let prob = if s > PIVOT_TOL {
                    norm_cdf((bound - shift) / s.sqrt())
                } else {
                    2.0
                };
                if prob < best_prob {
                    best_prob = prob;
                    best = j;
                }
            }
            swap(&mut c, &mut l, i, best);

            let mut s = c[i * m + i];
            let mut shift = 0.0;
            for k in 0..i {
                s -= l[i * m + k] * l[i * m + k];
                shift += l[i * m + k] * y_mean[k];
            }
            if s > PIVOT_TOL {
                let d = s.sqrt();
                l[i * m + i] = d;
                for r_ in i + 1..m {
                    let mut v = c[r_ * m + i];
                    for k in 0..i {
                        v -= l[r_ * m + k] * l[i * m + k];
                    }
                    l[r_ * m + i] = v / d;
                }
                let z = (bound - shift) / d;
                let p = norm_cdf(z);
                y_mean[i] = if p > 1e-300 { -norm_pdf(z) / p } else { z };
            } else {
                // Remaining variables are linear in earlier ones.
                l[i * m + i] = 0.0;
                y_mean[i] = 0.0;
            }
        }
        Self { l, m }
    }

    /// Integrand over the unit cube of dimension `m - 1`.
    fn integrand(&self, bound: f64, w: &[f64], y: &mut [f64]) -> f64 {
        let mut f = 1.0;
        for i in 0..self.m {
            let mut s = 0.0;
            for k in 0..i {
                s += self.at(i, k) * y[k];
            }
            let d = self.at(i, i);
            if d > 0.0 {
                let e = norm_cdf((bound - s) / d);
                f *= e;
                if f == 0.0 {
                    return 0.0;
                }
                if i + 1 < self.m {
                    let u = (w[i] * e).max(1e-300);
                    y[i] = norm_quantile(u);
                }
            } else {
                if bound - s < 0.0 {
                    return 0.0;
                }
                y[i] = 0.0;
            }
        }
        f
    }
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// `P(T_j < bound for all j)` for `T ~ N(0, R)`.
pub fn mvn_lower_orthant(spec: &MvnSpec, bound: f64, opts: &MvnOptions) -> Result<Estimate> {
    integrate(spec, bound, opts, None)
}

/// Integrates until the error target is met or, when `level` is given, as
/// soon as `level` lies outside `value ± error`.
fn integrate(spec: &MvnSpec, bound: f64, opts: &MvnOptions, level: Option<f64>) -> Result<Estimate> {
    if !bound.is_finite() {
        return Err(Error::InvalidCorrelation(format!("bound must be finite, got {bound}")));
    }
    let m = spec.dimension();
    if m == 1 {
        return Ok(Estimate {
            value: norm_cdf(bound),
            error: 0.0,
            evals: 0,
        });
    }

    let factor = Factor::new(spec.correlation(), bound);
    let dims = m - 1;
    let alpha: Vec<f64> = primes(dims).iter().map(|&p| (p as f64).sqrt().fract()).collect();
    let shifts = opts.shifts.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let offsets: Vec<Vec<f64>> = (0..shifts)
        .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut sums = vec![0.0; shifts];
    let mut done = 0usize;
    let mut target = opts.initial_points.max(1);
    let mut w = vec![0.0; dims];
    let mut w_anti = vec![0.0; dims];
    let mut y = vec![0.0; m];
    loop {
        for (s, off) in offsets.iter().enumerate() {
            let mut acc = 0.0;
            for k in done..target {
                let kf = k as f64;
                for j in 0..dims {
                    let x = (kf * alpha[j] + off[j]).fract();
                    let t = (2.0 * x - 1.0).abs();
                    w[j] = t;
                    w_anti[j] = 1.0 - t;
                }
                acc += 0.5
                    * (factor.integrand(bound, &w, &mut y)
                        + factor.integrand(bound, &w_anti, &mut y));
            }
            sums[s] += acc;
        }
        done = target;

        let means: Vec<f64> = sums.iter().map(|s| s / done as f64).collect();
        let mean = means.iter().sum::<f64>() / shifts as f64;
        let var = means.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / ((shifts - 1) * shifts) as f64;
        let error = 3.0 * var.sqrt();
        let evals = 2 * done * shifts;
        let decided = level.is_some_and(|l| (mean - l).abs() > error);
        if decided || error <= opts.abs_tol || 4 * done * shifts > opts.max_evals {
            return Ok(Estimate {
                value: mean.clamp(0.0, 1.0),
                error,
                evals,
            });
        }
        target = done * 2;
    }
}

/// `P(max_j T_j >= bound) = 1 - P(all T_j < bound)` for `T ~ N(0, R)`.
pub fn mvn_upper_orthant_complement(
    spec: &MvnSpec,
    bound: f64,
    opts: &MvnOptions,
) -> Result<Estimate> {
    if spec.dimension() == 1 {
        if !bound.is_finite() {
            return Err(Error::InvalidCorrelation(format!("bound must be finite, got {bound}")));
        }
        return Ok(Estimate {
            value: norm_sf(bound),
            error: 0.0,
            evals: 0,
        });
    }
    let est = mvn_lower_orthant(spec, bound, opts)?;
    Ok(Estimate {
        value: (1.0 - est.value).clamp(0.0, 1.0),
        ..est
    })
}

/// Single-step maxT adjusted p-values: `p_q = P(max_j T_j >= t_q)`.
///
/// Results are clamped into `[1 - Φ(t_q), min(1, m (1 - Φ(t_q)))]`, which
/// bounds the exact value.
pub fn adjust_maxt(t_values: &[f64], spec: &MvnSpec, opts: &MvnOptions) -> Result<Vec<f64>> {
    let m = spec.dimension();
    if t_values.len() != m {
        return Err(Error::InvalidCorrelation(format!(
            "{} statistics for a {}-dimensional correlation",
            t_values.len(),
            m
        )));
    }
    t_values
        .iter()
        .map(|&t| {
            let raw = norm_sf(t);
            let p = mvn_upper_orthant_complement(spec, t, opts)?.value;
            Ok(p.clamp(raw, (m as f64 * raw).min(1.0)))
        })
        .collect()
}

/// Whether the maxT test rejects the row with statistic `t` at level
/// `alpha`, i.e. `P(max_j T_j >= t) <= alpha`. Bonferroni bounds settle
/// most cases without integration; otherwise integration stops once the
/// error band excludes `alpha`.
pub fn maxt_rejects(t: f64, spec: &MvnSpec, alpha: f64, opts: &MvnOptions) -> Result<bool> {
    let raw = norm_sf(t);
    if raw > alpha {
        return Ok(false);
    }
    let m = spec.dimension();
    if m as f64 * raw <= alpha {
        return Ok(true);
    }
    let lower = integrate(spec, t, opts, Some(1.0 - alpha))?;
    Ok(1.0 - lower.value <= alpha)
}
