//! Monte Carlo estimates of per-pair power, any-pair power and FWER.
//!
//! Every replicate draws its own counts from a ChaCha stream selected by
//! `(scenario seed, replicate index)`, so any replicate can be replayed in
//! isolation and results do not depend on the number of threads.

use std::time::{Duration, Instant};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::{dunnett_matrix, pad_to_full, statistics, williams_matrix};
use crate::error::{Error, Result};
use crate::model::{fit_saturated_logit, BoundaryPolicy, DoseGroupData};
use crate::mvn::{maxt_rejects, MvnOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Dunnett,
    Williams,
    /// Closed testing with single contrasts.
    Pairwise,
    /// Closed testing with subset Williams tests.
    SubsetWilliams,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [
        Procedure::Dunnett,
        Procedure::Williams,
        Procedure::Pairwise,
        Procedure::SubsetWilliams,
    ];

    /// Short column label.
    pub fn tag(self) -> &'static str {
        match self {
            Procedure::Dunnett => "D",
            Procedure::Williams => "W",
            Procedure::Pairwise => "P",
            Procedure::SubsetWilliams => "C",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// True response probabilities, control first.
    pub pi: Vec<f64>,
    pub n: Vec<u64>,
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub boundary_policy: BoundaryPolicy,
}

impl Scenario {
    pub const DEFAULT_REPLICATES: usize = 5000;
    pub const DEFAULT_ALPHA: f64 = 0.05;

    /// Balanced scenario with the default replicate count and level.
    pub fn balanced(pi: &[f64], n: u64, seed: u64) -> Self {
        Self {
            pi: pi.to_vec(),
            n: vec![n; pi.len()],
            replicates: Self::DEFAULT_REPLICATES,
            alpha: Self::DEFAULT_ALPHA,
            seed,
            boundary_policy: BoundaryPolicy::Haldane,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.pi.len() != self.n.len() {
            return bad(format!("{} probabilities but {} group sizes", self.pi.len(), self.n.len()));
        }
        if self.pi.len() < 2 {
            return bad("need a control and at least one dose".into());
        }
        if let Some(p) = self.pi.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return bad(format!("probability {p} outside (0, 1)"));
        }
        if self.n.contains(&0) {
            return bad("group sizes must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        Ok(())
    }

    pub fn doses(&self) -> usize {
        self.pi.len() - 1
    }
}

/// Rejection rates of one procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedureRates {
    pub procedure: Procedure,
    /// Per-dose rejection rate; Williams only reports the top dose.
    pub per_dose: Vec<Option<f64>>,
    pub any_pair: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub rates: Vec<ProcedureRates>,
    /// Replicates where at least one group needed a boundary correction.
    pub corrected_replicates: usize,
    /// Replicates that could not be analysed (boundary counts under the
    /// reject policy, or no information at all). They count as no rejection.
    pub failed_replicates: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ScenarioResult {
    pub fn rates_for(&self, procedure: Procedure) -> &ProcedureRates {
        self.rates
            .iter()
            .find(|r| r.procedure == procedure)
            .expect("all procedures are recorded")
    }
}

/// Outcome of one replicate: per procedure, which doses were rejected, plus
/// an any-pair flag.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReplicateOutcome {
    /// Indexed like `Procedure::ALL`, then by dose `0..k`.
    pub rejected: [Vec<bool>; 4],
    pub any: [bool; 4],
    pub corrected: bool,
    pub failed: bool,
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Draws and analyses replicate `index` of `sc`.
pub fn run_replicate(sc: &Scenario, index: u64) -> ReplicateOutcome {
    let k = sc.doses();
    let mut rng = replicate_rng(sc.seed, index);
    let y: Vec<u64> = sc
        .pi
        .iter()
        .zip(&sc.n)
        .map(|(&p, &n)| Binomial::new(n, p).expect("validated scenario").sample(&mut rng))
        .collect();
    let opts = MvnOptions::with_seed(rng.next_u64());

    let mut out = ReplicateOutcome {
        rejected: std::array::from_fn(|_| vec![false; k]),
        ..Default::default()
    };
    let data = DoseGroupData::from_counts(&sc.n, &y).expect("validated scenario");
    match decide(&data, sc.boundary_policy, sc.alpha, &opts) {
        Ok(decisions) => {
            out.corrected = decisions.corrected;
            out.rejected = decisions.rejected;
            out.any = decisions.any;
        }
        Err(_) => out.failed = true,
    }
    out
}

struct Decisions {
    rejected: [Vec<bool>; 4],
    any: [bool; 4],
    corrected: bool,
}

/// Rejection decisions of all four procedures at `alpha`. Equivalent to
/// comparing the p-values of [`crate::ctp::analyze`] with `alpha`, but
/// skips integrals whose outcome is already fixed.
fn decide(
    data: &DoseGroupData,
    policy: BoundaryPolicy,
    alpha: f64,
    opts: &MvnOptions,
) -> Result<Decisions> {
    let fit = fit_saturated_logit(data, policy)?;
    let k = data.doses();
    let mut rejected: [Vec<bool>; 4] = std::array::from_fn(|_| vec![false; k]);
    let mut any = [false; 4];

    let (dunnett, dunnett_spec, _) = statistics(&fit, &dunnett_matrix(&fit.sizes)?)?;
    for (i, row) in dunnett.iter().enumerate() {
        rejected[0][i] = maxt_rejects(row.t, &dunnett_spec, alpha, opts)?;
    }

    let (williams, williams_spec, _) = statistics(&fit, &williams_matrix(&fit.sizes)?)?;
    let max_t = williams.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
    let williams_global = maxt_rejects(max_t, &williams_spec, alpha, opts)?;
    rejected[1][k - 1] = if williams[0].t == max_t {
        williams_global
    } else {
        maxt_rejects(williams[0].t, &williams_spec, alpha, opts)?
    };
    any[1] = williams_global;

    // Dunnett rows are the single contrasts D_j - C.
    let mut chain = true;
    for j in (0..k).rev() {
        chain = chain && dunnett[j].p_raw <= alpha;
        rejected[2][j] = chain;
    }

    let mut chain = williams_global;
    rejected[3][k - 1] = chain;
    for j in (1..k.saturating_sub(1)).rev() {
        // level j + 1: Williams on groups 0..=j+1
        chain = chain && {
            let sub = williams_matrix(&fit.sizes[..=j + 1])?;
            let indices: Vec<usize> = (0..=j + 1).collect();
            let cm = pad_to_full(&sub, fit.groups(), &indices)?;
            let (rows, spec, _) = statistics(&fit, &cm)?;
            let t = rows.iter().map(|r| r.t).fold(f64::NEG_INFINITY, f64::max);
            maxt_rejects(t, &spec, alpha, opts)?
        };
        rejected[3][j] = chain;
    }
    if k >= 2 {
        rejected[3][0] = chain && dunnett[0].p_raw <= alpha;
    }

    for p in [0, 2, 3] {
        any[p] = rejected[p].iter().any(|&r| r);
    }
    Ok(Decisions {
        rejected,
        any,
        corrected: fit.corrected(),
    })
}

/// Runs all replicates of one scenario on the current rayon pool.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    sc.validate()?;
    let start = Instant::now();
    let k = sc.doses();
    let outcomes: Vec<ReplicateOutcome> = (0..sc.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(sc, r))
        .collect();

    let mut dose_counts = [vec![0usize; k], vec![0; k], vec![0; k], vec![0; k]];
    let mut any_counts = [0usize; 4];
    let (mut corrected, mut failed) = (0, 0);
    for o in &outcomes {
        for p in 0..4 {
            for (c, &r) in dose_counts[p].iter_mut().zip(&o.rejected[p]) {
                *c += r as usize;
            }
            any_counts[p] += o.any[p] as usize;
        }
        corrected += o.corrected as usize;
        failed += o.failed as usize;
    }

    let reps = sc.replicates as f64;
    let rates = Procedure::ALL
        .iter()
        .enumerate()
        .map(|(p, &procedure)| ProcedureRates {
            procedure,
            per_dose: dose_counts[p]
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    (procedure != Procedure::Williams || i == k - 1).then(|| c as f64 / reps)
                })
                .collect(),
            any_pair: any_counts[p] as f64 / reps,
        })
        .collect();
    Ok(ScenarioResult {
        scenario: sc.clone(),
        rates,
        corrected_replicates: corrected,
        failed_replicates: failed,
        elapsed: start.elapsed(),
    })
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed used for scenario `index` of a study.
pub fn scenario_seed(master: u64, index: usize, own: u64) -> u64 {
    mix(mix(mix(master) ^ index as u64) ^ own)
}

/// Runs scenarios in order on a pool of `parallelism` threads (0 = rayon
/// default). Scenario `i` uses `scenario_seed(master_seed, i, seed_i)`.
pub fn run_study(
    scenarios: &[Scenario],
    master_seed: u64,
    parallelism: usize,
) -> Result<Vec<ScenarioResult>> {
    for (i, sc) in scenarios.iter().enumerate() {
        sc.validate()
            .map_err(|e| Error::InvalidScenario(format!("scenario {}: {e}", i + 1)))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::InvalidScenario(format!("thread pool: {e}")))?;
    pool.install(|| {
        scenarios
            .iter()
            .enumerate()
            .map(|(i, sc)| {
                let seeded = Scenario {
                    seed: scenario_seed(master_seed, i, sc.seed),
                    ..sc.clone()
                };
                run_scenario(&seeded)
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(pi: &[f64], reps: usize) -> Scenario {
        Scenario {
            replicates: reps,
            ..Scenario::balanced(pi, 30, 42)
        }
    }

    #[test]
    fn validation() {
        let ok = small(&[0.1, 0.2], 10);
        assert!(ok.validate().is_ok());
        for bad in [
            Scenario { replicates: 0, ..ok.clone() },
            Scenario { alpha: 1.0, ..ok.clone() },
            Scenario { pi: vec![0.0, 0.2], ..ok.clone() },
            Scenario { pi: vec![0.1], n: vec![30], ..ok.clone() },
            Scenario { n: vec![30, 0], ..ok.clone() },
            Scenario { n: vec![30], ..ok.clone() },
        ] {
            assert!(matches!(run_scenario(&bad), Err(Error::InvalidScenario(_))));
        }
    }

    #[test]
    fn single_replicate_is_deterministic() {
        let sc = small(&[0.1, 0.1, 0.4], 1);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a.rates, b.rates);
        for r in &a.rates {
            for v in r.per_dose.iter().flatten() {
                assert!(*v == 0.0 || *v == 1.0);
            }
        }
        assert_eq!(run_replicate(&sc, 0), run_replicate(&sc, 0));
    }

    #[test]
    fn decisions_match_p_values() {
        use crate::ctp::analyze;
        let sc = small(&[0.1, 0.15, 0.25, 0.3], 150);
        let opts = MvnOptions::with_seed(3);
        for r in 0..150 {
            let mut rng = replicate_rng(sc.seed, r);
            let y: Vec<u64> = sc.pi.iter().zip(&sc.n)
                .map(|(&p, &n)| Binomial::new(n, p).unwrap().sample(&mut rng))
                .collect();
            let data = DoseGroupData::from_counts(&sc.n, &y).unwrap();
            let Ok(res) = analyze(&data, BoundaryPolicy::Haldane, 0.05, &opts) else { continue };
            let d = decide(&data, BoundaryPolicy::Haldane, 0.05, &opts).unwrap();
            let near = |p: f64| (p - 0.05).abs() < 2e-4;
            for (i, e) in res.entries.iter().enumerate() {
                if !near(e.p_dunnett) { assert_eq!(d.rejected[0][i], e.p_dunnett <= 0.05); }
                assert_eq!(d.rejected[2][i], e.p_pairwise <= 0.05);
                if !near(e.p_subset_williams) { assert_eq!(d.rejected[3][i], e.p_subset_williams <= 0.05); }
                if let Some(w) = e.p_williams {
                    if !near(w) { assert_eq!(d.rejected[1][i], w <= 0.05); }
                }
            }
            if !near(res.williams_global) { assert_eq!(d.any[1], res.williams_global <= 0.05); }
        }
    }

    #[test]
    fn replicate_shortcut_holds() {
        let sc = small(&[0.1, 0.2, 0.25, 0.4], 200);
        for r in 0..200 {
            let o = run_replicate(&sc, r);
            for p in [2, 3] {
                if let Some(first) = o.rejected[p].iter().position(|&x| x) {
                    assert!(o.rejected[p][first..].iter().all(|&x| x));
                }
            }
        }
    }

    #[test]
    fn rates_are_consistent() {
        let res = run_scenario(&small(&[0.1, 0.15, 0.3], 300)).unwrap();
        for r in &res.rates {
            for v in r.per_dose.iter().flatten() {
                assert!((0.0..=1.0).contains(v));
                assert!(r.any_pair >= *v);
            }
        }
        assert!(res.rates_for(Procedure::Williams).per_dose[0].is_none());
    }

    #[test]
    fn reject_policy_counts_failures() {
        let sc = Scenario {
            boundary_policy: BoundaryPolicy::Reject,
            ..Scenario::balanced(&[0.02, 0.02], 20, 1)
        };
        let sc = Scenario { replicates: 100, ..sc };
        let res = run_scenario(&sc).unwrap();
        assert!(res.failed_replicates > 0);
        assert_eq!(res.corrected_replicates, 0);
        let haldane = run_scenario(&Scenario { boundary_policy: BoundaryPolicy::Haldane, ..sc }).unwrap();
        assert!(haldane.corrected_replicates > 0);
        // only replicates with every group at zero remain unusable
        assert!(haldane.failed_replicates < res.failed_replicates);
    }

    #[test]
    fn study_independent_of_parallelism() {
        let scs = vec![small(&[0.1, 0.1, 0.3], 120), small(&[0.2, 0.3], 80)];
        let a = run_study(&scs, 9, 1).unwrap();
        let b = run_study(&scs, 9, 4).unwrap();
        assert_eq!(a.len(), 2);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.rates, y.rates);
            assert_eq!(x.scenario.seed, y.scenario.seed);
        }
        assert!(run_study(&[], 9, 2).unwrap().is_empty());
    }

    #[test]
    fn study_aborts_on_invalid_scenario() {
        let scs = vec![small(&[0.1, 0.3], 10), Scenario { replicates: 0, ..small(&[0.1, 0.3], 10) }];
        let err = run_study(&scs, 1, 1).unwrap_err();
        assert!(err.to_string().contains("scenario 2"));
    }
}
