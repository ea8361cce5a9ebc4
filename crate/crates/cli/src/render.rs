use std::fmt::Write;

use ordprop::{CtpResult, DoseGroupData, Procedure, ScenarioResult};
use serde::Serialize;

/// p-values in tables.
pub const P_DECIMALS: usize = 4;
/// Rejection rates in tables.
pub const RATE_DECIMALS: usize = 3;

#[derive(Serialize)]
struct AnalysisJson<'a> {
    groups: Vec<GroupJson<'a>>,
    #[serde(flatten)]
    result: &'a CtpResult,
}

#[derive(Serialize)]
struct GroupJson<'a> {
    dose: &'a str,
    n: u64,
    responders: u64,
}

pub fn analysis_json(data: &DoseGroupData, result: &CtpResult) -> String {
    let groups = data
        .labels()
        .iter()
        .zip(data.sizes())
        .zip(data.responders())
        .map(|((dose, &n), &responders)| GroupJson { dose, n, responders })
        .collect();
    let mut s = serde_json::to_string_pretty(&AnalysisJson { groups, result })
        .expect("analysis serializes");
    s.push('\n');
    s
}

pub fn analysis_table(data: &DoseGroupData, result: &CtpResult) -> String {
    let control = &data.labels()[0];
    let names: Vec<String> = result
        .entries
        .iter()
        .map(|e| format!("{} - {control}", e.label))
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(0).max(10);
    let p = |v: f64| format!("{v:.P_DECIMALS$}");

    let mut out = String::new();
    writeln!(
        out,
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}",
        "comparison", "Dunnett", "Williams", "P", "C"
    )
    .unwrap();
    for (name, e) in names.iter().zip(&result.entries) {
        writeln!(
            out,
            "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}",
            name,
            p(e.p_dunnett),
            e.p_williams.map_or_else(|| "-".to_string(), p),
            p(e.p_pairwise),
            p(e.p_subset_williams),
        )
        .unwrap();
    }
    writeln!(
        out,
        "\none-sided adjusted p-values (odds ratio > 1); alpha = {}; boundary policy = {}",
        result.alpha, result.boundary_policy
    )
    .unwrap();
    if !result.corrected_groups.is_empty() {
        let labels: Vec<&str> = result
            .corrected_groups
            .iter()
            .map(|&i| data.labels()[i].as_str())
            .collect();
        writeln!(out, "boundary correction applied to: {}", labels.join(", ")).unwrap();
    }
    out
}

#[derive(Serialize)]
struct StudyJson<'a> {
    master_seed: u64,
    results: Vec<ScenarioJson<'a>>,
}

#[derive(Serialize)]
struct ScenarioJson<'a> {
    label: Option<&'a str>,
    #[serde(flatten)]
    result: &'a ScenarioResult,
}

pub fn study_json(master_seed: u64, labels: &[Option<String>], results: &[ScenarioResult]) -> String {
    let results = results
        .iter()
        .zip(labels)
        .map(|(result, label)| ScenarioJson {
            label: label.as_deref(),
            result,
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&StudyJson { master_seed, results })
        .expect("study serializes");
    s.push('\n');
    s
}

fn header(k: usize, pi_width: usize) -> String {
    let mut cols = vec![format!("{:<pi_width$}", "pi")];
    for p in Procedure::ALL {
        let tag = p.tag();
        if p == Procedure::Williams {
            cols.push(format!("{:>6}", format!("{tag}{k}")));
        } else {
            cols.extend((1..=k).map(|i| format!("{:>6}", format!("{tag}{i}"))));
        }
        cols.push(format!("{:>6}", format!("{tag}^a")));
    }
    cols.join(" ")
}

/// One line per scenario in the layout of the usual power table.
pub fn study_table(labels: &[Option<String>], results: &[ScenarioResult]) -> String {
    let pi_text: Vec<String> = results
        .iter()
        .zip(labels)
        .map(|(r, label)| {
            let pi: Vec<String> = r.scenario.pi.iter().map(|p| format!("{p}")).collect();
            let sizes = if r.scenario.n.iter().all(|&n| n == r.scenario.n[0]) {
                format!("n={}", r.scenario.n[0])
            } else {
                format!(
                    "n=({})",
                    r.scenario.n.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
                )
            };
            let mut s = format!("({}) {sizes}", pi.join(","));
            if let Some(l) = label {
                s = format!("{l}: {s}");
            }
            s
        })
        .collect();
    let pi_width = pi_text.iter().map(String::len).max().unwrap_or(2);
    let rate = |v: f64| format!("{:>6}", format!("{v:.RATE_DECIMALS$}"));

    let mut out = String::new();
    let mut last_k = None;
    for (r, text) in results.iter().zip(&pi_text) {
        let k = r.scenario.pi.len() - 1;
        if last_k != Some(k) {
            writeln!(out, "{}", header(k, pi_width)).unwrap();
            last_k = Some(k);
        }
        let mut cols = vec![format!("{text:<pi_width$}")];
        for p in Procedure::ALL {
            let rates = r.rates_for(p);
            cols.extend(rates.per_dose.iter().flatten().map(|&v| rate(v)));
            cols.push(rate(rates.any_pair));
        }
        writeln!(out, "{}", cols.join(" ")).unwrap();
    }
    out
}
