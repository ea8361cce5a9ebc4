//! Dose-group CSV input: headered `dose,n,responders`, with an optional
//! numeric `order` column. Without `order`, file order is the dose order.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use ordprop::DoseGroupData;
use serde::Deserialize;

#[derive(Debug, Deserialize)]
struct Row {
    dose: String,
    n: u64,
    responders: u64,
    #[serde(default)]
    order: Option<f64>,
}

pub fn read_csv(path: &Path) -> Result<DoseGroupData> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    parse_csv(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_csv(text: &str) -> Result<DoseGroupData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().context("missing header line")?.clone();
    for required in ["dose", "n", "responders"] {
        if !headers.iter().any(|h| h == required) {
            bail!("line 1: missing column `{required}` (expected dose,n,responders)");
        }
    }

    let mut rows: Vec<(Row, u64)> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => match e.position() {
                Some(p) => bail!("line {}: {}", p.line(), strip_position(&e)),
                None => bail!("{e}"),
            },
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| anyhow!("line {line}: {}", strip_position(&e)))?;
        if row.responders > row.n {
            bail!(
                "line {line}: dose `{}` has {} responders out of {}",
                row.dose,
                row.responders,
                row.n
            );
        }
        if row.n == 0 {
            bail!("line {line}: dose `{}` has zero subjects", row.dose);
        }
        rows.push((row, line));
    }
    if rows.len() < 2 {
        bail!("need a control row and at least one dose row, found {}", rows.len());
    }
    let with_order = rows.iter().filter(|(r, _)| r.order.is_some()).count();
    if with_order != 0 && with_order != rows.len() {
        bail!("column `order` must be filled on every row or on none");
    }
    if with_order == rows.len() {
        rows.sort_by(|a, b| a.0.order.unwrap().total_cmp(&b.0.order.unwrap()));
    }

    let labels = rows.iter().map(|(r, _)| r.dose.clone()).collect();
    let n = rows.iter().map(|(r, _)| r.n).collect();
    let y = rows.iter().map(|(r, _)| r.responders).collect();
    Ok(DoseGroupData::new(labels, n, y)?)
}

fn strip_position(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(f) => format!("field {}: {}", f + 1, err.kind()),
            None => err.kind().to_string(),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        _ => e.to_string(),
    }
}

/// Inline counts `n:y,n:y,...`, control first; labels are `0..k`.
pub fn parse_inline(spec: &str) -> Result<DoseGroupData> {
    let mut n = Vec::new();
    let mut y = Vec::new();
    for (i, part) in spec.split(',').enumerate() {
        let (a, b) = part
            .trim()
            .split_once(':')
            .ok_or_else(|| anyhow!("group {}: expected `n:responders`, got `{part}`", i + 1))?;
        n.push(a.trim().parse::<u64>().with_context(|| format!("group {}: bad size", i + 1))?);
        y.push(b.trim().parse::<u64>().with_context(|| format!("group {}: bad count", i + 1))?);
    }
    Ok(DoseGroupData::from_counts(&n, &y)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_in_file_order() {
        let d = parse_csv("dose,n,responders\n0,34,2\n150,34,13\n50,35,6\n").unwrap();
        assert_eq!(d.labels(), ["0", "150", "50"]);
        assert_eq!(d.sizes(), [34, 34, 35]);
    }

    #[test]
    fn explicit_order_column() {
        let d = parse_csv("dose,n,responders,order\nhigh,34,13,3\nctrl,34,2,0\nlow,35,6,1\n").unwrap();
        assert_eq!(d.labels(), ["ctrl", "low", "high"]);
        assert_eq!(d.responders(), [2, 6, 13]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_csv("dose,n,responders\n0,34,2\n50,abc,6\n").unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");
        let err = parse_csv("dose,n,responders\n0,34,2\n50,5,6\n").unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");
        assert!(err.to_string().contains("6 responders out of 5"));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(parse_csv("dose,n\n0,3\n1,4\n").is_err());
        assert!(parse_csv("dose,n,responders\n0,34,2\n").is_err());
        assert!(parse_csv("dose,n,responders,order\n0,34,2,0\n1,34,2,\n").is_err());
    }

    #[test]
    fn inline_counts() {
        let d = parse_inline("34:2, 35:6,36:4,34:13").unwrap();
        assert_eq!(d.doses(), 3);
        assert!(parse_inline("34-2,35:6").is_err());
        assert!(parse_inline("34:40,35:6").is_err());
    }
}
