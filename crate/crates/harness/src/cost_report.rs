//! Tabulated analytic cost-model output.

use std::fmt::Write as _;
use std::path::Path;

use mlbfgs_core::dist::{analytic_cost, CostKind, CostModelInputs, CostReport};
use serde::Serialize;

use crate::error::{HarnessError, Result};

const COLUMNS: [&str; 6] = [
    "kind",
    "fwd_bwd_compute",
    "opt_compute",
    "fwd_bwd_memory",
    "opt_memory",
    "history_memory",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    kind: &'a str,
    fwd_bwd_compute: f64,
    opt_compute: f64,
    fwd_bwd_memory: f64,
    opt_memory: f64,
    history_memory: f64,
}

/// Parses `sgd`, `kfac`, `slbfgs`, `mlbfgs` or `all`.
pub fn parse_kinds(kind: &str) -> Result<Vec<CostKind>> {
    if kind == "all" {
        return Ok(CostKind::ALL.to_vec());
    }
    Ok(vec![kind.parse::<CostKind>().map_err(|e| HarnessError::config("kind", e.to_string()))?])
}

/// Evaluates the cost model for `kinds`. With several kinds, rows whose inputs are
/// incomplete are skipped; if none remain (or a single kind lacks inputs) the missing
/// names are reported.
pub fn cost_rows(kinds: &[CostKind], inputs: &CostModelInputs) -> Result<Vec<CostReport>> {
    if let [kind] = kinds {
        return Ok(vec![analytic_cost(*kind, inputs)?]);
    }
    let rows: Vec<CostReport> = kinds
        .iter()
        .filter(|k| inputs.missing(**k).is_empty())
        .map(|k| analytic_cost(*k, inputs))
        .collect::<mlbfgs_core::Result<_>>()?;
    if rows.is_empty() {
        let mut missing = inputs.missing(CostKind::Sgd);
        missing.sort_unstable();
        return Err(mlbfgs_core::Error::MissingInputs(missing).into());
    }
    Ok(rows)
}

pub fn format_table(rows: &[CostReport]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<8}", COLUMNS[0]);
    for c in &COLUMNS[1..] {
        let _ = write!(s, " {c:>16}");
    }
    s.push('\n');
    for r in rows {
        let _ = write!(s, "{:<8}", r.kind.as_str());
        for v in [r.fwd_bwd_compute, r.opt_compute, r.fwd_bwd_memory, r.opt_memory, r.history_memory] {
            let _ = write!(s, " {v:>16.6e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, rows: &[CostReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(CsvRow {
            kind: r.kind.as_str(),
            fwd_bwd_compute: r.fwd_bwd_compute,
            opt_compute: r.opt_compute,
            fwd_bwd_memory: r.fwd_bwd_memory,
            opt_memory: r.opt_memory,
            history_memory: r.history_memory,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluates, writes the CSV to `out` (if given) and returns the text table.
pub fn cost_report(kind: &str, inputs: &CostModelInputs, out: Option<&Path>) -> Result<String> {
    let rows = cost_rows(&parse_kinds(kind)?, inputs)?;
    if let Some(path) = out {
        write_csv(path, &rows)?;
    }
    Ok(format_table(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlbfgs_core::dist::LayerDims;

    fn inputs() -> CostModelInputs {
        CostModelInputs {
            d: Some(25.6e6),
            b: Some(32.0),
            p: Some(8.0),
            m: Some(10.0),
            c_fb: Some(1.0),
            m_fb: Some(1.0),
            ..Default::default()
        }
    }

    #[test]
    fn all_skips_incomplete_kinds() {
        let rows = cost_rows(&parse_kinds("all").unwrap(), &inputs()).unwrap();
        let kinds: Vec<_> = rows.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![CostKind::Sgd, CostKind::Mlbfgs]);
        assert_eq!(rows[1].opt_compute, 8.96e7);
        assert_eq!(rows[1].history_memory, 6.4e7);
    }

    #[test]
    fn single_kind_names_missing_inputs() {
        let err = cost_report("kfac", &inputs(), None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma") && msg.contains("layers"), "{msg}");
        assert!(err.is_config());
    }

    #[test]
    fn unknown_kind() {
        assert!(parse_kinds("shampoo").unwrap_err().is_config());
    }

    #[test]
    fn table_and_csv() {
        let mut inp = inputs();
        inp.d = Some(80.0);
        inp.gamma = Some(2.0);
        inp.t = Some(10.0);
        inp.layers = Some(vec![LayerDims { d: 16.0, l: 4.0 }, LayerDims { d: 64.0, l: 8.0 }]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cost.csv");
        let table = cost_report("all", &inp, Some(&path)).unwrap();
        assert_eq!(table.lines().count(), 4);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kind,fwd_bwd_compute,opt_compute,fwd_bwd_memory,opt_memory,history_memory\n"));
        let kfac = text.lines().find(|l| l.starts_with("kfac")).unwrap();
        // d + γ·b·C_fb + (4³ + 4³ + 8³ + 8³)/10
        let expected = 80.0 + 2.0 * 32.0 * 1.0 + 115.2;
        assert_eq!(kfac.split(',').nth(1).unwrap().parse::<f64>().unwrap(), expected);
    }
}
