//! Result rows and their CSV form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One aggregated `(solver, snr, rank)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub preset: String,
    pub solver: String,
    pub snr_db: f64,
    pub rank: usize,
    pub trial_count: usize,
    pub nrmse_mean: f64,
    pub nrmse_std: f64,
    pub se_nrmse: Option<f64>,
    pub mean_iterations: f64,
    pub failure_count: usize,
    pub seed_base: u64,
}

pub const HEADER: [&str; 11] = [
    "preset",
    "solver",
    "snr_db",
    "rank",
    "trial_count",
    "nrmse_mean",
    "nrmse_std",
    "se_nrmse",
    "mean_iterations",
    "failure_count",
    "seed_base",
];

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn record(row: &SweepRow) -> [String; 11] {
    [
        row.preset.clone(),
        row.solver.clone(),
        format_float(row.snr_db),
        row.rank.to_string(),
        row.trial_count.to_string(),
        format_float(row.nrmse_mean),
        format_float(row.nrmse_std),
        row.se_nrmse.map(format_float).unwrap_or_default(),
        format_float(row.mean_iterations),
        row.failure_count.to_string(),
        row.seed_base.to_string(),
    ]
}

/// Renders rows as CSV text (header first, `\n` line endings).
pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(record(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV output is UTF-8")
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(rows)).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Config(format!("{}: cannot parse column {} value '{raw}'", path.display(), HEADER[i])))
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let header = r.headers().map_err(|source| Error::Csv { path: path.to_path_buf(), source })?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let se = rec.get(7).unwrap_or("");
        rows.push(SweepRow {
            preset: field(&rec, 0, path)?,
            solver: field(&rec, 1, path)?,
            snr_db: field(&rec, 2, path)?,
            rank: field(&rec, 3, path)?,
            trial_count: field(&rec, 4, path)?,
            nrmse_mean: field(&rec, 5, path)?,
            nrmse_std: field(&rec, 6, path)?,
            se_nrmse: if se.is_empty() { None } else { Some(field(&rec, 7, path)?) },
            mean_iterations: field(&rec, 8, path)?,
            failure_count: field(&rec, 9, path)?,
            seed_base: field(&rec, 10, path)?,
        });
    }
    Ok(rows)
}

/// Whitespace-separated blocks for gnuplot, one per `(solver, rank)`, separated
/// by two blank lines so each can be addressed with `index`. Columns:
/// `snr_db nrmse_mean nrmse_std se_nrmse` (`NaN` when absent).
pub fn gnuplot_columns(rows: &[SweepRow]) -> String {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.solver.cmp(&b.solver).then(a.rank.cmp(&b.rank)).then(a.snr_db.total_cmp(&b.snr_db)));
    let mut out = String::new();
    let mut current: Option<(&str, usize)> = None;
    for r in sorted {
        let key = (r.solver.as_str(), r.rank);
        if current != Some(key) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# preset={} solver={} rank={}\n", r.preset, r.solver, r.rank));
            current = Some(key);
        }
        out.push_str(&format!(
            "{} {} {} {}\n",
            format_float(r.snr_db),
            format_float(r.nrmse_mean),
            format_float(r.nrmse_std),
            format_float(r.se_nrmse.unwrap_or(f64::NAN))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> SweepRow {
        SweepRow {
            preset: "custom".into(),
            solver: "bivamp".into(),
            snr_db: 20.0,
            rank: 3,
            trial_count: 4,
            nrmse_mean: 0.1 + 0.2,
            nrmse_std: 1.0 / 3.0,
            se_nrmse: None,
            mean_iterations: 12.5,
            failure_count: 0,
            seed_base: 7,
        }
    }

    #[test]
    fn header_only() {
        let s = to_csv_string(&[]);
        assert_eq!(s.lines().count(), 1);
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn one_row_two_lines() {
        let s = to_csv_string(&[row()]);
        assert_eq!(s.lines().count(), 2);
        assert!(!s.contains('\r'));
        assert!(s.contains(",3.0000000000000004e-1,"));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let mut b = row();
        b.se_nrmse = Some(std::f64::consts::PI * 1e-7);
        let rows = vec![row(), b];
        write_csv(&rows, &p).unwrap();
        assert_eq!(read_csv(&p).unwrap(), rows);
    }

    #[test]
    fn gnuplot_blocks() {
        let mut b = row();
        b.rank = 1;
        let mut c = row();
        c.snr_db = 0.0;
        let g = gnuplot_columns(&[row(), b, c]);
        let blocks: Vec<&str> = g.split("\n\n\n").collect();
        assert_eq!(blocks.len(), 2);
        assert!(blocks[0].contains("rank=1"));
        let lines: Vec<&str> = blocks[1].lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0.0000000000000000e0 "));
        assert!(lines[2].ends_with(" NaN"));
    }
}
