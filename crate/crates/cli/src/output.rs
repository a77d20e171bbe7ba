//! CSV files written and read by the commands.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use longidose_core::dose_response::{summarize_samples, ApoPosterior, DoseSummary};
use longidose_core::fmt::fmt_num;

use crate::CliError;

pub const SAMPLES_HEADER: [&str; 3] = ["draw", "dose", "apo"];
pub const SUMMARY_HEADER: [&str; 6] = ["dose", "mean", "var", "median", "q025", "q975"];

/// Posterior samples in long form: one row per (draw, dose).
pub fn write_samples<W: Write>(post: &ApoPosterior, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SAMPLES_HEADER).map_err(csv_err)?;
    for (row, &draw) in post.samples.iter().zip(&post.draw_ids) {
        for (&dose, &apo) in post.dose_grid.iter().zip(row) {
            w.write_record([draw.to_string(), fmt_num(dose), fmt_num(apo)])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn write_summary<W: Write>(summary: &[DoseSummary], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in summary {
        w.write_record([s.dose, s.mean, s.var, s.median, s.q025, s.q975].map(fmt_num))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(format!("csv: {e}"))
}

/// Samples read back as a dose grid and one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub dose_grid: Vec<f64>,
    pub draws: Vec<usize>,
    pub samples: Vec<Vec<f64>>,
}

impl SampleTable {
    pub fn summarize(&self) -> Result<Vec<DoseSummary>, CliError> {
        Ok(summarize_samples(&self.dose_grid, &self.samples)?)
    }
}

pub fn read_samples_file(path: &Path) -> Result<SampleTable, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_samples(file).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Every draw must list the same doses in the same order.
pub fn read_samples<R: Read>(input: R) -> Result<SampleTable, CliError> {
    let bad = |m: String| CliError::Parse(m);
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != SAMPLES_HEADER {
        return Err(bad(format!("expected header draw,dose,apo, found {}", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut by_draw: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut order: Vec<f64> = Vec::new();
    let mut first_draw: Option<usize> = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = i + 1;
        let field = |j: usize| rec.get(j).ok_or_else(|| bad(format!("row {row}: missing field {}", SAMPLES_HEADER[j])));
        let draw: usize = field(0)?
            .trim()
            .parse()
            .map_err(|_| bad(format!("row {row}: draw is not a non-negative integer")))?;
        let num = |j: usize| -> Result<f64, CliError> {
            let s = field(j)?;
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("row {row}: cannot read {s:?} as {}", SAMPLES_HEADER[j])))
        };
        let (dose, apo) = (num(1)?, num(2)?);
        if *first_draw.get_or_insert(draw) == draw {
            order.push(dose);
        }
        by_draw.entry(draw).or_default().push((dose, apo));
    }
    if by_draw.is_empty() {
        return Err(bad("no samples".into()));
    }
    let mut draws = Vec::with_capacity(by_draw.len());
    let mut samples = Vec::with_capacity(by_draw.len());
    for (draw, rows) in by_draw {
        if rows.len() != order.len() || rows.iter().zip(&order).any(|((d, _), o)| d != o) {
            return Err(bad(format!("draw {draw} does not cover the dose grid {order:?}")));
        }
        draws.push(draw);
        samples.push(rows.into_iter().map(|(_, a)| a).collect());
    }
    Ok(SampleTable { dose_grid: order, draws, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_long_form() {
        let t = read_samples("draw,dose,apo\n0,1,2\n0,2,3\n1,1,4\n1,2,5\n".as_bytes()).unwrap();
        assert_eq!(t.dose_grid, vec![1.0, 2.0]);
        assert_eq!(t.draws, vec![0, 1]);
        assert_eq!(t.samples, vec![vec![2.0, 3.0], vec![4.0, 5.0]]);
    }

    #[test]
    fn rejects_malformed() {
        for text in [
            "draw,dose\n0,1\n",
            "draw,dose,apo\n0,1,x\n",
            "draw,dose,apo\n0,1,2\n0,2,3\n1,1,4\n",
            "draw,dose,apo\n",
            "draw,dose,apo\n-1,1,2\n",
        ] {
            assert!(matches!(read_samples(text.as_bytes()), Err(CliError::Parse(_))), "{text}");
        }
    }
}
