//! Longitudinal panel types, CSV ingestion and column transforms.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::fmt_num;
use crate::gee::LinkFamily;

/// One unit's repeated measurements, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub unit_id: String,
    pub times: Vec<i64>,
    pub outcomes: Vec<f64>,
    pub doses: Vec<f64>,
    /// `len() * n_covariates` values, one row per time point.
    pub covariates: Vec<f64>,
    n_covariates: usize,
}

impl Trajectory {
    pub fn new(
        unit_id: impl Into<String>,
        times: Vec<i64>,
        outcomes: Vec<f64>,
        doses: Vec<f64>,
        covariates: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let unit_id = unit_id.into();
        let p = covariates.first().map_or(0, Vec::len);
        if covariates.iter().any(|row| row.len() != p) {
            return Err(Error::InvalidData(format!(
                "unit {unit_id}: covariate rows have differing lengths"
            )));
        }
        let flat = covariates.into_iter().flatten().collect();
        Self::from_flat(unit_id, times, outcomes, doses, flat, p)
    }

    pub fn from_flat(
        unit_id: impl Into<String>,
        times: Vec<i64>,
        outcomes: Vec<f64>,
        doses: Vec<f64>,
        covariates: Vec<f64>,
        n_covariates: usize,
    ) -> Result<Self> {
        let t = Trajectory {
            unit_id: unit_id.into(),
            times,
            outcomes,
            doses,
            covariates,
            n_covariates,
        };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let k = self.times.len();
        if k == 0 {
            return Err(Error::InvalidData(format!("unit {} has no rows", self.unit_id)));
        }
        if self.outcomes.len() != k
            || self.doses.len() != k
            || self.covariates.len() != k * self.n_covariates
        {
            return Err(Error::InvalidData(format!(
                "unit {}: column lengths disagree",
                self.unit_id
            )));
        }
        if let Some(w) = self.times.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Integrity(format!(
                "unit {}: times not strictly increasing ({} then {})",
                self.unit_id, w[0], w[1]
            )));
        }
        let finite = self
            .outcomes
            .iter()
            .chain(&self.doses)
            .chain(&self.covariates)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidData(format!(
                "unit {}: non-finite value",
                self.unit_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn covariate_row(&self, k: usize) -> &[f64] {
        &self.covariates[k * self.n_covariates..(k + 1) * self.n_covariates]
    }
}

/// A validated longitudinal sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    trajectories: Vec<Trajectory>,
    family: LinkFamily,
    covariate_names: Vec<String>,
}

impl PanelDataset {
    pub fn new(
        trajectories: Vec<Trajectory>,
        family: LinkFamily,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::InvalidData("dataset has no units".into()));
        }
        let p = covariate_names.len();
        let mut seen = HashMap::with_capacity(trajectories.len());
        for t in &trajectories {
            if t.n_covariates != p {
                return Err(Error::InvalidData(format!(
                    "unit {} has {} covariates, expected {p}",
                    t.unit_id, t.n_covariates
                )));
            }
            if seen.insert(t.unit_id.as_str(), ()).is_some() {
                return Err(Error::Integrity(format!("duplicate unit id {}", t.unit_id)));
            }
            if family == LinkFamily::PoissonLog {
                if let Some(bad) = t.outcomes.iter().find(|&&y| y < 0.0 || y.fract() != 0.0) {
                    return Err(Error::InvalidData(format!(
                        "unit {}: Poisson outcome {bad} is not a non-negative integer",
                        t.unit_id
                    )));
                }
            }
        }
        Ok(PanelDataset {
            trajectories,
            family,
            covariate_names,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn family(&self) -> LinkFamily {
        self.family
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_units(&self) -> usize {
        self.trajectories.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_rows(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Same data under a different family tag, revalidated.
    pub fn with_family(&self, family: LinkFamily) -> Result<Self> {
        PanelDataset::new(self.trajectories.clone(), family, self.covariate_names.clone())
    }

    /// All rows in unit order, then time order.
    pub fn pooled_rows(&self) -> impl Iterator<Item = PooledRow<'_>> + '_ {
        self.trajectories.iter().enumerate().flat_map(|(unit, t)| {
            (0..t.len()).map(move |k| PooledRow {
                unit,
                time: t.times[k],
                y: t.outcomes[k],
                d: t.doses[k],
                x: t.covariate_row(k),
            })
        })
    }

    pub fn doses(&self) -> Vec<f64> {
        self.pooled_rows().map(|r| r.d).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRow<'a> {
    pub unit: usize,
    pub time: i64,
    pub y: f64,
    pub d: f64,
    pub x: &'a [f64],
}

/// Column names in the input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PanelSchema {
    pub unit_id: String,
    pub time: String,
    pub outcome: String,
    pub dose: String,
    pub covariates: Vec<String>,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            unit_id: "unit_id".into(),
            time: "time".into(),
            outcome: "outcome".into(),
            dose: "dose".into(),
            covariates: Vec::new(),
        }
    }
}

pub fn parse_panel_csv(
    path: impl AsRef<Path>,
    schema: &PanelSchema,
    family: LinkFamily,
) -> Result<PanelDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_panel_reader(file, schema, family)
}

/// Row numbers in errors count data rows from 1 (the header is not counted).
pub fn parse_panel_reader<R: Read>(
    reader: R,
    schema: &PanelSchema,
    family: LinkFamily,
) -> Result<PanelDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let unit_col = find(&schema.unit_id)?;
    let time_col = find(&schema.time)?;
    let y_col = find(&schema.outcome)?;
    let d_col = find(&schema.dose)?;
    let x_cols = schema
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let used: Vec<usize> = [unit_col, time_col, y_col, d_col]
        .into_iter()
        .chain(x_cols.iter().copied())
        .collect();
    for (i, h) in headers.iter().enumerate() {
        if !used.contains(&i) {
            warn!("ignoring extra column `{h}`");
        }
    }

    struct Row {
        time: i64,
        y: f64,
        d: f64,
        x: Vec<f64>,
        line: usize,
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Row>> = HashMap::new();

    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |col: usize| rec.get(col).unwrap_or("");
        let num = |col: usize| -> Result<f64> {
            let s = cell(col);
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: headers[col].to_string(),
                    value: s.to_string(),
                }),
            }
        };
        let unit = cell(unit_col).to_string();
        let time = cell(time_col).parse::<i64>().map_err(|_| Error::Parse {
            row,
            column: headers[time_col].to_string(),
            value: cell(time_col).to_string(),
        })?;
        let parsed = Row {
            time,
            y: num(y_col)?,
            d: num(d_col)?,
            x: x_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            line: row,
        };
        groups
            .entry(unit.clone())
            .or_insert_with(|| {
                order.push(unit);
                Vec::new()
            })
            .push(parsed);
    }

    let p = x_cols.len();
    let mut trajectories = Vec::with_capacity(order.len());
    for unit in order {
        let mut rows = groups.remove(&unit).unwrap_or_default();
        rows.sort_by_key(|r| r.time);
        if let Some(w) = rows.windows(2).find(|w| w[0].time == w[1].time) {
            return Err(Error::Integrity(format!(
                "duplicate (unit_id, time) = ({unit}, {}) at rows {} and {}",
                w[0].time, w[0].line, w[1].line
            )));
        }
        let mut t = Trajectory {
            unit_id: unit,
            times: Vec::with_capacity(rows.len()),
            outcomes: Vec::with_capacity(rows.len()),
            doses: Vec::with_capacity(rows.len()),
            covariates: Vec::with_capacity(rows.len() * p),
            n_covariates: p,
        };
        for r in rows {
            t.times.push(r.time);
            t.outcomes.push(r.y);
            t.doses.push(r.d);
            t.covariates.extend(r.x);
        }
        t.validate()?;
        trajectories.push(t);
    }
    if trajectories.is_empty() {
        return Err(Error::InvalidData("CSV has no data rows".into()));
    }
    PanelDataset::new(trajectories, family, schema.covariates.clone())
}

/// Writes the dataset with the schema's column names and 17 significant digits.
pub fn write_panel_csv<W: Write>(data: &PanelDataset, schema: &PanelSchema, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        schema.unit_id.clone(),
        schema.time.clone(),
        schema.outcome.clone(),
        schema.dose.clone(),
    ];
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for t in &data.trajectories {
        for k in 0..t.len() {
            let mut rec = vec![
                t.unit_id.clone(),
                t.times[k].to_string(),
                fmt_num(t.outcomes[k]),
                fmt_num(t.doses[k]),
            ];
            rec.extend(t.covariate_row(k).iter().map(|&v| fmt_num(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log,
    Log1p,
}

impl Transform {
    fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::Log1p => "log1p",
        }
    }

    pub fn apply(self, v: f64) -> Option<f64> {
        match self {
            Transform::Identity => Some(v),
            Transform::Log if v > 0.0 => Some(v.ln()),
            Transform::Log1p if v > -1.0 => Some(v.ln_1p()),
            _ => None,
        }
    }
}

/// Which column a transform targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Outcome,
    Dose,
    Covariate(String),
}

impl Column {
    pub fn parse(s: &str) -> Self {
        match s {
            "outcome" => Column::Outcome,
            "dose" => Column::Dose,
            other => Column::Covariate(other.to_string()),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Column::Outcome => "outcome",
            Column::Dose => "dose",
            Column::Covariate(c) => c,
        }
    }
}

impl Serialize for Column {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Column {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Column::parse(&s))
    }
}

/// Returns a new dataset with `column` replaced elementwise. Errors report the
/// pooled row number (1-based, unit order then time order).
pub fn apply_transform(data: &PanelDataset, column: &Column, t: Transform) -> Result<PanelDataset> {
    let cov_idx = match column {
        Column::Covariate(name) => Some(
            data.covariate_index(name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        ),
        _ => None,
    };
    let mut out = data.clone();
    let mut row = 0usize;
    for traj in &mut out.trajectories {
        let p = traj.n_covariates;
        for k in 0..traj.len() {
            row += 1;
            let cell = match (column, cov_idx) {
                (Column::Outcome, _) => &mut traj.outcomes[k],
                (Column::Dose, _) => &mut traj.doses[k],
                (_, Some(j)) => &mut traj.covariates[k * p + j],
                _ => unreachable!(),
            };
            *cell = t.apply(*cell).ok_or_else(|| Error::TransformDomain {
                kind: t.name(),
                value: *cell,
                row,
                column: column.name().to_string(),
            })?;
        }
    }
    PanelDataset::new(out.trajectories, out.family, out.covariate_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "unit_id,time,outcome,dose,a,b\n\
        u1,1,1.5,2.0,0.1,0.2\n\
        u2,2,3.0,1.0,0.3,0.4\n\
        u1,3,2.5,2.5,0.5,0.6\n\
        u1,2,2.0,3.0,0.7,0.8\n\
        u2,1,4.0,1.5,0.9,1.0\n\
        u2,3,5.0,0.5,1.1,1.2\n";

    fn schema() -> PanelSchema {
        PanelSchema {
            covariates: vec!["a".into(), "b".into()],
            ..PanelSchema::default()
        }
    }

    fn parse(s: &str) -> Result<PanelDataset> {
        parse_panel_reader(s.as_bytes(), &schema(), LinkFamily::GaussianIdentity)
    }

    #[test]
    fn parses_and_sorts_by_time() {
        let data = parse(CSV).unwrap();
        assert_eq!(data.n_units(), 2);
        assert_eq!(data.n_covariates(), 2);
        let u1 = &data.trajectories()[0];
        assert_eq!(u1.unit_id, "u1");
        assert_eq!(u1.times, vec![1, 2, 3]);
        assert_eq!(u1.doses, vec![2.0, 3.0, 2.5]);
        assert_eq!(u1.covariate_row(1), &[0.7, 0.8]);
        assert_eq!(data.trajectories()[1].len(), 3);
    }

    #[test]
    fn duplicate_unit_time_is_integrity_error() {
        let bad = format!("{CSV}u1,2,9.0,9.0,9.0,9.0\n");
        assert!(matches!(parse(&bad), Err(Error::Integrity(_))));
    }

    #[test]
    fn na_cell_reports_row() {
        let bad = CSV.replace("u2,2,3.0", "u2,2,NA");
        match parse(&bad) {
            Err(Error::Parse { row, column, value }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "outcome");
                assert_eq!(value, "NA");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let s = PanelSchema {
            covariates: vec!["zzz".into()],
            ..PanelSchema::default()
        };
        let err = parse_panel_reader(CSV.as_bytes(), &s, LinkFamily::GaussianIdentity).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "zzz"));
    }

    #[test]
    fn poisson_rejects_negative_outcome() {
        let bad = CSV.replace("u2,2,3.0", "u2,2,-3");
        let err = parse_panel_reader(bad.as_bytes(), &schema(), LinkFamily::PoissonLog).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    #[test]
    fn transforms() {
        let data = parse(CSV).unwrap();
        let zeroed = apply_transform(&data, &Column::Outcome, Transform::Identity).unwrap();
        assert_eq!(zeroed, data);

        let t = Trajectory::new("u", vec![1], vec![0.0], vec![std::f64::consts::E], vec![vec![]])
            .unwrap();
        let d = PanelDataset::new(vec![t], LinkFamily::GaussianIdentity, vec![]).unwrap();
        let y = apply_transform(&d, &Column::Outcome, Transform::Log1p).unwrap();
        assert_eq!(y.trajectories()[0].outcomes[0], 0.0);
        let l = apply_transform(&d, &Column::Dose, Transform::Log).unwrap();
        assert!((l.trajectories()[0].doses[0] - 1.0).abs() < 1e-15);
        // original untouched
        assert_eq!(d.trajectories()[0].doses[0], std::f64::consts::E);
    }

    #[test]
    fn log_of_zero_dose_is_domain_error() {
        let t = Trajectory::new("u", vec![1, 2], vec![1.0, 1.0], vec![1.0, 0.0], vec![vec![], vec![]])
            .unwrap();
        let d = PanelDataset::new(vec![t], LinkFamily::GaussianIdentity, vec![]).unwrap();
        match apply_transform(&d, &Column::Dose, Transform::Log) {
            Err(Error::TransformDomain { value, row, .. }) => {
                assert_eq!(value, 0.0);
                assert_eq!(row, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transform_covariate_by_name() {
        let data = parse(CSV).unwrap();
        let out = apply_transform(&data, &Column::Covariate("b".into()), Transform::Log).unwrap();
        assert!((out.trajectories()[0].covariate_row(0)[1] - 0.2f64.ln()).abs() < 1e-15);
        assert!(apply_transform(&data, &Column::Covariate("nope".into()), Transform::Log).is_err());
    }

    #[test]
    fn pooled_rows_shapes() {
        let data = parse(CSV).unwrap();
        let rows: Vec<_> = data.pooled_rows().collect();
        assert_eq!(rows.len(), 6);
        assert_eq!((rows[0].unit, rows[0].time), (0, 1));
        assert_eq!((rows[5].unit, rows[5].time), (1, 3));

        let t = Trajectory::new("solo", vec![7], vec![1.0], vec![2.0], vec![vec![]]).unwrap();
        let d = PanelDataset::new(vec![t], LinkFamily::GaussianIdentity, vec![]).unwrap();
        let rows: Vec<_> = d.pooled_rows().collect();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].x.is_empty());
    }

    #[test]
    fn trajectory_invariants() {
        assert!(Trajectory::new("u", vec![], vec![], vec![], vec![]).is_err());
        assert!(Trajectory::new("u", vec![2, 1], vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![], vec![]])
            .is_err());
        assert!(Trajectory::new("u", vec![1], vec![1.0, 2.0], vec![1.0], vec![vec![]]).is_err());
        let a = Trajectory::new("u", vec![1], vec![1.0], vec![1.0], vec![vec![1.0]]).unwrap();
        let b = Trajectory::new("u", vec![1], vec![1.0], vec![1.0], vec![vec![1.0]]).unwrap();
        assert!(PanelDataset::new(vec![a, b], LinkFamily::GaussianIdentity, vec!["x".into()]).is_err());
    }
}
