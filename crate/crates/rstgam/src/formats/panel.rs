//! Panel CSV: `loc_id,x,y,time,count,cov1..covp`, one row per (location, time).

use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rstgam_core::glm::PanelData;

use crate::error::FormatError;

const FIXED: [&str; 5] = ["loc_id", "x", "y", "time", "count"];

/// A panel plus the identifiers it was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    /// Location ids in order of first appearance.
    pub ids: Vec<String>,
    /// Sorted distinct time labels.
    pub times: Vec<i64>,
    pub covariate_names: Vec<String>,
    pub panel: PanelData,
}

fn num<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, line: usize) -> Result<T, FormatError> {
    let s = rec.get(col).unwrap_or("").trim();
    s.parse().map_err(|_| FormatError::parse("panel", line, format!("column {} value `{s}` is not a number", FIXED.get(col).copied().unwrap_or("cov"))))
}

pub fn read_panel<R: Read>(reader: R) -> Result<PanelFile, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < FIXED.len() || FIXED.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(FormatError::parse("panel", 1, format!("header must start with {}", FIXED.join(","))));
    }
    let covariate_names: Vec<String> = header.iter().skip(FIXED.len()).map(str::to_owned).collect();
    let p = covariate_names.len();

    struct Row {
        loc: usize,
        time: i64,
        count: f64,
        cov: Vec<f64>,
    }
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = r + 2;
        let id = rec.get(0).unwrap_or("").to_owned();
        let (x, y): (f64, f64) = (num(&rec, 1, line)?, num(&rec, 2, line)?);
        if !(x.is_finite() && y.is_finite()) {
            return Err(FormatError::parse("panel", line, "non-finite coordinate"));
        }
        let loc = match index.get(&id) {
            Some(&l) => {
                if coords[l] != [x, y] {
                    return Err(FormatError::parse("panel", line, format!("location `{id}` changes coordinates")));
                }
                l
            }
            None => {
                index.insert(id.clone(), ids.len());
                ids.push(id);
                coords.push([x, y]);
                ids.len() - 1
            }
        };
        let cov = (0..p).map(|k| num(&rec, FIXED.len() + k, line)).collect::<Result<Vec<f64>, _>>()?;
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::parse("panel", line, "non-finite covariate"));
        }
        rows.push((line, Row { loc, time: num(&rec, 3, line)?, count: num(&rec, 4, line)?, cov }));
    }
    if rows.is_empty() {
        return Err(FormatError::parse("panel", 2, "no data rows"));
    }
    let times: Vec<i64> = rows.iter().map(|(_, r)| r.time).collect::<BTreeSet<_>>().into_iter().collect();
    let tn = times.len();
    let n = ids.len();
    let mut counts = vec![f64::NAN; n * tn];
    let mut covariates = vec![0.0; n * tn * p];
    for (line, r) in rows {
        let t = times.binary_search(&r.time).expect("time collected above");
        let cell = r.loc * tn + t;
        if !counts[cell].is_nan() {
            return Err(FormatError::parse("panel", line, format!("duplicate row for location `{}` at time {}", ids[r.loc], r.time)));
        }
        counts[cell] = r.count;
        covariates[cell * p..(cell + 1) * p].copy_from_slice(&r.cov);
    }
    if let Some(cell) = counts.iter().position(|c| c.is_nan()) {
        return Err(FormatError::parse(
            "panel",
            0,
            format!("panel is not rectangular: location `{}` has no row at time {}", ids[cell / tn], times[cell % tn]),
        ));
    }
    let panel = PanelData::new(coords, tn, p, counts, covariates)?;
    Ok(PanelFile { ids, times, covariate_names, panel })
}

pub fn load_panel(path: &Path) -> Result<PanelFile, FormatError> {
    let f = std::fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    read_panel(std::io::BufReader::new(f))
}

impl PanelFile {
    /// Default ids `0..n` and times `0..T`.
    pub fn from_panel(panel: PanelData) -> Self {
        let p = panel.n_covariates();
        Self {
            ids: (0..panel.n_locations()).map(|i| i.to_string()).collect(),
            times: (0..panel.n_times() as i64).collect(),
            covariate_names: (1..=p).map(|k| format!("cov{k}")).collect(),
            panel,
        }
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), FormatError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = FIXED.to_vec();
        header.extend(self.covariate_names.iter().map(String::as_str));
        w.write_record(&header)?;
        let pd = &self.panel;
        for (i, id) in self.ids.iter().enumerate() {
            let u = pd.locations()[i];
            for (t, time) in self.times.iter().enumerate() {
                let mut rec = vec![id.clone(), u[0].to_string(), u[1].to_string(), time.to_string(), pd.count(i, t).to_string()];
                rec.extend((0..pd.n_covariates()).map(|k| pd.covariate(i, t, k).to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let f = std::fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }
}
