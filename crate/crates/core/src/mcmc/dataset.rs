use std::io::Read;
use std::path::Path;

use thiserror::Error;

use rand::Rng;

use crate::condmodels::{sample_value, CondError, NetworkParams};
use crate::netspec::{rescale, NetworkSpec, Typology, Value};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read data: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column `{column}`: cannot parse `{cell}`")]
    Unparseable { row: usize, column: String, cell: String },
    #[error("row {row}, column `{column}`: unknown category label `{label}`")]
    UnknownLabel { row: usize, column: String, label: String },
    #[error("row {row}, column `{column}`: category {value} out of range 0..={max}")]
    CategoryRange {
        row: usize,
        column: String,
        value: u32,
        max: u32,
    },
    #[error("column `{0}` appears twice")]
    DuplicateColumn(String),
    #[error("{0}")]
    Shape(String),
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Cell text treated as missing in addition to empty cells.
    pub missing_sentinel: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            missing_sentinel: Some("NA".into()),
        }
    }
}

/// Patient records aligned with a network: one column per variable, each
/// cell observed or missing. Continuous cells hold rescaled values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<Option<Value>>>,
    n_records: usize,
    /// Continuous cells moved inside their scale on load.
    pub clamped: usize,
    /// Header names that matched no variable.
    pub unmapped_columns: Vec<String>,
}

impl Dataset {
    /// A dataset of `n_records` with every cell missing.
    pub fn empty(spec: &NetworkSpec, n_records: usize) -> Self {
        Self {
            columns: vec![vec![None; n_records]; spec.len()],
            n_records,
            clamped: 0,
            unmapped_columns: Vec::new(),
        }
    }

    /// Builds a dataset from record rows in network order. Values are
    /// checked against each variable's domain.
    pub fn from_rows(spec: &NetworkSpec, rows: &[Vec<Option<Value>>]) -> Result<Self, DataError> {
        let mut ds = Self::empty(spec, rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != spec.len() {
                return Err(DataError::Shape(format!(
                    "record {r} has {} cells, expected {}",
                    row.len(),
                    spec.len()
                )));
            }
            for (v, cell) in row.iter().enumerate() {
                if let Some(val) = cell {
                    check_value(spec, v, *val).map_err(|m| DataError::Shape(format!("record {r}: {m}")))?;
                }
                ds.columns[v][r] = *cell;
            }
        }
        Ok(ds)
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, record: usize, var: usize) -> Option<Value> {
        self.columns[var][record]
    }

    pub fn set(&mut self, record: usize, var: usize, value: Option<Value>) {
        self.columns[var][record] = value;
    }

    pub fn column(&self, var: usize) -> &[Option<Value>] {
        &self.columns[var]
    }

    pub fn observed_count(&self, var: usize) -> usize {
        self.columns[var].iter().filter(|c| c.is_some()).count()
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|x| x.is_none()).count())
            .sum()
    }

    /// Variables with no observed cell.
    pub fn completely_unobserved(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&v| self.observed_count(v) == 0)
            .collect()
    }

    /// Number of observed cells with a non-neutral value.
    pub fn non_neutral_count(&self, var: usize) -> usize {
        self.columns[var]
            .iter()
            .filter(|c| matches!(c, Some(v) if !v.is_neutral()))
            .count()
    }
}

/// Forward-samples `n` complete records from a parameterized network.
pub fn simulate<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    params: &NetworkParams,
    n: usize,
    rng: &mut R,
) -> Result<Dataset, CondError> {
    params.check(spec)?;
    let mut ds = Dataset::empty(spec, n);
    let mut state = vec![0.0; spec.len()];
    let mut x = Vec::new();
    for r in 0..n {
        for &v in spec.topological_order() {
            let lay = spec.layout(v);
            x.resize(lay.width, 0.0);
            lay.fill(&state, &mut x);
            let val = sample_value(&spec.var(v).typology, &params.blocks[v], &x, rng)?;
            state[v] = match val {
                Value::Cat(k) => k as f64,
                Value::Real(y) => y,
            };
            ds.columns[v][r] = Some(val);
        }
    }
    Ok(ds)
}

pub(crate) fn check_value(spec: &NetworkSpec, v: usize, val: Value) -> Result<(), String> {
    let def = spec.var(v);
    match (&def.typology, val) {
        (Typology::Continuous(s), Value::Real(y)) => {
            let (lo, hi) = s.rescaled_domain();
            let lo_ok = if lo == -1.5 { y > lo } else { y >= lo };
            if y.is_finite() && lo_ok && y < hi {
                Ok(())
            } else {
                Err(format!("`{}`: {y} outside the rescaled domain ({lo}, {hi})", def.name))
            }
        }
        (t, Value::Cat(k)) if t.is_categorical() => {
            let max = t.non_neutral().unwrap();
            if k <= max {
                Ok(())
            } else {
                Err(format!("`{}`: category {k} out of range 0..={max}", def.name))
            }
        }
        _ => Err(format!("`{}`: value kind does not match the typology", def.name)),
    }
}

/// Reads a CSV whose header names the variables. Categorical cells are a
/// category index or label; continuous cells are raw values, clamped into
/// the scale when outside it and then rescaled.
pub fn load_csv(path: impl AsRef<Path>, spec: &NetworkSpec, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let f = std::fs::File::open(path)?;
    read_csv(f, spec, opts)
}

pub fn read_csv<R: Read>(reader: R, spec: &NetworkSpec, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut map: Vec<Option<usize>> = Vec::with_capacity(headers.len());
    let mut seen = vec![false; spec.len()];
    let mut unmapped = Vec::new();
    for h in headers.iter() {
        let name = h.trim();
        match spec.index_of(name) {
            Some(v) => {
                if seen[v] {
                    return Err(DataError::DuplicateColumn(name.to_string()));
                }
                seen[v] = true;
                map.push(Some(v));
            }
            None => {
                log::warn!("ignoring column `{name}`: no such variable");
                unmapped.push(name.to_string());
                map.push(None);
            }
        }
    }

    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        rows.push(rec?);
    }
    let mut ds = Dataset::empty(spec, rows.len());
    ds.unmapped_columns = unmapped;

    for (r, rec) in rows.iter().enumerate() {
        let row_no = r + 1;
        for (c, cell) in rec.iter().enumerate() {
            let Some(v) = map[c] else { continue };
            let cell = cell.trim();
            if cell.is_empty() || opts.missing_sentinel.as_deref() == Some(cell) {
                continue;
            }
            let def = spec.var(v);
            let column = || headers[c].trim().to_string();
            let value = match &def.typology {
                Typology::Continuous(s) => {
                    let raw: f64 = cell
                        .parse()
                        .ok()
                        .filter(|x: &f64| x.is_finite())
                        .ok_or_else(|| DataError::Unparseable {
                            row: row_no,
                            column: column(),
                            cell: cell.to_string(),
                        })?;
                    let (raw, moved) = s.clamp_raw(raw);
                    if moved {
                        ds.clamped += 1;
                        log::warn!("row {row_no}, column `{}`: value clamped into scale", column());
                    }
                    Value::Real(rescale(raw, s).expect("clamped value lies inside the scale"))
                }
                t => {
                    let max = t.non_neutral().unwrap();
                    let k = match cell.parse::<u32>() {
                        Ok(k) => k,
                        Err(_) => {
                            if def.labels.is_empty() && cell.parse::<f64>().is_ok() {
                                return Err(DataError::Unparseable {
                                    row: row_no,
                                    column: column(),
                                    cell: cell.to_string(),
                                });
                            }
                            def.category_of_label(cell).ok_or_else(|| DataError::UnknownLabel {
                                row: row_no,
                                column: column(),
                                label: cell.to_string(),
                            })?
                        }
                    };
                    if k > max {
                        return Err(DataError::CategoryRange {
                            row: row_no,
                            column: column(),
                            value: k,
                            max,
                        });
                    }
                    Value::Cat(k)
                }
            };
            ds.columns[v][r] = Some(value);
        }
    }
    Ok(ds)
}
