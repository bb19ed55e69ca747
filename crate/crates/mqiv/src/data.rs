//! Observation container, CSV ingestion, validation, and fold assignment.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

/// Immutable sample of observations `(Y, A, Z, X)`.
///
/// `A` (treatment) and `Z` (quasi-instrument) are binary; covariates are
/// stored row-major with `d` columns. Construction validates shape and
/// finiteness once, after which the dataset can be shared freely across
/// threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    a: Vec<u8>,
    z: Vec<u8>,
    x: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(y: Vec<f64>, a: Vec<u8>, z: Vec<u8>, x: Vec<f64>, d: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if a.len() != n || z.len() != n {
            return Err(Error::invalid("y, a, z must have identical length"));
        }
        if d == 0 {
            return Err(Error::invalid("at least one covariate required"));
        }
        if x.len() != n * d {
            return Err(Error::invalid(format!(
                "covariate matrix has {} entries, expected {}x{}",
                x.len(),
                n,
                d
            )));
        }
        for (i, v) in a.iter().enumerate() {
            if *v > 1 {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("treatment value {v} is not 0/1"),
                });
            }
        }
        for (i, v) in z.iter().enumerate() {
            if *v > 1 {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("instrument value {v} is not 0/1"),
                });
            }
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Row {
                    row: i + 1,
                    message: format!("non-finite outcome {v}"),
                });
            }
        }
        for (i, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Row {
                    row: i / d + 1,
                    message: format!("non-finite covariate {v}"),
                });
            }
        }
        Ok(Dataset { y, a, z, x, d })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn a(&self) -> &[u8] {
        &self.a
    }

    pub fn z(&self) -> &[u8] {
        &self.z
    }

    /// Covariate row `i` as a slice of length `d`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Flat row-major covariate storage.
    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn n_treated(&self) -> usize {
        self.a.iter().filter(|&&v| v == 1).count()
    }

    pub fn treated_fraction(&self) -> f64 {
        self.n_treated() as f64 / self.n() as f64
    }
}

/// Names binding CSV columns to the dataset roles.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ColumnMapping {
    pub outcome: String,
    pub treatment: String,
    pub instrument: String,
    pub covariates: Vec<String>,
}

impl ColumnMapping {
    pub fn new(
        outcome: impl Into<String>,
        treatment: impl Into<String>,
        instrument: impl Into<String>,
        covariates: Vec<String>,
    ) -> Result<Self> {
        let mapping = ColumnMapping {
            outcome: outcome.into(),
            treatment: treatment.into(),
            instrument: instrument.into(),
            covariates,
        };
        if mapping.covariates.is_empty() {
            return Err(Error::invalid("covariate list must be nonempty"));
        }
        let mut all: Vec<&str> = vec![&mapping.outcome, &mapping.treatment, &mapping.instrument];
        all.extend(mapping.covariates.iter().map(|s| s.as_str()));
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(Error::invalid("column names must be distinct"));
        }
        Ok(mapping)
    }
}

/// Fold labels for K-fold cross-fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Indices belonging to fold `fold` (the evaluation set).
    pub fn in_fold(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices outside fold `fold` (the training complement).
    pub fn out_of_fold(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter(|(_, f)| **f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Balanced pseudo-random partition of `0..n` into `k` folds.
///
/// Deterministic in `(n, k, seed)`: a seeded shuffle of the indices is dealt
/// round-robin, so fold sizes differ by at most one.
pub fn split_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!(
            "fold count {k} must satisfy 2 <= k <= n (n = {n})"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (pos, idx) in order.into_iter().enumerate() {
        fold_of[idx] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k })
}

/// Cheap diagnostics ahead of estimation. Reports, never fails.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub n_total: usize,
    pub n_treated: usize,
    /// Counts indexed as `n_by_cell[a][z]`.
    pub n_by_cell: [[usize; 2]; 2],
    /// `|mean(A | Z=1) - mean(A | Z=0)|`; 0 when a Z-arm is empty.
    pub marginal_relevance: f64,
    pub warnings: Vec<String>,
}

/// Threshold under which the marginal A-Z contrast triggers a warning.
pub const WEAK_RELEVANCE_THRESHOLD: f64 = 0.02;

pub fn validate(ds: &Dataset) -> ValidationReport {
    let mut n_by_cell = [[0usize; 2]; 2];
    for i in 0..ds.n() {
        n_by_cell[ds.a[i] as usize][ds.z[i] as usize] += 1;
    }
    let n_z1 = n_by_cell[0][1] + n_by_cell[1][1];
    let n_z0 = n_by_cell[0][0] + n_by_cell[1][0];
    let marginal_relevance = if n_z1 > 0 && n_z0 > 0 {
        (n_by_cell[1][1] as f64 / n_z1 as f64 - n_by_cell[1][0] as f64 / n_z0 as f64).abs()
    } else {
        0.0
    };

    let mut warnings = Vec::new();
    let n_treated = ds.n_treated();
    if n_treated == 0 || n_treated == ds.n() {
        warnings.push(format!(
            "degenerate treatment: mean(A) = {}",
            n_treated / ds.n()
        ));
    }
    for (a, row) in n_by_cell.iter().enumerate() {
        for (z, &count) in row.iter().enumerate() {
            if count == 0 {
                warnings.push(format!("empty cell (A={a}, Z={z})"));
            }
        }
    }
    if marginal_relevance < WEAK_RELEVANCE_THRESHOLD {
        warnings.push(format!(
            "weak instrument-treatment association: marginal relevance {marginal_relevance:.4} < {WEAK_RELEVANCE_THRESHOLD}"
        ));
    }

    ValidationReport {
        n_total: ds.n(),
        n_treated,
        n_by_cell,
        marginal_relevance,
        warnings,
    }
}

/// Format a float with 17 significant digits so reading it back recovers
/// the identical bit pattern.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Load a dataset from a headered CSV file using `mapping`.
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                name: name.to_string(),
            })
    };
    let iy = col(&mapping.outcome)?;
    let ia = col(&mapping.treatment)?;
    let iz = col(&mapping.instrument)?;
    let ix: Vec<usize> = mapping
        .covariates
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let d = ix.len();

    let parse_f64 = |field: &str, row: usize, what: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| Error::Row {
            row,
            message: format!("cannot parse {what} value {field:?} as a number"),
        })
    };
    let parse_binary = |field: &str, row: usize, what: &str| -> Result<u8> {
        match field.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => {
                let v = parse_f64(other, row, what)?;
                if v == 0.0 {
                    Ok(0)
                } else if v == 1.0 {
                    Ok(1)
                } else {
                    Err(Error::Row {
                        row,
                        message: format!("{what} value {other:?} is not 0/1"),
                    })
                }
            }
        }
    };

    let mut y = Vec::new();
    let mut a = Vec::new();
    let mut z = Vec::new();
    let mut x = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 1;
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::Row {
                row,
                message: format!("row has {} fields, expected {}", record.len(), headers.len()),
            })
        };
        let yv = parse_f64(field(iy)?, row, "outcome")?;
        if !yv.is_finite() {
            return Err(Error::Row {
                row,
                message: format!("non-finite outcome {yv}"),
            });
        }
        y.push(yv);
        a.push(parse_binary(field(ia)?, row, "treatment")?);
        z.push(parse_binary(field(iz)?, row, "instrument")?);
        for (ci, &i) in ix.iter().enumerate() {
            let xv = parse_f64(field(i)?, row, "covariate")?;
            if !xv.is_finite() {
                return Err(Error::Row {
                    row,
                    message: format!("non-finite covariate {xv} in column {:?}", mapping.covariates[ci]),
                });
            }
            x.push(xv);
        }
    }
    if y.is_empty() {
        return Err(Error::invalid("csv file contains no data rows"));
    }
    Dataset::new(y, a, z, x, d)
}

/// Write a dataset as CSV with header `y,a,z,x1..xd`, floats at 17
/// significant digits (round-trips bitwise through [`load_csv`]).
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    let mut header = String::from("y,a,z");
    for j in 1..=ds.d() {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(out, "{header}")?;
    for i in 0..ds.n() {
        let mut line = format!("{},{},{}", format_f64(ds.y[i]), ds.a[i], ds.z[i]);
        for v in ds.x_row(i) {
            line.push(',');
            line.push_str(&format_f64(*v));
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Default mapping for files produced by [`save_csv`].
pub fn default_mapping(d: usize) -> ColumnMapping {
    ColumnMapping {
        outcome: "y".into(),
        treatment: "a".into(),
        instrument: "z".into(),
        covariates: (1..=d).map(|j| format!("x{j}")).collect(),
    }
}
