//! Text file formats.
//!
//! * Score files: one value per line, optionally followed by an integer level
//!   label; lines starting with `#` are comments.
//! * Model files: JSON documents holding the mixture and fit diagnostics.
//! * Embedding and similarity-matrix files: comma-separated rows of floats.
//! * Density exports: CSV tables of the empirical and fitted densities.
//!
//! Floats are written in shortest round-trip form, so every value read back is
//! bit-identical to the value written.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{GammaMixture, ShiftedGamma};
use crate::em::{FitReport, ScoreSample, ShiftUpdate};
use crate::error::{Error, Result};
use crate::significance::SimilarityMatrix;

/// Values from a score file, with the level column when present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scores {
    pub values: Vec<f64>,
    pub levels: Option<Vec<u32>>,
}

pub fn read_scores<R: Read>(reader: R) -> Result<Scores> {
    let mut scores = Scores::default();
    let mut levels = Vec::new();
    let mut with_levels = None;
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("line {}: {what}: {line:?}", k + 1));
        let mut fields = line.split_whitespace();
        let value: f64 = fields.next().unwrap_or_default().parse().map_err(|_| bad("not a number"))?;
        if !value.is_finite() {
            return Err(bad("value is not finite"));
        }
        let level = fields.next().map(|f| f.parse::<u32>().map_err(|_| bad("level is not a non-negative integer")));
        if fields.next().is_some() {
            return Err(bad("more than two columns"));
        }
        match (*with_levels.get_or_insert(level.is_some()), level) {
            (true, Some(level)) => levels.push(level?),
            (false, None) => {}
            _ => return Err(bad("level column present on some lines only")),
        }
        scores.values.push(value);
    }
    if with_levels == Some(true) {
        scores.levels = Some(levels);
    }
    Ok(scores)
}

pub fn read_scores_file(path: &Path) -> Result<Scores> {
    read_scores(File::open(path)?)
}

/// Writes `header` lines as comments, then one value (and level) per line.
pub fn write_scores<W: Write>(writer: W, header: &[String], values: &[f64], levels: Option<&[u32]>) -> Result<()> {
    if let Some(levels) = levels {
        if levels.len() != values.len() {
            return Err(Error::Input(format!("{} levels for {} values", levels.len(), values.len())));
        }
    }
    let mut w = BufWriter::new(writer);
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for (t, v) in values.iter().enumerate() {
        match levels {
            Some(levels) => writeln!(w, "{v:?} {}", levels[t])?,
            None => writeln!(w, "{v:?}")?,
        }
    }
    w.flush()?;
    Ok(())
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateRecord {
    pub tau: f64,
    pub alpha: f64,
    pub c: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMetadata {
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
    pub max_iters: usize,
    pub rel_ll_tol: f64,
    pub warm_start: bool,
    pub warm_fraction_iters: f64,
    pub warm_data_stride: usize,
    pub bisection_tol: f64,
    pub c_margin: f64,
    /// `"score"` or `"profile"`.
    pub shift_update: String,
}

/// On-disk form of a mixture, with the fit that produced it when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub n_states: usize,
    pub states: Vec<StateRecord>,
    pub log_likelihood: Option<f64>,
    pub n_samples: Option<usize>,
    pub mass_outside: f64,
    pub metadata: Option<FitMetadata>,
}

impl ModelFile {
    pub fn from_mixture(m: &GammaMixture) -> Result<Self> {
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            n_states: m.n_states(),
            states: m
                .components()
                .iter()
                .zip(m.weights())
                .map(|(g, &tau)| StateRecord { tau, alpha: g.alpha(), c: g.shift(), lambda: g.lambda() })
                .collect(),
            log_likelihood: None,
            n_samples: None,
            mass_outside: m.mass_outside()?,
            metadata: None,
        })
    }

    pub fn from_report(r: &FitReport) -> Result<Self> {
        let cfg = &r.config;
        Ok(Self {
            log_likelihood: Some(r.log_likelihood),
            n_samples: Some(r.n_samples),
            metadata: Some(FitMetadata {
                iterations: r.iterations_run,
                converged: r.converged,
                seed: cfg.seed,
                max_iters: cfg.max_iters,
                rel_ll_tol: cfg.rel_ll_tol,
                warm_start: cfg.warm_start,
                warm_fraction_iters: cfg.warm_fraction_iters,
                warm_data_stride: cfg.warm_data_stride,
                bisection_tol: cfg.bisection_tol,
                c_margin: cfg.c_margin,
                shift_update: match cfg.shift_update {
                    ShiftUpdate::Score => "score".into(),
                    ShiftUpdate::Profile => "profile".into(),
                },
            }),
            ..Self::from_mixture(&r.model)?
        })
    }

    /// Validates the document and builds the mixture.
    pub fn to_mixture(&self) -> Result<GammaMixture> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported model format_version {}", self.format_version)));
        }
        if self.n_states != self.states.len() || self.states.is_empty() {
            return Err(Error::Parse(format!(
                "n_states is {} but {} states are listed",
                self.n_states,
                self.states.len()
            )));
        }
        let total: f64 = self.states.iter().map(|s| s.tau).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Parse(format!("state weights sum to {total}, not 1")));
        }
        let invalid = |e: Error| Error::Parse(format!("invalid state: {e}"));
        let components = self
            .states
            .iter()
            .map(|s| ShiftedGamma::new(s.alpha, s.c, s.lambda))
            .collect::<Result<Vec<_>>>()
            .map_err(invalid)?;
        GammaMixture::new(components, self.states.iter().map(|s| s.tau).collect()).map_err(invalid)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model records serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

/// Reads comma-separated rows of equal width. Blank lines and `#` comments are
/// skipped.
pub fn read_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Parse(format!("line {}: expected finite comma-separated numbers", k + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "line {}: {} columns, expected {}",
                    k + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_rows_file(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_rows(File::open(path)?)
}

pub fn write_rows<W: Write>(writer: W, rows: impl IntoIterator<Item = impl AsRef<[f64]>>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for row in rows {
        let fields: Vec<String> = row.as_ref().iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_similarity_matrix<R: Read>(reader: R) -> Result<SimilarityMatrix> {
    SimilarityMatrix::new(read_rows(reader)?)
}

pub fn write_similarity_matrix<W: Write>(writer: W, s: &SimilarityMatrix) -> Result<()> {
    write_rows(writer, (0..s.n_queries()).map(|q| s.row(q)))
}

/// `u·v / (|u| |v|)` for every row of `docs`, clamped to `[-1, 1]`.
pub fn cosine_similarities(query: &[f64], docs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let qn = norm(query);
    if !(qn > 0.0) {
        return Err(Error::Input("query vector has zero norm".into()));
    }
    docs.iter()
        .enumerate()
        .map(|(t, d)| {
            if d.len() != query.len() {
                return Err(Error::Input(format!("row {t} has dimension {}, query has {}", d.len(), query.len())));
            }
            let dn = norm(d);
            if !(dn > 0.0) {
                return Err(Error::Input(format!("row {t} has zero norm")));
            }
            let dot: f64 = d.iter().zip(query).map(|(a, b)| a * b).sum();
            Ok((dot / (qn * dn)).clamp(-1.0, 1.0))
        })
        .collect()
}

pub const DEFAULT_DENSITY_BINS: usize = 100;
/// Padding added on both sides of the data range in density exports.
pub const DENSITY_PAD: f64 = 0.02;

/// Histogram of the data next to the fitted density, evaluated at bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable {
    pub x: Vec<f64>,
    pub empirical: Vec<f64>,
    pub fitted: Vec<f64>,
    /// `per_state[i][b]` is `τᵢ Gᵢ(x_b)`.
    pub per_state: Vec<Vec<f64>>,
}

impl DensityTable {
    /// `n_bins` equal bins over `[min - 0.02, max + 0.02]`.
    pub fn new(data: &ScoreSample, model: &GammaMixture, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Input("density export needs at least one bin".into()));
        }
        let lo = data.min() - DENSITY_PAD;
        let width = (data.max() + DENSITY_PAD - lo) / n_bins as f64;
        let mut counts = vec![0usize; n_bins];
        for &v in data.values() {
            counts[(((v - lo) / width) as usize).min(n_bins - 1)] += 1;
        }
        let x: Vec<f64> = (0..n_bins).map(|b| lo + (b as f64 + 0.5) * width).collect();
        let scale = 1.0 / (data.len() as f64 * width);
        let per_state: Vec<Vec<f64>> = model
            .components()
            .iter()
            .zip(model.weights())
            .map(|(g, w)| x.iter().map(|&v| w * g.pdf(v)).collect())
            .collect();
        Ok(Self {
            empirical: counts.iter().map(|&c| c as f64 * scale).collect(),
            fitted: x.iter().map(|&v| model.pdf(v)).collect(),
            per_state,
            x,
        })
    }

    /// Trapezoid rule over the grid.
    pub fn fitted_integral(&self) -> f64 {
        self.x.windows(2).zip(self.fitted.windows(2)).map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1])).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = BufWriter::new(writer);
        let mut header = vec!["x".to_string(), "empirical".into(), "fitted".into()];
        header.extend((0..self.per_state.len()).map(|i| format!("state{i}")));
        writeln!(w, "{}", header.join(","))?;
        for b in 0..self.x.len() {
            let mut row = vec![self.x[b], self.empirical[b], self.fitted[b]];
            row.extend(self.per_state.iter().map(|s| s[b]));
            let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}
