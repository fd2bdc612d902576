//! Command-line frontend.
//!
//! Tables go to standard output as tab-separated columns with a header row.
//! Exit codes: 0 success, 2 malformed input or dimension mismatch, 3 fit
//! failure, 4 too few samples, 5 simulation size cap exceeded.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::dist::{GammaMixture, ShiftedGamma};
use crate::em::{fit, FitConfig, ScoreSample, ShiftUpdate};
use crate::error::{Error, Result};
use crate::hierarchy::{simulate, HierarchyConfig, Query};
use crate::io::{self, DensityTable, ModelFile};
use crate::significance::{best_matches, p_value};

#[derive(Debug, Parser)]
#[command(name = "gammamix", version, about = "Fit shifted gamma mixtures to similarity scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to a score file.
    Fit {
        scores: PathBuf,
        #[arg(long, default_value_t = 1)]
        states: usize,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Relative log-likelihood change that ends a phase.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        no_warm_start: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Histogram bins for --density-out.
        #[arg(long, default_value_t = io::DEFAULT_DENSITY_BINS)]
        bins: usize,
        /// Accept values outside [-1, 1].
        #[arg(long)]
        unbounded: bool,
        /// Shift step of the M-step: the root of the shift score, or a joint
        /// profile maximization that converges in far fewer iterations.
        #[arg(long, value_enum, default_value_t = ShiftArg::Score)]
        shift_update: ShiftArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        density_out: Option<PathBuf>,
    },
    /// Draw samples from a model file.
    Sample {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Similarities from a random hierarchy of topic centers.
    Simulate {
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        eta: f64,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 384)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = QueryArg::FirstLeaf)]
        query: QueryArg,
        #[arg(long)]
        drop_self: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Right-tail p-values under a model.
    Pvalue {
        model: PathBuf,
        #[arg(long, conflicts_with = "scores", required_unless_present = "scores", allow_negative_numbers = true)]
        x: Option<f64>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Most significant candidate per query of a similarity matrix.
    Match {
        matrix: PathBuf,
        /// One model file per query, in row order.
        #[arg(long, num_args = 1.., required = true)]
        nulls: Vec<PathBuf>,
        #[arg(long)]
        one_to_one: bool,
    },
    /// Cosine similarities between query and document embeddings.
    Cossim {
        queries: PathBuf,
        docs: PathBuf,
        /// Write only this query's similarities, as a score file.
        #[arg(long)]
        row: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time warm-started against cold fits on synthetic data.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        states_list: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Draw the data from this model instead of the default single gamma.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShiftArg {
    Score,
    Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryArg {
    Root,
    FirstLeaf,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Fit(_) => 3,
        Error::TooFewSamples { .. } => 4,
        Error::Size(_) => 5,
        Error::Domain(_) | Error::Input(_) | Error::Assignment(_) | Error::Parse(_) | Error::Io(_) => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "gammamix: {e}");
            exit_code(&e)
        }
    }
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn open_scores(path: &Path) -> Result<io::Scores> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    io::read_scores(file)
}

fn load_model(path: &Path) -> Result<GammaMixture> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    ModelFile::from_json(&text)?.to_mixture()
}

fn rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    io::read_rows(file)
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit {
            scores,
            states,
            max_iters,
            tol,
            no_warm_start,
            seed,
            bins,
            unbounded,
            shift_update,
            out: model_out,
            density_out,
        } => {
            let values = open_scores(&scores)?.values;
            let data = if unbounded { ScoreSample::new(values) } else { ScoreSample::cosine(values) }
                .map_err(|e| match e {
                    Error::TooFewSamples { .. } => Error::TooFewSamples { needed: 10 * states, got: 0 },
                    other => other,
                })?;
            let mut cfg = FitConfig::new(states);
            cfg.max_iters = max_iters;
            cfg.rel_ll_tol = tol;
            cfg.warm_start = !no_warm_start;
            cfg.seed = seed;
            cfg.shift_update = match shift_update {
                ShiftArg::Score => ShiftUpdate::Score,
                ShiftArg::Profile => ShiftUpdate::Profile,
            };
            let report = fit(&data, &cfg)?;
            writeln!(out, "state\ttau\talpha\tc\tlambda\tmean")?;
            for (i, (g, tau)) in report.model.components().iter().zip(report.model.weights()).enumerate() {
                writeln!(out, "{i}\t{tau:?}\t{:?}\t{:?}\t{:?}\t{:?}", g.alpha(), g.shift(), g.lambda(), g.mean())?;
            }
            writeln!(out)?;
            writeln!(out, "log_likelihood\t{:?}", report.log_likelihood)?;
            writeln!(out, "n_samples\t{}", report.n_samples)?;
            writeln!(out, "mass_outside\t{:?}", report.mass_outside)?;
            writeln!(out, "bic\t{:?}", report.bic())?;
            writeln!(out, "iterations\t{}", report.iterations_run)?;
            writeln!(out, "converged\t{}", report.converged)?;
            if let Some(path) = model_out {
                ModelFile::from_report(&report)?.save(&path)?;
            }
            if let Some(path) = density_out {
                DensityTable::new(&data, &report.model, bins)?.write_csv(create(&path)?)?;
            }
        }
        Command::Sample { model, n, seed, out: path } => {
            let m = load_model(&model)?;
            let values = m.sample(n, seed);
            let header = vec![format!("{n} draws, seed {seed}, from {}", model.display())];
            match path {
                Some(p) => io::write_scores(create(&p)?, &header, &values, None)?,
                None => io::write_scores(&mut *out, &header, &values, None)?,
            }
        }
        Command::Simulate { depth, eta, degree, dim, seed, query, drop_self, out: path } => {
            let mut cfg = HierarchyConfig::new(depth, eta, degree);
            cfg.dim = dim;
            cfg.seed = seed;
            cfg.query = match query {
                QueryArg::Root => Query::Root,
                QueryArg::FirstLeaf => Query::FirstLeaf,
            };
            cfg.drop_self = drop_self;
            let ls = simulate(&cfg)?;
            let header = vec![
                format!("hierarchy depth {depth} eta {eta} degree {degree} dim {dim} seed {seed} query {query:?}"),
                "columns: similarity level".into(),
            ];
            match path {
                Some(p) => io::write_scores(create(&p)?, &header, &ls.sims, Some(&ls.levels))?,
                None => io::write_scores(&mut *out, &header, &ls.sims, Some(&ls.levels))?,
            }
        }
        Command::Pvalue { model, x, scores } => {
            let m = load_model(&model)?;
            let xs = match (x, scores) {
                (Some(x), _) => vec![x],
                (None, Some(path)) => open_scores(&path)?.values,
                (None, None) => return Err(Error::Input("give --x or --scores".into())),
            };
            writeln!(out, "x\tp_value")?;
            for x in xs {
                writeln!(out, "{x:?}\t{:?}", p_value(&m, x)?)?;
            }
        }
        Command::Match { matrix, nulls, one_to_one } => {
            let file = File::open(&matrix).map_err(|e| Error::Parse(format!("{}: {e}", matrix.display())))?;
            let s = io::read_similarity_matrix(file)?;
            let models = nulls.iter().map(|p| load_model(p)).collect::<Result<Vec<_>>>()?;
            let result = best_matches(&s, &models, one_to_one)?;
            writeln!(out, "query\tcandidate\tsimilarity\tp_value")?;
            for m in &result.matches {
                writeln!(out, "{}\t{}\t{:?}\t{:?}", m.query, m.candidate, m.similarity, m.p_value)?;
            }
            writeln!(out)?;
            writeln!(out, "fisher_stat\t{:?}", result.combined.stat)?;
            writeln!(out, "combined_p\t{:?}", result.combined.p_value)?;
            writeln!(out, "clamped\t{}", result.combined.clamped)?;
        }
        Command::Cossim { queries, docs, row, out: path } => {
            let qs = rows(&queries)?;
            let ds = rows(&docs)?;
            if qs.is_empty() || ds.is_empty() {
                return Err(Error::Input("embedding files must contain at least one row".into()));
            }
            let sims = qs.iter().map(|q| io::cosine_similarities(q, &ds)).collect::<Result<Vec<_>>>()?;
            let mut sink: Box<dyn Write + '_> = match path {
                Some(p) => Box::new(create(&p)?),
                None => Box::new(&mut *out),
            };
            match row {
                Some(r) => {
                    let values = sims.get(r).ok_or_else(|| {
                        Error::Input(format!("--row {r} but the query file has {} rows", qs.len()))
                    })?;
                    io::write_scores(&mut sink, &[format!("cosine similarities of query {r}")], values, None)?
                }
                None => io::write_rows(&mut sink, &sims)?,
            }
        }
        Command::Bench { n, states_list, repeats, seed, model } => {
            let m = match model {
                Some(p) => load_model(&p)?,
                None => GammaMixture::single(ShiftedGamma::new(13.3, -0.28, 35.5)?),
            };
            let data = ScoreSample::new(m.sample(n, seed))?;
            writeln!(out, "states\twarm_ms\tcold_ms\tspeedup\tll_rel_delta")?;
            for row in bench(&data, &states_list, repeats.max(1))? {
                writeln!(
                    out,
                    "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3e}",
                    row.states, row.warm_ms, row.cold_ms, row.speedup(), row.ll_rel_delta
                )?;
            }
        }
    }
    Ok(())
}

/// Median timings of warm and cold fits for one number of states.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub states: usize,
    pub warm_ms: f64,
    pub cold_ms: f64,
    /// `|LL_warm - LL_cold| / |LL_cold|`.
    pub ll_rel_delta: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.cold_ms / self.warm_ms
    }
}

pub fn bench(data: &ScoreSample, states_list: &[usize], repeats: usize) -> Result<Vec<BenchRow>> {
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    states_list
        .iter()
        .map(|&s| {
            let (mut warm, mut cold) = (Vec::new(), Vec::new());
            let (mut ll_warm, mut ll_cold) = (0.0, 0.0);
            for _ in 0..repeats {
                let t = Instant::now();
                ll_warm = fit(data, &FitConfig::new(s))?.log_likelihood;
                warm.push(t.elapsed().as_secs_f64() * 1e3);
                let t = Instant::now();
                ll_cold = fit(data, &FitConfig::new(s).cold())?.log_likelihood;
                cold.push(t.elapsed().as_secs_f64() * 1e3);
            }
            Ok(BenchRow {
                states: s,
                warm_ms: median(warm),
                cold_ms: median(cold),
                ll_rel_delta: (ll_warm - ll_cold).abs() / ll_cold.abs(),
            })
        })
        .collect()
}
