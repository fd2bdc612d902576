mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gammamix::io::{read_scores_file, ModelFile};
use gammamix::{GammaMixture, ShiftedGamma};
use tempfile::TempDir;

fn gammamix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gammamix")).args(args).output().unwrap()
}

fn stdout_of(args: &[&str]) -> String {
    let out = gammamix(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn save_model(dir: &TempDir, name: &str, m: &GammaMixture) -> PathBuf {
    let path = dir.path().join(name);
    ModelFile::from_mixture(m).unwrap().save(&path).unwrap();
    path
}

/// Column `k` of every data row after the header.
fn column(text: &str, k: usize) -> Vec<f64> {
    text.lines().skip(1).take_while(|l| !l.is_empty()).map(|l| l.split('\t').nth(k).unwrap().parse().unwrap()).collect()
}

#[test]
fn empty_score_file_exits_with_too_few_samples() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("empty.txt");
    fs::write(&path, "# nothing\n").unwrap();
    assert_eq!(gammamix(&["fit", s(&path)]).status.code(), Some(4));
}

#[test]
fn malformed_model_exits_with_parse_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("model.json");
    fs::write(&path, "{\"format_version\": 1, \"n_states\": 1}").unwrap();
    assert_eq!(gammamix(&["sample", s(&path), "--n", "5"]).status.code(), Some(2));
}

#[test]
fn oversized_hierarchy_exits_with_size_error() {
    assert_eq!(gammamix(&["simulate", "--depth", "40", "--eta", "0.9"]).status.code(), Some(5));
}

#[test]
fn bad_flags_exit_with_usage_error() {
    assert_eq!(gammamix(&["fit"]).status.code(), Some(2));
    assert_eq!(gammamix(&["--help"]).status.code(), Some(0));
}

#[test]
fn sampling_zero_draws_writes_only_comments() {
    let dir = TempDir::new().unwrap();
    let model = save_model(&dir, "m.json", &common::single_truth());
    let out = dir.path().join("draws.txt");
    stdout_of(&["sample", s(&model), "--n", "0", "--out", s(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().all(|l| l.starts_with('#')), "{text}");
    assert!(read_scores_file(&out).unwrap().values.is_empty());
}

#[test]
fn sample_mean_matches_the_mixture_mean() {
    let dir = TempDir::new().unwrap();
    let m = common::mixture_truth();
    let model = save_model(&dir, "m.json", &m);
    let out = dir.path().join("draws.txt");
    stdout_of(&["sample", s(&model), "--n", "1000000", "--seed", "4", "--out", s(&out)]);
    let xs = read_scores_file(&out).unwrap().values;
    assert_eq!(xs.len(), 1_000_000);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let bound = 4.0 * m.variance().sqrt() / (xs.len() as f64).sqrt();
    assert!((mean - m.mean()).abs() < bound, "{mean} vs {}", m.mean());
}

#[test]
fn sample_and_simulate_are_byte_identical_on_rerun() {
    let dir = TempDir::new().unwrap();
    let model = save_model(&dir, "m.json", &common::mixture_truth());
    let a = stdout_of(&["sample", s(&model), "--n", "500", "--seed", "9"]);
    let b = stdout_of(&["sample", s(&model), "--n", "500", "--seed", "9"]);
    assert_eq!(a, b);
    let (p, q) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for path in [&p, &q] {
        stdout_of(&["simulate", "--depth", "12", "--eta", "0.95", "--dim", "32", "--seed", "5", "--out", s(path)]);
    }
    assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap());
    assert_eq!(read_scores_file(&p).unwrap().values.len(), 1 << 12);
}

#[test]
fn single_node_hierarchy_compares_the_query_with_itself() {
    let text = stdout_of(&["simulate", "--depth", "1", "--degree", "1", "--eta", "0.5"]);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split_whitespace().next().unwrap().parse::<f64>().unwrap(), 1.0);
}

#[test]
fn fit_recovers_sampled_single_gamma_and_writes_a_model() {
    let dir = TempDir::new().unwrap();
    let model = save_model(&dir, "truth.json", &common::single_truth());
    let draws = dir.path().join("draws.txt");
    stdout_of(&["sample", s(&model), "--n", "100000", "--seed", "3", "--out", s(&draws)]);
    let (fitted, density) = (dir.path().join("fit.json"), dir.path().join("density.csv"));
    let text = stdout_of(&["fit", s(&draws), "--states", "1", "--out", s(&fitted), "--density-out", s(&density)]);
    let alpha = column(&text, 2)[0];
    assert!((alpha / 13.3 - 1.0).abs() < 0.10, "{text}");
    let m = ModelFile::load(&fitted).unwrap().to_mixture().unwrap();
    assert_eq!(m.components()[0].alpha(), alpha);
    let csv = fs::read_to_string(&density).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,empirical,fitted,state0");
    assert_eq!(csv.lines().count(), 101);
}

#[test]
fn p_value_at_the_lower_edge_is_one() {
    let dir = TempDir::new().unwrap();
    let model = save_model(&dir, "m.json", &common::single_truth());
    let text = stdout_of(&["pvalue", s(&model), "--x", "-0.28"]);
    assert_eq!(column(&text, 1), vec![1.0]);
}

#[test]
fn p_values_agree_with_a_monte_carlo_tail() {
    let dir = TempDir::new().unwrap();
    let m = common::mixture_truth();
    let model = save_model(&dir, "m.json", &m);
    let scores = dir.path().join("x.txt");
    let xs = [0.05, 0.25, 0.45];
    fs::write(&scores, xs.map(|x| format!("{x}\n")).concat()).unwrap();
    let ps = column(&stdout_of(&["pvalue", s(&model), "--scores", s(&scores)]), 1);
    let n = 2_000_000;
    let draws = m.sample(n, 12);
    for (x, p) in xs.iter().zip(ps) {
        let tail = draws.iter().filter(|&&d| d >= *x).count() as f64 / n as f64;
        let sd = (tail * (1.0 - tail) / n as f64).sqrt().max(1.0 / n as f64);
        assert!((p - tail).abs() < 5.0 * sd, "x {x}: p {p}, Monte Carlo {tail}");
    }
}

#[test]
fn one_by_one_match_returns_that_pair() {
    let dir = TempDir::new().unwrap();
    let model = save_model(&dir, "m.json", &GammaMixture::single(ShiftedGamma::new(2.0, -0.5, 10.0).unwrap()));
    let matrix = dir.path().join("s.csv");
    fs::write(&matrix, "0.3\n").unwrap();
    let text = stdout_of(&["match", s(&matrix), "--nulls", s(&model)]);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("0\t0\t0.3\t"), "{text}");
    assert!(text.contains("\nclamped\tfalse"));
}

#[test]
fn cossim_rejects_mismatched_dimensions() {
    let dir = TempDir::new().unwrap();
    let (q, d) = (dir.path().join("q.csv"), dir.path().join("d.csv"));
    fs::write(&q, "1,2,3\n").unwrap();
    fs::write(&d, "4,5\n").unwrap();
    assert_eq!(gammamix(&["cossim", s(&q), s(&d)]).status.code(), Some(2));
    fs::write(&d, "4,5,6\n").unwrap();
    let v: f64 = stdout_of(&["cossim", s(&q), s(&d)]).trim().parse().unwrap();
    assert!((v - 32.0 / (14f64.sqrt() * 77f64.sqrt())).abs() < 1e-15);
}
