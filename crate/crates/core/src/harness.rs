//! The online loop, regret accounting, multi-seed aggregation, grid search and
//! CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::env::{pseudo_regret, EnvSpec, RoundStream};
use crate::error::{BanditError, Result};
use crate::policy::{build_policy, Algorithm, Hyperparams};

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Template environment; each seed gets `env.reseeded(seed)`.
    pub env: EnvSpec,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub hyperparams: Hyperparams,
    pub output_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, env: EnvSpec, horizon: usize, seeds: Vec<u64>) -> Self {
        Self {
            algorithm,
            env,
            horizon,
            seeds,
            hyperparams: Hyperparams::new(),
            output_path: None,
        }
    }

    pub fn with_hyperparams(mut self, hp: Hyperparams) -> Self {
        self.hyperparams = hp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(BanditError::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(BanditError::InvalidConfig("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub algorithm: String,
    pub seed: u64,
    /// Cumulative pseudo-regret after rounds `1..=T`.
    pub cumulative: Vec<f64>,
    /// Arm index played each round.
    pub choices: Vec<usize>,
    pub wall_time_ms: f64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// One seed of one algorithm.
pub fn run_single(algorithm: Algorithm, hp: &Hyperparams, env: &EnvSpec, horizon: usize) -> Result<RegretTrace> {
    let start = Instant::now();
    let mut policy = build_policy(algorithm, hp, env.dim, env.seed)?;
    let mut stream = RoundStream::new(env);
    let first = stream.round(1);
    if let Some(dim) = policy.input_dim() {
        if dim != first.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: dim,
                got: first.dim(),
            });
        }
    }
    let mut cumulative = Vec::with_capacity(horizon);
    let mut choices = Vec::with_capacity(horizon);
    let mut total = 0.0;
    let mut round = first;
    for t in 1..=horizon {
        if t > 1 {
            round = stream.round(t);
        }
        let chosen = policy.select(&round)?;
        let reward = env.realize(&round, chosen)?;
        total += pseudo_regret(&round, chosen)?;
        policy.update(&round, chosen, reward)?;
        cumulative.push(total);
        choices.push(chosen);
    }
    Ok(RegretTrace {
        algorithm: algorithm.name().to_string(),
        seed: env.seed,
        cumulative,
        choices,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every seed of `config`; traces come back in seed order.
pub fn run(config: &RunConfig) -> Result<Vec<RegretTrace>> {
    config.validate()?;
    // Build one policy up front so configuration errors surface before any round.
    build_policy(config.algorithm, &config.hyperparams, config.env.dim, config.seeds[0])?;
    config
        .seeds
        .par_iter()
        .map(|&seed| {
            let env = config.env.reseeded(seed)?;
            run_single(config.algorithm, &config.hyperparams, &env, config.horizon)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub seed_count: usize,
    pub mean_final_regret: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub std_final_regret: f64,
    pub mean_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub algorithms: Vec<AlgorithmSummary>,
}

impl Summary {
    pub fn get(&self, algorithm: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

/// Groups traces by algorithm, in first-appearance order.
pub fn summarize(traces: &[RegretTrace]) -> Summary {
    let mut order: Vec<&str> = Vec::new();
    for t in traces {
        if !order.contains(&t.algorithm.as_str()) {
            order.push(&t.algorithm);
        }
    }
    let algorithms = order
        .into_iter()
        .map(|name| {
            let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.algorithm == name).collect();
            let n = group.len() as f64;
            let finals: Vec<f64> = group.iter().map(|t| t.final_regret()).collect();
            let mean = finals.iter().sum::<f64>() / n;
            let std = if group.len() > 1 {
                (finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let len = group.iter().map(|t| t.cumulative.len()).min().unwrap_or(0);
            let mean_curve = (0..len)
                .map(|i| group.iter().map(|t| t.cumulative[i]).sum::<f64>() / n)
                .collect();
            AlgorithmSummary {
                algorithm: name.to_string(),
                seed_count: group.len(),
                mean_final_regret: mean,
                std_final_regret: std,
                mean_curve,
            }
        })
        .collect();
    Summary { algorithms }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMetric {
    /// Mean final cumulative regret.
    #[default]
    FinalRegret,
    /// Mean of the per-round mean cumulative curve.
    CurveArea,
}

impl std::str::FromStr for SelectionMetric {
    type Err = BanditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" | "final-regret" => Ok(SelectionMetric::FinalRegret),
            "area" | "auc" => Ok(SelectionMetric::CurveArea),
            _ => Err(BanditError::InvalidConfig(format!("unknown selection metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub hyperparams: Hyperparams,
    pub score: f64,
    pub summary: AlgorithmSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: Hyperparams,
    pub best_score: f64,
    /// Every evaluated point, in lexicographic parameter order.
    pub points: Vec<GridPoint>,
    /// Total single-seed runs executed.
    pub runs: usize,
}

/// Exhaustive search over the Cartesian product of `grid` on top of `base`.
///
/// Keys are visited in sorted order and values in ascending order; the first
/// point with the lowest score wins, so ties resolve lexicographically.
pub fn grid_search(base: &RunConfig, grid: &[(String, Vec<f64>)], metric: SelectionMetric) -> Result<GridResult> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(BanditError::InvalidConfig("grid must have at least one value per key".into()));
    }
    let mut axes: Vec<(String, Vec<f64>)> = grid.to_vec();
    for (key, values) in &mut axes {
        if !Hyperparams::is_known(key) {
            return Err(BanditError::UnknownHyperparameter(key.clone()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
    }
    axes.sort_by(|a, b| a.0.cmp(&b.0));
    let mut dup_check: Vec<&str> = axes.iter().map(|(k, _)| k.as_str()).collect();
    dup_check.dedup();
    if dup_check.len() != axes.len() {
        return Err(BanditError::InvalidConfig("duplicate grid key".into()));
    }

    let mut combos: Vec<Hyperparams> = vec![base.hyperparams.clone()];
    for (key, values) in &axes {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for hp in &combos {
            for &v in values {
                next.push(hp.clone().with(key, v)?);
            }
        }
        combos = next;
    }

    let mut points = Vec::with_capacity(combos.len());
    let mut runs = 0;
    for hp in combos {
        let cfg = base.clone().with_hyperparams(hp.clone());
        let traces = run(&cfg)?;
        runs += traces.len();
        let summary = summarize(&traces).algorithms.remove(0);
        let score = match metric {
            SelectionMetric::FinalRegret => summary.mean_final_regret,
            SelectionMetric::CurveArea => {
                summary.mean_curve.iter().sum::<f64>() / summary.mean_curve.len() as f64
            }
        };
        points.push(GridPoint {
            hyperparams: hp,
            score,
            summary,
        });
    }
    let best_idx = points
        .iter()
        .enumerate()
        .fold(0, |best, (i, p)| if p.score < points[best].score { i } else { best });
    Ok(GridResult {
        best: points[best_idx].hyperparams.clone(),
        best_score: points[best_idx].score,
        points,
        runs,
    })
}

pub fn trace_file_name(trace: &RegretTrace) -> String {
    format!("trace_{}_{}.csv", trace.algorithm, trace.seed)
}

pub fn trace_csv(trace: &RegretTrace) -> String {
    let mut s = String::from("round,cumulative_regret\n");
    for (i, c) in trace.cumulative.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, c);
    }
    s
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut s = String::from("algorithm,seed_count,mean_final_regret,std_final_regret\n");
    for a in &summary.algorithms {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            a.algorithm, a.seed_count, a.mean_final_regret, a.std_final_regret
        );
    }
    s
}

pub fn curves_csv(summary: &Summary) -> String {
    let mut s = String::from("round");
    for a in &summary.algorithms {
        let _ = write!(s, ",{}_mean", a.algorithm);
    }
    s.push('\n');
    let len = summary
        .algorithms
        .iter()
        .map(|a| a.mean_curve.len())
        .min()
        .unwrap_or(0);
    for i in 0..len {
        let _ = write!(s, "{}", i + 1);
        for a in &summary.algorithms {
            let _ = write!(s, ",{}", a.mean_curve[i]);
        }
        s.push('\n');
    }
    s
}

pub const PLOT_SCRIPT_NAME: &str = "plot_curves.py";

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Plots mean cumulative regret per algorithm from curves.csv.
# Usage: python3 plot_curves.py [curves.csv] [out.png]
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else "curves.csv"
dst = sys.argv[2] if len(sys.argv) > 2 else "curves.png"

with open(src, newline="") as f:
    rows = list(csv.reader(f))
header, body = rows[0], rows[1:]
rounds = [int(r[0]) for r in body]
for col, name in enumerate(header[1:], start=1):
    plt.plot(rounds, [float(r[col]) for r in body], label=name.removesuffix("_mean"))
plt.xlabel("round")
plt.ylabel("cumulative regret")
plt.legend()
plt.tight_layout()
plt.savefig(dst, dpi=150)
"#;

/// Writes per-run traces, `summary.csv`, `curves.csv` and a plot script into
/// `dir`. On failure every file written by this call is removed.
pub fn write_outputs(traces: &[RegretTrace], summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let result = (|| {
        fs::create_dir_all(dir).map_err(|e| BanditError::io(dir, e))?;
        let mut put = |name: String, contents: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| BanditError::io(&path, e))?;
            written.push(path);
            Ok(())
        };
        for t in traces {
            put(trace_file_name(t), trace_csv(t))?;
        }
        put("summary.csv".into(), summary_csv(summary))?;
        put("curves.csv".into(), curves_csv(summary))?;
        put(PLOT_SCRIPT_NAME.into(), PLOT_SCRIPT.into())?;
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

/// Parses a `round,cumulative_regret` file back into the cumulative vector.
pub fn read_trace_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| BanditError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "round,cumulative_regret")) => {}
        _ => {
            return Err(BanditError::Parse {
                line: 1,
                message: "expected header `round,cumulative_regret`".into(),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let bad = |m: &str| BanditError::Parse {
                line: i + 1,
                message: m.to_string(),
            };
            let (round, value) = line.split_once(',').ok_or_else(|| bad("expected two fields"))?;
            let round: usize = round.parse().map_err(|_| bad("bad round index"))?;
            if round != i {
                return Err(bad("rounds must be consecutive from 1"));
            }
            value.parse::<f64>().map_err(|_| bad("bad regret value"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Noise, RewardModel};
    use proptest::prelude::*;

    fn trace(name: &str, seed: u64, cumulative: Vec<f64>) -> RegretTrace {
        RegretTrace {
            algorithm: name.into(),
            seed,
            choices: vec![0; cumulative.len()],
            cumulative,
            wall_time_ms: 0.0,
        }
    }

    fn quad_env() -> EnvSpec {
        EnvSpec::synthetic(RewardModel::Quadratic, 4, 5, Noise::Gaussian(0.05), 0).unwrap()
    }

    #[test]
    fn oracle_has_zero_regret() {
        let cfg = RunConfig::new(Algorithm::Oracle, quad_env(), 200, vec![1, 2, 3]);
        for t in run(&cfg).unwrap() {
            assert_eq!(t.final_regret(), 0.0);
        }
    }

    #[test]
    fn runs_are_deterministic_and_monotone() {
        let hp = Hyperparams::new().with("width", 16.0).unwrap();
        let cfg = RunConfig::new(Algorithm::EeNet(crate::eenet::LabelVariant::Residual), quad_env(), 100, vec![4, 5])
            .with_hyperparams(hp);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.cumulative, y.cumulative);
            assert_eq!(x.choices, y.choices);
            assert_eq!(x.cumulative.len(), 100);
            for w in x.cumulative.windows(2) {
                assert!(w[1] >= w[0] && w[1] - w[0] <= 1.0);
            }
        }
        assert_eq!(a[0].seed, 4);
        assert_eq!(a[1].seed, 5);
    }

    #[test]
    fn invalid_configs_fail_fast() {
        assert!(run(&RunConfig::new(Algorithm::Oracle, quad_env(), 0, vec![1])).is_err());
        assert!(run(&RunConfig::new(Algorithm::Oracle, quad_env(), 5, vec![])).is_err());
        let bad = Hyperparams::new().with("lambda", -1.0).unwrap();
        assert!(run(&RunConfig::new(Algorithm::LinUcb, quad_env(), 5, vec![1]).with_hyperparams(bad)).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[trace("a", 1, vec![1.0, 10.0])]);
        assert_eq!(s.algorithms[0].mean_final_regret, 10.0);
        assert_eq!(s.algorithms[0].std_final_regret, 0.0);

        let s = summarize(&[trace("a", 1, vec![10.0]), trace("a", 2, vec![20.0])]);
        assert_eq!(s.algorithms[0].mean_final_regret, 15.0);
        assert!((s.algorithms[0].std_final_regret - 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn summary_curve_matches_recomputation() {
        let traces: Vec<RegretTrace> = (0..4)
            .map(|s| trace("x", s, (1..=6).map(|i| (i * (s as usize + 1)) as f64 * 0.1).collect()))
            .chain([trace("y", 0, vec![0.0; 6])])
            .collect();
        let s = summarize(&traces);
        assert_eq!(s.algorithms.len(), 2);
        let x = s.get("x").unwrap();
        for i in 0..6 {
            let mut acc = 0.0;
            for t in traces.iter().filter(|t| t.algorithm == "x") {
                acc += t.cumulative[i];
            }
            assert!((x.mean_curve[i] - acc / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_csv_format() {
        let t = trace("eenet", 3, vec![0.1, 0.1, 0.6]);
        assert_eq!(trace_csv(&t), "round,cumulative_regret\n1,0.1\n2,0.1\n3,0.6\n");
        assert_eq!(trace_file_name(&t), "trace_eenet_3.csv");
    }

    #[test]
    fn outputs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let traces = vec![
            trace("a", 1, vec![0.1, 0.30000000000000004, 1.0 / 3.0]),
            trace("b", 1, vec![0.0, 0.5, 0.75]),
        ];
        let summary = summarize(&traces);
        let files = write_outputs(&traces, &summary, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        assert_eq!(read_trace_csv(&dir.path().join("trace_a_1.csv")).unwrap(), traces[0].cumulative);
        let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
        assert!(curves.starts_with("round,a_mean,b_mean\n"));
        assert!(curves.lines().all(|l| l.split(',').count() == 3));
        let summary_text = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary_text.starts_with("algorithm,seed_count,mean_final_regret,std_final_regret\n"));
        assert!(dir.path().join(PLOT_SCRIPT_NAME).exists());
    }

    #[test]
    fn unwritable_output_path() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let traces = vec![trace("a", 1, vec![0.1])];
        let err = write_outputs(&traces, &summarize(&traces), &file.path().join("sub")).unwrap_err();
        assert!(matches!(err, BanditError::Io { .. }));
    }

    #[test]
    fn grid_single_point_and_accounting() {
        let base = RunConfig::new(Algorithm::LinUcb, quad_env(), 20, vec![1, 2, 3]);
        let one = grid_search(&base, &[("alpha".into(), vec![0.5])], SelectionMetric::FinalRegret).unwrap();
        assert_eq!(one.best.get("alpha"), Some(0.5));
        assert_eq!(one.runs, 3);

        let grid = vec![("alpha".into(), vec![0.1, 1.0]), ("lambda".into(), vec![0.1, 1.0])];
        let res = grid_search(&base, &grid, SelectionMetric::FinalRegret).unwrap();
        assert_eq!(res.points.len(), 4);
        assert_eq!(res.runs, 12);
        let min = res.points.iter().map(|p| p.score).fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_score, min);

        assert!(matches!(
            grid_search(&base, &[("gamma".into(), vec![1.0])], SelectionMetric::FinalRegret),
            Err(BanditError::UnknownHyperparameter(_))
        ));
        assert!(grid_search(&base, &[], SelectionMetric::FinalRegret).is_err());
    }

    #[test]
    fn grid_ties_pick_lexicographically_smallest() {
        let base = RunConfig::new(Algorithm::Oracle, quad_env(), 10, vec![1]);
        let grid = vec![("nu".into(), vec![1.0, 0.1]), ("alpha".into(), vec![2.0, 1.0])];
        let res = grid_search(&base, &grid, SelectionMetric::FinalRegret).unwrap();
        assert_eq!(res.best.get("alpha"), Some(1.0));
        assert_eq!(res.best.get("nu"), Some(0.1));
    }

    proptest! {
        #[test]
        fn csv_values_round_trip(values in prop::collection::vec(0.0f64..1e4, 1..50)) {
            let mut acc = 0.0;
            let cumulative: Vec<f64> = values.iter().map(|v| { acc += v; acc }).collect();
            let text = trace_csv(&trace("p", 0, cumulative.clone()));
            let parsed: Vec<f64> = text.lines().skip(1)
                .map(|l| l.split_once(',').unwrap().1.parse().unwrap()).collect();
            prop_assert_eq!(parsed, cumulative);
        }
    }
}
