//! Round-count benchmark of the coloring protocol on Erdős–Rényi graphs.

use std::io::Write;

use blinkswarm_core::coloring::{run_to_completion, ColoringError, LossModel, NodeStreams};
use blinkswarm_core::derive_seed;
use blinkswarm_core::graph::erdos_renyi;
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchParams {
    pub n_min: usize,
    pub n_max: usize,
    pub n_step: usize,
    pub c: f64,
    pub iterations: u32,
    pub p_fail: f64,
    pub seed: u64,
    pub max_rounds: u32,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            n_min: 100,
            n_max: 2000,
            n_step: 100,
            c: 3.0,
            iterations: 5,
            p_fail: 0.0,
            seed: 1,
            max_rounds: 10_000,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_min < 1 || self.n_step < 1 || self.iterations < 1 || self.n_max < self.n_min {
            return Err(CliError::Config(
                "need n_min >= 1, n_step >= 1, iterations >= 1 and n_max >= n_min".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(CliError::Config("max_rounds must be >= 1".into()));
        }
        LossModel::new(self.p_fail).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        (self.n_min..=self.n_max).step_by(self.n_step).collect()
    }

    /// Graph seed of iteration `i`. The same seeds are used for every `n`
    /// and every loss rate, so lossy and lossless runs see the same graphs.
    pub fn graph_seed(&self, i: u32) -> u64 {
        self.seed.wrapping_add(u64::from(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub n: usize,
    pub seed: u64,
    /// `None` when the run hit `max_rounds`.
    pub rounds: Option<u32>,
    pub palette_resets: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub runs: usize,
    pub converged: usize,
    pub mean_rounds: f64,
    pub std_rounds: f64,
    pub min_rounds: u32,
    pub max_rounds: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub params: BenchParams,
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
}

impl BenchResult {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.rounds.is_some())
    }

    pub fn mean_rounds(&self, n: usize) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.n == n)
            .map(|s| s.mean_rounds)
    }
}

pub fn run_color_bench(params: &BenchParams) -> Result<BenchResult, CliError> {
    params.validate()?;
    let loss = LossModel::new(params.p_fail).expect("validated");
    let jobs: Vec<(usize, u32)> = params
        .sizes()
        .into_iter()
        .flat_map(|n| (0..params.iterations).map(move |i| (n, i)))
        .collect();
    let runs: Vec<RunRow> = jobs
        .par_iter()
        .map(|&(n, i)| {
            let seed = params.graph_seed(i);
            let c = params.c.min((n - 1) as f64);
            let g = erdos_renyi(n, c, seed).map_err(|e| CliError::Config(e.to_string()))?;
            let mut streams = NodeStreams::new(derive_seed(seed, n as u64), n);
            Ok(
                match run_to_completion(&g, &mut streams, &loss, params.max_rounds) {
                    Ok(done) => RunRow {
                        n,
                        seed,
                        rounds: Some(done.stats.rounds_to_completion),
                        palette_resets: done.stats.palette_resets,
                    },
                    Err(ColoringError::NonConvergence { stats, .. }) => RunRow {
                        n,
                        seed,
                        rounds: None,
                        palette_resets: stats.palette_resets,
                    },
                    Err(other) => return Err(CliError::Other(other.to_string())),
                },
            )
        })
        .collect::<Result<_, CliError>>()?;

    let summary = params
        .sizes()
        .into_iter()
        .map(|n| {
            let rounds: Vec<u32> = runs
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.rounds)
                .collect();
            let k = rounds.len() as f64;
            let mean = rounds.iter().map(|&r| f64::from(r)).sum::<f64>() / k;
            let var = rounds
                .iter()
                .map(|&r| (f64::from(r) - mean).powi(2))
                .sum::<f64>()
                / (k - 1.0).max(1.0);
            SummaryRow {
                n,
                runs: params.iterations as usize,
                converged: rounds.len(),
                mean_rounds: if rounds.is_empty() { f64::NAN } else { mean },
                std_rounds: if rounds.is_empty() {
                    f64::NAN
                } else {
                    var.sqrt()
                },
                min_rounds: rounds.iter().copied().min().unwrap_or(0),
                max_rounds: rounds.iter().copied().max().unwrap_or(0),
            }
        })
        .collect();
    Ok(BenchResult {
        params: params.clone(),
        runs,
        summary,
    })
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6}")
    }
}

/// `n,c,seed,p_fail,rounds,palette_resets`; `rounds` is `NA` for runs that
/// did not converge.
pub fn write_runs_csv<W: Write>(result: &BenchResult, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "c", "seed", "p_fail", "rounds", "palette_resets"])?;
    let p = &result.params;
    for r in &result.runs {
        w.write_record([
            r.n.to_string(),
            fmt(p.c),
            r.seed.to_string(),
            fmt(p.p_fail),
            r.rounds.map_or_else(|| "NA".into(), |x| x.to_string()),
            r.palette_resets.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per `n` with ln n reference columns.
pub fn write_summary_csv<W: Write>(result: &BenchResult, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "c",
        "p_fail",
        "runs",
        "converged",
        "mean_rounds",
        "std_rounds",
        "min_rounds",
        "max_rounds",
        "ln_n",
        "two_ln_n",
        "three_ln_n",
    ])?;
    let p = &result.params;
    for s in &result.summary {
        let ln = (s.n as f64).ln();
        w.write_record([
            s.n.to_string(),
            fmt(p.c),
            fmt(p.p_fail),
            s.runs.to_string(),
            s.converged.to_string(),
            fmt(s.mean_rounds),
            fmt(s.std_rounds),
            s.min_rounds.to_string(),
            s.max_rounds.to_string(),
            fmt(ln),
            fmt(2.0 * ln),
            fmt(3.0 * ln),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
