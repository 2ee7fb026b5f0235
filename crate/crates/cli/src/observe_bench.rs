//! Observer accuracy sweeps and recognition-latency runs over molecule grid
//! scenes.

use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use blinkswarm_core::chem::ChemTable;
use blinkswarm_core::derive_seed;
use blinkswarm_core::observer::{
    observe, rounds_until_recognized, CameraConfig, ObserverConfig, ObserverError,
};
use blinkswarm_core::scenes::molecule_grid;
use blinkswarm_core::sim::ArenaConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DistanceSweep,
    CountSweep,
    AngleSweep,
    RoundsVsN,
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "distance-sweep" => Ok(Scenario::DistanceSweep),
            "count-sweep" => Ok(Scenario::CountSweep),
            "angle-sweep" => Ok(Scenario::AngleSweep),
            "rounds-vs-n" => Ok(Scenario::RoundsVsN),
            other => Err(CliError::Config(format!(
                "unknown scenario {other:?}; expected distance-sweep, count-sweep, angle-sweep or rounds-vs-n"
            ))),
        }
    }
}

/// Pooled accuracy at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    /// Droplet counts pooled into this row.
    pub n_droplets: Vec<usize>,
    pub distance_m: f64,
    pub angle_deg: f64,
    pub trials: u32,
    pub correct: usize,
    pub total: usize,
    /// Mean over droplet counts of the fraction of droplets detected with
    /// the right element.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundsRow {
    pub n_droplets: usize,
    pub trial: u32,
    pub rounds: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObserveResult {
    Accuracy(Vec<AccuracyRow>),
    Rounds(Vec<RoundsRow>),
}

pub fn camera(distance: f64, angle: f64) -> ObserverConfig {
    ObserverConfig {
        camera: CameraConfig {
            distance,
            angle,
            ..CameraConfig::default()
        },
        ..ObserverConfig::default()
    }
}

/// Correct detections and droplet total over `trials` single frames. Trial
/// `t` uses the same channel seed at every grid point.
pub fn accuracy_at(
    n: usize,
    cfg: &ObserverConfig,
    trials: u32,
    seed: u64,
    table: &Arc<ChemTable>,
) -> (usize, usize) {
    let arena =
        molecule_grid(n, ArenaConfig::default(), table.clone()).expect("grid scenes are valid");
    let snap = arena.snapshot();
    let mut correct = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::from(t)));
        let frame = observe(&snap, cfg, table, &mut rng);
        correct += frame
            .detections
            .iter()
            .filter(|d| {
                snap.droplet(d.id)
                    .is_some_and(|truth| truth.symbol == d.symbol)
            })
            .count();
    }
    (correct, n * trials as usize)
}

fn pooled(
    ns: &[usize],
    distance: f64,
    angle: f64,
    trials: u32,
    seed: u64,
    table: &Arc<ChemTable>,
) -> AccuracyRow {
    let cfg = camera(distance, angle);
    let parts: Vec<(usize, usize)> = ns
        .iter()
        .map(|&n| accuracy_at(n, &cfg, trials, seed, table))
        .collect();
    let accuracy =
        parts.iter().map(|&(c, t)| c as f64 / t as f64).sum::<f64>() / parts.len() as f64;
    AccuracyRow {
        n_droplets: ns.to_vec(),
        distance_m: distance,
        angle_deg: angle,
        trials,
        correct: parts.iter().map(|p| p.0).sum(),
        total: parts.iter().map(|p| p.1).sum(),
        accuracy,
    }
}

pub const SWEEP_DROPLETS: usize = 5;
pub const SWEEP_DISTANCE: f64 = 0.3;
pub const ANGLE_DROPLETS: [usize; 3] = [5, 8, 11];

pub fn run_observe_bench(
    scenario: Scenario,
    trials: u32,
    seed: u64,
) -> Result<ObserveResult, CliError> {
    if trials == 0 {
        return Err(CliError::Config("trials must be >= 1".into()));
    }
    let table = Arc::new(ChemTable::builtin());
    Ok(match scenario {
        Scenario::DistanceSweep => ObserveResult::Accuracy(
            (1..=10)
                .map(|i| {
                    pooled(
                        &[SWEEP_DROPLETS],
                        f64::from(i) / 10.0,
                        0.0,
                        trials,
                        seed,
                        &table,
                    )
                })
                .collect(),
        ),
        Scenario::CountSweep => ObserveResult::Accuracy(
            (1..=21)
                .map(|n| pooled(&[n], SWEEP_DISTANCE, 0.0, trials, seed, &table))
                .collect(),
        ),
        Scenario::AngleSweep => ObserveResult::Accuracy(
            (0..=6)
                .map(|i| {
                    pooled(
                        &ANGLE_DROPLETS,
                        SWEEP_DISTANCE,
                        f64::from(i) * 15.0,
                        trials,
                        seed,
                        &table,
                    )
                })
                .collect(),
        ),
        Scenario::RoundsVsN => {
            let jobs: Vec<(usize, u32)> = (2..=20)
                .flat_map(|n| (0..trials).map(move |t| (n, t)))
                .collect();
            let rows = jobs
                .par_iter()
                .map(|&(n, trial)| {
                    let cfg = ArenaConfig {
                        seed: derive_seed(seed, n as u64),
                        ..ArenaConfig::default()
                    };
                    let mut arena =
                        molecule_grid(n, cfg, table.clone()).expect("grid scenes are valid");
                    let channel_seed =
                        derive_seed(derive_seed(seed, n as u64), u64::from(trial) + 1);
                    let rounds = match rounds_until_recognized(
                        &mut arena,
                        &ObserverConfig::default(),
                        channel_seed,
                        20,
                    ) {
                        Ok(r) => Some(r),
                        Err(ObserverError::NonRecognition { .. }) => None,
                        Err(e) => return Err(CliError::Other(e.to_string())),
                    };
                    Ok(RoundsRow {
                        n_droplets: n,
                        trial,
                        rounds,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            ObserveResult::Rounds(rows)
        }
    })
}

/// Accuracy schema: `n_droplets,distance_m,angle_deg,trials,correct,total,accuracy`
/// where pooled droplet counts are joined with `+`. Rounds schema:
/// `n_droplets,trial,rounds` with `NA` when the cap was reached.
pub fn write_observe_csv<W: Write>(result: &ObserveResult, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    match result {
        ObserveResult::Accuracy(rows) => {
            w.write_record([
                "n_droplets",
                "distance_m",
                "angle_deg",
                "trials",
                "correct",
                "total",
                "accuracy",
            ])?;
            for r in rows {
                let ns: Vec<String> = r.n_droplets.iter().map(usize::to_string).collect();
                w.write_record([
                    ns.join("+"),
                    format!("{:.6}", r.distance_m),
                    format!("{:.6}", r.angle_deg),
                    r.trials.to_string(),
                    r.correct.to_string(),
                    r.total.to_string(),
                    format!("{:.6}", r.accuracy),
                ])?;
            }
        }
        ObserveResult::Rounds(rows) => {
            w.write_record(["n_droplets", "trial", "rounds"])?;
            for r in rows {
                w.write_record([
                    r.n_droplets.to_string(),
                    r.trial.to_string(),
                    r.rounds.map_or_else(|| "NA".into(), |x| x.to_string()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accuracies(result: ObserveResult) -> Vec<f64> {
        match result {
            ObserveResult::Accuracy(rows) => rows.iter().map(|r| r.accuracy).collect(),
            ObserveResult::Rounds(_) => panic!("expected accuracy rows"),
        }
    }

    #[test]
    fn distance_sweep_shape() {
        let acc = accuracies(run_observe_bench(Scenario::DistanceSweep, 20, 3).unwrap());
        assert_eq!(acc.len(), 10);
        assert!(acc.windows(2).all(|w| w[1] <= w[0]));
        assert!(acc[..5].iter().all(|&a| a >= 0.8));
    }

    #[test]
    fn count_sweep_ends_at_zero() {
        let acc = accuracies(run_observe_bench(Scenario::CountSweep, 10, 3).unwrap());
        assert_eq!(acc.len(), 21);
        assert_eq!(acc[20], 0.0);
    }

    #[test]
    fn angle_sweep_shape() {
        let acc = accuracies(run_observe_bench(Scenario::AngleSweep, 20, 3).unwrap());
        assert_eq!(acc.len(), 7);
        assert!((acc[0] - acc[5]).abs() <= 0.15);
        assert!(acc[6] < acc[5] - 0.3);
    }

    #[test]
    fn unknown_scenario() {
        assert!("spiral".parse::<Scenario>().is_err());
        assert_eq!(
            "rounds-vs-n".parse::<Scenario>().unwrap(),
            Scenario::RoundsVsN
        );
    }
}
