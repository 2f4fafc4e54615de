//! Seeded Monte-Carlo experiments, CSV/JSON output and run comparison.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::algorithms::{run_algorithm, Trajectory};
use crate::config::{Algorithm, BStrategy, ExperimentConfig, VarianceSource};
use crate::error::{Error, Result};
use crate::rng::child_seed;
use crate::se::{run_se, SeTrajectory};

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "algorithm",
    "iter",
    "trial",
    "gs_mse",
    "raw_mse",
    "se_mse",
    "ortho_corr",
    "kurtosis",
    "seed",
];

/// One CSV line. `trial` is the trial index or `SE`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub experiment: String,
    pub algorithm: String,
    pub iter: usize,
    pub trial: String,
    pub gs_mse: f64,
    pub raw_mse: f64,
    pub se_mse: f64,
    pub ortho_corr: f64,
    pub kurtosis: f64,
    pub seed: u64,
}

/// Per-iteration statistics over all non-diverged trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub iter: usize,
    pub mean_gs_mse: f64,
    pub std_gs_mse: f64,
    pub mean_raw_mse: f64,
    pub se_mse: f64,
    pub mean_abs_ortho_corr: f64,
    pub mean_kurtosis: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub se: SeTrajectory,
    /// Trajectories of the trials that finished, in trial order.
    pub trajectories: Vec<(usize, Trajectory)>,
    pub trial_seeds: Vec<u64>,
    /// (trial, error message) for trials that diverged.
    pub diverged: Vec<(usize, String)>,
    pub aggregate: Vec<AggregateRow>,
    pub wall_clock_secs: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every trial of `cfg` on the current rayon pool, plus the state
/// evolution. Trial `i` uses `child_seed(cfg.seed, i)`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    run(cfg, cfg.algorithm != Algorithm::Se)
}

/// Only the state evolution of `cfg.algorithm`; the CSV holds SE rows only.
pub fn run_state_evolution(cfg: &ExperimentConfig) -> Result<RunResult> {
    run(cfg, false)
}

fn run(cfg: &ExperimentConfig, simulate: bool) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let se = run_se(cfg, cfg.iterations, 0.0)?;
    let trial_seeds: Vec<u64> = (0..cfg.trials).map(|i| child_seed(cfg.seed, i as u64)).collect();
    let mut trajectories = Vec::new();
    let mut diverged = Vec::new();
    if simulate {
        let results: Vec<Result<Trajectory>> = trial_seeds.par_iter().map(|&s| run_algorithm(cfg, s)).collect();
        for (i, r) in results.into_iter().enumerate() {
            match r {
                Ok(t) => trajectories.push((i, t)),
                Err(e @ Error::Divergence { .. }) => diverged.push((i, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        if trajectories.is_empty() {
            return Err(Error::ExperimentFailure(format!(
                "all {} trials diverged",
                cfg.trials
            )));
        }
    }
    let aggregate = (0..cfg.iterations)
        .map(|t| {
            let gs: Vec<f64> = trajectories.iter().map(|(_, tr)| tr.records[t].gs_mse).collect();
            let raw: Vec<f64> = trajectories.iter().map(|(_, tr)| tr.records[t].raw_mse).collect();
            let oc: Vec<f64> = trajectories.iter().map(|(_, tr)| tr.records[t].ortho_corr()).collect();
            let ku: Vec<f64> = trajectories.iter().map(|(_, tr)| tr.records[t].kurtosis).collect();
            let (mg, sg) = if gs.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&gs) };
            AggregateRow {
                iter: t + 1,
                mean_gs_mse: mg,
                std_gs_mse: sg,
                mean_raw_mse: mean_std(&raw).0,
                se_mse: se.mse_at(t),
                mean_abs_ortho_corr: mean_std(&oc).0,
                mean_kurtosis: mean_std(&ku).0,
            }
        })
        .collect();
    Ok(RunResult {
        config: cfg.clone(),
        se,
        trajectories,
        trial_seeds,
        diverged,
        aggregate,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

impl RunResult {
    /// SE rows first, then trials in index order.
    pub fn rows(&self) -> Vec<CsvRow> {
        let cfg = &self.config;
        let mut rows = Vec::new();
        for t in 0..cfg.iterations {
            let state = self.se.states.get(t).or(self.se.states.last());
            let raw = state.map(|s| (s.alpha_phi - 1.0).powi(2) + s.v_phi).unwrap_or(f64::NAN);
            let mse = self.se.mse_at(t);
            rows.push(CsvRow {
                experiment: cfg.experiment.clone(),
                algorithm: cfg.algorithm.name().to_string(),
                iter: t + 1,
                trial: "SE".into(),
                gs_mse: mse,
                raw_mse: raw,
                se_mse: mse,
                // the SE assumes exact orthogonality and Gaussian errors
                ortho_corr: 0.0,
                kurtosis: 0.0,
                seed: cfg.seed,
            });
        }
        for (i, tr) in &self.trajectories {
            for (t, r) in tr.records.iter().enumerate() {
                rows.push(CsvRow {
                    experiment: cfg.experiment.clone(),
                    algorithm: cfg.algorithm.name().to_string(),
                    iter: r.iter,
                    trial: i.to_string(),
                    gs_mse: r.gs_mse,
                    raw_mse: r.raw_mse,
                    se_mse: self.se.mse_at(t),
                    ortho_corr: r.ortho_corr(),
                    kurtosis: r.kurtosis,
                    seed: tr.seed,
                });
            }
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(CSV_HEADER)?;
        for row in self.rows() {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }

    /// Config echo, aggregates, seeds and divergence count.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "config_text": self.config.to_text(),
            "trials_run": self.trajectories.len(),
            "diverged": self.diverged.len(),
            "diverged_trials": self.diverged,
            "trial_seeds": self.trial_seeds,
            "se_converged": self.se.converged,
            "aggregate": self.aggregate,
            "wall_clock_secs": self.wall_clock_secs,
        })
    }

    /// Writes `<experiment>_<algorithm>.csv` and the `.json` sidecar; returns the CSV path.
    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let stem = format!("{}_{}", self.config.experiment, self.config.algorithm.name());
        let csv_path = dir.join(format!("{stem}.csv"));
        self.write_csv(std::fs::File::create(&csv_path)?)?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(csv_path)
    }
}

/// Rows read back from a harness CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub rows: Vec<CsvRow>,
}

impl RunTable {
    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != CSV_HEADER {
            return Err(Error::ShapeMismatch(format!("unexpected CSV header {header:?}")));
        }
        let rows = rd.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?;
        Ok(RunTable { rows })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn from_result(r: &RunResult) -> Self {
        RunTable { rows: r.rows() }
    }

    pub fn iterations(&self) -> usize {
        self.rows.iter().map(|r| r.iter).max().unwrap_or(0)
    }

    /// Simulated gs_mse per trial at 1-based `iter`; SE values when the
    /// table has no trials.
    pub fn samples(&self, iter: usize) -> Vec<f64> {
        let sim: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.iter == iter && r.trial != "SE")
            .map(|r| r.gs_mse)
            .collect();
        if !sim.is_empty() {
            return sim;
        }
        self.rows
            .iter()
            .filter(|r| r.iter == iter && r.trial == "SE")
            .map(|r| r.gs_mse)
            .collect()
    }

    pub fn se_mse(&self, iter: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.iter == iter && r.trial == "SE").map(|r| r.gs_mse)
    }
}

/// Welch's unequal-variance t-test. Returns (t, two-sided p).
pub fn welch_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (qa, qb) = (sa * sa / na, sb * sb / nb);
    let se2 = qa + qb;
    if a.len() < 2 || b.len() < 2 || se2 == 0.0 {
        return if ma == mb { (0.0, 1.0) } else { (f64::INFINITY.copysign(ma - mb), 0.0) };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let p = match StudentsT::new(0.0, 1.0, df) {
        Ok(d) => 2.0 * d.sf(t.abs()),
        Err(_) => f64::NAN,
    };
    (t, p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub iter: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// 10 log10(mean_a / mean_b): positive when `a` is worse.
    pub ratio_db: f64,
    pub se_ratio_db: Option<f64>,
    pub t: f64,
    pub p_value: f64,
    /// Welch test at the 5% level.
    pub significant: bool,
}

pub fn compare_runs(a: &RunTable, b: &RunTable) -> Result<Vec<ComparisonRow>> {
    let (ta, tb) = (a.iterations(), b.iterations());
    if ta != tb {
        return Err(Error::ShapeMismatch(format!("{ta} iterations vs {tb}")));
    }
    (1..=ta)
        .map(|it| {
            let (sa, sb) = (a.samples(it), b.samples(it));
            if sa.is_empty() || sb.is_empty() {
                return Err(Error::ShapeMismatch(format!("iteration {it} missing")));
            }
            let (ma, mb) = (mean_std(&sa).0, mean_std(&sb).0);
            let (t, p) = welch_test(&sa, &sb);
            let se_ratio_db = match (a.se_mse(it), b.se_mse(it)) {
                (Some(x), Some(y)) => Some(10.0 * (x / y).log10()),
                _ => None,
            };
            Ok(ComparisonRow {
                iter: it,
                mean_a: ma,
                mean_b: mb,
                ratio_db: 10.0 * (ma / mb).log10(),
                se_ratio_db,
                t,
                p_value: p,
                significant: p < 0.05,
            })
        })
        .collect()
}

pub fn write_comparison<W: Write>(rows: &[ComparisonRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.4e} (bound {:.4e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.bound
        )
    }
}

/// Orthogonality and Gaussianity statistics of OAMP over `seeds` trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoSummary {
    pub n: usize,
    pub seeds: usize,
    /// Worst over (t' <= t) of the seed-averaged |corr(f_in_t', f_out_t)|,
    /// for the non-linear and the linear step, per iteration.
    pub worst_cross: Vec<f64>,
    /// Seed-averaged |corr(x, f_out_t)| per iteration.
    pub signal: Vec<f64>,
    /// Seed-averaged excess kurtosis of the non-linear input error.
    pub kurtosis: Vec<f64>,
}

pub fn ortho_summary(cfg: &ExperimentConfig, seeds: usize, base_seed: u64) -> Result<OrthoSummary> {
    let runs: Vec<Trajectory> = (0..seeds)
        .into_par_iter()
        .map(|i| run_algorithm(cfg, child_seed(base_seed, i as u64)))
        .collect::<Result<_>>()?;
    let k = seeds as f64;
    let mut worst_cross = Vec::new();
    let mut signal = Vec::new();
    let mut kurtosis = Vec::new();
    for t in 0..cfg.iterations {
        let first = &runs[0].records[t];
        let mut worst = 0.0f64;
        for j in 0..first.nle_cross.len() {
            worst = worst.max(runs.iter().map(|r| r.records[t].nle_cross[j].abs()).sum::<f64>() / k);
        }
        for j in 0..first.le_cross.len() {
            worst = worst.max(runs.iter().map(|r| r.records[t].le_cross[j].abs()).sum::<f64>() / k);
        }
        worst_cross.push(worst);
        let sig = runs.iter().map(|r| r.records[t].signal_corr.abs()).sum::<f64>() / k;
        let le_sig = runs
            .iter()
            .map(|r| r.records[t].le_signal_corr.abs())
            .filter(|c| c.is_finite())
            .sum::<f64>()
            / k;
        signal.push(sig.max(le_sig));
        kurtosis.push(runs.iter().map(|r| r.records[t].kurtosis).sum::<f64>() / k);
    }
    Ok(OrthoSummary {
        n: cfg.n,
        seeds,
        worst_cross,
        signal,
        kurtosis,
    })
}

/// The orthogonality / Gaussianity property suite at size `n`.
pub fn selftest(n: usize, seeds: usize, iterations: usize) -> Result<Vec<Check>> {
    let bound = 5.0 / (n as f64).sqrt();
    let base = ExperimentConfig {
        experiment: "selftest".into(),
        n,
        iterations,
        b_strategy: BStrategy::Derivative,
        ..ExperimentConfig::default()
    };
    let oamp = ortho_summary(&base, seeds, 0x5e1f)?;
    let em = ortho_summary(
        &ExperimentConfig {
            b_strategy: BStrategy::Zero,
            variance_source: VarianceSource::Oracle,
            ..base.clone()
        },
        seeds,
        0x5e1f,
    )?;
    let max = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut checks = vec![
        Check {
            name: "OAMP error cross-correlation".into(),
            value: max(&oamp.worst_cross),
            bound,
            pass: max(&oamp.worst_cross) < bound,
        },
        Check {
            name: "OAMP signal correlation".into(),
            value: max(&oamp.signal),
            bound,
            pass: max(&oamp.signal) < bound,
        },
        Check {
            name: "OAMP input-error excess kurtosis".into(),
            value: max(&oamp.kurtosis),
            bound: 0.2,
            pass: max(&oamp.kurtosis) < 0.2,
        },
    ];
    let em_at = em.worst_cross.iter().take(5).fold(0.0f64, |m, a| m.max(*a));
    checks.push(Check {
        name: "un-orthogonalized iteration exceeds bound by iteration 5".into(),
        value: em_at,
        bound,
        pass: em_at > bound,
    });
    Ok(checks)
}
