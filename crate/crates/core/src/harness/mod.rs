//! Seeded, parallel experiment sweeps driven by [`ExperimentConfig`].
//!
//! Seeds are derived hierarchically: master → grid point / graph repeat →
//! trial → {sampling, channel noise}. The trial seed does not depend on the
//! method, so adding a method to a config leaves the samples of every other
//! method unchanged.

mod config;
mod output;

pub use config::{
    validate_config, ChannelConfig, ExperimentConfig, ExperimentKind, GainsConfig, GridPoint,
    LambdaPolicy, MethodFactors, ModelConfig,
};
pub use output::{ExperimentOutput, SummaryRow, TrialRow, SCHEMA_VERSION};

use std::time::Instant;

use rayon::prelude::*;

use crate::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::estimators::{self, Provenance};
use crate::model::{self, GgmModel};
use crate::pipeline::Pipeline;
use crate::seeds::{self, stream};
use crate::solver::{self, SolverConfig};

/// Resolve a channel config for dimension `d`; `draw_seed` seeds an
/// unseeded Rayleigh draw.
pub fn build_channel(ch: &ChannelConfig, d: usize, draw_seed: u64) -> Result<ChannelSpec> {
    ch.build(d, None, draw_seed)
}

/// A drawn model with its channel for one (grid point, repeat).
struct Cell {
    point: usize,
    repeat: usize,
    pt: GridPoint,
    model: GgmModel,
    channel: Option<ChannelSpec>,
    trial_root: u64,
}

/// Whether the model differs between grid points.
fn model_varies_with_point(kind: ExperimentKind) -> bool {
    kind == ExperimentKind::DimSweep
}

fn graph_seed(cfg: &ExperimentConfig, point: usize, repeat: usize) -> u64 {
    match cfg.kind {
        // One fixed model; repeats redraw only the channel.
        ExperimentKind::SnrSweep => seeds::derive_indexed(cfg.master_seed, stream::GRAPH, 0),
        k if model_varies_with_point(k) => seeds::derive_indexed(
            seeds::derive_indexed(cfg.master_seed, stream::POINT, point as u64),
            stream::GRAPH,
            repeat as u64,
        ),
        _ => seeds::derive_indexed(cfg.master_seed, stream::GRAPH, repeat as u64),
    }
}

fn draw_model(cfg: &ExperimentConfig, d: usize, seed: u64) -> Result<GgmModel> {
    let mc = cfg.model.with_dim(d);
    match (&mc, mc.random_spec()) {
        (_, Some(spec)) => model::generate_random_model(&spec, seed),
        (ModelConfig::Star { d, rho }, None) => model::generate_star_model(*d, *rho),
        _ => unreachable!("random configs always yield a spec"),
    }
}

fn build_cell(cfg: &ExperimentConfig, point: usize, repeat: usize, pt: GridPoint) -> Result<Cell> {
    let gseed = graph_seed(cfg, point, repeat);
    let model = draw_model(cfg, pt.d, gseed)?;
    let channel = cfg.channel_at(&pt, cfg.channel_seed(repeat))?;
    let trial_root = seeds::derive_indexed(
        seeds::derive_indexed(cfg.master_seed, stream::POINT, point as u64),
        stream::TRIAL,
        repeat as u64,
    );
    Ok(Cell {
        point,
        repeat,
        pt,
        model,
        channel,
        trial_root,
    })
}

/// Regularization weight for each configured method at one cell.
fn lambdas(cfg: &ExperimentConfig, cell: &Cell) -> Result<Vec<(Provenance, f64)>> {
    let n = cell.pt.n;
    let per_method = |f: &dyn Fn(Provenance) -> Result<f64>| -> Result<Vec<(Provenance, f64)>> {
        cfg.methods.iter().map(|&m| Ok((m, f(m)?))).collect()
    };
    match &cfg.lambda {
        LambdaPolicy::Heuristic {
            base,
            factors,
            n_ref,
        } => {
            let scale = n_ref.map_or(1.0, |r| (r as f64 / n as f64).sqrt());
            let factors = factors.resolve();
            per_method(&|m| Ok(base * factors.get(m) * scale))
        }
        LambdaPolicy::Theoretical { epsilon } => {
            let d = cell.model.dim() as f64;
            let eps = epsilon.unwrap_or(0.5 / (d * d));
            let alpha = model::compute_constants(&cell.model)?.alpha;
            per_method(&|m| match m {
                Provenance::Uncoded => {
                    let spec = cell
                        .channel
                        .as_ref()
                        .ok_or_else(|| Error::Config("uncoded needs a channel".into()))?;
                    let c =
                        estimators::uncoded_tail_constant(&crate::channel::build_real_block(spec)?);
                    Ok(solver::channel_aware_lambda(alpha, n, eps, c))
                }
                _ => Ok(solver::theoretical_lambda(alpha, n, eps)),
            })
        }
        LambdaPolicy::Grid {
            values,
            factors,
            each_method,
        } => {
            let seed = seeds::derive(cell.trial_root, stream::CALIBRATION);
            let solver = &cfg.solver;
            if *each_method {
                per_method(&|m| {
                    let mut p = Pipeline::new(m, cell.channel.as_ref(), solver.clone())?;
                    if cfg.lambda.whitens_uncoded() {
                        p = p.with_noise_whitening();
                    }
                    calibrate(&p, &cell.model, n, values, seed)
                })
            } else {
                let factors = factors.resolve();
                let best = calibrate(
                    &Pipeline::original(solver.clone()),
                    &cell.model,
                    n,
                    values,
                    seed,
                )?;
                per_method(&|m| Ok(best * factors.get(m)))
            }
        }
    }
}

/// The grid value maximizing `TPR − FPR` for `pipeline` on one held-out
/// trial. Ties go to the earliest grid value.
pub fn calibrate(
    pipeline: &Pipeline,
    model: &GgmModel,
    n: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    let samples = model.sample(n, seeds::derive(seed, stream::SAMPLING))?;
    let noise = seeds::derive(seed, stream::NOISE);
    let scores: Vec<f64> = grid
        .par_iter()
        .map(
            |&lam| match pipeline.with_lambda(lam).run_on(model, &samples, noise) {
                Ok(out) => out.report.tpr - out.report.fpr,
                // λ too small for an indefinite estimate: never the best choice.
                Err(_) => f64::NEG_INFINITY,
            },
        )
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    grid.get(best)
        .copied()
        .ok_or_else(|| Error::Config("empty λ grid".into()))
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<Vec<TrialRow>> {
    let started = Instant::now();
    let mut pipelines = Vec::new();
    for (m, lam) in lambdas(cfg, cell)? {
        let solver = SolverConfig {
            lambda: lam,
            ..cfg.solver.clone()
        };
        let mut p = Pipeline::new(m, cell.channel.as_ref(), solver)?;
        if cfg.lambda.whitens_uncoded() {
            p = p.with_noise_whitening();
        }
        pipelines.push(p);
    }
    let snr = cell.channel.as_ref().map_or(f64::NAN, ChannelSpec::snr);
    let rows: Vec<TrialRow> = (0..cfg.trials)
        .into_par_iter()
        .flat_map_iter(|t| {
            let trial_seed = seeds::derive_indexed(cell.trial_root, stream::TRIAL, t as u64);
            let samples = cell
                .model
                .sample(cell.pt.n, seeds::derive(trial_seed, stream::SAMPLING));
            let noise_seed = seeds::derive(trial_seed, stream::NOISE);
            pipelines
                .iter()
                .map(|p| {
                    let mut row = TrialRow {
                        method: p.method(),
                        d: cell.pt.d,
                        n: cell.pt.n,
                        snr,
                        seed: trial_seed,
                        tpr: f64::NAN,
                        fpr: f64::NAN,
                        exact: false,
                        sign_consistent: false,
                        lambda: p.solver().lambda,
                        sweeps: 0,
                        converged: false,
                        clamps: 0,
                        point: cell.point,
                        repeat: cell.repeat,
                        trial: t,
                    };
                    let outcome = match &samples {
                        Ok(s) => p.run_on(&cell.model, s, noise_seed),
                        Err(e) => Err(Error::invalid(format!("sampling failed: {e}"))),
                    };
                    match outcome {
                        Ok(o) => {
                            row.tpr = o.report.tpr;
                            row.fpr = o.report.fpr;
                            row.exact = o.report.exact_recovery;
                            row.sign_consistent = o.report.sign_consistent;
                            row.sweeps = o.result.sweeps_used;
                            row.converged = o.result.converged;
                            row.clamps = o.estimate.diag_clamps();
                        }
                        Err(e) => log::warn!("trial {t} ({}) failed: {e}", p.method()),
                    }
                    row
                })
                .collect::<Vec<_>>()
        })
        .collect();
    log::info!(
        "point {} repeat {} (d = {}, n = {}) done in {:.2?}",
        cell.point,
        cell.repeat,
        cell.pt.d,
        cell.pt.n,
        started.elapsed()
    );
    Ok(rows)
}

/// Run every (grid point × graph repeat × trial × method) and aggregate.
/// Rows come out sorted by (point, repeat, trial, method), independent of
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations.join("; ")));
    }
    let points = cfg.points()?;
    let jobs: Vec<(usize, usize, GridPoint)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, pt)| (0..cfg.graph_repeats).map(move |r| (p, r, *pt)))
        .collect();
    let per_cell: Vec<Vec<TrialRow>> = jobs
        .par_iter()
        .map(|&(p, r, pt)| run_cell(cfg, &build_cell(cfg, p, r, pt)?))
        .collect::<Result<_>>()?;
    let mut rows: Vec<TrialRow> = per_cell.into_iter().flatten().collect();
    rows.sort_by_key(TrialRow::sort_key);
    let summary = output::summarize(&rows);
    Ok(ExperimentOutput {
        config_hash: output::config_hash(&cfg.to_toml_string()),
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
kind = "sample_sweep"
master_seed = 3
methods = ["original", "uncoded"]
trials = 3
graph_repeats = 2
grid = [200, 400]

[model]
type = "random"
d = 6
edge_prob = 0.3
max_degree = 3

[channel]
gains = "identity"
snr = 3.0
"#,
        )
        .unwrap()
    }

    #[test]
    fn row_count_and_order() {
        let out = run_experiment(&small()).unwrap();
        assert_eq!(out.rows.len(), 2 * 2 * 3 * 2);
        let keys: Vec<_> = out.rows.iter().map(TrialRow::sort_key).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(out.summary.len(), 4);
        assert!(out
            .csv_string()
            .starts_with("# ggm-mac results schema=1 config_sha256="));
    }

    #[test]
    fn adding_a_method_keeps_existing_rows() {
        let base = run_experiment(&small()).unwrap();
        let mut cfg = small();
        cfg.methods.push(Provenance::Signs);
        let more = run_experiment(&cfg).unwrap();
        let pick = |o: &ExperimentOutput| -> Vec<TrialRow> {
            o.rows
                .iter()
                .filter(|r| r.method != Provenance::Signs)
                .cloned()
                .collect()
        };
        assert_eq!(pick(&base), pick(&more));
    }

    #[test]
    fn invalid_config_aborts() {
        let mut cfg = small();
        cfg.trials = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    }
}
