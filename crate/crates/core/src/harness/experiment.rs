use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::diagnostics::{
    local_mle_strided, separation_from_run, SeparationSample, SeparationView,
};
use crate::error::{Error, Result, StageContext};
use crate::harness::config::{ExperimentConfig, PsoConfig, RunMode, TopologyConfig};
use crate::harness::task::{load_task, TaskData, TaskSplit};
use crate::harness::write;
use crate::metrics::{find_threshold, nrmse, Direction, MetricReport};
use crate::plasticity::ip_pretrain;
use crate::pso::{self, Assignment, PsoCheckpoint, PsoOutcome};
use crate::readout::{beta_sweep, harvest_states, predict, ReadoutWeights};
use crate::reservoir::{init_weights, HyperParameters, ReservoirWeights, TopologyGrid};
use crate::rng::derive_seed;

/// Everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub topology: TopologyGrid,
    pub hyper: HyperParameters,
    pub weights: ReservoirWeights,
    pub readout: ReadoutWeights,
    /// Binarization threshold for binary tasks.
    pub threshold: Option<f64>,
}

impl TrainedModel {
    /// Raw predictions for every scored row of `split`.
    pub fn predict(
        &self,
        split: &TaskSplit,
    ) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>)> {
        let (x, y) = harvest_states(
            &self.weights,
            &self.topology,
            self.hyper.leak,
            &split.sequences,
            split.washout,
        )
        .stage("harvest")?;
        Ok((y, predict(&x.x, &self.readout.w_out)?))
    }

    pub fn evaluate(&self, split: &TaskSplit) -> Result<MetricReport> {
        let (y, y_hat) = self.predict(split)?;
        match self.threshold {
            Some(theta) => MetricReport::binary(&y, &y_hat, theta),
            None => MetricReport::regression(&y, &y_hat),
        }
        .stage("evaluate")
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: TrainedModel,
    /// Validation NRMSE, or validation FL-ACC for binary tasks.
    pub validation_score: f64,
}

impl FitOutcome {
    /// Score in the minimization convention.
    pub fn objective(&self, binary: bool) -> f64 {
        if binary {
            -self.validation_score
        } else {
            self.validation_score
        }
    }
}

/// Builds, pre-trains and fits one network on the training split, choosing
/// beta (and the threshold for binary tasks) on the validation split.
pub fn fit_model(
    task: &TaskData,
    topology: &TopologyGrid,
    hp: &HyperParameters,
    seed: u64,
) -> Result<FitOutcome> {
    hp.validate()?;
    let weights = init_weights(topology, hp, task.n_inputs, seed).stage("init weights")?;
    let weights = ip_pretrain(
        &weights,
        &task.train.inputs(),
        topology,
        hp.leak,
        &hp.ip,
        task.train.washout,
    )
    .stage("ip pretrain")?;
    let (x_tr, y_tr) = harvest_states(
        &weights,
        topology,
        hp.leak,
        &task.train.sequences,
        task.train.washout,
    )
    .stage("harvest")?;
    let (x_va, y_va) = harvest_states(
        &weights,
        topology,
        hp.leak,
        &task.val.sequences,
        task.val.washout,
    )
    .stage("harvest")?;
    let choice = if task.is_binary() {
        beta_sweep(
            &x_tr.x,
            &y_tr,
            &x_va.x,
            &y_va,
            &hp.beta_candidates,
            Direction::Maximize,
            |y, p| find_threshold(p, y).map(|c| c.fl_acc),
        )
    } else {
        beta_sweep(
            &x_tr.x,
            &y_tr,
            &x_va.x,
            &y_va,
            &hp.beta_candidates,
            Direction::Minimize,
            nrmse,
        )
    }
    .stage("beta sweep")?;
    let threshold = if task.is_binary() {
        let pred = predict(&x_va.x, &choice.readout.w_out)?;
        Some(find_threshold(&pred, &y_va).stage("threshold")?.theta)
    } else {
        None
    };
    Ok(FitOutcome {
        model: TrainedModel {
            topology: topology.clone(),
            hyper: hp.clone(),
            weights,
            readout: choice.readout,
            threshold,
        },
        validation_score: choice.score,
    })
}

/// Mean and two-sided 95% Student-t half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

pub fn summarize(metric: &str, samples: &[f64]) -> Result<MetricSummary> {
    if samples.is_empty() {
        return Err(Error::Metric(format!("no samples for {metric}")));
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ci95 = if n < 2 {
        0.0
    } else {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::Metric(e.to_string()))?
            .inverse_cdf(0.975);
        t * (var / n as f64).sqrt()
    };
    Ok(MetricSummary {
        metric: metric.into(),
        mean,
        ci95,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub seed: u64,
    pub beta: f64,
    pub validation_score: f64,
    pub test: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoSummary {
    #[serde(with = "crate::serde_matrix::score")]
    pub best_score: f64,
    pub assignment: Assignment,
    #[serde(with = "crate::serde_matrix::scores")]
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub topology: TopologyConfig,
    /// Hyperparameters actually used, after any search.
    pub hyper: HyperParameters,
    pub repetitions: Vec<RepetitionRecord>,
    pub summary: Vec<MetricSummary>,
    pub lambda_max: Option<f64>,
    pub pso: Option<PsoSummary>,
    pub wall_clock_seconds: f64,
}

impl ResultRecord {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|s| s.metric == name)
    }
}

/// Applies named values from a search assignment. `breadth` and `depth`
/// rebuild the topology; other names address [`HyperParameters`] fields.
pub fn apply_assignment(
    hp: &HyperParameters,
    topology: TopologyConfig,
    assignment: &Assignment,
) -> Result<(HyperParameters, TopologyConfig)> {
    let mut hp = hp.clone();
    let mut topo = topology;
    for (name, &v) in assignment {
        match name.as_str() {
            "neurons" => hp.neurons = v.round().max(1.0) as usize,
            "breadth" => topo.breadth = v.round().max(1.0) as usize,
            "depth" => topo.depth = v.round().max(1.0) as usize,
            "spectral_radius" => hp.spectral_radius = v,
            "leak" => hp.leak = v,
            "input_norm" => hp.input_norm = v,
            "feedforward_norm" => hp.feedforward_norm = v,
            "input_sparsity" => hp.input_sparsity = v,
            "feedforward_sparsity" => hp.feedforward_sparsity = v,
            "recurrent_sparsity" => hp.recurrent_sparsity = v,
            "ip_eta" => hp.ip.eta = v,
            "ip_sigma" => hp.ip.sigma = v,
            other => {
                return Err(Error::SearchSpace(format!(
                    "unknown search dimension {other}"
                )))
            }
        }
    }
    Ok((hp, topo))
}

/// Hyperparameter search on validation scores only.
///
/// Every particle is evaluated with the same network seed. `on_iteration`
/// receives a resumable checkpoint after each iteration.
pub fn pso_search<C>(
    task: &TaskData,
    hp: &HyperParameters,
    topology: TopologyConfig,
    pso_cfg: &PsoConfig,
    seed: u64,
    resume_from: Option<PsoCheckpoint>,
    on_iteration: C,
) -> Result<(PsoOutcome, HyperParameters, TopologyConfig)>
where
    C: FnMut(&PsoCheckpoint) -> Result<()>,
{
    let space = pso_cfg.space();
    space.validate()?;
    let net_seed = derive_seed(seed, "pso/network");
    let binary = task.is_binary();
    let objective = |position: &[f64]| -> Result<f64> {
        let (hp, topo) = apply_assignment(hp, topology, &space.decode(position))?;
        let grid = TopologyGrid::grid(topo.breadth, topo.depth)?;
        Ok(fit_model(task, &grid, &hp, net_seed)?.objective(binary))
    };
    let checkpoint = match resume_from {
        Some(c) => c,
        None => PsoCheckpoint {
            swarm: pso::init_swarm(&space, pso_cfg.particles, pso_cfg.constants, seed)?,
            completed_iterations: 0,
            trace: Vec::new(),
        },
    };
    let outcome = pso::resume(objective, checkpoint, pso_cfg.iterations, on_iteration)?;
    if !outcome.best_score.is_finite() {
        return Err(Error::SearchSpace("every PSO candidate failed".into()));
    }
    let (best_hp, best_topo) =
        apply_assignment(hp, topology, &space.decode(&outcome.best_position))?;
    Ok((outcome, best_hp, best_topo))
}

/// Per-repetition result plus the optional diagnostics of one trained model.
struct Repetition {
    record: RepetitionRecord,
    model: TrainedModel,
    separation: Option<SeparationSample>,
}

fn run_repetition(
    cfg: &ExperimentConfig,
    task: &TaskData,
    grid: &TopologyGrid,
    hp: &HyperParameters,
    seed: u64,
    with_separation: bool,
) -> Result<Repetition> {
    let fit = fit_model(task, grid, hp, seed)?;
    let mut test = fit.model.evaluate(task.test())?;
    let val_inputs = task.val.inputs();
    if cfg.diagnostics.lyapunov {
        let est = local_mle_strided(
            grid,
            &fit.model.weights,
            hp.leak,
            &val_inputs,
            task.val.washout,
            cfg.diagnostics.lyapunov_stride,
        )
        .stage("lyapunov")?;
        test.lambda_max = Some(est.lambda_max);
    }
    let separation = if with_separation {
        Some(
            separation_from_run(
                grid,
                &fit.model.weights,
                hp.leak,
                &val_inputs,
                task.val.washout,
                SeparationView::Network,
                cfg.diagnostics.separation_pairs,
                derive_seed(seed, "separation"),
            )
            .stage("separation")?,
        )
    } else {
        None
    };
    Ok(Repetition {
        record: RepetitionRecord {
            seed,
            beta: fit.model.readout.beta,
            validation_score: fit.validation_score,
            test,
        },
        model: fit.model,
        separation,
    })
}

/// Trains and tests one configuration over several seeds in parallel.
/// Returns per-seed records in seed order, the summary and the model of the
/// first seed.
pub fn run_repetitions(
    cfg: &ExperimentConfig,
    task: &TaskData,
    topology: TopologyConfig,
    hp: &HyperParameters,
    seeds: &[u64],
) -> Result<(
    Vec<RepetitionRecord>,
    Vec<MetricSummary>,
    TrainedModel,
    Option<SeparationSample>,
)> {
    let grid = TopologyGrid::grid(topology.breadth, topology.depth)?;
    let reps: Vec<Repetition> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            run_repetition(
                cfg,
                task,
                &grid,
                hp,
                seed,
                i == 0 && cfg.diagnostics.separation,
            )
        })
        .collect::<Result<_>>()?;
    let records: Vec<RepetitionRecord> = reps.iter().map(|r| r.record.clone()).collect();
    let summary = summarize_records(&records)?;
    let first = reps
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no repetitions".into()))?;
    Ok((records, summary, first.model, first.separation))
}

fn summarize_records(records: &[RepetitionRecord]) -> Result<Vec<MetricSummary>> {
    type Getter = fn(&MetricReport) -> Option<f64>;
    let metrics: [(&str, Getter); 6] = [
        ("rmse", |r| Some(r.rmse)),
        ("nrmse", |r| r.nrmse),
        ("mape_percent", |r| r.mape_percent),
        ("mape_fraction", |r| r.mape_fraction),
        ("fl_acc", |r| r.fl_acc),
        ("lambda_max", |r| r.lambda_max),
    ];
    let mut out = Vec::new();
    for (name, get) in metrics {
        let vals: Option<Vec<f64>> = records.iter().map(|r| get(&r.test)).collect();
        if let Some(vals) = vals {
            out.push(summarize(name, &vals)?);
        }
    }
    let betas: Vec<f64> = records.iter().map(|r| r.beta).collect();
    out.push(summarize("beta", &betas)?);
    Ok(out)
}

/// Result of [`run_experiment`] kept in memory.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub record: ResultRecord,
    pub model: TrainedModel,
    pub separation: Option<SeparationSample>,
    /// Test-split reads performed during the hyperparameter search.
    pub test_reads_during_search: usize,
}

/// Full pipeline for a fixed-topology config: data, optional PSO on
/// validation scores, then training and testing over every seed.
///
/// With `output_dir`, search outputs are written as soon as they exist and
/// the record, model and plot data at the end.
pub fn run_experiment(cfg: &ExperimentConfig, output_dir: Option<&Path>) -> Result<ExperimentRun> {
    cfg.validate().stage("config")?;
    let RunMode::Fixed(topology) = cfg.mode() else {
        return Err(Error::Config(
            "run_experiment needs a [topology] section".into(),
        ));
    };
    let started = Instant::now();
    let task = load_task(cfg).stage("load data")?;
    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::io(dir, e))
            .stage("write outputs")?;
    }
    let before = task.test_accesses();
    let (hp, topology, pso) = match &cfg.pso {
        Some(pso_cfg) => {
            let (outcome, hp, topo) =
                pso_search(&task, &cfg.hyper, topology, pso_cfg, cfg.seed, None, |cp| {
                    match output_dir {
                        Some(dir) => write::json(&dir.join("pso_checkpoint.json"), cp),
                        None => Ok(()),
                    }
                })
                .stage("pso")?;
            let summary = PsoSummary {
                best_score: outcome.best_score,
                assignment: pso_cfg.space().decode(&outcome.best_position),
                trace: outcome.trace,
            };
            if let Some(dir) = output_dir {
                write::pso_outputs(dir, &summary).stage("write outputs")?;
            }
            (hp, topo, Some(summary))
        }
        None => (cfg.hyper.clone(), topology, None),
    };
    let test_reads_during_search = task.test_accesses() - before;
    if test_reads_during_search != 0 {
        return Err(Error::Stage {
            stage: "pso",
            inner: Box::new(Error::Config(
                "hyperparameter search read the test split".into(),
            )),
        });
    }
    let seeds = cfg.repetition_seeds();
    let (repetitions, summary, model, separation) =
        run_repetitions(cfg, &task, topology, &hp, &seeds)?;
    let lambda_max = summary
        .iter()
        .find(|s| s.metric == "lambda_max")
        .map(|s| s.mean);
    let record = ResultRecord {
        config: cfg.clone(),
        topology,
        hyper: hp,
        repetitions,
        summary,
        lambda_max,
        pso,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = output_dir {
        write::record_outputs(dir, &record).stage("write outputs")?;
        write::json(&dir.join("model.json"), &model).stage("write outputs")?;
        if let Some(s) = &separation {
            write::separation_csv(&dir.join("separation.csv"), s).stage("write outputs")?;
        }
    }
    Ok(ExperimentRun {
        record,
        model,
        separation,
        test_reads_during_search,
    })
}

/// PSO alone on a fixed-topology config, resumable from a checkpoint.
pub fn run_pso_search(
    cfg: &ExperimentConfig,
    output_dir: &Path,
    resume_from: Option<PsoCheckpoint>,
) -> Result<(PsoSummary, HyperParameters, TopologyConfig)> {
    let RunMode::Fixed(topology) = cfg.mode() else {
        return Err(Error::Config(
            "pso-search needs a [topology] section".into(),
        ));
    };
    let pso_cfg = cfg.pso.clone().unwrap_or_default();
    let task = load_task(cfg).stage("load data")?;
    std::fs::create_dir_all(output_dir)
        .map_err(|e| Error::io(output_dir, e))
        .stage("write outputs")?;
    let checkpoint_path = output_dir.join("pso_checkpoint.json");
    let (outcome, hp, topo) = pso_search(
        &task,
        &cfg.hyper,
        topology,
        &pso_cfg,
        cfg.seed,
        resume_from,
        |cp| {
            log::info!(
                "iteration {}/{}: best {}",
                cp.completed_iterations,
                pso_cfg.iterations,
                cp.swarm.global_best_score
            );
            write::json(&checkpoint_path, cp)
        },
    )
    .stage("pso")?;
    debug_assert_eq!(task.test_accesses(), 0);
    let summary = PsoSummary {
        best_score: outcome.best_score,
        assignment: pso_cfg.space().decode(&outcome.best_position),
        trace: outcome.trace,
    };
    write::pso_outputs(output_dir, &summary).stage("write outputs")?;
    Ok((summary, hp, topo))
}
