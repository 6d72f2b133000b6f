//! Batched experiments. Every run draws its own training, validation and
//! optional held-out points, fits through the `λ` schedule and records the
//! selected fit's errors.
//!
//! Seeds: run `i` uses `run_seed(seed, i)`. From it, ChaCha8 streams 0, 1 and 2
//! draw the training, validation and held-out points and stream 3 draws the
//! perturbation for `init_near_truth`. Solver stage `t` is seeded with
//! `run_seed ^ t`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_f_matrix, build_jacobian_tensor, DecoupledModel};
use crate::par::Execution;
use crate::solver::{SolverConfig, SolverState, StopReason};
use crate::tensor::Mat;
use crate::tuner::{predict, tune_from, TunerConfig, Validation};

use super::metrics::{error_metrics, rrmse, Summary};
use super::systems::{builtin_system, generate_system, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSpec {
    Builtin(String),
    Generated(SyntheticSpec),
    /// Model JSON file.
    File(PathBuf),
}

impl TargetSpec {
    pub fn load(&self) -> Result<DecoupledModel> {
        match self {
            TargetSpec::Builtin(name) => builtin_system(name),
            TargetSpec::Generated(spec) => generate_system(spec),
            TargetSpec::File(path) => DecoupledModel::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

/// TOML-deserializable experiment description. `solver.ranks` and
/// `solver.degrees` default to the target model's; `solver.seed` and
/// `solver.lambda` are overridden per run and stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    #[serde(default = "defaults::samples")]
    pub validation_samples: usize,
    #[serde(default)]
    pub holdout_samples: usize,
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Concurrent runs; 0 uses every core.
    #[serde(default)]
    pub jobs: usize,
    /// Start every stage from the true model with entries perturbed by this
    /// relative amount instead of a random initialization. Needs a target
    /// whose ranks and degrees match the solver's.
    #[serde(default)]
    pub init_near_truth: Option<f64>,
    #[serde(default = "defaults::solver")]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tuner: TunerConfig,
    /// Directory for `results.csv` and `aggregates.json`.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

mod defaults {
    use crate::solver::SolverConfig;

    pub fn samples() -> usize {
        30
    }
    pub fn runs() -> usize {
        1
    }
    pub fn solver() -> SolverConfig {
        SolverConfig::new(Vec::new(), Vec::new())
    }
}

impl ExperimentConfig {
    pub fn new(target: TargetSpec) -> Self {
        ExperimentConfig {
            target,
            samples: defaults::samples(),
            validation_samples: defaults::samples(),
            holdout_samples: 0,
            runs: defaults::runs(),
            seed: 0,
            jobs: 0,
            init_near_truth: None,
            solver: defaults::solver(),
            tuner: TunerConfig::default(),
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Solver configuration with ranks and degrees filled in from `model`.
    pub fn resolved_solver(&self, model: &DecoupledModel) -> SolverConfig {
        let mut s = self.solver.clone();
        if s.ranks.is_empty() {
            s.ranks = model.ranks();
        }
        if s.degrees.is_empty() {
            s.degrees = model.degrees();
        }
        s
    }

    fn validate(&self, model: &DecoupledModel) -> Result<SolverConfig> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.runs == 0 || self.samples == 0 {
            return bad("runs and samples must be at least 1");
        }
        if self.validation_samples < 2 {
            return bad("validation_samples must be at least 2");
        }
        if self.holdout_samples == 1 {
            return bad("holdout_samples must be 0 or at least 2");
        }
        if let Some(d) = self.init_near_truth {
            if !(d >= 0.0 && d.is_finite()) {
                return bad("init_near_truth must be finite and nonnegative");
            }
        }
        self.tuner.validate()?;
        let solver = self.resolved_solver(model);
        solver.validate()?;
        if self.init_near_truth.is_some()
            && (solver.ranks != model.ranks() || solver.degrees != model.degrees())
        {
            return bad("init_near_truth needs solver ranks and degrees equal to the target's");
        }
        Ok(solver)
    }
}

/// SplitMix64 finalizer applied to `base + (run_id + 1)·φ`.
pub fn run_seed(base: u64, run_id: usize) -> u64 {
    let mut z = base.wrapping_add(
        (run_id as u64)
            .wrapping_add(1)
            .wrapping_mul(0x9E37_79B9_7F4A_7C15),
    );
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `count` points uniform on `[-1, 1]^dim`.
pub fn sample_points<R: Rng>(rng: &mut R, dim: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// Copy of `model` with every weight and coefficient `v` replaced by
/// `v·(1 + rel·u)`, `u` uniform on `[-1, 1]`.
pub fn perturb_model<R: Rng>(model: &DecoupledModel, rel: f64, rng: &mut R) -> DecoupledModel {
    let mut jiggle = |v: f64| v * (1.0 + rel * rng.random_range(-1.0..=1.0));
    let weights = model
        .weights()
        .iter()
        .map(|w| Mat::from_fn(w.rows(), w.cols(), |i, j| jiggle(w[(i, j)])))
        .collect();
    let coeffs = model
        .coeffs()
        .iter()
        .map(|l| {
            l.iter()
                .map(|c| c.iter().map(|&v| jiggle(v)).collect())
                .collect()
        })
        .collect();
    DecoupledModel::new(weights, coeffs).expect("same shapes as the input model")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub stage_selected: usize,
    pub lambda_selected: f64,
    pub stages_run: usize,
    pub iters: usize,
    pub stop_reason: StopReason,
    /// Relative squared errors of the selected fit on the training data.
    pub err_j: f64,
    pub err_f: f64,
    /// Per-output RRMSE (percent) on the validation set; their sum is the
    /// tuner's metric.
    pub e: Vec<f64>,
    /// Per-output RRMSE on the held-out set, empty when none is configured.
    pub holdout_e: Vec<f64>,
    pub model: DecoupledModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunOutcome, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub outputs: usize,
    pub holdout: bool,
    pub rows: Vec<RunRecord>,
    /// Mean, median and sample std of every metric over successful runs.
    pub aggregates: BTreeMap<String, Summary>,
}

impl ResultTable {
    pub fn new(outputs: usize, holdout: bool, rows: Vec<RunRecord>) -> Self {
        let aggregates = Self::aggregate(outputs, holdout, &rows);
        ResultTable {
            outputs,
            holdout,
            rows,
            aggregates,
        }
    }

    /// Metric names in column order.
    pub fn metric_names(outputs: usize, holdout: bool) -> Vec<String> {
        let mut names = vec!["err_J".to_string(), "err_F".to_string()];
        names.extend((1..=outputs).map(|i| format!("e_{i}")));
        if holdout {
            names.extend((1..=outputs).map(|i| format!("holdout_e_{i}")));
        }
        names
    }

    fn metric_values(o: &RunOutcome) -> Vec<f64> {
        let mut v = vec![o.err_j, o.err_f];
        v.extend(&o.e);
        v.extend(&o.holdout_e);
        v
    }

    pub fn aggregate(
        outputs: usize,
        holdout: bool,
        rows: &[RunRecord],
    ) -> BTreeMap<String, Summary> {
        let ok: Vec<&RunOutcome> = rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect();
        let values: Vec<Vec<f64>> = ok.iter().map(|o| Self::metric_values(o)).collect();
        Self::metric_names(outputs, holdout)
            .into_iter()
            .enumerate()
            .filter_map(|(c, name)| {
                let col: Vec<f64> = values.iter().map(|v| v[c]).collect();
                Summary::of(&col).map(|s| (name, s))
            })
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Values of one metric over the successful runs, in run order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = Self::metric_names(self.outputs, self.holdout)
            .iter()
            .position(|n| n == name)?;
        Some(
            self.rows
                .iter()
                .filter_map(|r| r.outcome.as_ref().ok())
                .map(|o| Self::metric_values(o)[c])
                .collect(),
        )
    }

    pub fn median(&self, name: &str) -> Option<f64> {
        self.aggregates.get(name).map(|s| s.median)
    }

    pub fn to_csv(&self) -> String {
        let names = Self::metric_names(self.outputs, self.holdout);
        let mut out = String::from("run_id,seed,lambda_selected,iters,stop_reason,");
        out.push_str(&names.join(","));
        out.push_str(",error\n");
        for r in &self.rows {
            write!(out, "{},{},", r.run_id, r.seed).unwrap();
            match &r.outcome {
                Ok(o) => {
                    write!(out, "{},{},{}", o.lambda_selected, o.iters, o.stop_reason).unwrap();
                    for v in Self::metric_values(o) {
                        write!(out, ",{v}").unwrap();
                    }
                    out.push_str(",\n");
                }
                Err(e) => {
                    out.push_str(&",".repeat(names.len() + 2));
                    writeln!(out, ",\"{}\"", e.replace('"', "'")).unwrap();
                }
            }
        }
        out
    }

    pub fn aggregates_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Aggregates<'a> {
            runs: usize,
            failed: usize,
            metrics: &'a BTreeMap<String, Summary>,
        }
        Ok(serde_json::to_string_pretty(&Aggregates {
            runs: self.rows.len(),
            failed: self.failed(),
            metrics: &self.aggregates,
        })?)
    }

    /// Writes `results.csv` and `aggregates.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.to_csv())?;
        std::fs::write(dir.join("aggregates.json"), self.aggregates_json()?)?;
        Ok(())
    }
}

fn run_once(
    cfg: &ExperimentConfig,
    solver: &SolverConfig,
    model: &DecoupledModel,
    seed: u64,
) -> Result<RunOutcome> {
    let m = model.input_dim();
    let train = sample_points(&mut stream(seed, 0), m, cfg.samples);
    let val = sample_points(&mut stream(seed, 1), m, cfg.validation_samples);
    let holdout = sample_points(&mut stream(seed, 2), m, cfg.holdout_samples);
    let j = build_jacobian_tensor(model, &train)?;
    let f = build_f_matrix(model, &train)?;
    let targets = build_f_matrix(model, &val)?;
    let start = match cfg.init_near_truth {
        Some(rel) => Some(SolverState::from_model(
            &perturb_model(model, rel, &mut stream(seed, 3)),
            &train,
        )?),
        None => None,
    };
    let solver = SolverConfig {
        seed,
        ..solver.clone()
    };
    let validation = Validation {
        points: &val,
        targets: &targets,
    };
    let report = tune_from(
        &cfg.tuner,
        &solver,
        &j,
        &f,
        &train,
        validation,
        start.as_ref(),
    )?;
    let stage = report.selected_stage();
    let fit = &stage.result.fit;
    let fitted = fit.state.model()?;
    let (err_j, err_f) = error_metrics(
        &j,
        &crate::model::pt_reconstruct(&fit.state.factors)?,
        &f,
        &fit.state.factors.weights[fit.state.n_layers()].matmul(&fit.state.r.transpose()),
    )?;
    let e = rrmse(&targets, &predict(&fitted, &val)?)?;
    let holdout_e = if holdout.is_empty() {
        Vec::new()
    } else {
        rrmse(
            &build_f_matrix(model, &holdout)?,
            &predict(&fitted, &holdout)?,
        )?
    };
    Ok(RunOutcome {
        stage_selected: report.selected,
        lambda_selected: stage.lambda,
        stages_run: report.stages.len(),
        iters: fit.iterations,
        stop_reason: fit.stop_reason,
        err_j,
        err_f,
        e,
        holdout_e,
        model: fitted,
    })
}

/// Runs every repetition of `cfg` (concurrently up to `cfg.jobs`) and returns
/// the rows in run order. Writes the result files when `cfg.out` is set. A
/// run that fails is recorded with its error.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let model = cfg.target.load()?;
    let solver = cfg.validate(&model)?;
    let one = |run_id: usize| {
        let seed = run_seed(cfg.seed, run_id);
        RunRecord {
            run_id,
            seed,
            outcome: run_once(cfg, &solver, &model, seed).map_err(|e| e.to_string()),
        }
    };
    let rows = run_pool(cfg.jobs, || Execution::Parallel.map(cfg.runs, one))?;
    let table = ResultTable::new(model.output_dim(), cfg.holdout_samples > 0, rows);
    if let Some(dir) = &cfg.out {
        table.write(dir)?;
    }
    Ok(table)
}

#[cfg(feature = "parallel")]
fn run_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn run_pool<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(TargetSpec::Builtin("f1".into()));
        cfg.runs = runs;
        cfg.seed = 11;
        cfg.solver.max_iters = 15;
        cfg.tuner.max_stages = 2;
        cfg
    }

    #[test]
    fn run_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..100).map(|i| run_seed(5, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(run_seed(5, 3), seeds[3]);
        assert_ne!(run_seed(6, 3), seeds[3]);
    }

    #[test]
    fn streams_are_independent() {
        let a = sample_points(&mut stream(1, 0), 2, 5);
        let b = sample_points(&mut stream(1, 1), 2, 5);
        assert_ne!(a, b);
        assert_eq!(a, sample_points(&mut stream(1, 0), 2, 5));
        assert!(a.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let text = r#"
            runs = 3
            seed = 4
            [target]
            builtin = "f2"
            [solver]
            strategy = "proj"
            max_iters = 100
            [tuner]
            beta = 10.0
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.target, TargetSpec::Builtin("f2".into()));
        assert_eq!(
            (cfg.samples, cfg.validation_samples, cfg.holdout_samples),
            (30, 30, 0)
        );
        assert_eq!((cfg.solver.min_iters, cfg.solver.patience), (10, 50));
        assert_eq!(cfg.tuner.lambda0, 1e-6);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);

        let gen = "[target.generated]\ninputs = 2\noutputs = 2\nranks = [2, 2]\ndegrees = [3, 2]\n";
        let cfg = ExperimentConfig::from_toml(gen).unwrap();
        assert!(matches!(cfg.target, TargetSpec::Generated(ref s) if s.c_max == 0.5));
        assert!(matches!(
            ExperimentConfig::from_toml("runs = 2\n"),
            Err(Error::InvalidConfig(_))
        ));
        assert!(ExperimentConfig::from_toml("bogus = 1\n[target]\nbuiltin = \"f1\"\n").is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small(1);
        cfg.runs = 0;
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small(1);
        cfg.validation_samples = 1;
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small(1);
        cfg.init_near_truth = Some(1e-3);
        cfg.solver.ranks = vec![3, 2];
        assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
        let cfg = ExperimentConfig::new(TargetSpec::Builtin("f9".into()));
        assert!(matches!(run_experiment(&cfg), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn reruns_are_byte_identical_and_ordered() {
        let mut cfg = small(4);
        cfg.holdout_samples = 10;
        cfg.jobs = 3;
        let a = run_experiment(&cfg).unwrap();
        cfg.jobs = 1;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.aggregates_json().unwrap(), b.aggregates_json().unwrap());
        assert_eq!(
            a.rows.iter().map(|r| r.run_id).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
        let header = a.to_csv().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "run_id,seed,lambda_selected,iters,stop_reason,err_J,err_F,e_1,e_2,holdout_e_1,holdout_e_2,error"
        );
    }

    #[test]
    fn aggregates_match_rows() {
        let t = run_experiment(&small(3)).unwrap();
        for name in ResultTable::metric_names(2, false) {
            let col = t.column(&name).unwrap();
            assert_eq!(t.aggregates[&name], Summary::of(&col).unwrap());
        }
    }

    #[test]
    fn failed_runs_are_recorded() {
        let ok = RunOutcome {
            stage_selected: 0,
            lambda_selected: 1e-6,
            stages_run: 2,
            iters: 5,
            stop_reason: StopReason::MaxIters,
            err_j: 0.5,
            err_f: 0.25,
            e: vec![1.0],
            holdout_e: vec![],
            model: builtin_system("f1").unwrap(),
        };
        let rows = vec![
            RunRecord {
                run_id: 0,
                seed: 1,
                outcome: Ok(ok),
            },
            RunRecord {
                run_id: 1,
                seed: 2,
                outcome: Err("stage 0 failed: \"x\"".into()),
            },
        ];
        let t = ResultTable::new(1, false, rows);
        assert_eq!(t.failed(), 1);
        assert_eq!(t.aggregates["err_J"].count, 1);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "0,1,0.000001,5,max_iters,0.5,0.25,1,");
        assert_eq!(lines[2], "1,2,,,,,,,\"stage 0 failed: 'x'\"");
        assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
        assert_eq!(lines[2].split(',').count(), lines[0].split(',').count());
    }

    #[test]
    fn writes_result_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(2);
        cfg.out = Some(dir.path().join("res"));
        let t = run_experiment(&cfg).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
        assert_eq!(csv, t.to_csv());
        let agg: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("res/aggregates.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(agg["runs"], 2);
        assert!(agg["metrics"]["err_J"]["median"].is_number());
    }
}
