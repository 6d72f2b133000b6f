//! Adaptive coupling weight: fits at `λ₀, λ₀β, λ₀β², …` while the validation
//! metric does not get worse, and keeps the last non-worsening fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::metrics::rrmse;
use crate::model::DecoupledModel;
use crate::solver::{fit, fit_from, FitReport, SolverConfig, SolverState};
use crate::tensor::{Mat, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerConfig {
    #[serde(default = "defaults::lambda0")]
    pub lambda0: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    /// Upper bound on the number of stages. The last stage is selected if
    /// the metric never worsens.
    #[serde(default = "defaults::max_stages")]
    pub max_stages: usize,
    /// Start each stage from the previous stage's result instead of a fresh
    /// random initialization.
    #[serde(default)]
    pub warm_start: bool,
}

mod defaults {
    pub fn lambda0() -> f64 {
        1e-6
    }
    pub fn beta() -> f64 {
        100.0
    }
    pub fn max_stages() -> usize {
        8
    }
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            lambda0: defaults::lambda0(),
            beta: defaults::beta(),
            max_stages: defaults::max_stages(),
            warm_start: false,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda0 must be positive, got {}",
                self.lambda0
            )));
        }
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "beta must exceed 1, got {}",
                self.beta
            )));
        }
        if self.max_stages == 0 {
            return Err(Error::InvalidConfig("max_stages must be at least 1".into()));
        }
        Ok(())
    }

    /// `λ` used at `stage`.
    pub fn lambda(&self, stage: usize) -> f64 {
        self.lambda0 * self.beta.powi(stage as i32)
    }
}

/// Points and target outputs (`n × V`, one column per point) used to score
/// each stage.
#[derive(Debug, Clone, Copy)]
pub struct Validation<'a> {
    pub points: &'a [Vec<f64>],
    pub targets: &'a Mat,
}

/// Sum of the per-output RRMSE percentages of `model` on the validation set.
pub fn validation_metric(model: &DecoupledModel, validation: Validation) -> Result<f64> {
    let pred = predict(model, validation.points)?;
    Ok(rrmse(validation.targets, &pred)?.iter().sum())
}

/// Model outputs at `points` as an `n × V` matrix.
pub fn predict(model: &DecoupledModel, points: &[Vec<f64>]) -> Result<Mat> {
    let mut out = Mat::zeros(model.output_dim(), points.len());
    for (s, x) in points.iter().enumerate() {
        out.set_col(s, &model.eval(x)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage<T> {
    pub stage: usize,
    pub lambda: f64,
    pub metric: f64,
    pub result: T,
}

/// Runs `step(stage, λ, previous)` over the geometric schedule while each
/// metric is `≤` the previous one (the first is compared against `+∞`).
/// Returns every stage run and the index of the selected one. A NaN metric
/// counts as worsening; a NaN at stage 0 is an error.
pub fn run_schedule<T>(
    cfg: &TunerConfig,
    mut step: impl FnMut(usize, f64, Option<&T>) -> Result<(T, f64)>,
) -> Result<(Vec<Stage<T>>, usize)> {
    cfg.validate()?;
    let mut stages: Vec<Stage<T>> = Vec::new();
    let mut prev = f64::INFINITY;
    for stage in 0..cfg.max_stages {
        let lambda = cfg.lambda(stage);
        let (result, metric) =
            step(stage, lambda, stages.last().map(|s| &s.result)).map_err(|e| Error::Stage {
                stage,
                lambda,
                source: Box::new(e),
            })?;
        stages.push(Stage {
            stage,
            lambda,
            metric,
            result,
        });
        // NaN compares false, so it counts as worsening.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(metric <= prev) {
            if stage == 0 {
                return Err(Error::Stage {
                    stage,
                    lambda,
                    source: Box::new(Error::NonFinite("validation metric")),
                });
            }
            return Ok((stages, stage - 1));
        }
        prev = metric;
    }
    let last = stages.len() - 1;
    Ok((stages, last))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFit {
    /// Solver seed used by this stage.
    pub seed: u64,
    pub fit: FitReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunerReport {
    pub config: TunerConfig,
    pub stages: Vec<Stage<StageFit>>,
    pub selected: usize,
}

impl TunerReport {
    pub fn selected_stage(&self) -> &Stage<StageFit> {
        &self.stages[self.selected]
    }

    pub fn selected_fit(&self) -> &FitReport {
        &self.selected_stage().result.fit
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fits `(J, F)` over the `λ` schedule. Stage `t` uses solver seed
/// `solver.seed ^ t`, or with `warm_start` the previous stage's state.
pub fn tune(
    tcfg: &TunerConfig,
    solver: &SolverConfig,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
    validation: Validation,
) -> Result<TunerReport> {
    tune_from(tcfg, solver, j, f, points, validation, None)
}

/// Like [`tune`], but stages that would start from a random initialization
/// start from `start` when it is given.
pub fn tune_from(
    tcfg: &TunerConfig,
    solver: &SolverConfig,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
    validation: Validation,
    start: Option<&SolverState>,
) -> Result<TunerReport> {
    if validation.points.is_empty() {
        return Err(Error::InvalidConfig("validation set is empty".into()));
    }
    let (stages, selected) = run_schedule(tcfg, |stage, lambda, prev: Option<&StageFit>| {
        let cfg = SolverConfig {
            lambda,
            seed: solver.seed ^ stage as u64,
            ..solver.clone()
        };
        let report = match (tcfg.warm_start, prev, start) {
            (true, Some(p), _) => fit_from(&cfg, j, f, points, p.fit.state.clone())?,
            (_, _, Some(s)) => fit_from(&cfg, j, f, points, s.clone())?,
            _ => fit(&cfg, j, f, points)?,
        };
        let metric = validation_metric(&report.state.model()?, validation)?;
        Ok((
            StageFit {
                seed: cfg.seed,
                fit: report,
            },
            metric,
        ))
    })?;
    Ok(TunerReport {
        config: tcfg.clone(),
        stages,
        selected,
    })
}
