//! Alternating minimization of
//! `‖J − PT(W, G)‖² + λ‖F − W_L Rᵀ‖²` subject to `G^(ℓ)_{:,j} = X_ℓ^j c_ℓ^j`
//! and `R_{:,j} = Y_L^j c_L^j`.
//!
//! One sweep updates `W_0`, then `(c_ℓ, W_ℓ)` for `ℓ = 1..L-1`, then
//! `(c_L, G^(L), R)` and finally `W_L`. The coefficient step is either a
//! projection (`Proj`: free least-squares update of `G`/`R`, then fit `c`) or a
//! direct solve in coefficient space (`Constr`).

mod matrices;
mod updates;

pub use matrices::{above, below, build_mc, build_mg, build_mw, free_coefficients};
pub use updates::{update_c, update_c_constr, update_c_proj, update_w};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{build_x, build_y, BasisSpec};
use crate::error::{Error, Result};
use crate::model::{pt_reconstruct, DecoupledModel, PTFactors};
use crate::par::Execution;
use crate::tensor::{Mat, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Proj,
    Constr,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proj" => Ok(Strategy::Proj),
            "constr" => Ok(Strategy::Constr),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub ranks: Vec<usize>,
    #[serde(default)]
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "defaults::min_iters")]
    pub min_iters: usize,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::strategy")]
    pub strategy: Strategy,
    #[serde(default = "defaults::init_low")]
    pub init_low: f64,
    #[serde(default = "defaults::init_high")]
    pub init_high: f64,
    /// Per-slice assembly of the design matrices. Sequential by default:
    /// the harness already runs independent fits in parallel.
    #[serde(default = "defaults::execution")]
    pub execution: Execution,
}

mod defaults {
    use super::*;

    pub fn min_iters() -> usize {
        10
    }
    pub fn max_iters() -> usize {
        500
    }
    pub fn patience() -> usize {
        50
    }
    pub fn strategy() -> Strategy {
        Strategy::Constr
    }
    pub fn init_low() -> f64 {
        0.1
    }
    pub fn init_high() -> f64 {
        10.0
    }
    pub fn execution() -> Execution {
        Execution::Sequential
    }
}

impl SolverConfig {
    /// Defaults: 10 to 500 iterations, patience 50, init range `[0.1, 10]`,
    /// `λ = 0`, CONSTR, seed 0.
    pub fn new(ranks: Vec<usize>, degrees: Vec<usize>) -> Self {
        SolverConfig {
            ranks,
            degrees,
            lambda: 0.0,
            min_iters: defaults::min_iters(),
            max_iters: defaults::max_iters(),
            patience: defaults::patience(),
            seed: 0,
            strategy: defaults::strategy(),
            init_low: defaults::init_low(),
            init_high: defaults::init_high(),
            execution: defaults::execution(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.ranks.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.ranks.is_empty() || self.ranks.len() != self.degrees.len() {
            return bad(format!(
                "{} ranks and {} degrees; need one of each per layer",
                self.ranks.len(),
                self.degrees.len()
            ));
        }
        if self.ranks.contains(&0) || self.degrees.contains(&0) {
            return bad("ranks and degrees must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            ));
        }
        if self.min_iters == 0 || self.min_iters > self.max_iters {
            return bad(format!(
                "need 0 < min_iters <= max_iters, got {} and {}",
                self.min_iters, self.max_iters
            ));
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.init_low < self.init_high
            && self.init_low.is_finite()
            && self.init_high.is_finite())
        {
            return bad(format!(
                "bad init range [{}, {}]",
                self.init_low, self.init_high
            ));
        }
        Ok(())
    }

    pub(crate) fn basis(&self, layer: usize) -> BasisSpec {
        BasisSpec::monomial(self.degrees[layer - 1]).expect("validated degree")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub j_term: f64,
    pub f_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub factors: PTFactors,
    /// `coeffs[ℓ-1][j]`, constant first.
    pub coeffs: Vec<Vec<Vec<f64>>>,
    /// `S × r_L`; `F ≈ W_L Rᵀ`.
    pub r: Mat,
    pub trace: Vec<TraceEntry>,
}

impl SolverState {
    pub fn n_layers(&self) -> usize {
        self.factors.n_layers()
    }

    /// Decoupled model with the current weights and coefficients.
    pub fn model(&self) -> Result<DecoupledModel> {
        DecoupledModel::new(self.factors.weights.clone(), self.coeffs.clone())
    }

    /// State that satisfies every constraint for `model` at `points`.
    pub fn from_model(model: &DecoupledModel, points: &[Vec<f64>]) -> Result<Self> {
        let u = layer_inputs(model, points)?;
        let l = model.n_layers();
        let g = (1..=l)
            .map(|layer| {
                Ok(build_x(&u[layer - 1], &model.basis(layer))?.apply(model.layer_coeffs(layer)))
            })
            .collect::<Result<Vec<_>>>()?;
        let r = build_y(&u[l - 1], &model.basis(l))?.apply(model.layer_coeffs(l));
        Ok(SolverState {
            factors: PTFactors {
                weights: model.weights().to_vec(),
                g,
            },
            coeffs: model.coeffs().to_vec(),
            r,
            trace: Vec::new(),
        })
    }

    /// Constant terms of layers `1..L-1`, which the fit never changes.
    pub fn frozen_constants(&self) -> Vec<Vec<f64>> {
        self.coeffs[..self.n_layers() - 1]
            .iter()
            .map(|layer| layer.iter().map(|c| c[0]).collect())
            .collect()
    }

    fn check_against(&self, cfg: &SolverConfig, dims: (usize, usize, usize)) -> Result<()> {
        self.factors.validate()?;
        let (n, m, k) = dims;
        let ok = self.factors.ranks() == cfg.ranks
            && self.factors.tensor_dims() == (n, m, k)
            && self.r.shape() == (k, cfg.ranks[cfg.n_layers() - 1])
            && self.coeffs.len() == cfg.n_layers()
            && self
                .coeffs
                .iter()
                .zip(cfg.ranks.iter().zip(&cfg.degrees))
                .all(|(layer, (&r, &d))| {
                    layer.len() == r && layer.iter().all(|c| c.len() == d + 1)
                });
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(
                "solver state does not match the configuration and data".into(),
            ))
        }
    }
}

/// Layer inputs `u_ℓ` at every point, as `S × r_ℓ` matrices.
pub fn layer_inputs(model: &DecoupledModel, points: &[Vec<f64>]) -> Result<Vec<Mat>> {
    let mut out: Vec<Mat> = model
        .ranks()
        .iter()
        .map(|&r| Mat::zeros(points.len(), r))
        .collect();
    for (s, x) in points.iter().enumerate() {
        for (layer, u) in model.internal_inputs(x)?.into_iter().enumerate() {
            out[layer].set_row(s, &u);
        }
    }
    Ok(out)
}

/// Random state with every entry uniform on `[init_low, init_high]`. Draw
/// order: `W_0..W_L`, `G^(1..L)`, `R`, then coefficients layer by layer.
pub fn init_state(cfg: &SolverConfig, dims: (usize, usize, usize)) -> Result<SolverState> {
    cfg.validate()?;
    let (n, m, k) = dims;
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::DimensionMismatch(format!(
            "empty data dimensions {dims:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let range = cfg.init_low..=cfg.init_high;
    let mut mat = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.random_range(range.clone()));
    let l = cfg.n_layers();
    let mut weights = vec![mat(cfg.ranks[0], m)];
    for layer in 1..l {
        weights.push(mat(cfg.ranks[layer], cfg.ranks[layer - 1]));
    }
    weights.push(mat(n, cfg.ranks[l - 1]));
    let g = cfg.ranks.iter().map(|&r| mat(k, r)).collect();
    let r = mat(k, cfg.ranks[l - 1]);
    let coeffs = cfg
        .ranks
        .iter()
        .zip(&cfg.degrees)
        .map(|(&r, &d)| (0..r).map(|_| mat(d + 1, 1).into_vec()).collect())
        .collect();
    Ok(SolverState {
        factors: PTFactors { weights, g },
        coeffs,
        r,
        trace: Vec::new(),
    })
}

/// Objective terms of the current state: `(‖J − Ĵ‖², ‖F − W_L Rᵀ‖²)`.
pub fn objective_terms(state: &SolverState, j: &Tensor3, f: &Mat) -> Result<(f64, f64)> {
    let jt = j.sub(&pt_reconstruct(&state.factors)?)?.fro_norm_sq();
    let w_l = &state.factors.weights[state.n_layers()];
    let ft = f.sub(&w_l.matmul(&state.r.transpose())).fro_norm_sq();
    Ok((jt, ft))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxIters,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxIters => "max_iters",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub config: SolverConfig,
    /// Lowest-objective state seen. Its `trace` covers the whole run.
    pub state: SolverState,
    pub err_j: f64,
    pub err_f: f64,
    pub iterations: usize,
    /// Sweep at which the returned state was reached.
    pub best_iteration: usize,
    pub stop_reason: StopReason,
    /// Singular values dropped as numerically zero across all subproblems.
    pub truncated_singular_values: usize,
    pub frozen_constants: Vec<Vec<f64>>,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_data(j: &Tensor3, f: &Mat, points: &[Vec<f64>]) -> Result<()> {
    let (n, m, k) = j.dims();
    if f.shape() != (n, k) || points.len() != k || points.iter().any(|p| p.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "J is {:?}, F is {:?}, {} points",
            j.dims(),
            f.shape(),
            points.len()
        )));
    }
    if !j.is_finite() || !f.is_finite() {
        return Err(Error::NonFinite("input data"));
    }
    Ok(())
}

/// Runs the alternating algorithm from a seeded random initialization.
pub fn fit(cfg: &SolverConfig, j: &Tensor3, f: &Mat, points: &[Vec<f64>]) -> Result<FitReport> {
    check_data(j, f, points)?;
    let state = init_state(cfg, j.dims())?;
    fit_from(cfg, j, f, points, state)
}

/// One full sweep in the fixed update order. Returns the truncation count.
pub fn sweep(
    cfg: &SolverConfig,
    state: &mut SolverState,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
) -> Result<usize> {
    let l = state.n_layers();
    let mut truncated = update_w(cfg, state, 0, j, f)?;
    for layer in 1..l {
        truncated += update_c(cfg, state, layer, j, f, points)?;
        truncated += update_w(cfg, state, layer, j, f)?;
    }
    truncated += update_c(cfg, state, l, j, f, points)?;
    truncated += update_w(cfg, state, l, j, f)?;
    Ok(truncated)
}

/// Runs the alternating algorithm from `state`.
///
/// Stops once `patience` consecutive sweeps fail to improve the best objective
/// by more than `1e-12` relative (checked only after `min_iters`), or after
/// `max_iters` sweeps. Returns the best state seen.
pub fn fit_from(
    cfg: &SolverConfig,
    j: &Tensor3,
    f: &Mat,
    points: &[Vec<f64>],
    mut state: SolverState,
) -> Result<FitReport> {
    cfg.validate()?;
    check_data(j, f, points)?;
    state.check_against(cfg, j.dims())?;
    state.trace.clear();

    let mut best: Option<(SolverState, usize)> = None;
    let mut best_total = f64::INFINITY;
    let mut stale = 0;
    let mut truncated = 0;
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        let step = sweep(cfg, &mut state, j, f, points)
            .and_then(|t| objective_terms(&state, j, f).map(|o| (t, o)));
        let (t, (jt, ft)) = match step {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                return Err(Error::Divergence {
                    iteration: it,
                    trace: state.trace,
                })
            }
            Err(e) => return Err(e),
        };
        truncated += t;
        let total = jt + cfg.lambda * ft;
        state.trace.push(TraceEntry {
            iteration: it,
            j_term: jt,
            f_term: ft,
            total,
        });
        if !total.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                trace: state.trace,
            });
        }
        if total < best_total {
            if best_total - total > 1e-12 * best_total.abs() || !best_total.is_finite() {
                stale = 0;
            } else {
                stale += 1;
            }
            best_total = total;
            best = Some((state.clone(), it));
        } else {
            stale += 1;
        }
        if it >= cfg.min_iters && stale >= cfg.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    let (mut best_state, best_iteration) = best.expect("max_iters >= 1");
    best_state.trace = state.trace;
    let (jt, ft) = objective_terms(&best_state, j, f)?;
    let (jn, fn_) = (j.fro_norm_sq(), f.fro_norm_sq());
    Ok(FitReport {
        config: cfg.clone(),
        err_j: if jn > 0.0 { jt / jn } else { jt },
        err_f: if fn_ > 0.0 { ft / fn_ } else { ft },
        iterations,
        best_iteration,
        stop_reason,
        truncated_singular_values: truncated,
        frozen_constants: best_state.frozen_constants(),
        state: best_state,
    })
}
