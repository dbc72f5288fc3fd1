//! Structure–texture decomposition `f = u + v` with an L¹ first-order and an
//! L₀ higher-order penalty on the structure `u`.
//!
//! Every model runs the same multi-block ADMM loop ([`AdmmSolver`]) per
//! channel. The loop stops once the relative change
//! `‖uᵏ⁺¹ − uᵏ‖² / ‖uᵏ⁺¹‖²` drops to `eps` while every relative primal
//! residual is at most [`FEASIBILITY_TOL`], or after `max_iters` sweeps.
//! A small change alone is not enough: the dual drift can leave `u` nearly
//! still for an iteration while the splits are far from consistent.

mod admm;
mod config;
mod objective;

pub use admm::{
    AdmmSolver, AdmmState, ConvergenceTrace, IterationRecord, TextureFieldState, FEASIBILITY_TOL, NORM_FLOOR,
};
pub use config::{DecomposeConfig, GpExponent, TextureModel, Weight};
pub use objective::objective;

use crate::error::{Error, Result};
use crate::grid::{ChannelImage, ScalarField};
use crate::par::{map_indexed, Execution};

/// Output of [`decompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    pub structure: ChannelImage,
    /// `f − u`; may leave `[0, 1]`.
    pub texture: ChannelImage,
    /// One trace per channel.
    pub traces: Vec<ConvergenceTrace>,
    /// Largest per-channel iteration count.
    pub iterations: usize,
    /// True when every channel met the stop tolerance.
    pub converged: bool,
}

/// Result of one channel's run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRun {
    pub state: AdmmState,
    pub trace: ConvergenceTrace,
    pub converged: bool,
}

/// Runs the ADMM loop on one channel.
pub fn decompose_channel(f: &ScalarField, cfg: &DecomposeConfig) -> Result<ChannelRun> {
    cfg.validate()?;
    let mut solver = AdmmSolver::new(f, cfg)?;
    let mut state = solver.initial_state()?;
    let mut trace = ConvergenceTrace::default();

    if f.is_constant() {
        // u = f with all splits at zero is feasible and attains zero objective
        state.u = f.clone();
        trace.records.push(IterationRecord {
            iter: 1,
            q_r: 0.0,
            e_u: f.norm_sq(),
            r_fidelity: 0.0,
            r_grad: 0.0,
            r_hess: 0.0,
        });
        return Ok(ChannelRun {
            state,
            trace,
            converged: true,
        });
    }

    let mut converged = false;
    for iter in 1..=cfg.max_iters {
        let record = solver.step(&mut state, iter)?;
        trace.records.push(record);
        if record.q_r <= cfg.eps && record.is_feasible() {
            converged = true;
            break;
        }
    }
    Ok(ChannelRun {
        state,
        trace,
        converged,
    })
}

/// Decomposes every channel of `f` independently.
pub fn decompose(f: &ChannelImage, cfg: &DecomposeConfig) -> Result<DecompositionResult> {
    decompose_with(f, cfg, Execution::default())
}

/// [`decompose`] with explicit channel scheduling.
pub fn decompose_with(
    f: &ChannelImage,
    cfg: &DecomposeConfig,
    exec: Execution,
) -> Result<DecompositionResult> {
    cfg.validate()?;
    let planes = f.planes();
    let runs = map_indexed(exec, planes.len(), |c| decompose_channel(&planes[c], cfg));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut structure = Vec::with_capacity(runs.len());
    let mut texture = Vec::with_capacity(runs.len());
    for (plane, run) in planes.iter().zip(&runs) {
        let (u, v) = split_exact(plane, &run.state.u);
        structure.push(u);
        texture.push(v);
    }
    Ok(DecompositionResult {
        structure: ChannelImage::from_planes(structure)?,
        texture: ChannelImage::from_planes(texture)?,
        iterations: runs.iter().map(|r| r.trace.len()).max().unwrap_or(0),
        converged: runs.iter().all(|r| r.converged),
        traces: runs.into_iter().map(|r| r.trace).collect(),
    })
}

/// [`decompose`] restricted to the `G_p` texture model.
pub fn decompose_gp(f: &ChannelImage, cfg: &DecomposeConfig) -> Result<DecompositionResult> {
    if cfg.model != TextureModel::Gp {
        return Err(Error::Parameter(format!(
            "decompose_gp needs model gp, got {}",
            cfg.model
        )));
    }
    decompose(f, cfg)
}

/// [`decompose`] restricted to the H⁻¹ texture model.
pub fn decompose_hinv(f: &ChannelImage, cfg: &DecomposeConfig) -> Result<DecompositionResult> {
    if cfg.model != TextureModel::Hinv {
        return Err(Error::Parameter(format!(
            "decompose_hinv needs model hinv, got {}",
            cfg.model
        )));
    }
    decompose(f, cfg)
}

/// Advances `state` by one sweep. Builds the iteration-invariant data on
/// every call; loops should hold an [`AdmmSolver`] instead.
pub fn iterate_once(
    mut state: AdmmState,
    f: &ScalarField,
    cfg: &DecomposeConfig,
) -> Result<(AdmmState, IterationRecord)> {
    let mut solver = AdmmSolver::new(f, cfg)?;
    let record = solver.step(&mut state, 1)?;
    Ok((state, record))
}

/// Splits `f` into `(u, v)` with `u + v == f` exactly in floating point,
/// starting from `v = f − u` and nudging `v` where rounding breaks the sum.
fn split_exact(f: &ScalarField, u: &ScalarField) -> (ScalarField, ScalarField) {
    let mut u = u.clone();
    let mut v = ScalarField::zeros(f.width(), f.height());
    let mut inexact = 0usize;
    for ((&fi, ui), vi) in f.data().iter().zip(u.data_mut()).zip(v.data_mut()) {
        let (us, vs) = split_sample(fi, *ui);
        if us + vs != fi {
            inexact += 1;
        }
        *ui = us;
        *vi = vs;
    }
    if inexact > 0 {
        log::debug!("{inexact} samples with |f - u| too large for an exact split");
    }
    (u, v)
}

/// `(u', v)` with `u' + v == f` bitwise and `u'` within one ulp of `u` or `f`. Always
/// succeeds when `|f − u|` lies below the top of `f`'s binade; beyond that
/// the sum of two representable values near `u` and `f − u` may be unable
/// to reach the low bits of `f`, and `(u, fl(f − u))` is returned.
pub(crate) fn split_sample(f: f64, u: f64) -> (f64, f64) {
    let v = f - u;
    if u + v == f {
        return (u, v);
    }
    // put v on f's grid so that f − v is exact
    let q = f.abs().next_up() - f.abs();
    let vs = (v / q).round() * q;
    let us = f - vs;
    if us + vs == f {
        (us, vs)
    } else {
        (u, v)
    }
}
