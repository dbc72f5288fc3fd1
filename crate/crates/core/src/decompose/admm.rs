//! Multi-block ADMM in scaled-dual form.
//!
//! Constraints `u − f = h`, `Du = g`, `Aₙu = w` (the fidelity split exists
//! only for the L¹ model). With scaled duals `y` the augmented terms read
//! `ρ/2‖r + y‖²`, each split variable is a proximal map of the shifted
//! residual, and duals accumulate the primal residual: `y ← y + r`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{DecomposeConfig, GpExponent, TextureModel};
use crate::diff::{diff_adjoint, diff_stack, operator_symbol, DiffStack};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::prox::{hard_shrink_at, soft_shrink_unchecked};
use crate::spectral::{
    build_denominator, build_denominator_hinv, forward_difference_transfer, ScreenedSolver,
    ScreenedWeights, SpectralDenominator,
};

/// Floor for norms used as denominators.
pub const NORM_FLOOR: f64 = 1e-12;

/// Largest relative primal residual accepted at convergence.
pub const FEASIBILITY_TOL: f64 = 1e-4;

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// `‖uᵏ⁺¹ − uᵏ‖² / max(‖uᵏ⁺¹‖², floor)`
    pub q_r: f64,
    /// `‖uᵏ⁺¹‖²`
    pub e_u: f64,
    /// Relative residual of the fidelity-side split (`u − f − h` for L¹,
    /// `g − q` for `G_1`); zero for models without one.
    pub r_fidelity: f64,
    /// `‖Du − g‖ / (‖Du‖ + floor)`
    pub r_grad: f64,
    /// `‖Aₙu − w‖ / (‖Aₙu‖ + floor)`
    pub r_hess: f64,
}

impl IterationRecord {
    /// All relative primal residuals within [`FEASIBILITY_TOL`].
    pub fn is_feasible(&self) -> bool {
        self.r_fidelity.max(self.r_grad).max(self.r_hess) <= FEASIBILITY_TOL
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

/// Texture field `g` of the `G_p` model and, for p = 1, its L¹ split.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureFieldState {
    pub field: DiffStack,
    pub split: DiffStack,
    pub dual: DiffStack,
}

/// Primal, split and scaled dual variables of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub u: ScalarField,
    pub h: ScalarField,
    pub g: DiffStack,
    pub w: DiffStack,
    pub y1: ScalarField,
    pub y2: DiffStack,
    pub y3: DiffStack,
    pub texture: Option<TextureFieldState>,
}

impl AdmmState {
    /// All variables zero.
    pub fn zeros(width: usize, height: usize, cfg: &DecomposeConfig) -> Result<Self> {
        let zero_field = ScalarField::zeros(width, height);
        let texture = match cfg.model {
            TextureModel::Gp => Some(TextureFieldState {
                field: DiffStack::zeros(1, width, height)?,
                split: DiffStack::zeros(1, width, height)?,
                dual: DiffStack::zeros(1, width, height)?,
            }),
            _ => None,
        };
        Ok(Self {
            u: zero_field.clone(),
            h: zero_field.clone(),
            g: DiffStack::zeros(1, width, height)?,
            w: DiffStack::zeros(cfg.order, width, height)?,
            y1: zero_field,
            y2: DiffStack::zeros(1, width, height)?,
            y3: DiffStack::zeros(cfg.order, width, height)?,
            texture,
        })
    }

    fn check_shape(&self, f: &ScalarField, cfg: &DecomposeConfig) -> Result<()> {
        let ok = self.u.same_shape(f)
            && self.h.same_shape(f)
            && self.y1.same_shape(f)
            && self.g.order() == 1
            && self.y2.order() == 1
            && self.w.order() == cfg.order
            && self.y3.order() == cfg.order
            && self.g.component(0).same_shape(f)
            && self.w.component(0).same_shape(f)
            && (self.texture.is_some() == (cfg.model == TextureModel::Gp));
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "ADMM state does not match the input and configuration".into(),
            ))
        }
    }
}

/// Iteration-invariant data for one channel: cached FFT plans, the
/// system denominator and transformed input.
pub struct AdmmSolver {
    f: ScalarField,
    cfg: DecomposeConfig,
    solver: ScreenedSolver,
    denom: SpectralDenominator,
    f_norm: f64,
    f_mean: f64,
    f_hat: Vec<Complex64>,
    /// `2λ·ℓ⁺·f̂` for the H⁻¹ model.
    hinv_rhs: Option<Vec<Complex64>>,
    transfer_x: Vec<Complex64>,
    transfer_y: Vec<Complex64>,
}

impl AdmmSolver {
    pub fn new(f: &ScalarField, cfg: &DecomposeConfig) -> Result<Self> {
        cfg.validate()?;
        let (width, height) = (f.width(), f.height());
        let first = operator_symbol(1, width, height)?;
        let highest = operator_symbol(cfg.order, width, height)?;
        let denom = match cfg.model {
            TextureModel::L1 => build_denominator(
                ScreenedWeights {
                    identity: cfg.rho1,
                    first: cfg.rho2,
                    highest: cfg.rho3,
                },
                &first,
                &highest,
            )?,
            TextureModel::L2 | TextureModel::Gp => build_denominator(
                ScreenedWeights {
                    identity: 2.0 * cfg.lambda,
                    first: cfg.rho2,
                    highest: cfg.rho3,
                },
                &first,
                &highest,
            )?,
            TextureModel::Hinv => {
                build_denominator_hinv(2.0 * cfg.lambda, cfg.rho2, cfg.rho3, &first, &highest)?
            }
        };
        let mut solver = ScreenedSolver::new(width, height);
        let f_hat = solver.fft().forward(f);
        let hinv_rhs = (cfg.model == TextureModel::Hinv).then(|| {
            f_hat
                .iter()
                .zip(first.values())
                .map(|(&c, &lap)| {
                    if lap > 0.0 {
                        c * (2.0 * cfg.lambda / lap)
                    } else {
                        Complex64::default()
                    }
                })
                .collect()
        });
        Ok(Self {
            f: f.clone(),
            cfg: cfg.clone(),
            solver,
            denom,
            f_norm: f.norm(),
            f_mean: f.mean(),
            f_hat,
            hinv_rhs,
            transfer_x: forward_difference_transfer(width),
            transfer_y: forward_difference_transfer(height),
        })
    }

    pub fn config(&self) -> &DecomposeConfig {
        &self.cfg
    }

    pub fn input(&self) -> &ScalarField {
        &self.f
    }

    /// State at iteration zero.
    pub fn initial_state(&self) -> Result<AdmmState> {
        AdmmState::zeros(self.f.width(), self.f.height(), &self.cfg)
    }

    /// One full sweep: u, texture field (`G_p`), h, g, w, then duals.
    pub fn step(&mut self, state: &mut AdmmState, iter: usize) -> Result<IterationRecord> {
        state.check_shape(&self.f, &self.cfg)?;
        let cfg = &self.cfg.clone();
        let u_prev = std::mem::replace(&mut state.u, ScalarField::zeros(1, 1));

        // u-step
        let mut rhs = match cfg.model {
            TextureModel::L1 => {
                let mut r = self.f.clone();
                r.axpy(1.0, &state.h);
                r.axpy(-1.0, &state.y1);
                r.scale(cfg.rho1);
                r
            }
            TextureModel::L2 => {
                let mut r = self.f.clone();
                r.scale(2.0 * cfg.lambda);
                r
            }
            TextureModel::Gp => {
                let tex = state.texture.as_ref().expect("checked by check_shape");
                let mut r = self.f.clone();
                r.axpy(1.0, &diff_adjoint(&tex.field));
                r.scale(2.0 * cfg.lambda);
                r
            }
            TextureModel::Hinv => ScalarField::zeros(self.f.width(), self.f.height()),
        };
        rhs.axpy(cfg.rho2, &diff_adjoint(&state.g.zip_map(&state.y2, |a, b| a - b)));
        rhs.axpy(cfg.rho3, &diff_adjoint(&state.w.zip_map(&state.y3, |a, b| a - b)));
        let mut spectrum = self.solver.fft().forward(&rhs);
        if let Some(extra) = &self.hinv_rhs {
            for (c, e) in spectrum.iter_mut().zip(extra) {
                *c += e;
            }
        }
        let u = self.solver.solve_spectrum(spectrum, &self.denom, self.f_mean)?;

        // texture field (G_p)
        let mut r_fidelity = 0.0;
        if let Some(tex) = state.texture.as_mut() {
            r_fidelity = self.texture_step(&u, tex)?;
        }

        let du = diff_stack(&u, 1)?;
        let au = diff_stack(&u, cfg.order)?;

        // h-step and its dual
        if cfg.model == TextureModel::L1 {
            let tau = cfg.lambda / cfg.rho1;
            let (uf, hs, ys) = (u.data(), state.h.data_mut(), state.y1.data_mut());
            let fs = self.f.data();
            let mut resid_sq = 0.0;
            for i in 0..uf.len() {
                let shift = uf[i] - fs[i];
                let h = soft_shrink_unchecked(shift + ys[i], tau);
                hs[i] = h;
                let r = shift - h;
                ys[i] += r;
                resid_sq += r * r;
            }
            r_fidelity = resid_sq.sqrt() / self.f_norm.max(NORM_FLOOR);
        }

        // g-step, w-step and their duals
        let tau_g = cfg.alpha / cfg.rho2;
        let r_grad = split_update(&du, &mut state.g, &mut state.y2, |x| {
            soft_shrink_unchecked(x, tau_g)
        });
        let tau_w = cfg.hard_shrink_mode.threshold(cfg.beta / cfg.rho3);
        let r_hess = split_update(&au, &mut state.w, &mut state.y3, |x| hard_shrink_at(x, tau_w));

        let e_u = u.norm_sq();
        let q_r = u.dist_sq(&u_prev) / e_u.max(NORM_FLOOR);
        state.u = u;
        Ok(IterationRecord {
            iter,
            q_r,
            e_u,
            r_fidelity,
            r_grad: r_grad / (du.norm() + NORM_FLOOR),
            r_hess: r_hess / (au.norm() + NORM_FLOOR),
        })
    }

    /// Minimizes over the texture field `g` with `u` fixed. Returns the
    /// relative split residual for p = 1 (zero for p = 2).
    fn texture_step(&mut self, u: &ScalarField, tex: &mut TextureFieldState) -> Result<f64> {
        let cfg = &self.cfg;
        let lambda = cfg.lambda;
        let gamma = cfg.gamma.expect("validated");
        let (w, h) = (u.width(), u.height());
        let u_hat = self.solver.fft().forward(u);
        let diff_hat: Vec<Complex64> = u_hat.iter().zip(&self.f_hat).map(|(a, b)| a - b).collect();

        let (mut gx, mut gy) = (
            vec![Complex64::default(); w * h],
            vec![Complex64::default(); w * h],
        );
        match cfg.gp_exponent() {
            GpExponent::Two => {
                // (γI + λDDᵀ) g = λD(u − f), solved per bin via the rank-one structure
                for ky in 0..h {
                    for kx in 0..w {
                        let i = ky * w + kx;
                        let (a, b) = (self.transfer_x[kx], self.transfer_y[ky]);
                        let d2 = a.norm_sqr() + b.norm_sqr();
                        let c = diff_hat[i] * (lambda / (gamma + lambda * d2));
                        gx[i] = a * c;
                        gy[i] = b * c;
                    }
                }
            }
            GpExponent::One => {
                // (ρI + 2λDDᵀ) g = 2λD(u − f) + ρ(q − y), Sherman–Morrison per bin
                let rho = cfg.rho1;
                let shifted = tex.split.zip_map(&tex.dual, |q, y| q - y);
                let sx = self.solver.fft().forward(shifted.component(0));
                let sy = self.solver.fft().forward(shifted.component(1));
                for ky in 0..h {
                    for kx in 0..w {
                        let i = ky * w + kx;
                        let (a, b) = (self.transfer_x[kx], self.transfer_y[ky]);
                        let rx = a * diff_hat[i] * (2.0 * lambda) + sx[i] * rho;
                        let ry = b * diff_hat[i] * (2.0 * lambda) + sy[i] * rho;
                        let d2 = a.norm_sqr() + b.norm_sqr();
                        let proj = (a.conj() * rx + b.conj() * ry) * (2.0 * lambda / (rho + 2.0 * lambda * d2));
                        gx[i] = (rx - a * proj) / rho;
                        gy[i] = (ry - b * proj) / rho;
                    }
                }
            }
        }
        let fx = self.solver.fft().inverse_real(gx);
        let fy = self.solver.fft().inverse_real(gy);
        tex.field = DiffStack::from_components(1, vec![fx, fy])?;

        if cfg.gp_exponent() == GpExponent::One {
            let tau = gamma / cfg.rho1;
            let resid = split_update(&tex.field, &mut tex.split, &mut tex.dual, |x| {
                soft_shrink_unchecked(x, tau)
            });
            return Ok(resid / (tex.field.norm() + NORM_FLOOR));
        }
        Ok(0.0)
    }
}

/// `split = prox(target + dual)`, `dual += target − split`. Returns
/// `‖target − split‖`.
fn split_update(
    target: &DiffStack,
    split: &mut DiffStack,
    dual: &mut DiffStack,
    prox: impl Fn(f64) -> f64,
) -> f64 {
    let mut resid_sq = 0.0;
    for ((t, s), y) in target
        .components()
        .iter()
        .zip(split.components_mut())
        .zip(dual.components_mut())
    {
        for ((&tv, sv), yv) in t.data().iter().zip(s.data_mut()).zip(y.data_mut()) {
            let next = prox(tv + *yv);
            *sv = next;
            let r = tv - next;
            *yv += r;
            resid_sq += r * r;
        }
    }
    resid_sq.sqrt()
}
