//! Exact solves of periodic screened systems
//! `(w0·I + w1·DᵀD + w2·AₙᵀAₙ) u = rhs` in the Fourier domain.
//!
//! All difference operators are circulant under periodic boundaries, so the
//! system matrix is diagonalized by the 2-D DFT and its eigenvalues are the
//! per-bin values of a [`SpectralDenominator`]. The denominator depends only
//! on the grid size and weights, so callers build it once per run.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::diff::OperatorSymbol;
use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Eigenvalues of a screened system, row-major over `(ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDenominator {
    width: usize,
    height: usize,
    values: Vec<f64>,
    /// The zero-frequency bin carries no information; the solution's mean is
    /// set directly instead of divided out.
    pinned_dc: bool,
}

impl SpectralDenominator {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_dc_pinned(&self) -> bool {
        self.pinned_dc
    }
}

/// Weights of the identity, first-order and highest-order terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenedWeights {
    pub identity: f64,
    pub first: f64,
    pub highest: f64,
}

fn check_symbols(first: &OperatorSymbol, highest: &OperatorSymbol) -> Result<()> {
    if first.width() != highest.width() || first.height() != highest.height() {
        return Err(Error::Dimension("operator symbols differ in size".into()));
    }
    Ok(())
}

fn check_weight(name: &str, w: f64) -> Result<()> {
    if w >= 0.0 && w.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "{name} weight must be finite and nonnegative, got {w}"
        )))
    }
}

/// Per-bin `identity + first·symbol₁ + highest·symbolₙ`.
pub fn build_denominator(
    weights: ScreenedWeights,
    first: &OperatorSymbol,
    highest: &OperatorSymbol,
) -> Result<SpectralDenominator> {
    check_symbols(first, highest)?;
    check_weight("identity", weights.identity)?;
    check_weight("first-order", weights.first)?;
    check_weight("highest-order", weights.highest)?;
    let values: Vec<f64> = first
        .values()
        .iter()
        .zip(highest.values())
        .map(|(s1, sn)| weights.identity + weights.first * s1 + weights.highest * sn)
        .collect();
    if values.iter().any(|&v| v <= 0.0) {
        return Err(Error::Singular(
            "screened system has a zero eigenvalue (identity weight must be positive)".into(),
        ));
    }
    Ok(SpectralDenominator {
        width: first.width(),
        height: first.height(),
        values,
        pinned_dc: false,
    })
}

/// Denominator of the H⁻¹-fidelity system: `fidelity/ℓ + first·symbol₁ +
/// highest·symbolₙ` on nonzero bins, where `ℓ = symbol₁` is the negative
/// Laplacian symbol. The zero-frequency bin is pinned.
pub fn build_denominator_hinv(
    fidelity: f64,
    first_weight: f64,
    highest_weight: f64,
    first: &OperatorSymbol,
    highest: &OperatorSymbol,
) -> Result<SpectralDenominator> {
    check_symbols(first, highest)?;
    if !(fidelity > 0.0 && fidelity.is_finite()) {
        return Err(Error::Parameter(format!(
            "H⁻¹ fidelity weight must be positive, got {fidelity}"
        )));
    }
    check_weight("first-order", first_weight)?;
    check_weight("highest-order", highest_weight)?;
    let mut values: Vec<f64> = first
        .values()
        .iter()
        .zip(highest.values())
        .map(|(&lap, &sn)| {
            if lap > 0.0 {
                fidelity / lap + first_weight * lap + highest_weight * sn
            } else {
                1.0
            }
        })
        .collect();
    values[0] = 1.0;
    Ok(SpectralDenominator {
        width: first.width(),
        height: first.height(),
        values,
        pinned_dc: true,
    })
}

/// 2-D complex DFT over a fixed grid with reusable plans.
#[derive(Clone)]
pub struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    transposed: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2d")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(width);
        let row_inv = planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            width,
            height,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            transposed: vec![Complex64::default(); width * height],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn run(&mut self, buf: &mut [Complex64], inverse: bool) {
        let (w, h) = (self.width, self.height);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process_with_scratch(buf, &mut self.scratch);
        transpose(buf, &mut self.transposed, w, h);
        col.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, h, w);
    }

    /// Unnormalized forward transform of a real field.
    pub fn forward(&mut self, field: &ScalarField) -> Vec<Complex64> {
        debug_assert_eq!(field.width(), self.width);
        debug_assert_eq!(field.height(), self.height);
        let mut buf: Vec<Complex64> = field.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut buf, false);
        buf
    }

    /// Inverse transform (normalized by `1/N`) in place.
    pub fn inverse_in_place(&mut self, spectrum: &mut [Complex64]) {
        self.run(spectrum, true);
        let scale = 1.0 / (self.width * self.height) as f64;
        spectrum.iter_mut().for_each(|c| *c *= scale);
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&mut self, mut spectrum: Vec<Complex64>) -> ScalarField {
        self.inverse_in_place(&mut spectrum);
        let data = spectrum.into_iter().map(|c| c.re).collect();
        ScalarField::from_vec(self.width, self.height, data).expect("grid size fixed by plan")
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
    const BLOCK: usize = 16;
    for rb in (0..h).step_by(BLOCK) {
        for cb in (0..w).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(h) {
                for c in cb..(cb + BLOCK).min(w) {
                    dst[c * h + r] = src[r * w + c];
                }
            }
        }
    }
}

/// Transfer function `e^{iω} - 1` of a forward difference along an axis of
/// length `n`, for each bin.
pub fn forward_difference_transfer(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let omega = 2.0 * PI * k as f64 / n as f64;
            Complex64::new(omega.cos() - 1.0, omega.sin())
        })
        .collect()
}

/// Cached FFT plans for repeated screened solves on one grid size.
#[derive(Debug, Clone)]
pub struct ScreenedSolver {
    fft: Fft2d,
}

impl ScreenedSolver {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            fft: Fft2d::new(width, height),
        }
    }

    pub fn fft(&mut self) -> &mut Fft2d {
        &mut self.fft
    }

    fn check(&self, w: usize, h: usize, denom: &SpectralDenominator) -> Result<()> {
        if w != self.fft.width || h != self.fft.height || denom.width != w || denom.height != h {
            return Err(Error::Dimension(format!(
                "rhs {}×{} / denominator {}×{} / solver {}×{}",
                w, h, denom.width, denom.height, self.fft.width, self.fft.height
            )));
        }
        Ok(())
    }

    /// Solve with the right-hand side given as a field. For pinned
    /// denominators the solution mean equals the rhs mean.
    pub fn solve(&mut self, rhs: &ScalarField, denom: &SpectralDenominator) -> Result<ScalarField> {
        self.check(rhs.width(), rhs.height(), denom)?;
        let spectrum = self.fft.forward(rhs);
        let dc = spectrum[0].re / rhs.len() as f64;
        self.solve_spectrum(spectrum, denom, dc)
    }

    /// Solve with the right-hand side already transformed. `pinned_mean` is
    /// used only when the denominator pins the zero-frequency bin.
    pub fn solve_spectrum(
        &mut self,
        mut spectrum: Vec<Complex64>,
        denom: &SpectralDenominator,
        pinned_mean: f64,
    ) -> Result<ScalarField> {
        if spectrum.len() != denom.values.len() {
            return Err(Error::Dimension(format!(
                "spectrum has {} bins, denominator has {}",
                spectrum.len(),
                denom.values.len()
            )));
        }
        for (c, &d) in spectrum.iter_mut().zip(&denom.values) {
            *c /= d;
        }
        if denom.pinned_dc {
            spectrum[0] = Complex64::new(pinned_mean * denom.values.len() as f64, 0.0);
        }
        Ok(self.fft.inverse_real(spectrum))
    }
}

/// One-shot screened solve; plans are built per call.
pub fn solve_screened(rhs: &ScalarField, denom: &SpectralDenominator) -> Result<ScalarField> {
    ScreenedSolver::new(rhs.width(), rhs.height()).solve(rhs, denom)
}
