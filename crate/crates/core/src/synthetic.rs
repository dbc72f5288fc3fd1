//! Synthetic structure + texture scenes with known ground truth.
//!
//! The structure is piecewise linear: a horizontal ramp of slope 1/64 per
//! pixel across the full width (wrapping with a jump at the periodic seam)
//! plus a step edge of height 0.5 across the middle row. The texture is a
//! sinusoid of amplitude 0.1 and period 8 pixels. Samples span roughly
//! `[0, 1.7]`, so scenes are meant for the floating-point pipeline rather
//! than 8-bit export.
//!
//! The ramp has no kinks: a slope change of 1/64 lies far below the
//! smallest second difference an L₀ fixed point can retain at ordinary
//! weights.

use std::f64::consts::PI;

use crate::grid::{ChannelImage, ScalarField};

pub const RAMP_SLOPE: f64 = 1.0 / 64.0;
pub const STEP_HEIGHT: f64 = 0.5;
pub const TEXTURE_AMPLITUDE: f64 = 0.1;
pub const TEXTURE_PERIOD: f64 = 8.0;
pub const BASE_LEVEL: f64 = 0.1;

/// A synthetic test image with its ground-truth parts and region masks.
#[derive(Debug, Clone)]
pub struct Scene {
    pub clean: ScalarField,
    pub texture: ScalarField,
    pub observed: ChannelImage,
    /// Pixels on the ramp, at least 2 px from the seam jump and the edges.
    pub ramp_mask: Vec<bool>,
    /// Pixels within 2 px of a step edge (including the periodic seam).
    pub edge_mask: Vec<bool>,
}

/// Texture orientation of a [`ramp_step_scene`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stripes {
    Vertical,
    Horizontal,
    Diagonal,
}

/// Square `size`×`size` scene (`size` a multiple of 16, at least 32).
/// `phase` shifts the texture in units of a full period.
pub fn ramp_step_scene(size: usize, stripes: Stripes, phase: f64) -> Scene {
    build_scene(size, stripes, phase, STEP_HEIGHT)
}

/// [`ramp_step_scene`] without the step edge.
pub fn ramp_scene(size: usize, stripes: Stripes, phase: f64) -> Scene {
    build_scene(size, stripes, phase, 0.0)
}

fn build_scene(size: usize, stripes: Stripes, phase: f64, step: f64) -> Scene {
    assert!(size >= 32 && size.is_multiple_of(16), "scene size must be a multiple of 16, ≥ 32");
    let step_row = size / 2;
    let profile = |col: usize| col as f64 * RAMP_SLOPE;
    let clean = ScalarField::from_fn(size, size, |row, col| {
        BASE_LEVEL + profile(col) + if row >= step_row { step } else { 0.0 }
    });
    let texture = ScalarField::from_fn(size, size, |row, col| {
        let t = match stripes {
            Stripes::Vertical => col as f64,
            Stripes::Horizontal => row as f64,
            Stripes::Diagonal => (row + col) as f64,
        };
        TEXTURE_AMPLITUDE * (2.0 * PI * (t / TEXTURE_PERIOD + phase)).sin()
    });
    let mut sum = clean.clone();
    sum.axpy(1.0, &texture);
    let observed = ChannelImage::new(size, size, 1, sum.into_vec()).expect("finite samples");

    let near_edge_row = |row: usize| {
        let d_mid = row.abs_diff(step_row).min(row.abs_diff(step_row - 1));
        // the periodic seam between the last and first rows is also an edge
        let d_seam = row.min(size - 1 - row);
        d_mid <= 2 || d_seam <= 2
    };
    // at least 2 px from the wrap-around jump
    let on_ramp_col = |col: usize| (2..size - 2).contains(&col);
    let mut ramp_mask = vec![false; size * size];
    let mut edge_mask = vec![false; size * size];
    for row in 0..size {
        for col in 0..size {
            let idx = row * size + col;
            edge_mask[idx] = near_edge_row(row);
            ramp_mask[idx] = !near_edge_row(row) && on_ramp_col(col);
        }
    }
    Scene {
        clean,
        texture,
        observed,
        ramp_mask,
        edge_mask,
    }
}

/// Ten scenes varying texture orientation and phase.
pub fn scene_suite(size: usize) -> Vec<Scene> {
    let orientations = [Stripes::Vertical, Stripes::Horizontal, Stripes::Diagonal];
    (0..10)
        .map(|k| ramp_step_scene(size, orientations[k % 3], k as f64 / 10.0))
        .collect()
}

/// Root-mean-square difference of two equally sized fields.
pub fn rmse(a: &ScalarField, b: &ScalarField) -> f64 {
    (a.dist_sq(b) / a.len() as f64).sqrt()
}
