//! Periodic forward-difference operator stacks and their adjoints.
//!
//! An order-`k` stack holds all `2^k` compositions of the two first-order
//! differences, indexed by axis word: bit `k-1-p` of the component index
//! selects the axis at position `p` (`0` = x, `1` = y). Order 1 is `{x, y}`,
//! order 2 is `{xx, xy, yx, yy}`.
//!
//! Differences commute on a periodic grid, so every component is evaluated
//! as `Dy^ny Dx^nx u`. Components with the same axis counts are therefore
//! bitwise identical (`xy == yx`).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::ScalarField;

pub const MAX_ORDER: usize = 3;

/// Per-pixel stack of `2^order` difference components.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffStack {
    order: usize,
    components: Vec<ScalarField>,
}

impl DiffStack {
    pub fn zeros(order: usize, width: usize, height: usize) -> Result<Self> {
        check_order(order)?;
        Ok(Self {
            order,
            components: vec![ScalarField::zeros(width, height); 1 << order],
        })
    }

    pub fn from_components(order: usize, components: Vec<ScalarField>) -> Result<Self> {
        check_order(order)?;
        if components.len() != 1 << order {
            return Err(Error::Dimension(format!(
                "order-{order} stack needs {} components, got {}",
                1 << order,
                components.len()
            )));
        }
        if components.iter().any(|c| !c.same_shape(&components[0])) {
            return Err(Error::Dimension("stack components differ in size".into()));
        }
        Ok(Self { order, components })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    #[inline]
    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn component(&self, idx: usize) -> &ScalarField {
        &self.components[idx]
    }

    pub fn width(&self) -> usize {
        self.components[0].width()
    }

    pub fn height(&self) -> usize {
        self.components[0].height()
    }

    /// Axis word of a component, e.g. `"xy"`.
    pub fn word(order: usize, idx: usize) -> String {
        (0..order)
            .map(|p| if idx >> (order - 1 - p) & 1 == 0 { 'x' } else { 'y' })
            .collect()
    }

    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(ScalarField::norm_sq).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &DiffStack) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn dist_sq(&self, other: &DiffStack) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.dist_sq(b))
            .sum()
    }

    /// Number of entries with magnitude above `tau`.
    pub fn count_above(&self, tau: f64) -> usize {
        self.components
            .iter()
            .map(|c| c.data().iter().filter(|v| v.abs() > tau).count())
            .sum()
    }

    pub fn total_len(&self) -> usize {
        self.components.iter().map(ScalarField::len).sum()
    }

    /// Elementwise combination `out = f(self, other)`, component by component.
    pub(crate) fn zip_map(&self, other: &DiffStack, f: impl Fn(f64, f64) -> f64) -> DiffStack {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| {
                let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
                ScalarField::from_vec(a.width(), a.height(), data)
                    .expect("shape preserved by zip")
            })
            .collect();
        DiffStack {
            order: self.order,
            components,
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "difference order must be in 1..={MAX_ORDER}, got {order}"
        )))
    }
}

/// Forward x-difference with periodic wrap: `u(i, j+1) - u(i, j)`.
pub fn dx(u: &ScalarField) -> ScalarField {
    let (w, h) = (u.width(), u.height());
    let src = u.data();
    let mut out = ScalarField::zeros(w, h);
    let dst = out.data_mut();
    for row in 0..h {
        let base = row * w;
        for col in 0..w - 1 {
            dst[base + col] = src[base + col + 1] - src[base + col];
        }
        dst[base + w - 1] = src[base] - src[base + w - 1];
    }
    out
}

/// Forward y-difference with periodic wrap: `u(i+1, j) - u(i, j)`.
pub fn dy(u: &ScalarField) -> ScalarField {
    let (w, h) = (u.width(), u.height());
    let src = u.data();
    let mut out = ScalarField::zeros(w, h);
    let dst = out.data_mut();
    for row in 0..h {
        let next = if row + 1 == h { 0 } else { row + 1 };
        for col in 0..w {
            dst[row * w + col] = src[next * w + col] - src[row * w + col];
        }
    }
    out
}

/// Adjoint of [`dx`]: `p(i, j-1) - p(i, j)`.
pub fn dx_t(p: &ScalarField) -> ScalarField {
    let (w, h) = (p.width(), p.height());
    let src = p.data();
    let mut out = ScalarField::zeros(w, h);
    let dst = out.data_mut();
    for row in 0..h {
        let base = row * w;
        dst[base] = src[base + w - 1] - src[base];
        for col in 1..w {
            dst[base + col] = src[base + col - 1] - src[base + col];
        }
    }
    out
}

/// Adjoint of [`dy`]: `p(i-1, j) - p(i, j)`.
pub fn dy_t(p: &ScalarField) -> ScalarField {
    let (w, h) = (p.width(), p.height());
    let src = p.data();
    let mut out = ScalarField::zeros(w, h);
    let dst = out.data_mut();
    for row in 0..h {
        let prev = if row == 0 { h - 1 } else { row - 1 };
        for col in 0..w {
            dst[row * w + col] = src[prev * w + col] - src[row * w + col];
        }
    }
    out
}

fn axis_counts(order: usize, idx: usize) -> (usize, usize) {
    let ny = (idx & ((1 << order) - 1)).count_ones() as usize;
    (order - ny, ny)
}

/// Order-`k` difference stack of `u`.
pub fn diff_stack(u: &ScalarField, order: usize) -> Result<DiffStack> {
    check_order(order)?;
    // by_counts[ny] = Dy^ny Dx^(order-ny) u
    let mut x_pows = Vec::with_capacity(order + 1);
    x_pows.push(u.clone());
    for n in 1..=order {
        let next = dx(&x_pows[n - 1]);
        x_pows.push(next);
    }
    let by_counts: Vec<ScalarField> = (0..=order)
        .map(|ny| {
            let mut f = x_pows[order - ny].clone();
            for _ in 0..ny {
                f = dy(&f);
            }
            f
        })
        .collect();
    let components = (0..1usize << order)
        .map(|idx| by_counts[axis_counts(order, idx).1].clone())
        .collect();
    Ok(DiffStack { order, components })
}

/// `Aᵀ p` for the stacked operator `A` of the stack's order.
pub fn diff_adjoint(stack: &DiffStack) -> ScalarField {
    let order = stack.order;
    let (w, h) = (stack.width(), stack.height());
    // group components sharing the same axis counts before applying the adjoint
    let mut grouped: Vec<Option<ScalarField>> = vec![None; order + 1];
    for (idx, comp) in stack.components.iter().enumerate() {
        let ny = axis_counts(order, idx).1;
        match &mut grouped[ny] {
            Some(acc) => acc.axpy(1.0, comp),
            slot => *slot = Some(comp.clone()),
        }
    }
    let mut out = ScalarField::zeros(w, h);
    for (ny, sum) in grouped.into_iter().enumerate() {
        let Some(mut f) = sum else { continue };
        for _ in 0..ny {
            f = dy_t(&f);
        }
        for _ in 0..order - ny {
            f = dx_t(&f);
        }
        out.axpy(1.0, &f);
    }
    out
}

/// Squared transfer-function magnitude of an order-`k` stack, summed over
/// its components. Row-major over frequency bins `(ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSymbol {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl OperatorSymbol {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ky: usize, kx: usize) -> f64 {
        self.values[ky * self.width + kx]
    }
}

/// `|1 - e^{-iω}|² = 2 - 2cos ω` for each bin of an axis of length `n`.
pub(crate) fn axis_symbol(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 - 2.0 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect()
}

/// Sum over all `2^k` words of the product of per-axis symbols, which
/// factorizes to `(sx + sy)^k`.
pub fn operator_symbol(order: usize, width: usize, height: usize) -> Result<OperatorSymbol> {
    check_order(order)?;
    let sx = axis_symbol(width);
    let sy = axis_symbol(height);
    let mut values = Vec::with_capacity(width * height);
    for ky in 0..height {
        for kx in 0..width {
            values.push((sx[kx] + sy[ky]).powi(order as i32));
        }
    }
    Ok(OperatorSymbol {
        width,
        height,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ScalarField {
        ScalarField::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_stack(rng: &mut ChaCha8Rng, order: usize, w: usize, h: usize) -> DiffStack {
        let comps = (0..1 << order).map(|_| random_field(rng, w, h)).collect();
        DiffStack::from_components(order, comps).unwrap()
    }

    #[test]
    fn constant_field_has_zero_stack() {
        let u = ScalarField::filled(5, 4, 0.7);
        for k in 1..=3 {
            let s = diff_stack(&u, k).unwrap();
            assert_eq!(s.components().len(), 1 << k);
            assert_eq!(s.norm_sq(), 0.0);
        }
    }

    #[test]
    fn periodic_wrap_on_row() {
        // 1×4 is below the image minimum, but the operator itself is defined for any size
        let u = ScalarField::from_fn(4, 1, |_, j| j as f64);
        let s = diff_stack(&u, 1).unwrap();
        assert_eq!(s.component(0).data(), &[1.0, 1.0, 1.0, -3.0]);
    }

    #[test]
    fn unsupported_order() {
        let u = ScalarField::zeros(3, 3);
        assert!(matches!(diff_stack(&u, 0), Err(Error::Parameter(_))));
        assert!(matches!(diff_stack(&u, 4), Err(Error::Parameter(_))));
        assert!(operator_symbol(5, 4, 4).is_err());
    }

    #[test]
    fn words() {
        let words: Vec<_> = (0..4).map(|i| DiffStack::word(2, i)).collect();
        assert_eq!(words, ["xx", "xy", "yx", "yy"]);
        assert_eq!(DiffStack::word(3, 6), "yyx");
    }

    #[test]
    fn order_two_is_composition_of_order_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_field(&mut rng, 6, 6);
        let s2 = diff_stack(&u, 2).unwrap();
        let s1 = diff_stack(&u, 1).unwrap();
        for (first, inner) in s1.components().iter().enumerate() {
            let outer = diff_stack(inner, 1).unwrap();
            for (second, comp) in outer.components().iter().enumerate() {
                // word = (second axis applied last, first axis applied first)
                let idx = (second << 1) | first;
                let diff = comp.dist_sq(s2.component(idx)).sqrt();
                assert!(diff < 1e-14, "component {idx} differs by {diff}");
            }
        }
    }

    #[test]
    fn mixed_components_bitwise_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&mut rng, 7, 5);
        let s2 = diff_stack(&u, 2).unwrap();
        assert_eq!(s2.component(1), s2.component(2));
        let s3 = diff_stack(&u, 3).unwrap();
        assert_eq!(s3.component(1), s3.component(2));
        assert_eq!(s3.component(2), s3.component(4));
    }

    #[test]
    fn adjoint_identity_all_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for k in 1..=3 {
            for _ in 0..10 {
                let u = random_field(&mut rng, 9, 7);
                let p = random_stack(&mut rng, k, 9, 7);
                let au = diff_stack(&u, k).unwrap();
                let atp = diff_adjoint(&p);
                let lhs = au.dot(&p);
                let rhs = u.dot(&atp);
                let scale = au.norm() * p.norm() + u.norm() * atp.norm();
                assert!((lhs - rhs).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn zero_stack_adjoint_is_zero() {
        let s = DiffStack::zeros(2, 4, 3).unwrap();
        assert_eq!(diff_adjoint(&s).norm_sq(), 0.0);
    }

    #[test]
    fn order_one_adjoint_is_negative_backward_divergence() {
        // dense 9×9 matrix of the stacked order-1 operator on a 3×3 grid, transposed
        let (w, h) = (3, 3);
        let n = w * h;
        let mut a = vec![vec![0.0; n]; 2 * n];
        for row in 0..h {
            for col in 0..w {
                let i = row * w + col;
                a[i][row * w + (col + 1) % w] += 1.0;
                a[i][i] -= 1.0;
                a[n + i][((row + 1) % h) * w + col] += 1.0;
                a[n + i][i] -= 1.0;
            }
        }
        let p: Vec<f64> = (0..2 * n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let expected: Vec<f64> = (0..n)
            .map(|j| (0..2 * n).map(|i| a[i][j] * p[i]).sum())
            .collect();
        let comps = vec![
            ScalarField::from_vec(w, h, p[..n].to_vec()).unwrap(),
            ScalarField::from_vec(w, h, p[n..].to_vec()).unwrap(),
        ];
        let got = diff_adjoint(&DiffStack::from_components(1, comps.clone()).unwrap());
        assert_eq!(got.data(), &expected[..]);
        // and equals minus the backward-difference divergence
        for row in 0..h {
            for col in 0..w {
                let px = comps[0].get(row, col) - comps[0].get(row, (col + w - 1) % w);
                let py = comps[1].get(row, col) - comps[1].get((row + h - 1) % h, col);
                assert!((got.get(row, col) + px + py).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symbol_closed_forms() {
        for k in 1..=3 {
            let s = operator_symbol(k, 8, 6).unwrap();
            assert_eq!(s.at(0, 0), 0.0);
            assert!(s.values().iter().all(|&v| v >= 0.0));
        }
        let s1 = operator_symbol(1, 8, 6).unwrap();
        assert!((s1.at(0, 4) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn affine_field_second_order_vanishes_off_seams() {
        let (w, h) = (8, 6);
        let u = ScalarField::from_fn(w, h, |i, j| 0.3 * i as f64 + 0.2 * j as f64);
        let s = diff_stack(&u, 2).unwrap();
        for comp in s.components() {
            for row in 0..h - 2 {
                for col in 0..w - 2 {
                    assert!(comp.get(row, col).abs() < 1e-12);
                }
            }
        }
    }
}
