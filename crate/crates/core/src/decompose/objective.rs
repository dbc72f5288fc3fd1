use super::config::{DecomposeConfig, TextureModel};
use crate::diff::{diff_stack, operator_symbol};
use crate::error::{Error, Result};
use crate::grid::ChannelImage;
use crate::spectral::Fft2d;

/// Energy of a candidate structure `u` for input `f`, summed over channels:
/// `fidelity(u − f) + α‖Du‖₁ + β‖Aₙu‖₀`, with the L₀ term counting exact
/// nonzeros.
///
/// The `G_p` energy depends on the texture field as well and is not
/// defined for `u` alone.
pub fn objective(f: &ChannelImage, u: &ChannelImage, cfg: &DecomposeConfig) -> Result<f64> {
    if !f.same_shape(u) {
        return Err(Error::Dimension("input and structure shapes differ".into()));
    }
    let (w, h) = (f.width(), f.height());
    let mut fft = (cfg.model == TextureModel::Hinv).then(|| Fft2d::new(w, h));
    let lap = operator_symbol(1, w, h)?;
    let mut total = 0.0;
    for c in 0..f.channels() {
        let fc = f.channel(c);
        let uc = u.channel(c);
        let fidelity = match cfg.model {
            TextureModel::L1 => fc.data().iter().zip(uc.data()).map(|(a, b)| (a - b).abs()).sum(),
            TextureModel::L2 => fc.dist_sq(&uc),
            TextureModel::Hinv => {
                let mut diff = fc.clone();
                diff.axpy(-1.0, &uc);
                let spec = fft.as_mut().expect("built for hinv").forward(&diff);
                let n = diff.len() as f64;
                spec.iter()
                    .zip(lap.values())
                    .filter(|(_, &l)| l > 0.0)
                    .map(|(z, &l)| z.norm_sqr() / l)
                    .sum::<f64>()
                    / n
            }
            TextureModel::Gp => {
                return Err(Error::Parameter(
                    "the G_p energy needs the texture field; not defined for u alone".into(),
                ))
            }
        };
        let tv: f64 = diff_stack(&uc, 1)?
            .components()
            .iter()
            .flat_map(|comp| comp.data().iter())
            .map(|v| v.abs())
            .sum();
        let nonzeros = diff_stack(&uc, cfg.order)?.count_above(0.0) as f64;
        total += cfg.lambda * fidelity + cfg.alpha * tv + cfg.beta * nonzeros;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(data: Vec<f64>) -> ChannelImage {
        ChannelImage::new(4, 3, 1, data).unwrap()
    }

    #[test]
    fn hand_computed_energy() {
        // u has one unit jump between columns 1 and 2 of every row
        let f = image(vec![0.0; 12]);
        let u = image((0..12).map(|i| if i % 4 >= 2 { 1.0 } else { 0.0 }).collect());
        let cfg = DecomposeConfig::l1(0.5, 0.25, 0.125);
        // |u − f| sums to 6; Dx u = [0, 1, 0, −1] per row; Dxx u = [1, −1, −1, 1]
        let e = objective(&f, &u, &cfg).unwrap();
        assert!((e - (0.5 * 6.0 + 0.25 * 6.0 + 0.125 * 12.0)).abs() < 1e-12);
    }

    #[test]
    fn gp_energy_is_undefined_for_u_alone() {
        let f = image(vec![0.0; 12]);
        let cfg = DecomposeConfig::gp(0.1, 0.1, 0.1, 0.1, super::super::GpExponent::Two);
        assert!(matches!(objective(&f, &f, &cfg), Err(Error::Parameter(_))));
    }

    proptest! {
        #[test]
        fn scales_linearly_with_weights(
            f in prop::collection::vec(0.0f64..1.0, 12),
            u in prop::collection::vec(0.0f64..1.0, 12),
            s in 0.01f64..100.0,
            hinv in prop::bool::ANY,
        ) {
            let (f, u) = (image(f), image(u));
            let cfg = if hinv {
                DecomposeConfig::hinv(0.3, 0.2, 0.1)
            } else {
                DecomposeConfig::l2(0.3, 0.2, 0.1)
            };
            let mut scaled = cfg.clone();
            scaled.lambda *= s;
            scaled.alpha *= s;
            scaled.beta *= s;
            let (e, es) = (objective(&f, &u, &cfg).unwrap(), objective(&f, &u, &scaled).unwrap());
            prop_assert!((es - s * e).abs() <= 1e-9 * es.abs().max(1.0));
        }
    }
}
