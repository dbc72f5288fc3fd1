//! Decomposition quality measures.
//!
//! * STR, the structure-to-texture ratio `10·log₁₀(‖u‖²/‖v‖²)` in dB;
//! * C0, the Pearson correlation of `u` and `v`;
//! * C1, the correlation of the structure gradient magnitude `|∇u|` with `|v|`;
//! * per-order nonzero counts of the difference stacks of `u`.
//!
//! Correlations are computed per channel and averaged over channels.

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, DecomposeConfig, DecompositionResult, Weight};
use crate::diff::{diff_stack, MAX_ORDER};
use crate::error::{Error, Result};
use crate::grid::{ChannelImage, ScalarField};

/// Magnitude above which a difference counts as nonzero.
pub const NONZERO_THRESHOLD: f64 = 1e-6;

/// STR tolerance used by [`match_str`].
pub const STR_TOLERANCE_DB: f64 = 0.1;
/// Log-scale weight bracket searched by [`match_str`].
pub const TUNING_BRACKET: (f64, f64) = (1e-5, 10.0);
pub const TUNING_MAX_PROBES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `+∞` when the texture is identically zero.
    pub str_db: f64,
    /// `None` when every channel is degenerate.
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    /// Nonzero counts of `Aₖu` for `k = 1..=max_order`, summed over channels.
    pub sparsity_profile: Vec<usize>,
    pub wall_time_s: f64,
}

impl MetricsReport {
    pub fn from_result(result: &DecompositionResult, max_order: usize, wall_time_s: f64) -> Result<Self> {
        let (u, v) = (&result.structure, &result.texture);
        let (c0, c1) = correlations_lenient(u, v)?;
        Ok(Self {
            str_db: str_or_inf(u, v)?,
            c0,
            c1,
            sparsity_profile: sparsity_profile(u, max_order)?,
            wall_time_s,
        })
    }
}

fn check_shapes(u: &ChannelImage, v: &ChannelImage) -> Result<()> {
    if u.same_shape(v) {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "structure {}×{}×{} vs texture {}×{}×{}",
            u.width(),
            u.height(),
            u.channels(),
            v.width(),
            v.height(),
            v.channels()
        )))
    }
}

/// Structure-to-texture ratio over all channels jointly.
pub fn str_db(u: &ChannelImage, v: &ChannelImage) -> Result<f64> {
    check_shapes(u, v)?;
    let tex = v.norm_sq();
    if tex == 0.0 {
        return Err(Error::InfiniteRatio);
    }
    Ok(10.0 * (u.norm_sq() / tex).log10())
}

/// [`str_db`] with a zero texture mapped to `+∞`.
pub fn str_or_inf(u: &ChannelImage, v: &ChannelImage) -> Result<f64> {
    match str_db(u, v) {
        Err(Error::InfiniteRatio) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Pearson correlation `cov(x, y) / sqrt(var(x)·var(y))`.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "correlation of {} and {} samples",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Degenerate("correlation needs at least 2 samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Per-pixel `sqrt(Dx² + Dy²)`.
pub fn gradient_magnitude(u: &ScalarField) -> ScalarField {
    let d = diff_stack(u, 1).expect("order 1 is supported");
    let (gx, gy) = (d.component(0), d.component(1));
    let data = gx.data().iter().zip(gy.data()).map(|(a, b)| a.hypot(*b)).collect();
    ScalarField::from_vec(u.width(), u.height(), data).expect("same shape")
}

fn channel_average(values: impl Iterator<Item = Result<f64>>, label: &str) -> Result<Option<f64>> {
    let mut kept = Vec::new();
    for (c, v) in values.enumerate() {
        match v {
            Ok(x) => kept.push(x),
            Err(Error::Degenerate(why)) => log::warn!("{label}: channel {c} excluded ({why})"),
            Err(e) => return Err(e),
        }
    }
    Ok((!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64))
}

fn correlations_lenient(u: &ChannelImage, v: &ChannelImage) -> Result<(Option<f64>, Option<f64>)> {
    check_shapes(u, v)?;
    let c0 = channel_average(
        (0..u.channels()).map(|c| correlation(u.channel_slice(c), v.channel_slice(c))),
        "C0",
    )?;
    let c1 = channel_average(
        (0..u.channels()).map(|c| {
            let grad = gradient_magnitude(&u.channel(c));
            let abs_v: Vec<f64> = v.channel_slice(c).iter().map(|x| x.abs()).collect();
            correlation(grad.data(), &abs_v)
        }),
        "C1",
    )?;
    Ok((c0, c1))
}

/// `(C0, C1)`, each averaged over non-degenerate channels.
pub fn structure_texture_correlations(u: &ChannelImage, v: &ChannelImage) -> Result<(f64, f64)> {
    match correlations_lenient(u, v)? {
        (Some(c0), Some(c1)) => Ok((c0, c1)),
        _ => Err(Error::Degenerate(
            "every channel has zero variance in structure or texture".into(),
        )),
    }
}

/// Nonzero counts of the order-1..=`max_order` stacks of `u`.
pub fn sparsity_profile(u: &ChannelImage, max_order: usize) -> Result<Vec<usize>> {
    sparsity_profile_with(u, max_order, NONZERO_THRESHOLD)
}

pub fn sparsity_profile_with(u: &ChannelImage, max_order: usize, tau: f64) -> Result<Vec<usize>> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(Error::Parameter(format!(
            "profile order must be in 1..={MAX_ORDER}, got {max_order}"
        )));
    }
    let mut counts = vec![0; max_order];
    for c in 0..u.channels() {
        let plane = u.channel(c);
        for (k, count) in counts.iter_mut().enumerate() {
            *count += diff_stack(&plane, k + 1)?.count_above(tau);
        }
    }
    Ok(counts)
}

/// Probe outcome during STR tuning.
#[derive(Debug, Clone, Copy)]
struct Probe {
    weight: f64,
    str_db: f64,
}

struct Tuner<'a> {
    f: &'a ChannelImage,
    cfg: &'a DecomposeConfig,
    tunable: Weight,
    target: f64,
    probes: usize,
    best: Option<Probe>,
}

impl Tuner<'_> {
    fn config(&self, weight: f64) -> DecomposeConfig {
        let mut c = self.cfg.clone();
        c.set_weight(self.tunable, weight);
        c
    }

    fn run(&mut self, weight: f64) -> Result<Probe> {
        let r = decompose(self.f, &self.config(weight))?;
        let p = Probe {
            weight,
            str_db: str_or_inf(&r.structure, &r.texture)?,
        };
        self.probes += 1;
        if self.best.is_none_or(|b| self.miss(&p) < self.miss(&b)) {
            self.best = Some(p);
        }
        Ok(p)
    }

    fn miss(&self, p: &Probe) -> f64 {
        (p.str_db - self.target).abs()
    }

    fn hit(&self, p: &Probe) -> bool {
        self.miss(p) <= STR_TOLERANCE_DB
    }

    fn below(&self, p: &Probe) -> bool {
        p.str_db < self.target
    }

    fn fail(&self, reason: String) -> Error {
        let b = self.best.expect("at least one probe ran");
        Error::TuningFailed {
            reason,
            best_str_db: b.str_db,
            best: Box::new(self.config(b.weight)),
        }
    }
}

/// Tunes one weight so the decomposition reaches `target` dB of STR within
/// [`STR_TOLERANCE_DB`], bisecting on a log scale inside [`TUNING_BRACKET`].
pub fn match_str(
    f: &ChannelImage,
    target: f64,
    cfg: &DecomposeConfig,
    tunable: Weight,
) -> Result<DecomposeConfig> {
    cfg.validate()?;
    let start = cfg.weight(tunable).ok_or_else(|| {
        Error::Parameter(format!("{tunable:?} is not a weight of the {} model", cfg.model))
    })?;
    let mut t = Tuner {
        f,
        cfg,
        tunable,
        target,
        probes: 0,
        best: None,
    };

    let first = t.run(start)?;
    if t.hit(&first) {
        return Ok(cfg.clone());
    }
    let mut lo = t.run(TUNING_BRACKET.0)?;
    let mut hi = t.run(TUNING_BRACKET.1)?;
    for p in [lo, hi] {
        if t.hit(&p) {
            return Ok(t.config(p.weight));
        }
    }
    if t.below(&lo) == t.below(&hi) {
        return Err(t.fail(format!(
            "target {target} dB outside [{:.3}, {:.3}] dB reachable in the bracket",
            lo.str_db.min(hi.str_db),
            lo.str_db.max(hi.str_db)
        )));
    }
    // the starting probe narrows the bracket when it lies inside
    if (TUNING_BRACKET.0..=TUNING_BRACKET.1).contains(&first.weight) {
        if t.below(&first) == t.below(&lo) {
            lo = first;
        } else {
            hi = first;
        }
    }
    while t.probes < TUNING_MAX_PROBES {
        let p = t.run((lo.weight * hi.weight).sqrt())?;
        if t.hit(&p) {
            return Ok(t.config(p.weight));
        }
        if t.below(&p) == t.below(&lo) {
            lo = p;
        } else {
            hi = p;
        }
    }
    Err(t.fail(format!(
        "no weight within {STR_TOLERANCE_DB} dB of {target} dB after {} probes",
        t.probes
    )))
}
