//! Random sequence samplers driven by a mean model or by uniform windows around
//! j/A, and Monte Carlo statistics of their normalized deviations.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::Normalization;
use crate::error::{LabError, Result};
use crate::mean::{MeanKind, MeanModel};
use crate::numerics::{bisect_threshold, fmt_real, quantile};
use crate::sequence::PointSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SamplerKind {
    /// n_j drawn from dM restricted to (x_{j-1}, x_j].
    #[serde(rename = "THM5")]
    Quantile { model: MeanModel },
    /// Points j_{l-1}+1..=j_l drawn independently from dM/(j_l - j_{l-1}) on
    /// (x_{j_{l-1}}, x_{j_l}]. Blocks must satisfy j_l - j_{l-1} <= c sqrt(j_{l-1}),
    /// with sqrt(0) read as 1.
    #[serde(rename = "THM5_BLOCK")]
    Block {
        model: MeanModel,
        block_ends: Vec<u64>,
        c: f64,
    },
    /// n_j uniform on (j/A - K j^theta, j/A + K j^theta] intersected with (0, inf).
    #[serde(rename = "THM7")]
    Window {
        #[serde(rename = "A")]
        a: f64,
        #[serde(rename = "K")]
        k: f64,
        theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    #[serde(flatten)]
    pub kind: SamplerKind,
    #[serde(rename = "J")]
    pub j: u64,
    pub seed: u64,
}

/// 64-bit mixing step used to derive independent seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in a Monte Carlo run keyed by `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// Uniform draw in (0, 1] that depends only on (seed, index).
pub fn uniform_at(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let r = rng.next_u64();
    ((r >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// x_1..x_J with x_j = inf{x : M(x) >= j}.
pub fn quantiles_of(model: &MeanModel, j_max: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(j_max as usize);
    let mut prev = model.x0;
    for j in 1..=j_max {
        let y = j as f64;
        let x = match &model.kind {
            MeanKind::Linear { .. } | MeanKind::TabulatedStep { .. } => model.inverse(y)?,
            _ => bracketed_inverse(model, y, prev)?,
        };
        out.push(x);
        prev = x;
    }
    Ok(out)
}

/// Generalized inverse searched upward from a known lower point.
fn bracketed_inverse(model: &MeanModel, y: f64, lo: f64) -> Result<f64> {
    let lo = lo.max(model.x0);
    let mut step = lo.abs().max(1.0) * 1e-3;
    let mut hi = lo + step;
    let mut n = 0;
    while model.eval(hi) < y {
        step *= 2.0;
        hi = lo + step;
        n += 1;
        if n > 2000 || !hi.is_finite() {
            return Err(LabError::RootfindFail(format!("no bracket for level {y}")));
        }
    }
    Ok(bisect_threshold(|x| model.eval(x) >= y, lo, hi, 1e-12))
}

fn sample_level(model: &MeanModel, level: f64, lo: f64, hi: f64) -> Result<f64> {
    match &model.kind {
        MeanKind::Linear { .. } | MeanKind::TabulatedStep { .. } => model.inverse(level),
        _ => {
            if model.eval(hi) < level {
                return bracketed_inverse(model, level, lo);
            }
            Ok(bisect_threshold(|x| model.eval(x) >= level, lo, hi, 1e-12))
        }
    }
}

/// The window I_j = (j/A - K j^theta, j/A + K j^theta] cut to positive reals.
pub fn window_interval(j: u64, a: f64, k: f64, theta: f64) -> (f64, f64) {
    let c = j as f64 / a;
    let r = k * (j as f64).powf(theta);
    ((c - r).max(0.0), c + r)
}

impl SamplerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.j == 0 {
            return Err(LabError::InvalidInput("J must be positive".into()));
        }
        match &self.kind {
            SamplerKind::Quantile { .. } => Ok(()),
            SamplerKind::Block { block_ends, c, .. } => {
                if block_ends.last() != Some(&self.j) {
                    return Err(LabError::InvalidInput("last block end must equal J".into()));
                }
                let mut prev = 0u64;
                for &e in block_ends {
                    if e <= prev {
                        return Err(LabError::InvalidInput("block ends must increase".into()));
                    }
                    let allowed = c * (prev.max(1) as f64).sqrt();
                    if (e - prev) as f64 > allowed {
                        return Err(LabError::InvalidInput(format!(
                            "block ({prev}, {e}] longer than {allowed}"
                        )));
                    }
                    prev = e;
                }
                Ok(())
            }
            SamplerKind::Window { a, k, theta } => {
                if !(*a > 0.0 && *k > 0.0 && *theta > 0.0 && *theta < 1.0) {
                    return Err(LabError::InvalidInput(format!(
                        "need A, K > 0 and 0 < theta < 1 (A={a}, K={k}, theta={theta})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Mean model whose main term the samples are compared with.
    pub fn comparison_model(&self) -> Result<MeanModel> {
        match &self.kind {
            SamplerKind::Quantile { model } | SamplerKind::Block { model, .. } => Ok(model.clone()),
            SamplerKind::Window { a, .. } => MeanModel::linear(*a, 0.0),
        }
    }

    /// Last quantile point x_J (J/A for the window sampler).
    pub fn x_last(&self) -> Result<f64> {
        match &self.kind {
            SamplerKind::Quantile { model } | SamplerKind::Block { model, .. } => {
                Ok(*quantiles_of(model, self.j)?.last().unwrap())
            }
            SamplerKind::Window { a, .. } => Ok(self.j as f64 / a),
        }
    }
}

/// Draws the J points of `spec`. Point j depends only on (seed, j).
pub fn sample(spec: &SamplerSpec) -> Result<PointSequence> {
    spec.validate()?;
    let seed = spec.seed;
    let pts: Vec<f64> = match &spec.kind {
        SamplerKind::Quantile { model } => {
            let xs = quantiles_of(model, spec.j)?;
            (1..=spec.j)
                .into_par_iter()
                .map(|j| {
                    let lo = if j == 1 { model.x0 } else { xs[j as usize - 2] };
                    let hi = xs[j as usize - 1];
                    let level = (j - 1) as f64 + uniform_at(seed, j);
                    sample_level(model, level, lo, hi)
                })
                .collect::<Result<Vec<f64>>>()?
        }
        SamplerKind::Block { model, block_ends, .. } => {
            let xs = quantiles_of(model, spec.j)?;
            let mut start = 0u64;
            let mut ranges = Vec::with_capacity(block_ends.len());
            for &e in block_ends {
                ranges.push((start, e));
                start = e;
            }
            ranges
                .par_iter()
                .map(|&(s, e)| {
                    let lo = if s == 0 { model.x0 } else { xs[s as usize - 1] };
                    let hi = xs[e as usize - 1];
                    let size = (e - s) as f64;
                    ((s + 1)..=e)
                        .map(|j| sample_level(model, s as f64 + size * uniform_at(seed, j), lo, hi))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<Vec<f64>>>>()?
                .concat()
        }
        SamplerKind::Window { a, k, theta } => (1..=spec.j)
            .into_par_iter()
            .map(|j| {
                let (lo, hi) = window_interval(j, *a, *k, *theta);
                let u = uniform_at(seed, j);
                // u in (0, 1] keeps the draw inside (lo, hi]
                Ok(hi - (hi - lo) * (1.0 - u))
            })
            .collect::<Result<Vec<f64>>>()?,
    };
    PointSequence::from_unsorted(pts)
}

/// Range of indices j with u in I_j for the unit-density window sampler.
fn window_members(u: f64, k: f64, theta: f64) -> Vec<u64> {
    if u <= 0.0 {
        return Vec::new();
    }
    let hi_of = |j: u64| j as f64 + k * (j as f64).powf(theta);
    let lo_of = |j: u64| j as f64 - k * (j as f64).powf(theta);
    // smallest j with upper end >= u; the upper end is increasing in j
    let mut a = 1u64;
    let mut b = u.ceil().max(1.0) as u64;
    while a < b {
        let mid = a + (b - a) / 2;
        if hi_of(mid) >= u {
            b = mid;
        } else {
            a = mid + 1;
        }
    }
    let first = a;
    // the lower end increases from j* = (K theta)^{1/(1-theta)} onwards
    let j_star = (k * theta).powf(1.0 / (1.0 - theta)).ceil() as u64 + 1;
    let mut top = u.ceil().max(1.0) as u64;
    while lo_of(top) < u || top < j_star {
        top *= 2;
    }
    let (mut a, mut b) = (j_star.max(first), top);
    while a < b {
        let mid = a + (b - a).div_ceil(2);
        if lo_of(mid) < u {
            a = mid;
        } else {
            b = mid - 1;
        }
    }
    let last = a;
    (first..=last.max(j_star))
        .filter(|&j| lo_of(j) < u && u <= hi_of(j))
        .collect()
}

/// f(u) = (1/2K) sum over j with u in I_j of j^{-theta}, for A = 1.
pub fn f_density(u: f64, k: f64, theta: f64) -> f64 {
    window_members(u, k, theta)
        .into_iter()
        .map(|j| (j as f64).powf(-theta))
        .sum::<f64>()
        / (2.0 * k)
}

/// Exact integral of f over (1, x]: (1/2K) sum_j j^{-theta} |I_j cut to (1, x]|.
pub fn integral_f(x: f64, k: f64, theta: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    let mut acc = crate::numerics::KahanSum::new();
    let mut j = 1u64;
    loop {
        let (lo, hi) = window_interval(j, 1.0, k, theta);
        if lo >= x && j as f64 > x {
            break;
        }
        let len = hi.min(x) - lo.max(1.0);
        if len > 0.0 {
            acc.add((j as f64).powf(-theta) * len);
        }
        j += 1;
    }
    acc.value() / (2.0 * k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    /// Maximum normalized deviation over the grid, per trial; None for failed trials.
    pub per_trial_max: Vec<Option<f64>>,
    pub errors: Vec<Option<String>>,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub norm: Normalization,
    pub eps: f64,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    /// Tail bound 4 / ((x_J + 1)^{C^2/2} (|t| + 1)^{C^2/2}) at the smallest |t|.
    pub hoeffding_reference: f64,
    pub hoeffding_c: f64,
}

impl MonteCarloReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,max_normalized_dev")?;
        for (i, (v, e)) in self.per_trial_max.iter().zip(&self.errors).enumerate() {
            let cell = match (v, e) {
                (Some(v), _) => fmt_real(*v),
                (None, Some(e)) => e.clone(),
                (None, None) => "nan".into(),
            };
            writeln!(w, "{i},{cell}")?;
        }
        Ok(())
    }
}

/// Hoeffding tail 4 / ((x_J + 1)^{C^2/2} (|t| + 1)^{C^2/2}).
pub fn hoeffding_tail(x_j: f64, t: f64, c: f64) -> f64 {
    let e = c * c / 2.0;
    4.0 / ((x_j + 1.0).powf(e) * (t.abs() + 1.0).powf(e))
}

/// Constant C in the Hoeffding reference tail.
pub const DEFAULT_HOEFFDING_C: f64 = 2.0;

fn trial_max(
    spec: &SamplerSpec,
    model: &MeanModel,
    xs: &[f64],
    ts: &[f64],
    norm: Normalization,
    eps: f64,
) -> Result<f64> {
    let seq = sample(spec)?;
    let extra = matches!(spec.kind, SamplerKind::Window { .. });
    let theta = match spec.kind {
        SamplerKind::Window { theta, .. } => theta,
        _ => 0.0,
    };
    let mut best: f64 = 0.0;
    for &t in ts {
        let sums = seq.exp_sum_many(xs, t);
        for (&x, s) in xs.iter().zip(sums) {
            let raw = (s.value - model.main_term(x, t)?).norm();
            let mut d = norm.normalizer(model.eval(x), seq.counting(x), x, t, eps);
            if extra {
                d += x.powf(theta) + x.powf(1.0 - theta);
            }
            if !(d > crate::deviation::TINY_NORMALIZER) {
                return Err(LabError::DivisionDegenerate(format!("normalizer {d} at x = {x}, t = {t}")));
            }
            best = best.max(raw / d);
        }
    }
    Ok(best)
}

/// Runs `trials` independent samples and records the grid maximum of the
/// normalized deviation for each.
pub fn monte_carlo(
    spec: &SamplerSpec,
    trials: u64,
    x_grid: &[f64],
    t_grid: &[f64],
    norm: Normalization,
    eps: f64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(LabError::InvalidInput("trials must be at least 1".into()));
    }
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(LabError::InvalidGrid("empty Monte Carlo grid".into()));
    }
    spec.validate()?;
    let model = spec.comparison_model()?;
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let results: Vec<Result<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = spec.clone();
            s.seed = trial_seed(spec.seed, i);
            trial_max(&s, &model, &xs, &ts, norm, eps)
        })
        .collect();
    let per_trial_max: Vec<Option<f64>> = results.iter().map(|r| r.as_ref().ok().copied()).collect();
    let errors: Vec<Option<String>> = results
        .iter()
        .map(|r| r.as_ref().err().map(|e| e.name().to_string()))
        .collect();
    let mut ok: Vec<f64> = per_trial_max.iter().flatten().copied().collect();
    ok.sort_by(f64::total_cmp);
    let (q50, q90, q99) = if ok.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (quantile(&ok, 0.5), quantile(&ok, 0.9), quantile(&ok, 0.99))
    };
    let t_min = ts.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min);
    let x_j = spec.x_last()?;
    Ok(MonteCarloReport {
        trials,
        per_trial_max,
        errors,
        x_grid: xs,
        t_grid: ts,
        norm,
        eps,
        q50,
        q90,
        q99,
        hoeffding_reference: hoeffding_tail(x_j, t_min, DEFAULT_HOEFFDING_C),
        hoeffding_c: DEFAULT_HOEFFDING_C,
    })
}
