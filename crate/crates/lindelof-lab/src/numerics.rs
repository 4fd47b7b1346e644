//! Shared numerical kernels: compensated summation, adaptive Gauss-Kronrod
//! quadrature for complex integrands, Gauss-Legendre rules and bisection.

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Neumaier-compensated accumulator for real values.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex values (componentwise).
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Target error relative to the L1 mass of the integrand.
    pub rel_tol: f64,
    /// Absolute error floor for the whole interval.
    pub abs_tol: f64,
    pub max_evals: usize,
    pub max_depth: u32,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_evals: 200_000_000,
            max_depth: 60,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_err: f64,
    /// Estimate of the integral of |f|.
    pub l1: f64,
    pub evals: usize,
}

struct Gk {
    k: Complex64,
    err: f64,
    l1: f64,
}

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> Gk {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut l1 = fc.norm() * WGK[7];
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += (f1 + f2) * WGK[i];
        l1 += (f1.norm() + f2.norm()) * WGK[i];
        if i % 2 == 1 {
            g += (f1 + f2) * WG[i / 2];
        }
    }
    Gk {
        k: k * h,
        err: ((k - g) * h).norm(),
        l1: l1 * h.abs(),
    }
}

/// Integrates `f` over `[a, b]`, first splitting into `panels` equal pieces and
/// then bisecting each piece until its local error meets the tolerance.
pub fn integrate<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            abs_err: 0.0,
            l1: 0.0,
            evals: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(LabError::InvalidInput(format!(
            "quadrature limits must be finite, got [{a}, {b}]"
        )));
    }
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = ComplexSum::new();
    let mut err = KahanSum::new();
    let mut l1 = KahanSum::new();
    let mut evals = 0usize;
    let bounds: Vec<(f64, f64)> = (0..panels)
        .map(|p| {
            let pa = a + width * p as f64;
            let pb = if p + 1 == panels { b } else { a + width * (p + 1) as f64 };
            (pa, pb)
        })
        .collect();
    let first: Vec<Gk> = bounds.iter().map(|&(lo, hi)| gk15(&f, lo, hi)).collect();
    evals += 15 * panels;
    let l1_est: f64 = first.iter().map(|r| r.l1).sum();
    let mut stack: Vec<(f64, f64, u32, Option<Gk>)> = Vec::new();
    for ((pa, pb), r0) in bounds.into_iter().zip(first) {
        stack.push((pa, pb, 0, Some(r0)));
        while let Some((lo, hi, depth, pre)) = stack.pop() {
            let r = match pre {
                Some(r) => r,
                None => {
                    evals += 15;
                    gk15(&f, lo, hi)
                }
            };
            if evals > opts.max_evals {
                return Err(LabError::QuadratureNonconverged(format!(
                    "evaluation budget {} exhausted on [{a}, {b}]",
                    opts.max_evals
                )));
            }
            let share = ((hi - lo) / (b - a)).abs();
            let local_tol = (opts.rel_tol * l1_est.max(r.l1) * share)
                .max(opts.abs_tol * share)
                .max(50.0 * f64::EPSILON * r.l1);
            if r.err <= local_tol || r.l1 == 0.0 {
                total.add(r.k);
                err.add(r.err);
                l1.add(r.l1);
            } else if depth >= opts.max_depth {
                return Err(LabError::QuadratureNonconverged(format!(
                    "maximum bisection depth reached near [{lo}, {hi}]"
                )));
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((mid, hi, depth + 1, None));
                stack.push((lo, mid, depth + 1, None));
            }
        }
    }
    Ok(QuadResult {
        value: total.value(),
        abs_err: err.value(),
        l1: l1.value(),
        evals,
    })
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    opts: &QuadOptions,
) -> Result<(f64, f64)> {
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, panels, opts)?;
    Ok((r.value.re, r.abs_err))
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Bisection for the smallest x in [lo, hi] with `pred(x)` true, assuming
/// `pred` is monotone (false then true). Stops when the bracket is below
/// `rel_tol * max(1, |x|)`.
pub fn bisect_threshold<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= rel_tol * hi.abs().max(1.0) {
            break;
        }
    }
    hi
}

/// Ordinary least-squares slope and intercept of y against x.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Formats a real with 17 significant digits, the CSV convention of the crate.
pub fn fmt_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Exponential integral E1(z) on the principal branch, cut along the negative
/// real axis. Power series near the origin, continued fraction elsewhere.
pub fn exp_integral_e1(z: Complex64) -> Complex64 {
    let r = z.norm();
    let use_series = r < 2.0 || (z.re < 0.0 && z.im.abs() < 2.0 && r < 40.0);
    if use_series {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..500 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // modified Lentz on the even contraction of the continued fraction
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..200_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        let mut dd = an * d + b;
        if dd.norm() < tiny {
            dd = Complex64::new(tiny, 0.0);
        }
        d = 1.0 / dd;
        c = b + an / c;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        let del = c * d;
        h *= del;
        if (del - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}
