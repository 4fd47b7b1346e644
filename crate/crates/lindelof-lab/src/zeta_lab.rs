//! Zeta functions of point sequences and generalized integer systems:
//! Dirichlet series, Euler products, continuation to the left of the abscissa
//! of convergence, Perron inversion, and a synthetic template whose Chebyshev
//! function carries explicit oscillating windows.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beurling::BeurlingSystem;
use crate::error::{LabError, Result};
use crate::numerics::{exp_integral_e1, fmt_real, gauss_legendre, least_squares, ComplexSum, KahanSum};
use crate::sequence::PointSequence;

/// Denominators smaller than this are reported as pole hits.
pub const POLE_TOL: f64 = 1e-8;
/// Points with |s - 1| below this are skipped by the convexity scan.
pub const NEAR_POLE_RADIUS: f64 = 0.25;
/// c in pi(x) <= c x / log x, valid for the rational primes and all x > 1.
pub const RATIONAL_PI_CONSTANT: f64 = 1.25506;
/// Relative agreement required between two Perron quadrature refinements.
pub const PERRON_REL_TOL: f64 = 1e-8;
/// Default panel height for the vertical-line quadrature.
pub const PERRON_QUAD_STEP: f64 = 0.25;
const PERRON_GL_ORDER: usize = 8;
const PERRON_MAX_DOUBLINGS: usize = 8;
/// Allowed growth of the measured convexity constant when the t range doubles.
pub const CONVEXITY_DRIFT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ZetaMethod {
    Series,
    Euler,
    Continued { x: f64 },
    Template,
}

impl ZetaMethod {
    pub fn label(&self) -> String {
        match self {
            ZetaMethod::Series => "SERIES".into(),
            ZetaMethod::Euler => "EULER".into(),
            ZetaMethod::Continued { x } => format!("CONTINUED({})", fmt_real(*x)),
            ZetaMethod::Template => "TEMPLATE".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaValue {
    pub value: Complex64,
    pub abs_error_bound: f64,
    pub method: ZetaMethod,
}

fn check_s(s: Complex64) -> Result<()> {
    if !(s.re.is_finite() && s.im.is_finite()) {
        return Err(LabError::InvalidInput(format!("non-finite s = {s}")));
    }
    Ok(())
}

/// Sum of m v^{-s} over the first `end` points, with a rounding estimate.
fn dirichlet_partial<I: Iterator<Item = (f64, f64)>>(terms: I, s: Complex64) -> (Complex64, f64) {
    let mut acc = ComplexSum::new();
    let mut mag = 0.0;
    for (v, w) in terms {
        let ln = v.ln();
        let r = w * (-s.re * ln).exp();
        acc.add(Complex64::from_polar(r, -s.im * ln));
        mag += r.abs() * (s.im.abs() * ln.abs() + 4.0);
    }
    (acc.value(), mag * f64::EPSILON)
}

fn seq_terms(seq: &PointSequence, end: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    seq.values()[..end]
        .iter()
        .zip(&seq.multiplicities()[..end])
        .map(|(&v, &m)| (v, m as f64))
}

/// Dirichlet series over the points up to `cutoff`, which must contain every
/// point of the system below it. The tail bound assumes N(x) <= tail_a x.
pub fn zeta_series(seq: &PointSequence, cutoff: f64, s: Complex64, tail_a: f64) -> Result<ZetaValue> {
    check_s(s)?;
    if !(s.re > 1.0) {
        return Err(LabError::SigmaTooSmall(format!("series needs Re s > 1, got {}", s.re)));
    }
    if !(cutoff >= 1.0 && tail_a >= 0.0 && tail_a.is_finite()) {
        return Err(LabError::InvalidInput(format!("cutoff {cutoff} and tail constant {tail_a}")));
    }
    let end = seq.index_upto(cutoff);
    let (value, rounding) = dirichlet_partial(seq_terms(seq, end), s);
    let sigma = s.re;
    let xs = cutoff.powf(1.0 - sigma);
    let tail = tail_a * sigma * xs / (sigma - 1.0) + tail_a * xs;
    Ok(ZetaValue {
        value,
        abs_error_bound: tail + rounding,
        method: ZetaMethod::Series,
    })
}

/// Series over the integers of a generated system, complete up to its cutoff.
pub fn zeta_series_system(system: &BeurlingSystem, s: Complex64, tail_a: f64) -> Result<ZetaValue> {
    zeta_series(system.integers(), system.cutoff(), s, tail_a)
}

/// Euler product over the listed primes <= `cutoff_p`.
///
/// With `pi_constant = None` the list is taken as the whole system and only the
/// listed primes above the cutoff enter the truncation bound. With
/// `Some(c)` the system may hold further primes, with pi(x) <= c x / log x.
pub fn zeta_euler(primes: &[f64], s: Complex64, cutoff_p: f64, pi_constant: Option<f64>) -> Result<ZetaValue> {
    check_s(s)?;
    if !(s.re > 1.0) {
        return Err(LabError::SigmaTooSmall(format!("Euler product needs Re s > 1, got {}", s.re)));
    }
    if let Some(&p) = primes.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
        return Err(LabError::InvalidPrime(format!("prime {p} must exceed 1")));
    }
    let sigma = s.re;
    let mut log_sum = ComplexSum::new();
    let mut count = 0usize;
    let mut tail = KahanSum::new();
    for &p in primes {
        if p <= cutoff_p {
            let z = (-s * p.ln()).exp();
            log_sum.add(-(Complex64::new(1.0, 0.0) - z).ln());
            count += 1;
        } else if pi_constant.is_none() {
            tail.add(-(1.0 - p.powf(-sigma)).ln());
        }
    }
    let tau = match pi_constant {
        None => tail.value(),
        Some(c) => {
            if !(cutoff_p > 1.0) {
                return Err(LabError::InvalidInput(format!("cutoff {cutoff_p} must exceed 1")));
            }
            let lp = cutoff_p.ln();
            let prime_tail = sigma * c * cutoff_p.powf(1.0 - sigma) / ((sigma - 1.0) * lp);
            prime_tail / (1.0 - cutoff_p.powf(-sigma))
        }
    };
    let value = log_sum.value().exp();
    let rounding = 4.0 * f64::EPSILON * (count as f64 + 1.0) * value.norm();
    Ok(ZetaValue {
        value,
        abs_error_bound: value.norm() * tau.exp_m1() + rounding,
        method: ZetaMethod::Euler,
    })
}

/// sup over u in [1, end] of |F(u) - a u| / u^theta for the right-continuous
/// step function F with jumps w at the points v. Between jumps the ratio is
/// monotone, so both sides of every jump suffice.
fn step_excess<I: Iterator<Item = (f64, f64)>>(points: I, a: f64, theta: f64, end: f64) -> f64 {
    let f = |u: f64, level: f64| (level - a * u).abs() / u.powf(theta);
    let mut level = 0.0;
    let mut prev = 1.0;
    let mut best: f64 = 0.0;
    let mut started = false;
    for (v, w) in points {
        if v > end {
            break;
        }
        if v <= 1.0 {
            level += w;
            continue;
        }
        if !started {
            best = best.max(f(1.0, level));
            started = true;
        }
        best = best.max(f(prev, level)).max(f(v, level));
        level += w;
        prev = v;
    }
    best.max(f(prev, level)).max(f(end.max(1.0), level))
}

/// N(u) = a u + O(u^theta) with the constant measured over the stored range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationModel {
    pub a: f64,
    pub theta: f64,
    /// sup |N(u) - a u| / u^theta over [1, range_end].
    pub c_e: f64,
    pub range_end: f64,
}

impl ContinuationModel {
    pub fn measure(seq: &PointSequence, a: f64, theta: f64) -> Result<Self> {
        let end = seq
            .last()
            .ok_or_else(|| LabError::InvalidInput("empty sequence".into()))?;
        Self::measure_upto(seq, a, theta, end)
    }

    /// Measures over [1, range_end]; the sequence must be complete up to there.
    pub fn measure_upto(seq: &PointSequence, a: f64, theta: f64, range_end: f64) -> Result<Self> {
        if !(a.is_finite() && theta.is_finite() && range_end >= 1.0) {
            return Err(LabError::InvalidInput(format!(
                "a = {a}, theta = {theta}, range end {range_end}"
            )));
        }
        let c_e = step_excess(seq.iter().map(|(v, m)| (v, m as f64)), a, theta, range_end);
        Ok(Self {
            a,
            theta,
            c_e,
            range_end,
        })
    }
}

/// Sum over points <= x of n^{-s} minus a x^{1-s}/(1-s), valid for Re s > theta.
pub fn zeta_continued(seq: &PointSequence, model: &ContinuationModel, s: Complex64, x: f64) -> Result<ZetaValue> {
    check_s(s)?;
    if !(s.re > model.theta) {
        return Err(LabError::SigmaBelowTheta(format!(
            "Re s = {} must exceed theta = {}",
            s.re, model.theta
        )));
    }
    if !(x >= 1.0) {
        return Err(LabError::InvalidInput(format!("x = {x} must be at least 1")));
    }
    if x > model.range_end {
        return Err(LabError::CutoffExceeded(format!(
            "x = {x} beyond measured range {}",
            model.range_end
        )));
    }
    let one_minus_s = Complex64::new(1.0, 0.0) - s;
    if one_minus_s.norm() < POLE_TOL {
        return Err(LabError::PoleProximity(format!("s = {s} at the pole")));
    }
    let end = seq.index_upto(x);
    let (partial, rounding) = dirichlet_partial(seq_terms(seq, end), s);
    let main = model.a * (one_minus_s * x.ln()).exp() / one_minus_s;
    let sigma = s.re;
    let bound = model.c_e * (1.0 + s.norm() / (sigma - model.theta)) * x.powf(model.theta - sigma);
    Ok(ZetaValue {
        value: partial - main,
        abs_error_bound: bound + rounding + 4.0 * f64::EPSILON * main.norm(),
        method: ZetaMethod::Continued { x },
    })
}

/// psi(u) = u + O(u^eps) with the constant measured over the system's range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogDerivModel {
    pub eps: f64,
    /// sup |psi(u) - u| / u^eps over [1, range_end].
    pub c: f64,
    pub range_end: f64,
}

impl LogDerivModel {
    pub fn measure(system: &BeurlingSystem, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(LabError::InvalidInput(format!("eps = {eps}")));
        }
        let end = system.cutoff();
        let c = step_excess(system.mangoldt_atoms().iter().copied(), 1.0, eps, end);
        Ok(Self { eps, c, range_end: end })
    }
}

/// -zeta'/zeta(s) as the Mangoldt sum over atoms <= x minus x^{1-s}/(1-s).
pub fn log_deriv(system: &BeurlingSystem, s: Complex64, x: f64, eps: f64) -> Result<ZetaValue> {
    let model = LogDerivModel::measure(system, eps)?;
    log_deriv_with(system, &model, s, x)
}

pub fn log_deriv_with(system: &BeurlingSystem, model: &LogDerivModel, s: Complex64, x: f64) -> Result<ZetaValue> {
    check_s(s)?;
    if !(s.re > model.eps) {
        return Err(LabError::SigmaTooSmall(format!(
            "Re s = {} must exceed eps = {}",
            s.re, model.eps
        )));
    }
    if !(x >= 1.0) {
        return Err(LabError::InvalidInput(format!("x = {x} must be at least 1")));
    }
    if x > system.cutoff() {
        return Err(LabError::CutoffExceeded(format!("x = {x} beyond cutoff {}", system.cutoff())));
    }
    let one_minus_s = Complex64::new(1.0, 0.0) - s;
    if one_minus_s.norm() < POLE_TOL {
        return Err(LabError::PoleProximity(format!("s = {s} at the pole")));
    }
    let atoms = system.mangoldt_atoms();
    let end = atoms.partition_point(|a| a.0 <= x);
    let (partial, rounding) = dirichlet_partial(atoms[..end].iter().copied(), s);
    let main = (one_minus_s * x.ln()).exp() / one_minus_s;
    let sigma = s.re;
    let bound = model.c * (1.0 + s.norm() / (sigma - model.eps)) * x.powf(model.eps - sigma);
    Ok(ZetaValue {
        value: partial - main,
        abs_error_bound: bound + rounding + 4.0 * f64::EPSILON * main.norm(),
        method: ZetaMethod::Continued { x },
    })
}

/// -zeta'/zeta(s) of the system generated by exactly the listed primes.
pub fn log_deriv_euler(primes: &[f64], s: Complex64) -> Result<Complex64> {
    check_s(s)?;
    if !(s.re > 0.0) {
        return Err(LabError::SigmaTooSmall(format!("Re s = {} must be positive", s.re)));
    }
    let mut acc = ComplexSum::new();
    for &p in primes {
        if !(p > 1.0 && p.is_finite()) {
            return Err(LabError::InvalidPrime(format!("prime {p} must exceed 1")));
        }
        let z = (-s * p.ln()).exp();
        acc.add(p.ln() * z / (1.0 - z));
    }
    Ok(acc.value())
}

/// Bound on the coefficients beyond the stored range: sum of |a_n| over
/// n <= u is at most `density * u` for every u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub density: f64,
    /// Every coefficient at or below this is listed explicitly.
    pub cutoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronResult {
    pub value: Complex64,
    pub x: f64,
    pub kappa: f64,
    #[serde(rename = "T")]
    pub t_height: f64,
    /// Quadrature refinement difference, or rounding of the closed form.
    pub numerical_error: f64,
    /// Propagated error of the integrand values.
    pub integrand_error: f64,
    /// x^kappa sum |a_j| / (n_j^kappa (1 + T |log(x/n_j)|)) over listed terms.
    pub truncation_bound: f64,
    /// The same sum over the unlisted terms, bounded through the tail density.
    pub tail_bound: f64,
    pub error_budget: f64,
    /// Quadrature panels of the accepted refinement; 0 for the closed form.
    pub panels: usize,
}

fn check_perron(x: f64, kappa: f64, t_height: f64, ns: impl Iterator<Item = f64>) -> Result<()> {
    if !(x > 0.0 && x.is_finite() && kappa > 0.0 && kappa.is_finite() && t_height > 0.0 && t_height.is_finite()) {
        return Err(LabError::InvalidInput(format!("x = {x}, kappa = {kappa}, T = {t_height}")));
    }
    for n in ns {
        if n == x {
            return Err(LabError::InvalidInput(format!("x = {x} coincides with a term")));
        }
    }
    Ok(())
}

/// Truncation sum of the effective Perron formula over the listed terms.
pub fn perron_truncation(magnitudes: &[(f64, f64)], x: f64, kappa: f64, t_height: f64) -> f64 {
    let mut acc = KahanSum::new();
    for &(n, a) in magnitudes {
        let l = (x / n).ln();
        acc.add(a.abs() * (kappa * l).exp() / (1.0 + t_height * l.abs()));
    }
    acc.value()
}

/// Bound on the truncation sum over the unlisted terms n > tail.cutoff.
pub fn perron_tail(tail: Option<TailBound>, x: f64, kappa: f64, t_height: f64) -> f64 {
    match tail {
        None => 0.0,
        Some(tb) => {
            if !(kappa > 1.0 && tb.cutoff > x) {
                return f64::INFINITY;
            }
            // sum over n > X of |a_n| n^{-kappa} <= density kappa X^{1-kappa} / (kappa - 1)
            let mass = tb.density * kappa * tb.cutoff.powf(1.0 - kappa) / (kappa - 1.0);
            x.powf(kappa) * mass / (1.0 + t_height * (tb.cutoff / x).ln())
        }
    }
}

/// (1/2 pi i) times the integral of F(s) x^s / s over the segment from
/// kappa - iT to kappa + iT, by composite Gauss-Legendre panels doubled until
/// two refinements agree. `f` returns the value and an absolute error bound.
/// `magnitudes` lists (n_j, |a_j|) of the Dirichlet coefficients of F.
pub fn perron_count<F>(
    f: F,
    magnitudes: &[(f64, f64)],
    tail: Option<TailBound>,
    x: f64,
    kappa: f64,
    t_height: f64,
    quad_step: f64,
) -> Result<PerronResult>
where
    F: Fn(Complex64) -> (Complex64, f64) + Sync,
{
    check_perron(x, kappa, t_height, magnitudes.iter().map(|m| m.0))?;
    if !(quad_step > 0.0 && quad_step.is_finite()) {
        return Err(LabError::InvalidInput(format!("quadrature step {quad_step}")));
    }
    let (nodes, weights) = gauss_legendre(PERRON_GL_ORDER);
    let ln_x = x.ln();
    let eval = |panels: usize| -> (Complex64, f64) {
        let h = 2.0 * t_height / panels as f64;
        let parts: Vec<(Complex64, f64)> = (0..panels)
            .into_par_iter()
            .map(|p| {
                let lo = -t_height + h * p as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                let mut err = 0.0;
                for (z, w) in nodes.iter().zip(&weights) {
                    let y = lo + 0.5 * h * (z + 1.0);
                    let s = Complex64::new(kappa, y);
                    let (fv, fe) = f(s);
                    let xs = (s * ln_x).exp();
                    let scale = 0.5 * h * w;
                    acc += fv * xs / s * scale;
                    err += fe * xs.norm() / s.norm() * scale;
                }
                (acc, err)
            })
            .collect();
        let mut sum = ComplexSum::new();
        let mut err = KahanSum::new();
        for (v, e) in parts {
            sum.add(v);
            err.add(e);
        }
        (sum.value() / (2.0 * PI), err.value() / (2.0 * PI))
    };
    let mut panels = (2.0 * t_height / quad_step).ceil().max(1.0) as usize;
    let mut prev = eval(panels);
    for _ in 0..PERRON_MAX_DOUBLINGS {
        panels *= 2;
        let cur = eval(panels);
        let diff = (cur.0 - prev.0).norm();
        if diff <= PERRON_REL_TOL * cur.0.norm().max(1.0) {
            let truncation_bound = perron_truncation(magnitudes, x, kappa, t_height);
            let tail_bound = perron_tail(tail, x, kappa, t_height);
            return Ok(PerronResult {
                value: cur.0,
                x,
                kappa,
                t_height,
                numerical_error: diff,
                integrand_error: cur.1,
                truncation_bound,
                tail_bound,
                error_budget: diff + cur.1 + truncation_bound + tail_bound,
                panels,
            });
        }
        prev = cur;
    }
    Err(LabError::QuadratureNonconverged(format!(
        "Perron quadrature did not settle with {panels} panels"
    )))
}

/// (1/2 pi i) times the integral of e^{sL} / s over the segment from kappa - iT
/// to kappa + iT, in closed form through the exponential integral.
pub fn perron_kernel(l: f64, kappa: f64, t_height: f64) -> Complex64 {
    if l == 0.0 {
        return Complex64::new((t_height / kappa).atan() / PI, 0.0);
    }
    let z_plus = -Complex64::new(kappa, t_height) * l;
    let z_minus = -Complex64::new(kappa, -t_height) * l;
    let diff = exp_integral_e1(z_minus) - exp_integral_e1(z_plus);
    let j = diff / Complex64::new(0.0, 2.0 * PI);
    if l > 0.0 {
        j + 1.0
    } else {
        j
    }
}

/// Perron integral of F = sum a_j n_j^{-s}, evaluated term by term in closed
/// form. Exact up to rounding for the listed terms, so only the truncation of
/// the Dirichlet series beyond the list enters besides the effective bound.
pub fn perron_dirichlet(
    terms: &[(f64, Complex64)],
    tail: Option<TailBound>,
    x: f64,
    kappa: f64,
    t_height: f64,
) -> Result<PerronResult> {
    check_perron(x, kappa, t_height, terms.iter().map(|t| t.0))?;
    let parts: Vec<(Complex64, f64)> = terms
        .par_iter()
        .map(|&(n, a)| {
            let l = (x / n).ln();
            let j = perron_kernel(l, kappa, t_height);
            let z = Complex64::new(kappa, t_height).norm() * l.abs();
            let rounding = a.norm() * f64::EPSILON * (16.0 + (kappa * l).exp() * (z + 16.0) / (1.0 + z));
            (a * j, rounding)
        })
        .collect();
    let mut sum = ComplexSum::new();
    let mut err = KahanSum::new();
    for (v, e) in parts {
        sum.add(v);
        err.add(e);
    }
    let magnitudes: Vec<(f64, f64)> = terms.iter().map(|&(n, a)| (n, a.norm())).collect();
    let truncation_bound = perron_truncation(&magnitudes, x, kappa, t_height);
    let tail_bound = perron_tail(tail, x, kappa, t_height);
    let numerical_error = err.value();
    Ok(PerronResult {
        value: sum.value(),
        x,
        kappa,
        t_height,
        numerical_error,
        integrand_error: 0.0,
        truncation_bound,
        tail_bound,
        error_budget: numerical_error + truncation_bound + tail_bound,
        panels: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityRow {
    pub sigma: f64,
    pub tau: f64,
    pub abs_zeta: f64,
    pub err_bound: f64,
    /// |zeta(s) - a/(s-1)|.
    pub regular_part: f64,
    pub c_measured: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexitySigma {
    pub sigma: f64,
    /// Largest constant with |t| up to half the largest |t|.
    pub lower_max: f64,
    /// Largest constant over the whole range.
    pub full_max: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub rows: Vec<ConvexityRow>,
    pub per_sigma: Vec<ConvexitySigma>,
    pub pass: bool,
    pub caveat: String,
}

/// Normalized size of zeta in the strip. Below sigma = 3/4 the normalization is
/// ((|t|+1)/(sigma-1/2))^{2-2 sigma}; from 3/4 on it is |t|^{2-2 sigma} log|t| + 1.
pub fn convexity_constant(abs_zeta: f64, sigma: f64, tau: f64) -> f64 {
    if sigma >= 0.75 {
        let at = tau.abs().max(1.0);
        abs_zeta / (at.powf(2.0 - 2.0 * sigma) * at.ln() + 1.0)
    } else {
        abs_zeta * ((sigma - 0.5) / (tau.abs() + 1.0)).powf(2.0 - 2.0 * sigma)
    }
}

/// Measures the convexity constant on a grid in the strip 1/2 < sigma <= 1,
/// evaluating zeta by continuation at the end of the measured range.
pub fn convexity_check(
    seq: &PointSequence,
    model: &ContinuationModel,
    sigma_grid: &[f64],
    tau_grid: &[f64],
) -> Result<ConvexityReport> {
    if sigma_grid.is_empty() || tau_grid.is_empty() {
        return Err(LabError::InvalidGrid("empty sigma or t grid".into()));
    }
    if let Some(s) = sigma_grid.iter().find(|&&s| !(s > 0.5 && s <= 1.0 && s > model.theta)) {
        return Err(LabError::InvalidGrid(format!(
            "sigma = {s} outside (max(1/2, theta), 1]"
        )));
    }
    if tau_grid.iter().any(|t| !t.is_finite()) {
        return Err(LabError::InvalidGrid("non-finite t".into()));
    }
    let pairs: Vec<(f64, f64)> = sigma_grid
        .iter()
        .flat_map(|&sg| tau_grid.iter().map(move |&t| (sg, t)))
        .filter(|&(sg, t)| (Complex64::new(sg - 1.0, t)).norm() >= NEAR_POLE_RADIUS)
        .collect();
    let x = model.range_end;
    let rows: Vec<ConvexityRow> = pairs
        .par_iter()
        .map(|&(sigma, tau)| {
            let s = Complex64::new(sigma, tau);
            let z = zeta_continued(seq, model, s, x)?;
            let abs_zeta = z.value.norm();
            Ok(ConvexityRow {
                sigma,
                tau,
                abs_zeta,
                err_bound: z.abs_error_bound,
                regular_part: (z.value - model.a / (s - 1.0)).norm(),
                c_measured: convexity_constant(abs_zeta, sigma, tau),
            })
        })
        .collect::<Result<_>>()?;
    let t_max = tau_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let mut sigmas = sigma_grid.to_vec();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let per_sigma: Vec<ConvexitySigma> = sigmas
        .iter()
        .map(|&sigma| {
            let mut lower_max: f64 = 0.0;
            let mut full_max: f64 = 0.0;
            for r in rows.iter().filter(|r| r.sigma == sigma) {
                full_max = full_max.max(r.c_measured);
                if r.tau.abs() <= 0.5 * t_max {
                    lower_max = lower_max.max(r.c_measured);
                }
            }
            ConvexitySigma {
                sigma,
                lower_max,
                full_max,
                stable: full_max <= CONVEXITY_DRIFT * lower_max,
            }
        })
        .collect();
    let pass = per_sigma.iter().all(|p| p.stable);
    Ok(ConvexityReport {
        rows,
        per_sigma,
        pass,
        caveat: "zero-freeness to the right of 1/2 cannot be decided from finite data; \
                 the constants are measured only on the sampled grid"
            .into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRow {
    pub tau: f64,
    pub abs_zeta: f64,
    pub method: ZetaMethod,
    pub err_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLineReport {
    pub rows: Vec<CriticalRow>,
    /// Least-squares slope of log|zeta| against log t.
    pub slope: f64,
    pub intercept: f64,
}

pub const CRITICAL_CSV_HEADER: &str = "tau,abs_zeta,method,err_bound";

impl CriticalLineReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CRITICAL_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_real(r.tau),
                fmt_real(r.abs_zeta),
                r.method.label(),
                fmt_real(r.err_bound)
            )?;
        }
        Ok(())
    }
}

/// |zeta(1/2 + it)| by continuation with x = |t|^B, B = 1/(1/2 - theta), and
/// the fitted growth exponent.
pub fn critical_line_scan(seq: &PointSequence, model: &ContinuationModel, tau_grid: &[f64]) -> Result<CriticalLineReport> {
    if tau_grid.is_empty() {
        return Err(LabError::InvalidGrid("empty t grid".into()));
    }
    if let Some(t) = tau_grid.iter().find(|t| !(t.abs() >= 2.0 && t.is_finite())) {
        return Err(LabError::InvalidGrid(format!("t = {t} must satisfy |t| >= 2")));
    }
    if !(model.theta < 0.5) {
        return Err(LabError::SigmaBelowTheta(format!("theta = {} must be below 1/2", model.theta)));
    }
    let b = 1.0 / (0.5 - model.theta);
    let mut taus = tau_grid.to_vec();
    taus.sort_by(f64::total_cmp);
    if let Some(&t) = taus.iter().find(|t| t.abs().powf(b) > model.range_end) {
        return Err(LabError::CutoffExceeded(format!(
            "t = {t} needs x = {} beyond {}",
            t.abs().powf(b),
            model.range_end
        )));
    }
    let rows: Vec<CriticalRow> = taus
        .par_iter()
        .map(|&tau| {
            let x = tau.abs().powf(b).max(1.0);
            let z = zeta_continued(seq, model, Complex64::new(0.5, tau), x)?;
            Ok(CriticalRow {
                tau,
                abs_zeta: z.value.norm(),
                method: z.method,
                err_bound: z.abs_error_bound,
            })
        })
        .collect::<Result<_>>()?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.abs_zeta > 0.0)
        .map(|r| (r.tau.abs().ln(), r.abs_zeta.ln()))
        .unzip();
    let (slope, intercept) = least_squares(&lx, &ly);
    Ok(CriticalLineReport { rows, slope, intercept })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhTildeRow {
    pub x: f64,
    pub n: u64,
    /// Sampled t with |t| >= N(x)^{1/2}.
    pub samples: usize,
    /// sup of |S(x,t)| / (N(x)^{1/2} |t|^eps) over the samples.
    pub sup_ratio: Option<f64>,
    pub t_at_sup: Option<f64>,
}

/// Per x, the largest |S(x,t)| / (N(x)^{1/2} |t|^eps) over the sampled
/// t with |t| >= N(x)^{1/2}.
pub fn lh_tilde_check(seq: &PointSequence, x_grid: &[f64], t_grid: &[f64], eps: f64) -> Result<Vec<LhTildeRow>> {
    if x_grid.is_empty() || t_grid.is_empty() {
        return Err(LabError::InvalidGrid("empty x or t grid".into()));
    }
    if x_grid.iter().chain(t_grid).any(|v| !v.is_finite()) {
        return Err(LabError::InvalidGrid("non-finite grid value".into()));
    }
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs
        .par_iter()
        .map(|&x| {
            let n = seq.counting(x);
            let root = (n as f64).sqrt();
            let mut best: Option<(f64, f64)> = None;
            let mut samples = 0;
            if n > 0 {
                for &t in t_grid.iter().filter(|t| t.abs() >= root) {
                    samples += 1;
                    let r = seq.exp_sum(x, t).value.norm() / (root * t.abs().powf(eps));
                    if best.is_none_or(|(b, _)| r > b) {
                        best = Some((r, t));
                    }
                }
            }
            LhTildeRow {
                x,
                n,
                samples,
                sup_ratio: best.map(|b| b.0),
                t_at_sup: best.map(|b| b.1),
            }
        })
        .collect())
}

/// One oscillating window of the template: dR = tau cos(tau log u) u^{beta-2} du
/// on [A, B].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemplateWindow {
    pub k: usize,
    pub ln_tau: f64,
    pub delta: f64,
    pub nu: f64,
    /// log A after snapping tau log A to a multiple of 2 pi.
    pub ln_a: f64,
    /// log B after snapping tau log B to a multiple of 2 pi.
    pub ln_b: f64,
    /// False when the window is empty (A >= B).
    pub admissible: bool,
}

impl TemplateWindow {
    pub fn tau(&self) -> f64 {
        self.ln_tau.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateZetaParams {
    pub beta: f64,
    pub windows: Vec<TemplateWindow>,
}

/// Moves ln u to the nearest value with tau ln u in 2 pi Z. When that multiple
/// is beyond double precision the value is left as is and the phase is
/// treated as zero symbolically.
fn snap_phase(ln_u: f64, tau: f64) -> f64 {
    let q = tau * ln_u / (2.0 * PI);
    if q.abs() < 4.5e15 {
        2.0 * PI * q.round() / tau
    } else {
        ln_u
    }
}

impl TemplateZetaParams {
    /// Windows from tau_k, delta_k and nu_k: A_k = tau^{1+delta}, B_k = tau^{nu}.
    pub fn new(beta: f64, taus: &[f64], deltas: &[f64], nus: &[f64]) -> Result<Self> {
        let ln_taus: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
        Self::from_log_taus(beta, &ln_taus, deltas, nus)
    }

    pub fn from_log_taus(beta: f64, ln_taus: &[f64], deltas: &[f64], nus: &[f64]) -> Result<Self> {
        if !(beta > 0.5 && beta < 1.0) {
            return Err(LabError::InvalidInput(format!("beta = {beta} outside (1/2, 1)")));
        }
        if ln_taus.len() != deltas.len() || ln_taus.len() != nus.len() {
            return Err(LabError::InvalidInput("tau, delta and nu lists differ in length".into()));
        }
        let mut windows = Vec::with_capacity(ln_taus.len());
        let mut prev = f64::NEG_INFINITY;
        for (i, ((&lt, &d), &nu)) in ln_taus.iter().zip(deltas).zip(nus).enumerate() {
            if !(lt > 0.0 && lt < 700.0 && lt > prev && d.is_finite() && nu.is_finite()) {
                return Err(LabError::InvalidInput(format!(
                    "window {}: log tau = {lt} must be increasing in (0, 700)",
                    i + 1
                )));
            }
            prev = lt;
            let tau = lt.exp();
            let ln_a = snap_phase((1.0 + d) * lt, tau);
            let ln_b = snap_phase(nu * lt, tau);
            windows.push(TemplateWindow {
                k: i + 1,
                ln_tau: lt,
                delta: d,
                nu,
                ln_a,
                ln_b,
                admissible: ln_a < ln_b,
            });
        }
        Ok(Self { beta, windows })
    }

    /// tau_k = e^{k^2}, delta_k = 1/k, nu_k = 2 - 1/k for k = 1..=k_max.
    pub fn default_schedule(beta: f64, k_max: usize) -> Result<Self> {
        let ln_taus: Vec<f64> = (1..=k_max).map(|k| (k * k) as f64).collect();
        let deltas: Vec<f64> = (1..=k_max).map(|k| 1.0 / k as f64).collect();
        let nus: Vec<f64> = (1..=k_max).map(|k| 2.0 - 1.0 / k as f64).collect();
        Self::from_log_taus(beta, &ln_taus, &deltas, &nus)
    }

    pub fn first_admissible(&self) -> Option<&TemplateWindow> {
        self.windows.iter().find(|w| w.admissible)
    }

    fn active(&self, k_max: usize) -> impl Iterator<Item = &TemplateWindow> {
        self.windows.iter().filter(move |w| w.admissible && w.k <= k_max)
    }
}

/// R_k(x): the window's contribution to the Chebyshev function at x.
pub fn template_r(window: &TemplateWindow, beta: f64, x: f64) -> f64 {
    let ln_x = x.ln();
    if !window.admissible || ln_x <= window.ln_a {
        return 0.0;
    }
    let w = beta - 1.0;
    let tau = window.tau();
    let ln_y = ln_x.min(window.ln_b);
    // tau log A and tau log B are multiples of 2 pi
    let phase = if ln_y == window.ln_b {
        0.0
    } else {
        tau * (ln_y - window.ln_a)
    };
    let top = Complex64::from_polar((w * ln_y).exp(), phase);
    let bottom = Complex64::new((w * window.ln_a).exp(), 0.0);
    ((top - bottom) / Complex64::new(w / tau, 1.0)).re
}

/// Upper bound 2 A_k^{beta-1} on |R_k|, summed over the active windows.
pub fn template_r_bound(params: &TemplateZetaParams, k_max: usize) -> f64 {
    params
        .active(k_max)
        .map(|w| 2.0 * ((params.beta - 1.0) * w.ln_a).exp())
        .sum()
}

/// psi_C(x) = x - log x - 1 + sum of R_k(x) over windows up to k_max.
pub fn template_psi(params: &TemplateZetaParams, x: f64, k_max: usize) -> Result<f64> {
    if !(x >= 1.0 && x.is_finite()) {
        return Err(LabError::InvalidInput(format!("x = {x} must be at least 1")));
    }
    let mut acc = KahanSum::new();
    acc.add(x);
    acc.add(-x.ln());
    acc.add(-1.0);
    for w in params.active(k_max) {
        acc.add(template_r(w, params.beta, x));
    }
    Ok(acc.value())
}

/// Mellin transform of dR_k at s, with the phase of A^{-s} and B^{-s} reduced
/// against the nearest of 0 and +-tau_k.
pub fn template_eta(window: &TemplateWindow, beta: f64, s: Complex64) -> Result<Complex64> {
    let tau = window.tau();
    let w_re = beta - 1.0 - s.re;
    let d_plus = Complex64::new(w_re, tau - s.im);
    let d_minus = Complex64::new(w_re, -tau - s.im);
    if d_plus.norm() < POLE_TOL || d_minus.norm() < POLE_TOL {
        return Err(LabError::PoleProximity(format!(
            "s = {s} at a pole of window {}",
            window.k
        )));
    }
    let f = [-tau, 0.0, tau]
        .into_iter()
        .map(|c| s.im - c)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(s.im);
    // tau u^{beta-1-s} with the reduced frequency
    let scaled_power = |ln_u: f64| Complex64::new(w_re * ln_u + window.ln_tau, -f * ln_u).exp();
    let diff = scaled_power(window.ln_b) - scaled_power(window.ln_a);
    Ok(0.5 * diff * (1.0 / d_plus + 1.0 / d_minus))
}

/// -zeta_C'/zeta_C(s) = 1/(s-1) - 1/s + sum of eta_k(s) over windows up to k_max.
pub fn template_logderiv(params: &TemplateZetaParams, s: Complex64, k_max: usize) -> Result<ZetaValue> {
    check_s(s)?;
    let sm1 = s - 1.0;
    if sm1.norm() < POLE_TOL || s.norm() < POLE_TOL {
        return Err(LabError::PoleProximity(format!("s = {s} at a pole")));
    }
    let mut acc = ComplexSum::new();
    acc.add(1.0 / sm1);
    acc.add(-1.0 / s);
    let mut rounding = 4.0 * f64::EPSILON * (1.0 / sm1.norm() + 1.0 / s.norm());
    for w in params.active(k_max) {
        let e = template_eta(w, params.beta, s)?;
        let f = (s.im.abs() - w.tau()).abs().min(s.im.abs());
        rounding += e.norm() * f64::EPSILON * (f * w.ln_b + 16.0);
        acc.add(e);
    }
    Ok(ZetaValue {
        value: acc.value(),
        abs_error_bound: rounding,
        method: ZetaMethod::Template,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beurling::{generate, rational_primes};
    use crate::numerics::{integrate, QuadOptions};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn euler_products_of_small_lists() {
        let v = zeta_euler(&[2.0], c(2.0, 0.0), 2.0, None).unwrap();
        assert!((v.value - c(4.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!(v.abs_error_bound < 1e-14);
        let v = zeta_euler(&[2.0, 3.0], c(2.0, 0.0), 10.0, None).unwrap();
        assert!((v.value - c(1.5, 0.0)).norm() < 1e-15);
        // dropping 3 from the product is covered by the bound
        let v = zeta_euler(&[2.0, 3.0], c(2.0, 0.0), 2.5, None).unwrap();
        assert!((v.value - c(1.5, 0.0)).norm() <= v.abs_error_bound);
        assert_eq!(zeta_euler(&[2.0], c(1.0, 3.0), 2.0, None).unwrap_err().name(), "SIGMA_TOO_SMALL");
    }

    #[test]
    fn series_of_a_single_point() {
        let seq = PointSequence::from_values(vec![1.0]).unwrap();
        let v = zeta_series(&seq, 1.0, c(1.7, -40.0), 0.0).unwrap();
        assert_eq!(v.value, c(1.0, 0.0));
        assert_eq!(zeta_series(&seq, 1.0, c(0.9, 0.0), 0.0).unwrap_err().name(), "SIGMA_TOO_SMALL");
    }

    #[test]
    fn continuation_agrees_with_series_right_of_one() {
        let seq = PointSequence::integers(20_000);
        let model = ContinuationModel::measure(&seq, 1.0, 0.0).unwrap();
        assert!((model.c_e - 1.0).abs() < 1e-3);
        for s in [c(2.0, 0.0), c(1.5, 7.0), c(3.0, -20.0)] {
            let a = zeta_series(&seq, 20_000.0, s, 1.0).unwrap();
            let b = zeta_continued(&seq, &model, s, 20_000.0).unwrap();
            assert!((a.value - b.value).norm() <= a.abs_error_bound + b.abs_error_bound);
        }
        let e = zeta_continued(&seq, &model, c(-0.1, 3.0), 100.0).unwrap_err();
        assert_eq!(e.name(), "SIGMA_BELOW_THETA");
        let e = zeta_continued(&seq, &model, c(0.5, 3.0), 30_000.0).unwrap_err();
        assert_eq!(e.name(), "CUTOFF_EXCEEDED");
    }

    #[test]
    fn step_excess_checks_both_sides() {
        // N jumps to 1 at u = 3 while a u grows: the sup sits just before the jump
        let seq = PointSequence::from_values(vec![3.0]).unwrap();
        let m = ContinuationModel::measure_upto(&seq, 1.0, 0.0, 3.5).unwrap();
        assert!((m.c_e - 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_deriv_of_one_prime() {
        let v = log_deriv_euler(&[2.0], c(2.0, 0.0)).unwrap();
        assert!((v.re - 2f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_deriv_of_rational_primes_at_two() {
        let sys = generate(&rational_primes(100_000), 100_000.0).unwrap();
        let v = log_deriv(&sys, c(2.0, 0.0), 100_000.0, 0.5).unwrap();
        // -zeta'/zeta(2) = 12 log A - gamma - log 2 pi with A the Glaisher constant
        let exact = 12.0 * 1.282_427_129_100_622_6f64.ln() - 0.577_215_664_901_532_9 - (2.0 * PI).ln();
        assert!((v.value.re - exact).abs() <= v.abs_error_bound);
        assert!(v.abs_error_bound < 1e-5);
    }

    #[test]
    fn perron_single_term() {
        let n1: f64 = 3.0;
        let f = |s: Complex64| ((-s * n1.ln()).exp(), 0.0);
        for (x, expect) in [(3.5, 1.0), (2.5, 0.0)] {
            let r = perron_count(f, &[(n1, 1.0)], None, x, 1.5, 300.0, PERRON_QUAD_STEP).unwrap();
            assert!((r.value.re - expect).abs() <= r.error_budget, "{r:?}");
            assert!(r.error_budget < 0.05);
        }
    }

    #[test]
    fn closed_form_kernel_matches_quadrature() {
        for &(l, kappa, t) in &[(0.3f64, 1.2, 50.0), (-0.2, 1.1, 80.0), (2.0, 0.5, 10.0), (-1.5, 2.0, 40.0)] {
            let r = integrate(
                |y| {
                    let s = c(kappa, y);
                    (s * l).exp() / s
                },
                -t,
                t,
                ((t * l.abs()) as usize).max(1) + 8,
                &QuadOptions::default(),
            )
            .unwrap();
            let quad = r.value / (2.0 * PI);
            let closed = perron_kernel(l, kappa, t);
            assert!((quad - closed).norm() < 1e-9, "{l} {quad} {closed}");
        }
    }

    #[test]
    fn perron_psi_of_two_primes() {
        let sys = generate(&[2.0, 3.0], 10_000.0).unwrap();
        let terms: Vec<(f64, Complex64)> = sys.mangoldt_atoms().iter().map(|&(v, w)| (v, c(w, 0.0))).collect();
        let mags: Vec<(f64, f64)> = sys.mangoldt_atoms().to_vec();
        let tail = Some(TailBound {
            density: 1.0,
            cutoff: 10_000.0,
        });
        let x: f64 = 10.5;
        let kappa = 1.0 + 1.0 / x.ln();
        let truth = 3.0 * 2f64.ln() + 2.0 * 3f64.ln();
        let closed = perron_dirichlet(&terms, tail, x, kappa, 200.0).unwrap();
        assert!((closed.value.re - truth).abs() <= closed.error_budget);
        let quad = perron_count(
            |s| (log_deriv_euler(&[2.0, 3.0], s).unwrap(), 0.0),
            &mags,
            tail,
            x,
            kappa,
            200.0,
            PERRON_QUAD_STEP,
        )
        .unwrap();
        assert!((quad.value.re - truth).abs() <= quad.error_budget);
        assert!((quad.value - closed.value).norm() <= closed.tail_bound + quad.numerical_error + 1e-9);
    }

    #[test]
    fn perron_rejects_x_on_a_term() {
        let e = perron_dirichlet(&[(5.0, c(1.0, 0.0))], None, 5.0, 1.5, 10.0).unwrap_err();
        assert_eq!(e.name(), "INVALID_INPUT");
    }

    #[test]
    fn template_windows_and_snapping() {
        let p = TemplateZetaParams::default_schedule(0.9, 6).unwrap();
        assert!(!p.windows[0].admissible);
        assert!(!p.windows[1].admissible);
        assert_eq!(p.first_admissible().unwrap().k, 3);
        for w in p.windows.iter().filter(|w| w.k <= 5) {
            let tau = w.tau();
            assert!((w.ln_a - (1.0 + w.delta) * w.ln_tau).abs() <= PI / tau * (1.0 + 1e-9));
            let q = tau * w.ln_b / (2.0 * PI);
            assert!((q - q.round()).abs() < 1e-4);
        }
        // below the first window the template is the smooth part alone
        let x = 1e5;
        assert_eq!(template_psi(&p, x, 6).unwrap(), x - x.ln() - 1.0);
    }

    #[test]
    fn template_r_matches_quadrature() {
        let p = TemplateZetaParams::from_log_taus(0.8, &[3.0], &[0.2], &[1.8]).unwrap();
        let w = p.windows[0];
        let tau = w.tau();
        // dR in v = log u is tau cos(tau v) e^{v (beta - 1)} dv, and tau log A is in 2 pi Z
        let r = integrate(
            |d| c(tau * (tau * d).cos() * ((w.ln_a + d) * (p.beta - 1.0)).exp(), 0.0),
            0.0,
            w.ln_b - w.ln_a,
            200,
            &QuadOptions::default(),
        )
        .unwrap();
        let closed = template_r(&w, p.beta, w.ln_b.exp());
        assert!((closed - r.value.re).abs() < 1e-9 * r.l1);
    }

    #[test]
    fn template_pole_detection() {
        let p = TemplateZetaParams::from_log_taus(0.8, &[3.0], &[0.2], &[1.8]).unwrap();
        let w = p.windows[0];
        let s = c(p.beta - 1.0, w.tau());
        assert_eq!(template_eta(&w, p.beta, s).unwrap_err().name(), "POLE_PROXIMITY");
        assert_eq!(template_logderiv(&p, c(1.0, 0.0), 1).unwrap_err().name(), "POLE_PROXIMITY");
    }

    #[test]
    fn lh_tilde_single_point() {
        let seq = PointSequence::from_values(vec![2.0]).unwrap();
        let rows = lh_tilde_check(&seq, &[5.0], &[3.0, 10.0], 0.1).unwrap();
        let r = rows[0].sup_ratio.unwrap();
        assert!(r <= 1.0);
        assert_eq!(rows[0].samples, 2);
    }

    #[test]
    fn critical_line_csv_header() {
        let seq = PointSequence::integers(10_000);
        let model = ContinuationModel::measure(&seq, 1.0, 0.0).unwrap();
        let rep = critical_line_scan(&seq, &model, &[10.0, 20.0, 50.0]).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(CRITICAL_CSV_HEADER));
        assert!(text.contains("CONTINUED("));
        let e = critical_line_scan(&seq, &model, &[200.0]).unwrap_err();
        assert_eq!(e.name(), "CUTOFF_EXCEEDED");
    }
}
