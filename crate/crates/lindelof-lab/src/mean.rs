//! Smooth comparison functions M(x): evaluation, generalized inverse and the
//! twisted main term of integral u^{-it} dM(u).

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{bisect_threshold, integrate, integrate_real, QuadOptions};

/// Unit-mass smooth bumps centred at sequence points, bump j having half-width
/// exp(-ln_lambda[j]). Bumps narrower than the float spacing at their centre
/// are treated as point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifiedComb {
    pub centers: Vec<f64>,
    pub weights: Vec<f64>,
    pub ln_lambda: Vec<f64>,
}

impl MollifiedComb {
    fn half_width(&self, j: usize) -> f64 {
        (-self.ln_lambda[j]).exp()
    }

    /// True when bump j cannot be resolved in floating point around its centre.
    pub fn is_point_mass(&self, j: usize) -> bool {
        let c = self.centers[j];
        let w = self.half_width(j);
        c + w == c || c - w == c
    }

    fn support_start(&self) -> f64 {
        if self.centers.is_empty() {
            return 0.0;
        }
        if self.is_point_mass(0) {
            self.centers[0]
        } else {
            self.centers[0] - self.half_width(0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanKind {
    /// M(x) = a (x - x0).
    Linear { a: f64 },
    /// M(x) = integral over [1, x] of (1 - 1/u)/log u.
    LogIntegral,
    /// M(x) = Li(x) - Li(x^a) with 0 < a < 1.
    ShiftedLogIntegral { a: f64 },
    /// Right-continuous step function with jumps (position, size).
    TabulatedStep { jumps: Vec<(f64, f64)> },
    MollifiedComb(MollifiedComb),
}

/// A mean model M with support start x0, M(x0) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub x0: f64,
    pub kind: MeanKind,
    /// Relative tolerance for quadratures of the main term.
    #[serde(default = "default_tol")]
    pub rel_tol: f64,
}

fn default_tol() -> f64 {
    1e-10
}

/// Normalising constant of exp(-1/(1-v^2)) on (-1, 1).
fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| {
        let opts = QuadOptions {
            rel_tol: 1e-15,
            ..QuadOptions::default()
        };
        integrate_real(raw_bump, -1.0, 1.0, 8, &opts).expect("bump mass").0
    })
}

fn raw_bump(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - v * v)).exp()
    }
}

/// Unit-mass bump on (-1, 1).
pub fn bump(v: f64) -> f64 {
    raw_bump(v) / bump_mass()
}

/// Distribution function of [`bump`].
pub fn bump_cdf(v: f64) -> f64 {
    if v <= -1.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let opts = QuadOptions {
        rel_tol: 1e-14,
        ..QuadOptions::default()
    };
    let (lo, hi, flip) = if v <= 0.0 { (-1.0, v, false) } else { (v, 1.0, true) };
    let part = integrate_real(bump, lo, hi, 2, &opts).expect("bump cdf").0;
    if flip {
        1.0 - part
    } else {
        part
    }
}

/// Li(x) = sum_{n>=1} (ln x)^n / (n n!), the series of the defining integral.
pub fn log_integral(x: f64) -> f64 {
    if x <= 1.0 {
        return 0.0;
    }
    let l = x.ln();
    let mut p = 1.0;
    let mut sum = 0.0;
    let mut n = 1.0;
    loop {
        p *= l / n;
        let term = p / n;
        sum += term;
        if n > l && term < 1e-17 * sum {
            break;
        }
        n += 1.0;
    }
    sum
}

impl MeanModel {
    pub fn linear(a: f64, x0: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && x0 >= 0.0 && x0.is_finite()) {
            return Err(LabError::InvalidInput(format!("linear model needs a > 0, x0 >= 0 (a={a}, x0={x0})")));
        }
        Ok(Self {
            x0,
            kind: MeanKind::Linear { a },
            rel_tol: default_tol(),
        })
    }

    pub fn log_integral() -> Self {
        Self {
            x0: 1.0,
            kind: MeanKind::LogIntegral,
            rel_tol: default_tol(),
        }
    }

    pub fn shifted_log_integral(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(LabError::InvalidInput(format!("shift exponent must lie in (0,1), got {a}")));
        }
        Ok(Self {
            x0: 1.0,
            kind: MeanKind::ShiftedLogIntegral { a },
            rel_tol: default_tol(),
        })
    }

    /// Step model from explicit jumps; every jump must lie strictly above x0.
    pub fn step(x0: f64, mut jumps: Vec<(f64, f64)>) -> Result<Self> {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(&(p, s)) = jumps.iter().find(|(p, s)| *p <= x0 || *s < 0.0 || !p.is_finite()) {
            return Err(LabError::InvalidInput(format!("invalid jump ({p}, {s}) for x0 = {x0}")));
        }
        Ok(Self {
            x0,
            kind: MeanKind::TabulatedStep { jumps },
            rel_tol: default_tol(),
        })
    }

    /// M(x) = (1/k) floor(x - k + 1) for x >= k and 0 otherwise, tabulated up to x_max.
    pub fn floor_step(k: u32, x_max: f64) -> Result<Self> {
        if k == 0 {
            return Err(LabError::InvalidInput("step width k must be positive".into()));
        }
        let size = 1.0 / k as f64;
        let mut jumps = Vec::new();
        let mut p = k as f64;
        while p <= x_max {
            jumps.push((p, size));
            p += 1.0;
        }
        Self::step(k as f64 - 1.0, jumps)
    }

    pub fn mollified(comb: MollifiedComb) -> Self {
        Self {
            x0: comb.support_start(),
            kind: MeanKind::MollifiedComb(comb),
            rel_tol: default_tol(),
        }
    }

    pub fn with_tolerance(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    fn quad_opts(&self) -> QuadOptions {
        QuadOptions {
            rel_tol: self.rel_tol,
            ..QuadOptions::default()
        }
    }

    /// M(x); zero at and below x0.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x0 {
            return 0.0;
        }
        match &self.kind {
            MeanKind::Linear { a } => a * (x - self.x0),
            MeanKind::LogIntegral => log_integral(x),
            MeanKind::ShiftedLogIntegral { a } => log_integral(x) - log_integral(x.powf(*a)),
            MeanKind::TabulatedStep { jumps } => {
                let end = jumps.partition_point(|j| j.0 <= x);
                jumps[..end].iter().map(|j| j.1).sum()
            }
            MeanKind::MollifiedComb(c) => {
                let mut total = 0.0;
                for j in 0..c.centers.len() {
                    let ctr = c.centers[j];
                    if c.is_point_mass(j) {
                        if ctr <= x {
                            total += c.weights[j];
                        } else {
                            break;
                        }
                    } else {
                        let w = c.half_width(j);
                        if x >= ctr + w {
                            total += c.weights[j];
                        } else if x > ctr - w {
                            total += c.weights[j] * bump_cdf((x - ctr) / w);
                        } else {
                            break;
                        }
                    }
                }
                total
            }
        }
    }

    /// Density of the absolutely continuous part of dM at u (0 for step models).
    pub fn density(&self, u: f64) -> f64 {
        if u <= self.x0 {
            return 0.0;
        }
        match &self.kind {
            MeanKind::Linear { a } => *a,
            MeanKind::LogIntegral => (1.0 - 1.0 / u) / u.ln(),
            MeanKind::ShiftedLogIntegral { a } => (1.0 - u.powf(a - 1.0)) / u.ln(),
            MeanKind::TabulatedStep { .. } => 0.0,
            MeanKind::MollifiedComb(c) => {
                let mut total = 0.0;
                for j in 0..c.centers.len() {
                    if c.is_point_mass(j) {
                        continue;
                    }
                    let w = c.half_width(j);
                    let v = (u - c.centers[j]) / w;
                    if v.abs() < 1.0 {
                        total += c.weights[j] * bump(v) / w;
                    }
                }
                total
            }
        }
    }

    /// Integral of u^{-it} dM(u) over (x0, x].
    pub fn main_term(&self, x: f64, t: f64) -> Result<Complex64> {
        Ok(self.main_term_with_error(x, t)?.0)
    }

    /// Main term together with its quadrature error estimate.
    pub fn main_term_with_error(&self, x: f64, t: f64) -> Result<(Complex64, f64)> {
        if x < self.x0 {
            return Err(LabError::InvalidInput(format!("x = {x} below support start {}", self.x0)));
        }
        if t == 0.0 {
            return Ok((Complex64::new(self.eval(x), 0.0), 0.0));
        }
        match &self.kind {
            MeanKind::Linear { a } => {
                let one_it = Complex64::new(1.0, -t);
                let at = |u: f64| -> Complex64 {
                    if u == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -t * u.ln()).exp() * u
                    }
                };
                Ok(((at(x) - at(self.x0)) * *a / one_it, 0.0))
            }
            MeanKind::LogIntegral | MeanKind::ShiftedLogIntegral { .. } => {
                let shift = match &self.kind {
                    MeanKind::ShiftedLogIntegral { a } => Some(*a),
                    _ => None,
                };
                // In v = ln u the measure becomes (e^v - e^{a v})/v dv, or (e^v - 1)/v dv.
                let g = move |v: f64| -> f64 {
                    match shift {
                        Some(a) => (v.exp_m1() - (a * v).exp_m1()) / v,
                        None => v.exp_m1() / v,
                    }
                };
                let vmax = x.ln();
                let panels = (t.abs() * vmax / std::f64::consts::PI).ceil() as usize + 1;
                let r = integrate(
                    |v| Complex64::new(0.0, -t * v).exp() * g(v),
                    0.0,
                    vmax,
                    panels,
                    &self.quad_opts(),
                )?;
                Ok((r.value, r.abs_err))
            }
            MeanKind::TabulatedStep { jumps } => {
                let end = jumps.partition_point(|j| j.0 <= x);
                let mut acc = crate::numerics::ComplexSum::new();
                for &(p, s) in &jumps[..end] {
                    acc.add(Complex64::new(0.0, -t * p.ln()).exp() * s);
                }
                Ok((acc.value(), 0.0))
            }
            MeanKind::MollifiedComb(c) => self.comb_main_term(c, x, t),
        }
    }

    fn comb_main_term(&self, c: &MollifiedComb, x: f64, t: f64) -> Result<(Complex64, f64)> {
        let mut acc = crate::numerics::ComplexSum::new();
        let mut err = 0.0;
        let opts = self.quad_opts();
        for j in 0..c.centers.len() {
            let ctr = c.centers[j];
            if c.is_point_mass(j) {
                if ctr > x {
                    break;
                }
                acc.add(Complex64::new(0.0, -t * ctr.ln()).exp() * c.weights[j]);
                continue;
            }
            let w = c.half_width(j);
            if ctr - w >= x {
                break;
            }
            let vmax = ((x - ctr) / w).min(1.0);
            let span = ((ctr + w * vmax).ln() - (ctr - w).ln()).abs();
            let panels = (t.abs() * span / std::f64::consts::PI).ceil() as usize + 2;
            let r = integrate(
                |v| Complex64::new(0.0, -t * (ctr + w * v).ln()).exp() * bump(v),
                -1.0,
                vmax,
                panels,
                &opts,
            )?;
            acc.add(r.value * c.weights[j]);
            err += r.abs_err * c.weights[j];
        }
        Ok((acc.value(), err))
    }

    /// Generalized inverse inf{x : M(x) >= y}, located to relative accuracy 1e-12.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(self.x0);
        }
        match &self.kind {
            MeanKind::Linear { a } => Ok(self.x0 + y / a),
            MeanKind::TabulatedStep { jumps } => {
                let mut cum = 0.0;
                for &(p, s) in jumps {
                    cum += s;
                    if cum >= y * (1.0 - 1e-12) {
                        return Ok(p);
                    }
                }
                Err(LabError::RootfindFail(format!(
                    "level {y} exceeds the tabulated total {cum}"
                )))
            }
            _ => {
                let mut hi = self.x0 + 1.0;
                let mut steps = 0;
                while self.eval(hi) < y {
                    hi = self.x0 + 2.0 * (hi - self.x0);
                    steps += 1;
                    if steps > 2000 || !hi.is_finite() {
                        return Err(LabError::RootfindFail(format!("no bracket for level {y}")));
                    }
                }
                Ok(bisect_threshold(|x| self.eval(x) >= y, self.x0, hi, 1e-12))
            }
        }
    }

    /// Checks M(x) <= c x^alpha2 on the given grid.
    pub fn check_growth(&self, c: f64, alpha2: f64, grid: &[f64]) -> bool {
        grid.iter().all(|&x| self.eval(x) <= c * x.powf(alpha2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn linear_main_term_t0_is_length() {
        let m = MeanModel::linear(1.0, 1.0).unwrap();
        assert!((m.main_term(E, 0.0).unwrap().re - (E - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn log_integral_matches_quadrature() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            ..QuadOptions::default()
        };
        let (q, _) = integrate_real(|u| (1.0 - 1.0 / u) / u.ln(), 1.0, 10.0, 4, &opts).unwrap();
        assert!((log_integral(10.0) - q).abs() < 1e-12 * q);
        let m = MeanModel::log_integral();
        let t0 = m.main_term(10.0, 0.0).unwrap();
        assert!((t0.re - q).abs() < 1e-12 * q);
    }

    #[test]
    fn log_integral_twisted_matches_u_variable_quadrature() {
        let m = MeanModel::log_integral();
        let t = 3.0;
        let opts = QuadOptions {
            rel_tol: 1e-13,
            ..QuadOptions::default()
        };
        let oracle = integrate(
            |u| Complex64::new(0.0, -t * f64::ln(u)).exp() * ((1.0 - 1.0 / u) / u.ln()),
            1.0,
            50.0,
            64,
            &opts,
        )
        .unwrap()
        .value;
        let v = m.main_term(50.0, t).unwrap();
        assert!((v - oracle).norm() < 1e-9 * oracle.norm().max(1.0));
    }

    #[test]
    fn shifted_density_matches_difference() {
        let m = MeanModel::shifted_log_integral(0.75).unwrap();
        let x = 123.0;
        let h = 1e-4;
        let fd = (m.eval(x + h) - m.eval(x - h)) / (2.0 * h);
        assert!((fd - m.density(x)).abs() < 1e-7);
    }

    #[test]
    fn floor_step_quantiles() {
        let k = 3;
        let m = MeanModel::floor_step(k, 200.0).unwrap();
        assert_eq!(m.eval(k as f64 - 0.5), 0.0);
        assert!((m.eval(k as f64) - 1.0 / 3.0).abs() < 1e-15);
        for j in 1..20 {
            let x = m.inverse(j as f64).unwrap();
            // brute-force scan over the jump points
            let scan = (1..=200)
                .map(|p| p as f64)
                .find(|&p| m.eval(p) >= j as f64 * (1.0 - 1e-12))
                .unwrap();
            assert_eq!(x, scan);
            assert_eq!(x, (k * (j + 1) - 1) as f64);
        }
    }

    #[test]
    fn inverse_of_log_integral() {
        let m = MeanModel::log_integral();
        for j in [1.0, 10.0, 1000.0] {
            let x = m.inverse(j).unwrap();
            assert!((m.eval(x) - j).abs() < 1e-9 * j);
        }
    }

    #[test]
    fn bump_has_unit_mass() {
        assert!((bump_cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((bump_cdf(0.0) - 0.5).abs() < 1e-12);
        assert!(bump_cdf(-0.5) < 0.5);
    }

    #[test]
    fn growth_check() {
        let m = MeanModel::log_integral();
        assert!(m.check_growth(1.0, 1.0, &[2.0, 10.0, 1e6]));
        assert!(!m.check_growth(1.0, 0.5, &[1e6]));
    }
}
