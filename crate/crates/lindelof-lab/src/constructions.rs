//! Deterministic sequence builders: integer sequences with large exponential
//! sums on selected windows, density-one deletion sequences, phase-aligning
//! perturbations and the mollified comb mean.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mean::{MeanModel, MollifiedComb};
use crate::numerics::ComplexSum;
use crate::sequence::PointSequence;

/// One checked inequality at a witness point (x, t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Certificate file contents emitted by the builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub construction: String,
    pub params: serde_json::Value,
    pub witnesses: Vec<Witness>,
}

/// Result of one selection window of the block construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCertificate {
    pub m: u32,
    pub k: u32,
    #[serde(rename = "K")]
    pub big_k: u64,
    pub t: f64,
    /// Witness abscissa mK + m - 1, the last point of block K.
    pub x: f64,
    pub re_s: f64,
    /// +1 or -1, the sign of Re S before the window.
    pub sign: f64,
    pub lower_bound: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Guaranteed real part contributed by each selected block.
    pub c: f64,
    /// Measured constant in |S| >= c' min(k, m-k)/m x.
    pub c_prime: f64,
    pub pass: bool,
}

impl WindowCertificate {
    pub fn witness(&self) -> Witness {
        Witness {
            x: self.x,
            t: self.t,
            value: self.sign * self.re_s,
            bound: self.lower_bound,
            pass: self.pass,
        }
    }
}

/// beta = (1 + alpha/(4 pi))^{-1}.
pub fn window_beta(alpha: f64) -> f64 {
    1.0 / (1.0 + alpha / (4.0 * PI))
}

/// Smallest admissible next window end after `k`.
pub fn next_window(k: u64, alpha: f64) -> u64 {
    (k as f64 * (1.0 + alpha / (4.0 * PI))).ceil() as u64
}

/// Tightest chain of `count` windows starting at `k0`.
pub fn chain_windows(k0: u64, count: usize, alpha: f64) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = k0;
    for _ in 0..count {
        out.push(k);
        k = next_window(k, alpha);
    }
    out
}

/// Lower bound on the real part of one selected block of k residues out of m,
/// when every phase is within alpha of its ideal value.
pub fn block_guarantee(m: u32, k: u32, alpha: f64) -> f64 {
    let m_f = m as f64;
    if k == 1 {
        return (PI / m_f + alpha).cos();
    }
    let centre = (k as f64 - 1.0) / 2.0;
    let z: f64 = (0..k).map(|i| (2.0 * PI * (i as f64 - centre) / m_f).cos()).sum();
    z * (PI / m_f).cos() - k as f64 * alpha
}

fn phase(n: f64, t: f64) -> Complex64 {
    Complex64::from_polar(1.0, -t * n.ln())
}

/// Builds the block sequence {m j + delta : delta in D_j} for j = 1..=max K.
/// Outside windows D_j = {0, .., k-1}; inside the window (beta K, K] D_j is the
/// cyclic run of k residues whose summed phases at t = 2 pi K point furthest in
/// the direction of the sum accumulated before the window.
pub fn build_mk(
    m: u32,
    k: u32,
    k_list: &[u64],
    alpha: f64,
    seed_prefix: Option<&PointSequence>,
) -> Result<(PointSequence, Vec<WindowCertificate>)> {
    if m < 3 || k == 0 || k >= m {
        return Err(LabError::InvalidInput(format!("need m >= 3 and 0 < k < m, got m={m}, k={k}")));
    }
    if !(alpha > 0.0 && alpha < PI / 2.0 - PI / m as f64) {
        return Err(LabError::InvalidInput(format!("alpha {alpha} outside (0, pi/2 - pi/m)")));
    }
    let g = block_guarantee(m, k, alpha);
    if g <= 0.0 {
        return Err(LabError::InvalidInput(format!(
            "alpha {alpha} too large for m={m}, k={k}: no positive block guarantee"
        )));
    }
    if k_list.is_empty() {
        return Err(LabError::InvalidInput("empty window list".into()));
    }
    let beta = window_beta(alpha);
    for w in k_list.windows(2) {
        if w[1] < next_window(w[0], alpha) {
            return Err(LabError::WindowOverlap(format!(
                "window end {} must be at least {}",
                w[1],
                next_window(w[0], alpha)
            )));
        }
    }
    let m_f = m as f64;
    for &big_k in k_list {
        let t = 2.0 * PI * big_k as f64;
        let j = (beta * big_k as f64).floor() + 1.0;
        let d = (m - 1) as f64;
        let err = (t * (d / (m_f * j)).ln_1p() - t * d / (m_f * j)).abs();
        if err > alpha / 2.0 {
            return Err(LabError::PreconditionKTooSmall(format!(
                "phase error {err:.3e} exceeds alpha/2 = {:.3e} at K = {big_k}",
                alpha / 2.0
            )));
        }
    }
    let prefix: Vec<(f64, u64)> = seed_prefix.map(|p| p.iter().collect()).unwrap_or_default();
    let prefix_end = prefix.last().map_or(0.0, |p| p.0);
    let first_window = (beta * k_list[0] as f64).floor() as u64 + 1;
    if (m as u64 * first_window) as f64 <= prefix_end {
        return Err(LabError::InvalidInput(format!(
            "seed prefix reaches {prefix_end}, past the first window start"
        )));
    }

    let k_max = *k_list.last().unwrap();
    let mut values: Vec<f64> = prefix.iter().map(|p| p.0).collect();
    let mut mult: Vec<u64> = prefix.iter().map(|p| p.1).collect();
    let mut certs = Vec::with_capacity(k_list.len());
    let default_set: Vec<u32> = (0..k).collect();
    let mut j: u64 = 1;
    let mut prev_end: u64 = 0;
    let push_block = |values: &mut Vec<f64>, mult: &mut Vec<u64>, j: u64, set: &[u32]| {
        let base = m as u64 * j;
        let mut sorted: Vec<u32> = set.to_vec();
        sorted.sort_unstable();
        for d in sorted {
            let v = (base + d as u64) as f64;
            if v > prefix_end {
                values.push(v);
                mult.push(1);
            }
        }
    };
    for &big_k in k_list {
        let start = ((beta * big_k as f64).floor() as u64).max(prev_end);
        while j <= start {
            push_block(&mut values, &mut mult, j, &default_set);
            j += 1;
        }
        let t = 2.0 * PI * big_k as f64;
        let mut before = ComplexSum::new();
        for (v, c) in values.iter().zip(&mult) {
            before.add(phase(*v, t) * *c as f64);
        }
        let sign = if before.value().re >= 0.0 { 1.0 } else { -1.0 };
        while j <= big_k {
            let base = m as u64 * j;
            let terms: Vec<f64> = (0..m).map(|d| sign * phase((base + d as u64) as f64, t).re).collect();
            let mut best = (f64::NEG_INFINITY, 0u32);
            for s in 0..m {
                let r: f64 = (0..k).map(|i| terms[((s + i) % m) as usize]).sum();
                if r > best.0 {
                    best = (r, s);
                }
            }
            let set: Vec<u32> = (0..k).map(|i| (best.1 + i) % m).collect();
            push_block(&mut values, &mut mult, j, &set);
            j += 1;
        }
        let mut total = ComplexSum::new();
        for (v, c) in values.iter().zip(&mult) {
            total.add(phase(*v, t) * *c as f64);
        }
        let re_s = total.value().re;
        let lower_bound = (1.0 - beta) * g * big_k as f64 - g;
        let x = (m as u64 * big_k + m as u64 - 1) as f64;
        let kk = k.min(m - k) as f64;
        certs.push(WindowCertificate {
            m,
            k,
            big_k,
            t,
            x,
            re_s,
            sign,
            lower_bound,
            alpha,
            beta,
            c: g,
            c_prime: sign * re_s * m_f / (kk * x),
            pass: sign * re_s >= lower_bound,
        });
        prev_end = big_k;
    }
    debug_assert!(j == k_max + 1);
    let seq = PointSequence::new(values, mult)?;
    Ok((seq, certs))
}

/// The m = 3, k = 1 construction: n_j = 3 j + delta_j with delta_j in {0, 1, 2}.
pub fn build_thm2(
    k_list: &[u64],
    alpha: f64,
    seed_prefix: Option<&PointSequence>,
) -> Result<(PointSequence, Vec<WindowCertificate>)> {
    if !(alpha > 0.0 && alpha < PI / 6.0) {
        return Err(LabError::InvalidInput(format!("alpha {alpha} outside (0, pi/6)")));
    }
    build_mk(3, 1, k_list, alpha, seed_prefix)
}

/// Witness of one deletion window of the density-one construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Density1Witness {
    #[serde(rename = "M")]
    pub big_m: u64,
    pub eps: f64,
    pub m: u64,
    pub l: u64,
    pub k: u64,
    #[serde(rename = "J")]
    pub big_j: u64,
    pub beta: f64,
    pub t: f64,
    /// Witness abscissa M / beta.
    pub x: f64,
    pub s_abs: f64,
    /// 0.9 J l.
    pub threshold: f64,
    /// Measured |S| / (J l).
    pub c_double_prime: f64,
    pub max_phase_error: f64,
    pub deleted: Vec<u64>,
    pub pass: bool,
}

impl Density1Witness {
    pub fn witness(&self) -> Witness {
        Witness {
            x: self.x,
            t: self.t,
            value: self.s_abs,
            bound: self.threshold,
            pass: self.pass,
        }
    }
}

/// Window parameters (m, l, k, 1/beta, J, t) for a given M.
pub fn density1_params(big_m: u64, eps: f64) -> (u64, u64, u64, f64, u64, f64) {
    let mf = big_m as f64;
    let m = mf.powf(0.5 - eps).floor() as u64;
    let l = (m as f64).powf(1.0 - eps).floor() as u64;
    let k = m - l;
    let inv_beta = 1.0 + 1.0 / (8.0 * m as f64);
    let big_j = ((inv_beta - 1.0) * mf / m as f64).floor() as u64;
    let t = 2.0 * PI * mf * inv_beta / m as f64;
    (m, l, k, inv_beta, big_j, t)
}

/// Integers up to the last window end, minus the deletions made in each window
/// [M, M/beta). In every block of m consecutive integers only the arc of residues
/// around the phase-maximizing one is kept.
pub fn build_density1(m_list: &[u64], eps: f64) -> Result<(PointSequence, Vec<Density1Witness>)> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(LabError::InvalidInput(format!("eps {eps} outside (0, 1/4)")));
    }
    if m_list.is_empty() {
        return Err(LabError::InvalidInput("empty window list".into()));
    }
    for w in m_list.windows(2) {
        let (_, _, _, inv_beta, _, _) = density1_params(w[0], eps);
        let end = (w[0] as f64 * inv_beta).ceil() as u64;
        if w[1] <= end {
            return Err(LabError::WindowOverlap(format!("M = {} must exceed {end}", w[1])));
        }
    }
    let last = *m_list.last().unwrap();
    let (_, _, _, inv_beta_last, _, _) = density1_params(last, eps);
    let n_max = (last as f64 * inv_beta_last).floor() as u64;
    let mut keep = vec![true; n_max as usize + 1];
    keep[0] = false;
    let mut witnesses = Vec::with_capacity(m_list.len());
    for &big_m in m_list {
        let (m, l, k, inv_beta, big_j, t) = density1_params(big_m, eps);
        if m < 2 || l == 0 || big_j == 0 {
            return Err(LabError::PreconditionMTooSmall(format!(
                "M = {big_m} gives m = {m}, l = {l}, J = {big_j}"
            )));
        }
        let mut max_err: f64 = 0.0;
        for j in 1..=big_j {
            let base = (big_m + (j - 1) * m) as f64;
            for d in 0..m {
                let d_f = d as f64;
                let err = (t * (d_f / base).ln_1p() - 2.0 * PI * d_f / m as f64).abs();
                max_err = max_err.max(err);
            }
        }
        if max_err > 2.0 * PI / (4.0 * m as f64) {
            return Err(LabError::PreconditionMTooSmall(format!(
                "phase error {max_err:.3e} exceeds 2 pi/(4m) at M = {big_m}"
            )));
        }
        let mut before = ComplexSum::new();
        for n in 1..big_m {
            if keep[n as usize] {
                before.add(phase(n as f64, t));
            }
        }
        let sign = if before.value().re >= 0.0 { 1.0 } else { -1.0 };
        let half = k / 2;
        let mut deleted = Vec::new();
        for j in 1..=big_j {
            let base = big_m + (j - 1) * m;
            let mut best = (f64::NEG_INFINITY, 0u64);
            for d in 0..m {
                let r = sign * phase((base + d) as f64, t).re;
                if r > best.0 {
                    best = (r, d);
                }
            }
            let mut kept = vec![false; m as usize];
            for i in 0..=half {
                kept[((best.1 + i) % m) as usize] = true;
                kept[((best.1 + m - i % m) % m) as usize] = true;
            }
            for d in 0..m {
                if !kept[d as usize] {
                    keep[(base + d) as usize] = false;
                    deleted.push(base + d);
                }
            }
        }
        deleted.sort_unstable();
        let x = big_m as f64 * inv_beta;
        let mut s = ComplexSum::new();
        for n in 1..=(x.floor() as u64) {
            if keep[n as usize] {
                s.add(phase(n as f64, t));
            }
        }
        let s_abs = s.value().norm();
        let jl = (big_j * l) as f64;
        witnesses.push(Density1Witness {
            big_m,
            eps,
            m,
            l,
            k,
            big_j,
            beta: 1.0 / inv_beta,
            t,
            x,
            s_abs,
            threshold: 0.9 * jl,
            c_double_prime: s_abs / jl,
            max_phase_error: max_err,
            deleted,
            pass: s_abs >= 0.9 * jl,
        });
    }
    let values: Vec<f64> = (1..=n_max).filter(|&n| keep[n as usize]).map(|n| n as f64).collect();
    Ok((PointSequence::from_values(values)?, witnesses))
}

/// Output of [`adversarial_perturb`].
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub seq: PointSequence,
    /// Indices j < j0 (1-based) are never moved.
    pub j0: usize,
    pub moved: usize,
    /// Largest |phase - target| over moved points, reduced mod 2 pi.
    pub max_phase_residual: f64,
    /// sup_j |n_j' - n_j| / (b_j - a_j).
    pub distance: f64,
}

/// Phase tolerance for aligned points.
pub const PHASE_TOL: f64 = 1e-6;

fn wrap_phase(p: f64) -> f64 {
    let r = p.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Moves every point n_j <= x with j >= j0 inside its box, by less than eps
/// times the box width, so that its phase at t equals -arg F(x, t).
pub fn adversarial_perturb<F: Fn(f64, f64) -> Complex64>(
    seq: &PointSequence,
    boxes: &[(f64, f64)],
    f: F,
    eps: f64,
    x: f64,
    t: f64,
) -> Result<Perturbation> {
    let pts = seq.expanded();
    if boxes.len() != pts.len() {
        return Err(LabError::InvalidInput(format!(
            "{} boxes for {} points",
            boxes.len(),
            pts.len()
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(LabError::InvalidInput(format!("eps {eps} outside (0, 1]")));
    }
    for (i, (&n, &(a, b))) in pts.iter().zip(boxes).enumerate() {
        if !(a > 0.0 && b > a && n >= a && n <= b) {
            return Err(LabError::InvalidInput(format!(
                "point {n} at index {} not inside box [{a}, {b}]",
                i + 1
            )));
        }
    }
    let j0 = boxes
        .iter()
        .rposition(|&(a, b)| (b - a) / a > 1.0)
        .map_or(1, |i| i + 2);
    let active: Vec<usize> = (j0 - 1..pts.len()).filter(|&i| pts[i] <= x).collect();
    if let Some(min_w) = active.iter().map(|&i| boxes[i].1 - boxes[i].0).reduce(f64::min) {
        let need = 4.0 * PI * x / (eps * min_w);
        if t < need {
            return Err(LabError::InfeasibleT(format!("t = {t} below required {need}")));
        }
    }
    let fx = f(x, t);
    let target = if fx.norm() == 0.0 { 0.0 } else { -fx.arg() };
    let reach = eps * (1.0 - 1e-9);
    let mut out = pts.clone();
    let mut max_res: f64 = 0.0;
    let mut dist: f64 = 0.0;
    for &i in &active {
        let n = pts[i];
        let (a, b) = boxes[i];
        let w = b - a;
        let left = ((n - reach * w).max(a), n);
        let right = (n, (n + reach * w).min(b).min(x));
        let span = |iv: (f64, f64)| t * (iv.1 / iv.0).ln();
        let iv = if span(left) >= 2.0 * PI {
            left
        } else if span(right) >= 2.0 * PI {
            right
        } else {
            return Err(LabError::InfeasibleT(format!(
                "phase sweep inside the box of point {n} is shorter than 2 pi"
            )));
        };
        // -t ln u decreases on iv; pick the target branch inside [g(hi), g(lo)].
        let g_hi = -t * iv.1.ln();
        let level = target + 2.0 * PI * ((g_hi - target) / (2.0 * PI)).ceil();
        let (mut lo, mut hi) = iv;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if -t * mid.ln() > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = if (-t * lo.ln() - level).abs() < (-t * hi.ln() - level).abs() { lo } else { hi };
        let res = wrap_phase(-t * u.ln() - target).abs();
        if res > PHASE_TOL {
            return Err(LabError::InfeasibleT(format!(
                "phase residual {res:.3e} at point {n} exceeds tolerance"
            )));
        }
        max_res = max_res.max(res);
        dist = dist.max((u - n).abs() / w);
        out[i] = u;
    }
    Ok(Perturbation {
        seq: PointSequence::from_unsorted(out)?,
        j0,
        moved: active.len(),
        max_phase_residual: max_res,
        distance: dist,
    })
}

/// Clustering parameters: windows of half-width e^{-c n_j} around n_j hold at
/// most c1 sqrt(n_j) points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub c: f64,
    pub c1: f64,
}

/// Default log of the width cap for the comb bumps.
pub const DEFAULT_LN_LAMBDA_CAP: f64 = 700.0;

/// Smooth mean made of unit-mass bumps of half-width min(e^{-C n_j}, 1/lambda_cap)
/// centred at the sequence points.
pub fn mollified_mean(
    seq: &PointSequence,
    c_big: f64,
    ln_lambda_cap: f64,
    cluster: ClusterParams,
) -> Result<MeanModel> {
    if seq.is_empty() {
        return Err(LabError::InvalidInput("empty sequence".into()));
    }
    if !(c_big >= 1.0f64.max(2.0 * cluster.c)) {
        return Err(LabError::InvalidInput(format!(
            "C = {c_big} must be at least max(1, 2c) = {}",
            1.0f64.max(2.0 * cluster.c)
        )));
    }
    for (n, _) in seq.iter() {
        let w = (-cluster.c * n).exp();
        let count = seq.counting(n + w) - seq.counting_below(n - w) ;
        if count as f64 > cluster.c1 * n.sqrt() {
            return Err(LabError::ClusterViolation(format!(
                "{count} points within e^(-c n) of {n}, allowed {}",
                cluster.c1 * n.sqrt()
            )));
        }
    }
    let comb = MollifiedComb {
        centers: seq.values().to_vec(),
        weights: seq.multiplicities().iter().map(|&m| m as f64).collect(),
        ln_lambda: seq.values().iter().map(|&n| (c_big * n).min(ln_lambda_cap)).collect(),
    };
    Ok(MeanModel::mollified(comb))
}
