//! Oracles shared by the integration tests. Nothing here calls the library's
//! own zeta or enumeration code.

#![allow(dead_code)]

pub mod properties;

use num_complex::Complex64;

/// B_2, B_4, ..., B_20.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Riemann zeta by Euler-Maclaurin summation with ten correction terms.
pub fn classical_zeta(s: Complex64) -> Complex64 {
    let n = (s.norm() + 20.0).ceil() as u64;
    let nf = n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in (1..n).rev() {
        sum += (-s * (k as f64).ln()).exp();
    }
    let n_s = (-s * nf.ln()).exp();
    sum += n_s * nf / (s - 1.0) + 0.5 * n_s;
    // rising factorial s (s+1) ... (s+2k-2) over (2k)!, times N^{-s-2k+1}
    let mut coef = s / nf;
    let mut fact = 2.0;
    for (k, b) in BERNOULLI.iter().enumerate() {
        let j = k as f64 + 1.0;
        sum += b / fact * coef * n_s;
        coef *= (s + 2.0 * j - 1.0) * (s + 2.0 * j) / (nf * nf);
        fact *= (2.0 * j + 1.0) * (2.0 * j + 2.0);
    }
    sum
}

/// All products of primes (a multiset) up to the cutoff, sorted, with
/// multiplicity expanded. Each factorization is counted once.
pub fn brute_force_integers(primes: &[f64], cutoff: f64) -> Vec<f64> {
    let mut sorted = primes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    fn rec(primes: &[f64], start: usize, value: f64, cutoff: f64, out: &mut Vec<f64>) {
        out.push(value);
        for i in start..primes.len() {
            let v = value * primes[i];
            if v <= cutoff {
                rec(primes, i, v, cutoff, out);
            }
        }
    }
    if cutoff >= 1.0 {
        rec(&sorted, 0, 1.0, cutoff, &mut out);
    }
    out.sort_by(f64::total_cmp);
    out
}

/// Rational primes up to n by trial division.
pub fn trial_division_primes(n: u64) -> Vec<u64> {
    (2..=n)
        .filter(|&k| (2..).take_while(|d| d * d <= k).all(|d| k % d != 0))
        .collect()
}

/// Chebyshev psi over the rational primes by direct prime powers.
pub fn classical_psi(x: f64) -> f64 {
    let mut acc = 0.0;
    for p in trial_division_primes(x as u64) {
        let mut v = p as f64;
        while v <= x {
            acc += (p as f64).ln();
            v *= p as f64;
        }
    }
    acc
}
