//! Generalized number systems: all products of a finite list of generalized
//! primes up to a cutoff, with Chebyshev and prime counting sums.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::numerics::{integrate, ComplexSum, KahanSum, QuadOptions};
use crate::sequence::{ByteReader, PointSequence};

/// Default cap on the number of generated integers.
pub const DEFAULT_BUDGET: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BeurlingSystem {
    primes: Vec<f64>,
    cutoff: f64,
    integers: PointSequence,
    /// (p^nu, log p) sorted by value.
    atoms: Vec<(f64, f64)>,
    /// Running sums of atom weights.
    atom_prefix: Vec<f64>,
}

/// Rankin-type upper bound min over sigma of X^sigma prod (1 - p^-sigma)^-1 on the
/// number of products up to X.
pub fn estimate_count(primes: &[f64], cutoff: f64) -> f64 {
    let used: Vec<f64> = primes.iter().copied().filter(|&p| p <= cutoff).collect();
    let mut best = f64::INFINITY;
    for i in 1..=300 {
        let sigma = 0.01 * i as f64;
        let mut ln_bound = sigma * cutoff.ln();
        for &p in &used {
            ln_bound -= (-(-sigma * p.ln()).exp()).ln_1p();
        }
        best = best.min(ln_bound.exp());
    }
    best
}

/// Exact count of products up to X, stopping once `cap` is exceeded.
fn count_products(primes: &[f64], cutoff: f64, cap: u64) -> u64 {
    fn rec(primes: &[f64], start: usize, v: f64, x: f64, cap: u64, count: &mut u64) {
        *count += 1;
        if *count > cap {
            return;
        }
        for i in start..primes.len() {
            let w = v * primes[i];
            if w > x {
                break;
            }
            rec(primes, i, w, x, cap, count);
            if *count > cap {
                return;
            }
        }
    }
    let mut count = 0;
    rec(primes, 0, 1.0, cutoff, cap, &mut count);
    count
}

fn enumerate_branch(primes: &[f64], first: usize, cutoff: f64, out: &mut Vec<f64>) {
    fn rec(primes: &[f64], start: usize, v: f64, x: f64, out: &mut Vec<f64>) {
        out.push(v);
        for i in start..primes.len() {
            let w = v * primes[i];
            if w > x {
                break;
            }
            rec(primes, i, w, x, out);
        }
    }
    rec(primes, first, primes[first], cutoff, out);
}

#[derive(PartialEq)]
struct HeapItem(f64, usize, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    // reversed so that BinaryHeap pops the smallest value first
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Merges sorted lists and collapses equal values into multiplicities.
fn merge_sorted(lists: &[Vec<f64>]) -> (Vec<f64>, Vec<u64>) {
    let mut heap = BinaryHeap::with_capacity(lists.len());
    for (i, l) in lists.iter().enumerate() {
        if let Some(&v) = l.first() {
            heap.push(HeapItem(v, i, 0));
        }
    }
    let total: usize = lists.iter().map(Vec::len).sum();
    let mut values = Vec::with_capacity(total);
    let mut mult: Vec<u64> = Vec::with_capacity(total);
    while let Some(HeapItem(v, i, pos)) = heap.pop() {
        if values.last() == Some(&v) {
            *mult.last_mut().unwrap() += 1;
        } else {
            values.push(v);
            mult.push(1);
        }
        if let Some(&next) = lists[i].get(pos + 1) {
            heap.push(HeapItem(next, i, pos + 1));
        }
    }
    (values, mult)
}

/// Builds the number system generated by `primes` up to `cutoff` with the default budget.
pub fn generate(primes: &[f64], cutoff: f64) -> Result<BeurlingSystem> {
    generate_with_budget(primes, cutoff, DEFAULT_BUDGET)
}

pub fn generate_with_budget(primes: &[f64], cutoff: f64, budget: u64) -> Result<BeurlingSystem> {
    if let Some(p) = primes.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
        return Err(LabError::InvalidPrime(format!("generalized prime {p} is not a real > 1")));
    }
    if !(cutoff.is_finite() && cutoff >= 1.0) {
        return Err(LabError::InvalidInput(format!("cutoff must be a finite real >= 1, got {cutoff}")));
    }
    let mut sorted = primes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let estimate = estimate_count(&sorted, cutoff);
    if estimate > budget as f64 {
        let exact = count_products(&sorted, cutoff, budget);
        if exact > budget {
            return Err(LabError::BudgetExceeded(format!(
                "more than {budget} integers up to {cutoff} (estimate {estimate:.3e})"
            )));
        }
    }
    let usable = sorted.partition_point(|&p| p <= cutoff);
    let mut lists: Vec<Vec<f64>> = (0..usable)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            enumerate_branch(&sorted[..usable], i, cutoff, &mut out);
            out.sort_unstable_by(f64::total_cmp);
            out
        })
        .collect();
    lists.push(vec![1.0]);
    let (values, mult) = merge_sorted(&lists);
    let integers = PointSequence::new(values, mult)?;

    let mut atoms = Vec::new();
    for &p in &sorted[..usable] {
        let w = p.ln();
        let mut v = p;
        while v <= cutoff {
            atoms.push((v, w));
            v *= p;
        }
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(BeurlingSystem::from_parts(sorted, cutoff, integers, atoms))
}

impl BeurlingSystem {
    fn from_parts(primes: Vec<f64>, cutoff: f64, integers: PointSequence, atoms: Vec<(f64, f64)>) -> Self {
        let mut acc = KahanSum::new();
        let atom_prefix = atoms
            .iter()
            .map(|a| {
                acc.add(a.1);
                acc.value()
            })
            .collect();
        Self {
            primes,
            cutoff,
            integers,
            atoms,
            atom_prefix,
        }
    }

    pub fn primes(&self) -> &[f64] {
        &self.primes
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn integers(&self) -> &PointSequence {
        &self.integers
    }

    pub fn mangoldt_atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn check(&self, x: f64) -> Result<()> {
        if x > self.cutoff {
            return Err(LabError::CutoffExceeded(format!("x = {x} beyond cutoff {}", self.cutoff)));
        }
        Ok(())
    }

    /// Counting function of the generalized integers.
    pub fn n_count(&self, x: f64) -> Result<u64> {
        self.check(x)?;
        Ok(self.integers.counting(x))
    }

    /// Chebyshev function: sum of log p over atoms p^nu <= x.
    pub fn psi(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let i = self.atoms.partition_point(|a| a.0 <= x);
        Ok(if i == 0 { 0.0 } else { self.atom_prefix[i - 1] })
    }

    /// Chebyshev function recomputed prime by prime from the exponent bounds.
    pub fn psi_by_primes(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let mut acc = KahanSum::new();
        for &p in &self.primes {
            let mut v = p;
            let mut k = 0u32;
            while v <= x {
                k += 1;
                v *= p;
            }
            acc.add(k as f64 * p.ln());
        }
        Ok(acc.value())
    }

    /// Number of generalized primes <= x, counted with repetition.
    pub fn pi_count(&self, x: f64) -> Result<u64> {
        self.check(x)?;
        Ok(self.primes.partition_point(|&p| p <= x) as u64)
    }

    /// psi(x, t) = sum of log p (p^nu)^{-it} over atoms <= x.
    pub fn psi_twisted(&self, x: f64, t: f64) -> Result<Complex64> {
        self.check(x)?;
        let i = self.atoms.partition_point(|a| a.0 <= x);
        let mut acc = ComplexSum::new();
        for &(v, w) in &self.atoms[..i] {
            acc.add(Complex64::from_polar(w, -t * v.ln()));
        }
        Ok(acc.value())
    }

    /// R(x, t) = psi(x, t) - x^{1-it}/(1-it), and 0 for x < 1.
    pub fn big_r(&self, x: f64, t: f64) -> Result<Complex64> {
        if x < 1.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let main = Complex64::from_polar(x, -t * x.ln()) / Complex64::new(1.0, -t);
        Ok(self.psi_twisted(x, t)? - main)
    }

    /// pi(x, t) = sum over primes p <= x of p^{-it}.
    pub fn pi_twisted(&self, x: f64, t: f64) -> Result<Complex64> {
        self.check(x)?;
        let i = self.primes.partition_point(|&p| p <= x);
        let mut acc = ComplexSum::new();
        for &p in &self.primes[..i] {
            acc.add(Complex64::from_polar(1.0, -t * p.ln()));
        }
        Ok(acc.value())
    }

    /// r(x, t) = pi(x, t) - integral from p_1 to x of u^{-it}/log u, and 0 for x < 1.
    pub fn small_r(&self, x: f64, t: f64) -> Result<Complex64> {
        if x < 1.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let pi = self.pi_twisted(x, t)?;
        let p1 = match self.primes.first() {
            Some(&p) if p < x => p,
            _ => return Ok(pi),
        };
        // u = e^v turns u^{-it} du / log u into e^{v(1-it)} dv / v
        let (a, b) = (p1.ln(), x.ln());
        let panels = (t.abs() * (b - a) / std::f64::consts::PI).ceil() as usize + 1;
        let r = integrate(
            |v| Complex64::new(v, -t * v).exp() / v,
            a,
            b,
            panels,
            &QuadOptions::default(),
        )?;
        Ok(pi - r.value)
    }

    /// Pairs (x, |psi(x) - x| / sqrt(x)).
    pub fn rh_deviation(&self, x_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        x_grid
            .iter()
            .map(|&x| Ok((x, (self.psi(x)? - x).abs() / x.sqrt())))
            .collect()
    }

    /// Binary layout: magic `LLBS`, prime count and primes, cutoff, the integer
    /// sequence in the `LLSQ` layout, then atom count and (value, weight) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"LLBS")?;
        w.write_all(&(self.primes.len() as u64).to_le_bytes())?;
        for p in &self.primes {
            w.write_all(&p.to_le_bytes())?;
        }
        w.write_all(&self.cutoff.to_le_bytes())?;
        let mut seq = Vec::new();
        self.integers.write_binary(&mut seq)?;
        w.write_all(&(seq.len() as u64).to_le_bytes())?;
        w.write_all(&seq)?;
        w.write_all(&(self.atoms.len() as u64).to_le_bytes())?;
        for (v, wt) in &self.atoms {
            w.write_all(&v.to_le_bytes())?;
            w.write_all(&wt.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != b"LLBS" {
            return Err(LabError::Format("missing number system magic".into()));
        }
        let np = r.u64()? as usize;
        let primes = (0..np).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
        let cutoff = r.f64()?;
        let len = r.u64()? as usize;
        let integers = PointSequence::read_binary(r.take(len)?)?;
        let na = r.u64()? as usize;
        let mut atoms = Vec::with_capacity(na);
        for _ in 0..na {
            atoms.push((r.f64()?, r.f64()?));
        }
        if primes.windows(2).any(|w| w[0] > w[1]) || atoms.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(LabError::Format("number system data not sorted".into()));
        }
        Ok(Self::from_parts(primes, cutoff, integers, atoms))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(LabError::FileNotFound(path.display().to_string()));
        }
        Self::read_binary(&std::fs::read(path)?)
    }
}

/// Rational primes up to n by the sieve of Eratosthenes.
pub fn rational_primes(n: u64) -> Vec<f64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as f64);
            let mut k = i * i;
            while k <= n {
                composite[k] = true;
                k += i;
            }
        }
    }
    out
}
