//! Finite non-decreasing point sequences with multiplicities, their counting
//! function and exponential sums.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numerics::{fmt_real, ComplexSum};

/// A finite non-decreasing multiset of positive reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceData", into = "SequenceData")]
pub struct PointSequence {
    values: Vec<f64>,
    mult: Vec<u64>,
    cum: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct SequenceData {
    values: Vec<f64>,
    multiplicities: Vec<u64>,
}

impl TryFrom<SequenceData> for PointSequence {
    type Error = LabError;
    fn try_from(d: SequenceData) -> Result<Self> {
        PointSequence::new(d.values, d.multiplicities)
    }
}

impl From<PointSequence> for SequenceData {
    fn from(s: PointSequence) -> Self {
        SequenceData {
            values: s.values,
            multiplicities: s.mult,
        }
    }
}

/// Value of an exponential sum together with a rounding-error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpSumResult {
    pub value: Complex64,
    pub terms_used: u64,
    pub est_roundoff: f64,
}

impl PointSequence {
    /// Builds a sequence from values and multiplicities; values must be
    /// finite, positive and non-decreasing, multiplicities at least 1.
    pub fn new(values: Vec<f64>, mult: Vec<u64>) -> Result<Self> {
        if values.len() != mult.len() {
            return Err(LabError::InvalidInput(format!(
                "{} values but {} multiplicities",
                values.len(),
                mult.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(LabError::InvalidInput(format!("point {i} = {v} is not a positive real")));
            }
            if i > 0 && values[i - 1] > *v {
                return Err(LabError::InvalidInput(format!(
                    "points not non-decreasing at index {i}: {} > {v}",
                    values[i - 1]
                )));
            }
        }
        if let Some(i) = mult.iter().position(|&m| m == 0) {
            return Err(LabError::InvalidInput(format!("multiplicity 0 at index {i}")));
        }
        // equal values are stored once with their multiplicities added
        let mut merged_v: Vec<f64> = Vec::with_capacity(values.len());
        let mut merged_m: Vec<u64> = Vec::with_capacity(mult.len());
        for (v, m) in values.into_iter().zip(mult) {
            match merged_v.last() {
                Some(&last) if last == v => *merged_m.last_mut().expect("parallel vectors") += m,
                _ => {
                    merged_v.push(v);
                    merged_m.push(m);
                }
            }
        }
        let mut s = PointSequence {
            values: merged_v,
            mult: merged_m,
            cum: Vec::new(),
        };
        s.rebuild_cum();
        Ok(s)
    }

    /// Builds a sequence of simple points (multiplicity 1).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, vec![1; n])
    }

    /// Sorts arbitrary positive values and builds a simple-point sequence.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        Self::from_values(values)
    }

    /// The integers 1..=n.
    pub fn integers(n: u64) -> Self {
        Self::from_values((1..=n).map(|k| k as f64).collect()).expect("integers are valid points")
    }

    fn rebuild_cum(&mut self) {
        let mut acc = 0u64;
        self.cum = self
            .mult
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.mult
    }

    /// Number of distinct stored entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of points counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.cum.last().copied().unwrap_or(0)
    }

    pub fn first(&self) -> Option<f64> {
        self.values.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// Number of entries with value <= x.
    pub fn index_upto(&self, x: f64) -> usize {
        self.values.partition_point(|&v| v <= x)
    }

    /// Counting function N(x), with multiplicity.
    pub fn counting(&self, x: f64) -> u64 {
        match self.index_upto(x) {
            0 => 0,
            i => self.cum[i - 1],
        }
    }

    /// Counting function just left of x, i.e. points strictly below x.
    pub fn counting_below(&self, x: f64) -> u64 {
        match self.values.partition_point(|&v| v < x) {
            0 => 0,
            i => self.cum[i - 1],
        }
    }

    /// Sum of n_j^{-it} over points <= x with compensated accumulation.
    pub fn exp_sum(&self, x: f64, t: f64) -> ExpSumResult {
        let end = self.index_upto(x);
        self.exp_sum_range(0, end, t)
    }

    /// Exponential sum over the stored entries `start..end`.
    pub fn exp_sum_range(&self, start: usize, end: usize, t: f64) -> ExpSumResult {
        let terms: u64 = self.mult[start..end].iter().sum();
        if t == 0.0 {
            return ExpSumResult {
                value: Complex64::new(terms as f64, 0.0),
                terms_used: terms,
                est_roundoff: 0.0,
            };
        }
        let mut acc = ComplexSum::new();
        let mut err = 0.0;
        for i in start..end {
            let phase = -t * self.values[i].ln();
            let (s, c) = phase.sin_cos();
            let m = self.mult[i] as f64;
            acc.add(Complex64::new(m * c, m * s));
            err += m * (phase.abs() + 2.0);
        }
        ExpSumResult {
            value: acc.value(),
            terms_used: terms,
            est_roundoff: 2.0 * f64::EPSILON * err,
        }
    }

    /// Exponential sums at every x of a non-decreasing grid in one pass.
    pub fn exp_sum_many(&self, xs_sorted: &[f64], t: f64) -> Vec<ExpSumResult> {
        let mut out = Vec::with_capacity(xs_sorted.len());
        let mut acc = ComplexSum::new();
        let mut err = 0.0;
        let mut terms = 0u64;
        let mut i = 0usize;
        for &x in xs_sorted {
            while i < self.values.len() && self.values[i] <= x {
                let m = self.mult[i];
                if t != 0.0 {
                    let phase = -t * self.values[i].ln();
                    let (s, c) = phase.sin_cos();
                    let mf = m as f64;
                    acc.add(Complex64::new(mf * c, mf * s));
                    err += mf * (phase.abs() + 2.0);
                }
                terms += m;
                i += 1;
            }
            out.push(if t == 0.0 {
                ExpSumResult {
                    value: Complex64::new(terms as f64, 0.0),
                    terms_used: terms,
                    est_roundoff: 0.0,
                }
            } else {
                ExpSumResult {
                    value: acc.value(),
                    terms_used: terms,
                    est_roundoff: 2.0 * f64::EPSILON * err,
                }
            });
        }
        out
    }

    /// Iterates over (value, multiplicity).
    pub fn iter(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.values.iter().copied().zip(self.mult.iter().copied())
    }

    /// Expands multiplicities into a flat list of values.
    pub fn expanded(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (v, m) in self.iter() {
            for _ in 0..m {
                out.push(v);
            }
        }
        out
    }

    /// Writes `value,multiplicity` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value,multiplicity")?;
        for (v, m) in self.iter() {
            writeln!(w, "{},{}", fmt_real(v), m)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        let mut mult = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                if line.trim() != "value,multiplicity" {
                    return Err(LabError::Format(format!("unexpected sequence header '{line}'")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let v = parts
                .next()
                .and_then(|p| p.trim().parse::<f64>().ok())
                .ok_or_else(|| LabError::Format(format!("bad value on line {}", lineno + 1)))?;
            let m = parts
                .next()
                .and_then(|p| p.trim().parse::<u64>().ok())
                .ok_or_else(|| LabError::Format(format!("bad multiplicity on line {}", lineno + 1)))?;
            values.push(v);
            mult.push(m);
        }
        Self::new(values, mult)
    }

    /// Little-endian binary layout: magic `LLSQ`, count, then (f64 value, u64 multiplicity) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"LLSQ")?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for (v, m) in self.iter() {
            w.write_all(&v.to_le_bytes())?;
            w.write_all(&m.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(4)? != b"LLSQ" {
            return Err(LabError::Format("missing sequence magic".into()));
        }
        let n = r.u64()? as usize;
        let mut values = Vec::with_capacity(n);
        let mut mult = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(r.f64()?);
            mult.push(r.u64()?);
        }
        Self::new(values, mult)
    }

    /// Loads a sequence file, choosing the format from the extension (`.csv` or binary).
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(LabError::FileNotFound(path.display().to_string()));
        }
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            let f = std::fs::File::open(path)?;
            Self::read_csv(std::io::BufReader::new(f))
        } else {
            Self::read_binary(&std::fs::read(path)?)
        }
    }
}

/// Cursor over a little-endian byte buffer.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(LabError::Format("unexpected end of binary data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
