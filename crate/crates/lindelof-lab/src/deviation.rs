//! Normalized deviations |S(x,t) - main term| and grid scans over (x, t).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::mean::MeanModel;
use crate::numerics::fmt_real;
use crate::sequence::PointSequence;

/// Normalizers below this are treated as degenerate.
pub const TINY_NORMALIZER: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    /// M(x)^{1/2} |t|^eps.
    #[serde(rename = "LH_EPS")]
    LhEps,
    /// sqrt(M(x)) (sqrt(log(x+1)) + sqrt(log(|t|+1))) log(x+1).
    #[serde(rename = "PROB_BOUND")]
    ProbBound,
    /// N(x)^{1/2} |t|^eps with N the counting function of the sequence.
    #[serde(rename = "LH_TILDE")]
    LhTilde,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::LhEps => "LH_EPS",
            Normalization::ProbBound => "PROB_BOUND",
            Normalization::LhTilde => "LH_TILDE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LH_EPS" => Ok(Normalization::LhEps),
            "PROB_BOUND" => Ok(Normalization::ProbBound),
            "LH_TILDE" => Ok(Normalization::LhTilde),
            other => Err(LabError::InvalidInput(format!("unknown normalization {other}"))),
        }
    }

    /// Normalizer given M(x), N(x), x, t and eps.
    pub fn normalizer(self, m: f64, n: u64, x: f64, t: f64, eps: f64) -> f64 {
        match self {
            Normalization::LhEps => m.max(0.0).sqrt() * t.abs().powf(eps),
            Normalization::ProbBound => {
                let lx = (x + 1.0).ln();
                m.max(0.0).sqrt() * (lx.sqrt() + (t.abs() + 1.0).ln().sqrt()) * lx
            }
            Normalization::LhTilde => (n as f64).sqrt() * t.abs().powf(eps),
        }
    }
}

/// Raw and normalized deviation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deviation {
    pub raw: f64,
    pub normalized: f64,
}

/// |S(x,t) - main term| divided by the chosen normalizer.
pub fn deviation(
    seq: &PointSequence,
    model: &MeanModel,
    x: f64,
    t: f64,
    norm: Normalization,
    eps: f64,
) -> Result<Deviation> {
    let s = seq.exp_sum(x, t).value;
    deviation_from_sum(seq, model, x, t, s, norm, eps)
}

fn deviation_from_sum(
    seq: &PointSequence,
    model: &MeanModel,
    x: f64,
    t: f64,
    s: num_complex::Complex64,
    norm: Normalization,
    eps: f64,
) -> Result<Deviation> {
    if x < model.x0 {
        return Err(LabError::InvalidInput(format!("x = {x} below support start {}", model.x0)));
    }
    if matches!(norm, Normalization::LhEps | Normalization::LhTilde) && t.abs() <= 1.0 {
        return Err(LabError::InvalidInput(format!("|t| must exceed 1 for {}, got {t}", norm.name())));
    }
    let raw = (s - model.main_term(x, t)?).norm();
    let d = norm.normalizer(model.eval(x), seq.counting(x), x, t, eps);
    if !(d > TINY_NORMALIZER) {
        return Err(LabError::DivisionDegenerate(format!(
            "normalizer {d} at x = {x}, t = {t}"
        )));
    }
    Ok(Deviation {
        raw,
        normalized: raw / d,
    })
}

/// How t is chosen for each grid abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRule {
    /// Every listed t is paired with every x.
    Explicit(Vec<f64>),
    /// t = x^{1/b}.
    PowerOfX(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationEntry {
    pub x: f64,
    pub t: f64,
    pub raw_dev: Option<f64>,
    pub normalized_dev: Option<f64>,
    pub norm: Normalization,
    pub eps: f64,
    /// Error code when this point could not be evaluated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGrid {
    pub entries: Vec<DeviationEntry>,
}

pub const GRID_CSV_HEADER: &str = "x,t,raw_dev,normalized_dev,norm,eps";

impl DeviationGrid {
    /// Largest normalized deviation among the successful entries.
    pub fn max_normalized(&self) -> Option<f64> {
        self.entries
            .iter()
            .filter_map(|e| e.normalized_dev)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{GRID_CSV_HEADER}")?;
        for e in &self.entries {
            let raw = e.raw_dev.map_or_else(|| "nan".to_string(), fmt_real);
            let nd = match (&e.error, e.normalized_dev) {
                (Some(code), _) => code.clone(),
                (None, Some(v)) => fmt_real(v),
                (None, None) => "nan".to_string(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_real(e.x),
                fmt_real(e.t),
                raw,
                nd,
                e.norm.name(),
                fmt_real(e.eps)
            )?;
        }
        Ok(())
    }
}

/// Evaluates the deviation over a grid. Failures at single points are recorded
/// in the entry and do not abort the scan.
pub fn scan(
    seq: &PointSequence,
    model: &MeanModel,
    x_grid: &[f64],
    t_rule: &TRule,
    norm: Normalization,
    eps: f64,
) -> Result<DeviationGrid> {
    if x_grid.is_empty() {
        return Err(LabError::InvalidGrid("empty x grid".into()));
    }
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(LabError::InvalidGrid("non-finite x in grid".into()));
    }
    let mut xs = x_grid.to_vec();
    xs.sort_by(f64::total_cmp);
    let pairs: Vec<(f64, f64)> = match t_rule {
        TRule::Explicit(ts) => {
            if ts.is_empty() {
                return Err(LabError::InvalidGrid("empty t list".into()));
            }
            if ts.iter().any(|t| !t.is_finite()) {
                return Err(LabError::InvalidGrid("non-finite t in grid".into()));
            }
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, t))).collect()
        }
        TRule::PowerOfX(b) => {
            if !(*b > 0.0 && b.is_finite()) {
                return Err(LabError::InvalidGrid(format!("t = x^(1/B) needs B > 0, got {b}")));
            }
            xs.iter().map(|&x| (x, x.powf(1.0 / b))).collect()
        }
    };
    let entries: Vec<DeviationEntry> = pairs
        .par_iter()
        .map(|&(x, t)| {
            let r = deviation(seq, model, x, t, norm, eps);
            match r {
                Ok(d) => DeviationEntry {
                    x,
                    t,
                    raw_dev: Some(d.raw),
                    normalized_dev: Some(d.normalized),
                    norm,
                    eps,
                    error: None,
                },
                Err(e) => DeviationEntry {
                    x,
                    t,
                    raw_dev: None,
                    normalized_dev: None,
                    norm,
                    eps,
                    error: Some(e.name().to_string()),
                },
            }
        })
        .collect();
    Ok(DeviationGrid { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn integers_against_linear_model() {
        let seq = PointSequence::integers(100);
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let t = 1e4;
        let d = deviation(&seq, &model, 100.0, t, Normalization::LhEps, 0.1).unwrap();
        // independent evaluation of both sides
        let s: Complex64 = (1..=100)
            .map(|n| Complex64::from_polar(1.0, -t * (n as f64).ln()))
            .sum();
        let one_it = Complex64::new(1.0, -t);
        let main = Complex64::from_polar(100.0, -t * 100f64.ln()) / one_it;
        let raw = (s - main).norm();
        assert!((d.raw - raw).abs() < 1e-9);
        assert!((d.normalized - raw / (10.0 * t.powf(0.1))).abs() < 1e-9);
        assert!(d.normalized > 0.0);
    }

    #[test]
    fn insertion_beyond_x_is_harmless() {
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let a = PointSequence::integers(50);
        let mut v = a.values().to_vec();
        v.extend([60.5, 70.25]);
        let b = PointSequence::from_values(v).unwrap();
        let da = deviation(&a, &model, 40.0, 33.0, Normalization::ProbBound, 0.0).unwrap();
        let db = deviation(&b, &model, 40.0, 33.0, Normalization::ProbBound, 0.0).unwrap();
        assert_eq!(da, db);
    }

    #[test]
    fn small_t_rejected_for_lh_norm() {
        let seq = PointSequence::integers(10);
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let e = deviation(&seq, &model, 5.0, 0.5, Normalization::LhEps, 0.1).unwrap_err();
        assert_eq!(e.name(), "INVALID_INPUT");
    }

    #[test]
    fn degenerate_normalizer() {
        let seq = PointSequence::integers(10);
        let model = MeanModel::linear(1.0, 5.0).unwrap();
        let e = deviation(&seq, &model, 5.0, 3.0, Normalization::LhEps, 0.1).unwrap_err();
        assert_eq!(e.name(), "DIVISION_DEGENERATE");
    }

    #[test]
    fn scan_matches_pointwise() {
        let seq = PointSequence::integers(100);
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let g = scan(&seq, &model, &[100.0, 10.0], &TRule::PowerOfX(0.5), Normalization::LhEps, 0.1).unwrap();
        assert_eq!(g.entries.len(), 2);
        assert_eq!(g.entries[0].x, 10.0);
        for e in &g.entries {
            assert_eq!(e.t, e.x * e.x);
            let d = deviation(&seq, &model, e.x, e.t, Normalization::LhEps, 0.1).unwrap();
            assert_eq!(e.normalized_dev, Some(d.normalized));
        }
    }

    #[test]
    fn scan_rejects_empty_lists() {
        let seq = PointSequence::integers(10);
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let e = scan(&seq, &model, &[5.0], &TRule::Explicit(vec![]), Normalization::LhEps, 0.1);
        assert_eq!(e.unwrap_err().name(), "INVALID_GRID");
        let e = scan(&seq, &model, &[], &TRule::PowerOfX(1.0), Normalization::LhEps, 0.1);
        assert_eq!(e.unwrap_err().name(), "INVALID_GRID");
    }

    #[test]
    fn scan_flags_point_errors() {
        let seq = PointSequence::integers(10);
        let model = MeanModel::linear(1.0, 0.0).unwrap();
        let g = scan(&seq, &model, &[5.0], &TRule::Explicit(vec![0.5, 7.0]), Normalization::LhEps, 0.1).unwrap();
        assert_eq!(g.entries[0].error.as_deref(), Some("INVALID_INPUT"));
        assert!(g.entries[1].error.is_none());
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(GRID_CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().contains("INVALID_INPUT"));
    }
}
