//! Dispatch of a config to the library and writing of the artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lindelof_lab::beurling::{generate_with_budget, rational_primes, BeurlingSystem, DEFAULT_BUDGET};
use lindelof_lab::constructions::{build_density1, build_mk, build_thm2, Certificate};
use lindelof_lab::numerics::fmt_real;
use lindelof_lab::random_models::{monte_carlo, sample, SamplerKind, SamplerSpec};
use lindelof_lab::zeta_lab::{
    convexity_check, critical_line_scan, log_deriv, perron_dirichlet, template_logderiv, zeta_continued,
    zeta_euler, zeta_series, ContinuationModel, TailBound, TemplateZetaParams, ZetaValue,
};
use lindelof_lab::{scan, LabError, PointSequence, TRule};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{config_err, write_manifest, CliError, CommandName, ExperimentConfig, Format};
use crate::params::*;
use crate::report;

/// Files written so far, relative to the output directory.
pub struct Outputs<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Self {
        Self { dir, files: Vec::new() }
    }

    pub fn with_writer(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.with_writer(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(|e| LabError::Io(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn params<P: DeserializeOwned>(config: &ExperimentConfig) -> Result<P, CliError> {
    serde_json::from_value(config.params.clone()).map_err(|e| config_err(format!("params: {e}")))
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| config_err(format!("missing {what}")))
}

/// Runs the command of `config`, writing outputs and the manifest.
pub fn run(config: &ExperimentConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output_dir)?;
    let mut out = Outputs::new(&config.output_dir);
    match config.command {
        CommandName::Construct => construct(config, params(config)?, &mut out)?,
        CommandName::Sample => sample_cmd(config, params(config)?, &mut out)?,
        CommandName::Beurling => beurling(params(config)?, &mut out)?,
        CommandName::Zeta => zeta(config, params(config)?, &mut out)?,
        CommandName::Scan => scan_cmd(config, params(config)?, &mut out)?,
        CommandName::Report => report::run(params(config)?, &mut out)?,
    }
    write_manifest(config, &out.files)
}

fn write_sequence(seq: &PointSequence, format: Format, out: &mut Outputs) -> Result<(), CliError> {
    out.with_writer("sequence.bin", |w| Ok(seq.write_binary(w)?))?;
    match format {
        Format::Csv => out.with_writer("sequence.csv", |w| Ok(seq.write_csv(w)?)),
        Format::Json => out.json(
            "sequence.json",
            &serde_json::json!({"values": seq.values(), "multiplicities": seq.multiplicities()}),
        ),
    }
}

fn construct(config: &ExperimentConfig, p: ConstructParams, out: &mut Outputs) -> Result<(), CliError> {
    let chosen = [p.thm2, p.mk, p.density1].iter().filter(|&&b| b).count();
    if chosen != 1 {
        return Err(config_err("exactly one of thm2, mk, density1 must be set"));
    }
    let (seq, name, witnesses, details) = if p.density1 {
        if p.alpha.is_some() || p.k_list.is_some() || p.m.is_some() || p.k.is_some() {
            return Err(config_err("density1 takes only m_list and eps"));
        }
        let (seq, wits) = build_density1(&need(p.m_list.clone(), "m_list")?, need(p.eps, "eps")?)?;
        let w = wits.iter().map(|w| w.witness()).collect();
        (seq, "density1", w, serde_json::to_value(&wits).expect("witnesses serialize"))
    } else {
        if p.m_list.is_some() || p.eps.is_some() {
            return Err(config_err("m_list and eps belong to density1"));
        }
        let alpha = need(p.alpha, "alpha")?;
        let ks = need(p.k_list.clone(), "k_list")?;
        let (seq, certs, name) = if p.thm2 {
            if p.m.is_some() || p.k.is_some() {
                return Err(config_err("thm2 fixes m = 3, k = 1"));
            }
            let (s, c) = build_thm2(&ks, alpha, None)?;
            (s, c, "thm2")
        } else {
            let (s, c) = build_mk(need(p.m, "m")?, need(p.k, "k")?, &ks, alpha, None)?;
            (s, c, "mk")
        };
        let w = certs.iter().map(|c| c.witness()).collect();
        (seq, name, w, serde_json::to_value(&certs).expect("certificates serialize"))
    };
    write_sequence(&seq, config.format, out)?;
    out.json(
        "certificates.json",
        &Certificate {
            construction: name.to_string(),
            params: config.params.clone(),
            witnesses,
        },
    )?;
    out.json("windows.json", &details)
}

fn block_ends(j: u64, c: f64) -> Vec<u64> {
    let mut ends = Vec::new();
    let mut prev = 0u64;
    while prev < j {
        let size = ((c * (prev.max(1) as f64).sqrt()).floor() as u64).max(1);
        prev = (prev + size).min(j);
        ends.push(prev);
    }
    ends
}

fn sample_cmd(config: &ExperimentConfig, p: SampleParams, out: &mut Outputs) -> Result<(), CliError> {
    let kind = match p.sampler {
        SamplerName::Quantile | SamplerName::Block => {
            if p.k.is_some() || p.theta.is_some() {
                return Err(config_err("k and theta belong to the window sampler"));
            }
            let model = mean_model(p.model, p.a, p.x0)?;
            if p.sampler == SamplerName::Quantile {
                if p.block_c.is_some() {
                    return Err(config_err("block_c belongs to the block sampler"));
                }
                SamplerKind::Quantile { model }
            } else {
                let c = need(p.block_c, "block_c")?;
                if !(c >= 1.0 && c.is_finite()) {
                    return Err(config_err(format!("block_c = {c} must be at least 1")));
                }
                SamplerKind::Block {
                    model,
                    block_ends: block_ends(p.j, c),
                    c,
                }
            }
        }
        SamplerName::Window => {
            if p.model.is_some() || p.x0.is_some() || p.block_c.is_some() {
                return Err(config_err("the window sampler takes a, k and theta only"));
            }
            SamplerKind::Window {
                a: p.a.unwrap_or(1.0),
                k: need(p.k, "k")?,
                theta: need(p.theta, "theta")?,
            }
        }
    };
    let spec = SamplerSpec {
        kind,
        j: p.j,
        seed: config.seed,
    };
    out.json("sampler.json", &spec)?;
    match p.trials {
        None => {
            if p.x_grid.is_some() || p.t_grid.is_some() || p.norm.is_some() || p.eps.is_some() {
                return Err(config_err("grids, norm and eps need trials"));
            }
            let seq = sample(&spec)?;
            write_sequence(&seq, config.format, out)
        }
        Some(trials) => {
            let norm = p.norm.unwrap_or(NormName::ProbBound).norm();
            let rep = monte_carlo(
                &spec,
                trials,
                &need(p.x_grid, "x_grid")?,
                &need(p.t_grid, "t_grid")?,
                norm,
                p.eps.unwrap_or(0.0),
            )?;
            out.json("monte_carlo.json", &rep)?;
            if config.format == Format::Csv {
                out.with_writer("monte_carlo.csv", |w| Ok(rep.write_csv(w)?))?;
            }
            Ok(())
        }
    }
}

fn prime_list(primes: Option<Vec<f64>>, rational: Option<u64>) -> Result<Vec<f64>, CliError> {
    match (primes, rational) {
        (Some(p), None) => Ok(p),
        (None, Some(n)) => Ok(rational_primes(n)),
        (None, None) => Err(config_err("give primes or rational")),
        (Some(_), Some(_)) => Err(config_err("primes and rational are exclusive")),
    }
}

fn beurling(p: BeurlingParams, out: &mut Outputs) -> Result<(), CliError> {
    let primes = prime_list(p.primes, p.rational)?;
    let sys = generate_with_budget(&primes, p.cutoff, p.budget.unwrap_or(DEFAULT_BUDGET))?;
    out.with_writer("system.bin", |w| Ok(sys.write_binary(w)?))?;
    let xs = p.x_grid.unwrap_or_else(|| vec![p.cutoff]);
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let psi = sys.psi(x)?;
        rows.push((x, sys.n_count(x)?, psi, sys.pi_count(x)?, psi - x));
    }
    out.with_writer("counts.csv", |w| {
        writeln!(w, "x,n_count,psi,pi_count,psi_minus_x")?;
        for (x, n, psi, pi, d) in &rows {
            writeln!(w, "{},{n},{},{pi},{}", fmt_real(*x), fmt_real(*psi), fmt_real(*d))?;
        }
        Ok(())
    })?;
    out.json(
        "system.json",
        &serde_json::json!({
            "primes": sys.primes().len(),
            "cutoff": sys.cutoff(),
            "integers": sys.integers().total(),
            "distinct_integers": sys.integers().len(),
            "mangoldt_atoms": sys.mangoldt_atoms().len(),
        }),
    )
}

fn load_sequence(p: &ZetaParams) -> Result<PointSequence, CliError> {
    match (&p.sequence, p.integers) {
        (Some(path), None) => Ok(PointSequence::load(path)?),
        (None, Some(n)) => Ok(PointSequence::integers(n)),
        (None, None) => Err(config_err("give sequence or integers")),
        (Some(_), Some(_)) => Err(config_err("sequence and integers are exclusive")),
    }
}

fn load_system(p: &ZetaParams) -> Result<BeurlingSystem, CliError> {
    match &p.system {
        Some(path) => {
            if p.primes.is_some() || p.rational.is_some() {
                return Err(config_err("system excludes primes and rational"));
            }
            Ok(BeurlingSystem::load(path)?)
        }
        None => {
            let primes = prime_list(p.primes.clone(), p.rational)?;
            Ok(generate_with_budget(&primes, need(p.cutoff, "cutoff")?, DEFAULT_BUDGET)?)
        }
    }
}

fn grid_points(p: &ZetaParams) -> Result<Vec<Complex64>, CliError> {
    let sig = need(p.sigma.clone(), "sigma")?;
    let tau = need(p.tau.clone(), "tau")?;
    Ok(sig.iter().flat_map(|&s| tau.iter().map(move |&t| Complex64::new(s, t))).collect())
}

/// sup N(u)/u over the stored points, the density constant of the series tail.
fn measured_tail_a(seq: &PointSequence) -> f64 {
    let mut acc = 0u64;
    seq.iter()
        .map(|(v, m)| {
            acc += m;
            acc as f64 / v
        })
        .fold(0.0, f64::max)
}

fn write_values(rows: &[(Complex64, ZetaValue)], format: Format, out: &mut Outputs) -> Result<(), CliError> {
    match format {
        Format::Csv => out.with_writer("zeta.csv", |w| {
            writeln!(w, "sigma,tau,re,im,abs_error_bound,method")?;
            for (s, z) in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    fmt_real(s.re),
                    fmt_real(s.im),
                    fmt_real(z.value.re),
                    fmt_real(z.value.im),
                    fmt_real(z.abs_error_bound),
                    z.method.label()
                )?;
            }
            Ok(())
        }),
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(s, z)| serde_json::json!({"sigma": s.re, "tau": s.im, "value": z}))
                .collect();
            out.json("zeta.json", &v)
        }
    }
}

fn zeta(config: &ExperimentConfig, p: ZetaParams, out: &mut Outputs) -> Result<(), CliError> {
    match p.method {
        ZetaMethodName::Series => {
            let seq = load_sequence(&p)?;
            let cutoff = p.cutoff.or(seq.last()).ok_or_else(|| config_err("empty sequence"))?;
            let tail_a = p.tail_a.unwrap_or_else(|| measured_tail_a(&seq));
            let rows = grid_points(&p)?
                .into_iter()
                .map(|s| Ok((s, zeta_series(&seq, cutoff, s, tail_a)?)))
                .collect::<Result<Vec<_>, LabError>>()?;
            write_values(&rows, config.format, out)
        }
        ZetaMethodName::Euler => {
            let primes = prime_list(p.primes.clone(), p.rational)?;
            let cutoff = p.cutoff.unwrap_or(f64::INFINITY);
            let rows = grid_points(&p)?
                .into_iter()
                .map(|s| Ok((s, zeta_euler(&primes, s, cutoff, p.pi_constant)?)))
                .collect::<Result<Vec<_>, LabError>>()?;
            write_values(&rows, config.format, out)
        }
        ZetaMethodName::Continued => {
            let seq = load_sequence(&p)?;
            let model = ContinuationModel::measure(&seq, p.a.unwrap_or(1.0), p.theta.unwrap_or(0.0))?;
            let x = p.x.unwrap_or(model.range_end);
            let rows = grid_points(&p)?
                .into_iter()
                .map(|s| Ok((s, zeta_continued(&seq, &model, s, x)?)))
                .collect::<Result<Vec<_>, LabError>>()?;
            out.json("continuation_model.json", &model)?;
            write_values(&rows, config.format, out)
        }
        ZetaMethodName::LogDeriv => {
            let sys = load_system(&p)?;
            let x = p.x.unwrap_or(sys.cutoff());
            let eps = p.eps.unwrap_or(0.5);
            let rows = grid_points(&p)?
                .into_iter()
                .map(|s| Ok((s, log_deriv(&sys, s, x, eps)?)))
                .collect::<Result<Vec<_>, LabError>>()?;
            write_values(&rows, config.format, out)
        }
        ZetaMethodName::Template => {
            let k_max = p.k_max.unwrap_or(6);
            let params = TemplateZetaParams::default_schedule(need(p.beta, "beta")?, k_max)?;
            let rows = grid_points(&p)?
                .into_iter()
                .map(|s| Ok((s, template_logderiv(&params, s, k_max)?)))
                .collect::<Result<Vec<_>, LabError>>()?;
            out.json("template.json", &params)?;
            write_values(&rows, config.format, out)
        }
        ZetaMethodName::Perron => perron(config, &p, out),
        ZetaMethodName::CriticalLine => {
            let seq = load_sequence(&p)?;
            let model = ContinuationModel::measure(&seq, p.a.unwrap_or(1.0), p.theta.unwrap_or(0.0))?;
            let rep = critical_line_scan(&seq, &model, &need(p.tau.clone(), "tau")?)?;
            out.json("critical_line.json", &rep)?;
            if config.format == Format::Csv {
                out.with_writer("critical_line.csv", |w| Ok(rep.write_csv(w)?))?;
            }
            Ok(())
        }
        ZetaMethodName::Convexity => {
            let seq = load_sequence(&p)?;
            let model = ContinuationModel::measure(&seq, p.a.unwrap_or(1.0), p.theta.unwrap_or(0.0))?;
            let rep = convexity_check(&seq, &model, &need(p.sigma.clone(), "sigma")?, &need(p.tau.clone(), "tau")?)?;
            out.json("convexity.json", &rep)?;
            if config.format == Format::Csv {
                out.with_writer("convexity.csv", |w| {
                    writeln!(w, "sigma,tau,abs_zeta,err_bound,regular_part,c_measured")?;
                    for r in &rep.rows {
                        writeln!(
                            w,
                            "{},{},{},{},{},{}",
                            fmt_real(r.sigma),
                            fmt_real(r.tau),
                            fmt_real(r.abs_zeta),
                            fmt_real(r.err_bound),
                            fmt_real(r.regular_part),
                            fmt_real(r.c_measured)
                        )?;
                    }
                    Ok(())
                })?;
            }
            Ok(())
        }
    }
}

fn perron(config: &ExperimentConfig, p: &ZetaParams, out: &mut Outputs) -> Result<(), CliError> {
    let sys = load_system(p)?;
    let density = need(p.tail_density, "tail_density (bounds the coefficients beyond the cutoff)")?;
    let tail = Some(TailBound {
        density,
        cutoff: sys.cutoff(),
    });
    let terms: Vec<(f64, Complex64)> = match p.target.unwrap_or(PerronTarget::Count) {
        PerronTarget::Count => sys.integers().iter().map(|(v, m)| (v, Complex64::new(m as f64, 0.0))).collect(),
        PerronTarget::Psi => sys.mangoldt_atoms().iter().map(|&(v, w)| (v, Complex64::new(w, 0.0))).collect(),
    };
    let t_height = p.t_height.unwrap_or(1e6);
    let mut results = Vec::new();
    for &x in &need(p.x_grid.clone(), "x_grid")? {
        let kappa = p.kappa.unwrap_or(1.0 + 1.0 / x.ln().max(1.0));
        results.push(perron_dirichlet(&terms, tail, x, kappa, t_height)?);
    }
    out.json("perron.json", &results)?;
    if config.format == Format::Csv {
        out.with_writer("perron.csv", |w| {
            writeln!(w, "x,kappa,T,re,im,numerical_error,truncation_bound,tail_bound,error_budget")?;
            for r in &results {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    fmt_real(r.x),
                    fmt_real(r.kappa),
                    fmt_real(r.t_height),
                    fmt_real(r.value.re),
                    fmt_real(r.value.im),
                    fmt_real(r.numerical_error),
                    fmt_real(r.truncation_bound),
                    fmt_real(r.tail_bound),
                    fmt_real(r.error_budget)
                )?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn scan_cmd(config: &ExperimentConfig, p: ScanParams, out: &mut Outputs) -> Result<(), CliError> {
    let seq = PointSequence::load(&p.sequence)?;
    let model = mean_model(p.model, p.a, p.x0)?;
    let rule = match (p.t_grid, p.t_power) {
        (Some(ts), None) => TRule::Explicit(ts),
        (None, Some(b)) => TRule::PowerOfX(b),
        _ => return Err(config_err("give exactly one of t_grid and t_power")),
    };
    let grid = scan(
        &seq,
        &model,
        &p.x_grid,
        &rule,
        p.norm.unwrap_or(NormName::LhEps).norm(),
        p.eps.unwrap_or(0.1),
    )?;
    match config.format {
        Format::Csv => out.with_writer("scan.csv", |w| Ok(grid.write_csv(w)?)),
        Format::Json => out.json("scan.json", &grid),
    }
}
