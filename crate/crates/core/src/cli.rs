//! Command-line front end.
//!
//! Every artifact starts with provenance: `#` lines for CSV, leading keys
//! for JSON. Artifacts go to `--out` when given and to stdout otherwise.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::evolve::{self, EvolutionConfig, OrbitConfig, StabilityRunReport, Terminated};
use crate::field::{PeriodicField, PeriodicGrid};
use crate::indices::{self, IndexOptions, MorseOptions};
use crate::linop::{self, Tolerance};
use crate::wave::{self, WaveParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Parses a decimal number, or a multiple of π written `6pi`, `0.5pi`, `pi`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let value = match t.strip_suffix("pi") {
        Some("") => std::f64::consts::PI,
        Some("-") => -std::f64::consts::PI,
        Some(m) => m.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))? * std::f64::consts::PI,
        None => t.parse::<f64>().map_err(|e| format!("`{s}`: {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("`{s}` is not a finite number"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    /// The self-adjoint operator.
    L,
    /// Its Hamiltonian counterpart `∂ₓ𝓛`.
    Dxl,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "mch-lab", version, about = "Periodic waves of the modified Camassa-Holm equation")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Artifact path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WavePoint {
    /// Elliptic modulus in (0, 1).
    #[arg(long, value_parser = parse_real)]
    pub k: f64,
    /// Period; accepts the `pi` suffix.
    #[arg(long = "L", value_parser = parse_real)]
    pub period: f64,
    /// Grid size (even, at least 16).
    #[arg(long, default_value_t = 256)]
    pub n: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Wave parameters, validity margins and ODE residual (JSON).
    Wave {
        #[command(flatten)]
        point: WavePoint,
        #[command(flatten)]
        output: Output,
    },
    /// Grid scan of the stability index I (CSV table or JSON summary).
    Scan {
        #[arg(long = "k-min", value_parser = parse_real)]
        k_min: f64,
        #[arg(long = "k-max", value_parser = parse_real)]
        k_max: f64,
        #[arg(long = "L-min", value_parser = parse_real)]
        l_min: f64,
        #[arg(long = "L-max", value_parser = parse_real)]
        l_max: f64,
        #[arg(long, default_value_t = 20)]
        nk: usize,
        #[arg(long = "nL", default_value_t = 20)]
        nl: usize,
        /// Samples of φ per cell.
        #[arg(long, default_value_t = indices::DEFAULT_SAMPLES)]
        samples: usize,
        /// Finite-difference step in k; min(1e-3, k/10) when omitted.
        #[arg(long, value_parser = parse_real)]
        h: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Eigenvalues and Morse counts of the linearized operator (JSON).
    Spectrum {
        #[command(flatten)]
        point: WavePoint,
        #[arg(long, value_enum, default_value_t = OperatorChoice::L)]
        operator: OperatorChoice,
        /// Compress to the zero-mean subspace.
        #[arg(long)]
        restricted: bool,
        /// Relative zero tolerance (times the spectral radius).
        #[arg(long, value_parser = parse_real, default_value_t = linop::DEFAULT_RELATIVE_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Zero-mean branch, d''(c) and the Krein index (JSON).
    Krein {
        #[arg(long, value_parser = parse_real)]
        k: f64,
        #[arg(long = "L-min", value_parser = parse_real)]
        l_min: f64,
        #[arg(long = "L-max", value_parser = parse_real)]
        l_max: f64,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, value_parser = parse_real, default_value_t = linop::DEFAULT_RELATIVE_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Propagates the sampled wave and monitors conservation (CSV).
    Evolve {
        #[command(flatten)]
        point: WavePoint,
        #[arg(long = "t-end", value_parser = parse_real, default_value_t = 5.0)]
        t_end: f64,
        /// Time step; ½(L/n)/max(1, ‖u₀‖∞ + c) when omitted.
        #[arg(long, value_parser = parse_real)]
        dt: Option<f64>,
        #[arg(long = "monitor-every", default_value_t = 10)]
        monitor_every: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Orbital-stability experiment with a seeded H¹ perturbation (CSV).
    Orbit {
        #[command(flatten)]
        point: WavePoint,
        #[arg(long, value_parser = parse_real, default_value_t = 1e-3)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "t-end", value_parser = parse_real, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, value_parser = parse_real)]
        dt: Option<f64>,
        #[arg(long = "monitor-every", default_value_t = 10)]
        monitor_every: usize,
        /// Highest Fourier mode of the perturbation.
        #[arg(long, default_value_t = 8)]
        bandwidth: usize,
        /// Flag instability once ρ exceeds this multiple of delta.
        #[arg(long, value_parser = parse_real, default_value_t = 20.0)]
        factor: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[command(flatten)]
        output: Output,
    },
    /// Runs a quick self-check of the numerical pipeline.
    Check {
        #[command(flatten)]
        output: Output,
    },
}

/// Subcommand failure: a library error or an invalid wave.
enum Failure {
    Lib(Error),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Parses `argv` (including the program name) and runs the subcommand,
/// writing artifacts and messages to the given streams. Returns the exit
/// status.
pub fn dispatch_to<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cfg.command, out, err) {
        Ok(code) => code,
        Err(Failure::Invalid(report)) => {
            let _ = writeln!(err, "{report}");
            EXIT_VALIDATION
        }
        Err(Failure::Lib(e)) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}

/// [`dispatch_to`] on the process streams.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_to(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn timestamp() -> String {
    time::OffsetDateTime::now_utc()
        .format(&time::format_description::well_known::Rfc3339)
        .unwrap_or_else(|_| "unknown".into())
}

/// Ordered `(name, value)` pairs describing a run.
struct Provenance {
    command: &'static str,
    params: Vec<(&'static str, Value)>,
}

impl Provenance {
    fn new(command: &'static str) -> Self {
        Self { command, params: Vec::new() }
    }

    fn param(mut self, name: &'static str, value: impl Serialize) -> Self {
        self.params.push((name, serde_json::to_value(value).unwrap_or(Value::Null)));
        self
    }

    fn csv_header(&self) -> String {
        let mut s = format!("# tool: mch-lab {}\n# command: {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for (k, v) in &self.params {
            let _ = writeln!(s, "# {k} = {v}");
        }
        let _ = writeln!(s, "# timestamp: {}", timestamp());
        s
    }

    fn json(&self, body: Value) -> String {
        let mut m = Map::new();
        m.insert("tool".into(), json!("mch-lab"));
        m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        m.insert("command".into(), json!(self.command));
        m.insert("timestamp".into(), json!(timestamp()));
        for (k, v) in &self.params {
            m.insert((*k).into(), v.clone());
        }
        if let Value::Object(b) = body {
            for (k, v) in b {
                m.entry(k).or_insert(v);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(m)).expect("serializable");
        text.push('\n');
        text
    }
}

fn emit(output: &Output, text: &str, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Lib(Error::Data(format!("cannot write artifact: {e}")));
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(io),
        None => out.write_all(text.as_bytes()).map_err(io),
    }
}

/// `{:.16e}`: 17 significant digits.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn build_valid_wave(point: &WavePoint) -> Result<WaveParams<f64>, Failure> {
    let report = wave::validity(point.k, point.period, point.n.max(16));
    let describe = |head: String| {
        format!(
            "{head}\nvalidity: discriminant = {:e} (ok: {}), inequality (i) = {:e}, max(φ − c) = {:e}",
            report.discriminant, report.discriminant_ok, report.ineq_i_value, report.ineq_ii_margin
        )
    };
    let w = WaveParams::new(point.k, point.period).map_err(|e| Failure::Invalid(describe(format!("error: {e}"))))?;
    if !report.all_ok {
        return Err(Failure::Invalid(describe(format!(
            "error: (k, L) = ({}, {}) violates the validity inequalities",
            point.k, point.period
        ))));
    }
    Ok(w)
}

fn point_provenance(command: &'static str, p: &WavePoint) -> Provenance {
    Provenance::new(command).param("k", p.k).param("L", p.period).param("n", p.n)
}

/// A run that blew up still writes its artifact but exits with the
/// numerical-failure status.
fn run_status(report: &StabilityRunReport<f64>, err: &mut dyn Write) -> i32 {
    if report.terminated != Terminated::Blowup {
        return EXIT_OK;
    }
    let _ = writeln!(err, "error: run blew up: {}", report.reason.as_deref().unwrap_or("unknown cause"));
    EXIT_NUMERICAL
}

fn execute(cmd: &Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Wave { point, output } => {
            PeriodicGrid::new(point.period, point.n)?;
            let w = build_valid_wave(point)?;
            let v = wave::validity(point.k, point.period, point.n);
            let body = json!({
                "a": w.a,
                "b": w.b,
                "c": w.c,
                "integration_constant": w.integration_constant,
                "integration_constant_closed_form": w.integration_constant_closed_form(),
                "complete_k": w.kk,
                "complete_e": w.ee,
                "discriminant": v.discriminant,
                "ineq_i_value": v.ineq_i_value,
                "ineq_ii_margin": v.ineq_ii_margin,
                "valid": v.all_ok,
                "ode_residual": w.ode_residual(point.n),
            });
            emit(output, &point_provenance("wave", point).json(body), out)?;
            Ok(EXIT_OK)
        }
        Command::Scan { k_min, k_max, l_min, l_max, nk, nl, samples, h, format, output } => {
            PeriodicGrid::new(*l_min, *samples)?;
            let opts = IndexOptions { step: *h, samples: *samples };
            let scan = indices::index_scan((*k_min, *k_max), (*l_min, *l_max), *nk, *nl, opts)?;
            let prov = Provenance::new("scan")
                .param("k_min", k_min)
                .param("k_max", k_max)
                .param("L_min", l_min)
                .param("L_max", l_max)
                .param("nk", nk)
                .param("nL", nl)
                .param("samples", samples)
                .param("h", h.map_or_else(|| "min(1e-3, k/10)".to_string(), |x| x.to_string()));
            let text = match format {
                Format::Csv => {
                    let mut s = prov.csv_header();
                    let m = &scan.summary;
                    let _ = writeln!(
                        s,
                        "# summary: max I = {:e}, min I = {:e}, positive = {}, invalid = {}",
                        m.max_index, m.min_index, m.count_positive, m.count_invalid
                    );
                    s.push_str("k,L,I,valid,dA_dk,dc_dk,dV_dk,dF_dk\n");
                    for c in &scan.cells {
                        let comp = c.components.map_or([f64::NAN; 4], |x| [x.d_constant_dk, x.dc_dk, x.dv_dk, x.df_dk]);
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{},{},{}",
                            num(c.k),
                            num(c.period),
                            num(c.index),
                            c.valid,
                            num(comp[0]),
                            num(comp[1]),
                            num(comp[2]),
                            num(comp[3])
                        );
                    }
                    s
                }
                Format::Json => prov.json(serde_json::to_value(&scan.summary).expect("serializable")),
            };
            emit(output, &text, out)?;
            if output.out.is_some() {
                let _ = writeln!(out, "max I = {:e}", scan.summary.max_index);
            }
            Ok(EXIT_OK)
        }
        Command::Spectrum { point, operator, restricted, tol, output } => {
            let w = build_valid_wave(point)?;
            let l = indices::wave_operator(&w, point.n)?;
            let op = match operator {
                OperatorChoice::L => l,
                OperatorChoice::Dxl => linop::evolution_from(&l)?,
            };
            let tol = Tolerance::Relative(*tol);
            let report = if *restricted { linop::restricted_spectrum(&op, tol)? } else { linop::spectrum(&op, tol)? };
            let mut body = serde_json::to_value(&report).expect("serializable");
            if *operator == OperatorChoice::L && !*restricted {
                let s = indices::sample_wave(&w, point.n)?;
                if let Ok(cos) = indices::kernel_alignment(&report, &s.phi1) {
                    body["kernel_alignment"] = json!(cos);
                }
            }
            let prov = point_provenance("spectrum", point)
                .param("operator", operator)
                .param("restricted", restricted)
                .param("relative_tol", report.tol / report.spectral_radius);
            emit(output, &prov.json(body), out)?;
            Ok(EXIT_OK)
        }
        Command::Krein { k, l_min, l_max, n, tol, output } => {
            let report = indices::krein_index(*k, (*l_min, *l_max), *n, Tolerance::Relative(*tol))?;
            let prov = Provenance::new("krein")
                .param("k", k)
                .param("L_min", l_min)
                .param("L_max", l_max)
                .param("n", n)
                .param("relative_tol", tol);
            emit(output, &prov.json(serde_json::to_value(&report).expect("serializable")), out)?;
            Ok(EXIT_OK)
        }
        Command::Evolve { point, t_end, dt, monitor_every, format, output } => {
            let w = build_valid_wave(point)?;
            let grid = PeriodicGrid::new(point.period, point.n)?;
            let phi = PeriodicField::from_wave(&w, grid)?;
            let mut cfg = EvolutionConfig::new(dt.unwrap_or_else(|| EvolutionConfig::default_dt(&phi, w.c)), *t_end);
            cfg.monitor_every = *monitor_every;
            let (snaps, report) = evolve::run_against(&phi, &w, &cfg)?;
            let error = snaps
                .iter()
                .map(|s| s.u.try_sub(&phi.shifted(-w.c * s.t)).map(|d| d.max_abs()))
                .collect::<crate::Result<Vec<f64>>>()?;
            let prov = point_provenance("evolve", point)
                .param("t_end", t_end)
                .param("dt", report.dt)
                .param("steps", report.steps)
                .param("monitor_every", monitor_every)
                .param("dealias_pad", cfg.dealias_pad);
            emit(output, &run_artifact(prov, &report, Some(&error), *format), out)?;
            Ok(run_status(&report, err))
        }
        Command::Orbit { point, delta, seed, t_end, dt, monitor_every, bandwidth, factor, format, output } => {
            let w = build_valid_wave(point)?;
            let grid = PeriodicGrid::new(point.period, point.n)?;
            let phi = PeriodicField::from_wave(&w, grid)?;
            let mut evo = EvolutionConfig::new(dt.unwrap_or_else(|| EvolutionConfig::default_dt(&phi, w.c)), *t_end);
            evo.monitor_every = *monitor_every;
            let cfg = OrbitConfig { evolution: evo, bandwidth: *bandwidth, instability_factor: *factor };
            let report = evolve::orbital_experiment(&w, grid, *delta, *seed, &cfg)?;
            let prov = point_provenance("orbit", point)
                .param("delta", delta)
                .param("seed", seed)
                .param("t_end", t_end)
                .param("dt", report.dt)
                .param("monitor_every", monitor_every)
                .param("bandwidth", bandwidth)
                .param("factor", factor);
            emit(output, &run_artifact(prov, &report, None, *format), out)?;
            Ok(run_status(&report, err))
        }
        Command::Check { output } => {
            let results = self_check();
            let mut s = Provenance::new("check").csv_header();
            s.push_str("check,passed,detail\n");
            for (name, passed, detail) in &results {
                let _ = writeln!(s, "{name},{passed},\"{}\"", detail.replace('"', "'"));
            }
            emit(output, &s, out)?;
            Ok(if results.iter().all(|r| r.1) { EXIT_OK } else { EXIT_NUMERICAL })
        }
    }
}

fn run_artifact(prov: Provenance, r: &StabilityRunReport<f64>, error: Option<&[f64]>, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = prov.csv_header();
            let _ = writeln!(s, "# terminated: {:?}", r.terminated);
            s.push_str("t,rho,drift_E,drift_F,drift_V");
            s.push_str(if error.is_some() { ",error\n" } else { "\n" });
            for i in 0..r.times.len() {
                let rho = r.rho.get(i).copied().unwrap_or(f64::NAN);
                let _ = write!(s, "{},{},{},{},{}", num(r.times[i]), num(rho), num(r.drift_e[i]), num(r.drift_f[i]), num(r.drift_v[i]));
                if let Some(e) = error {
                    let _ = write!(s, ",{}", num(e[i]));
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let [de, df, dv] = r.max_drifts();
            let mut body = json!({
                "terminated": r.terminated,
                "reason": r.reason,
                "steps": r.steps,
                "sup_rho": r.sup_rho(),
                "max_drift_e": de,
                "max_drift_f": df,
                "max_drift_v": dv,
            });
            if let Some(e) = error {
                body["max_error"] = json!(crate::num::max_abs(e));
            }
            prov.json(body)
        }
    }
}

/// Fast consistency checks of every module, as `(name, passed, detail)`.
pub fn self_check() -> Vec<(&'static str, bool, String)> {
    use std::f64::consts::PI;
    let mut out = Vec::new();
    let mut push = |name: &'static str, r: crate::Result<(bool, String)>| match r {
        Ok((ok, d)) => out.push((name, ok, d)),
        Err(e) => out.push((name, false, e.to_string())),
    };

    push("legendre_relation", (|| {
        let k = 0.6f64;
        let kp = (1.0 - k * k).sqrt();
        let (kk, ee) = crate::elliptic::complete_ke(k)?;
        let (kkp, eep) = crate::elliptic::complete_ke(kp)?;
        let defect = (ee * kkp + eep * kk - kk * kkp - PI / 2.0).abs();
        Ok((defect < 1e-12, format!("defect {defect:e}")))
    })());

    push("wave_ode_residual", (|| {
        let w = WaveParams::new(0.5, 6.0 * PI)?;
        let r = w.ode_residual(256);
        Ok((r < 1e-8, format!("residual {r:e}")))
    })());

    push("constant_limit_spectrum", (|| {
        let g = PeriodicGrid::new(2.0 * PI, 32)?;
        let l = linop::assemble_l(&PeriodicField::constant(g, -1.0), &PeriodicField::constant(g, 0.0), 1.0)?;
        let rep = linop::spectrum(&l, Tolerance::default())?;
        Ok((rep.n_neg == 1 && rep.z_dim == 2, format!("n = {}, z = {}", rep.n_neg, rep.z_dim)))
    })());

    push("morse_identity", (|| {
        let r = indices::morse_check(0.5, 6.0 * PI, 128, Tolerance::default())?;
        Ok((r.holds() && r.n_l == 1, format!("n(L) = {}, n(L|Y0) = {}, pairing = {:e}", r.n_l, r.n_l_y0, r.pairing)))
    })());

    push("stability_index", (|| {
        let s = indices::stability_index(0.5, 8.0 * PI, IndexOptions::default())?;
        Ok((s.index < 0.0, format!("I = {:e}", s.index)))
    })());

    push("degenerate_pairing", (|| {
        let g = PeriodicGrid::new(2.0 * PI, 32)?;
        let l = linop::assemble_l(&PeriodicField::constant(g, -1.0), &PeriodicField::constant(g, 0.0), 1.0)?;
        let r = indices::morse_from_operator(&l, MorseOptions { tol: Tolerance::default(), allow_degenerate_kernel: true })?;
        Ok((r.holds() && (r.pairing + PI).abs() < 1e-8, format!("pairing {}", r.pairing)))
    })());

    push("traveling_wave_propagation", (|| {
        let w = WaveParams::new(0.5, 6.0 * PI)?;
        let g = PeriodicGrid::new(w.period, 128)?;
        let phi = PeriodicField::from_wave(&w, g)?;
        let cfg = EvolutionConfig::new(EvolutionConfig::default_dt(&phi, w.c), 1.0);
        let (snaps, _) = evolve::run(&phi, &cfg)?;
        let last = snaps.last().expect("final sample");
        let e = last.u.try_sub(&phi.shifted(-w.c * last.t))?.max_abs();
        Ok((e < 1e-8, format!("error {e:e}")))
    })());

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_suffix() {
        assert_eq!(parse_real("pi").unwrap(), std::f64::consts::PI);
        assert_eq!(parse_real("6pi").unwrap(), 6.0 * std::f64::consts::PI);
        assert_eq!(parse_real("0.5").unwrap(), 0.5);
        assert_eq!(parse_real("-pi").unwrap(), -std::f64::consts::PI);
        assert!(parse_real("xpi").is_err());
        assert!(parse_real("inf").is_err());
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(f64::NAN), "NaN");
    }
}
