//! Command-line front end.
//!
//! Every subcommand writes a `{"schema": 1}` line followed by JSON lines (or a
//! CSV table with `--format csv`). Floats are printed with 17 significant
//! digits; keys keep their declaration order, so equal inputs give equal bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use circle_lab::arith::{derive_params, ProblemParams, DEFAULT_DELTA, DEFAULT_EPSILON};
use circle_lab::bounds::{self, EnvelopeName, WeylVariant};
use circle_lab::counting;
use circle_lab::dissection::{self, ArcLabel, ArcThresholds};
use circle_lab::expsum;
use circle_lab::primewindow::{self, PrimeWindow};
use circle_lab::singular::{self, IntegralMethod, SeriesTables};
use circle_lab::{Alpha, Error, Phase};

pub const SCHEMA: u32 = 1;
pub const THREADS_ENV: &str = "CIRCLE_LAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "circle-lab", version, about = "Circle-method experiments for sums of prime powers in short intervals")]
pub struct Cli {
    /// Write output to this file instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::JsonLines)]
    pub format: Format,
    /// Worker threads (overrides CIRCLE_LAB_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for sampled frequencies.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Validate inputs and print the derived parameters only.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    JsonLines,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, default_value_t = 5)]
    pub s: u32,
    #[arg(long = "X", default_value_t = 1e4)]
    pub x: f64,
    #[arg(long, default_value_t = 0.85)]
    pub theta: f64,
    /// Interval half-length; overrides `--theta`.
    #[arg(long = "Y")]
    pub y: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub eps: f64,
    /// Binary prime-window cache: read if present and matching, else written.
    #[arg(long)]
    pub prime_cache: Option<PathBuf>,
}

impl ParamArgs {
    pub fn derive(&self) -> circle_lab::Result<ProblemParams> {
        match self.y {
            Some(y) => ProblemParams::with_y(self.k, self.s, self.x, y, self.delta, self.eps),
            None => derive_params(self.k, self.s, self.x, self.theta, self.delta, self.eps),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Derived constants t_k, K, R, P, Q, Q0.
    Params(ParamArgs),
    /// Primes in [X - Y, X + Y].
    Sieve {
        #[command(flatten)]
        params: ParamArgs,
        /// Emit every prime as a row.
        #[arg(long)]
        list: bool,
    },
    /// Exponential sums at one frequency or on a grid.
    Expsum {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        alpha: Option<f64>,
        /// Rational frequency a/q (with `--q`).
        #[arg(long, allow_hyphen_values = true)]
        a: Option<i64>,
        #[arg(long)]
        q: Option<u64>,
        /// Evaluate at j/grid for 0 <= j < grid.
        #[arg(long)]
        grid: Option<u64>,
        #[arg(long, value_enum, default_value_t = SumKind::F)]
        sum: SumKind,
        /// Allow the integral surrogate for long v sums.
        #[arg(long)]
        surrogate: bool,
    },
    /// Major/minor arc label of a frequency or of a grid.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        grid: Option<u64>,
    },
    /// Truncated singular series.
    Series {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: u128,
        #[arg(long, default_value_t = singular::DEFAULT_Q_CUT)]
        q_cut: u64,
        /// Emit B(n, q) for every q with a nonzero term.
        #[arg(long)]
        per_q: bool,
        /// Also test local solubility modulo this modulus.
        #[arg(long)]
        modulus: Option<u64>,
    },
    /// Singular integral.
    Integral {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u128>,
        #[arg(long, value_enum, default_value_t = MethodArg::ExactCount)]
        method: MethodArg,
    },
    /// Exact representation counts.
    Count {
        #[command(subcommand)]
        what: CountCommand,
    },
    /// Exact mean value of |f|^{2t} (or of the integer sum with `--integers`).
    Meanvalue {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        integers: bool,
    },
    /// Vinogradov count J_{t,k}(floor X).
    Vinogradov {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        t: u32,
    },
    /// Exceptional set among admissible n in [N, N + width].
    Scan {
        #[command(flatten)]
        params: ParamArgs,
        /// Defaults to s X^k - X^{k-1} Y.
        #[arg(long = "N")]
        start: Option<u128>,
        /// Defaults to 2 X^{k-1} Y.
        #[arg(long)]
        width: Option<u128>,
    },
    /// Bound envelopes against exact quantities.
    Bounds {
        #[command(subcommand)]
        what: BoundsCommand,
    },
    /// Vaughan decomposition of the prime-power sum over the window.
    Vaughan {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long = "U")]
        u: Option<f64>,
        #[arg(long = "V")]
        v: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum CountCommand {
    /// rho_s(n) over the window.
    Rho {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        n: u128,
    },
    /// Weighted count for |f|^4 |K|^2 with K supported on Z (squares only).
    Moment8 {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        z: Vec<u128>,
    },
}

#[derive(Subcommand, Debug)]
pub enum BoundsCommand {
    /// One envelope against its measured quantity.
    Check {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        name: String,
        #[arg(long)]
        alpha: Option<f64>,
        /// Moment parameter for daemen31.
        #[arg(long, default_value_t = 3)]
        t: u32,
    },
    /// Minor-arc samples against the Weyl envelope.
    Survey {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, value_enum, default_value_t = VariantArg::Prop23)]
        variant: VariantArg,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SumKind {
    /// Prime sum weighted by log p.
    F,
    /// Integer sum over the window.
    #[value(name = "big-f")]
    BigF,
    /// Singular-integral weight sum v(beta).
    V,
    /// Von Mangoldt sum over the window.
    Lambda,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Quadrature,
    ExactCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Prop23,
    Lemma42,
}

/// Result of a subcommand: table rows plus an optional summary object.
#[derive(Default)]
pub struct Output {
    pub rows: Vec<Value>,
    pub summary: Option<Value>,
}

fn to_value<T: Serialize>(v: &T) -> circle_lab::Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Internal(e.to_string()))
}

/// Format a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    format!("{v:.16e}")
}

fn number_text(n: &serde_json::Number) -> String {
    let s = n.to_string();
    if s.contains(['.', 'e', 'E']) {
        s.parse::<f64>().map(format_float).unwrap_or(s)
    } else {
        s
    }
}

/// Compact JSON with floats normalised to 17 significant digits.
pub fn write_json(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&number_text(n)),
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Array(a) => {
            out.push('[');
            for (i, e) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(e, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            out.push('{');
            for (i, (k, e)) in m.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push(':');
                write_json(e, out);
            }
            out.push('}');
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, e) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, e, out);
            }
        }
        Value::Array(a) => {
            let parts: Vec<String> = a
                .iter()
                .map(|e| {
                    let mut s = String::new();
                    write_json(e, &mut s);
                    s
                })
                .collect();
            out.push((prefix.to_string(), parts.join(";")));
        }
        Value::String(s) => out.push((prefix.to_string(), csv_escape(s))),
        other => {
            let mut s = String::new();
            write_json(other, &mut s);
            out.push((prefix.to_string(), s));
        }
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render an [`Output`] in the requested format.
pub fn render(out: &Output, format: Format) -> String {
    let mut text = String::new();
    match format {
        Format::JsonLines => {
            text.push_str(&format!("{{\"schema\":{SCHEMA}}}\n"));
            for v in out.rows.iter().chain(out.summary.iter()) {
                write_json(v, &mut text);
                text.push('\n');
            }
        }
        Format::Csv => {
            let table: Vec<&Value> = if out.rows.is_empty() { out.summary.iter().collect() } else { out.rows.iter().collect() };
            let mut header: Option<Vec<String>> = None;
            for v in table {
                let mut cells = Vec::new();
                flatten("", v, &mut cells);
                if header.is_none() {
                    let h: Vec<String> = cells.iter().map(|c| c.0.clone()).collect();
                    text.push_str(&h.join(","));
                    text.push('\n');
                    header = Some(h);
                }
                let row: Vec<String> = cells.into_iter().map(|c| c.1).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
        }
    }
    text
}

fn window_for(params: &ProblemParams, args: &ParamArgs) -> circle_lab::Result<PrimeWindow> {
    let Some(path) = &args.prime_cache else {
        return primewindow::sieve_window(params.x, params.y);
    };
    if path.exists() {
        let w = primewindow::read_cache(&mut std::io::BufReader::new(File::open(path)?))?;
        if w.x == params.x && w.y == params.y {
            return Ok(w);
        }
        log::warn!("cache {} is for X = {}, Y = {}; resieving", path.display(), w.x, w.y);
    }
    let w = primewindow::sieve_window(params.x, params.y)?;
    let mut f = BufWriter::new(File::create(path)?);
    primewindow::write_cache(&w, &mut f)?;
    f.flush()?;
    Ok(w)
}

fn params_of(cmd: &Command) -> &ParamArgs {
    match cmd {
        Command::Params(p) => p,
        Command::Sieve { params, .. }
        | Command::Expsum { params, .. }
        | Command::Classify { params, .. }
        | Command::Series { params, .. }
        | Command::Integral { params, .. }
        | Command::Meanvalue { params, .. }
        | Command::Vinogradov { params, .. }
        | Command::Scan { params, .. }
        | Command::Vaughan { params, .. } => params,
        Command::Count { what } => match what {
            CountCommand::Rho { params, .. } | CountCommand::Moment8 { params, .. } => params,
        },
        Command::Bounds { what } => match what {
            BoundsCommand::Check { params, .. } | BoundsCommand::Survey { params, .. } => params,
        },
    }
}

fn alpha_of(alpha: Option<f64>, a: Option<i64>, q: Option<u64>) -> circle_lab::Result<Alpha> {
    match (alpha, a, q) {
        (Some(x), None, None) => Ok(Alpha::from_f64(x)),
        (None, Some(a), Some(q)) if q > 0 => Ok(Alpha::ratio(a as i128, q as u128)),
        _ => Err(Error::InvalidInput("give either --alpha or both --a and --q (q > 0)".into())),
    }
}

fn exp_row(alpha: f64, v: &expsum::ExpSum<f64>) -> Value {
    json!({"alpha": alpha, "re": v.re, "im": v.im, "abs": v.abs(), "method": to_value(&v.method).unwrap_or(Value::Null), "terms": v.terms, "error_bound": v.error_bound})
}

fn eval_sum(kind: SumKind, p: &ProblemParams, w: Option<&PrimeWindow>, support: Option<&[(u64, f64)]>, alpha: Alpha, surrogate: bool) -> circle_lab::Result<expsum::ExpSum<f64>> {
    match kind {
        SumKind::F => expsum::f_sum(w.unwrap(), p.k, alpha),
        SumKind::BigF => expsum::F_sum(p.x, p.y, p.k, alpha),
        SumKind::V => {
            let beta = alpha.phase().signed_f64();
            expsum::v_sum(p.x, p.y, p.k, beta, surrogate)
        }
        SumKind::Lambda => expsum::lambda_sum(support.unwrap(), p.k, alpha),
    }
}

fn classification_row(alpha: f64, c: &dissection::ArcClassification) -> Value {
    json!({"alpha": alpha, "label": c.label.as_str(), "a": c.witness.a as u64, "q": c.witness.q as u64, "err": c.witness.err})
}

/// Execute one parsed command.
pub fn execute(cli: &Cli) -> circle_lab::Result<Output> {
    let args = params_of(&cli.command);
    let p = args.derive()?;
    if cli.dry_run {
        return Ok(Output { rows: vec![], summary: Some(json!({"dry_run": true, "params": to_value(&p)?})) });
    }
    let mut out = Output::default();
    match &cli.command {
        Command::Params(_) => out.summary = Some(to_value(&p)?),
        Command::Sieve { params, list } => {
            let w = window_for(&p, params)?;
            if *list {
                out.rows = w.iter().map(|(q, l)| json!({"p": q, "log_p": l})).collect();
            }
            out.summary = Some(json!({"X": w.x, "Y": w.y, "lo": w.lo, "hi": w.hi, "count": w.len(), "sum_log": w.sum_logs()}));
        }
        Command::Expsum { params, alpha, a, q, grid, sum, surrogate } => {
            let w = match sum {
                SumKind::F | SumKind::Lambda => Some(window_for(&p, params)?),
                _ => None,
            };
            let support = match sum {
                SumKind::Lambda => Some(primewindow::lambda_support(w.as_ref().unwrap())),
                _ => None,
            };
            match grid {
                Some(g) => {
                    if *g == 0 {
                        return Err(Error::InvalidInput("--grid must be positive".into()));
                    }
                    for j in 0..*g {
                        let al = Alpha::ratio(j as i128, *g as u128);
                        let v = eval_sum(*sum, &p, w.as_ref(), support.as_deref(), al, *surrogate)?;
                        out.rows.push(exp_row(j as f64 / *g as f64, &v));
                    }
                }
                None => {
                    let al = alpha_of(*alpha, *a, *q)?;
                    let v = eval_sum(*sum, &p, w.as_ref(), support.as_deref(), al, *surrogate)?;
                    out.rows.push(exp_row(al.to_f64(), &v));
                }
            }
        }
        Command::Classify { alpha, grid, .. } => {
            let th = ArcThresholds::from(&p);
            match (alpha, grid) {
                (Some(x), None) => {
                    let c = dissection::classify(Phase::from_f64(*x), &p)?;
                    out.rows.push(classification_row(*x, &c));
                }
                (None, Some(g)) => {
                    let all = dissection::classify_grid(*g, th)?;
                    let count = |l: ArcLabel| all.iter().filter(|e| e.1.label == l).count();
                    out.summary = Some(json!({
                        "points": g,
                        "major": count(ArcLabel::Major),
                        "minor1": count(ArcLabel::Minor1),
                        "minor2": count(ArcLabel::Minor2),
                        "major_measure": dissection::major_arc_measure(&p),
                        "P": p.p, "Q": p.q, "Q0": p.q0,
                    }));
                    out.rows = all.iter().map(|(x, c)| classification_row(*x, c)).collect();
                }
                _ => return Err(Error::InvalidInput("give exactly one of --alpha or --grid".into())),
            }
        }
        Command::Series { n, q_cut, per_q, modulus, .. } => {
            let mut tables = SeriesTables::new(p.s, p.k);
            let r = singular::singular_series_with(&mut tables, *n, *q_cut, p.epsilon, *per_q)?;
            if let Some(rows) = &r.per_q {
                out.rows = rows.iter().map(|e| to_value(e)).collect::<circle_lab::Result<_>>()?;
            }
            let mut summary = json!({"n": r.n, "s": r.s, "k": r.k, "q_cut": r.q_cut, "partial": r.partial, "tail": r.tail_estimate, "positive": r.positive});
            if let Some(m) = modulus {
                summary["modulus"] = json!(m);
                summary["soluble"] = json!(singular::local_solubility(*n, p.s, p.k, *m)?);
            }
            out.summary = Some(summary);
        }
        Command::Integral { n, method, .. } => {
            let m = match method {
                MethodArg::Quadrature => IntegralMethod::Quadrature,
                MethodArg::ExactCount => IntegralMethod::ExactCount,
            };
            let rs = singular::singular_integral_batch(n, p.s, p.k, p.x, p.y, m)?;
            out.rows = rs.iter().map(to_value).collect::<circle_lab::Result<_>>()?;
        }
        Command::Count { what } => match what {
            CountCommand::Rho { params, n } => {
                let w = window_for(&p, params)?;
                let r = counting::rho(*n, p.s, p.k, &w)?;
                out.rows.push(json!({"n": n, "raw": r.raw, "value": r.value}));
            }
            CountCommand::Moment8 { params, z } => {
                if p.k != 2 {
                    return Err(Error::InvalidInput("moment8 is defined for k = 2 only".into()));
                }
                let w = window_for(&p, params)?;
                out.summary = Some(to_value(&counting::moment8_lhs(&w, z, p.epsilon)?)?);
            }
        },
        Command::Meanvalue { params, t, integers } => {
            let r = if *integers {
                let (lo, hi) = primewindow::window_bounds(p.x, p.y)?;
                counting::integer_mean_value(*t, p.k, lo.max(1), hi)?
            } else {
                counting::mean_value_I(*t, p.k, &window_for(&p, params)?)?
            };
            out.summary = Some(to_value(&r)?);
        }
        Command::Vinogradov { t, .. } => {
            out.summary = Some(to_value(&counting::vinogradov_J(*t, p.k, p.x.floor() as u64)?)?);
        }
        Command::Scan { params, start, width } => {
            let w = window_for(&p, params)?;
            let kf = p.k as i32;
            let centre = p.s as f64 * p.x.powi(kf);
            let half = p.x.powi(kf - 1) * p.y;
            let n0 = start.unwrap_or((centre - half).max(0.0).floor() as u128);
            let wd = width.unwrap_or((2.0 * half).floor() as u128);
            let mut r = counting::exceptional_scan(n0, wd, p.s, p.k, &w)?;
            if let Some(rows) = r.per_n.take() {
                out.rows = rows.iter().map(|e| json!({"n": e.n, "raw": e.raw, "value": e.value, "status": to_value(&e.status).unwrap_or(Value::Null)})).collect();
            }
            out.summary = Some(to_value(&r)?);
        }
        Command::Bounds { what } => match what {
            BoundsCommand::Check { params, name, alpha, t } => {
                let name: EnvelopeName = name.parse()?;
                out.summary = Some(bounds_check(name, &p, params, *alpha, *t)?);
            }
            BoundsCommand::Survey { params, samples, variant } => {
                let w = window_for(&p, params)?;
                let v = match variant {
                    VariantArg::Prop23 => WeylVariant::Prop23,
                    VariantArg::Lemma42 => WeylVariant::Lemma42,
                };
                let mut r = bounds::minor_arc_survey(&p, &w, *samples, cli.seed, v)?;
                out.rows = r.rows.iter().map(to_value).collect::<circle_lab::Result<_>>()?;
                r.rows.clear();
                out.summary = Some(to_value(&r)?);
            }
        },
        Command::Vaughan { alpha, u, v, .. } => {
            let (lo, hi) = primewindow::window_bounds(p.x, p.y)?;
            let def = bounds::vaughan_default_uv(&p);
            let r = bounds::vaughan_decompose(lo.max(2), hi, p.k, Alpha::from_f64(*alpha), u.unwrap_or(def), v.unwrap_or(def))?;
            out.summary = Some(to_value(&r)?);
        }
    }
    Ok(out)
}

fn bounds_check(name: EnvelopeName, p: &ProblemParams, args: &ParamArgs, alpha: Option<f64>, t: u32) -> circle_lab::Result<Value> {
    let need_alpha = || alpha.ok_or_else(|| Error::InvalidInput("--alpha is required for this envelope".into()));
    match name {
        EnvelopeName::Prop23 | EnvelopeName::Lemma42 => {
            let a = need_alpha()?;
            let w = window_for(p, args)?;
            let c = dissection::classify(Phase::from_f64(a), p)?;
            let variant = if name == EnvelopeName::Prop23 { WeylVariant::Prop23 } else { WeylVariant::Lemma42 };
            let bound = bounds::weyl_envelope(p, &c.witness, variant);
            let measured = expsum::f_sum::<f64>(&w, p.k, Alpha::from_f64(a))?.abs();
            Ok(json!({"name": to_value(&name)?, "inputs": {"alpha": a, "a": c.witness.a as u64, "q": c.witness.q as u64, "X": p.x, "Y": p.y, "epsilon": p.epsilon, "label": c.label.as_str()}, "bound_value": bound, "measured": measured, "ratio": measured / bound}))
        }
        EnvelopeName::TangA1 | EnvelopeName::LlzA2 => {
            let a = need_alpha()?;
            let (x, y) = (p.x, p.y);
            let approx = circle_lab::best_approx(Phase::from_f64(a), p.q0);
            let bound = if name == EnvelopeName::TangA1 {
                bounds::tang_envelope(x, y, p.k, &approx, p.epsilon)?
            } else {
                bounds::llz_envelope(x, y, p.k, &approx, p.epsilon)?
            };
            let lo = x.ceil() as u64;
            let hi = (x + y).floor() as u64;
            let measured = bounds::lambda_direct(lo, hi, p.k, Alpha::from_f64(a)).norm();
            Ok(json!({"name": to_value(&name)?, "inputs": {"alpha": a, "a": approx.a as u64, "q": approx.q as u64, "x": x, "y": y, "epsilon": p.epsilon}, "bound_value": bound, "measured": measured, "ratio": measured / bound}))
        }
        EnvelopeName::Daemen31 => to_value(&bounds::daemen_check(t, p.k, p.x, p.y)?),
        EnvelopeName::Prop22 => {
            let w = window_for(p, args)?;
            to_value(&bounds::prop22_check(p.s, p, &w)?)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget(_) => 2,
        _ => 1,
    }
}

fn configure_threads(cli_threads: Option<usize>) -> Result<(), String> {
    let threads = match cli_threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err("thread count must be positive".into());
        }
        // A pool can only be installed once per process; later calls keep the first.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn emit(text: &str, path: Option<&Path>, stdout: &mut dyn Write) -> std::io::Result<()> {
    match path {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p)?);
            f.write_all(text.as_bytes())?;
            f.flush()
        }
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Parse `args`, run, and return the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = stdout.write_all(text.as_bytes());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        1
                    } else {
                        0
                    }
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };
    if let Err(msg) = configure_threads(cli.threads) {
        let _ = writeln!(stderr, "error: {msg}");
        return 1;
    }
    match execute(&cli) {
        Ok(out) => {
            let text = render(&out, cli.format);
            match emit(&text, cli.output.as_deref(), stdout) {
                Ok(()) => 0,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    1
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(3.0), "3.0000000000000000e0");
        let mut s = String::new();
        write_json(&json!({"a": 1, "b": 0.5, "c": [2.5, "x"]}), &mut s);
        assert_eq!(s, r#"{"a":1,"b":5.0000000000000000e-1,"c":[2.5000000000000000e0,"x"]}"#);
    }

    #[test]
    fn csv_flattens_nested_objects() {
        let out = Output { rows: vec![json!({"n": 3, "p": {"x": 1.5}})], summary: None };
        assert_eq!(render(&out, Format::Csv), "n,p.x\n3,1.5000000000000000e0\n");
    }
}
