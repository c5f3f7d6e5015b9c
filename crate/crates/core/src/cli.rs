//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure or failed validation, 2 invalid
//! configuration, 3 no positive key anywhere.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::budget::{BudgetSplit, Mode};
use crate::channel::{self, McParams};
use crate::config::{parse_count, parse_counts, parse_distances, RunConfig};
use crate::definetti::{ln_g, ln_g_bound, GMode};
use crate::error::Error;
use crate::npp::{NppEvaluator, NppParams};
use crate::optimizer::{self, Interval, SearchSpace, SweepRequest};
use crate::report;
use crate::result::{KeyRateResult, Protocol};
use crate::scs::{ScsEvaluator, ScsOptions, ScsParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ZERO_KEY: i32 = 3;

/// Overrides the output directory.
pub const OUT_DIR_ENV: &str = "FINKEY_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "finkey",
    version,
    about = "Finite-key rates for SCS and NPP twin-field QKD"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Side-channel-secure protocol.
    Scs {
        #[command(subcommand)]
        action: ProtocolAction,
    },
    /// Twin-field protocol without phase postselection.
    Npp {
        #[command(subcommand)]
        action: ProtocolAction,
    },
    /// Consistency checks.
    Validate {
        #[command(subcommand)]
        what: ValidateCommand,
    },
    /// Prints ln g(N, x), exact and bounded.
    Definetti(DefinettiArgs),
}

#[derive(Debug, Subcommand)]
pub enum ProtocolAction {
    /// Optimized rate versus distance.
    Sweep(SweepArgs),
    /// Key length at fixed parameters.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum ValidateCommand {
    /// Seeded Monte-Carlo counts against the expected-count model.
    Mc(McArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Device preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// `exact` or `paper-bound`.
    #[arg(long = "g-mode")]
    pub g_mode: Option<String>,
    /// Total security parameter.
    #[arg(long = "eps-tot")]
    pub eps_tot: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Pulse counts, comma separated (`1e12,1e13`).
    #[arg(long = "N")]
    pub n: Option<String>,
    /// Distances in km: `start:stop:step` or a list.
    #[arg(long = "L")]
    pub l: Option<String>,
    /// Skip the infinite-key rows.
    #[arg(long)]
    pub no_asymptotic: bool,
    /// Also optimize the parameter-estimation share of eps_tot.
    #[arg(long)]
    pub tune_split: bool,
    /// Search c0 in [lo, hi] (SCS), written `lo:hi`.
    #[arg(long)]
    pub c0_range: Option<String>,
    /// Grid points per searched dimension.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Nelder-Mead evaluations per start.
    #[arg(long)]
    pub refine_evals: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub asymptotic: bool,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `scs` or `npp`.
    #[arg(long)]
    pub protocol: Option<String>,
    #[arg(long)]
    pub rounds: Option<String>,
    /// First seed; further seeds follow consecutively.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<u32>,
    #[arg(long)]
    pub shards: Option<u32>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DefinettiArgs {
    #[arg(long = "N")]
    pub n: String,
    #[arg(long, default_value_t = 64)]
    pub x: u64,
}

/// Parses `args` (including the program name) and runs; returns the exit
/// code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Domain { .. } | Error::InfiniteIntensity { .. } => {
                    EXIT_CONFIG
                }
                _ => EXIT_FAILURE,
            }
        }
    }
}

pub fn run(cli: &Cli) -> crate::Result<i32> {
    match &cli.command {
        Command::Scs { action } => run_protocol(Protocol::Scs, action),
        Command::Npp { action } => run_protocol(Protocol::Npp, action),
        Command::Validate {
            what: ValidateCommand::Mc(a),
        } => run_mc(a),
        Command::Definetti(a) => run_definetti(a),
    }
}

struct Context {
    cfg: RunConfig,
    g_mode: GMode,
    out_dir: PathBuf,
}

fn context(common: &CommonArgs) -> crate::Result<Context> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.preset {
        cfg.preset = Some(p.clone());
    }
    if let Some(e) = common.eps_tot {
        cfg.device.eps_tot = Some(e);
    }
    let g_mode = match &common.g_mode {
        Some(s) => s.parse()?,
        None => cfg.g_mode.unwrap_or_default(),
    };
    let out_dir = common
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Context {
        cfg,
        g_mode,
        out_dir,
    })
}

fn check_protocol(cfg: &RunConfig, protocol: Protocol) -> crate::Result<()> {
    match cfg.protocol {
        Some(p) if p != protocol => Err(Error::config(
            "protocol",
            format!("config is for `{p}` but the `{protocol}` command was used"),
        )),
        _ => Ok(()),
    }
}

fn write_outputs(ctx: &Context, stem: &str, rows: &[KeyRateResult]) -> crate::Result<()> {
    let io = |e: std::io::Error| Error::config("output.dir", e.to_string());
    fs::create_dir_all(&ctx.out_dir).map_err(io)?;
    let csv_path = ctx.out_dir.join(format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(io)?;
    report::write_csv(std::io::BufWriter::new(file), rows)?;
    let text = report::summary(rows);
    fs::write(ctx.out_dir.join(format!("{stem}.txt")), &text).map_err(io)?;
    print!("{text}");
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn zero_key_code(rows: &[KeyRateResult]) -> i32 {
    if rows.iter().all(KeyRateResult::is_zero) {
        eprintln!("no positive key at any point");
        EXIT_ZERO_KEY
    } else {
        EXIT_OK
    }
}

fn parse_range(key: &str, s: &str) -> crate::Result<Interval> {
    let bad = || Error::config(key, format!("`{s}` is not `lo:hi`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok(Interval::new(lo, hi))
}

fn run_protocol(protocol: Protocol, action: &ProtocolAction) -> crate::Result<i32> {
    match action {
        ProtocolAction::Sweep(a) => run_sweep(protocol, a),
        ProtocolAction::Eval(a) => run_eval(protocol, a),
    }
}

fn run_sweep(protocol: Protocol, a: &SweepArgs) -> crate::Result<i32> {
    let ctx = context(&a.common)?;
    check_protocol(&ctx.cfg, protocol)?;
    let template = ctx.cfg.device()?;
    let n_values = match (&a.n, &ctx.cfg.sweep.n) {
        (Some(s), _) => parse_counts("N", s)?,
        (None, Some(v)) => v
            .iter()
            .map(|c| c.get("sweep.N"))
            .collect::<crate::Result<_>>()?,
        (None, None) => vec![1_000_000_000_000, 10_000_000_000_000, 100_000_000_000_000],
    };
    let distances = match (&a.l, &ctx.cfg.sweep.l) {
        (Some(s), _) => parse_distances("L", s)?,
        (None, Some(d)) => d.resolve("sweep.L")?,
        (None, None) => parse_distances("L", "0:500:10")?,
    };
    let mut space = ctx.cfg.search.apply(&SearchSpace::default());
    if a.tune_split && space.tune_split.is_none() {
        space.tune_split = Some(Interval::new(0.01, 0.99));
    }
    if let Some(r) = &a.c0_range {
        space.c0 = Some(parse_range("c0-range", r)?);
    }
    space.grid = a.grid.unwrap_or(space.grid);
    space.refine_evals = a.refine_evals.unwrap_or(space.refine_evals);
    let asymptotic = !a.no_asymptotic && ctx.cfg.sweep.asymptotic.unwrap_or(true);
    let req = SweepRequest {
        protocol,
        template,
        distances,
        n_values,
        g_mode: ctx.g_mode,
        asymptotic,
        space,
        scs: ScsOptions {
            source: ctx.cfg.source.resolve()?,
            ..Default::default()
        },
    };
    let rows = optimizer::sweep(&req)?;
    write_outputs(&ctx, &format!("{protocol}_sweep"), &rows)?;
    Ok(zero_key_code(&rows))
}

fn required(v: Option<f64>, key: &str) -> crate::Result<f64> {
    v.ok_or_else(|| Error::config(key, "required"))
}

fn run_eval(protocol: Protocol, a: &EvalArgs) -> crate::Result<i32> {
    let ctx = context(&a.common)?;
    check_protocol(&ctx.cfg, protocol)?;
    let e = &ctx.cfg.eval;
    let n = match (&a.n, e.n) {
        (Some(s), _) => parse_count("N", s)?,
        (None, Some(c)) => c.get("eval.N")?,
        (None, None) => return Err(Error::config("N", "required")),
    };
    let l = required(a.l.or(e.l), "L")?;
    let g = ctx.cfg.device()?.with_pulses(n).with_distance(l);
    g.validate()?;
    let mode = if a.asymptotic || e.asymptotic.unwrap_or(false) {
        Mode::Asymptotic
    } else {
        Mode::Finite(ctx.g_mode)
    };
    let mu = required(a.mu.or(e.mu), "mu")?;
    let p = required(a.p.or(e.p), "p")?;
    let r = match protocol {
        Protocol::Scs => {
            let opts = ScsOptions {
                source: ctx.cfg.source.resolve()?,
                ..Default::default()
            };
            let params = ScsParams {
                mu,
                p,
                c0: a.c0.or(e.c0),
            };
            ScsEvaluator::new(&g, mode, opts)?.evaluate(&params)?
        }
        Protocol::Npp => {
            let params = NppParams {
                mu,
                nu: required(a.nu.or(e.nu), "nu")?,
                p,
                p0: required(a.p0.or(e.p0), "p0")?,
            };
            NppEvaluator::new(&g, mode, BudgetSplit::default_for(Protocol::Npp))?
                .evaluate(&params)?
        }
    };
    for (name, v) in &r.terms {
        println!("{name:<14} {}", report::num(*v));
    }
    println!("{:<14} {}", "l_bits", report::num(r.l_bits));
    let rows = [r];
    write_outputs(&ctx, &format!("{protocol}_eval"), &rows)?;
    Ok(zero_key_code(&rows))
}

fn run_mc(a: &McArgs) -> crate::Result<i32> {
    let ctx = context(&a.common)?;
    let m = &ctx.cfg.mc;
    let protocol = match (&a.protocol, ctx.cfg.protocol) {
        (Some(s), _) => match s.as_str() {
            "scs" => Protocol::Scs,
            "npp" => Protocol::Npp,
            other => {
                return Err(Error::config(
                    "protocol",
                    format!("expected `scs` or `npp`, got `{other}`"),
                ))
            }
        },
        (None, Some(p)) => p,
        (None, None) => Protocol::Scs,
    };
    let rounds = match (&a.rounds, m.rounds) {
        (Some(s), _) => parse_count("rounds", s)?,
        (None, Some(c)) => c.get("mc.rounds")?,
        (None, None) => 1_000_000,
    };
    let first = a.seed.or(m.seed).unwrap_or(0);
    let count = a.seeds.or(m.seeds).unwrap_or(1).max(1);
    let seeds: Vec<u64> = (0..u64::from(count)).map(|i| first + i).collect();
    let shards = a.shards.or(m.shards).unwrap_or(1);
    let g = ctx.cfg.device()?.with_distance(a.l.or(m.l).unwrap_or(50.0));
    let mu = a.mu.or(m.mu).unwrap_or(0.05);
    let p = a.p.or(m.p).unwrap_or(0.5);
    let params = match protocol {
        Protocol::Scs => McParams::Scs { mu, p },
        Protocol::Npp => McParams::Npp {
            mu,
            nu: a.nu.or(m.nu).unwrap_or(0.1),
            p,
            p0: a.p0.or(m.p0).unwrap_or(0.5),
        },
    };
    let rep = channel::validate(&g, params, rounds, &seeds, shards)?;
    println!(
        "{protocol} Monte-Carlo check: {rounds} rounds x {} seeds at L = {} km",
        seeds.len(),
        g.distance_km
    );
    for c in &rep.classes {
        println!(
            "  {:<6} expected {:>14.4} max|z| {:>6.3} mean z {:>7.3} mean|z| {:>6.3}",
            c.name,
            c.expected,
            c.max_abs_z(),
            c.mean_z(),
            c.mean_abs_z()
        );
    }
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!(
        "  {} all counts within 4 sigma",
        verdict(rep.within_four_sigma())
    );
    println!(
        "  {} |mean z| < 1 per class (worst {:.3})",
        verdict(rep.worst_mean_z() < 1.0),
        rep.worst_mean_z()
    );
    println!(
        "  {} pooled mean |z| < 1 ({:.3})",
        verdict(rep.pooled_mean_abs_z() < 1.0),
        rep.pooled_mean_abs_z()
    );
    Ok(if rep.passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn run_definetti(a: &DefinettiArgs) -> crate::Result<i32> {
    let n = parse_count("N", &a.n)?;
    let exact = ln_g(n, a.x)?;
    let bound = ln_g_bound(n, a.x)?;
    println!("N = {n}, x = {}", a.x);
    println!("ln g exact       {exact:.6}");
    println!("ln g paper-bound {bound:.6}");
    Ok(EXIT_OK)
}
