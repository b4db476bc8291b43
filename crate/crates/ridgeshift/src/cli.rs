//! Argument parsing, validation and subcommand dispatch.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ridgeshift_core::finite::McOptions;
use ridgeshift_core::{
    shift_from_robust_fraction, Atom, AtomShift, Error, LambdaPolicy, ProblemSpec, Regime, ShiftSpec, SpectralModel,
};

use crate::config::{parse_config, parse_float, parse_grid, parse_groups, parse_list};
use crate::sweep;
use crate::table::Table;

pub const DEFAULT_GAMMA_GRID: &str = "log:1e-2:1e2:50";
pub const DEFAULT_KAPPA_GRID: &str = "0:1.5:31";
pub const DEFAULT_COSTHETA_GRID: &str = "0:1:21";

#[derive(Debug, Parser)]
#[command(name = "ridgeshift", version, about = "Ridge regression risk under concept shift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic bias, variance and risk at the given gamma values
    Risk(RiskArgs),
    /// Risk profiles over a gamma grid, one curve per shift
    Sweep(SweepArgs),
    /// Isotropic minimum risk and regime over a (kappa, cos theta) grid
    Phase(PhaseArgs),
    /// Finite-size Monte Carlo against the asymptotic theory
    Mc(McArgs),
    /// Isotropic equivalent of an anisotropic shift after whitening
    Whiten(WhitenArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Risk(_) => "risk",
            Command::Sweep(_) => "sweep",
            Command::Phase(_) => "phase",
            Command::Mc(_) => "mc",
            Command::Whiten(_) => "whiten",
        }
    }

    fn run_args(&self) -> &RunArgs {
        match self {
            Command::Risk(a) => &a.run,
            Command::Sweep(a) => &a.run,
            Command::Phase(a) => &a.run,
            Command::Mc(a) => &a.run,
            Command::Whiten(a) => &a.run,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ShiftArgs {
    /// Spectrum atoms `s,rho,pi[;s,rho,pi...]` (default `1,1,1`)
    #[arg(long, allow_hyphen_values = true)]
    pub spectrum: Option<String>,
    /// Per-atom kappa `k1[,k2...]`; `;` separates shifts
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<String>,
    /// Per-atom cos theta `c1[,c2...]`; `;` separates shifts
    #[arg(long, allow_hyphen_values = true)]
    pub costheta: Option<String>,
    /// Robust fraction q, applied to every atom (excludes --kappa/--costheta)
    #[arg(long, allow_hyphen_values = true)]
    pub robust_q: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub shift: ShiftArgs,
    /// Signal-to-noise ratio (default 1)
    #[arg(long, allow_hyphen_values = true)]
    pub snr: Option<String>,
    /// Signal strength beta' Sigma beta (default 1)
    #[arg(long, allow_hyphen_values = true)]
    pub signal: Option<String>,
    /// Ridge penalty: a positive number or `optimal` (default)
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    /// Iteration cap of the fixed-point solver (default 100000)
    #[arg(long, allow_hyphen_values = true)]
    pub max_iters: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Output CSV path (stdout if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` file supplying defaults for any long flag
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed for all random streams (default 0)
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<String>,
    /// Worker threads
    #[arg(long, allow_hyphen_values = true)]
    pub threads: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RiskArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Aspect ratios P/N, comma-separated
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Explicit increasing gamma list (excludes --gamma-grid)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// `start:stop:count` or `log:start:stop:count` (default log:1e-2:1e2:50)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_grid: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PhaseArgs {
    /// Kappa grid (default 0:1.5:31)
    #[arg(long, allow_hyphen_values = true)]
    pub kappa_grid: Option<String>,
    /// Cos theta grid (default 0:1:21)
    #[arg(long, allow_hyphen_values = true)]
    pub costheta_grid: Option<String>,
    /// Signal strength (default 1)
    #[arg(long, allow_hyphen_values = true)]
    pub signal: Option<String>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Gamma values, comma-separated (excludes --gamma-grid)
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Gamma grid expression
    #[arg(long, allow_hyphen_values = true)]
    pub gamma_grid: Option<String>,
    /// Dimension P (default 256)
    #[arg(long, allow_hyphen_values = true)]
    pub dim: Option<String>,
    /// Number of seeds per gamma (default 100)
    #[arg(long, allow_hyphen_values = true)]
    pub n_seeds: Option<String>,
    /// Whiten covariates before fitting; theory uses the isotropic equivalent
    #[arg(long)]
    pub whiten: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct WhitenArgs {
    #[command(flatten)]
    pub shift: ShiftArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Risk { template: ProblemSpec, gammas: Vec<f64>, shifts: Vec<ShiftSpec> },
    Sweep { template: ProblemSpec, gammas: Vec<f64>, shifts: Vec<ShiftSpec> },
    Phase { kappas: Vec<f64>, cosines: Vec<f64>, signal: f64 },
    Mc { template: ProblemSpec, gammas: Vec<f64>, options: McOptions, n_seeds: usize },
    Whiten { spectrum: SpectralModel, shifts: Vec<ShiftSpec> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    /// Help or version text; not an error.
    Info(String),
    Usage(Vec<String>),
    Numeric(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e)
        } else {
            CliError::Usage(vec![e.to_string()])
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Info(s) => f.write_str(s.trim_end()),
            CliError::Usage(v) => {
                for (i, m) in v.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "usage error: {m}")?;
                }
                Ok(())
            }
            CliError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

fn clap_error(e: clap::Error) -> CliError {
    use clap::error::ErrorKind;
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Info(e.render().to_string())
        }
        _ => CliError::Usage(vec![e.render().to_string().trim_end().to_string()]),
    }
}

/// Turns config entries into flags placed ahead of the command-line flags,
/// so that a flag given on the command line overrides the file.
fn config_flags(sub: &str, path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let entries = parse_config(&text)
        .map_err(|v| CliError::Usage(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()))?;
    let cmd = Cli::command();
    let sc = cmd.find_subcommand(sub).expect("known subcommand");
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for e in entries {
        let arg = sc.get_arguments().find(|a| a.get_long() == Some(e.key.as_str()));
        match arg {
            Some(a) if e.key != "config" => {
                if a.get_action().takes_values() {
                    out.push(OsString::from(format!("--{}", e.key)));
                    out.push(OsString::from(e.value));
                } else {
                    match e.value.as_str() {
                        "true" => out.push(OsString::from(format!("--{}", e.key))),
                        "false" => {}
                        v => errors.push(format!(
                            "{} line {}: `{}` expects true or false, got `{v}`",
                            path.display(),
                            e.line,
                            e.key
                        )),
                    }
                }
            }
            _ => errors.push(format!(
                "{} line {}: unknown key `{}` for `{sub}`",
                path.display(),
                e.line,
                e.key
            )),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Usage(errors))
    }
}

pub fn parse<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let first = Cli::try_parse_from(&argv).map_err(clap_error)?;
    let cli = match &first.command.run_args().config {
        None => first,
        Some(path) => {
            let sub = first.command.name();
            let mut merged: Vec<OsString> = argv[..2].to_vec();
            merged.extend(config_flags(sub, path)?);
            merged.extend(argv[2..].iter().cloned());
            let cmd = Cli::command().mut_subcommand(sub, |s| s.args_override_self(true));
            let matches = cmd.try_get_matches_from(merged).map_err(clap_error)?;
            Cli::from_arg_matches(&matches).map_err(clap_error)?
        }
    };
    validate(&cli)
}

/// Collects every violation instead of stopping at the first.
#[derive(Default)]
struct Check {
    errors: Vec<String>,
}

impl Check {
    fn fail(&mut self, flag: &str, msg: impl fmt::Display) {
        self.errors.push(format!("--{flag}: {msg}"));
    }

    fn float(&mut self, flag: &str, raw: &Option<String>, default: f64, positive: bool) -> f64 {
        let Some(s) = raw else { return default };
        match parse_float(s) {
            Ok(v) if positive && v <= 0.0 => {
                self.fail(flag, format!("must be > 0, got {v}"));
                default
            }
            Ok(v) => v,
            Err(e) => {
                self.fail(flag, e);
                default
            }
        }
    }

    fn count(&mut self, flag: &str, raw: &Option<String>, default: usize, min: usize) -> usize {
        let Some(s) = raw else { return default };
        match s.trim().parse::<usize>() {
            Ok(v) if v >= min => v,
            _ => {
                self.fail(flag, format!("must be an integer >= {min}, got `{}`", s.trim()));
                default
            }
        }
    }

    fn positive_list(&mut self, flag: &str, raw: &str) -> Vec<f64> {
        match parse_list(raw) {
            Ok(v) => {
                if let Some(bad) = v.iter().find(|x| **x <= 0.0) {
                    self.fail(flag, format!("values must be > 0, got {bad}"));
                    return Vec::new();
                }
                v
            }
            Err(e) => {
                self.fail(flag, e);
                Vec::new()
            }
        }
    }

    fn grid(&mut self, flag: &str, raw: &str) -> Vec<f64> {
        match parse_grid(raw) {
            Ok(g) => g.points(),
            Err(e) => {
                self.fail(flag, e);
                Vec::new()
            }
        }
    }

    fn gammas(&mut self, list: &Option<String>, grid: &Option<String>, default_grid: Option<&str>) -> Vec<f64> {
        let g = match (list, grid) {
            (Some(_), Some(_)) => {
                self.fail("gamma", "cannot be combined with --gamma-grid");
                return Vec::new();
            }
            (Some(l), None) => self.positive_list("gamma", l),
            (None, Some(g)) => self.grid("gamma-grid", g),
            (None, None) => match default_grid {
                Some(d) => self.grid("gamma-grid", d),
                None => {
                    self.errors.push("one of --gamma or --gamma-grid is required".into());
                    return Vec::new();
                }
            },
        };
        if g.iter().any(|x| *x <= 0.0) {
            self.fail("gamma-grid", "values must be > 0");
            return Vec::new();
        }
        g
    }

    fn finish(self) -> Result<(), CliError> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(self.errors))
        }
    }
}

fn parse_atoms(c: &mut Check, raw: &Option<String>) -> Vec<Atom> {
    let Some(raw) = raw else { return vec![Atom::new(1.0, 1.0, 1.0)] };
    let groups = match parse_groups(raw) {
        Ok(g) => g,
        Err(e) => {
            c.fail("spectrum", e);
            return Vec::new();
        }
    };
    let mut atoms = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        match g.as_slice() {
            &[s, rho, pi] => atoms.push(Atom::new(s, rho, pi)),
            _ => c.fail("spectrum", format!("atom {} needs `s,rho,pi`, got {} value(s)", i + 1, g.len())),
        }
    }
    atoms
}

/// Expands `--kappa`/`--costheta`/`--robust-q` into one list of per-atom
/// shifts per requested shift (atoms in command-line order).
fn parse_shifts(c: &mut Check, args: &ShiftArgs, n_atoms: usize) -> Vec<Vec<AtomShift>> {
    if let Some(q) = &args.robust_q {
        if args.kappa.is_some() || args.costheta.is_some() {
            c.fail("robust-q", "cannot be combined with --kappa/--costheta");
            return Vec::new();
        }
        let qs = match parse_list(&q.replace(';', ",")) {
            Ok(v) => v,
            Err(e) => {
                c.fail("robust-q", e);
                return Vec::new();
            }
        };
        let mut out = Vec::new();
        for q in qs {
            match shift_from_robust_fraction(q) {
                Ok(s) => out.push(vec![s; n_atoms]),
                Err(e) => c.fail("robust-q", e),
            }
        }
        return out;
    }

    let mut groups = |flag: &str, raw: &Option<String>| -> Option<Vec<Vec<f64>>> {
        match raw {
            None => Some(vec![vec![1.0]]),
            Some(r) => match parse_groups(r) {
                Ok(g) => Some(g),
                Err(e) => {
                    c.fail(flag, e);
                    None
                }
            },
        }
    };
    let (Some(ks), Some(cs)) = (groups("kappa", &args.kappa), groups("costheta", &args.costheta)) else {
        return Vec::new();
    };
    let n = ks.len().max(cs.len());
    if ks.len() != n && ks.len() != 1 || cs.len() != n && cs.len() != 1 {
        c.fail("kappa", format!("{} shift(s) for kappa but {} for costheta", ks.len(), cs.len()));
        return Vec::new();
    }
    let mut out = Vec::new();
    for j in 0..n {
        let k = &ks[if ks.len() == 1 { 0 } else { j }];
        let cs = &cs[if cs.len() == 1 { 0 } else { j }];
        let mut ok = true;
        for (flag, v) in [("kappa", k), ("costheta", cs)] {
            if v.len() != 1 && v.len() != n_atoms {
                c.fail(flag, format!("shift {}: {} value(s) for {n_atoms} atom(s)", j + 1, v.len()));
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        let pick = |v: &Vec<f64>, i: usize| if v.len() == 1 { v[0] } else { v[i] };
        let mut shift = Vec::with_capacity(n_atoms);
        for i in 0..n_atoms {
            match AtomShift::new(pick(k, i), pick(cs, i)) {
                Ok(s) => shift.push(s),
                Err(e) => {
                    c.errors.push(format!("--kappa/--costheta: shift {}, atom {}: {e}", j + 1, i + 1));
                    ok = false;
                }
            }
        }
        if ok {
            out.push(shift);
        }
    }
    out
}

/// Spectrum plus one canonical `ShiftSpec` per requested shift.
fn model_and_shifts(c: &mut Check, args: &ShiftArgs) -> Option<(SpectralModel, Vec<ShiftSpec>)> {
    let atoms = parse_atoms(c, &args.spectrum);
    let shifts = parse_shifts(c, args, atoms.len().max(1));
    if atoms.is_empty() {
        return None;
    }
    if let Err(e) = SpectralModel::new(atoms.clone()) {
        c.fail("spectrum", e);
        return None;
    }
    let mut model = None;
    let mut specs = Vec::new();
    for s in shifts {
        match SpectralModel::with_shift(atoms.iter().copied().zip(s)) {
            Ok((m, spec)) => {
                model = Some(m);
                specs.push(spec);
            }
            Err(e) => c.fail("spectrum", e),
        }
    }
    Some((model?, specs))
}

fn problem_template(c: &mut Check, args: &ModelArgs) -> Option<(ProblemSpec, Vec<ShiftSpec>)> {
    let snr = c.float("snr", &args.snr, 1.0, true);
    let signal = c.float("signal", &args.signal, 1.0, true);
    let lambda = match args.lambda.as_deref().map(str::trim) {
        None | Some("optimal") => LambdaPolicy::Optimal,
        Some(s) => match parse_float(s) {
            Ok(v) if v > 0.0 => LambdaPolicy::Fixed(v),
            Ok(v) => {
                c.fail("lambda", format!("must be > 0 or `optimal`, got {v}"));
                LambdaPolicy::Optimal
            }
            Err(_) => {
                c.fail("lambda", format!("must be a positive number or `optimal`, got `{s}`"));
                LambdaPolicy::Optimal
            }
        },
    };
    let max_iters = c.count("max-iters", &args.max_iters, 100_000, 1);
    let (model, shifts) = model_and_shifts(c, &args.shift)?;
    let first = shifts.first()?.clone();
    let built = ProblemSpec::new(model, first, 1.0, snr, lambda).and_then(|p| p.with_signal(signal));
    match built {
        Ok(mut p) => {
            p.solver.max_iterations = max_iters;
            Some((p, shifts))
        }
        Err(e) => {
            c.errors.push(e.to_string());
            None
        }
    }
}

fn validate(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = Check::default();
    let run = cli.command.run_args();
    let seed = match &run.seed {
        None => 0,
        Some(s) => s.trim().parse::<u64>().unwrap_or_else(|_| {
            c.fail("seed", format!("must be an unsigned 64-bit integer, got `{}`", s.trim()));
            0
        }),
    };
    let threads = run.threads.as_ref().map(|_| c.count("threads", &run.threads, 1, 1));

    let task = match &cli.command {
        Command::Risk(a) => {
            let gammas = match &a.gamma {
                Some(g) => c.positive_list("gamma", g),
                None => {
                    c.fail("gamma", "is required");
                    Vec::new()
                }
            };
            let model = problem_template(&mut c, &a.model);
            model.map(|(template, shifts)| Task::Risk { template, gammas, shifts })
        }
        Command::Sweep(a) => {
            let gammas = c.gammas(&a.gamma, &a.gamma_grid, Some(DEFAULT_GAMMA_GRID));
            if gammas.windows(2).any(|w| !(w[1] > w[0])) {
                c.fail("gamma", "must be strictly increasing");
            }
            let model = problem_template(&mut c, &a.model);
            model.map(|(template, shifts)| Task::Sweep { template, gammas, shifts })
        }
        Command::Phase(a) => {
            let kappas = c.grid("kappa-grid", a.kappa_grid.as_deref().unwrap_or(DEFAULT_KAPPA_GRID));
            let cosines = c.grid("costheta-grid", a.costheta_grid.as_deref().unwrap_or(DEFAULT_COSTHETA_GRID));
            if kappas.iter().any(|k| *k < 0.0) {
                c.fail("kappa-grid", "kappa must be >= 0");
            }
            if cosines.iter().any(|x| x.abs() > 1.0) {
                c.fail("costheta-grid", "cos theta must lie in [-1, 1]");
            }
            let signal = c.float("signal", &a.signal, 1.0, true);
            Some(Task::Phase { kappas, cosines, signal })
        }
        Command::Mc(a) => {
            let gammas = c.gammas(&a.gamma, &a.gamma_grid, None);
            let dim = c.count("dim", &a.dim, 256, 1);
            let n_seeds = c.count("n-seeds", &a.n_seeds, 100, 2);
            let model = problem_template(&mut c, &a.model);
            if let Some((_, shifts)) = &model {
                if shifts.len() > 1 {
                    c.fail("kappa", "mc takes a single shift");
                }
            }
            model.map(|(template, _)| Task::Mc {
                template,
                gammas,
                options: McOptions { dim, whiten: a.whiten },
                n_seeds,
            })
        }
        Command::Whiten(a) => {
            model_and_shifts(&mut c, &a.shift).map(|(spectrum, shifts)| Task::Whiten { spectrum, shifts })
        }
    };
    c.finish()?;
    let task = task.ok_or_else(|| CliError::Usage(vec!["invalid arguments".into()]))?;
    Ok(RunConfig { task, out: run.out.clone(), seed, threads })
}

/// A finished table plus its one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub table: Table,
    pub summary: String,
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Runs the task on the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<Output, CliError> {
    match &cfg.task {
        Task::Risk { template, gammas, shifts } => {
            let mut rows = Vec::new();
            for (i, s) in shifts.iter().enumerate() {
                // a risk command is a list of points, not a grid
                let mut part = Vec::new();
                for &g in gammas {
                    let mut r = sweep::gamma_sweep(template, &[g], std::slice::from_ref(s))?;
                    part.append(&mut r);
                }
                part.iter_mut().for_each(|r| r.shift_index = i);
                rows.extend(part);
            }
            let (lo, hi) = range(rows.iter().map(|r| r.risk));
            let table = sweep::risk_table(&rows, template.spectrum.len(), shifts.len() > 1);
            let summary = format!("risk: {} row(s), R in [{lo:.10}, {hi:.10}]", rows.len());
            Ok(Output { table, summary })
        }
        Task::Sweep { template, gammas, shifts } => {
            let rows = sweep::gamma_sweep(template, gammas, shifts)?;
            let shapes = if gammas.len() >= 3 {
                let p = sweep::profiles(&rows, shifts.len())?;
                p.iter()
                    .enumerate()
                    .map(|(i, r)| format!("{i}={}", r.shape))
                    .collect::<Vec<_>>()
                    .join(" ")
            } else {
                "n/a (fewer than 3 gamma values)".into()
            };
            let table = sweep::risk_table(&rows, template.spectrum.len(), true);
            let summary = format!(
                "sweep: {} shift(s) x {} gamma value(s); profiles: {shapes}",
                shifts.len(),
                gammas.len()
            );
            Ok(Output { table, summary })
        }
        Task::Phase { kappas, cosines, signal } => {
            let rows = sweep::phase_grid(kappas, cosines, *signal)?;
            let count = |g: Regime| rows.iter().filter(|r| r.regime == g).count();
            let summary = format!(
                "phase: {} point(s); weak {}, strong {}, boundary {}",
                rows.len(),
                count(Regime::Weak),
                count(Regime::Strong),
                count(Regime::Boundary)
            );
            Ok(Output { table: sweep::phase_table(&rows), summary })
        }
        Task::Mc { template, gammas, options, n_seeds } => {
            let rows = sweep::mc_compare(template, gammas, *options, *n_seeds, cfg.seed)?;
            let zmax = rows.iter().map(|r| r.z().abs()).fold(0.0f64, f64::max);
            let summary = format!(
                "mc: {} gamma value(s) x {n_seeds} seeds at P = {}{}; max |z| = {zmax:.2}",
                rows.len(),
                options.dim,
                if options.whiten { " (whitened)" } else { "" }
            );
            Ok(Output { table: sweep::mc_table(&rows, &template.shift), summary })
        }
        Task::Whiten { spectrum, shifts } => {
            let table = sweep::whiten_table(spectrum, shifts)?;
            let (_, first) = ridgeshift_core::whiten_equivalent(spectrum, &shifts[0])?;
            let w = first.atoms()[0];
            let summary = format!(
                "whiten: {} shift(s); first: kappa_eff = {:.10}, costheta_eff = {:.10}",
                shifts.len(),
                w.kappa,
                w.cos_theta
            );
            Ok(Output { table, summary })
        }
    }
}

/// Executes with the requested worker count and writes the table.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let output = match cfg.threads {
        None => execute(cfg)?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
            pool.install(|| execute(cfg))?
        }
    };
    match &cfg.out {
        Some(path) => {
            output
                .table
                .write_atomic(path)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            println!("{}", output.summary);
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(output.table.to_csv().as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))?;
            eprintln!("{}", output.summary);
        }
    }
    Ok(output.summary)
}

pub fn main_with_args<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse(argv).and_then(|cfg| run(&cfg)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Info(text)) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
