//! Argument and config-file handling, command dispatch and report output
//! for the `tsf` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use tsf_core::harness::{manufacture, run_suite, SuiteSizes};
use tsf_core::io::{format_tensor, grid_csv, parse_tensor, SpectralDump};
use tsf_core::navier_stokes::{advection, InitialGuess, NsSolveReport};
use tsf_core::random::{random_scalar, random_vector, FieldSpec};
use tsf_core::stokes::solve_stokes;
use tsf_core::{picard_solve, Lattice, NsSolveOptions, ScalarField, VectorField, ViscosityTensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text requested; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: tsf_core::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Help(_) => EXIT_OK,
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_SOLVER,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn core<T>(context: impl Into<String>, r: tsf_core::Result<T>) -> Result<T> {
    r.map_err(|source| CliError::Core {
        context: context.into(),
        source,
    })
}

#[derive(Parser, Debug, Clone)]
#[command(
    name = "tsf",
    version,
    about = "Spectral Stokes and Navier-Stokes solvers on the flat torus"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Symmetry report, ellipticity constant and norm of a tensor file.
    TensorCheck(TensorCheckArgs),
    /// Solve the linear Stokes system for given f (and g).
    StokesSolve(StokesArgs),
    /// Solve the stationary Navier-Stokes system by damped fixed-point iteration.
    NsSolve(NsArgs),
    /// Run seeded property suites.
    Verify(VerifyArgs),
    /// Sample a spectral dump on an N^n grid and write CSV.
    ExportGrid(ExportArgs),
    /// Generate a manufactured problem from a seeded exact solution.
    Manufacture(ManufactureArgs),
    /// Evaluate the equation residual of a velocity/pressure pair.
    Residual(ResidualArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Line-oriented `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TensorCheckArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StokesArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long)]
    pub f: Option<PathBuf>,
    /// Divergence data, or `none` for g = 0.
    #[arg(long, default_value = "none")]
    pub g: String,
    /// Sobolev index of the reported global bound.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub s: f64,
    /// Velocity output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pressure output.
    #[arg(long)]
    pub out_p: Option<PathBuf>,
    /// Remove a nonzero mean from the data (otherwise it is an error).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub project_mean: bool,
}

#[derive(Args, Debug, Clone)]
pub struct NsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long)]
    pub f: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub dealias: bool,
    /// Start from the Stokes solution (`stokes`) or from zero (`zero`).
    #[arg(long, default_value = "stokes")]
    pub initial: String,
    #[arg(long)]
    pub out_u: Option<PathBuf>,
    #[arg(long)]
    pub out_p: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub project_mean: bool,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Suite name, comma-separated list, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub draws: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Points per axis; defaults to 2m + 1.
    #[arg(long = "points")]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ManufactureArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    /// Spectral decay exponent of the exact fields.
    #[arg(long, default_value_t = 3.0)]
    pub decay: f64,
    /// Rescale u* to this H¹ norm.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Divergence-free u* (required with --nonlinear).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub solenoidal: bool,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub nonlinear: bool,
    #[arg(long)]
    pub out_f: Option<PathBuf>,
    #[arg(long)]
    pub out_g: Option<PathBuf>,
    #[arg(long)]
    pub out_u: Option<PathBuf>,
    #[arg(long)]
    pub out_p: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ResidualArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    #[arg(long)]
    pub u: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[arg(long)]
    pub f: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    pub g: String,
    /// Include the advection term.
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub nonlinear: bool,
    /// Exit with status 2 when either residual exceeds this value.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// A parsed command plus the effective option values for the report echo.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub echo: Vec<(String, String)>,
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(CliError::Usage(format!(
                "config line {}: empty key or value",
                i + 1
            )));
        }
        let key = k.replace('_', "-");
        if out.iter().any(|(x, _)| *x == key) {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key `{k}`",
                i + 1
            )));
        }
        out.push((key, v.to_string()));
    }
    Ok(out)
}

fn subcommand_name(args: &[OsString]) -> Option<String> {
    args.iter().skip(1).find_map(|a| {
        let s = a.to_str()?;
        (!s.starts_with('-')).then(|| s.to_string())
    })
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

fn usage(e: clap::Error) -> CliError {
    let text = e.render().to_string().trim_end().to_string();
    match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Help(text)
        }
        _ => CliError::Usage(text),
    }
}

/// Parses argv, merging in the `--config` file when given. Config keys are
/// long flag names; flags on the command line win.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let mut merged = args.clone();
    if let (Some(path), Some(sub)) = (config_path(&args), subcommand_name(&args)) {
        let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let entries = parse_config_text(&text)?;
        let cmd = Cli::command();
        let subcmd = cmd
            .find_subcommand(&sub)
            .ok_or_else(|| CliError::Usage(format!("unknown command `{sub}`")))?;
        let known: Vec<String> = subcmd
            .get_arguments()
            .filter_map(|a| a.get_long().map(str::to_string))
            .filter(|l| l != "config")
            .collect();
        let pos = args
            .iter()
            .position(|a| a.to_str() == Some(sub.as_str()))
            .expect("subcommand present");
        let mut tokens: Vec<OsString> = Vec::new();
        for (k, v) in entries {
            if !known.contains(&k) {
                return Err(CliError::Usage(format!(
                    "{}: unknown key `{k}` for `{sub}` (valid: {})",
                    path.display(),
                    known.join(", ")
                )));
            }
            tokens.push(format!("--{k}").into());
            tokens.push(v.into());
        }
        merged = args[..=pos].to_vec();
        merged.extend(tokens);
        merged.extend_from_slice(&args[pos + 1..]);
    }
    let matches = Cli::command()
        .try_get_matches_from(&merged)
        .map_err(usage)?;
    let cli = Cli::from_arg_matches(&matches).map_err(usage)?;
    let mut echo = Vec::new();
    if let Some((_, sub)) = matches.subcommand() {
        let ids: Vec<String> = sub.ids().map(|id| id.as_str().to_string()).collect();
        for id in ids {
            if id == "config" || id == "report" {
                continue;
            }
            if let Ok(Some(vals)) = sub.try_get_raw(&id) {
                let v: Vec<String> = vals.map(|v| v.to_string_lossy().into_owned()).collect();
                echo.push((id.replace('_', "-"), v.join(" ")));
            }
        }
    }
    echo.sort();
    let config = RunConfig {
        command: cli.command,
        echo,
    };
    validate(&config)?;
    Ok(config)
}

fn require<'a, T>(opt: &'a Option<T>, flag: &str, cmd: &str) -> Result<&'a T> {
    opt.as_ref()
        .ok_or_else(|| CliError::Usage(format!("`{cmd}` requires --{flag}")))
}

fn validate(config: &RunConfig) -> Result<()> {
    match &config.command {
        Command::TensorCheck(a) => {
            require(&a.tensor, "tensor", "tensor-check")?;
        }
        Command::StokesSolve(a) => {
            require(&a.tensor, "tensor", "stokes-solve")?;
            require(&a.f, "f", "stokes-solve")?;
            if !a.s.is_finite() {
                return Err(CliError::Usage("--s must be finite".into()));
            }
        }
        Command::NsSolve(a) => {
            require(&a.tensor, "tensor", "ns-solve")?;
            require(&a.f, "f", "ns-solve")?;
            if !(a.omega > 0.0 && a.omega <= 1.0) {
                return Err(CliError::Usage(format!(
                    "--omega must lie in (0, 1], got {}",
                    a.omega
                )));
            }
            if a.tol.is_nan() || a.tol <= 0.0 {
                return Err(CliError::Usage(format!(
                    "--tol must be positive, got {}",
                    a.tol
                )));
            }
            if a.max_iter == 0 {
                return Err(CliError::Usage("--max-iter must be at least 1".into()));
            }
            if a.initial != "stokes" && a.initial != "zero" {
                return Err(CliError::Usage(format!(
                    "--initial must be `stokes` or `zero`, got `{}`",
                    a.initial
                )));
            }
        }
        Command::Verify(a) => {
            if !(2..=3).contains(&a.n) {
                return Err(CliError::Usage(format!("--n must be 2 or 3, got {}", a.n)));
            }
            if a.m == 0 || a.draws == 0 {
                return Err(CliError::Usage("--m and --draws must be at least 1".into()));
            }
        }
        Command::ExportGrid(a) => {
            require(&a.input, "input", "export-grid")?;
            require(&a.out, "out", "export-grid")?;
            if a.points == Some(0) {
                return Err(CliError::Usage("--points must be at least 1".into()));
            }
        }
        Command::Manufacture(a) => {
            require(&a.tensor, "tensor", "manufacture")?;
            if a.m == 0 {
                return Err(CliError::Usage("--m must be at least 1".into()));
            }
            if a.nonlinear && !a.solenoidal {
                return Err(CliError::Usage(
                    "--nonlinear needs --solenoidal true".into(),
                ));
            }
            if let Some(x) = a.amplitude {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(CliError::Usage(format!(
                        "--amplitude must be a finite nonnegative number, got {x}"
                    )));
                }
            }
        }
        Command::Residual(a) => {
            require(&a.tensor, "tensor", "residual")?;
            require(&a.u, "u", "residual")?;
            require(&a.p, "p", "residual")?;
            require(&a.f, "f", "residual")?;
        }
    }
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_tensor(path: &Path) -> Result<ViscosityTensor> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| CliError::Core {
        context: path.display().to_string(),
        source: tsf_core::Error::Parse {
            line: 0,
            msg: e.to_string(),
        },
    })?;
    core(path.display().to_string(), parse_tensor(&text))
}

fn load_dump(path: &Path) -> Result<SpectralDump> {
    core(
        path.display().to_string(),
        SpectralDump::decode(&read_bytes(path)?),
    )
}

fn load_vector(path: &Path) -> Result<VectorField> {
    core(path.display().to_string(), load_dump(path)?.into_vector())
}

fn load_scalar(path: &Path) -> Result<ScalarField> {
    core(path.display().to_string(), load_dump(path)?.into_scalar())
}

fn load_optional_scalar(arg: &str) -> Result<Option<ScalarField>> {
    if arg == "none" {
        Ok(None)
    } else {
        load_scalar(Path::new(arg)).map(Some)
    }
}

/// Key-value report text with 17 significant digits for every float.
#[derive(Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn new(command: &str, echo: &[(String, String)]) -> Self {
        let mut r = Report::default();
        r.str("command", command);
        for (k, v) in echo {
            r.str(&format!("config.{k}"), v);
        }
        r
    }

    pub fn num(&mut self, key: &str, v: f64) {
        let _ = writeln!(self.text, "{key} = {v:.16e}");
    }

    pub fn int(&mut self, key: &str, v: usize) {
        let _ = writeln!(self.text, "{key} = {v}");
    }

    pub fn flag(&mut self, key: &str, v: bool) {
        let _ = writeln!(self.text, "{key} = {v}");
    }

    pub fn str(&mut self, key: &str, v: &str) {
        let _ = writeln!(self.text, "{key} = {v}");
    }

    pub fn line(&mut self, line: &str) {
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    fn emit(&self, dest: &Option<PathBuf>) -> Result<()> {
        match dest {
            Some(p) => write_atomic(p, self.text.as_bytes()),
            None => {
                print!("{}", self.text);
                Ok(())
            }
        }
    }
}

fn write_vector(path: &Option<PathBuf>, v: &VectorField) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, &SpectralDump::from_vector(v).encode()),
        None => Ok(()),
    }
}

fn write_scalar(path: &Option<PathBuf>, g: &ScalarField) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, &SpectralDump::from_scalar(g).encode()),
        None => Ok(()),
    }
}

fn check_mean(project: bool, f: &VectorField, g: Option<&ScalarField>) -> Result<()> {
    if project {
        return Ok(());
    }
    let mut worst = f
        .components()
        .iter()
        .map(|c| c.mean().norm())
        .fold(0.0, f64::max);
    if let Some(g) = g {
        worst = worst.max(g.mean().norm());
    }
    if worst > tsf_core::field::MEAN_WARN_TOL {
        return Err(CliError::Usage(format!(
            "data has a nonzero mean ({worst:e}) and --project-mean is false"
        )));
    }
    Ok(())
}

/// Runs a parsed command and returns the process exit status.
pub fn dispatch(config: &RunConfig) -> Result<i32> {
    match &config.command {
        Command::TensorCheck(a) => tensor_check(a, config),
        Command::StokesSolve(a) => stokes_cmd(a, config),
        Command::NsSolve(a) => ns_cmd(a, config),
        Command::Verify(a) => verify_cmd(a, config),
        Command::ExportGrid(a) => export_cmd(a),
        Command::Manufacture(a) => manufacture_cmd(a, config),
        Command::Residual(a) => residual_cmd(a, config),
    }
}

fn tensor_check(a: &TensorCheckArgs, config: &RunConfig) -> Result<i32> {
    let path = a.tensor.as_ref().expect("validated");
    let t = load_tensor(path)?;
    let mut r = Report::new("tensor-check", &config.echo);
    r.int("n", t.dim());
    let violations = t.symmetry_violations();
    r.int("symmetry_violations", violations.len());
    for v in violations.iter().take(16) {
        r.str(
            "violation",
            &format!("{} {} {} {}", v[0] + 1, v[1] + 1, v[2] + 1, v[3] + 1),
        );
    }
    r.num("tensor_norm", t.norm());
    r.num("min_restricted_eigenvalue", t.restricted_min_eigenvalue());
    let mut status = EXIT_OK;
    match t.ellipticity_constant() {
        Ok(c) => {
            r.flag("elliptic", true);
            r.num("ellipticity_constant", c);
        }
        Err(_) => {
            r.flag("elliptic", false);
            status = EXIT_VERIFY;
        }
    }
    if !violations.is_empty() {
        status = EXIT_VERIFY;
    }
    r.flag("valid", status == EXIT_OK);
    r.emit(&a.common.report)?;
    Ok(status)
}

fn stokes_cmd(a: &StokesArgs, config: &RunConfig) -> Result<i32> {
    let tensor_path = a.tensor.as_ref().expect("validated");
    let t = core(
        tensor_path.display().to_string(),
        load_tensor(tensor_path)?.validate(),
    )?;
    let f = load_vector(a.f.as_ref().expect("validated"))?;
    let g = load_optional_scalar(&a.g)?;
    check_mean(a.project_mean, &f, g.as_ref())?;
    let sol = core("stokes-solve", solve_stokes(&t, &f, g.as_ref(), a.s))?;
    write_vector(&a.out, &sol.u)?;
    write_scalar(&a.out_p, &sol.p)?;
    let rep = &sol.report;
    let c = &rep.constants;
    let mut r = Report::new("stokes-solve", &config.echo);
    r.int("n", f.lattice().dim());
    r.int("m", f.lattice().truncation());
    r.num("ellipticity_constant", c.ellipticity);
    r.num("tensor_norm", c.tensor_norm);
    r.num("c_uf", c.c_uf);
    r.num("c_ug", c.c_ug);
    r.num("c_pf", c.c_pf);
    r.num("c_pg", c.c_pg);
    r.int("modes_checked", rep.modes.len());
    r.num("max_mode_residual", rep.max_residual);
    r.num("min_u_slack", rep.min_u_slack);
    r.num("min_p_slack", rep.min_p_slack);
    r.int("estimate_failures", rep.estimate_failures);
    r.num("global.s", rep.global.s);
    r.num("global.u_norm", rep.global.u_norm);
    r.num("global.u_bound", rep.global.u_bound);
    r.num("global.u_margin", rep.global.u_margin());
    r.num("global.p_norm", rep.global.p_norm);
    r.num("global.p_bound", rep.global.p_bound);
    r.num("global.p_margin", rep.global.p_margin());
    r.num("max_divergence_defect", rep.max_divergence_defect);
    r.flag("mean_removed", rep.mean_removed);
    r.flag("estimates_hold", rep.estimates_hold());
    r.emit(&a.common.report)?;
    Ok(if rep.estimates_hold() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}

fn ns_report(r: &mut Report, rep: &NsSolveReport, status: &str) {
    r.str("status", status);
    r.int("iterations", rep.iterations);
    r.num("final_residual", rep.final_residual);
    r.num("final_omega", rep.final_omega);
    r.num("m0", rep.m0);
    r.num("u_h1", rep.u_h1);
    r.flag("bound_holds", rep.bound_holds);
    r.num("energy", rep.energy);
    r.num("max_divergence", rep.max_divergence);
    r.flag("mean_removed", rep.mean_removed);
    r.line("# residual history");
    r.line("iteration,residual,omega");
    for (i, (res, om)) in rep
        .residual_history
        .iter()
        .zip(&rep.omega_history)
        .enumerate()
    {
        r.line(&format!("{i},{res:.16e},{om:.16e}"));
    }
}

fn ns_cmd(a: &NsArgs, config: &RunConfig) -> Result<i32> {
    let tensor_path = a.tensor.as_ref().expect("validated");
    let t = core(
        tensor_path.display().to_string(),
        load_tensor(tensor_path)?.validate(),
    )?;
    let f = load_vector(a.f.as_ref().expect("validated"))?;
    check_mean(a.project_mean, &f, None)?;
    let opts = NsSolveOptions {
        omega: a.omega,
        max_iterations: a.max_iter,
        tolerance: a.tol,
        dealias: a.dealias,
        initial: if a.initial == "zero" {
            InitialGuess::Zero
        } else {
            InitialGuess::Stokes
        },
    };
    let mut r = Report::new("ns-solve", &config.echo);
    r.int("n", f.lattice().dim());
    r.int("m", f.lattice().truncation());
    match picard_solve(&t, &f, &opts) {
        Ok(sol) => {
            write_vector(&a.out_u, &sol.u)?;
            write_scalar(&a.out_p, &sol.p)?;
            ns_report(&mut r, &sol.report, "converged");
            r.emit(&a.common.report)?;
            Ok(EXIT_OK)
        }
        Err(tsf_core::Error::Diverged { report }) => {
            ns_report(&mut r, &report, "diverged");
            r.emit(&a.common.report)?;
            log::error!(
                "fixed-point iteration diverged after {} iterations",
                report.iterations
            );
            Ok(EXIT_SOLVER)
        }
        Err(tsf_core::Error::MaxIterations { report }) => {
            ns_report(&mut r, &report, "max-iterations");
            r.emit(&a.common.report)?;
            log::error!("no convergence within {} iterations", report.iterations);
            Ok(EXIT_SOLVER)
        }
        Err(e) => Err(CliError::Core {
            context: "ns-solve".into(),
            source: e,
        }),
    }
}

fn verify_cmd(a: &VerifyArgs, config: &RunConfig) -> Result<i32> {
    let names: Vec<&str> = a
        .suite
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let sizes = SuiteSizes {
        n: a.n,
        m: a.m,
        draws: a.draws,
    };
    let rep = match run_suite(&names, a.seed, sizes) {
        Err(e @ tsf_core::Error::UnknownSuite { .. }) => {
            return Err(CliError::Usage(e.to_string()))
        }
        other => core("verify", other)?,
    };
    let mut r = Report::new("verify", &config.echo);
    for s in &rep.suites {
        let cases: Vec<_> = rep.cases.iter().filter(|c| c.suite == *s).collect();
        let failed = cases.iter().filter(|c| !c.passed).count();
        r.int(&format!("{s}.cases"), cases.len());
        r.int(&format!("{s}.failures"), failed);
        r.num(
            &format!("{s}.min_margin"),
            rep.min_margin(s).unwrap_or(f64::NAN),
        );
    }
    r.line("# cases");
    r.line("suite,case,passed,value,margin");
    for c in &rep.cases {
        r.line(&format!(
            "{},{},{},{:.16e},{:.16e}",
            c.suite, c.case, c.passed, c.value, c.margin
        ));
    }
    r.int("failures", rep.failures());
    r.flag("passed", rep.all_passed());
    r.emit(&a.common.report)?;
    Ok(if rep.all_passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY
    })
}

fn export_cmd(a: &ExportArgs) -> Result<i32> {
    let input = a.input.as_ref().expect("validated");
    let dump = load_dump(input)?;
    let points = a.points.unwrap_or(dump.lattice.side());
    let csv = core("export-grid", grid_csv(&dump.components, points))?;
    write_atomic(a.out.as_ref().expect("validated"), csv.as_bytes())?;
    Ok(EXIT_OK)
}

fn manufacture_cmd(a: &ManufactureArgs, config: &RunConfig) -> Result<i32> {
    let tensor_path = a.tensor.as_ref().expect("validated");
    let t = load_tensor(tensor_path)?;
    let lattice = core("manufacture", Lattice::new(t.dim(), a.m))?;
    let mut spec = FieldSpec::new(a.decay);
    if a.solenoidal {
        spec = spec.solenoidal();
    }
    let mut u = random_vector(a.seed, &lattice, spec);
    if let Some(target) = a.amplitude {
        let norm = u.sobolev_norm(1.0);
        if norm > 0.0 {
            u = u.scaled(target / norm);
        }
        if a.solenoidal {
            u = u.leray_project();
        }
    }
    let p = random_scalar(a.seed.wrapping_add(1), &lattice, FieldSpec::new(a.decay));
    let mp = core("manufacture", manufacture(&u, &p, &t, a.nonlinear))?;
    write_vector(&a.out_f, &mp.f)?;
    write_scalar(&a.out_g, &mp.g)?;
    write_vector(&a.out_u, &mp.u_star)?;
    write_scalar(&a.out_p, &mp.p_star)?;
    let mut r = Report::new("manufacture", &config.echo);
    r.int("n", mp.f.lattice().dim());
    r.int("m", mp.f.lattice().truncation());
    r.num("u_h1", mp.u_star.sobolev_norm(1.0));
    r.num("p_l2", mp.p_star.sobolev_norm(0.0));
    r.num("f_hm1", mp.f.sobolev_norm(-1.0));
    r.num("g_l2", mp.g.sobolev_norm(0.0));
    r.num("u_max_divergence", mp.u_star.max_divergence());
    r.str("tensor", format_tensor(&t).lines().next().unwrap_or(""));
    r.emit(&a.common.report)?;
    Ok(EXIT_OK)
}

fn residual_cmd(a: &ResidualArgs, config: &RunConfig) -> Result<i32> {
    let t = load_tensor(a.tensor.as_ref().expect("validated"))?;
    let u = load_vector(a.u.as_ref().expect("validated"))?;
    let p = load_scalar(a.p.as_ref().expect("validated"))?;
    let f = load_vector(a.f.as_ref().expect("validated"))?;
    let g = load_optional_scalar(&a.g)?;
    if f.lattice() != u.lattice() || p.lattice() != u.lattice() {
        return Err(CliError::Usage("u, p and f must share a lattice".into()));
    }
    let (f, _) = f.remove_mean();
    let mut lhs = core("residual", t.stokes_operator(&u, &p))?.scaled(-1.0);
    if a.nonlinear {
        let bu = core("residual", advection(&u))?;
        lhs = core("residual", lhs.add(&bu))?;
    }
    let momentum = core("residual", lhs.sub(&f))?.sobolev_norm(-1.0);
    let div = u.divergence();
    let divergence = match g {
        Some(g) => {
            let g = core("residual", g.resampled(u.lattice()))?.remove_mean().0;
            core("residual", div.sub(&g))?.sobolev_norm(0.0)
        }
        None => div.sobolev_norm(0.0),
    };
    let mut r = Report::new("residual", &config.echo);
    r.int("n", u.lattice().dim());
    r.int("m", u.lattice().truncation());
    r.num("momentum_residual_hm1", momentum);
    r.num("divergence_residual_l2", divergence);
    let ok = a.tol.is_none_or(|tol| momentum <= tol && divergence <= tol);
    r.flag("within_tolerance", ok);
    r.emit(&a.common.report)?;
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY })
}

/// Sizes the global rayon pool from `TSF_THREADS` (unset or 0: automatic).
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let threads = match value.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v.parse::<usize>().map_err(|_| {
            CliError::Usage(format!(
                "TSF_THREADS must be a nonnegative integer, got `{v}`"
            ))
        })?,
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}
