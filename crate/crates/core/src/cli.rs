//! Command-line front end. Every subcommand prints a table to stdout and,
//! with `--out`, writes a CSV whose header lines (`# ...`) hold the run manifest.

use std::f64::consts::FRAC_PI_4;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::certify::{certify_point_with, Certificate, CertifyOptions, DEFAULT_MAX_CUBES, DEFAULT_S0};
use crate::corr::{BellTest, Correlators, NoiseParams};
use crate::easy_bound::chsh_entropy_bound;
use crate::error::{Error, Result};
use crate::hard_bound::{entropy_bound_xy, info_at_omega, BoundMethod};
use crate::keyrate::{critical_efficiency, optimize_rate, Method, Model, OptimizeOptions, DEFAULT_SEED, DEFAULT_STARTS};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "diqkd", version, about = "Device-independent QKD entropy bounds and key rates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower bound on H(A|E) for correlators (X, Y).
    Bound(BoundArgs),
    /// Bound from (X, Y) against the CHSH bound over a grid of the quantum set.
    Sweep(SweepArgs),
    /// Optimized key rates against detection efficiency.
    KeyrateCurve(CurveArgs),
    /// Critical detection efficiencies for the four protocol rows.
    Thresholds(ThresholdArgs),
    /// Certified lower bound by branch and bound.
    Certify(CertifyArgs),
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Noise parameter q = (1 - 2p)^2.
    #[arg(long = "q", conflicts_with = "p")]
    pub q: Option<f64>,
    /// Flip probability of noisy preprocessing.
    #[arg(long = "p")]
    pub p: Option<f64>,
}

impl NoiseArgs {
    fn resolve(&self, positional: Option<f64>) -> Result<NoiseParams> {
        match (positional, self.q, self.p) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                Err(Error::DomainError("give q either positionally or by flag, not both".into()))
            }
            (Some(q), None, None) | (None, Some(q), None) => NoiseParams::from_q(q),
            (None, None, Some(p)) => NoiseParams::from_p(p),
            (None, None, None) => Ok(NoiseParams::noiseless()),
            (None, Some(_), Some(_)) => Err(Error::DomainError("--q and --p are exclusive".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[arg(allow_negative_numbers = true)]
    pub x: f64,
    #[arg(allow_negative_numbers = true)]
    pub y: f64,
    /// Noise parameter q (same as --q).
    pub q_pos: Option<f64>,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Evaluate at this test angle instead of the best one.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Also run the certified branch and bound.
    #[arg(long)]
    pub certify: bool,
    #[arg(long, default_value_t = 0.01)]
    pub precision: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_CUBES)]
    pub max_cubes: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Test angle; defaults to the one chosen by the fast bound.
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub precision: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_CUBES)]
    pub max_cubes: u64,
    #[arg(long, default_value_t = DEFAULT_S0)]
    pub s0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Singlet,
    Qubit,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Model {
        match m {
            ModelArg::Singlet => Model::Singlet,
            ModelArg::Qubit => Model::Qubit,
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    pub starts: usize,
}

impl OptimizerArgs {
    fn options(&self) -> OptimizeOptions {
        OptimizeOptions { starts: self.starts, seed: self.seed, warm: Vec::new() }
    }
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Qubit)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 0.85)]
    pub eta_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta_step: f64,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Model column; both when omitted.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[command(flatten)]
    pub opt: OptimizerArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Run metadata embedded as `#` comments in CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<(String, String)>,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            inputs: Vec::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
        }
    }

    fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.push((key.to_string(), value.to_string()));
        self
    }

    pub fn header(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# subcommand = {}", self.subcommand);
        for (k, v) in &self.inputs {
            let _ = writeln!(s, "# {k} = {v}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed = {seed}");
        }
        let _ = writeln!(s, "# version = {}", self.version);
        let _ = writeln!(s, "# wall_time_s = {:.3}", self.wall_time_s);
        s
    }
}

/// 17 significant digits, the CSV number format.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rows of a CSV body.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn csv_body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    fn pretty(&self) -> String {
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| self.rows.iter().map(|r| short(&r[j]).len()).chain([self.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        let line = |cells: Vec<String>| -> String {
            cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ")
        };
        s.push_str(&line(self.columns.iter().map(|c| c.to_string()).collect()));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&line(r.iter().map(|c| short(c)).collect()));
            s.push('\n');
        }
        s
    }
}

/// Numbers shortened for terminal output.
fn short(cell: &str) -> String {
    match cell.parse::<f64>() {
        Ok(v) if cell.contains('e') => format!("{v:.6}"),
        _ => cell.to_string(),
    }
}

fn write_csv(path: &Option<PathBuf>, manifest: &RunManifest, table: &Table) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, format!("{}{}", manifest.header(), table.csv_body()))?;
    }
    Ok(())
}

fn point(args: &PointArgs) -> Result<(Correlators, f64)> {
    let noise = args.noise.resolve(args.q_pos)?;
    Ok((Correlators::new(args.x, args.y)?, noise.q()))
}

fn certificate_table(c: &Certificate) -> Table {
    let mut t = Table::new(&["key", "value"]);
    for line in c.to_record().lines().filter(|l| !l.starts_with("wall_time_s")) {
        if let Some((k, v)) = line.split_once(" = ") {
            t.rows.push(vec![k.to_string(), v.to_string()]);
        }
    }
    t
}

fn cmd_bound(a: &BoundArgs) -> Result<(RunManifest, Table, String)> {
    let (corr, q) = point(&a.point)?;
    let (entropy, omega, method) = match a.omega {
        Some(o) => {
            let info = info_at_omega(&corr, o, q)?;
            let m = if BellTest::new(o)?.is_easy() { BoundMethod::Analytic } else { BoundMethod::Ansatz };
            (1.0 - info, o, m)
        }
        None => {
            let b = entropy_bound_xy(&corr, q)?;
            (b.entropy, b.omega, b.method)
        }
    };
    let chsh = if corr.is_nonlocal() { chsh_entropy_bound(corr.chsh(), q)? } else { 0.0 };
    let mut table = Table::new(&["x", "y", "q", "omega", "method", "bound_xy", "bound_chsh"]);
    table.rows.push(vec![
        fmt_num(corr.x()),
        fmt_num(corr.y()),
        fmt_num(q),
        fmt_num(omega),
        method.to_string(),
        fmt_num(entropy),
        fmt_num(chsh),
    ]);
    let mut text = format!("H(A|E) >= {entropy:.5}  method={method}  omega={}\n", fmt_omega(omega));
    let mut manifest = RunManifest::new("bound")
        .input("x", a.point.x)
        .input("y", a.point.y)
        .input("q", q)
        .input("omega", a.omega.map_or("auto".to_string(), |o| o.to_string()));
    if a.certify {
        let opts = CertifyOptions { max_cubes: a.max_cubes, ..Default::default() };
        let c = certify_point_with(&corr, q, omega, a.precision, opts)?;
        text.push_str(&c.to_record());
        manifest = manifest.input("precision", a.precision).input("max_cubes", a.max_cubes);
        table.columns.push("certified");
        table.rows[0].push(fmt_num(c.entropy_lower_bound));
    }
    Ok((manifest, table, text))
}

fn fmt_omega(omega: f64) -> String {
    for (k, name) in [(1.0, "pi/4"), (2.0, "pi/2"), (0.5, "pi/8")] {
        if (omega - k * FRAC_PI_4).abs() < 1e-9 {
            return name.to_string();
        }
    }
    format!("{omega:.6}")
}

fn cmd_certify(a: &CertifyArgs) -> Result<(RunManifest, Table, String)> {
    let (corr, q) = point(&a.point)?;
    let omega = match a.omega {
        Some(o) => o,
        None => entropy_bound_xy(&corr, q)?.omega,
    };
    let opts = CertifyOptions { s0: a.s0, max_cubes: a.max_cubes };
    let c = certify_point_with(&corr, q, omega, a.precision, opts)?;
    let text = c.to_record();
    let manifest = RunManifest::new("certify")
        .input("x", a.point.x)
        .input("y", a.point.y)
        .input("q", q)
        .input("omega", omega)
        .input("precision", a.precision)
        .input("max_cubes", a.max_cubes)
        .input("s0", a.s0);
    Ok((manifest, certificate_table(&c), text))
}

/// Grid points (X, Y) with X + Y > 2 inside the quantum circle.
pub fn sweep_grid(step: f64) -> Vec<(f64, f64)> {
    let n = (2.0 / step).round() as usize;
    let mut pts = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            let (x, y) = (i as f64 * step, j as f64 * step);
            if x + y > 2.0 + 1e-12 && x * x + y * y <= 4.0 {
                pts.push((x, y));
            }
        }
    }
    pts
}

fn cmd_sweep(a: &SweepArgs) -> Result<(RunManifest, Table, String)> {
    if !(0.005..=0.2).contains(&a.step) {
        return Err(Error::DomainError(format!("grid step {} outside [0.005, 0.2]", a.step)));
    }
    let q = a.noise.resolve(None)?.q();
    let mut table = Table::new(&["x", "y", "bound_xy", "bound_chsh", "advantage"]);
    let mut worst = f64::INFINITY;
    let mut best = f64::NEG_INFINITY;
    for (x, y) in sweep_grid(a.step) {
        let corr = Correlators::new(x, y)?;
        let xy = entropy_bound_xy(&corr, q)?.entropy;
        let chsh = chsh_entropy_bound(corr.chsh(), q)?;
        let adv = xy - chsh;
        worst = worst.min(adv);
        best = best.max(adv);
        table.rows.push(vec![fmt_num(x), fmt_num(y), fmt_num(xy), fmt_num(chsh), fmt_num(adv)]);
    }
    let text = format!(
        "{} points, advantage in [{worst:.3e}, {best:.5}]\n",
        table.rows.len()
    );
    let manifest = RunManifest::new("sweep").input("step", a.step).input("q", q);
    Ok((manifest, table, text))
}

fn cmd_curve(a: &CurveArgs) -> Result<(RunManifest, Table, String)> {
    if !(0.0 <= a.eta_min && a.eta_min <= a.eta_max && a.eta_max <= 1.0 && a.eta_step > 0.0) {
        return Err(Error::DomainError(format!(
            "bad efficiency range [{}, {}] step {}",
            a.eta_min, a.eta_max, a.eta_step
        )));
    }
    let model = Model::from(a.model);
    let opts = a.opt.options();
    let n = ((a.eta_max - a.eta_min) / a.eta_step + 1e-9).floor() as usize;
    let mut table = Table::new(&["eta", "r_chsh", "r_xy", "omega_xy", "q_xy"]);
    for k in 0..=n {
        let eta = (a.eta_min + k as f64 * a.eta_step).min(1.0);
        let chsh = optimize_rate(eta, model, Method::CHSH_NOISY, &opts)?;
        let xy = optimize_rate(eta, model, Method::XY_NOISY, &opts)?;
        table.rows.push(vec![fmt_num(eta), fmt_num(chsh.rate), fmt_num(xy.rate), fmt_num(xy.omega), fmt_num(xy.q)]);
    }
    let manifest = RunManifest {
        seed: Some(a.opt.seed),
        ..RunManifest::new("keyrate-curve")
            .input("model", model.tag())
            .input("eta_min", a.eta_min)
            .input("eta_max", a.eta_max)
            .input("eta_step", a.eta_step)
            .input("starts", a.opt.starts)
    };
    Ok((manifest, table, String::new()))
}

fn cmd_thresholds(a: &ThresholdArgs) -> Result<(RunManifest, Table, String)> {
    let models: Vec<Model> = match a.model {
        Some(m) => vec![m.into()],
        None => vec![Model::Singlet, Model::Qubit],
    };
    let opts = a.opt.options();
    let mut columns = vec!["row", "method"];
    columns.extend(models.iter().map(|m| m.tag()));
    let mut table = Table::new(&columns);
    for (i, m) in Method::TABLE.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), m.tag().to_string()];
        for model in &models {
            row.push(fmt_num(critical_efficiency(*model, *m, a.tol, &opts)?));
        }
        table.rows.push(row);
    }
    let manifest = RunManifest {
        seed: Some(a.opt.seed),
        ..RunManifest::new("thresholds")
            .input("models", models.iter().map(|m| m.tag()).collect::<Vec<_>>().join(" "))
            .input("tol", a.tol)
            .input("starts", a.opt.starts)
    };
    Ok((manifest, table, String::new()))
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::QuantumSetViolation { .. }
        | Error::DomainError(_)
        | Error::DegenerateInput(_)
        | Error::InvariantViolation(_) => EXIT_VALIDATION,
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::Io(_) => EXIT_IO,
        Error::NumericalFailure(_) | Error::BracketFailure(_) => EXIT_FAILURE,
    }
}

/// Runs one parsed command: prints to stdout and writes the CSV if asked.
pub fn execute(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let (mut manifest, table, text, out) = match &cli.command {
        Command::Bound(a) => {
            let (m, t, s) = cmd_bound(a)?;
            (m, t, s, &a.out)
        }
        Command::Certify(a) => {
            let (m, t, s) = cmd_certify(a)?;
            (m, t, s, &a.out)
        }
        Command::Sweep(a) => {
            let (m, t, s) = cmd_sweep(a)?;
            (m, t, s, &a.out)
        }
        Command::KeyrateCurve(a) => {
            let (m, t, s) = cmd_curve(a)?;
            (m, t, s, &a.out)
        }
        Command::Thresholds(a) => {
            let (m, t, s) = cmd_thresholds(a)?;
            (m, t, s, &a.out)
        }
    };
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    if !matches!(cli.command, Command::Sweep(_)) {
        print!("{}", table.pretty());
    }
    print!("{text}");
    write_csv(out, &manifest, &table)
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn number_format_has_17_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(1.0).parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn omega_names() {
        assert_eq!(fmt_omega(FRAC_PI_4), "pi/4");
        assert_eq!(fmt_omega(FRAC_PI_2), "pi/2");
        assert_eq!(fmt_omega(1.0), "1.000000");
    }

    #[test]
    fn grid_stays_in_region() {
        let g = sweep_grid(0.05);
        assert!(!g.is_empty());
        assert!(g.iter().all(|(x, y)| x + y > 2.0 && x * x + y * y <= 4.0));
    }

    #[test]
    fn noise_flags_resolve() {
        let n = NoiseArgs { q: None, p: Some(0.1) };
        assert!((n.resolve(None).unwrap().q() - 0.64).abs() < 1e-12);
        assert!(n.resolve(Some(0.5)).is_err());
        let n = NoiseArgs { q: None, p: None };
        assert_eq!(n.resolve(None).unwrap().q(), 1.0);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::DomainError(String::new())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::BudgetExceeded { cap: 1, upper_bound: 0.0 }), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::Io(String::new())), EXIT_IO);
    }
}
