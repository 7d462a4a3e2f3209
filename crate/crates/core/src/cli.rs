//! Command-line front end.
//!
//! Every command prints one JSON [`RunReport`] on stdout. Exit status is 0
//! when every predicate in the report holds, 1 when one fails and 2 when the
//! invocation or its inputs are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cnd::{
    check_cnd_matrix, check_metrizable, embed, geometric_grid, probe_bernstein,
    probe_completely_monotone, MonotonicityReport, DEFAULT_CND_TOL, DEFAULT_EMBED_TOL, GRID_RATIO,
};
use crate::error::Error;
use crate::families::{classify_matrix_gaussian, matern, matern_oracle, MatrixGaussianInstance, CLASS_REL_TOL};
use crate::functions::Func1;
use crate::hyperbolic::{check_hyperbolic, check_log_conditional, lift, HyperboloidPoint};
use crate::kernel::{gram, KernelSpec, Point};
use crate::mmd::{kernel_id, measure_distance, mmd_distance, spd_probe, DiscreteMeasure};
use crate::numerics::{default_tol_scale, sym_eigen, PsdClass, PsdVerdict, SymMatrix};
use crate::report::{ClassReport, Witness};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "KERNELFORGE_THREADS";

/// Agreement required between the closed-form and quadrature Matérn values.
const MATERN_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "kernelforge", version, about = "Build kernels and certify their properties on finite samples")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gram matrix of a kernel on a point file, optionally certified.
    Gram(GramArgs),
    /// Run one predicate on a matrix, a kernel sample or a scalar function.
    Check(CheckArgs),
    /// Hilbert space embedding of a CND matrix.
    Embed(EmbedArgs),
    /// Matérn kernel value, optionally against the quadrature oracle.
    Matern(MaternArgs),
    /// MMD between two samples.
    Mmd(MmdArgs),
    /// Classify a matrix Gaussian kernel.
    ClassifyMatrixGaussian(ClassifyArgs),
    /// Spectral SPD test with a seeded random energy search.
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Points CSV with a header row.
    #[arg(long)]
    pub points: PathBuf,
    /// Site table resolving a `site_id` column.
    #[arg(long)]
    pub sites: Option<PathBuf>,
    /// Lift the coordinate columns onto the hyperboloid.
    #[arg(long)]
    pub lift: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GramCheck {
    Pd,
    Psd,
}

#[derive(Debug, Args)]
pub struct GramArgs {
    /// Kernel spec JSON.
    #[arg(long)]
    pub kernel: PathBuf,
    #[command(flatten)]
    pub points: PointArgs,
    #[arg(long, value_enum)]
    pub check: Option<GramCheck>,
    /// Eigenvalue tolerance scale, default `1e-10 · n`.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Where to write the matrix.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Predicate {
    Cnd,
    Metrizable,
    Hyperbolic,
    LogConditional,
    Cm,
    Bernstein,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub predicate: Predicate,
    /// Matrix CSV without header.
    #[arg(long, visible_alias = "matrix")]
    pub gamma: Option<PathBuf>,
    /// Kernel spec JSON, evaluated on `--points`.
    #[arg(long, requires = "points")]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    pub lift: bool,
    /// Scalar function JSON for `cm` and `bernstein`.
    #[arg(long)]
    pub function: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub grid_max: f64,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long, visible_alias = "matrix")]
    pub gamma: Option<PathBuf>,
    #[arg(long, requires = "points")]
    pub kernel: Option<PathBuf>,
    #[arg(long)]
    pub points: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    pub lift: bool,
    /// Row whose embedding is pinned at the origin.
    #[arg(long, default_value_t = 0)]
    pub base: usize,
    /// Relative eigenvalue cut-off for the rank.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Where to write the coordinates.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct MaternArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub nu: f64,
    /// Also evaluate the quadrature oracle.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct MmdArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    /// Two sample files, `--points A --points B`; an optional `weight`
    /// column turns a file into a weighted measure.
    #[arg(long, required = true)]
    pub points: Vec<PathBuf>,
    #[arg(long)]
    pub sites: Option<PathBuf>,
    #[arg(long)]
    pub lift: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Coefficient matrix CSV.
    #[arg(long)]
    pub a: PathBuf,
    /// Exponent matrix CSV.
    #[arg(long)]
    pub gamma: PathBuf,
    /// Spatial dimension.
    #[arg(long)]
    pub m: u32,
    /// Class tolerance relative to `max|Γ|`.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub kernel: PathBuf,
    #[command(flatten)]
    pub points: PointArgs,
    #[arg(long, default_value_t = 64)]
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Verdict {
    Predicate(ClassReport),
    Psd(PsdVerdict),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of each input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    pub verdicts: Vec<Verdict>,
    pub numbers: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
}

impl RunReport {
    fn new(command: &str, seed: u64) -> Self {
        RunReport {
            command: command.to_string(),
            inputs: BTreeMap::new(),
            verdicts: Vec::new(),
            numbers: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            seed,
        }
    }

    fn num(&mut self, name: &str, v: f64) {
        self.numbers.insert(name.to_string(), v);
    }

    fn tol(&mut self, name: &str, v: f64) {
        self.tolerances.insert(name.to_string(), v);
    }

    /// 0 when every predicate holds, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        let failed = self
            .verdicts
            .iter()
            .any(|v| matches!(v, Verdict::Predicate(r) if !r.verdict));
        i32::from(failed)
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(Error::NotCnd { .. } | Error::Metrizability(_)) => 1,
            _ => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// A file the command writes besides the report.
enum Artifact {
    Matrix(Vec<Vec<f64>>),
    Coordinates { header: Vec<String>, rows: Vec<Vec<f64>> },
}

/// Reads input files and records their digests.
struct Inputs<'a> {
    report: &'a mut RunReport,
}

impl Inputs<'_> {
    fn read(&mut self, role: &str, path: &Path) -> CliResult<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.report.inputs.insert(role.to_string(), digest);
        String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{}: not valid UTF-8", path.display())))
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    return 0;
                }
                _ => 2,
            };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(stderr, "error: {}", e.message());
        return 2;
    }
    match execute(cli) {
        Ok(report) => match serde_json::to_string_pretty(&report) {
            Ok(s) => {
                if writeln!(stdout, "{s}").is_err() {
                    return 2;
                }
                report.exit_code()
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot serialize report: {e}");
                2
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(cli: Cli) -> CliResult<RunReport> {
    let seed = cli.seed;
    match cli.command {
        Command::Gram(a) => cmd_gram(a, seed),
        Command::Check(a) => cmd_check(a, seed),
        Command::Embed(a) => cmd_embed(a, seed),
        Command::Matern(a) => cmd_matern(a, seed),
        Command::Mmd(a) => cmd_mmd(a, seed),
        Command::ClassifyMatrixGaussian(a) => cmd_classify(a, seed),
        Command::Probe(a) => cmd_probe(a, seed),
    }
}

fn cmd_gram(a: GramArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new("gram", seed);
    let mut inputs = Inputs { report: &mut report };
    let spec = read_kernel(&mut inputs, &a.kernel)?;
    let points = read_point_args(&mut inputs, &a.points.points, a.points.sites.as_deref(), a.points.lift, "points")?;
    let mut g = gram(&spec, &points)?;
    let n = points.len();
    let tol_scale = a.tol.unwrap_or_else(|| default_tol_scale(n));
    let verdict = g.classify(Some(tol_scale))?.clone();
    report.num("n", n as f64);
    report.num("lambda_min", verdict.lambda_min);
    report.num("lambda_max", verdict.lambda_max);
    report.tol("tol_scale", tol_scale);
    report.tol("tol_used", verdict.tol_used);
    report.tol("pd_threshold", verdict.pd_threshold);
    if let Some(check) = a.check {
        let (name, ok) = match check {
            GramCheck::Pd => ("pd", verdict.class == PsdClass::Pd),
            GramCheck::Psd => ("psd", verdict.class.is_psd()),
        };
        let witness = if ok {
            None
        } else {
            Some(gram_witness(&points, &g.matrix, &verdict)?)
        };
        report.verdicts.push(Verdict::Predicate(
            ClassReport::new(name, ok)
                .with_witness(witness)
                .tol("tol_used", verdict.tol_used)
                .tol("pd_threshold", verdict.pd_threshold)
                .num("lambda_min", verdict.lambda_min),
        ));
    }
    report.verdicts.insert(0, Verdict::Psd(verdict));
    if let Some(out) = &a.out {
        write_artifact(out, a.format, &Artifact::Matrix(g.matrix.to_rows()))?;
    }
    Ok(report)
}

/// A duplicated point pair when there is one, else the bottom eigenvector.
fn gram_witness(points: &[Point], m: &SymMatrix, verdict: &PsdVerdict) -> CliResult<Witness> {
    let mut first: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    for (j, p) in points.iter().enumerate() {
        if let Some(&i) = first.get(&p.key()) {
            return Ok(Witness::Pair {
                i,
                j,
                value: verdict.lambda_min,
            });
        }
        first.insert(p.key(), j);
    }
    let spec = sym_eigen(m, true)?;
    let mut v = spec.eigenvectors.expect("requested")[0].clone();
    normalize_sign(&mut v);
    Ok(Witness::Eigen {
        value: verdict.lambda_min,
        vector: v,
    })
}

fn normalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Matrix from `--gamma`, or the Gram of `--kernel` on `--points`.
fn matrix_source(
    inputs: &mut Inputs,
    gamma: Option<&Path>,
    kernel: Option<&Path>,
    points: Option<&Path>,
    sites: Option<&Path>,
    lift_points: bool,
) -> CliResult<(SymMatrix, Option<Vec<Point>>)> {
    match (gamma, kernel, points) {
        (Some(g), None, None) => Ok((read_matrix(inputs, "gamma", g)?, None)),
        (None, Some(k), Some(p)) => {
            let spec = read_kernel(inputs, k)?;
            let pts = read_point_args(inputs, p, sites, lift_points, "points")?;
            Ok((gram(&spec, &pts)?.matrix, Some(pts)))
        }
        _ => Err(CliError::Input(
            "give either --gamma or both --kernel and --points".into(),
        )),
    }
}

fn cmd_check(a: CheckArgs, seed: u64) -> CliResult<RunReport> {
    let name = match a.predicate {
        Predicate::Cnd => "cnd",
        Predicate::Metrizable => "metrizable",
        Predicate::Hyperbolic => "hyperbolic",
        Predicate::LogConditional => "log-conditional",
        Predicate::Cm => "cm",
        Predicate::Bernstein => "bernstein",
    };
    let mut report = RunReport::new(&format!("check {name}"), seed);
    let mut inputs = Inputs { report: &mut report };
    let verdict = match a.predicate {
        Predicate::Cm | Predicate::Bernstein => {
            let Some(path) = &a.function else {
                return Err(CliError::Input(format!("check {name} needs --function")));
            };
            let text = inputs.read("function", path)?;
            let f: Func1 = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            f.validate()?;
            let grid = geometric_grid(a.grid_min, a.grid_max, GRID_RATIO)?;
            let probe = if a.predicate == Predicate::Cm {
                probe_completely_monotone(&f, &grid, a.order)?
            } else {
                probe_bernstein(&f, &grid, a.order)?
            };
            report.tol("grid_min", a.grid_min);
            report.tol("grid_max", a.grid_max);
            report.tol("grid_ratio", GRID_RATIO);
            monotonicity_report(&probe)
        }
        _ => {
            let (m, points) = matrix_source(
                &mut inputs,
                a.gamma.as_deref(),
                a.kernel.as_deref(),
                a.points.as_deref(),
                a.sites.as_deref(),
                a.lift,
            )?;
            let tol = a.tol.unwrap_or(DEFAULT_CND_TOL);
            report.tol("tol", tol);
            report.num("n", m.n() as f64);
            match a.predicate {
                Predicate::Cnd => {
                    let r = check_cnd_matrix(&m, tol)?;
                    ClassReport::new("cnd", r.is_cnd)
                        .with_witness(r.witness_weights.map(|vector| Witness::Eigen {
                            value: r.lambda_max_projected,
                            vector,
                        }))
                        .tol("tol", tol)
                        .tol("tol_used", r.tol_used)
                        .num("lambda_max_projected", r.lambda_max_projected)
                }
                Predicate::Metrizable => check_metrizable(&m, points.as_deref(), tol)?,
                Predicate::Hyperbolic => check_hyperbolic(&m, tol)?,
                _ => check_log_conditional(&m, points.as_deref(), tol)?,
            }
        }
    };
    report.verdicts.push(Verdict::Predicate(verdict));
    Ok(report)
}

fn monotonicity_report(p: &MonotonicityReport) -> ClassReport {
    let predicate = match p.property {
        crate::cnd::Monotonicity::CompletelyMonotone => "completely_monotone",
        crate::cnd::Monotonicity::Bernstein => "bernstein",
    };
    ClassReport::new(predicate, p.pass())
        .with_witness(p.violations.first().map(|v| Witness::Order {
            order: v.order,
            point: v.point,
            value: v.value,
        }))
        .tol("rel_tol", p.rel_tol)
        .num("order_checked", p.order_checked as f64)
        .num("grid_points", p.grid.len() as f64)
        .num("violations", p.violations.len() as f64)
}

fn cmd_embed(a: EmbedArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new("embed", seed);
    let mut inputs = Inputs { report: &mut report };
    let (m, _) = matrix_source(
        &mut inputs,
        a.gamma.as_deref(),
        a.kernel.as_deref(),
        a.points.as_deref(),
        a.sites.as_deref(),
        a.lift,
    )?;
    let tol = a.tol.unwrap_or(DEFAULT_EMBED_TOL);
    report.tol("tol", tol);
    report.tol("cnd_tol", DEFAULT_CND_TOL);
    report.num("n", m.n() as f64);
    if m.n() >= 2 {
        let c = check_cnd_matrix(&m, DEFAULT_CND_TOL)?;
        report.num("lambda_max_projected", c.lambda_max_projected);
        report.tol("cnd_tol_used", c.tol_used);
        if !c.is_cnd {
            report.verdicts.push(Verdict::Predicate(
                ClassReport::new("cnd", false)
                    .with_witness(c.witness_weights.map(|vector| Witness::Eigen {
                        value: c.lambda_max_projected,
                        vector,
                    }))
                    .tol("tol_used", c.tol_used)
                    .num("lambda_max_projected", c.lambda_max_projected),
            ));
            return Ok(report);
        }
    }
    let e = embed(&m, a.base, tol)?;
    let err = e.relative_error(&m);
    report.num("rank", e.rank as f64);
    report.num("base_index", e.base_index as f64);
    report.num("relative_error", err);
    report.verdicts.push(Verdict::Predicate(
        ClassReport::new("cnd", true).num("rank", e.rank as f64),
    ));
    if let Some(out) = &a.out {
        let mut header: Vec<String> = (0..e.rank).map(|k| format!("h{k}")).collect();
        header.push("f".into());
        let rows = e
            .coords
            .iter()
            .zip(&e.f)
            .map(|(h, f)| h.iter().copied().chain([*f]).collect())
            .collect();
        write_artifact(out, a.format, &Artifact::Coordinates { header, rows })?;
    }
    Ok(report)
}

fn cmd_matern(a: MaternArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new("matern", seed);
    let v = matern(a.r, a.alpha, a.nu)?;
    report.num("r", a.r);
    report.num("alpha", a.alpha);
    report.num("nu", a.nu);
    report.num("value", v);
    if a.oracle {
        let o = matern_oracle(a.r, a.alpha, a.nu)?;
        let gap = if v == o { 0.0 } else { (v - o).abs() / v.abs().max(o.abs()) };
        report.num("oracle", o);
        report.num("relative_gap", gap);
        report.tol("gap_tol", MATERN_GAP_TOL);
        report.verdicts.push(Verdict::Predicate(
            ClassReport::new("matern_dual_path", gap <= MATERN_GAP_TOL)
                .tol("gap_tol", MATERN_GAP_TOL)
                .num("relative_gap", gap),
        ));
    }
    Ok(report)
}

fn cmd_mmd(a: MmdArgs, seed: u64) -> CliResult<RunReport> {
    if a.points.len() != 2 {
        return Err(CliError::Input(format!(
            "mmd needs exactly two --points files, got {}",
            a.points.len()
        )));
    }
    let mut report = RunReport::new("mmd", seed);
    let mut inputs = Inputs { report: &mut report };
    let spec = read_kernel(&mut inputs, &a.kernel)?;
    let site_table = read_sites(&mut inputs, a.sites.as_deref(), a.lift)?;
    let lift_points = a.lift && site_table.is_none();
    let mut tables = vec![];
    for (role, path) in [("points_a", &a.points[0]), ("points_b", &a.points[1])] {
        let text = inputs.read(role, path)?;
        tables.push(parse_table(&path.display().to_string(), &text, site_table.as_ref(), lift_points)?);
    }
    let (na, nb) = (tables[0].0.len(), tables[1].0.len());
    let d = match (&tables[0], &tables[1]) {
        // plain samples take the count-merging path, exact on equal multisets
        ((pa, None), (pb, None)) => mmd_distance(&spec, pa, pb)?,
        _ => {
            let mut ms = tables.into_iter().map(|(p, w)| to_measure(p, w));
            let (mu, nu) = (ms.next().expect("two")?, ms.next().expect("two")?);
            measure_distance(&spec, &mu, &nu)?
        }
    };
    report.num("mmd", d);
    report.num("energy", d * d);
    report.num("n_a", na as f64);
    report.num("n_b", nb as f64);
    report.tol("negative_energy_tol", 1e-10);
    report.inputs.insert("kernel_id".into(), kernel_id(&spec));
    Ok(report)
}

fn cmd_classify(a: ClassifyArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new("classify-matrix-gaussian", seed);
    let mut inputs = Inputs { report: &mut report };
    let am = read_matrix(&mut inputs, "a", &a.a)?;
    let gm = read_matrix(&mut inputs, "gamma", &a.gamma)?;
    if am.n() != gm.n() {
        return Err(CliError::Input(format!(
            "a is {0}x{0} but gamma is {1}x{1}",
            am.n(),
            gm.n()
        )));
    }
    let tol = a.tol.unwrap_or(CLASS_REL_TOL);
    let inst = MatrixGaussianInstance { a: am, gamma: gm, m: a.m };
    let r = classify_matrix_gaussian(&inst, Some(tol))?;
    report.tol("tol", tol);
    report.tol("class_tol_used", r.class_tol_used);
    report.num("m", a.m as f64);
    report.num("channels", inst.a.n() as f64);
    report.num("classes", r.classes.len() as f64);
    report.num("gamma_lambda_max_projected", r.gamma_lambda_max_projected);
    report.verdicts.push(Verdict::Predicate(
        ClassReport::new("spd", r.spd)
            .tol("psd_tol_used", r.a_verdict.tol_used)
            .tol("pd_threshold", r.a_verdict.pd_threshold)
            .num("a_lambda_min", r.a_verdict.lambda_min),
    ));
    report.verdicts.push(Verdict::Predicate(
        ClassReport::new("c0_universal", r.c0_universal)
            .with_witness(r.failing_class.clone().map(|indices| Witness::IndexSet { indices }))
            .tol("class_tol_used", r.class_tol_used)
            .tol("pd_threshold", r.c_verdict.pd_threshold)
            .num("c_lambda_min", r.c_verdict.lambda_min),
    ));
    Ok(report)
}

fn cmd_probe(a: ProbeArgs, seed: u64) -> CliResult<RunReport> {
    let mut report = RunReport::new("probe", seed);
    let mut inputs = Inputs { report: &mut report };
    let spec = read_kernel(&mut inputs, &a.kernel)?;
    let points = read_point_args(&mut inputs, &a.points.points, a.points.sites.as_deref(), a.points.lift, "points")?;
    let r = spd_probe(&spec, &points, a.trials, seed)?;
    report.num("n", points.len() as f64);
    for (k, v) in &r.tolerances {
        report.tol(k, *v);
    }
    report.verdicts.push(Verdict::Predicate(r));
    Ok(report)
}

fn read_kernel(inputs: &mut Inputs, path: &Path) -> CliResult<KernelSpec> {
    let text = inputs.read("kernel", path)?;
    KernelSpec::from_json(&text).map_err(|e| CliError::Input(format!("{}: {}", path.display(), e)))
}

fn read_point_args(
    inputs: &mut Inputs,
    points: &Path,
    sites: Option<&Path>,
    lift_coords: bool,
    role: &str,
) -> CliResult<Vec<Point>> {
    let site_table = read_sites(inputs, sites, lift_coords)?;
    let text = inputs.read(role, points)?;
    // with a site table the lift applies to the sites, not the spatial part
    let lift_points = lift_coords && site_table.is_none();
    parse_points_inner(&points.display().to_string(), &text, site_table.as_ref(), lift_points)
}

fn read_sites(inputs: &mut Inputs, sites: Option<&Path>, lift_coords: bool) -> CliResult<Option<BTreeMap<String, Point>>> {
    match sites {
        Some(s) => {
            let text = inputs.read("sites", s)?;
            Ok(Some(parse_sites(&s.display().to_string(), &text, lift_coords)?))
        }
        None => Ok(None),
    }
}

fn read_matrix(inputs: &mut Inputs, role: &str, path: &Path) -> CliResult<SymMatrix> {
    let text = inputs.read(role, path)?;
    parse_matrix_inner(&path.display().to_string(), &text)
}

/// Symmetric matrix as header-less CSV, or as a JSON array of rows.
pub fn parse_matrix(name: &str, text: &str) -> std::result::Result<SymMatrix, String> {
    parse_matrix_inner(name, text).map_err(|e| e.message())
}

fn parse_matrix_inner(name: &str, text: &str) -> CliResult<SymMatrix> {
    if text.trim_start().starts_with('[') {
        let rows: Vec<Vec<f64>> =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        if rows.is_empty() {
            return Err(CliError::Input(format!("{name}: empty matrix")));
        }
        return SymMatrix::from_rows_checked(&rows, 1e-12).map_err(|e| CliError::Input(format!("{name}: {e}")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(k, f)| parse_f64(name, line, &format!("column {k}"), f))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{name}: empty matrix")));
    }
    SymMatrix::from_rows_checked(&rows, 1e-12).map_err(|e| CliError::Input(format!("{name}: {e}")))
}

fn csv_error(name: &str, e: csv::Error) -> CliError {
    let at = e.position().map(|p| format!(" line {}", p.line())).unwrap_or_default();
    CliError::Input(format!("{name}:{at}: {e}"))
}

fn parse_f64(name: &str, line: u64, field: &str, s: &str) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(CliError::Input(format!("{name}: line {line}, field '{field}': value must be finite"))),
        Err(_) => Err(CliError::Input(format!("{name}: line {line}, field '{field}': cannot parse '{s}' as a number"))),
    }
}

/// Column roles of a points or sites header.
struct Layout {
    x: Vec<usize>,
    site_id: Option<usize>,
    t: Option<usize>,
    channel: Option<usize>,
    weight: Option<usize>,
}

fn layout(name: &str, header: &csv::StringRecord) -> CliResult<Layout> {
    let mut xs: BTreeMap<usize, usize> = BTreeMap::new();
    let mut l = Layout {
        x: vec![],
        site_id: None,
        t: None,
        channel: None,
        weight: None,
    };
    let mut seen = BTreeSet::new();
    for (col, h) in header.iter().enumerate() {
        if !seen.insert(h.to_string()) {
            return Err(CliError::Input(format!("{name}: line 1: duplicate column '{h}'")));
        }
        match h {
            "site_id" => l.site_id = Some(col),
            "t" => l.t = Some(col),
            "channel" => l.channel = Some(col),
            "weight" => l.weight = Some(col),
            _ => match h.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                Some(k) if h == format!("x{k}") => {
                    xs.insert(k, col);
                }
                _ => {
                    return Err(CliError::Input(format!("{name}: line 1: unknown column '{h}'")));
                }
            },
        }
    }
    for (expect, (k, col)) in xs.into_iter().enumerate() {
        if k != expect {
            return Err(CliError::Input(format!(
                "{name}: line 1: coordinate columns must be x0..x{{d-1}}, missing 'x{expect}'"
            )));
        }
        l.x.push(col);
    }
    Ok(l)
}

fn base_point(name: &str, line: u64, x: Vec<f64>, t: Option<f64>, lift_coords: bool) -> CliResult<Point> {
    let at = |e: Error| CliError::Input(format!("{name}: line {line}: {e}"));
    match (t, lift_coords) {
        (Some(_), true) => Err(CliError::Input(format!(
            "{name}: --lift conflicts with a 't' column"
        ))),
        (Some(t), false) => Ok(Point::Hyperboloid(HyperboloidPoint::new(x, t).map_err(at)?)),
        (None, true) => Ok(Point::Hyperboloid(lift(&x).map_err(at)?)),
        (None, false) => Point::euclidean(x).map_err(at),
    }
}

fn parse_sites(name: &str, text: &str, lift_coords: bool) -> CliResult<BTreeMap<String, Point>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_error(name, e))?.clone();
    let l = layout(name, &header)?;
    let Some(id_col) = l.site_id else {
        return Err(CliError::Input(format!("{name}: line 1: site table needs a 'site_id' column")));
    };
    if l.channel.is_some() || l.weight.is_some() {
        return Err(CliError::Input(format!(
            "{name}: line 1: site table cannot carry 'channel' or 'weight'"
        )));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let x = l
            .x
            .iter()
            .map(|&c| parse_f64(name, line, &header[c], &rec[c]))
            .collect::<CliResult<Vec<f64>>>()?;
        let t = l.t.map(|c| parse_f64(name, line, "t", &rec[c])).transpose()?;
        let id = rec[id_col].to_string();
        let p = base_point(name, line, x, t, lift_coords)?;
        if out.insert(id.clone(), p).is_some() {
            return Err(CliError::Input(format!("{name}: line {line}, field 'site_id': duplicate id '{id}'")));
        }
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{name}: site table has no rows")));
    }
    Ok(out)
}

/// Points CSV with a header row. Columns: `x0..x{d-1}`, and optionally
/// `site_id` (product domain, resolved in `sites`), `t` (hyperboloid
/// ambient time) and `channel` (matrix-kernel output index). A `site_id`
/// without coordinate columns stands for the site itself. A `weight` column
/// is only accepted by [`parse_measure`].
pub fn parse_points(
    name: &str,
    text: &str,
    sites: Option<&BTreeMap<String, Point>>,
    lift_coords: bool,
) -> std::result::Result<Vec<Point>, String> {
    parse_points_inner(name, text, sites, lift_coords).map_err(|e| e.message())
}

/// Points CSV as a measure: atoms weighted by the `weight` column, or
/// `1/n` each without one.
pub fn parse_measure(
    name: &str,
    text: &str,
    sites: Option<&BTreeMap<String, Point>>,
    lift_coords: bool,
) -> std::result::Result<DiscreteMeasure, String> {
    parse_measure_inner(name, text, sites, lift_coords).map_err(|e| e.message())
}

fn parse_measure_inner(
    name: &str,
    text: &str,
    sites: Option<&BTreeMap<String, Point>>,
    lift_coords: bool,
) -> CliResult<DiscreteMeasure> {
    let (points, weights) = parse_table(name, text, sites, lift_coords)?;
    to_measure(points, weights)
}

fn to_measure(points: Vec<Point>, weights: Option<Vec<f64>>) -> CliResult<DiscreteMeasure> {
    let n = points.len() as f64;
    let weights = weights.unwrap_or_else(|| vec![1.0 / n; points.len()]);
    Ok(DiscreteMeasure::new(points.into_iter().zip(weights).collect())?)
}

fn parse_points_inner(
    name: &str,
    text: &str,
    sites: Option<&BTreeMap<String, Point>>,
    lift_coords: bool,
) -> CliResult<Vec<Point>> {
    match parse_table(name, text, sites, lift_coords)? {
        (points, None) => Ok(points),
        (_, Some(_)) => Err(CliError::Input(format!(
            "{name}: line 1: a 'weight' column is only accepted by mmd"
        ))),
    }
}

fn parse_table(
    name: &str,
    text: &str,
    sites: Option<&BTreeMap<String, Point>>,
    lift_coords: bool,
) -> CliResult<(Vec<Point>, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_error(name, e))?.clone();
    if header.is_empty() {
        return Err(CliError::Input(format!("{name}: empty points file")));
    }
    let l = layout(name, &header)?;
    match (l.site_id, sites) {
        (Some(_), None) => {
            return Err(CliError::Input(format!("{name}: 'site_id' column needs --sites")));
        }
        (None, Some(_)) => {
            return Err(CliError::Input(format!("{name}: --sites given but no 'site_id' column")));
        }
        (Some(_), Some(_)) if l.t.is_some() => {
            return Err(CliError::Input(format!(
                "{name}: 't' belongs in the site table for product points"
            )));
        }
        _ => {}
    }
    if l.x.is_empty() && l.site_id.is_none() {
        return Err(CliError::Input(format!("{name}: line 1: no coordinate columns")));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let x = l
            .x
            .iter()
            .map(|&c| parse_f64(name, line, &header[c], &rec[c]))
            .collect::<CliResult<Vec<f64>>>()?;
        let base = match (l.site_id, sites) {
            (Some(c), Some(table)) => {
                let id = &rec[c];
                let site = table.get(id).ok_or_else(|| {
                    CliError::Input(format!("{name}: line {line}, field 'site_id': unknown site '{id}'"))
                })?;
                if l.x.is_empty() {
                    site.clone()
                } else {
                    Point::product(site.clone(), x).map_err(|e| CliError::Input(format!("{name}: line {line}: {e}")))?
                }
            }
            _ => {
                let t = l.t.map(|c| parse_f64(name, line, "t", &rec[c])).transpose()?;
                base_point(name, line, x, t, lift_coords)?
            }
        };
        let p = match l.channel {
            Some(c) => {
                let ch: usize = rec[c].parse().map_err(|_| {
                    CliError::Input(format!(
                        "{name}: line {line}, field 'channel': '{}' is not a nonnegative integer",
                        &rec[c]
                    ))
                })?;
                Point::channel(base, ch)
            }
            None => base,
        };
        points.push(p);
        if let Some(c) = l.weight {
            weights.push(parse_f64(name, line, "weight", &rec[c])?);
        }
    }
    if points.is_empty() {
        return Err(CliError::Input(format!("{name}: no points")));
    }
    Ok((points, l.weight.map(|_| weights)))
}

fn write_artifact(path: &Path, format: Format, a: &Artifact) -> CliResult<()> {
    let io = |e: std::io::Error| CliError::Input(format!("{}: {e}", path.display()));
    let text = match (format, a) {
        (Format::Json, Artifact::Matrix(rows)) => serde_json::to_string_pretty(rows).expect("plain floats") + "\n",
        (Format::Json, Artifact::Coordinates { header, rows }) => {
            let objs: Vec<BTreeMap<&str, f64>> = rows
                .iter()
                .map(|r| header.iter().map(String::as_str).zip(r.iter().copied()).collect())
                .collect();
            serde_json::to_string_pretty(&objs).expect("plain floats") + "\n"
        }
        (Format::Csv, Artifact::Matrix(rows)) => csv_text(None, rows).map_err(io)?,
        (Format::Csv, Artifact::Coordinates { header, rows }) => csv_text(Some(header), rows).map_err(io)?,
    };
    std::fs::write(path, text).map_err(io)
}

fn csv_text(header: Option<&[String]>, rows: &[Vec<f64>]) -> std::io::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}
