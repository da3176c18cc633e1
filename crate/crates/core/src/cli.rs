//! Batch driver behind the `spmhd` binary.
//!
//! Four subcommands share one TOML configuration file (see [`RunConfig`]);
//! unknown keys are rejected. Exit codes: 0 success, 1 a check or rate
//! threshold failed, 2 bad configuration or I/O, 3 solver failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::derham::{Gauge, OperatorContext};
use crate::diagnostics::{self, ConservationReport, CSV_HEADER};
use crate::error::Error;
use crate::fem_spaces::FieldVector;
use crate::mesh::{build_box_mesh, BoxDomain, TetMesh, Vec3};
use crate::solver::{MhdSolver, MhdState, NonlinearScheme, PhysParams, SolverOptions};
use crate::sparse;
use crate::verification::{
    build_case, commuting_battery, initial_problem, projector_defects, run_level, run_operator_rates, DtRule, EocTable,
    ASSEMBLY_QUAD_DEGREE, CONVERGENCE_COLUMNS,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable overriding the output directory of the config file.
pub const OUT_ENV: &str = "SPMHD_OUT";

#[derive(Parser, Debug)]
#[command(name = "spmhd", version, about = "Structure-preserving incompressible resistive MHD on tetrahedral meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides SPMHD_OUT and the config file).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Only print errors and failing checks.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Time-step one configuration and write the conservation time series.
    Simulate,
    /// Full-scheme convergence study on a manufactured case.
    Convergence,
    /// Divergence, balance-law and ideal-conservation battery.
    Conserve,
    /// Complex exactness, commuting diagram, projector and rate battery.
    OperatorTests,
}

#[derive(Deserialize, Debug, Clone, Default, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub physics: PhysicsConfig,
    pub time: TimeConfig,
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub convergence: ConvergenceConfig,
    pub conserve: ConserveConfig,
    pub operators: OperatorConfig,
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    /// Subdivisions per axis of the unit cube.
    pub n: usize,
    /// Scheme order; only 0 is implemented.
    pub k: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { n: 4, k: 0 }
    }
}

/// Either the number or its inverse may be given, not both. `inf` is allowed.
#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub re: Option<f64>,
    pub inv_re: Option<f64>,
    pub rm: Option<f64>,
    pub inv_rm: Option<f64>,
    pub sc: f64,
    pub mu: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            re: None,
            inv_re: None,
            rm: None,
            inv_rm: None,
            sc: 1.0,
            mu: 1.0,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self) -> Result<PhysParams, String> {
        let inv = |name: &str, x: Option<f64>, inv: Option<f64>| match (x, inv) {
            (Some(_), Some(_)) => Err(format!("physics: give either `{name}` or `inv_{name}`, not both")),
            (Some(x), None) => Ok(1.0 / x),
            (None, Some(i)) => Ok(i),
            (None, None) => Ok(1.0),
        };
        let (ire, irm) = (inv("re", self.re, self.inv_re)?, inv("rm", self.rm, self.inv_rm)?);
        PhysParams::from_inverse(ire, irm, self.sc, self.mu).map_err(|e| format!("physics: {e}"))
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_final: f64,
    pub dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_final: 0.1, dt: 0.01 }
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    /// Manufactured case (`decay-trig`, `helical-trig`, `static-B`, `zero`) or initial-data
    /// set (`helical`).
    pub case: String,
    /// Apply the manufactured sources; otherwise only the initial data is used.
    pub forcing: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            case: "decay-trig".into(),
            forcing: true,
        }
    }
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Picard,
    Newton,
    PicardNewton,
    Chord,
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iterations: usize,
    /// Defaults to `picard-newton` for `simulate` and `chord` for the batteries.
    pub scheme: Option<SchemeName>,
    /// Residual below which `picard-newton` switches to Newton.
    pub switch: f64,
    pub divergence_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iterations: d.max_iterations,
            scheme: None,
            switch: 1e-4,
            divergence_window: d.divergence_window,
        }
    }
}

impl SolverConfig {
    pub fn options(&self, fallback: SchemeName) -> Result<SolverOptions, String> {
        if !(self.tol > 0.0) || self.max_iterations == 0 || self.divergence_window == 0 {
            return Err("solver: tol, max_iterations and divergence_window must be positive".into());
        }
        let scheme = match self.scheme.unwrap_or(fallback) {
            SchemeName::Picard => NonlinearScheme::Picard,
            SchemeName::Newton => NonlinearScheme::Newton,
            SchemeName::PicardNewton => NonlinearScheme::PicardNewton { switch: self.switch },
            SchemeName::Chord => NonlinearScheme::Chord,
        };
        Ok(SolverOptions {
            tol: self.tol,
            max_iterations: self.max_iterations,
            scheme,
            divergence_window: self.divergence_window,
        })
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// VTK snapshot every `cadence` steps (0: none). The last step is always written when enabled.
    pub cadence: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("spmhd-out"),
            cadence: 0,
        }
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub levels: Vec<usize>,
    pub t_final: f64,
    /// `dt = dt_factor · h^dt_power`
    pub dt_factor: f64,
    pub dt_power: i32,
    pub threshold: f64,
    /// Errors below this count as round-off and carry no rate.
    pub error_floor: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            levels: vec![2, 4, 8],
            t_final: 0.1,
            dt_factor: 0.1,
            dt_power: 2,
            threshold: 0.9,
            error_floor: 1e-12,
        }
    }
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConserveConfig {
    pub n: usize,
    pub dt: f64,
    /// Steps of the forced resistive run (Re, Rm from `[physics]`).
    pub resistive_steps: usize,
    pub resistive_case: String,
    /// Steps of the unforced ideal run.
    pub ideal_steps: usize,
    pub ideal_data: String,
    pub div_b_tol: f64,
    pub balance_tol: f64,
    pub drift_tol: f64,
    pub gauge_tol: f64,
}

impl Default for ConserveConfig {
    fn default() -> Self {
        Self {
            n: 4,
            dt: 0.01,
            resistive_steps: 50,
            resistive_case: "helical-trig".into(),
            ideal_steps: 100,
            ideal_data: "helical".into(),
            div_b_tol: 1e-12,
            balance_tol: 1e-8,
            drift_tol: 1e-8,
            gauge_tol: 1e-10,
        }
    }
}

#[derive(Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    None,
    /// Flip the sign of one face-edge incidence.
    FlipD1,
    /// Flip the sign of one cell-face incidence.
    FlipD2,
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    pub exactness_levels: Vec<usize>,
    pub commuting_levels: Vec<usize>,
    pub rate_levels: Vec<usize>,
    pub idempotence_n: usize,
    pub commuting_tol: f64,
    pub idempotence_tol: f64,
    pub threshold: f64,
    /// Test fixture: corrupt the incidence matrices before the exactness check.
    pub fault: Fault,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            exactness_levels: vec![1, 2, 3, 4],
            commuting_levels: vec![1, 2, 3],
            rate_levels: vec![2, 4, 8],
            idempotence_n: 3,
            commuting_tol: 1e-10,
            idempotence_tol: 1e-12,
            threshold: 0.9,
            fault: Fault::None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Checks the cross-field constraints of one subcommand.
    pub fn validate(&self, cmd: Command) -> Result<(), String> {
        if self.mesh.k != 0 {
            return Err(Error::UnsupportedOrder(self.mesh.k).to_string());
        }
        self.physics.params()?;
        match cmd {
            Command::Simulate => {
                if self.mesh.n == 0 {
                    return Err("mesh: n must be at least 1".into());
                }
                let TimeConfig { t_final, dt } = self.time;
                if !(dt > 0.0 && dt <= t_final) {
                    return Err(format!("time: need 0 < dt <= t_final (dt = {dt}, t_final = {t_final})"));
                }
                self.solver.options(SchemeName::PicardNewton)?;
            }
            Command::Convergence => {
                let c = &self.convergence;
                if c.levels.len() < 2 || c.levels.contains(&0) {
                    return Err("convergence: need at least two positive levels".into());
                }
                if !(c.t_final > 0.0 && c.dt_factor > 0.0) {
                    return Err("convergence: t_final and dt_factor must be positive".into());
                }
                self.solver.options(SchemeName::Chord)?;
            }
            Command::Conserve => {
                let c = &self.conserve;
                if c.n == 0 || !(c.dt > 0.0) {
                    return Err("conserve: need n >= 1 and dt > 0".into());
                }
                self.solver.options(SchemeName::Chord)?;
            }
            Command::OperatorTests => {
                let o = &self.operators;
                if o.exactness_levels.contains(&0) || o.commuting_levels.contains(&0) || o.rate_levels.contains(&0) || o.idempotence_n == 0 {
                    return Err("operators: mesh levels must be positive".into());
                }
            }
        }
        Ok(())
    }

    fn options(&self, fallback: SchemeName) -> SolverOptions {
        self.solver.options(fallback).expect("validated")
    }
}

/// One named invariant with its measured value and tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    /// `value <= tol` normally; `value >= tol` for rate thresholds.
    pub at_least: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            at_least: false,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tol,
            at_least: true,
        }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value >= self.tol
        } else {
            self.value <= self.tol
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (verdict, op) = (if self.passed() { "PASS" } else { "FAIL" }, if self.at_least { ">=" } else { "<=" });
        write!(f, "{verdict} {}: {:.3e} (need {op} {:.1e})", self.name, self.value, self.tol)
    }
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::Divergence { .. } | Error::Factorisation(_) | Error::NotDivergenceFree(_) => EXIT_SOLVER,
            _ => EXIT_CONFIG,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::config(format!("i/o: {e}"))
    }
}

struct Printer {
    quiet: bool,
}

impl Printer {
    fn info(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    fn check(&self, c: &Check) {
        if !self.quiet || !c.passed() {
            println!("{c}");
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Output directory: `--out`, then `$SPMHD_OUT`, then the config file.
pub fn output_dir(cli_out: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = cli_out {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    cfg.validate(cli.command).map_err(Failure::config)?;
    let out = output_dir(cli.out.as_deref(), &cfg);
    fs::create_dir_all(&out).map_err(|e| Failure::config(format!("{}: {e}", out.display())))?;
    let pr = Printer { quiet: cli.quiet };
    match cli.command {
        Command::Simulate => simulate(&cfg, &out, &pr),
        Command::Convergence => convergence(&cfg, &out, &pr),
        Command::Conserve => conserve(&cfg, &out, &pr),
        Command::OperatorTests => operator_tests(&cfg, &out, &pr),
    }
}

fn context(n: usize) -> Result<Arc<OperatorContext>, Error> {
    let mesh = Arc::new(build_box_mesh(n, BoxDomain::unit())?);
    Ok(Arc::new(OperatorContext::new(mesh, 0, ASSEMBLY_QUAD_DEGREE)?))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Number of steps of size `dt` covering `t_final`; the last step is not shortened.
fn step_count(t_final: f64, dt: f64) -> usize {
    ((t_final / dt) - 1e-9).ceil().max(1.0) as usize
}

fn simulate(cfg: &RunConfig, out: &Path, pr: &Printer) -> Result<i32, Failure> {
    let params = cfg.physics.params().map_err(Failure::config)?;
    let (u0, b0, sources) = initial_problem(&cfg.problem.case, params, cfg.problem.forcing)?;
    let ctx = context(cfg.mesh.n)?;
    let solver = MhdSolver::new(ctx.clone(), params, sources, cfg.options(SchemeName::PicardNewton))?;
    let dt = cfg.time.dt;
    let steps = step_count(cfg.time.t_final, dt);
    pr.info(format!(
        "simulate: case {} on n = {} ({} unknowns), {steps} steps of dt = {dt}",
        cfg.problem.case,
        cfg.mesh.n,
        solver.system_size()
    ));

    let mut csv = create(&out.join("conservation.csv"))?;
    writeln!(csv, "{CSV_HEADER}")?;
    let mut state = solver.init_state(&u0, &b0, 0.0)?;
    let first = ConservationReport::of_state(&solver, &state)?;
    first.write_csv_row(&mut csv)?;
    let cadence = cfg.output.cadence;
    if cadence > 0 {
        write_vtk(&ctx, &state, &out.join("state_0000.vtk"))?;
    }
    let mut last = first;
    let (mut res, mut max_div, mut max_it) = ([0.0f64; 3], 0.0f64, 0usize);
    for k in 1..=steps {
        let (next, rep) = match solver.step(&state, dt) {
            Ok(r) => r,
            Err(e) => {
                csv.flush()?;
                let mut f = Failure::from(e);
                f.message = format!("step {k} (t = {:.6}): {}", state.t + dt, f.message);
                return Err(f);
            }
        };
        let row = ConservationReport::of_step(&solver, &state, &next)?;
        row.write_csv_row(&mut csv)?;
        for (r, v) in res.iter_mut().zip([row.energy_residual, row.magnetic_helicity_residual, row.cross_helicity_residual]) {
            *r = r.max(v);
        }
        max_div = max_div.max(sparse::max_abs(&ctx.complex().div_integrals(&next.b)));
        max_it = max_it.max(rep.iterations);
        if cadence > 0 && (k % cadence == 0 || k == steps) {
            write_vtk(&ctx, &next, &out.join(format!("state_{k:04}.vtk")))?;
        }
        state = next;
        last = row;
    }
    csv.flush()?;
    let rel = |a: f64, b: f64| if b != 0.0 { (a - b).abs() / b.abs() } else { (a - b).abs() };
    pr.info(format!("t = {:.6}, at most {max_it} nonlinear iterations per step", state.t));
    pr.info(format!("energy {:.12e} (drift {:.3e})", last.energy, rel(last.energy, first.energy)));
    pr.info(format!(
        "magnetic helicity {:.12e} (drift {:.3e}), cross helicity {:.12e} (drift {:.3e})",
        last.magnetic_helicity,
        rel(last.magnetic_helicity, first.magnetic_helicity),
        last.cross_helicity,
        rel(last.cross_helicity, first.cross_helicity)
    ));
    // a helicity that vanishes by symmetry makes its relative residual a
    // ratio of round-off, so the laws are reported separately
    pr.info(format!(
        "max balance residuals: energy {:.3e}, magnetic helicity {:.3e}, cross helicity {:.3e}; max |D2 B| {max_div:.3e}",
        res[0], res[1], res[2]
    ));
    pr.info(format!("wrote {}", out.join("conservation.csv").display()));
    Ok(EXIT_OK)
}

/// Legacy VTK: `u` and `P` at vertices (averaged over incident cells), `B` and `j` cell averages.
pub fn write_vtk(ctx: &OperatorContext, s: &MhdState, path: &Path) -> Result<(), Failure> {
    let mesh = ctx.mesh();
    let c = ctx.complex();
    let nv = mesh.num_vertices();
    let (mut u, mut p, mut count) = (vec![Vec3::zeros(); nv], vec![0.0; nv], vec![0usize; nv]);
    let corner = |i: usize| {
        let mut b = [0.0; 4];
        b[i] = 1.0;
        b
    };
    let centroid = [0.25; 4];
    let mut b = Vec::with_capacity(mesh.num_cells());
    let mut j = Vec::with_capacity(mesh.num_cells());
    for (cell, verts) in mesh.cells.iter().enumerate() {
        for (i, &v) in verts.iter().enumerate() {
            u[v] += c.eval_vector(&s.u, cell, &corner(i));
            p[v] += c.eval_scalar(&s.p, cell, &corner(i));
            count[v] += 1;
        }
        b.push(c.eval_vector(&s.b, cell, &centroid));
        j.push(c.eval_vector(&s.j, cell, &centroid));
    }
    for v in 0..nv {
        let m = count[v].max(1) as f64;
        u[v] /= m;
        p[v] /= m;
    }
    let w = create(path)?;
    mesh.write_vtk(w, &[("P", &p)], &[("u", &u)], &[("B", &b), ("j", &j)])?;
    Ok(())
}

fn convergence(cfg: &RunConfig, out: &Path, pr: &Printer) -> Result<i32, Failure> {
    let params = cfg.physics.params().map_err(Failure::config)?;
    let cc = &cfg.convergence;
    let case = build_case(&cfg.problem.case, params)?;
    let rule = DtRule {
        factor: cc.dt_factor,
        power: cc.dt_power,
    };
    let options = cfg.options(SchemeName::Chord);
    let mut table = EocTable::new(&CONVERGENCE_COLUMNS);
    let mut failure = None;
    for &n in &cc.levels {
        match run_level(&case, n, cfg.mesh.k, cc.t_final, rule, options) {
            Ok(run) => {
                pr.info(format!(
                    "n = {n}: {} steps of dt = {:.3e}, at most {} iterations, max |D2 B| = {:.1e}",
                    run.level.steps, run.level.dt, run.max_iterations, run.max_div_b
                ));
                table.levels.push(run.level);
            }
            Err(e) => {
                failure = Some((n, e));
                break;
            }
        }
    }
    table.write_csv(&mut create(&out.join("eoc.csv"))?)?;
    table.write_text(&mut create(&out.join("eoc.txt"))?)?;
    if let Some((n, e)) = failure {
        let mut f = Failure::from(e);
        f.message = format!("level n = {n}: {}", f.message);
        f.code = EXIT_SOLVER;
        return Err(f);
    }
    if !pr.quiet {
        table.write_text(&mut std::io::stdout())?;
    }
    let ok = match table.min_resolved_rate(cc.error_floor) {
        Some(r) => {
            let c = Check::at_least("minimum rate", r, cc.threshold);
            pr.check(&c);
            c.passed()
        }
        None => {
            pr.info(format!("all errors below {:.0e}; no rates to check", cc.error_floor));
            true
        }
    };
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn report(checks: &[Check], pr: &Printer, path: &Path) -> Result<i32, Failure> {
    let mut w = create(path)?;
    for c in checks {
        pr.check(c);
        writeln!(w, "{c}")?;
    }
    w.flush()?;
    Ok(if checks.iter().all(Check::passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn conserve(cfg: &RunConfig, out: &Path, pr: &Printer) -> Result<i32, Failure> {
    let checks = conservation_battery(cfg, Some(out), pr.quiet)?;
    report(&checks, pr, &out.join("conserve.txt"))
}

/// Resistive forced run (div B, energy and helicity-rate identities) and
/// unforced ideal run (energy, helicity drifts and gauge independence).
pub fn conservation_battery(cfg: &RunConfig, out: Option<&Path>, quiet: bool) -> Result<Vec<Check>, Failure> {
    let pr = Printer { quiet };
    let cc = &cfg.conserve;
    let ctx = context(cc.n)?;
    let options = cfg.options(SchemeName::Chord);
    let mut checks = Vec::new();

    let params = cfg.physics.params().map_err(Failure::config)?;
    let (u0, b0, src) = initial_problem(&cc.resistive_case, params, true)?;
    let solver = MhdSolver::new(ctx.clone(), params, src, options)?;
    let mut csv = out.map(|o| create(&o.join("conserve_resistive.csv"))).transpose()?;
    let mut s = solver.init_state(&u0, &b0, 0.0)?;
    let (mut div, mut energy, mut mh, mut ch) = (sparse::max_abs(&ctx.complex().div_integrals(&s.b)), 0.0f64, 0.0f64, 0.0f64);
    if let Some(w) = csv.as_mut() {
        writeln!(w, "{CSV_HEADER}")?;
        ConservationReport::of_state(&solver, &s)?.write_csv_row(w)?;
    }
    for _ in 0..cc.resistive_steps {
        let (next, _) = solver.step(&s, cc.dt)?;
        let row = ConservationReport::of_step(&solver, &s, &next)?;
        if let Some(w) = csv.as_mut() {
            row.write_csv_row(w)?;
        }
        div = div.max(sparse::max_abs(&ctx.complex().div_integrals(&next.b)));
        energy = energy.max(row.energy_residual);
        mh = mh.max(row.magnetic_helicity_residual);
        ch = ch.max(row.cross_helicity_residual);
        s = next;
    }
    pr.info(format!("resistive run: {} steps, n = {}, dt = {}", cc.resistive_steps, cc.n, cc.dt));
    checks.push(Check::at_most("max |D2 B| (resistive run)", div, cc.div_b_tol));
    checks.push(Check::at_most("energy identity residual", energy, cc.balance_tol));
    checks.push(Check::at_most("magnetic helicity rate residual", mh, cc.balance_tol));
    checks.push(Check::at_most("cross helicity rate residual", ch, cc.balance_tol));

    let ideal = PhysParams::ideal(params.sc, params.mu)?;
    let (u0, b0, src) = initial_problem(&cc.ideal_data, ideal, false)?;
    let solver = MhdSolver::new(ctx.clone(), ideal, src, options)?;
    let mut csv = out.map(|o| create(&o.join("conserve_ideal.csv"))).transpose()?;
    let mut s = solver.init_state(&u0, &b0, 0.0)?;
    let first = ConservationReport::of_state(&solver, &s)?;
    if let Some(w) = csv.as_mut() {
        writeln!(w, "{CSV_HEADER}")?;
        first.write_csv_row(w)?;
    }
    let gauge = |b: &FieldVector| -> Result<f64, Error> {
        let a = diagnostics::magnetic_helicity(&ctx, b, Gauge::Coulomb)?;
        let c = diagnostics::magnetic_helicity(&ctx, b, Gauge::Combinatorial)?;
        Ok((a - c).abs() / a.abs().max(f64::MIN_POSITIVE))
    };
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let (mut de, mut dm, mut dc, mut dg) = (0.0f64, 0.0f64, 0.0f64, gauge(&s.b)?);
    for _ in 0..cc.ideal_steps {
        let (next, _) = solver.step(&s, cc.dt)?;
        let row = ConservationReport::of_step(&solver, &s, &next)?;
        if let Some(w) = csv.as_mut() {
            row.write_csv_row(w)?;
        }
        de = de.max(rel(row.energy, first.energy));
        dm = dm.max(rel(row.magnetic_helicity, first.magnetic_helicity));
        dc = dc.max(rel(row.cross_helicity, first.cross_helicity));
        dg = dg.max(gauge(&next.b)?);
        s = next;
    }
    pr.info(format!(
        "ideal run: {} steps, energy {:.6e}, magnetic helicity {:.6e}, cross helicity {:.6e}",
        cc.ideal_steps, first.energy, first.magnetic_helicity, first.cross_helicity
    ));
    checks.push(Check::at_most("ideal energy drift", de, cc.drift_tol));
    checks.push(Check::at_most("ideal magnetic helicity drift", dm, cc.drift_tol));
    checks.push(Check::at_most("ideal cross helicity drift", dc, cc.drift_tol));
    checks.push(Check::at_most("magnetic helicity gauge difference", dg, cc.gauge_tol));
    Ok(checks)
}

fn operator_tests(cfg: &RunConfig, out: &Path, pr: &Printer) -> Result<i32, Failure> {
    let (checks, table) = operator_battery(&cfg.operators, pr.quiet)?;
    if let Some(t) = &table {
        t.write_csv(&mut create(&out.join("operator_rates.csv"))?)?;
        t.write_text(&mut create(&out.join("operator_rates.txt"))?)?;
        if !pr.quiet {
            t.write_text(&mut std::io::stdout())?;
        }
    }
    report(&checks, pr, &out.join("operator_tests.txt"))
}

/// Applies `fault` to the incidences of `mesh`.
pub fn inject_fault(mesh: &mut TetMesh, fault: Fault) {
    match fault {
        Fault::None => {}
        Fault::FlipD1 => mesh.d1.flip_entry(0, 0),
        Fault::FlipD2 => mesh.d2.flip_entry(0, 0),
    }
}

/// Exactness, Euler characteristic, commuting diagram, projector idempotence
/// and operator rates. The rate table is `None` when `rate_levels` is empty.
pub fn operator_battery(oc: &OperatorConfig, quiet: bool) -> Result<(Vec<Check>, Option<EocTable>), Failure> {
    let pr = Printer { quiet };
    let mut checks = Vec::new();
    let (mut d1d0, mut d2d1, mut chi) = (0usize, 0usize, 0i64);
    for &n in &oc.exactness_levels {
        let mut mesh = build_box_mesh(n, BoxDomain::unit())?;
        inject_fault(&mut mesh, oc.fault);
        let nonzero = |a: &crate::mesh::Incidence, b: &crate::mesh::Incidence| a.compose(b).iter().flatten().filter(|(_, v)| *v != 0).count();
        d1d0 += nonzero(&mesh.d1, &mesh.d0);
        d2d1 += nonzero(&mesh.d2, &mesh.d1);
        chi = chi.max((mesh.euler_characteristic() - 1).abs());
    }
    if !oc.exactness_levels.is_empty() {
        checks.push(Check::at_most("d1·d0 = 0 (nonzero entries)", d1d0 as f64, 0.0));
        checks.push(Check::at_most("d2·d1 = 0 (nonzero entries)", d2d1 as f64, 0.0));
        checks.push(Check::at_most("|Euler characteristic - 1|", chi as f64, 0.0));
    }

    let battery = commuting_battery();
    let mut comm = 0.0f64;
    for &n in &oc.commuting_levels {
        let ctx = context(n)?;
        for (name, e) in &battery {
            let d = ctx.commuting_check(e, 0.0)?;
            if d > oc.commuting_tol {
                pr.info(format!("commuting defect {d:.3e} for {name} at n = {n}"));
            }
            comm = comm.max(d);
        }
    }
    if !oc.commuting_levels.is_empty() {
        checks.push(Check::at_most("commuting diagram defect", comm, oc.commuting_tol));
    }

    let (idem, discrete) = projector_defects(oc.idempotence_n)?;
    checks.push(Check::at_most("projector idempotence", idem, oc.idempotence_tol));
    checks.push(Check::at_most("Π^N on discrete fields", discrete, oc.idempotence_tol));

    let table = if oc.rate_levels.len() >= 2 {
        let t = run_operator_rates(0, &oc.rate_levels)?;
        for (c, name) in t.columns.iter().enumerate() {
            let r = t.rates(c).into_iter().fold(f64::INFINITY, f64::min);
            checks.push(Check::at_least(format!("rate {name}"), r, oc.threshold));
        }
        Some(t)
    } else {
        None
    };
    Ok((checks, table))
}
