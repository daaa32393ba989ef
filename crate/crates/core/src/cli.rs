//! `cmc-lab` command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ambient::{AmbientSpace, SpaceKind};
use crate::bounds::BoundReport;
use crate::config::{check_compatible, ConfigError, Format, RunConfig, Suite, SurfaceBlock};
use crate::families::{
    convergence_study, default_suite, evaluate_mesh, family_grid, is_torus, mesh_case, CaseError, CaseOutcome, CmcCase,
    ConvergenceStudy,
};
use crate::mesh::GeometryMesh;
use crate::spectrum::{analyze, stability_of, CONVENTION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;
pub const EXIT_SWEEP: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "cmc-lab", version, about = "Stability spectra of CMC surfaces in homogeneous 3-manifolds")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true, env = "CMC_LAB_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for independent cases.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides `solver.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Lowest Jacobi eigenvalues of one configured surface.
    Spectrum,
    /// Bound verification and convergence over built-in families.
    Verify,
    /// Parameter sweep over the configured surface.
    Sweep,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e.to_string())
    }
}

fn case_failure(name: &str, e: &CaseError) -> Failure {
    Failure::new(EXIT_SOLVER, format!("{name}: {} stage failed: {e}", e.stage()))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

struct Context {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    fn header(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.hash), format!("convention={CONVENTION}")]
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| Failure::new(EXIT_CONFIG, format!("output: {}: {e}", path.display())))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
        text.push('\n');
        self.write(name, &text)
    }

    fn csv_preamble(&self) -> String {
        self.header().iter().map(|h| format!("# {h}\n")).collect()
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.solver.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.directory = out.clone();
    }
    let out = config.output.directory.clone();
    fs::create_dir_all(&out)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("output.directory: {}: {e}", out.display())))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::new(EXIT_CONFIG, "--jobs: must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("--jobs: {e}")))?;
    let ctx = Context {
        hash: config.hash(),
        config,
        out,
        pool,
    };
    match cli.command {
        Command::Spectrum => cmd_spectrum(&ctx),
        Command::Verify => cmd_verify(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
    }
}

fn config_case(space: AmbientSpace, block: &SurfaceBlock) -> Result<CmcCase, ConfigError> {
    check_compatible(&space, block)?;
    let mut case = CmcCase::new("config", space, block.spec()?);
    case.resolution = block.resolution();
    case.ladder = block.ladder();
    Ok(case)
}

fn cmd_spectrum(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.config;
    let (space, block) = cfg.single()?;
    let case = config_case(space, &block)?;
    let mesh = mesh_case(&case, case.resolution)
        .map_err(|e| Failure::new(EXIT_SOLVER, format!("mesh stage failed: {e}")))?;
    let (_, spec) =
        analyze(&mesh, &cfg.solver.options()).map_err(|e| Failure::new(EXIT_SOLVER, format!("solver stage failed: {e}")))?;
    let stability = stability_of(spec.lambda1(), cfg.verify.tol_stability);
    let summary = json!({
        "config_hash": ctx.hash,
        "convention": CONVENTION,
        "lambda1": spec.lambda1(),
        "lambda": spec.eigenvalues,
        "alpha": spec.alpha,
        "H": mesh.mean_h(),
        "area": mesh.area,
        "genus": mesh.genus,
        "strongly_stable": stability.as_str(),
    });
    if cfg.wants(Format::Json) {
        ctx.write_json(
            "spectrum.json",
            &json!({
                "config_hash": ctx.hash,
                "convention": CONVENTION,
                "surface": mesh.label,
                "space": case.space,
                "resolution": case.resolution,
                "vertices": mesh.len(),
                "H": mesh.mean_h(),
                "area": mesh.area,
                "genus": mesh.genus,
                "strongly_stable": stability.as_str(),
                "spectrum": spec,
                "eigenfunctions_m_normalized": spec.eigenfunctions,
            }),
        )?;
    }
    if cfg.wants(Format::Off) {
        ctx.write("mesh.off", &mesh.to_off(&ctx.header()))?;
    }
    if cfg.wants(Format::Csv) {
        ctx.write("mesh.csv", &mesh.sidecar_csv(&ctx.header(), Some(("rho", spec.rho()))))?;
    }
    println!("{summary}");
    Ok(EXIT_OK)
}

fn verify_cases(cfg: &RunConfig) -> Result<Vec<CmcCase>, Failure> {
    let v = &cfg.verify;
    let mut cases = match v.suite {
        Suite::Default => default_suite()
            .into_iter()
            .map(|mut c| {
                c.ladder = if is_torus(&c) { v.torus_ladder.clone() } else { v.sphere_ladder.clone() };
                c.resolution = c.ladder.last().copied().unwrap_or(c.resolution);
                c
            })
            .collect(),
        Suite::Grid => family_grid()
            .into_iter()
            .map(|mut c| {
                c.ladder = vec![c.resolution];
                c
            })
            .collect(),
        Suite::None => Vec::new(),
    };
    if !v.cases.is_empty() {
        if let Some(unknown) = v.cases.iter().find(|n| !cases.iter().any(|c| &&c.name == n)) {
            return Err(Failure::new(EXIT_CONFIG, format!("config error at `verify.cases`: unknown case {unknown}")));
        }
        cases.retain(|c| v.cases.contains(&c.name));
    }
    if let (Some(_), Some(block)) = (&cfg.space, &cfg.surface) {
        if block.amplitude.is_some_and(|a| a != 0.0) {
            return Err(ConfigError::new("surface.amplitude", "bounds apply to CMC surfaces only").into());
        }
        let (space, block) = cfg.single()?;
        cases.push(config_case(space, &block)?);
    }
    if cases.is_empty() {
        return Err(ConfigError::new("verify", "no cases selected").into());
    }
    Ok(cases)
}

#[derive(Serialize)]
struct CaseRecord<'a> {
    name: &'a str,
    outcomes: &'a [CaseOutcome],
    convergence: &'a ConvergenceStudy,
    order_pass: bool,
    pass: bool,
}

fn cmd_verify(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.config;
    let cases = verify_cases(cfg)?;
    let opts = cfg.solver.options();
    let tol = cfg.verify.tolerances();
    let offset = cfg.verify.potential_offset;
    let tasks: Vec<(usize, u32)> = cases
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.ladder.iter().map(move |r| (i, *r)))
        .collect();
    let results: Vec<Result<CaseOutcome, CaseError>> = ctx.pool.install(|| {
        tasks
            .par_iter()
            .map(|(i, r)| {
                let case = &cases[*i];
                let mesh: GeometryMesh = mesh_case(case, *r)?;
                evaluate_mesh(case, &mesh, *r, &opts, &tol, offset)
            })
            .collect()
    });
    let mut grouped: Vec<Vec<CaseOutcome>> = vec![Vec::new(); cases.len()];
    for ((i, _), res) in tasks.iter().zip(results) {
        match res {
            Ok(o) => grouped[*i].push(o),
            Err(e) => return Err(case_failure(&cases[*i].name, &e)),
        }
    }

    let mut bounds_csv = ctx.csv_preamble();
    bounds_csv.push_str("case,resolution,theorem_id,bound,lambda1,margin,strict,equality_case,pass\n");
    let mut conv_csv = ctx.csv_preamble();
    conv_csv.push_str("case,resolution,mesh_size,lambda1,closed_form,error,lambda2,gauss_bonnet_residual,lambda1_order,lambda2_order\n");
    let mut records = Vec::new();
    let studies: Vec<ConvergenceStudy> = grouped.iter().map(|g| convergence_study(g)).collect();
    let mut all_pass = true;
    for ((case, outcomes), study) in cases.iter().zip(&grouped).zip(&studies) {
        let mut case_pass = true;
        for o in outcomes {
            for r in &o.verification.reports {
                let _ = writeln!(
                    bounds_csv,
                    "{},{},{},{:.12e},{:.12e},{:.12e},{},{},{}",
                    case.name,
                    o.resolution,
                    r.theorem_id,
                    r.bound_value,
                    r.lambda1,
                    r.margin,
                    r.strict,
                    r.equality_case.as_str(),
                    r.pass
                );
                if !r.pass {
                    println!("FAIL {} r={} {} margin={:.6e}", case.name, o.resolution, r.theorem_id, r.margin);
                }
            }
            for c in o.verification.corollaries.iter().filter(|c| !c.consistent) {
                println!("FAIL {} r={} {} {}", case.name, o.resolution, c.id, c.detail);
            }
            case_pass &= o.verification.pass;
        }
        for (i, o) in outcomes.iter().enumerate() {
            let err = study.closed_form.map(|c| (o.lambda1() - c).abs());
            let _ = writeln!(
                conv_csv,
                "{},{},{:.12e},{:.12e},{},{},{:.12e},{:.12e},{},{}",
                case.name,
                o.resolution,
                study.mesh_sizes[i],
                study.lambda1[i],
                fmt_opt(study.closed_form),
                fmt_opt(err),
                study.lambda2[i],
                study.gauss_bonnet[i],
                study.lambda1_order.label(),
                study.lambda2_order.label()
            );
        }
        let order_pass = study.closed_form.is_none()
            || outcomes.len() < 2
            || study.lambda1_order.passes(cfg.verify.min_order);
        if !order_pass {
            println!("FAIL {} lambda1 order {}", case.name, study.lambda1_order.label());
        }
        case_pass &= order_pass;
        all_pass &= case_pass;
        let last = outcomes.last().expect("ladder is non-empty");
        let eq: Vec<String> = last
            .verification
            .reports
            .iter()
            .filter(|r| r.equality_case.as_str() != "none")
            .map(|r| format!("{}={}", r.theorem_id, r.equality_case.as_str()))
            .collect();
        println!(
            "{} {} lambda1={:.8} order={} {}",
            if case_pass { "PASS" } else { "FAIL" },
            case.name,
            last.lambda1(),
            study.lambda1_order.label(),
            eq.join(" ")
        );
        records.push((case.name.clone(), outcomes, study, order_pass, case_pass));
    }
    if ctx.config.wants(Format::Csv) {
        ctx.write("bounds.csv", &bounds_csv)?;
        ctx.write("convergence.csv", &conv_csv)?;
    }
    if ctx.config.wants(Format::Json) {
        let cases_json: Vec<CaseRecord> = records
            .iter()
            .map(|(name, outcomes, study, order_pass, pass)| CaseRecord {
                name,
                outcomes,
                convergence: study,
                order_pass: *order_pass,
                pass: *pass,
            })
            .collect();
        ctx.write_json(
            "verify.json",
            &json!({
                "config_hash": ctx.hash,
                "convention": CONVENTION,
                "pass": all_pass,
                "cases": cases_json,
            }),
        )?;
    }
    println!("{}", if all_pass { "PASS" } else { "FAIL" });
    Ok(if all_pass { EXIT_OK } else { EXIT_VERIFY })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.12e}"))
}

fn theorem_prefix(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::SpaceForm => "T1_1",
        SpaceKind::ProductS2R => "S2R",
        SpaceKind::ProductS2S1 => "S2S1",
        SpaceKind::ProductH2R => "H2R",
        SpaceKind::BergerSphere => "SB_",
        SpaceKind::Heisenberg => "NIL",
        SpaceKind::Sl2Universal => "SL2",
    }
}

/// The (i) and (ii) bounds of the family theorem for the space kind.
fn bound_pair(kind: SpaceKind, reports: &[BoundReport]) -> [Option<&BoundReport>; 2] {
    let pick = |prefix: &str, suffix: &str| {
        reports.iter().find(|r| {
            let id = r.theorem_id.to_string();
            id.starts_with(prefix) && id.ends_with(suffix) && !id.ends_with("_ii") == (suffix == "_i")
        })
    };
    // The round Berger sphere κ = 4τ² only carries the space-form bounds.
    let prefix = if pick(theorem_prefix(kind), "_i").is_some() { theorem_prefix(kind) } else { "T1_1" };
    [pick(prefix, "_i"), pick(prefix, "_ii")]
}

struct JobRow {
    params: Vec<(&'static str, f64)>,
    result: Result<(AmbientSpace, CaseOutcome), (String, String)>,
}

fn run_job(ctx: &Context, params: &[(&'static str, f64)]) -> JobRow {
    let cfg = &ctx.config;
    let mut desc = cfg.space.clone().expect("validated");
    let mut block = cfg.surface.clone().expect("validated");
    for (k, v) in params {
        match *k {
            "kappa" => desc.kappa = Some(*v),
            "tau" => desc.tau = Some(*v),
            "c" => desc.c = Some(*v),
            "h" => block.h = Some(*v),
            "c_gamma" => block.c_gamma = Some(*v),
            "radius" => block.radius = Some(*v),
            "t" => block.t = Some(*v),
            _ => unreachable!("sweep keys are fixed"),
        }
    }
    let result = (|| {
        let space = AmbientSpace::new(desc).map_err(|e| ("space".to_string(), e.to_string()))?;
        let case = config_case(space.clone(), &block).map_err(|e| ("config".to_string(), e.to_string()))?;
        let mesh = mesh_case(&case, case.resolution).map_err(|e| ("mesh".to_string(), e.to_string()))?;
        let tol = cfg.verify.tolerances();
        let outcome = evaluate_mesh(&case, &mesh, case.resolution, &cfg.solver.options(), &tol, 0.0)
            .map_err(|e| (e.stage().to_string(), e.to_string()))?;
        Ok((space, outcome))
    })();
    JobRow {
        params: params.to_vec(),
        result,
    }
}

fn cmd_sweep(ctx: &Context) -> Result<i32, Failure> {
    let cfg = &ctx.config;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new("sweep", "missing [sweep] block"))?;
    let jobs = sweep.jobs()?;
    cfg.single()?;
    let rows: Vec<JobRow> = ctx.pool.install(|| jobs.par_iter().map(|p| run_job(ctx, p)).collect());

    let mut csv = ctx.csv_preamble();
    csv.push_str(
        "job,kind,c,kappa,tau,h,c_gamma,radius,t,resolution,H,area,genus,lambda1,closed_form,rel_error,\
         bound_i_id,bound_i,margin_i,bound_ii_id,bound_ii,margin_ii,alpha,status\n",
    );
    let mut failures = Vec::new();
    let mut violations = 0usize;
    for (j, row) in rows.iter().enumerate() {
        let param = |k: &str| row.params.iter().find(|(n, _)| *n == k).map(|(_, v)| *v);
        let block = cfg.surface.as_ref().expect("validated");
        let desc = cfg.space.as_ref().expect("validated");
        let c = param("c").or(desc.c);
        let kappa = param("kappa").or(desc.kappa);
        let tau = param("tau").or(desc.tau);
        let h = param("h").or(block.h);
        let c_gamma = param("c_gamma").or(block.c_gamma);
        let radius = param("radius").or(block.radius);
        let t = param("t").or(block.t);
        let _ = write!(
            csv,
            "{j},{},{},{},{},{},{},{},{},{},",
            desc.kind.name(),
            fmt_opt(c),
            fmt_opt(kappa),
            fmt_opt(tau),
            fmt_opt(h),
            fmt_opt(c_gamma),
            fmt_opt(radius),
            fmt_opt(t),
            block.resolution()
        );
        match &row.result {
            Ok((space, o)) => {
                let rel = o.closed_form.map(|cf| (o.lambda1() - cf).abs() / cf.abs().max(1.0));
                let pair = bound_pair(space.kind(), &o.verification.reports);
                let bound_cols = |r: Option<&BoundReport>| match r {
                    Some(r) => format!("{},{:.12e},{:.12e}", r.theorem_id, r.bound_value, r.margin),
                    None => ",,".to_string(),
                };
                let status = if o.verification.pass {
                    "ok"
                } else {
                    violations += 1;
                    "violation"
                };
                let _ = writeln!(
                    csv,
                    "{:.12e},{:.12e},{},{:.12e},{},{},{},{},{},{status}",
                    o.h,
                    o.area,
                    o.genus,
                    o.lambda1(),
                    fmt_opt(o.closed_form),
                    fmt_opt(rel),
                    bound_cols(pair[0]),
                    bound_cols(pair[1]),
                    fmt_opt(o.spectrum.alpha)
                );
            }
            Err((stage, message)) => {
                let _ = writeln!(csv, ",,,,,,,,,,,,,failed");
                failures.push(json!({
                    "job": j,
                    "params": row.params.iter().map(|(k, v)| (k.to_string(), json!(*v))).collect::<serde_json::Map<_, _>>(),
                    "stage": stage,
                    "message": message,
                }));
            }
        }
    }
    ctx.write("sweep.csv", &csv)?;
    ctx.write_json(
        "failures.json",
        &json!({
            "config_hash": ctx.hash,
            "convention": CONVENTION,
            "jobs": rows.len(),
            "failures": failures,
        }),
    )?;
    println!(
        "{} jobs, {} failed, {} with bound violations; results in {}",
        rows.len(),
        failures.len(),
        violations,
        display(&ctx.out)
    );
    Ok(if !failures.is_empty() {
        EXIT_SWEEP
    } else if violations > 0 {
        EXIT_VERIFY
    } else {
        EXIT_OK
    })
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
