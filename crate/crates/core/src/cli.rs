//! `qsde` command line. Exit codes: 0 success, 2 malformed input,
//! 3 failed property check, 4 numerical abort. Diagnostics go to stderr as
//! `qsde-error[<code>]: <message>`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{from_matrix, Format, RunConfig};
use crate::error::Error;
use crate::germ::{check_ccp, kolmogorov_dilation, verify_dilation, Germ, DEFAULT_PSD_TOL};
use crate::ito_algebra::{
    canonical_unit_elements, check_closure, death_element, hp_product, poisson_element, wiener_element, ItoElement,
};
use crate::linalg::{self, Mat, ONE, ZERO};
use crate::semigroup::{evolve_heisenberg, picard_minimal, EvolutionResult};
use crate::unraveling::{
    ensemble, flow_value, rng, simulate_diffusive, simulate_jump, weights, Kind, StreamId, TimeGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "qsde", version, about = "Quantum stochastic master equations: checks, dilations and unravelings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Multiplication table of the canonical differentials, or closure of a configured basis.
    ItoCheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Positivity of the dissipation form of a germ.
    GermCheck {
        #[arg(long)]
        config: PathBuf,
        /// Also build the pseudo-Hilbert dilation and report its residual.
        #[arg(long)]
        dilate: bool,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = DEFAULT_PSD_TOL)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kolmogorov decomposition and dilation data as JSON.
    Dilate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-12)]
        cutoff: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One trajectory: observables along the path and its weight.
    Trajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Trajectory index within the seed's family of substreams.
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Ensemble means and standard errors.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ntraj: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Averaged Heisenberg evolution of the observables.
    Master {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
    /// Picard iterate of the minimal solution and its gap to the semigroup.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonFinite { .. } | Error::DilationFailure(_) | Error::SingularMetric(_) => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_failure(message: String) -> Failure {
    Failure { code: EXIT_CONFIG, message }
}

type CliResult<T> = std::result::Result<T, Failure>;

struct Loaded {
    cfg: RunConfig,
    sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn load(path: &Path) -> CliResult<Loaded> {
    let bytes = std::fs::read(path).map_err(|e| config_failure(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| config_failure(format!("{} is not UTF-8", path.display())))?;
    let cfg = RunConfig::parse(text)?;
    Ok(Loaded { cfg, sha256: hex(&Sha256::digest(&bytes)) })
}

/// A numeric table with `#`-prefixed metadata.
struct Table {
    meta: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut s = String::new();
                for (k, v) in &self.meta {
                    let _ = writeln!(s, "# {k}: {v}");
                }
                let _ = writeln!(s, "{}", self.columns.join(","));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                    let _ = writeln!(s, "{}", cells.join(","));
                }
                s
            }
            Format::Json => {
                let meta: serde_json::Map<String, Value> =
                    self.meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
                let doc = json!({ "meta": meta, "columns": self.columns, "rows": self.rows });
                serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
            }
        }
    }
}

fn base_meta(command: &str, loaded: &Loaded) -> Vec<(String, String)> {
    vec![
        ("qsde_version".into(), env!("CARGO_PKG_VERSION").into()),
        ("command".into(), command.into()),
        ("config_sha256".into(), loaded.sha256.clone()),
    ]
}

fn json_meta(meta: &[(String, String)]) -> Value {
    Value::Object(meta.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
}

struct Emission {
    stdout: String,
    file: Option<(PathBuf, String)>,
}

fn to_target(loaded: &Loaded, out: Option<PathBuf>, body: String) -> Emission {
    match out.or_else(|| loaded.cfg.output.path.clone().map(PathBuf::from)) {
        Some(path) => Emission { stdout: String::new(), file: Some((path, body)) },
        None => Emission { stdout: body, file: None },
    }
}

fn format_of(loaded: &Loaded, arg: Option<FormatArg>) -> Format {
    match arg {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => loaded.cfg.output.format,
    }
}

fn matrix_json(m: &Mat) -> Value {
    serde_json::to_value(from_matrix(m)).expect("matrix serializes")
}

/// Runs `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with_io<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
                    let _ = writeln!(stderr, "qsde-error[{EXIT_CONFIG}]: usage: {first}");
                    EXIT_CONFIG
                }
            };
        }
    };
    let (emission, failure) = match dispatch(cli.command) {
        Ok(em) => (Some(em), None),
        Err((em, f)) => (em, Some(f)),
    };
    if let Some(em) = &emission {
        let _ = stdout.write_all(em.stdout.as_bytes());
    }
    if let Some(f) = failure {
        let _ = writeln!(stderr, "qsde-error[{}]: {}", f.code, f.message);
        return f.code;
    }
    if let Some((path, body)) = emission.and_then(|em| em.file) {
        if let Err(e) = std::fs::write(&path, body) {
            let _ = writeln!(stderr, "qsde-error[{EXIT_CONFIG}]: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    }
    EXIT_OK
}

/// A failed run may still print a report, but never produces an output file.
type Dispatched = std::result::Result<Emission, (Option<Emission>, Failure)>;

fn plain<T>(r: CliResult<T>) -> std::result::Result<T, (Option<Emission>, Failure)> {
    r.map_err(|f| (None, f))
}

fn dispatch(cmd: Command) -> Dispatched {
    match cmd {
        Command::ItoCheck { config, json, tol } => ito_check(config, json, tol),
        Command::GermCheck { config, dilate, json, tol, out } => germ_check(&config, dilate, json, tol, out),
        Command::Dilate { config, cutoff, out } => plain(dilate(&config, cutoff, out)),
        Command::Trajectory { config, seed, index, out, format } => {
            plain(trajectory(&config, seed, index, out, format))
        }
        Command::Ensemble { config, seed, ntraj, out, format } => plain(run_ensemble(&config, seed, ntraj, out, format)),
        Command::Master { config, out, format } => plain(master(&config, out, format)),
        Command::Picard { config, iters, out, format } => plain(picard(&config, iters, out, format)),
    }
}

fn element_label(e: &ItoElement, table: &[(&str, ItoElement)]) -> String {
    if e.is_zero() {
        return "0".into();
    }
    table.iter().find(|(_, t)| t == e).map_or_else(|| "?".into(), |(l, _)| (*l).to_string())
}

fn ito_check(config: Option<PathBuf>, as_json: bool, tol: f64) -> Dispatched {
    let (report, ok): (Value, bool) = match config {
        None => {
            let table = canonical_unit_elements();
            let mut rows = Vec::new();
            let mut nonzero = 0;
            for (la, a) in &table {
                for (lb, b) in &table {
                    let p = hp_product(a, b).expect("canonical elements share k_dim");
                    if !p.is_zero() {
                        nonzero += 1;
                    }
                    rows.push(json!({ "left": la, "right": lb, "product": element_label(&p, &table) }));
                }
            }
            let dq = wiener_element(ZERO, ONE);
            let dp = poisson_element(ZERO, ONE);
            let dq2 = hp_product(&dq, &dq).expect("k_dim 1") == death_element(1);
            let dp2 = hp_product(&dp, &dp).expect("k_dim 1") == dp.add(&death_element(1)).expect("k_dim 1");
            let ok = nonzero == 4 && rows.iter().all(|r| r["product"] != "?") && dq2 && dp2;
            (json!({ "products": rows, "nonzero_products": nonzero, "dQ^2=dt": dq2, "dP^2=dP+dt": dp2, "ok": ok }), ok)
        }
        Some(path) => {
            let loaded = plain(load(&path))?;
            let basis = plain(loaded.cfg.ito_basis().map_err(Failure::from))?;
            let rep = check_closure(&basis, tol);
            let ok = rep.closed;
            (
                json!({
                    "config_sha256": loaded.sha256,
                    "closed": rep.closed,
                    "worst_residual": rep.worst_residual,
                    "contains_death": rep.contains_death,
                    "tol": tol,
                    "labels": basis.labels(),
                }),
                ok,
            )
        }
    };
    let body = if as_json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        let mut s = String::new();
        if let Some(rows) = report["products"].as_array() {
            for r in rows {
                let _ = writeln!(
                    s,
                    "{} * {} = {}",
                    r["left"].as_str().unwrap_or(""),
                    r["right"].as_str().unwrap_or(""),
                    r["product"].as_str().unwrap_or("")
                );
            }
        }
        for (k, v) in report.as_object().expect("report is an object") {
            if k != "products" {
                let _ = writeln!(s, "{k}: {v}");
            }
        }
        s
    };
    let em = Emission { stdout: body, file: None };
    if ok {
        Ok(em)
    } else {
        Err((Some(em), Failure { code: EXIT_CHECK_FAILED, message: "Ito table check failed".into() }))
    }
}

fn dilation_residual(germ: &Germ, cutoff: f64) -> crate::error::Result<(usize, f64, f64)> {
    let dd = kolmogorov_dilation(germ, cutoff)?;
    let worst = linalg::matrix_unit_basis_with_identity(germ.n())
        .iter()
        .map(|b| verify_dilation(&dd, germ, b).max())
        .fold(0.0, f64::max);
    Ok((dd.rank(), worst, dd.lsq_residual))
}

fn germ_check(config: &Path, with_dilation: bool, as_json: bool, tol: f64, out: Option<PathBuf>) -> Dispatched {
    let loaded = plain(load(config))?;
    let germ = plain(loaded.cfg.germ().map_err(Failure::from))?;
    let ops = linalg::matrix_unit_basis_with_identity(germ.n());
    let v = plain(check_ccp(&germ, &ops, tol).map_err(Failure::from))?;
    let mut report = json!({
        "meta": json_meta(&base_meta("germ-check", &loaded)),
        "is_ccp": v.is_ccp,
        "min_eig": v.min_eig,
        "scale": v.scale,
        "tol": tol,
        "constrained_min_eig": v.constrained_min_eig,
        "constrained_is_ccp": v.constrained_is_ccp,
        "kernel_dim": v.kernel_dim,
        "verdicts_agree": v.verdicts_agree,
    });
    let mut numerical = None;
    if with_dilation && v.is_ccp {
        match dilation_residual(&germ, 1e-12) {
            Ok((rank, worst, lsq)) => {
                report["dilation_rank"] = json!(rank);
                report["dilation_residual"] = json!(worst);
                report["dilation_lsq_residual"] = json!(lsq);
            }
            Err(e) => numerical = Some(Failure::from(e)),
        }
    }
    let body = if as_json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        let mut s = String::new();
        for (k, val) in report.as_object().expect("object") {
            if k != "meta" {
                let _ = writeln!(s, "{k}: {val}");
            }
        }
        s
    };
    let em = Emission { stdout: body.clone(), file: None };
    if !v.is_ccp {
        let msg = format!("germ is not conditionally completely positive (min_eig {}, scale {})", v.min_eig, v.scale);
        return Err((Some(em), Failure { code: EXIT_CHECK_FAILED, message: msg }));
    }
    if let Some(f) = numerical {
        return Err((Some(em), f));
    }
    Ok(match out {
        Some(path) => {
            let file = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            Emission { stdout: body, file: Some((path, file)) }
        }
        None => em,
    })
}

fn dilate(config: &Path, cutoff: f64, out: Option<PathBuf>) -> CliResult<Emission> {
    let loaded = load(config)?;
    let germ = loaded.cfg.germ()?;
    let ops = linalg::matrix_unit_basis_with_identity(germ.n());
    let v = check_ccp(&germ, &ops, DEFAULT_PSD_TOL)?;
    if !v.is_ccp {
        return Err(Failure {
            code: EXIT_CHECK_FAILED,
            message: format!("germ is not conditionally completely positive (min_eig {})", v.min_eig),
        });
    }
    let dd = kolmogorov_dilation(&germ, cutoff)?;
    let worst = ops.iter().map(|b| verify_dilation(&dd, &germ, b).max()).fold(0.0, f64::max);
    let doc = json!({
        "meta": json_meta(&base_meta("dilate", &loaded)),
        "n": dd.n(),
        "d": dd.d(),
        "rank": dd.rank(),
        "eigenvalues": dd.eigenvalues,
        "l_circ": dd.l_circ.iter().map(matrix_json).collect::<Vec<_>>(),
        "l_minus": dd.l_minus.iter().map(matrix_json).collect::<Vec<_>>(),
        "dissipation": matrix_json(&dd.dissipation),
        "metric": matrix_json(&dd.metric()),
        "lsq_residual": dd.lsq_residual,
        "verify_residual": worst,
    });
    Ok(to_target(&loaded, out, serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))
}

fn seed_of(loaded: &Loaded, flag: Option<u64>) -> u64 {
    flag.or(loaded.cfg.simulation.seed).unwrap_or(0)
}

fn trajectory(
    config: &Path,
    seed: Option<u64>,
    index: u64,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
) -> CliResult<Emission> {
    let loaded = load(config)?;
    let model = loaded.cfg.trajectory_model()?;
    let grid = loaded.cfg.grid()?;
    let psi0 = loaded.cfg.psi0()?;
    let observables = loaded.cfg.observables()?;
    let seed = seed_of(&loaded, seed);
    let stream = StreamId::new(seed, index);
    let traj = match model.kind() {
        Some(Kind::Jump) => simulate_jump(&model, &grid, stream)?,
        _ => simulate_diffusive(&model, &grid, stream)?,
    };
    let values = observables.iter().map(|o| flow_value(&traj, &o.matrix, &psi0)).collect::<Result<Vec<_>, _>>()?;
    let w = weights(&traj, &psi0);
    let mut columns = vec!["t".to_string()];
    for o in &observables {
        columns.push(format!("{}_re", o.name));
        columns.push(format!("{}_im", o.name));
    }
    columns.push("weight".into());
    let rows = (0..traj.grid.len())
        .map(|j| {
            let mut row = vec![traj.grid[j]];
            for v in &values {
                row.push(v[j].re);
                row.push(v[j].im);
            }
            row.push(w[j]);
            row
        })
        .collect();
    let mut meta = base_meta("trajectory", &loaded);
    meta.push(("seed".into(), seed.to_string()));
    meta.push(("trajectory_index".into(), index.to_string()));
    meta.push(("rng".into(), rng::ALGORITHM.into()));
    let table = Table { meta, columns, rows };
    Ok(to_target(&loaded, out, table.render(format_of(&loaded, format))))
}

fn run_ensemble(
    config: &Path,
    seed: Option<u64>,
    ntraj: Option<usize>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
) -> CliResult<Emission> {
    let loaded = load(config)?;
    let model = loaded.cfg.trajectory_model()?;
    let grid = loaded.cfg.grid()?;
    let psi0 = loaded.cfg.psi0()?;
    let observables = loaded.cfg.observables()?;
    let seed = seed_of(&loaded, seed);
    let ntraj = ntraj.or(loaded.cfg.simulation.ntraj).unwrap_or(1);
    let res = ensemble(&model, &observables, &psi0, ntraj, &grid, seed)?;
    let mut columns = vec!["t".to_string()];
    for o in &res.observables {
        columns.push(format!("{}_mean_re", o.name));
        columns.push(format!("{}_mean_im", o.name));
        columns.push(format!("{}_stderr", o.name));
    }
    columns.push("norm_mean".into());
    columns.push("norm_stderr".into());
    let rows = (0..res.grid.len())
        .map(|j| {
            let mut row = vec![res.grid[j]];
            for o in &res.observables {
                row.extend([o.mean[j].re, o.mean[j].im, o.stderr[j]]);
            }
            row.extend([res.norm_mean[j], res.norm_stderr[j]]);
            row
        })
        .collect();
    let mut meta = base_meta("ensemble", &loaded);
    meta.push(("seed".into(), seed.to_string()));
    meta.push(("ntraj".into(), ntraj.to_string()));
    meta.push(("rng".into(), rng::ALGORITHM.into()));
    let table = Table { meta, columns, rows };
    Ok(to_target(&loaded, out, table.render(format_of(&loaded, format))))
}

/// Columns for an evolved observable: `⟨ψ₀|B(t)|ψ₀⟩` when `psi0` is given, else every entry.
fn observable_columns(name: &str, n: usize, psi0: Option<&linalg::Vector>) -> Vec<String> {
    match psi0 {
        Some(_) => vec![format!("{name}_re"), format!("{name}_im")],
        None => (0..n)
            .flat_map(|p| (0..n).flat_map(move |q| [format!("{name}[{p},{q}]_re"), format!("{name}[{p},{q}]_im")]))
            .collect(),
    }
}

fn observable_cells(b: &Mat, psi0: Option<&linalg::Vector>) -> Vec<f64> {
    match psi0 {
        Some(psi) => {
            let z = psi.dotc(&(b * psi));
            vec![z.re, z.im]
        }
        None => {
            let n = b.nrows();
            (0..n).flat_map(|p| (0..n).flat_map(move |q| [b[(p, q)].re, b[(p, q)].im])).collect()
        }
    }
}

fn evolution_grid(loaded: &Loaded) -> CliResult<TimeGrid> {
    Ok(loaded.cfg.grid()?)
}

fn master(config: &Path, out: Option<PathBuf>, format: Option<FormatArg>) -> CliResult<Emission> {
    let loaded = load(config)?;
    let germ = loaded.cfg.germ()?;
    let grid = evolution_grid(&loaded)?;
    let psi0 = loaded.cfg.simulation.psi0.is_some().then(|| loaded.cfg.psi0()).transpose()?;
    let observables = loaded.cfg.observables()?;
    let evolutions = observables
        .iter()
        .map(|o| evolve_heisenberg(&germ, &o.matrix, grid.tmax(), grid.steps()))
        .collect::<Result<Vec<_>, _>>()?;
    let table = evolution_table(&loaded, "master", &observables, &evolutions, None, psi0.as_ref(), germ.n(), grid);
    Ok(to_target(&loaded, out, table.render(format_of(&loaded, format))))
}

#[allow(clippy::too_many_arguments)]
fn evolution_table(
    loaded: &Loaded,
    command: &str,
    observables: &[crate::unraveling::Observable],
    evolutions: &[EvolutionResult],
    reference: Option<&[EvolutionResult]>,
    psi0: Option<&linalg::Vector>,
    n: usize,
    grid: TimeGrid,
) -> Table {
    let mut columns = vec!["t".to_string()];
    for o in observables {
        columns.extend(observable_columns(&o.name, n, psi0));
        if reference.is_some() {
            columns.push(format!("{}_gap", o.name));
        }
    }
    let rows = (0..=grid.steps())
        .map(|j| {
            let mut row = vec![grid.time(j)];
            for (i, ev) in evolutions.iter().enumerate() {
                row.extend(observable_cells(&ev.values[j], psi0));
                if let Some(r) = reference {
                    row.push(linalg::max_abs_diff(&ev.values[j], &r[i].values[j]));
                }
            }
            row
        })
        .collect();
    let mut meta = base_meta(command, loaded);
    meta.push(("steps".into(), grid.steps().to_string()));
    if let Some(first) = evolutions.first() {
        meta.push(("method".into(), first.method.clone()));
    }
    Table { meta, columns, rows }
}

fn picard(config: &Path, iters: Option<usize>, out: Option<PathBuf>, format: Option<FormatArg>) -> CliResult<Emission> {
    let loaded = load(config)?;
    let germ = loaded.cfg.germ()?;
    let grid = evolution_grid(&loaded)?;
    let iters = iters.or(loaded.cfg.simulation.iters).unwrap_or(25);
    let psi0 = loaded.cfg.simulation.psi0.is_some().then(|| loaded.cfg.psi0()).transpose()?;
    let observables = loaded.cfg.observables()?;
    let mut finals = Vec::with_capacity(observables.len());
    let mut reference = Vec::with_capacity(observables.len());
    for o in &observables {
        let mut all = picard_minimal(&germ, &o.matrix, grid.tmax(), grid.steps(), iters)?;
        finals.push(all.pop().expect("at least the zeroth iterate"));
        reference.push(evolve_heisenberg(&germ, &o.matrix, grid.tmax(), grid.steps())?);
    }
    let mut table =
        evolution_table(&loaded, "picard", &observables, &finals, Some(&reference), psi0.as_ref(), germ.n(), grid);
    table.meta.push(("iters".into(), iters.to_string()));
    Ok(to_target(&loaded, out, table.render(format_of(&loaded, format))))
}
