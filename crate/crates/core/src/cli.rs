//! The four configuration-driven commands behind the `kslab` binary.
//!
//! Each `cmd_*` function does its own output and returns a process exit code:
//! 0 on success, 1 for runtime or verification failures, 2 for configuration
//! errors. Nothing written depends on wall-clock time or absolute paths, so a
//! rerun with the same configuration and seed reproduces every file byte for
//! byte.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{self, BoundRow, Crossover, RipReport, Table1Distribution, Table1Structure};
use crate::config::{Format, RunConfig};
use crate::error::{Error, Result};
use crate::io::{self, CsvTable};
use crate::linalg::Matrix;
use crate::model::KsDictionary;
use crate::packing::{self, DictionaryEnsemble, EnsembleReport};
use crate::simulate::{self, ErrorCurve, ExperimentSpec, FanoReport, MseComparison, SideInfo};
use crate::svg::{self, Plot, Series};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Mixed into the packing seed for the ensemble's codebook stream, so the
/// reference dictionary and the codebooks draw from different streams.
const ENSEMBLE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Parser)]
#[command(
    name = "kslab",
    version,
    about = "Minimax lower-bound laboratory for Kronecker-structured dictionaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to `output.directory` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the seed the command draws from.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the minimax lower bounds and order-wise scalings over N.
    Bound(Common),
    /// Build, verify and persist a dictionary ensemble.
    Pack(Common),
    /// Monte Carlo detection and MSE experiment with a Fano consistency check.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Directory written by `pack`; built inline from the config if absent.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
    /// Exhaustive restricted isometry constant of a matrix.
    Rip {
        /// TOML run configuration; its reference dictionary is used unless
        /// `--matrix` is given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Matrix CSV as written by the library (header row, optional schema comment).
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

/// Maps a library error to the documented exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Inadmissible(_)
        | Error::InvalidParameter(_)
        | Error::DegenerateCodebook(_)
        | Error::BudgetExceeded { .. } => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn report_error(cmd: &str, e: &Error) -> i32 {
    eprintln!("kslab {cmd}: error: {e}");
    if let Error::BudgetExceeded { .. } = e {
        eprintln!("kslab {cmd}: hint: reduce s or the number of columns p");
    }
    exit_code(e)
}

/// Parses `args` (including the program name) and runs the command.
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
    match cli.command {
        Command::Bound(c) => with_config("bound", &c, cmd_bound),
        Command::Pack(c) => with_config("pack", &c, cmd_pack),
        Command::Simulate { common, ensemble } => with_config("simulate", &common, |cfg, out| {
            cmd_simulate(cfg, out, ensemble.as_deref())
        }),
        Command::Rip {
            config,
            out,
            seed,
            matrix,
            s,
            threshold,
        } => {
            let cfg = match config.as_deref().map(RunConfig::load).transpose() {
                Ok(c) => c.map(|mut c| {
                    if let Some(seed) = seed {
                        c.packing.seed = seed;
                    }
                    c
                }),
                Err(e) => return report_error("rip", &e),
            };
            let out = out
                .or_else(|| cfg.as_ref().map(|c| PathBuf::from(&c.output.directory)))
                .unwrap_or_else(|| PathBuf::from("out"));
            let opts = RipOptions {
                matrix,
                s,
                threshold,
            };
            cmd_rip(cfg.as_ref(), &out, &opts)
        }
    }
}

fn with_config(cmd: &str, c: &Common, f: impl FnOnce(&RunConfig, &Path) -> i32) -> i32 {
    let mut cfg = match RunConfig::load(&c.config) {
        Ok(cfg) => cfg,
        Err(e) => return report_error(cmd, &e),
    };
    if let Some(seed) = c.seed {
        cfg.packing.seed = seed;
        cfg.experiment.master_seed = seed;
    }
    let out = c
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    if let Err(e) = std::fs::create_dir_all(&out) {
        return report_error(cmd, &Error::Io(e));
    }
    f(&cfg, &out)
}

fn require_positive_sigma(cfg: &RunConfig, why: &str) -> Result<()> {
    if cfg.noise.sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::Config {
            field: "noise.sigma".into(),
            reason: format!("must be > 0 for {why}"),
        })
    }
}

// ---------------------------------------------------------------- bound

pub const TABLE1_SCHEMA: &str = "kslab-table1/1";
pub const TABLE1_HEADER: [&str; 7] = [
    "N",
    "snr",
    "sparse_unstructured",
    "sparse_kronecker",
    "gaussian_sparse_unstructured",
    "gaussian_sparse_kronecker",
    "vacuous",
];

#[derive(Debug, Serialize)]
struct BoundSummary {
    degrees_term: f64,
    cardinality: f64,
    vacuous: bool,
    snr: f64,
    crossover: Option<Crossover>,
    rows: Vec<BoundRow>,
}

pub fn cmd_bound(cfg: &RunConfig, out: &Path) -> i32 {
    match bound_impl(cfg, out) {
        Ok(vacuous) => {
            if vacuous {
                eprintln!(
                    "kslab bound: warning: c1 (p1(m1-1) + p2(m2-1)) <= 3; every bound is vacuous and reported as 0"
                );
            }
            EXIT_OK
        }
        Err(e) => report_error("bound", &e),
    }
}

fn bound_impl(cfg: &RunConfig, out: &Path) -> Result<bool> {
    require_positive_sigma(cfg, "the bounds")?;
    let cap = bounds::BoundInputs::c1_cap(cfg.packing.t);
    if cfg.packing.c1 >= cap {
        return Err(Error::Config {
            field: "packing.c1".into(),
            reason: format!("c1 = {} violates c1 < t/(8 ln 2) = {cap}", cfg.packing.c1),
        });
    }
    let dims = cfg.dims();
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &n in &cfg.bound.n_grid {
        let inputs = cfg.bound_inputs(n);
        let thm1 = bounds::thm1_bound(&inputs)?;
        let cor1 = bounds::cor1_bound(&inputs)?;
        let thm2 = bounds::thm2_bound(&inputs)?;
        rows.push(BoundRow::from_theorem("thm1", &inputs, &thm1)?);
        rows.push(BoundRow::from_theorem("cor1", &inputs, &cor1)?);
        rows.push(BoundRow::from_theorem("thm2", &inputs, &thm2)?);
        let snr = snr_of(&inputs);
        let cell = |d, s| bounds::table1_scaling(d, s, dims, n, inputs.r, snr);
        table.push((
            n,
            snr,
            [
                cell(Table1Distribution::Sparse, Table1Structure::Unstructured),
                cell(Table1Distribution::Sparse, Table1Structure::Kronecker),
                cell(
                    Table1Distribution::GaussianSparse,
                    Table1Structure::Unstructured,
                ),
                cell(
                    Table1Distribution::GaussianSparse,
                    Table1Structure::Kronecker,
                ),
            ],
            thm1.vacuous,
        ));
    }
    let vacuous = rows.iter().all(|r| r.vacuous);

    if cfg.wants(Format::Csv) {
        bounds::write_bound_rows(&out.join("bounds.csv"), &rows)?;
        let mut t = CsvTable::create(&out.join("table1.csv"), TABLE1_SCHEMA, &TABLE1_HEADER)?;
        for (n, snr, cells, vac) in &table {
            let mut rec = vec![format!("{n}"), format!("{snr}")];
            rec.extend(cells.iter().map(|c| format!("{c}")));
            rec.push(vac.to_string());
            t.row(rec)?;
        }
        t.finish()?;
    }
    if cfg.wants(Format::Svg) {
        let mut series = Vec::new();
        for name in ["thm1", "cor1", "thm2"] {
            let pick: Vec<&BoundRow> = rows.iter().filter(|r| r.bound_name == name).collect();
            series.push(
                Series::new(name, pick.iter().map(|r| (r.inputs.n, r.value)).collect())
                    .with_flags(pick.iter().map(|r| r.vacuous).collect()),
            );
        }
        let labels = [
            "sparse, unstructured",
            "sparse, Kronecker",
            "Gaussian sparse, unstructured",
            "Gaussian sparse, Kronecker",
        ];
        for (k, label) in labels.iter().enumerate() {
            series.push(
                Series::new(
                    *label,
                    table.iter().map(|(n, _, c, _)| (*n, c[k])).collect(),
                )
                .with_flags(table.iter().map(|t| t.3).collect()),
            );
        }
        let plot = Plot {
            title: "Minimax lower bounds vs sample size".into(),
            x_label: "N".into(),
            y_label: "lower bound on minimax risk".into(),
            log_x: true,
            log_y: true,
            series,
        };
        svg::write(&out.join("bounds.svg"), &plot)?;
    }
    if cfg.wants(Format::Json) {
        let inputs = cfg.bound_inputs(cfg.bound.n_grid[0]);
        let summary = BoundSummary {
            degrees_term: inputs.degrees_term(),
            cardinality: inputs.cardinality(),
            vacuous,
            snr: snr_of(&inputs),
            crossover: bounds::crossover_snr(&inputs).ok(),
            rows: rows.clone(),
        };
        io::write_json(&out.join("bounds.json"), &summary)?;
    }
    for r in &rows {
        println!(
            "{:>6} N={:<10} value={:<24} vacuous={}",
            r.bound_name, r.inputs.n, r.value, r.vacuous
        );
    }
    Ok(vacuous)
}

fn snr_of(i: &bounds::BoundInputs) -> f64 {
    i.s as f64 * i.sigma_a * i.sigma_a / (i.m() as f64 * i.sigma * i.sigma)
}

// ---------------------------------------------------------------- pack

/// The reference dictionary `D0` a configuration describes: Gaussian factors
/// with normalized columns drawn from `packing.seed`.
pub fn reference_dictionary(cfg: &RunConfig) -> Result<KsDictionary> {
    let (m1, m2, p1, p2) = cfg.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.packing.seed);
    KsDictionary::random(m1, p1, m2, p2, &mut rng)
}

/// Builds the ensemble a configuration describes. Geometry is verified during
/// construction; the KL check is left to the caller.
pub fn build_configured_ensemble(cfg: &RunConfig) -> Result<DictionaryEnsemble> {
    let params = cfg.packing_params();
    let mode = cfg.ensemble_mode();
    params.validate()?;
    params.check_eps_cap(mode, cfg.p())?;
    let reference = reference_dictionary(cfg)?;
    packing::build_ensemble_seeded(
        &reference,
        &params,
        mode,
        cfg.packing.seed ^ ENSEMBLE_STREAM,
    )
}

#[derive(Debug, Serialize)]
struct PackReport<'a> {
    schema: &'static str,
    cardinality: usize,
    eps_prime: f64,
    mode: packing::EnsembleMode,
    seed: u64,
    report: &'a EnsembleReport,
}

pub fn cmd_pack(cfg: &RunConfig, out: &Path) -> i32 {
    match pack_impl(cfg, out) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("kslab pack: ensemble failed verification; see pack_report.json");
            EXIT_FAILURE
        }
        Err(e) => report_error("pack", &e),
    }
}

fn pack_impl(cfg: &RunConfig, out: &Path) -> Result<bool> {
    require_positive_sigma(cfg, "the KL check")?;
    let mut e = build_configured_ensemble(cfg)?;
    let report = packing::verify_ensemble(&e, &cfg.coefficient_model(), cfg.noise.sigma)?;
    e.report = report.clone();
    e.save(&out.join("ensemble"))?;
    if cfg.wants(Format::Json) {
        let r = PackReport {
            schema: "kslab-pack-report/1",
            cardinality: e.len(),
            eps_prime: e.params.eps_prime,
            mode: e.mode,
            seed: cfg.packing.seed,
            report: &report,
        };
        io::write_json(&out.join("pack_report.json"), &r)?;
    }
    println!("members            {}", e.len());
    println!("eps_prime          {}", e.params.eps_prime);
    println!(
        "pairwise dist^2    [{}, {}] within [{}, {}]: {}",
        report.min_pair_dist_sq,
        report.max_pair_dist_sq,
        report.lower_sandwich,
        report.upper_sandwich,
        report.sandwich_ok
    );
    println!(
        "max ||Dl - D0||    {} < r = {}: {}",
        report.max_dist_to_reference, report.radius, report.membership_ok
    );
    println!("unit-norm columns  {}", report.unit_norm_ok);
    if let Some(kl) = &report.kl {
        println!(
            "per-sample KL      {} <= {}: {}",
            kl.alpha_l_per_sample, kl.budget_per_sample, kl.pass
        );
    }
    println!(
        "verification       {}",
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(report.pass)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    schema: &'static str,
    cardinality: usize,
    eps_prime: f64,
    min_pair_dist_sq: f64,
    ensemble_verified: Option<bool>,
    side_info: SideInfo,
    master_seed: u64,
    fano: &'a FanoReport,
    mse: &'a [MseComparison],
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path, ensemble: Option<&Path>) -> i32 {
    match simulate_impl(cfg, out, ensemble) {
        Ok(0) => EXIT_OK,
        Ok(v) => {
            eprintln!("kslab simulate: {v} Fano consistency violation(s); this indicates a bug");
            EXIT_FAILURE
        }
        Err(e) => report_error("simulate", &e),
    }
}

fn simulate_impl(cfg: &RunConfig, out: &Path, ensemble_dir: Option<&Path>) -> Result<usize> {
    let ensemble = match ensemble_dir {
        Some(dir) => {
            if !dir.join("manifest.json").is_file() {
                return Err(Error::Config {
                    field: "--ensemble".into(),
                    reason: format!("no ensemble manifest in {}", dir.display()),
                });
            }
            DictionaryEnsemble::load(dir)?
        }
        None => build_configured_ensemble(cfg)?,
    };
    let model = cfg.coefficient_model();
    let sigma = cfg.noise.sigma;
    let verified = if sigma > 0.0 {
        let rep = packing::verify_ensemble(&ensemble, &model, sigma)?;
        if !rep.pass {
            return Err(Error::VerificationFailed(format!("{rep:?}")));
        }
        Some(true)
    } else {
        None
    };
    let spec = ExperimentSpec {
        ensemble: &ensemble,
        model,
        sigma,
        n_grid: cfg.experiment.n_grid.clone(),
        trials: cfg.experiment.trials,
        side_info: cfg.experiment.side_info,
        master_seed: cfg.experiment.master_seed,
    };
    let (curve, mse) = if sigma > 0.0 {
        simulate::run_mse_experiment(&spec)?
    } else {
        (simulate::run_error_experiment(&spec)?, Vec::new())
    };
    let fano = simulate::fano_consistency_check(&curve, &spec);

    if cfg.wants(Format::Csv) {
        curve.write_csv(&out.join("error_curve.csv"))?;
        curve.write_trial_log(&out.join("trials.csv"))?;
    }
    if cfg.wants(Format::Svg) {
        svg::write(&out.join("error_curve.svg"), &error_plot(&curve))?;
        svg::write(&out.join("mse.svg"), &mse_plot(&curve, &mse))?;
    }
    if cfg.wants(Format::Json) {
        let r = SimulateReport {
            schema: "kslab-simulate-report/1",
            cardinality: ensemble.len(),
            eps_prime: ensemble.params.eps_prime,
            min_pair_dist_sq: ensemble.report.min_pair_dist_sq,
            ensemble_verified: verified,
            side_info: spec.side_info,
            master_seed: spec.master_seed,
            fano: &fano,
            mse: &mse,
        };
        io::write_json(&out.join("simulate_report.json"), &r)?;
    }
    println!(
        "{:>8} {:>8} {:>12} {:>24}",
        "N", "errors", "error_rate", "worst_mse"
    );
    for pt in &curve.points {
        println!(
            "{:>8} {:>8} {:>12.6} {:>24}",
            pt.n, pt.errors, pt.error_rate, pt.worst_mse
        );
    }
    println!("fano violations: {}", fano.violations);
    Ok(fano.violations)
}

fn error_plot(curve: &ErrorCurve) -> Plot {
    let col = |f: fn(&simulate::CurvePoint) -> f64| {
        curve
            .points
            .iter()
            .map(|p| (p.n as f64, f(p)))
            .collect::<Vec<_>>()
    };
    Plot {
        title: "Detection error rate (Wilson 95% band)".into(),
        x_label: "N".into(),
        y_label: "error rate".into(),
        log_x: true,
        log_y: false,
        series: vec![
            Series::new("error rate", col(|p| p.error_rate)),
            Series::new("CI low", col(|p| p.ci_low)),
            Series::new("CI high", col(|p| p.ci_high)),
        ],
    }
}

fn mse_plot(curve: &ErrorCurve, mse: &[MseComparison]) -> Plot {
    let mut series = vec![
        Series::new(
            "worst-case MSE",
            curve
                .points
                .iter()
                .map(|p| (p.n as f64, p.worst_mse))
                .collect(),
        ),
        Series::new(
            "mean MSE",
            curve
                .points
                .iter()
                .map(|p| (p.n as f64, p.mean_mse))
                .collect(),
        ),
    ];
    if !mse.is_empty() {
        series.push(
            Series::new(
                format!("{} lower bound", mse[0].bound_name),
                mse.iter().map(|c| (c.n as f64, c.bound.value)).collect(),
            )
            .with_flags(mse.iter().map(|c| c.bound.vacuous).collect()),
        );
    }
    Plot {
        title: "Decode-then-output MSE vs minimax lower bound".into(),
        x_label: "N".into(),
        y_label: "squared Frobenius error".into(),
        log_x: true,
        log_y: true,
        series,
    }
}

// ---------------------------------------------------------------- rip

#[derive(Debug, Clone, Default)]
pub struct RipOptions {
    pub matrix: Option<PathBuf>,
    pub s: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RipJson {
    schema: &'static str,
    source: String,
    rows: usize,
    cols: usize,
    s: usize,
    delta: f64,
    witness: Vec<usize>,
    threshold: f64,
    pass: bool,
}

pub fn cmd_rip(cfg: Option<&RunConfig>, out: &Path, opts: &RipOptions) -> i32 {
    match rip_impl(cfg, out, opts) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => report_error("rip", &e),
    }
}

fn rip_impl(cfg: Option<&RunConfig>, out: &Path, opts: &RipOptions) -> Result<bool> {
    let (d, source): (Matrix, String) = match (&opts.matrix, cfg) {
        (Some(path), _) => {
            let name = path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            (io::read_matrix(path)?, name)
        }
        (None, Some(cfg)) => (reference_dictionary(cfg)?.d().clone(), "reference".into()),
        (None, None) => {
            return Err(Error::Config {
                field: "--matrix".into(),
                reason: "give --matrix or --config".into(),
            })
        }
    };
    let block = cfg.map(|c| c.rip).unwrap_or_default();
    let s = opts.s.unwrap_or(block.s);
    let threshold = opts.threshold.unwrap_or(block.threshold);
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::Config {
            field: "--threshold".into(),
            reason: "must be finite and >= 0".into(),
        });
    }
    let RipReport { s, delta, witness } = bounds::rip_constant(&d, s, block.budget as u128)?;
    let pass = delta <= threshold;
    let report = RipJson {
        schema: "kslab-rip/1",
        source,
        rows: d.nrows(),
        cols: d.ncols(),
        s,
        delta,
        witness: witness.into_vec(),
        threshold,
        pass,
    };
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join("rip.json"), &report)?;
    println!(
        "delta_{s} = {delta}  witness = {:?}  threshold = {threshold}  {}",
        report.witness,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(pass)
}
