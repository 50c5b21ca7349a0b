//! Command-line front end.
//!
//! Structured results go to standard output as JSON (or CSV for tables), or
//! into `--out-dir`. Each JSON output echoes the resolved configuration.
//! Library errors exit with 1 and an error record on standard error; I/O
//! and parse errors exit with 2.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    constants_for, default_epsilon_grid, ln_tail_bound, median_window, optimize_epsilon,
    tail_bound, ConcentrationConstants, ConstantsRecord,
};
use crate::canonical::{
    delta_deviation, ln_reduced_dm_tail, rho_c_bipartite, rho_c_limit, BipartiteSpectrum,
};
use crate::error::ErrorReport;
use crate::experiments::{
    moment_report_streamed, oracle_agreement_report, reduced_dm_report, spin_concentration_probe,
    spin_summary, tail_report, ExperimentReport, Observable, SpinEnsembleSpec, TailRow,
    TailSampler, DEFAULT_SIGMAS,
};
use crate::rng::RngSpec;
use crate::sampler::{
    expand_occupations, oracle_occupations, sample_gaussian_ensemble, sample_sphere, OracleConfig,
    Proposal, SampleBatch,
};
use crate::spectrum::{
    compute_means, concentration_shift_solve, harmonic_frame, harmonic_shift_solve, Spectrum,
    DEFAULT_SHIFT_TOL,
};

pub const SEED_ENV: &str = "MEAN_ENERGY_SEED";

#[derive(Debug, Parser)]
#[command(name = "mean-energy", version, about = "Random pure states with fixed mean energy")]
pub struct Cli {
    /// Worker threads; never changes numerical output.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write outputs into this directory instead of standard output.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Gaussian,
    Sphere,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Moments,
    ReducedDm,
    Tail,
    Spins,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableArg {
    RePsi1,
    AbsSqPsi1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSamplerArg {
    Gaussian,
    Oracle,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeedArgs {
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub stream: u32,
}

impl SeedArgs {
    fn spec(&self) -> RngSpec {
        RngSpec::new(self.seed, self.stream)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Power means of a spectrum.
    Means {
        #[arg(long)]
        spectrum: PathBuf,
    },
    /// Energy offsets: harmonic, and the concentration shift when epsilon is given.
    Shift {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        energy: f64,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Concentration constants and tail bounds.
    Bounds {
        #[arg(long)]
        spectrum: PathBuf,
        #[arg(long)]
        energy: f64,
        #[arg(long, conflicts_with = "epsilon_grid")]
        epsilon: Option<f64>,
        /// Grid searched at the first t value.
        #[arg(long, value_delimiter = ',')]
        epsilon_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_value = "1.01,1.05,1.1,1.5,2")]
        t_values: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        lipschitz: f64,
    },
    /// Canonical reduced state of a bipartite system.
    Canonical {
        #[arg(long)]
        bipartite: PathBuf,
        #[arg(long)]
        energy: f64,
        #[arg(long)]
        epsilon: f64,
    },
    /// Draw states.
    Sample {
        #[arg(long)]
        spectrum: PathBuf,
        /// Required except in sphere mode.
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, value_enum, default_value_t = Mode::Gaussian)]
        mode: Mode,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Monte Carlo checks against the analytic results.
    Verify {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, required_if_eq_any = [("experiment", "moments"), ("experiment", "tail"), ("experiment", "oracle")])]
        spectrum: Option<PathBuf>,
        #[arg(long, required_if_eq("experiment", "reduced-dm"))]
        bipartite: Option<PathBuf>,
        #[arg(long)]
        energy: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        count: usize,
        #[command(flatten)]
        seed: SeedArgs,
        #[arg(long, default_value_t = DEFAULT_SIGMAS)]
        tolerance_sigmas: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2,0.5,1,1.01,1.05")]
        t_values: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ObservableArg::RePsi1)]
        observable: ObservableArg,
        #[arg(long, value_enum, default_value_t = TailSamplerArg::Gaussian)]
        sampler: TailSamplerArg,
        #[command(flatten)]
        spins: SpinArgs,
    },
    /// Low-energy level counts and constants for free spins.
    Spins {
        #[command(flatten)]
        spins: SpinArgs,
    },
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SpinArgs {
    #[arg(long, default_value_t = 10)]
    pub m: u32,
    #[arg(long, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.4)]
    pub gamma: f64,
}

impl SpinArgs {
    fn spec(&self) -> SpinEnsembleSpec {
        SpinEnsembleSpec {
            m: self.m,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Lib(crate::Error),
    Io(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// One named output: JSON document or CSV table.
enum Artifact {
    Json(String, serde_json::Value),
    Csv(String, Vec<u8>),
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    config: C,
    result: R,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(Failure::Io(e.to_string())),
        },
        None => execute(&cli),
    };
    let written = outcome.and_then(|arts| emit(&cli, arts));
    match written {
        Ok(()) => 0,
        Err(Failure::Lib(e)) => {
            report_error(&e.report());
            1
        }
        Err(Failure::Io(msg)) => {
            report_error(&ErrorReport {
                error: "io".into(),
                message: msg,
            });
            2
        }
    }
}

fn report_error(r: &ErrorReport) {
    let line = serde_json::to_string(r).unwrap_or_else(|_| r.message.clone());
    eprintln!("{line}");
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_spectrum(path: &Path) -> CliResult<Spectrum> {
    read_json(path)
}

fn read_bipartite(path: &Path) -> CliResult<BipartiteSpectrum> {
    let bs: BipartiteSpectrum = read_json(path)?;
    bs.validate()?;
    Ok(bs)
}

fn require(value: Option<f64>, name: &str) -> CliResult<f64> {
    value.ok_or_else(|| Failure::Io(format!("--{name} is required here")))
}

fn envelope<C: Serialize, R: Serialize>(command: &str, config: C, result: R) -> serde_json::Value {
    serde_json::to_value(Envelope {
        command,
        config,
        result,
    })
    .expect("serializable output")
}

fn execute(cli: &Cli) -> CliResult<Vec<Artifact>> {
    match &cli.command {
        Command::Means { spectrum } => {
            let s = read_spectrum(spectrum)?;
            let cfg = serde_json::json!({ "spectrum": spectrum });
            Ok(vec![Artifact::Json("means".into(), envelope("means", cfg, compute_means(&s)))])
        }
        Command::Shift {
            spectrum,
            energy,
            epsilon,
        } => {
            let s = read_spectrum(spectrum)?;
            let h = harmonic_shift_solve(&s, *energy, DEFAULT_SHIFT_TOL)?;
            let conc = epsilon
                .map(|eps| concentration_shift_solve(&s, *energy, eps, DEFAULT_SHIFT_TOL))
                .transpose()?
                .map(|f| f.shift);
            let cfg = serde_json::json!({ "spectrum": spectrum, "energy": energy, "epsilon": epsilon });
            let res = serde_json::json!({
                "shift": h,
                "e_prime": energy + h,
                "concentration_shift": conc,
            });
            Ok(vec![Artifact::Json("shift".into(), envelope("shift", cfg, res))])
        }
        Command::Bounds {
            spectrum,
            energy,
            epsilon,
            epsilon_grid,
            t_values,
            lipschitz,
        } => bounds(cli.format, spectrum, *energy, *epsilon, epsilon_grid.as_deref(), t_values, *lipschitz),
        Command::Canonical {
            bipartite,
            energy,
            epsilon,
        } => canonical(bipartite, *energy, *epsilon),
        Command::Sample {
            spectrum,
            energy,
            count,
            seed,
            mode,
            eta,
        } => sample(cli.format, spectrum, *energy, *count, seed, *mode, *eta),
        Command::Verify { .. } => verify(cli),
        Command::Spins { spins } => {
            let summary = spin_summary(&spins.spec())?;
            Ok(vec![Artifact::Json("spins".into(), envelope("spins", spins, summary))])
        }
    }
}

#[derive(Serialize)]
struct BoundRow {
    t: f64,
    bound: f64,
    log10_bound: f64,
}

#[derive(Serialize)]
struct BoundsResult {
    constants: ConstantsRecord,
    median_window: f64,
    rows: Vec<BoundRow>,
}

fn bounds(
    format: Format,
    path: &Path,
    energy: f64,
    epsilon: Option<f64>,
    grid: Option<&[f64]>,
    ts: &[f64],
    lambda: f64,
) -> CliResult<Vec<Artifact>> {
    let s = read_spectrum(path)?;
    let default_grid = default_epsilon_grid();
    let k: ConcentrationConstants = match (epsilon, grid) {
        (Some(eps), _) => constants_for(&s, energy, eps)?,
        (None, g) => {
            let g = g.unwrap_or(&default_grid);
            let t0 = ts.first().copied().unwrap_or(1.0);
            optimize_epsilon(&s, energy, t0, g)?
        }
    };
    let rows: Vec<BoundRow> = ts
        .iter()
        .map(|&t| BoundRow {
            t,
            bound: tail_bound(&k, t, lambda),
            log10_bound: ln_tail_bound(&k, t) / std::f64::consts::LN_10,
        })
        .collect();
    let cfg = serde_json::json!({
        "spectrum": path,
        "energy": energy,
        "epsilon": epsilon,
        "epsilon_grid": if epsilon.is_none() { Some(grid.unwrap_or(&default_grid).to_vec()) } else { None },
        "t_values": ts,
        "lipschitz": lambda,
    });
    let result = BoundsResult {
        constants: k.record(),
        median_window: median_window(&k, lambda),
        rows,
    };
    let mut out = Vec::new();
    if format == Format::Csv {
        out.push(Artifact::Csv("bounds".into(), csv_rows(&result.rows)?));
    }
    out.push(Artifact::Json("constants".into(), envelope("bounds", cfg, result)));
    Ok(out)
}

fn canonical(path: &Path, energy: f64, epsilon: f64) -> CliResult<Vec<Artifact>> {
    let bs = read_bipartite(path)?;
    let state = rho_c_bipartite(&bs, energy, epsilon)?;
    let combined = bs.combined()?;
    let k = constants_for(&combined, energy, epsilon)?;
    let limit = rho_c_limit(&bs, energy)?;
    let da = bs.dim_a() as f64;
    let res = serde_json::json!({
        "diagonal": state.matrix.diagonal(),
        "trace": state.matrix.trace(),
        "trace_deviation": state.trace_deviation(),
        "limit_diagonal": limit.diagonal(),
        "shift": state.frame.shift,
        "delta": delta_deviation(&k),
        "tail_prefactor": da * (da + 1.0) * k.a,
        "ln_tail_at_unit_t": ln_reduced_dm_tail(&k, bs.dim_a(), 1.0),
        "constants": k.record(),
    });
    let cfg = serde_json::json!({ "bipartite": path, "energy": energy, "epsilon": epsilon });
    Ok(vec![Artifact::Json("canonical".into(), envelope("canonical", cfg, res))])
}

fn sample(
    format: Format,
    path: &Path,
    energy: Option<f64>,
    count: usize,
    seed: &SeedArgs,
    mode: Mode,
    eta: Option<f64>,
) -> CliResult<Vec<Artifact>> {
    let s = read_spectrum(path)?;
    let rng = seed.spec();
    let batch: SampleBatch = match mode {
        Mode::Sphere => sample_sphere(s.dim() as usize, count, rng)?,
        Mode::Gaussian => {
            let frame = harmonic_frame(&s, require(energy, "energy")?, DEFAULT_SHIFT_TOL)?;
            sample_gaussian_ensemble(&frame, count, rng)?
        }
        Mode::Oracle => {
            let mut cfg = OracleConfig::for_spectrum(&s, count);
            cfg.proposal = Proposal::Uniform;
            if let Some(e) = eta {
                cfg.eta = e;
            }
            let occ = oracle_occupations(&s, require(energy, "energy")?, &cfg, count, rng)?;
            expand_occupations(&s, &occ)
        }
    };
    let cfg = serde_json::json!({
        "spectrum": path,
        "energy": energy,
        "count": count,
        "seed": seed.seed,
        "stream": seed.stream,
        "mode": mode,
        "eta": batch.meta.eta,
    });
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<String> = (0..batch.dim())
                .flat_map(|k| [format!("re{k}"), format!("im{k}")])
                .collect();
            if batch.weights.is_some() {
                header.push("weight".into());
            }
            w.write_record(&header)?;
            for (i, st) in batch.states.iter().enumerate() {
                let mut row: Vec<String> = st
                    .amplitudes
                    .iter()
                    .flat_map(|z| [z.re.to_string(), z.im.to_string()])
                    .collect();
                if let Some(ws) = &batch.weights {
                    row.push(ws[i].to_string());
                }
                w.write_record(&row)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
            let meta = envelope("sample", cfg, &batch.meta);
            Ok(vec![Artifact::Csv("samples".into(), bytes), Artifact::Json("sample_meta".into(), meta)])
        }
        Format::Json => Ok(vec![Artifact::Json("samples".into(), envelope("sample", cfg, &batch))]),
    }
}

fn verify(cli: &Cli) -> CliResult<Vec<Artifact>> {
    let Command::Verify {
        experiment,
        spectrum,
        bipartite,
        energy,
        epsilon,
        count,
        seed,
        tolerance_sigmas,
        t_values,
        observable,
        sampler,
        spins,
    } = &cli.command
    else {
        unreachable!("verify called for another command")
    };
    let rng = seed.spec();
    let sigmas = *tolerance_sigmas;
    let mut tail_rows: Option<Vec<TailRow>> = None;
    let report: ExperimentReport = match experiment {
        Experiment::Moments => {
            let s = read_spectrum(spectrum.as_deref().expect("clap requires spectrum"))?;
            let frame = harmonic_frame(&s, require(*energy, "energy")?, DEFAULT_SHIFT_TOL)?;
            moment_report_streamed(&frame, *count, rng, sigmas)?
        }
        Experiment::ReducedDm => {
            let bs = read_bipartite(bipartite.as_deref().expect("clap requires bipartite"))?;
            reduced_dm_report(&bs, require(*energy, "energy")?, *epsilon, *count, rng)?
        }
        Experiment::Tail => {
            let s = read_spectrum(spectrum.as_deref().expect("clap requires spectrum"))?;
            let obs = match observable {
                ObservableArg::RePsi1 => Observable::RePsi1,
                ObservableArg::AbsSqPsi1 => Observable::AbsSqPsi1,
            };
            let smp = match sampler {
                TailSamplerArg::Gaussian => TailSampler::Gaussian,
                TailSamplerArg::Oracle => TailSampler::Oracle,
            };
            let (r, rows) = tail_report(&s, require(*energy, "energy")?, *epsilon, obs, smp, *count, rng, t_values)?;
            tail_rows = Some(rows);
            r
        }
        Experiment::Spins => spin_concentration_probe(&spins.spec(), *count, rng, sigmas)?,
        Experiment::Oracle => {
            let s = read_spectrum(spectrum.as_deref().expect("clap requires spectrum"))?;
            oracle_agreement_report(&s, require(*energy, "energy")?, *count, rng, sigmas)?
        }
    };
    let mut cfg = serde_json::json!({
        "experiment": experiment,
        "spectrum": spectrum,
        "bipartite": bipartite,
        "energy": energy,
        "epsilon": epsilon,
        "count": count,
        "seed": seed.seed,
        "stream": seed.stream,
        "tolerance_sigmas": tolerance_sigmas,
    });
    match experiment {
        Experiment::Tail => {
            cfg["t_values"] = serde_json::json!(t_values);
            cfg["observable"] = serde_json::json!(observable);
            cfg["sampler"] = serde_json::json!(sampler);
        }
        Experiment::Spins => cfg["spins"] = serde_json::json!(spins),
        _ => {}
    }
    let mut out = Vec::new();
    if let Some(rows) = &tail_rows {
        if cli.out_dir.is_some() || cli.format == Format::Csv {
            out.push(Artifact::Csv("tail".into(), csv_rows(rows)?));
        }
    }
    let result = serde_json::json!({ "passed": report.passed(), "report": report, "tail": tail_rows });
    out.push(Artifact::Json("report".into(), envelope("verify", cfg, result)));
    Ok(out)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

fn emit(cli: &Cli, artifacts: Vec<Artifact>) -> CliResult<()> {
    match &cli.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for a in artifacts {
                match a {
                    Artifact::Json(name, v) => {
                        let mut text = serde_json::to_string_pretty(&v).expect("json");
                        text.push('\n');
                        fs::write(dir.join(format!("{name}.json")), text)?;
                    }
                    Artifact::Csv(name, bytes) => fs::write(dir.join(format!("{name}.csv")), bytes)?,
                }
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            // CSV output on stdout carries only the table when one exists
            let has_csv = artifacts.iter().any(|a| matches!(a, Artifact::Csv(..)));
            for a in artifacts {
                match a {
                    Artifact::Csv(_, bytes) if cli.format == Format::Csv => out.write_all(&bytes)?,
                    Artifact::Json(_, v) if !(has_csv && cli.format == Format::Csv) => {
                        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("json"))?;
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(())
}
