//! `gibbslab`: config-driven experiment runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gibbslab::blockavg::{self, BlockError};
use gibbslab::bootstrap::{self, BootstrapError};
use gibbslab::config::{self, BuildError, ConfigError, ExperimentConfig, OutputFormat};
use gibbslab::exact::{self, ExactError};
use gibbslab::fit::{self, FitError};
use gibbslab::report::{self, Cell, CovarianceRow, Manifest, ParsedTable, ReportError, Table};
use gibbslab::sampler::{self, SamplerError};
use gibbslab::suite::{self, SuiteError};
use gibbslab::ModelSpec;

#[derive(Parser)]
#[command(name = "gibbslab", version, about = "Lattice Gibbs measure experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `[run] format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Grid quadrature covariances and spectral gap.
    Exact(Common),
    /// Markov chain covariance estimates with batch-means errors.
    Sample(Common),
    /// Block-averaging coefficients and block-matrix inverse decay.
    Blockcoef(Common),
    /// Lebowitz-inequality bootstrap of covariance bounds.
    Bootstrap(Common),
    /// Power-law fit of a `dist,value` CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// CSV with a `dist` column, e.g. a bootstrap or covariance table.
        #[arg(long)]
        input: PathBuf,
        /// Value column; defaults to `value`, then `max_bound`.
        #[arg(long)]
        column: Option<String>,
    },
    /// Built-in Gaussian verification suite.
    Verify(Common),
}

#[derive(Debug)]
enum Failure {
    VerifyFailed,
    Config(String),
    Model(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::VerifyFailed => 1,
            Failure::Config(_) => 2,
            Failure::Model(_) => 3,
            Failure::Numerical(_) => 4,
            Failure::Io(_) => 5,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(c) => c.into(),
            BuildError::Model(m) => Failure::Model(m.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Io(e.to_string())
    }
}

macro_rules! numerical {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Numerical(e.to_string())
            }
        }
    )*};
}
numerical!(ExactError, BlockError, FitError);

impl From<SamplerError> for Failure {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::BadConfig(_) => Failure::Config(e.to_string()),
            SamplerError::Model(_) => Failure::Model(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<BootstrapError> for Failure {
    fn from(e: BootstrapError) -> Self {
        match e {
            BootstrapError::ConditionViolated(_) => Failure::Model(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Model(_) => Failure::Model(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

struct Run {
    cfg: ExperimentConfig,
    seed: u64,
    out: PathBuf,
    format: OutputFormat,
    manifest: Manifest,
}

impl Run {
    fn new(name: &str, common: &Common, need_config: bool) -> Result<Self, Failure> {
        let cfg = match &common.config {
            Some(p) => ExperimentConfig::load(p)?,
            None if need_config => {
                return Err(Failure::Config(format!("`{name}` needs --config")))
            }
            None => ExperimentConfig::parse("")?,
        };
        let seed = common.seed.unwrap_or(cfg.run.seed);
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.run.out));
        let format = match common.format {
            Some(Format::Csv) => OutputFormat::Csv,
            Some(Format::Json) => OutputFormat::Json,
            None => cfg.run.format,
        };
        let manifest = Manifest::new(name, &cfg.hash, seed);
        let mut cfg = cfg;
        cfg.run.seed = seed;
        Ok(Run {
            cfg,
            seed,
            out,
            format,
            manifest,
        })
    }

    fn model(&mut self) -> Result<ModelSpec, Failure> {
        let model = config::build_model(&self.cfg)?;
        self.manifest.insert("model_fingerprint", &model.fingerprint());
        Ok(model)
    }

    fn save(&self, table: &Table) -> Result<(), Failure> {
        let path = table.save(&self.out, self.format)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn finish(&self) -> Result<(), Failure> {
        self.save(&self.manifest.table())
    }
}

fn covariance_rows(model: &ModelSpec, value: impl Fn(usize, usize) -> (f64, f64), method: &str) -> Vec<CovarianceRow> {
    let lat = model.lattice();
    let n = model.len();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in i..n {
            let (v, se) = value(i, j);
            rows.push(CovarianceRow {
                i,
                j,
                dist: lat.dist_idx(i, j),
                value: v,
                stderr: se,
                method: method.into(),
            });
        }
    }
    rows
}

fn run_exact(common: &Common) -> Result<(), Failure> {
    let mut run = Run::new("exact", common, true)?;
    let model = run.model()?;
    let spec = run.cfg.grid_spec(&model)?;
    let gm = exact::build_grid_measure(&model, spec)?;
    let cov = gm.covariance_matrix();
    let rows = covariance_rows(&model, |i, j| (cov[(i, j)], 0.0), "quadrature");
    run.save(&report::covariance_table(&rows))?;
    let gen = exact::build_generator(&gm)?;
    let gap = exact::spectral_gap(&gen)?;
    let mut summary = Table::new("exact_summary", &["key", "value"]);
    summary.push(vec!["states".into(), gm.states().into()]);
    summary.push(vec!["half_width".into(), spec.half_width.into()]);
    summary.push(vec!["points_per_site".into(), spec.points_per_site.into()]);
    summary.push(vec!["log_normalizer".into(), gm.log_norm().into()]);
    summary.push(vec!["spectral_gap".into(), gap.gap.into()]);
    summary.push(vec!["gap_iterations".into(), gap.iterations.into()]);
    if model.is_gaussian() {
        if let Ok(o) = exact::gaussian_oracle_for(&model) {
            summary.push(vec!["gap_closed_form".into(), o.gap.into()]);
        }
    }
    run.save(&summary)?;
    run.finish()
}

fn run_sample(common: &Common) -> Result<(), Failure> {
    let mut run = Run::new("sample", common, true)?;
    let model = run.model()?;
    let cfg = run.cfg.chain_config()?;
    let batch = sampler::run_chain(&model, &cfg)?;
    let n = model.len();
    let mut ests = vec![None; n * n];
    for i in 0..n {
        for j in i..n {
            ests[i * n + j] = Some(sampler::estimate_cov(&batch, i, j)?);
        }
    }
    let rows = covariance_rows(
        &model,
        |i, j| {
            let e = ests[i * n + j].as_ref().expect("estimated");
            (e.value, e.stderr)
        },
        "mcmc",
    );
    run.save(&report::covariance_table(&rows))?;
    run.manifest
        .insert("accept_rate", &report::fmt12(batch.accept_rate));
    run.manifest.insert("samples", &batch.len().to_string());
    run.finish()
}

fn run_blockcoef(common: &Common) -> Result<(), Failure> {
    let mut run = Run::new("blockcoef", common, true)?;
    let model = run.model()?;
    let sec = run.cfg.block_section()?.clone();
    let rep = blockavg::verify_coefficient_bounds(&model, &sec.radii, sec.epsilon)?;
    run.save(&report::coefficient_table(&rep.rows))?;
    let mut t = Table::new(
        "block_matrix",
        &["R", "blocks", "dominance_margin", "min_inverse_entry", "inverse_slope"],
    );
    for &r in &sec.radii {
        let bm = blockavg::assemble_block_matrix(&model, r, sec.rho, sec.c)?;
        let (min_entry, slope) = match blockavg::inverse_decay(&bm) {
            Ok(inv) => (inv.min_entry, inv.exponent().unwrap_or(f64::NAN)),
            Err(BlockError::NotDominant { .. }) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e.into()),
        };
        t.push(vec![
            r.into(),
            bm.len().into(),
            bm.dominance_margin().into(),
            min_entry.into(),
            slope.into(),
        ]);
    }
    run.save(&t)?;
    run.manifest.insert("coefficient_bounds_passed", &rep.passed().to_string());
    run.finish()
}

fn run_bootstrap(common: &Common) -> Result<(), Failure> {
    let mut run = Run::new("bootstrap", common, true)?;
    let model = run.model()?;
    let (params, sec) = run.cfg.bootstrap_params()?;
    let sec = sec.clone();
    let d = model.dim() as f64;
    let lat = model.lattice();
    let n = model.len();
    let (c0, diag) = match (sec.c0, sec.variance) {
        (Some(c0), Some(v)) => (c0, vec![v; n]),
        _ if model.is_gaussian() => {
            let o = exact::gaussian_oracle_for(&model)?;
            let mut c0: f64 = sec.c0.unwrap_or(0.0);
            if sec.c0.is_none() {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            let r = lat.dist_idx(i, j) as f64;
                            c0 = c0.max(o.cov(i, j).abs() * (1.0 + r).powf(d + sec.alpha0));
                        }
                    }
                }
            }
            let diag = match sec.variance {
                Some(v) => vec![v; n],
                None => (0..n).map(|i| o.cov(i, i)).collect(),
            };
            (c0, diag)
        }
        _ => {
            return Err(Failure::Config(
                "[bootstrap] needs c0 and variance for non-Gaussian models".into(),
            ))
        }
    };
    let res = bootstrap::run_bootstrap(&model, (c0, sec.alpha0), &diag, &params)?;
    run.save(&report::bootstrap_table(&res.rows))?;
    run.manifest.insert("L", &report::fmt12(res.l));
    run.manifest.insert("iterations", &res.iterations.to_string());
    run.manifest.insert("alpha_hat", &report::fmt12(res.alpha_hat));
    run.finish()
}

fn run_fit(common: &Common, input: &Path, column: Option<&str>) -> Result<(), Failure> {
    let mut run = Run::new("fit", common, false)?;
    let table = ParsedTable::from_path(input)?;
    let dist = table.column_f64("dist")?;
    let values = match column {
        Some(c) => table.column_f64(c)?,
        None => table
            .column_f64("value")
            .or_else(|_| table.column_f64("max_bound"))?,
    };
    // bootstrap tables hold every sweep; fit the last one
    let keep: Vec<bool> = match table.column_f64("iteration") {
        Ok(it) => {
            let last = it.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            it.iter().map(|&k| k == last).collect()
        }
        Err(_) => vec![true; dist.len()],
    };
    let env = fit::envelope(
        dist.into_iter()
            .zip(values)
            .zip(keep)
            .filter(|&((r, v), k)| k && r >= 1.0 && v > 0.0)
            .map(|(p, _)| p),
    );
    let f = fit::fit_power_law(&fit::default_window(&env))?;
    let mut t = Table::new("fit", &["C", "alpha_hat", "rmse", "n_points"]);
    t.push(vec![f.c.into(), f.alpha_hat.into(), f.rmse.into(), Cell::from(f.n_points)]);
    run.save(&t)?;
    run.manifest.insert("input", &input.display().to_string());
    run.finish()
}

fn run_verify(common: &Common) -> Result<(), Failure> {
    let run = Run::new("verify", common, false)?;
    let rep = suite::run_gaussian_suite(run.seed)?;
    run.save(&rep.table())?;
    for c in &rep.checks {
        println!(
            "{} {}: value {} reference {} tolerance {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            report::fmt12(c.value),
            report::fmt12(c.reference),
            report::fmt12(c.tolerance)
        );
    }
    run.finish()?;
    if rep.passed() {
        Ok(())
    } else {
        Err(Failure::VerifyFailed)
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("GIBBSLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // a global pool may already exist in embedded use; ignore that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    let result = match &cli.command {
        Command::Exact(c) => run_exact(c),
        Command::Sample(c) => run_sample(c),
        Command::Blockcoef(c) => run_blockcoef(c),
        Command::Bootstrap(c) => run_bootstrap(c),
        Command::Fit {
            common,
            input,
            column,
        } => run_fit(common, input, column.as_deref()),
        Command::Verify(c) => run_verify(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::VerifyFailed => eprintln!("verification failed"),
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Model(m) => eprintln!("model error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical error: {m}"),
                Failure::Io(m) => eprintln!("i/o error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
