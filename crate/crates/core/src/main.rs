use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cma_core::bma;
use cma_core::config::{Method, MethodConfig};
use cma_core::dataset::{format_float, generate_synthetic, load_csv, save_csv, Dataset, Standardizer};
use cma_core::experiment::{class_intervals, model_probs_for, run_to_dir, Inference, ProtocolConfig};
use cma_core::model_space::fit_ensemble;
use cma_core::priors::PriorSpec;
use cma_core::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(
    name = "cma",
    version,
    about = "Bayesian and credal model averaging of logistic regressions"
)]
struct Cli {
    /// Worker threads for model fitting and experiment replicates.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic logistic dataset.
    Synth(SynthArgs),
    /// Fit every model and write per-model BIC and posterior weight.
    Fit(FitArgs),
    /// Predict the class of every test row.
    Predict(PredictArgs),
    /// Posterior inclusion probability (or interval) of every covariate.
    Inclusion(InclusionArgs),
    /// Run the replicated experiment protocol.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    n: usize,
    /// Intercept followed by one coefficient per covariate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
    /// Zero-based indices of covariates that enter the linear predictor.
    #[arg(long, value_delimiter = ',')]
    active: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Prior and credal-set settings; flags override the configuration file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta_lo: Option<f64>,
    #[arg(long)]
    theta_hi: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    theta_vec: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    hi: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, path: Option<&Path>) -> Result<MethodConfig> {
        let base = match path {
            Some(p) => MethodConfig::load(p)?,
            None => MethodConfig::default(),
        };
        Ok(base.merged_with(&MethodConfig {
            prior: None,
            theta: self.theta,
            alpha: self.alpha,
            beta: self.beta,
            theta_vec: self.theta_vec.clone(),
            theta_lo: self.theta_lo,
            theta_hi: self.theta_hi,
            epsilon: self.epsilon,
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }))
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Prior file; its `prior` key picks ib (default), bb or nb.
    #[arg(long)]
    prior_config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PredictArgs {
    /// Training data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct InclusionArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    protocol_config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    standardize: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn load_train(path: &Path, standardize: bool) -> Result<(Dataset, Option<Standardizer>)> {
    let d = load_csv(path)?;
    if standardize {
        let s = Standardizer::fit(&d);
        Ok((s.apply(&d), Some(s)))
    } else {
        Ok((d, None))
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let d = generate_synthetic(a.k, a.n, &a.coeffs, &a.active, a.seed)?;
    save_csv(&d, &a.out)
}

fn prior_method(cfg: &MethodConfig) -> Result<Method> {
    match cfg.prior.as_deref() {
        None | Some("ib") => Ok(Method::BmaIb),
        Some("bb") => Ok(Method::BmaBb),
        Some("nb") => Ok(Method::BmaNb),
        Some(other) => Err(Error::Config(format!("unknown prior '{other}'"))),
    }
}

fn fit(a: &FitArgs) -> Result<()> {
    let cfg = a.overrides.apply(a.prior_config.as_deref())?;
    let (d, _) = load_train(&a.data, a.standardize)?;
    let prior: PriorSpec = match prior_method(&cfg)?.resolve(&cfg, d.k())? {
        cma_core::config::MethodSpec::Point(p) => p,
        _ => unreachable!("prior methods resolve to point priors"),
    };
    let ens = fit_ensemble(&d)?;
    let w = bma::posterior_weights(&ens.evidence, &prior)?.weights();
    let mut out = csv::Writer::from_writer(create(&a.out)?);
    out.write_record(["mask", "covariates", "size", "log_lik", "bic", "posterior_weight"])?;
    for (m, w) in ens.models.iter().zip(w) {
        let names: Vec<&str> = m
            .structure
            .covariates()
            .map(|j| d.covariate_names()[j].as_str())
            .collect();
        out.write_record([
            m.structure.mask().to_string(),
            names.join(" "),
            m.structure.size().to_string(),
            format_float(m.log_lik),
            format_float(m.bic),
            format_float(w),
        ])?;
    }
    out.flush().map_err(|e| Error::io(&a.out, e))
}

fn predict(a: &PredictArgs) -> Result<()> {
    let cfg = a.overrides.apply(a.config.as_deref())?;
    let (train, scaler) = load_train(&a.data, a.standardize)?;
    let test = load_csv(&a.test)?;
    if test.covariate_names() != train.covariate_names() {
        return Err(Error::InvalidDataset(
            "test covariates differ from training covariates".into(),
        ));
    }
    let test = match &scaler {
        Some(s) => s.apply(&test),
        None => test,
    };
    let spec = a.method.resolve(&cfg, train.k())?;
    let ens = fit_ensemble(&train)?;
    let inf = Inference::new(&ens, &spec)?;
    let intervals = class_intervals(&inf, &model_probs_for(&ens, &test))?;
    let mut out = csv::Writer::from_writer(create(&a.out)?);
    out.write_record(["row", "p_point", "p_lo", "p_hi", "decision"])?;
    for (i, iv) in intervals.iter().enumerate() {
        let point = if inf.is_credal() {
            String::new()
        } else {
            format_float(iv.lo)
        };
        out.write_record([
            i.to_string(),
            point,
            format_float(iv.lo),
            format_float(iv.hi),
            inf.decide(iv).to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(&a.out, e))
}

fn inclusion(a: &InclusionArgs) -> Result<()> {
    let cfg = a.overrides.apply(a.config.as_deref())?;
    let (d, _) = load_train(&a.data, a.standardize)?;
    let spec = a.method.resolve(&cfg, d.k())?;
    let ens = fit_ensemble(&d)?;
    let inf = Inference::new(&ens, &spec)?;
    let mut out = csv::Writer::from_writer(create(&a.out)?);
    out.write_record(["covariate", "method", "point", "lo", "hi"])?;
    for (j, name) in d.covariate_names().iter().enumerate() {
        let iv = inf.inclusion(j)?;
        let point = if inf.is_credal() {
            String::new()
        } else {
            format_float(iv.lo)
        };
        out.write_record([
            name.clone(),
            a.method.to_string(),
            point,
            format_float(iv.lo),
            format_float(iv.hi),
        ])?;
    }
    out.flush().map_err(|e| Error::io(&a.out, e))
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.protocol_config {
        Some(p) => ProtocolConfig::load(p)?,
        None => ProtocolConfig::default(),
    };
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.test_size {
        cfg.test_size = t;
    }
    cfg.standardize |= a.standardize;
    cfg.validate()?;
    let d = load_csv(&a.data)?;
    run_to_dir(&d, &cfg, &a.out_dir)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Inclusion(a) => inclusion(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprint!(
                "{}",
                if msg.starts_with("error:") {
                    msg
                } else {
                    format!("error: {msg}")
                }
            );
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
