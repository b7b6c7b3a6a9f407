//! Command-line front end: `synth`, `train`, `benchmark` and `replay`.
//!
//! Every `train` and `benchmark` run writes `manifest.txt` into its output
//! directory. The manifest is a `key = value` text file holding every
//! resolved setting; `replay --manifest FILE --out DIR` reruns it and produces
//! byte-identical outputs.
//!
//! Failures print a single line `error[<category>]: <message>` to stderr and
//! exit with a nonzero code (see [`exit_code`]).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::BandwidthRule;
use crate::data::{load_csv, split_by_year, synthesize, write_csv, Dataset, SynthSpec, YEAR_COLUMN};
use crate::error::{Error, Result};
use crate::eval::{bootstrap_experiment, detail_to_csv, report_to_csv, BootstrapConfig, ModelBuilder};
use crate::finetune::{write_history_csv, FineTuneConfig};
use crate::par::{self, Parallelism};
use crate::pipeline::{fit_model, Candidate, ModelKind, ModelSettings};
use crate::rbm::{ActivationParams, RbmMode};
use crate::serialize::encode_model;

/// Default supervised learning rate for full-batch fine-tuning.
pub const DEFAULT_SUPERVISED_LR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Case1,
    Case2,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "case1" => Ok(Preset::Case1),
            "case2" => Ok(Preset::Case2),
            _ => Err(Error::Config(format!("unknown preset '{s}'"))),
        }
    }

    pub fn synth_spec(self, seed: u64) -> SynthSpec {
        match self {
            Preset::Case1 => SynthSpec::case1(seed),
            Preset::Case2 => SynthSpec::case2(seed),
        }
    }

    /// Resolved defaults for this preset.
    pub fn defaults(self) -> PresetValues {
        match self {
            Preset::Case1 => PresetValues {
                structure: vec![6, 10, 10, 1],
                unsupervised_lr: 1.0,
                pretrain_epochs: 20,
                finetune_epochs: 1000,
                fractions_pct: (1..=20).map(|i| 5.0 * i as f64).collect(),
                train_years: (2000..=2006).collect(),
                test_years: vec![2007, 2008],
            },
            Preset::Case2 => PresetValues {
                structure: vec![16, 30, 30, 1],
                unsupervised_lr: 2.0,
                pretrain_epochs: 50,
                finetune_epochs: 500,
                fractions_pct: (1..=100).map(f64::from).collect(),
                train_years: (2000..=2003).collect(),
                test_years: vec![2004, 2005],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetValues {
    pub structure: Vec<usize>,
    pub unsupervised_lr: f64,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub fractions_pct: Vec<f64>,
    pub train_years: Vec<i64>,
    pub test_years: Vec<i64>,
}

#[derive(Debug, Parser)]
#[command(name = "regdbn", version, about = "Regularized DBN crash-frequency toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and a sidecar with its generator parameters.
    Synth(SynthArgs),
    /// Train one model and save it with its training history.
    Train(RunArgs),
    /// Run the repeated-subsampling benchmark.
    Benchmark(RunArgs),
    /// Rerun a saved manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "case1")]
    pub preset: Preset,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Override the preset row count.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Output CSV path; the sidecar goes next to it with a `.truth.txt` suffix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// CSV dataset; without it the preset's synthetic data is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Seed of the generated dataset when `--data` is absent.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub year_column: Option<String>,
    /// Training years, `2000:2006` or `2000,2001`.
    #[arg(long)]
    pub train_years: Option<String>,
    #[arg(long)]
    pub test_years: Option<String>,
    /// Model for `train`.
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated models for `benchmark`.
    #[arg(long)]
    pub models: Option<String>,
    /// Layer sizes such as `6-10-10-1`.
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub finetune_epochs: Option<usize>,
    #[arg(long)]
    pub unsupervised_lr: Option<f64>,
    #[arg(long)]
    pub supervised_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub reestimate: bool,
    #[arg(long)]
    pub reestimate_interval: Option<usize>,
    /// `binary` or `continuous`.
    #[arg(long)]
    pub rbm_mode: Option<String>,
    /// `silverman`, `loocv` or `fixed:<h>`.
    #[arg(long)]
    pub bandwidth: Option<String>,
    /// Percent grid `start:stop:step` or list `5,25,100`.
    #[arg(long)]
    pub fractions: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Bound on concurrent repetitions.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Synth { preset: Preset, seed: u64 },
}

/// Fully resolved run settings; what a manifest stores.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub preset: Preset,
    pub data: DataSource,
    pub target: String,
    pub year_column: String,
    pub train_years: Vec<i64>,
    pub test_years: Vec<i64>,
    pub models: Vec<ModelKind>,
    pub structure: Vec<usize>,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub unsupervised_lr: f64,
    pub supervised_lr: f64,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub reestimate: bool,
    pub reestimate_interval: usize,
    pub rbm_mode: RbmMode,
    pub bandwidth: BandwidthRule,
    pub fractions_pct: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub workers: usize,
}

/// `"2000:2006"` -> 2000..=2006, `"2007,2008"` -> [2007, 2008].
pub fn parse_years(text: &str) -> Result<Vec<i64>> {
    let bad = || Error::Config(format!("cannot read year set '{text}'"));
    if let Some((a, b)) = text.split_once(':') {
        let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
}

/// `"5:100:5"` -> 5, 10, ..., 100; `"5,25,100"` -> 5, 25, 100 (percent).
pub fn parse_fractions(text: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| Error::Config(format!("bad fraction grid '{text}': {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || start > stop {
            return Err(bad("need start <= stop and a positive step"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() || !values.iter().all(|p| *p > 0.0 && *p <= 100.0) {
        return Err(bad("percentages must lie in (0, 100]"));
    }
    Ok(values)
}

pub fn parse_structure(text: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = text
        .split('-')
        .map(|p| p.trim().parse().map_err(|_| Error::Config(format!("bad structure '{text}'"))))
        .collect::<Result<_>>()?;
    crate::baselines::hidden_sizes(&sizes).map_err(|e| Error::Config(e.to_string()))?;
    Ok(sizes)
}

fn parse_models(text: &str) -> Result<Vec<ModelKind>> {
    text.split(',').map(|m| m.trim().parse()).collect()
}

fn parse_mode(text: &str) -> Result<RbmMode> {
    match text {
        "binary" => Ok(RbmMode::Binary),
        "continuous" => Ok(RbmMode::Continuous),
        _ => Err(Error::Config(format!("unknown RBM mode '{text}'"))),
    }
}

fn mode_name(mode: RbmMode) -> &'static str {
    match mode {
        RbmMode::Binary => "binary",
        RbmMode::Continuous => "continuous",
    }
}

pub fn parse_bandwidth(text: &str) -> Result<BandwidthRule> {
    match text {
        "silverman" => Ok(BandwidthRule::Silverman),
        "loocv" => Ok(BandwidthRule::Loocv),
        _ => match text.strip_prefix("fixed:").map(str::parse::<f64>) {
            Some(Ok(h)) if h > 0.0 && h.is_finite() => Ok(BandwidthRule::Fixed(h)),
            _ => Err(Error::Config(format!("unknown bandwidth rule '{text}'"))),
        },
    }
}

fn bandwidth_name(rule: BandwidthRule) -> String {
    match rule {
        BandwidthRule::Silverman => "silverman".into(),
        BandwidthRule::Loocv => "loocv".into(),
        BandwidthRule::Fixed(h) => format!("fixed:{h}"),
    }
}

fn join<T: ToString>(values: &[T], sep: &str) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    /// Preset defaults overridden by explicit flags.
    pub fn resolve(command: &str, args: &RunArgs) -> Result<Self> {
        let preset = args.preset.unwrap_or(Preset::Case1);
        let d = preset.defaults();
        let data = match &args.data {
            Some(path) => DataSource::Csv(path.clone()),
            None => DataSource::Synth {
                preset,
                seed: args.data_seed.unwrap_or(1),
            },
        };
        let models = match (command, &args.model, &args.models) {
            ("train", Some(m), _) => vec![m.parse()?],
            ("train", None, _) => vec![ModelKind::RegDbn],
            (_, _, Some(list)) => parse_models(list)?,
            _ => ModelKind::ALL.to_vec(),
        };
        let config = RunConfig {
            command: command.to_owned(),
            preset,
            data,
            target: args.target.clone().unwrap_or_else(|| "crashes".into()),
            year_column: args.year_column.clone().unwrap_or_else(|| YEAR_COLUMN.into()),
            train_years: args.train_years.as_deref().map(parse_years).transpose()?.unwrap_or(d.train_years),
            test_years: args.test_years.as_deref().map(parse_years).transpose()?.unwrap_or(d.test_years),
            models,
            structure: args.structure.as_deref().map(parse_structure).transpose()?.unwrap_or(d.structure),
            pretrain_epochs: args.pretrain_epochs.unwrap_or(d.pretrain_epochs),
            finetune_epochs: args.finetune_epochs.unwrap_or(d.finetune_epochs),
            unsupervised_lr: args.unsupervised_lr.unwrap_or(d.unsupervised_lr),
            supervised_lr: args.supervised_lr.unwrap_or(DEFAULT_SUPERVISED_LR),
            batch_size: args.batch_size.unwrap_or(crate::dbn::DEFAULT_BATCH_SIZE),
            alpha: args.alpha.unwrap_or(1.0),
            beta: args.beta.unwrap_or(0.01),
            reestimate: args.reestimate,
            reestimate_interval: args.reestimate_interval.unwrap_or(50),
            rbm_mode: args.rbm_mode.as_deref().map(parse_mode).transpose()?.unwrap_or(RbmMode::Continuous),
            bandwidth: args
                .bandwidth
                .as_deref()
                .map(parse_bandwidth)
                .transpose()?
                .unwrap_or(BandwidthRule::Silverman),
            fractions_pct: args.fractions.as_deref().map(parse_fractions).transpose()?.unwrap_or(d.fractions_pct),
            reps: args.reps.unwrap_or(10),
            seed: args.seed.unwrap_or(1),
            workers: args.workers.unwrap_or(1),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("no models selected".into()));
        }
        self.finetune_config().validate()?;
        Ok(())
    }

    fn finetune_config(&self) -> FineTuneConfig {
        FineTuneConfig {
            alpha: self.alpha,
            beta: self.beta,
            learning_rate: self.supervised_lr,
            epochs: self.finetune_epochs,
            reestimate: self.reestimate,
            reestimate_interval: self.reestimate_interval,
            seed: self.seed,
            parallelism: Parallelism::default(),
        }
    }

    pub fn model_settings(&self) -> ModelSettings {
        ModelSettings {
            structure: self.structure.clone(),
            activation: ActivationParams::default(),
            mode: self.rbm_mode,
            pretrain_epochs: self.pretrain_epochs,
            pretrain_learning_rate: self.unsupervised_lr,
            batch_size: self.batch_size,
            finetune: self.finetune_config(),
            bandwidth: self.bandwidth,
        }
    }

    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let data = match &self.data {
            DataSource::Csv(p) => format!("csv:{}", p.display()),
            DataSource::Synth { preset, seed } => format!("synth:{}:{seed}", preset.name()),
        };
        let models: Vec<&str> = self.models.iter().map(|m| m.name()).collect();
        let entries: [(&str, String); 24] = [
            ("command", self.command.clone()),
            ("preset", self.preset.name().into()),
            ("data", data),
            ("target", self.target.clone()),
            ("year_column", self.year_column.clone()),
            ("train_years", join(&self.train_years, ",")),
            ("test_years", join(&self.test_years, ",")),
            ("models", models.join(",")),
            ("structure", join(&self.structure, "-")),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("finetune_epochs", self.finetune_epochs.to_string()),
            ("unsupervised_lr", self.unsupervised_lr.to_string()),
            ("supervised_lr", self.supervised_lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta", self.beta.to_string()),
            ("reestimate", self.reestimate.to_string()),
            ("reestimate_interval", self.reestimate_interval.to_string()),
            ("rbm_mode", mode_name(self.rbm_mode).into()),
            ("bandwidth", bandwidth_name(self.bandwidth)),
            ("fractions", join(&self.fractions_pct, ",")),
            ("reps", self.reps.to_string()),
            ("seed", self.seed.to_string()),
            ("workers", self.workers.to_string()),
        ];
        for (k, v) in entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("manifest line {}: expected 'key = value'", n + 1)))?;
            map.insert(k.trim().to_owned(), v.trim().to_owned());
        }
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| Error::Config(format!("manifest is missing '{k}'")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("manifest value for '{k}' is invalid: '{v}'")))
        }
        let data_text = get("data")?;
        let data = if let Some(path) = data_text.strip_prefix("csv:") {
            DataSource::Csv(PathBuf::from(path))
        } else {
            let mut parts = data_text.splitn(3, ':');
            match (parts.next(), parts.next(), parts.next()) {
                (Some("synth"), Some(p), Some(seed)) => DataSource::Synth {
                    preset: Preset::parse(p)?,
                    seed: num("data", seed.to_owned())?,
                },
                _ => return Err(Error::Config(format!("bad data source '{data_text}'"))),
            }
        };
        let config = RunConfig {
            command: get("command")?,
            preset: Preset::parse(&get("preset")?)?,
            data,
            target: get("target")?,
            year_column: get("year_column")?,
            train_years: parse_years(&get("train_years")?)?,
            test_years: parse_years(&get("test_years")?)?,
            models: parse_models(&get("models")?)?,
            structure: parse_structure(&get("structure")?)?,
            pretrain_epochs: num("pretrain_epochs", get("pretrain_epochs")?)?,
            finetune_epochs: num("finetune_epochs", get("finetune_epochs")?)?,
            unsupervised_lr: num("unsupervised_lr", get("unsupervised_lr")?)?,
            supervised_lr: num("supervised_lr", get("supervised_lr")?)?,
            batch_size: num("batch_size", get("batch_size")?)?,
            alpha: num("alpha", get("alpha")?)?,
            beta: num("beta", get("beta")?)?,
            reestimate: num("reestimate", get("reestimate")?)?,
            reestimate_interval: num("reestimate_interval", get("reestimate_interval")?)?,
            rbm_mode: parse_mode(&get("rbm_mode")?)?,
            bandwidth: parse_bandwidth(&get("bandwidth")?)?,
            fractions_pct: parse_fractions(&get("fractions")?)?,
            reps: num("reps", get("reps")?)?,
            seed: num("seed", get("seed")?)?,
            workers: num("workers", get("workers")?)?,
        };
        if !matches!(config.command.as_str(), "train" | "benchmark") {
            return Err(Error::Config(format!("manifest command '{}' cannot be replayed", config.command)));
        }
        config.validate()?;
        Ok(config)
    }

    fn load_data(&self) -> Result<Dataset> {
        match &self.data {
            DataSource::Csv(path) => load_csv(path, &self.target, Some(&self.year_column)),
            DataSource::Synth { preset, seed } => synthesize(&preset.synth_spec(*seed)),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = args.preset.synth_spec(args.seed);
    if let Some(rows) = args.rows {
        spec.n_rows = rows;
        if let crate::data::YearLayout::Blocks(_) = spec.years {
            spec.years = crate::data::YearLayout::RoundRobin { first: 2000, count: 6 };
        }
    }
    let ds = synthesize(&spec)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        prepare_out(parent)?;
    }
    write_csv(&ds, &args.out)?;
    let mut sidecar = args.out.clone().into_os_string();
    sidecar.push(".truth.txt");
    write_file(Path::new(&sidecar), &spec.describe())
}

/// Train one model; writes `model.txt`, `history.csv`, `pretrain.csv`
/// (regdbn only) and `manifest.txt` under `out`.
pub fn cmd_train(config: &RunConfig, out: &Path) -> Result<()> {
    let kind = config.models[0];
    let ds = config.load_data()?;
    let train = match ds.years() {
        Some(_) => split_by_year(&ds, &config.train_years, &config.test_years)?.0,
        None => ds,
    };
    prepare_out(out)?;
    let fit = par::with_workers(config.workers, || fit_model(kind, &config.model_settings(), &train, config.seed))?;
    write_file(&out.join("model.txt"), &encode_model(&fit.model))?;
    let mut history = Vec::new();
    write_history_csv(&fit.finetune_history, &mut history)?;
    write_file(&out.join("history.csv"), &String::from_utf8_lossy(&history))?;
    if !fit.pretrain_history.is_empty() {
        let mut text = String::from("layer,epoch,reconstruction_error\n");
        for (k, h) in fit.pretrain_history.iter().enumerate() {
            let _ = writeln!(text, "{},0,{}", k + 1, h.initial);
            for (e, v) in h.per_epoch.iter().enumerate() {
                let _ = writeln!(text, "{},{},{}", k + 1, e + 1, v);
            }
        }
        write_file(&out.join("pretrain.csv"), &text)?;
    }
    write_file(&out.join("manifest.txt"), &config.to_manifest())
}

/// Run the benchmark; writes `report.csv`, `detail.csv` and `manifest.txt`.
pub fn cmd_benchmark(config: &RunConfig, out: &Path) -> Result<()> {
    let ds = config.load_data()?;
    let (train, test) = split_by_year(&ds, &config.train_years, &config.test_years)?;
    prepare_out(out)?;
    let settings = config.model_settings();
    let candidates: Vec<Candidate> = config
        .models
        .iter()
        .map(|&kind| Candidate {
            kind,
            settings: settings.clone(),
        })
        .collect();
    let builders: Vec<&dyn ModelBuilder> = candidates.iter().map(|c| c as &dyn ModelBuilder).collect();
    let boot = BootstrapConfig {
        fractions: config.fractions_pct.iter().map(|p| p / 100.0).collect(),
        reps: config.reps,
        seed: config.seed,
        parallelism: Parallelism::default(),
    };
    let report = par::with_workers(config.workers, || bootstrap_experiment(&builders, &train, &test, &boot))?;
    write_file(&out.join("report.csv"), &report_to_csv(&report))?;
    write_file(&out.join("detail.csv"), &detail_to_csv(&report))?;
    write_file(&out.join("manifest.txt"), &config.to_manifest())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Train(args) => cmd_train(&RunConfig::resolve("train", &args)?, &args.out),
        Command::Benchmark(args) => cmd_benchmark(&RunConfig::resolve("benchmark", &args)?, &args.out),
        Command::Replay(args) => {
            let text = fs::read_to_string(&args.manifest)?;
            let config = RunConfig::from_manifest(&text)?;
            match config.command.as_str() {
                "train" => cmd_train(&config, &args.out),
                _ => cmd_benchmark(&config, &args.out),
            }
        }
    }
}

/// Process exit code for an error category.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::InvalidInput(_) | Error::Dimension { .. } | Error::Schema(_) | Error::Parse { .. } | Error::Format(_) => 3,
        Error::Divergence { .. } | Error::NoConvergence { .. } | Error::Experiment(_) => 4,
        Error::Io(_) | Error::Csv(_) => 5,
    }
}

/// Parse `args`, run, and return the exit code, printing failures as
/// `error[<category>]: <message>`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.category(), e.to_string().replace('\n', " "));
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(out: &str) -> RunArgs {
        RunArgs {
            out: PathBuf::from(out),
            ..RunArgs::default()
        }
    }

    #[test]
    fn preset_table() {
        let c1 = Preset::Case1.defaults();
        assert_eq!(c1.structure, vec![6, 10, 10, 1]);
        assert_eq!(c1.unsupervised_lr, 1.0);
        assert_eq!((c1.pretrain_epochs, c1.finetune_epochs), (20, 1000));
        assert_eq!(c1.train_years, (2000..=2006).collect::<Vec<_>>());
        assert_eq!(c1.test_years, vec![2007, 2008]);
        assert_eq!(c1.fractions_pct.len(), 20);

        let c2 = Preset::Case2.defaults();
        assert_eq!(c2.structure, vec![16, 30, 30, 1]);
        assert_eq!(c2.unsupervised_lr, 2.0);
        assert_eq!((c2.pretrain_epochs, c2.finetune_epochs), (50, 500));
    }

    #[test]
    fn preset_expansion_and_overrides() {
        let mut a = args("o");
        a.preset = Some(Preset::Case2);
        let c = RunConfig::resolve("train", &a).unwrap();
        assert_eq!(c.structure, vec![16, 30, 30, 1]);
        assert_eq!(c.models, vec![ModelKind::RegDbn]);

        a.model = Some("bayesnn".into());
        a.finetune_epochs = Some(7);
        let c = RunConfig::resolve("train", &a).unwrap();
        assert_eq!(c.models, vec![ModelKind::BayesNn]);
        assert_eq!(c.structure, vec![16, 30, 30, 1]);
        assert_eq!(c.finetune_epochs, 7);
    }

    #[test]
    fn grammars() {
        let f = parse_fractions("5:100:5").unwrap();
        assert_eq!(f.len(), 20);
        assert_eq!((f[0], f[19]), (5.0, 100.0));
        assert_eq!(parse_fractions("100").unwrap(), vec![100.0]);
        assert_eq!(parse_fractions("5,25,50,100").unwrap().len(), 4);
        assert!(parse_fractions("0:100:5").is_err());
        assert!(parse_fractions("5:120:5").is_err());
        assert!(parse_fractions("5:100").is_err());
        assert_eq!(parse_years("2000:2002").unwrap(), vec![2000, 2001, 2002]);
        assert_eq!(parse_years("2007,2008").unwrap(), vec![2007, 2008]);
        assert_eq!(parse_structure("6-10-10-1").unwrap(), vec![6, 10, 10, 1]);
        assert!(parse_structure("6-10-2").is_err());
        assert_eq!(parse_bandwidth("fixed:0.5").unwrap(), BandwidthRule::Fixed(0.5));
        assert!(parse_bandwidth("fixed:-1").is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut a = args("o");
        a.models = Some("nb,kr".into());
        a.fractions = Some("5,50,100".into());
        a.bandwidth = Some("fixed:0.25".into());
        a.reestimate = true;
        let c = RunConfig::resolve("benchmark", &a).unwrap();
        let text = c.to_manifest();
        let back = RunConfig::from_manifest(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_manifest(), text);
        assert!(RunConfig::from_manifest("command = benchmark\n").is_err());
    }

    #[test]
    fn error_lines_and_codes() {
        assert_eq!(main_with_args(["regdbn", "frobnicate"]), 2);
        assert_eq!(main_with_args(["regdbn", "benchmark", "--out", "/tmp/x", "--reps", "0"]), 2);
        assert_eq!(exit_code(&Error::Schema("x".into())), 3);
        assert_eq!(exit_code(&Error::Experiment("x".into())), 4);
    }
}
