//! Command-line front end: `impute`, `evaluate`, `simulate`, `diagnose`.
//!
//! Every command writes its outputs into the `--output` directory. JSON
//! payloads carry no timestamps or runtimes, so identical inputs and seeds
//! reproduce them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::RngCore;
use serde::Serialize;

use crate::diagnostics::{
    exhaustive_donor_selection, full_donor_selection, greedy_donor_selection, spectrum_report,
    DonorSelection, SelectionStrategy, DEFAULT_MAX_ACTIONS,
};
use crate::error::{Error, Result};
use crate::estimators::{
    tandem_impute, Baseline, EstimatorConfig, EstimatorName, ImputationReport, ImputeSettings,
    TandemRound, TwoWayConfig,
};
use crate::evaluation::loo_evaluate;
use crate::io::{ingest, write_long_csv, write_long_csv_rows, Format};
use crate::scm_sim::{
    random_identifiable_instance, seeded_rng, signal_rms, violating_instance, InstanceSizes,
    NoiseKind, NoiseModel, SimInstance, Violation,
};
use crate::tensor_store::{ObservationTensor, PairKey};

fn fraction(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is not in [0, 1]"))
    }
}

fn positive_fraction(s: &str) -> std::result::Result<f64, String> {
    let v = fraction(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be in (0, 1]".into())
    }
}

fn estimator_name(s: &str) -> std::result::Result<EstimatorName, String> {
    s.parse::<EstimatorName>().map_err(|_| {
        let names: Vec<&str> = EstimatorName::ALL.iter().map(|n| n.as_str()).collect();
        format!("unknown estimator `{s}`; expected one of {}", names.join(", "))
    })
}

fn pair_arg(s: &str) -> std::result::Result<PairKey, String> {
    let (c, a) = s.split_once(':').ok_or_else(|| format!("`{s}` is not CONTEXT:ACTION"))?;
    Ok(PairKey::new(c, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Full,
    Greedy,
    Exhaustive,
}

impl From<StrategyArg> for SelectionStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Full => SelectionStrategy::Full,
            StrategyArg::Greedy => SelectionStrategy::Greedy,
            StrategyArg::Exhaustive => SelectionStrategy::Exhaustive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    LongCsv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::LongCsv => Format::LongCsv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the input file extension (`.json` or long CSV).
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
}

impl InputArgs {
    fn load(&self) -> Result<ObservationTensor> {
        let format = self.format.map(Format::from).unwrap_or_else(|| Format::from_path(&self.input));
        ingest(&self.input, format)
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long, default_value = "si_a", value_parser = estimator_name)]
    pub estimator: EstimatorName,
    #[arg(long, default_value_t = 0.1, value_parser = fraction)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.95, value_parser = positive_fraction)]
    pub energy: f64,
    /// HSVT energy for denoising the regression designs.
    #[arg(long, value_parser = positive_fraction)]
    pub denoise: Option<f64>,
    #[arg(long = "lambda-c", default_value_t = 0.5, value_parser = fraction)]
    pub lambda_c: f64,
    #[arg(long = "reference-action")]
    pub reference_action: Option<String>,
    #[arg(long = "donor-strategy", value_enum, default_value = "full")]
    pub donor_strategy: StrategyArg,
    /// Seed for any randomized step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl EstimatorArgs {
    pub fn settings(&self) -> ImputeSettings {
        ImputeSettings {
            estimator: self.estimator,
            config: EstimatorConfig {
                denoise: self.denoise,
                rho: self.rho,
                energy: self.energy,
                fallback: Baseline::MeanOverActions,
                donor_strategy: self.donor_strategy.into(),
                ..EstimatorConfig::default()
            },
            two_way: TwoWayConfig { lambda_c: self.lambda_c },
            reference_action: self.reference_action.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViolationArg {
    None,
    Assumption2,
    Assumption3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKindArg {
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "si-impute", about = "Synthetic-interventions imputation for sparse context x action outcome tensors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Impute missing (or chosen) pairs; writes reports.json and predictions.csv.
    Impute {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
        /// CONTEXT:ACTION; defaults to every missing pair.
        #[arg(long = "target", value_parser = pair_arg)]
        targets: Vec<PairKey>,
        /// Run alternating SI-A / SI-C rounds instead of a single estimator.
        #[arg(long = "tandem-rounds")]
        tandem_rounds: Option<usize>,
        #[arg(long = "tandem-tol", default_value_t = 1e-8)]
        tandem_tol: f64,
    },
    /// Leave-one-out evaluation; writes loo_results.json, summary.csv, timings.csv.
    Evaluate {
        #[command(flatten)]
        io: InputArgs,
        #[command(flatten)]
        est: EstimatorArgs,
    },
    /// Generate a synthetic instance; writes ground_truth.json and observed.csv.
    Simulate {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        contexts: usize,
        #[arg(long, default_value_t = 8)]
        actions: usize,
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value_t = 2)]
        r: usize,
        #[arg(long, default_value_t = 0.7, value_parser = positive_fraction)]
        density: f64,
        #[arg(long, value_enum, default_value = "none")]
        violation: ViolationArg,
        /// Noise scale as a multiple of the signal RMS.
        #[arg(long = "noise-sigma", default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long = "noise-kind", value_enum, default_value = "additive")]
        noise_kind: NoiseKindArg,
    },
    /// Spectrum and per-pair subspace tests; writes spectrum.json and tests.json.
    Diagnose {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, default_value_t = 0.1, value_parser = fraction)]
        rho: f64,
        #[arg(long, default_value_t = 0.95, value_parser = positive_fraction)]
        energy: f64,
        #[arg(long = "donor-strategy", value_enum, default_value = "full")]
        donor_strategy: StrategyArg,
        #[arg(long = "target", value_parser = pair_arg)]
        targets: Vec<PairKey>,
        /// Test every observed pair as if held out, instead of missing pairs.
        #[arg(long)]
        loo: bool,
    },
}

/// Machine-readable failure written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
}

pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": ErrorObject { kind: kind.into(), message: message.into() } }).to_string()
}

/// What a command wrote.
#[derive(Debug, Clone, Serialize)]
pub struct CommandSummary {
    pub command: &'static str,
    pub files: Vec<PathBuf>,
    pub pairs: usize,
    pub skipped: usize,
}

fn write_file(dir: &Path, name: &str, contents: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

#[derive(Debug, Serialize)]
struct PairOutcome {
    target: PairKey,
    report: Option<ImputationReport>,
    skip_reason: Option<String>,
}

#[derive(Debug, Serialize)]
struct TandemPayload<'a> {
    rounds: &'a [TandemRound],
    converged: bool,
    synthetic: Vec<&'a PairKey>,
    unimputable: &'a [PairKey],
}

pub fn run(cli: &Cli) -> Result<CommandSummary> {
    match &cli.command {
        Command::Impute { io, est, targets, tandem_rounds, tandem_tol } => {
            run_impute(io, est, targets, *tandem_rounds, *tandem_tol)
        }
        Command::Evaluate { io, est } => run_evaluate(io, est),
        Command::Simulate { output, seed, contexts, actions, p, r, density, violation, noise_sigma, noise_kind } => {
            run_simulate(
                output,
                *seed,
                InstanceSizes { num_contexts: *contexts, num_actions: *actions, p: *p, r: *r },
                *density,
                *violation,
                *noise_sigma,
                *noise_kind,
            )
        }
        Command::Diagnose { io, rho, energy, donor_strategy, targets, loo } => {
            run_diagnose(io, *rho, *energy, *donor_strategy, targets, *loo)
        }
    }
}

fn run_impute(
    io: &InputArgs,
    est: &EstimatorArgs,
    targets: &[PairKey],
    tandem_rounds: Option<usize>,
    tandem_tol: f64,
) -> Result<CommandSummary> {
    let tensor = io.load()?;
    let settings = est.settings();
    settings.config.validate()?;
    fs::create_dir_all(&io.output)?;
    let mut files = Vec::new();

    if let Some(rounds) = tandem_rounds {
        let result = tandem_impute(&tensor, rounds, tandem_tol, &settings.config)?;
        let payload = TandemPayload {
            rounds: &result.rounds,
            converged: result.converged,
            synthetic: result.synthetic.iter().collect(),
            unimputable: &result.unimputable,
        };
        write_file(&io.output, "tandem.json", &to_json(&payload), &mut files)?;
        let mut csv = Vec::new();
        let rows = result
            .synthetic
            .iter()
            .map(|k| (k, result.tensor.get(&k.context, &k.action).expect("imputed")));
        write_long_csv_rows(tensor.p(), rows, &mut csv)?;
        write_file(&io.output, "predictions.csv", &csv, &mut files)?;
        return Ok(CommandSummary {
            command: "impute",
            files,
            pairs: result.synthetic.len(),
            skipped: result.unimputable.len(),
        });
    }

    let targets: Vec<PairKey> = if targets.is_empty() { tensor.missing_pairs() } else { targets.to_vec() };
    let outcomes: Vec<PairOutcome> = targets
        .iter()
        .map(|t| match settings.impute(&tensor, &t.context, &t.action) {
            Ok(report) => PairOutcome { target: t.clone(), report: Some(report), skip_reason: None },
            Err(e) => PairOutcome { target: t.clone(), report: None, skip_reason: Some(e.to_string()) },
        })
        .collect();
    write_file(&io.output, "reports.json", &to_json(&outcomes), &mut files)?;
    let mut csv = Vec::new();
    let rows = outcomes
        .iter()
        .filter_map(|o| o.report.as_ref().map(|r| (&o.target, r.prediction.as_slice())));
    write_long_csv_rows(tensor.p(), rows, &mut csv)?;
    write_file(&io.output, "predictions.csv", &csv, &mut files)?;
    let skipped = outcomes.iter().filter(|o| o.report.is_none()).count();
    Ok(CommandSummary { command: "impute", files, pairs: outcomes.len(), skipped })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn run_evaluate(io: &InputArgs, est: &EstimatorArgs) -> Result<CommandSummary> {
    let tensor = io.load()?;
    let settings = est.settings();
    settings.config.validate()?;
    let result = loo_evaluate(&tensor, &settings)?;
    fs::create_dir_all(&io.output)?;
    let mut files = Vec::new();
    write_file(&io.output, "loo_results.json", &to_json(&result), &mut files)?;

    let mut summary = String::from("estimator,evaluated,skipped,median_r2,mean_r2,median_rmse,mean_rmse\n");
    for row in &result.summary {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.estimator,
            row.evaluated,
            row.skipped,
            fmt_opt(row.median_r2),
            fmt_opt(row.mean_r2),
            fmt_opt(row.median_rmse),
            fmt_opt(row.mean_rmse)
        ));
    }
    write_file(&io.output, "summary.csv", summary.as_bytes(), &mut files)?;

    let mut timings = String::from("context,action,runtime_seconds\n");
    for r in &result.per_pair {
        timings.push_str(&format!("{},{},{}\n", r.context, r.action, r.runtime_seconds));
    }
    write_file(&io.output, "timings.csv", timings.as_bytes(), &mut files)?;
    let skipped = result.overall().skipped;
    Ok(CommandSummary { command: "evaluate", files, pairs: result.per_pair.len(), skipped })
}

/// Ground-truth fixture written by `simulate`.
#[derive(Debug, Serialize)]
pub struct GroundTruth<'a> {
    pub seed: u64,
    pub instance: &'a SimInstance,
    pub noise: Option<NoiseModel>,
    /// Noiseless outcomes for every context x action pair.
    pub truth: crate::io::JsonTensor,
}

fn run_simulate(
    output: &Path,
    seed: u64,
    sizes: InstanceSizes,
    density: f64,
    violation: ViolationArg,
    noise_sigma: f64,
    noise_kind: NoiseKindArg,
) -> Result<CommandSummary> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    // Instance and noise draw from separate streams of the one seed.
    let instance_seed = seeded_rng(seed, 0).next_u64();
    let noise_seed = seeded_rng(seed, 1).next_u64();
    let instance = match violation {
        ViolationArg::None => random_identifiable_instance(sizes, density, instance_seed)?,
        ViolationArg::Assumption2 => violating_instance(Violation::Assumption2, sizes, instance_seed)?,
        ViolationArg::Assumption3 => violating_instance(Violation::Assumption3, sizes, instance_seed)?,
    };
    let clean = instance.generate(None)?;
    let noise = (noise_sigma > 0.0).then(|| NoiseModel {
        kind: match noise_kind {
            NoiseKindArg::Additive => NoiseKind::Additive,
            NoiseKindArg::Multiplicative => NoiseKind::Multiplicative,
        },
        sigma: noise_sigma * signal_rms(&clean.observed),
        seed: noise_seed,
    });
    let generated = instance.generate(noise.as_ref())?;

    fs::create_dir_all(output)?;
    let mut files = Vec::new();
    let truth = GroundTruth { seed, instance: &instance, noise, truth: (&generated.truth).into() };
    write_file(output, "ground_truth.json", &to_json(&truth), &mut files)?;
    let mut csv = Vec::new();
    write_long_csv(&generated.observed, &mut csv)?;
    write_file(output, "observed.csv", &csv, &mut files)?;
    Ok(CommandSummary { command: "simulate", files, pairs: generated.observed.len(), skipped: 0 })
}

#[derive(Debug, Serialize)]
struct DiagnoseOutcome {
    target: PairKey,
    selection: Option<DonorSelection>,
    skip_reason: Option<String>,
}

fn run_diagnose(
    io: &InputArgs,
    rho: f64,
    energy: f64,
    strategy: StrategyArg,
    targets: &[PairKey],
    loo: bool,
) -> Result<CommandSummary> {
    let tensor = io.load()?;
    let spectrum = spectrum_report(&tensor)?;
    let targets: Vec<PairKey> = if !targets.is_empty() {
        targets.to_vec()
    } else if loo {
        tensor.observed_pairs().into_iter().collect()
    } else {
        tensor.missing_pairs()
    };
    let outcomes: Vec<DiagnoseOutcome> = targets
        .iter()
        .map(|t| {
            let sel = match strategy {
                StrategyArg::Full => full_donor_selection(&tensor, &t.context, &t.action, rho, energy),
                StrategyArg::Greedy => greedy_donor_selection(&tensor, &t.context, &t.action, rho, energy),
                StrategyArg::Exhaustive => exhaustive_donor_selection(
                    &tensor,
                    &t.context,
                    &t.action,
                    rho,
                    energy,
                    DEFAULT_MAX_ACTIONS,
                ),
            };
            match sel {
                Ok(s) => DiagnoseOutcome { target: t.clone(), selection: Some(s), skip_reason: None },
                Err(e) => DiagnoseOutcome { target: t.clone(), selection: None, skip_reason: Some(e.to_string()) },
            }
        })
        .collect();
    fs::create_dir_all(&io.output)?;
    let mut files = Vec::new();
    write_file(&io.output, "spectrum.json", &to_json(&spectrum), &mut files)?;
    write_file(&io.output, "tests.json", &to_json(&outcomes), &mut files)?;
    let skipped = outcomes.iter().filter(|o| o.selection.is_none()).count();
    Ok(CommandSummary { command: "diagnose", files, pairs: outcomes.len(), skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        let cli = Cli::try_parse_from([
            "si-impute", "evaluate", "--input", "x.csv", "--output", "out", "--estimator", "two_way",
            "--lambda-c", "0.25", "--denoise", "0.9",
        ])
        .unwrap();
        let Command::Evaluate { est, .. } = cli.command else { panic!("wrong command") };
        let s = est.settings();
        assert_eq!(s.estimator, EstimatorName::TwoWay);
        assert_eq!(s.two_way.lambda_c, 0.25);
        assert_eq!(s.config.denoise, Some(0.9));
        assert_eq!(s.config.rho, 0.1);
        assert_eq!(s.config.energy, 0.95);
    }

    #[test]
    fn rejects_bad_values() {
        for args in [
            vec!["si-impute", "evaluate", "--input", "x", "--output", "o", "--estimator", "unknown"],
            vec!["si-impute", "evaluate", "--input", "x", "--output", "o", "--rho", "1.5"],
            vec!["si-impute", "impute", "--input", "x", "--output", "o", "--target", "nocolon"],
        ] {
            assert!(Cli::try_parse_from(args).is_err());
        }
    }
}
