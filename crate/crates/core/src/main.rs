use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use emphatic_rl::environments::FeatureVariant;
use emphatic_rl::harness::{parse_sweep, run_experiment, Experiment, ExperimentConfig, ExperimentOutput};

/// Run one experiment on Baird's counterexample and write its curves as CSV.
///
/// Flags that are left out take the experiment's defaults.
#[derive(Debug, Parser)]
#[command(name = "emphatic-rl", version)]
struct Cli {
    /// emphasis, policy-eval, control or oracle-verify
    experiment: Experiment,
    /// Comma-separated feature sets, or `all`.
    #[arg(long)]
    features: Option<String>,
    /// Comma-separated values of π(solid|·) for the target.
    #[arg(long = "pi-solid")]
    pi_solid: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Oracle evaluation period of the control experiment.
    #[arg(long = "eval-every")]
    eval_every: Option<u64>,
    /// Geometric learning-rate sweep `lo:hi:factor`.
    #[arg(long)]
    sweep: Option<String>,
    /// Only print summaries; skip per-step series.
    #[arg(long = "summary-only")]
    summary_only: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, String> {
    raw.split(',').map(|s| s.trim().parse::<T>().map_err(|_| format!("bad {what} '{s}'"))).collect()
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut c = ExperimentConfig::defaults(cli.experiment);
    if let Some(f) = &cli.features {
        c.features = if f == "all" { FeatureVariant::ALL.to_vec() } else { parse_list(f, "feature set")? };
    }
    if let Some(p) = &cli.pi_solid {
        c.pi_solid = parse_list(p, "pi-solid")?;
    }
    if let Some(s) = &cli.sweep {
        c.sweep = Some(parse_sweep(s).map_err(|e| e.to_string())?);
    }
    c.gamma = cli.gamma.unwrap_or(c.gamma);
    c.eta = cli.eta.unwrap_or(c.eta);
    c.alpha = cli.alpha.unwrap_or(c.alpha);
    c.alpha2 = cli.alpha2.or(c.alpha2);
    c.beta = cli.beta.or(c.beta);
    c.c0 = cli.c0.unwrap_or(c.c0);
    c.steps = cli.steps.unwrap_or(c.steps);
    c.runs = cli.runs.unwrap_or(c.runs);
    c.master_seed = cli.seed.unwrap_or(c.master_seed);
    c.eval_every = cli.eval_every.unwrap_or(c.eval_every);
    c.keep_curves = !cli.summary_only;
    // a single rate given explicitly replaces the default sweep
    if cli.sweep.is_none() {
        let explicit = match cli.experiment {
            Experiment::Emphasis => cli.alpha,
            Experiment::PolicyEval => cli.alpha2,
            _ => None,
        };
        if let Some(rate) = explicit {
            c.sweep = Some(vec![rate]);
        }
    }
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

fn write_outputs(output: &ExperimentOutput, out: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(out)?);
    output.write_csv(&mut w)?;
    w.flush()?;
    if !output.json_lines.is_empty() {
        std::fs::write(out.with_extension("jsonl"), &output.json_lines)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own exit code for usage errors is 2, which means a failed verification here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let output = match run_experiment(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for line in &output.summary {
        println!("{line}");
    }
    if let Some(out) = &cli.out {
        if let Err(e) = write_outputs(&output, out) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return ExitCode::from(1);
        }
    }
    if !output.verification_passed() {
        return ExitCode::from(2);
    }
    if output.all_runs_diverged() {
        eprintln!("every run diverged");
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
