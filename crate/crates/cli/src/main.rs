use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;
mod output;
mod params;

use output::Report;
use params::*;

/// Bad invocation: unknown keys, malformed config, missing parameters.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "risklab", version, about = "Risk-entropy curves, Gibbs learning curves and weight-space sampling")]
struct Cli {
    #[command(subcommand)]
    group: Group,
}

#[derive(Subcommand)]
enum Group {
    /// Closed forms and quadratures
    #[command(subcommand)]
    Analytic(Analytic),
    /// Monte Carlo checks of closed forms
    #[command(subcommand)]
    Simulate(Simulate),
    /// Dataset generation and ingestion
    #[command(subcommand)]
    Data(Data),
    /// Markov-chain sampling over weight space
    #[command(subcommand)]
    Sample(Sample),
    /// Entropy reconstruction from Boltzmann curves
    #[command(subcommand)]
    Reconstruct(Reconstruct),
    /// Summary fits
    #[command(subcommand)]
    Fit(Fit),
}

#[derive(Subcommand)]
enum Analytic {
    /// Risk entropy s(r) of the perceptron
    PerceptronEntropy(PerceptronEntropyArgs),
    /// Exact Boltzmann risk over a β grid
    BoltzmannRisk(BoltzmannRiskArgs),
    /// Expected Hebbian risk and its asymptote
    Hebbian(HebbianArgs),
    /// Replica-symmetric Gibbs risk of the realisable perceptron
    Gardner(GardnerArgs),
    /// Annealed Gibbs risk by saddle point and by full integral
    GibbsAnnealed(GibbsAnnealedArgs),
}

#[derive(Subcommand)]
enum Simulate {
    /// Hebbian learning curve averaged over independent runs
    Hebbian(SimulateHebbianArgs),
}

#[derive(Subcommand)]
enum Data {
    /// Draw from the two-Gaussian distribution
    GenGaussian(GenGaussianArgs),
    /// Load IDX image and label files
    LoadIdx(LoadIdxArgs),
    /// Replace labels by a random teacher MLP's predictions
    Relabel(RelabelArgs),
}

#[derive(Subcommand)]
enum Sample {
    /// Metropolis chains targeting exp(−βR) over a β grid
    BoltzmannSweep(BoltzmannSweepArgs),
    /// Metropolis chains targeting (1 − R)^m over an m grid
    Annealed(AnnealedArgs),
}

#[derive(Subcommand)]
enum Reconstruct {
    /// Trapezium-rule entropy from a Boltzmann curve
    Entropy(ReconstructArgs),
}

#[derive(Subcommand)]
enum Fit {
    /// Least-squares quadratic through an entropy curve
    Quadratic(FitQuadraticArgs),
}

fn execute<P: Serialize>(name: &str, out: Option<&Path>, prm: P, run: impl FnOnce(&P) -> anyhow::Result<Report>) -> anyhow::Result<()> {
    let started = Instant::now();
    let report = run(&prm)?;
    let seconds = started.elapsed().as_secs_f64();
    output::emit(name, &serde_json::to_value(&prm)?, &report, out, seconds)?;
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.group {
        Group::Analytic(a) => match a {
            Analytic::PerceptronEntropy(x) => execute("analytic perceptron-entropy", x.out.as_deref(), x.resolve()?, commands::perceptron_entropy),
            Analytic::BoltzmannRisk(x) => execute("analytic boltzmann-risk", x.out.as_deref(), x.resolve()?, commands::boltzmann_risk),
            Analytic::Hebbian(x) => execute("analytic hebbian", x.out.as_deref(), x.resolve()?, commands::hebbian),
            Analytic::Gardner(x) => execute("analytic gardner", x.out.as_deref(), x.resolve()?, commands::gardner),
            Analytic::GibbsAnnealed(x) => execute("analytic gibbs-annealed", x.out.as_deref(), x.resolve()?, commands::gibbs_annealed),
        },
        Group::Simulate(Simulate::Hebbian(x)) => execute("simulate hebbian", x.out.as_deref(), x.resolve()?, commands::simulate_hebbian),
        Group::Data(d) => match d {
            Data::GenGaussian(x) => execute("data gen-gaussian", x.out.as_deref(), x.resolve()?, commands::gen_gaussian),
            Data::LoadIdx(x) => execute("data load-idx", x.out.as_deref(), x.resolve()?, commands::load_idx_cmd),
            Data::Relabel(x) => execute("data relabel", x.out.as_deref(), x.resolve()?, commands::relabel),
        },
        Group::Sample(s) => match s {
            Sample::BoltzmannSweep(x) => execute("sample boltzmann-sweep", x.out.as_deref(), x.resolve()?, commands::boltzmann_sweep),
            Sample::Annealed(x) => execute("sample annealed", x.out.as_deref(), x.resolve()?, commands::annealed),
        },
        Group::Reconstruct(Reconstruct::Entropy(x)) => execute("reconstruct entropy", x.out.as_deref(), x.resolve()?, commands::reconstruct_entropy),
        Group::Fit(Fit::Quadratic(x)) => execute("fit quadratic", x.out.as_deref(), x.resolve()?, commands::fit_quadratic),
    }
}

/// Caps the worker pool at RISKLAB_THREADS when set.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("RISKLAB_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| UsageError(format!("RISKLAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match configure_threads().and_then(|()| dispatch(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<UsageError>().is_some() { 1 } else { 2 })
        }
    }
}
