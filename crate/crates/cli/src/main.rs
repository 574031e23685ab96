//! Command-line entry point wiring the toolkit into reproducible
//! pipelines: corpus construction, the four training stages, restoration,
//! latent analysis, the step sweep, the fine-tuning ablation, and the
//! invariant self-test.

mod commands;
mod stages;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "bridgekit",
    version,
    about = "Latent-bridge speech restoration toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Flat key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic choice of the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesise a paired clean/degraded toy corpus.
    MakeToyCorpus {
        #[command(flatten)]
        common: Common,
    },
    /// Degrade a WAV file or a directory of WAV files.
    Degrade {
        #[command(flatten)]
        common: Common,
        /// Input WAV file or directory.
        #[arg(long)]
        input: PathBuf,
    },
    /// Stage 1: train the energy-preserving autoencoder on clean frames.
    TrainVae {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        /// Disable the energy-preserving constraint (baseline run).
        #[arg(long)]
        no_ep: bool,
    },
    /// Stage 2: fine-tune the encoder into the joint neural prior.
    TrainPrior {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
    },
    /// Stage 3: train the latent bridge predictor.
    TrainBridge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        prior: PathBuf,
    },
    /// Stage 4: perceptual-aware joint fine-tuning.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        bridge: PathBuf,
        /// Loss combination: Cont, R, RH, RAF, RHAF, or RHAF-B.
        #[arg(long, default_value = "RHAF")]
        variant: String,
    },
    /// Restore a degraded WAV through the trained pipeline.
    Restore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        /// Bridge or finetune stage directory holding the predictor.
        #[arg(long)]
        model: PathBuf,
        /// Override the configured sampler: sde or ode.
        #[arg(long)]
        sampler: Option<String>,
        /// Override the configured number of reverse steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Clean reference for SNR / spectral metrics.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Fit per-degradation-type latent Gaussians and emit the pairwise
    /// transport-distance matrix.
    AnalyzePriors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        /// Encode with the joint-prior encoder instead of the clean one.
        #[arg(long)]
        prior: Option<PathBuf>,
    },
    /// Restore the held-out split at step counts {1,2,3,4,5,10,20,50}
    /// and emit a metrics CSV.
    SweepSteps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        sampler: Option<String>,
    },
    /// Run the fine-tuning variants and verify their freeze contracts.
    AblateFinetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vae: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        bridge: PathBuf,
        /// Run a single variant instead of all six.
        #[arg(long)]
        variant: Option<String>,
    },
    /// Run the invariant suite and report pass/fail per property.
    Selftest,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::MakeToyCorpus { common } => commands::make_toy_corpus(&common),
        Cmd::Degrade { common, input } => commands::degrade_files(&common, &input),
        Cmd::TrainVae {
            common,
            corpus,
            no_ep,
        } => commands::train_vae(&common, &corpus, !no_ep),
        Cmd::TrainPrior {
            common,
            corpus,
            vae,
        } => commands::train_prior(&common, &corpus, &vae),
        Cmd::TrainBridge {
            common,
            corpus,
            vae,
            prior,
        } => commands::train_bridge(&common, &corpus, &vae, &prior),
        Cmd::Finetune {
            common,
            corpus,
            vae,
            prior,
            bridge,
            variant,
        } => commands::finetune(&common, &corpus, &vae, &prior, &bridge, &variant),
        Cmd::Restore {
            common,
            input,
            vae,
            prior,
            model,
            sampler,
            steps,
            reference,
        } => commands::restore(
            &common,
            &input,
            &vae,
            &prior,
            &model,
            sampler.as_deref(),
            steps,
            reference.as_deref(),
        ),
        Cmd::AnalyzePriors {
            common,
            corpus,
            vae,
            prior,
        } => commands::analyze_priors(&common, &corpus, &vae, prior.as_deref()),
        Cmd::SweepSteps {
            common,
            corpus,
            vae,
            prior,
            model,
            sampler,
        } => commands::sweep_steps(&common, &corpus, &vae, &prior, &model, sampler.as_deref()),
        Cmd::AblateFinetune {
            common,
            corpus,
            vae,
            prior,
            bridge,
            variant,
        } => commands::ablate_finetune(&common, &corpus, &vae, &prior, &bridge, variant.as_deref()),
        Cmd::Selftest => commands::selftest(),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
