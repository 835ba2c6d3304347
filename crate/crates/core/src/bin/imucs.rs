use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use imucs::experiment::{self, ExperimentConfig, Method};
use imucs::signals::{self, SynthConfig};
use imucs::Result;

#[derive(Parser)]
#[command(name = "imucs", version, about = "Compressed IMU signal transmission experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (flat key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set sigma_n=0.001 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        config.apply_overrides(&self.overrides)?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize train/test frame tables.
    GenerateData {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output path for the train split.
        #[arg(long, default_value = "train.csv")]
        train_out: PathBuf,
        /// Output path for the test split.
        #[arg(long, default_value = "test.csv")]
        test_out: PathBuf,
    },
    /// Train and cache the recovery model for one measurement count.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Measurement count m (default: the 82% operating point).
        #[arg(long, default_value_t = 168)]
        m: usize,
    },
    /// Evaluate the configured methods at a single measurement count.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 168)]
        m: usize,
    },
    /// Run the full MSE sweep over the configured m grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Measure decoding latency over batch sizes.
    Latency {
        #[command(flatten)]
        config: ConfigArgs,
        /// Batch sizes to time (default from config).
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Option<Vec<usize>>,
    },
    /// Certify the S-REC constant of the sensing matrix over decoder pairs.
    SrecCheck {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Decode test frames and export them as a frame table.
    Export {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "cs-vae")]
        method: String,
        #[arg(long, default_value_t = 168)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value = "recovered.csv")]
        out: PathBuf,
    },
}

fn print_rows(result: &experiment::SweepResult) {
    println!("{}", experiment::CSV_HEADER);
    for r in &result.rows {
        println!(
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.m,
            r.seed,
            r.batch.map(|b| b.to_string()).unwrap_or_default(),
            r.mse.map(|v| v.to_string()).unwrap_or_default(),
            r.latency_seconds.map(|v| v.to_string()).unwrap_or_default(),
            r.power_violation_rate
                .map(|v| v.to_string())
                .unwrap_or_default(),
            r.snr_db.map(|v| v.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenerateData {
            config,
            train_out,
            test_out,
        } => {
            let cfg = config.load()?;
            let synth = SynthConfig::default().with_dim(cfg.n);
            let all = signals::synthesize(
                &synth,
                cfg.train_frames + cfg.test_frames,
                cfg.data_seed,
            )?;
            let (train, test) = all.split_at(cfg.train_frames)?;
            train.save(&train_out)?;
            test.save(&test_out)?;
            println!(
                "wrote {} train frames to {} and {} test frames to {}",
                train.len(),
                train_out.display(),
                test.len(),
                test_out.display()
            );
        }
        Command::Train { config, m } => {
            let cfg = config.load()?;
            let data = experiment::prepare_data(&cfg)?;
            let matrix = experiment::method_matrix(&cfg, Method::CsVae, m, cfg.seeds[0], data.stats)?;
            let model = experiment::get_or_train_model(&cfg, &data.train, &matrix, cfg.seeds[0])?;
            let path = experiment::model_path(&cfg, matrix.design().scheme, m, cfg.seeds[0]);
            let trace = model.training_trace();
            println!("model cached at {}", path.display());
            if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
                println!(
                    "training loss over {} epochs: {first:.6} -> {last:.6}",
                    trace.len()
                );
            }
        }
        Command::Evaluate { config, m } => {
            let mut cfg = config.load()?;
            cfg.m_values = vec![m];
            cfg.validate()?;
            let result = experiment::run_sweep(&cfg)?;
            print_rows(&result);
        }
        Command::Sweep { config } => {
            let cfg = config.load()?;
            let result = experiment::run_sweep(&cfg)?;
            print_rows(&result);
            println!(
                "results written under {} (sweep.csv, sweep.json)",
                cfg.output_dir.display()
            );
        }
        Command::Latency {
            config,
            batch_sizes,
        } => {
            let cfg = config.load()?;
            let batches = batch_sizes.unwrap_or_else(|| cfg.latency_batch_sizes.clone());
            let result = experiment::run_latency(&cfg, &batches)?;
            print_rows(&result);
        }
        Command::SrecCheck { config } => {
            let cfg = config.load()?;
            let cert = experiment::run_srec(&cfg)?;
            println!(
                "gamma_hat = {:.6} over {} pairs (kappa = {}), certificate at {}",
                cert.gamma_hat,
                cert.pairs_tested,
                cert.kappa,
                cfg.output_dir.join("srec.json").display()
            );
        }
        Command::Export {
            config,
            method,
            m,
            count,
            out,
        } => {
            let cfg = config.load()?;
            let method = Method::parse(&method)?;
            let written = experiment::export_recovered(&cfg, method, m, count, &out)?;
            println!("wrote {written} recovered frames to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
