use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gazehmm::data::{read_fixations, write_fixations, DataError};
use gazehmm::dissim::compare;
use gazehmm::hmm::sample_sequences;
use gazehmm::plot::{render_svg, PlotSpec};
use gazehmm::sim::{
    generate_ground_truths, run_calibration_sweep, run_estimation_sweep, write_csv, GroundTruths, SimConfig, SimError,
    Table,
};
use gazehmm::vb::{learn_hmm, LearnError};
use gazehmm::{Hmm, RngStream};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Print to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const ESTIMATION_KEYS: [&str; 2] = ["N", "T"];
const ESTIMATION_METRICS: [&str; 6] = ["k_hat", "d_hmm", "mc_stderr", "l_roi", "l_trans", "l_prior"];
const CALIBRATION_KEYS: [&str; 2] = ["kind", "parameter"];
const CALIBRATION_METRICS: [&str; 5] = ["d_hmm", "mc_stderr", "l_roi", "l_trans", "l_prior"];

/// Simulate, fit and compare Gaussian HMMs of eye fixations.
#[derive(Parser, Debug)]
#[command(name = "gazehmm", version)]
struct Cli {
    /// Master seed; overrides `master_seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Simulation config JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write synthetic ground-truth HMMs as JSON files.
    GenerateGt {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of models; overrides the config.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Sample fixation sequences from an HMM.
    Sample {
        #[arg(long)]
        hmm: PathBuf,
        #[arg(short = 'n', long)]
        sequences: usize,
        #[arg(short = 't', long)]
        length: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn an HMM from a fixation CSV.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Estimated HMM JSON.
        #[arg(long)]
        out: PathBuf,
        /// Learning diagnostics JSON (default: `<out stem>.learn.json`).
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Compare two HMMs; the first is the reference.
    Compare {
        reference: PathBuf,
        estimate: PathBuf,
        /// Report JSON; always printed to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sequence length for the KLD rate (default: config `calibration_length`).
        #[arg(long)]
        length: Option<usize>,
        /// Sequences for the KLD rate (default: config `kld_samples`).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Estimation sweep over the (N, T) grid.
    Simulate(SweepArgs),
    /// Distortion calibration sweep.
    Calibrate(SweepArgs),
    /// Render a sweep CSV as an SVG line chart.
    Plot {
        #[arg(long)]
        input: PathBuf,
        /// x column: N, T, N*T, parameter or any numeric column.
        #[arg(long)]
        x: String,
        #[arg(long)]
        metric: String,
        /// Column whose values become separate lines.
        #[arg(long)]
        group: Option<String>,
        /// Keep only rows where COLUMN=VALUE.
        #[arg(long, value_name = "COLUMN=VALUE")]
        filter: Option<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Per-trial records CSV.
    #[arg(long)]
    out: PathBuf,
    /// Summary CSV (default: `<out stem>.summary.csv`).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Trials per cell; overrides the config.
    #[arg(long)]
    trials: Option<usize>,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn data_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: e.into() }
}

fn learn_err(e: LearnError) -> Failure {
    let code = match e {
        LearnError::AllRunsFailed | LearnError::Estimate(_) => 3,
        _ => 2,
    };
    Failure { code, error: e.into() }
}

fn sim_err(e: SimError) -> Failure {
    match e {
        SimError::Learn(e) => learn_err(e),
        e => data_err(e),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure {
            code: 1,
            error: anyhow::anyhow!("--threads must be at least 1"),
        }),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(data_err(e)),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<(SimConfig, PathBuf), Failure> {
    let (mut cfg, base) = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(data_err)?;
            let cfg = SimConfig::from_json(&text)
                .with_context(|| path.display().to_string())
                .map_err(data_err)?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (SimConfig::default(), PathBuf::from(".")),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    Ok((cfg, base))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(data_err)
}

fn write_text(path: &Path, mut text: String) -> Outcome {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data_err)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn load_hmm(path: &Path) -> Result<Hmm, Failure> {
    Hmm::load(path).map_err(data_err)
}

fn run(cli: &Cli) -> Outcome {
    let (mut cfg, base) = load_config(cli)?;
    let seed = cfg.master_seed;
    match &cli.command {
        Command::GenerateGt { out, count } => {
            let mut spec = match &cfg.ground_truths {
                GroundTruths::Synthetic(spec) => spec.clone(),
                GroundTruths::Files(_) => {
                    return Err(data_err(anyhow::anyhow!("config lists ground-truth files; nothing to generate")))
                }
            };
            if let Some(c) = count {
                spec.count = *c;
            }
            spec.validate().map_err(sim_err)?;
            let models = generate_ground_truths(&spec, &mut RngStream::new(seed, 0)).map_err(sim_err)?;
            fs::create_dir_all(out)
                .with_context(|| format!("creating {}", out.display()))
                .map_err(data_err)?;
            for (i, h) in models.iter().enumerate() {
                let path = out.join(format!("gt_{i:03}.json"));
                write_text(&path, h.to_json())?;
                let means: Vec<String> = h
                    .emissions()
                    .iter()
                    .map(|e| format!("({:.1}, {:.1})", e.mean().x, e.mean().y))
                    .collect();
                say!("{}: K={} means {}", path.display(), h.k(), means.join(" "));
            }
        }
        Command::Sample {
            hmm,
            sequences,
            length,
            out,
        } => {
            if *sequences == 0 || *length == 0 {
                return Err(data_err(anyhow::anyhow!("sequence count and length must be at least 1")));
            }
            let h = load_hmm(hmm)?;
            let seqs = sample_sequences(&h, *sequences, *length, &mut RngStream::new(seed, 0));
            write_fixations(create(out)?, &seqs)
                .with_context(|| format!("writing {}", out.display()))
                .map_err(data_err)?;
        }
        Command::Fit { data, out, diagnostics } => {
            let file = File::open(data)
                .with_context(|| format!("opening {}", data.display()))
                .map_err(data_err)?;
            let seqs = read_fixations(file)
                .map_err(|e: DataError| data_err(anyhow::Error::new(e).context(data.display().to_string())))?;
            let result = learn_hmm(&seqs, &cfg.learn, &cfg.hp, &RngStream::new(seed, 0)).map_err(learn_err)?;
            let diag = diagnostics.clone().unwrap_or_else(|| with_suffix(out, ".learn.json"));
            write_text(out, result.estimated.to_json())?;
            write_text(&diag, serde_json::to_string_pretty(&result).map_err(data_err)?)?;
            say!(
                "k_hat={} (selected K={}) free_energy={:.6} sequences={}",
                result.k_hat,
                result.k_selected,
                result.free_energy,
                seqs.len()
            );
        }
        Command::Compare {
            reference,
            estimate,
            out,
            length,
            samples,
        } => {
            let a = load_hmm(reference)?;
            let b = load_hmm(estimate)?;
            let t = length.unwrap_or(cfg.calibration_length);
            let s = samples.unwrap_or(cfg.kld_samples);
            if t == 0 || s < 2 {
                return Err(data_err(anyhow::anyhow!("need --length >= 1 and --samples >= 2")));
            }
            let report = compare(&a, &b, t, s, &mut RngStream::new(seed, 0));
            let json = serde_json::to_string_pretty(&report).map_err(data_err)?;
            say!("{json}");
            if let Some(out) = out {
                write_text(out, json)?;
            }
        }
        Command::Simulate(args) | Command::Calibrate(args) => {
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            cfg.validate().map_err(sim_err)?;
            let truths = cfg.resolve_ground_truths(&base).map_err(sim_err)?;
            let summary = args.summary.clone().unwrap_or_else(|| with_suffix(&args.out, ".summary.csv"));
            let (table, keys, metrics): (Table, &[&str], &[&str]) = if matches!(cli.command, Command::Simulate(_)) {
                let records = run_estimation_sweep(&cfg, &truths).map_err(sim_err)?;
                write_csv(create(&args.out)?, &records).map_err(sim_err)?;
                let failed = records.iter().filter(|r| r.failure.is_some()).count();
                say!("{} trials, {failed} failed", records.len());
                (Table::from_records(&records), &ESTIMATION_KEYS, &ESTIMATION_METRICS)
            } else {
                let records = run_calibration_sweep(&cfg, &truths).map_err(sim_err)?;
                write_csv(create(&args.out)?, &records).map_err(sim_err)?;
                let skipped = records.iter().filter(|r| r.skipped.is_some()).count();
                say!("{} trials, {skipped} skipped", records.len());
                (Table::from_records(&records), &CALIBRATION_KEYS, &CALIBRATION_METRICS)
            };
            table.write_summary(create(&summary)?, keys, metrics).map_err(sim_err)?;
        }
        Command::Plot {
            input,
            x,
            metric,
            group,
            filter,
            log_x,
            title,
            out,
        } => {
            let filter = match filter {
                Some(f) => match f.split_once('=') {
                    Some((c, v)) => Some((c.to_string(), v.to_string())),
                    None => {
                        return Err(Failure {
                            code: 1,
                            error: anyhow::anyhow!("--filter expects COLUMN=VALUE"),
                        })
                    }
                },
                None => None,
            };
            let file = File::open(input)
                .with_context(|| format!("opening {}", input.display()))
                .map_err(data_err)?;
            let table = Table::from_csv(file).map_err(sim_err)?;
            let spec = PlotSpec {
                x: x.clone(),
                metric: metric.clone(),
                group: group.clone(),
                filter,
                log_x: *log_x,
                title: title.clone(),
            };
            let svg = render_svg(&table, &spec)
                .with_context(|| input.display().to_string())
                .map_err(data_err)?;
            write_text(out, svg)?;
        }
    }
    Ok(())
}
