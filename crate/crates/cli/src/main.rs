//! Command-line front end: discrepancies, weights, training, corruption,
//! experiment sweeps and the federated protocol simulator.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use robust_sources::corruption::{corrupt, CorruptionKind, CorruptionSpec};
use robust_sources::data::{load_csv, save_csv, Dataset, LabelEncoding, SourcePool};
use robust_sources::discrepancy::{empirical_discrepancy, DEFAULT_RELAX_RIDGE};
use robust_sources::experiment::{
    companion_paths, load_data, repeat_seed, run_cell, run_sweep, summarize, write_outputs, ExperimentConfig,
    Method,
};
use robust_sources::federated::{run_case1, run_case2, Case2Config, ProtocolTrace};
use robust_sources::linear::TrainConfig;
use robust_sources::weights::{solve_weights, WeightProblem};

#[derive(Parser)]
#[command(name = "robust-sources", version, about = "Learning from multiple unreliable data sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CsvOptions {
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    label_column: String,
    /// Label encoding: `signed` (-1/+1) or `zero_one` (0/1).
    #[arg(long, default_value = "signed")]
    encoding: LabelEncoding,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Subcommand)]
enum Command {
    /// Discrepancy of every source to the reference.
    Discrepancy {
        /// A directory of source CSV files or a single source CSV.
        pool: PathBuf,
        reference: PathBuf,
        #[command(flatten)]
        csv: CsvOptions,
        /// Ridge of the least-squares relaxation.
        #[arg(long, default_value_t = DEFAULT_RELAX_RIDGE)]
        ridge: f64,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Source weights from a discrepancy file written by `discrepancy`.
    Weights {
        discrepancies: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Train one method on repeat 0 of an experiment config and report its test error.
    Train {
        #[arg(long)]
        method: Method,
        #[arg(long)]
        config: PathBuf,
        /// Corrupted-source count; defaults to the first value of the config's grid.
        #[arg(long)]
        n_corrupted: Option<usize>,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
        /// Save the trained linear predictor as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Corrupt a dataset.
    Corrupt {
        input: PathBuf,
        output: PathBuf,
        /// JSON file with `kind`, `proportion` and `seed`; overrides the flags below.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "shuffled_labels")]
        kind: CorruptionKind,
        #[arg(long, default_value_t = 1.0)]
        proportion: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        csv: CsvOptions,
    },
    /// Run a full sweep and write results, sidecar JSON and summary CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a decentralized discrepancy protocol.
    SimulateFederated {
        #[arg(long)]
        case: Case,
        /// Take the pool from repeat 0 of this experiment config.
        #[arg(long, conflicts_with_all = ["pool", "reference"])]
        config: Option<PathBuf>,
        /// Directory of source CSV files or a single source CSV.
        #[arg(long, requires = "reference")]
        pool: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvOptions,
        #[arg(long, default_value_t = 1000)]
        rounds: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.05)]
        step_size: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the message trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write the synthetic data of one repeat of a config as CSV files.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
}

fn source_files(pool: &Path) -> Result<Vec<PathBuf>> {
    if pool.is_file() {
        return Ok(vec![pool.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(pool)
        .with_context(|| format!("reading {}", pool.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .csv files in {}", pool.display());
    }
    Ok(files)
}

fn load_pool(pool: &Path, reference: &Path, csv: &CsvOptions) -> Result<SourcePool> {
    let load = |p: &Path| -> Result<Dataset> {
        load_csv(p, &csv.label_column, csv.encoding).with_context(|| format!("loading {}", p.display()))
    };
    let sources = source_files(pool)?
        .iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(SourcePool::new(sources, load(reference)?)?)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn estimates_json(trace: &ProtocolTrace) -> serde_json::Value {
    json!({
        "source_ids": trace.result.iter().map(|r| r.source_id.clone()).collect::<Vec<_>>(),
        "discrepancies": trace.result.iter().map(|r| r.value).collect::<Vec<_>>(),
        "messages": trace.messages.len(),
        "total_bytes": trace.total_bytes,
        "rounds": trace.rounds,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Discrepancy {
            pool,
            reference,
            csv,
            ridge,
            out,
        } => {
            let pool = load_pool(&pool, &reference, &csv)?;
            let cfg = TrainConfig::with_ridge(ridge);
            let estimates = pool
                .sources()
                .iter()
                .map(|s| empirical_discrepancy(s, pool.reference(), &cfg))
                .collect::<robust_sources::Result<Vec<_>>>()?;
            let value = json!({
                "source_ids": estimates.iter().map(|e| e.source_id.clone()).collect::<Vec<_>>(),
                "discrepancies": estimates.iter().map(|e| e.value).collect::<Vec<_>>(),
                "sample_counts": pool.sample_counts(),
            });
            write_or_print(out.as_deref(), &serde_json::to_string_pretty(&value)?)?;
        }
        Command::Weights { discrepancies, lambda } => {
            let text = fs::read_to_string(&discrepancies)
                .with_context(|| format!("reading {}", discrepancies.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let d: Vec<f64> = serde_json::from_value(v["discrepancies"].clone())
                .context("`discrepancies` must be an array of numbers")?;
            let m: Vec<usize> = serde_json::from_value(v["sample_counts"].clone())
                .context("`sample_counts` must be an array of integers")?;
            let problem = WeightProblem::new(d, m, lambda)?;
            let alpha = solve_weights(&problem)?;
            let value = json!({
                "lambda": lambda,
                "alpha": alpha.as_slice(),
                "objective": problem.objective(alpha.as_slice()),
                "source_ids": v.get("source_ids"),
            });
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::Train {
            method,
            config,
            n_corrupted,
            repeat,
            model_out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let n = n_corrupted.unwrap_or(cfg.n_grid()[0]);
            let outcome = run_cell(&cfg, method, n, repeat)?;
            if let Some(path) = model_out {
                let Some(p) = outcome.model.linear() else {
                    bail!("method `{method}` does not produce a single linear predictor");
                };
                fs::write(&path, p.to_json()).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{}", serde_json::to_string_pretty(&outcome.result)?);
        }
        Command::Corrupt {
            input,
            output,
            spec,
            kind,
            proportion,
            seed,
            csv,
        } => {
            let spec = match spec {
                Some(path) => {
                    let text =
                        fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    let s: CorruptionSpec = serde_json::from_str(&text)?;
                    s.validate()?;
                    s
                }
                None => CorruptionSpec::new(kind, proportion, seed)?,
            };
            let data = load_csv(&input, &csv.label_column, csv.encoding)?;
            save_csv(&corrupt(&data, &spec)?, &output, &csv.label_column, csv.encoding)?;
        }
        Command::Experiment { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let results = run_sweep(&cfg)?;
            let summary = summarize(&results);
            write_outputs(&out, &results, &summary)?;
            let (sidecar, summary_path) = companion_paths(&out);
            for cell in &summary {
                println!(
                    "{:<22} n={:<3} mean={:.4} std={:.4} ({} runs)",
                    cell.method.name(),
                    cell.n_corrupted,
                    cell.mean_test_error,
                    cell.std_test_error,
                    cell.count
                );
            }
            eprintln!(
                "wrote {}, {} and {}",
                out.display(),
                sidecar.display(),
                summary_path.display()
            );
        }
        Command::SimulateFederated {
            case,
            config,
            pool,
            reference,
            csv,
            rounds,
            batch_size,
            step_size,
            seed,
            trace,
        } => {
            let pool = match (config, pool, reference) {
                (Some(c), _, _) => {
                    let cfg = ExperimentConfig::load(&c)?;
                    load_data(&cfg, repeat_seed(cfg.seed, 0))?.0
                }
                (None, Some(p), Some(r)) => load_pool(&p, &r, &csv)?,
                _ => bail!("give either --config or both --pool and --reference"),
            };
            let result = match case {
                Case::One => run_case1(&pool, &TrainConfig::with_ridge(DEFAULT_RELAX_RIDGE))?,
                Case::Two => run_case2(&pool, &Case2Config::new(rounds, batch_size, step_size, seed))?,
            };
            if let Some(path) = trace {
                let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                result.write_jsonl(std::io::BufWriter::new(file))?;
            }
            println!("{}", serde_json::to_string_pretty(&estimates_json(&result))?);
        }
        Command::Generate {
            config,
            out_dir,
            repeat,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (pool, test) = load_data(&cfg, repeat_seed(cfg.seed, repeat))?;
            let sources_dir = out_dir.join("sources");
            fs::create_dir_all(&sources_dir).with_context(|| format!("creating {}", sources_dir.display()))?;
            for (i, s) in pool.sources().iter().enumerate() {
                save_csv(s, &sources_dir.join(format!("source_{i:03}.csv")), "label", LabelEncoding::Signed)?;
            }
            save_csv(pool.reference(), &out_dir.join("reference.csv"), "label", LabelEncoding::Signed)?;
            save_csv(&test, &out_dir.join("test.csv"), "label", LabelEncoding::Signed)?;
        }
    }
    Ok(())
}
