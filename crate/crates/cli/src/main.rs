//! `plrec` command-line entry point.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use plrec::bilstm::{self, ModelHeader, ModelShape, SparseSequence};
use plrec::eval::{self, MetricReport, RunRecord};
use plrec::features::{self, FeaturePipeline};
use plrec::fmt::sig;
use plrec::ingest::{self, LabeledExample};
use plrec::optim::bench::{benchmark_suite, BenchmarkFunction};
use plrec::optim::{Method, Objective, PLConfig};
use plrec::synth::{self, SynthConfig};
use plrec::{Error, Result};

use config::Settings;

#[derive(Parser, Debug)]
#[command(
    name = "plrec",
    version,
    about = "Review-based recommendation with a Bi-LSTM trained by Passer Learning"
)]
struct Cli {
    /// Config file of `key = value` lines
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base seed (overrides the `seed` key)
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Override one config key; repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse raw review JSONL, derive labels, clean text, write records JSONL
    Ingest {
        reviews: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split records, fit TF-IDF and graph features on the training part, write a features directory
    Featurize {
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Bi-LSTM on a features directory, write a model directory
    Train {
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score the test part of a features directory with a trained model
    Evaluate {
        model: PathBuf,
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the training-fraction x budget grid for every configured optimizer
    Experiment {
        records: PathBuf,
        /// Use the built-in fraction and budget grid, ignoring `fractions` and `budgets` settings
        #[arg(long)]
        grid_defaults: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run Passer Learning, PSO and random search on benchmark functions and write traces
    BenchOpt {
        /// Run the whole suite instead of a single function
        #[arg(long)]
        suite: bool,
        /// Function to run without --suite, e.g. sphere_5d
        #[arg(long, default_value = "sphere_5d")]
        function: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic review corpus in the raw input format
    Synth {
        #[arg(long, default_value_t = 2000)]
        reviews: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let help = config::keys_help();
    let command = Cli::command()
        .after_long_help(help.clone())
        .mut_subcommands(|sub| sub.after_long_help(help.clone()));
    let cli = match command
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let settings = match settings(&cli) {
        Ok(s) => s,
        Err((code, e)) => {
            eprintln!("plrec: error: {e}");
            return ExitCode::from(code);
        }
    };
    match run(cli.command, settings) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("plrec: error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

/// Defaults, then the config file, then `--set` and `--seed`. A bad config
/// file is a runtime failure (exit 1); a bad `--set` is a usage error (exit 2).
fn settings(cli: &Cli) -> std::result::Result<Settings, (u8, Error)> {
    let mut s = Settings::default();
    if let Some(path) = &cli.config {
        s.apply_file(path).map_err(|e| (1, e))?;
    }
    for item in &cli.overrides {
        let (key, value) = item.split_once('=').ok_or_else(|| {
            (
                2,
                Error::Domain(format!("--set expects KEY=VALUE, got {item:?}")),
            )
        })?;
        s.set(key.trim(), value).map_err(|e| (2, e))?;
    }
    if let Some(seed) = cli.seed {
        s.set("seed", &seed.to_string()).map_err(|e| (2, e))?;
    }
    Ok(s)
}

fn run(command: Command, mut s: Settings) -> Result<()> {
    match command {
        Command::Ingest { reviews, out } => ingest_cmd(&reviews, &out),
        Command::Featurize { records, out } => featurize_cmd(&records, &out, &s),
        Command::Train { features, out } => train_cmd(&features, &out, &s),
        Command::Evaluate {
            model,
            features,
            out,
        } => evaluate_cmd(&model, &features, &out, &s),
        Command::Experiment {
            records,
            grid_defaults,
            out,
        } => {
            if grid_defaults {
                s.reset(&config::GRID_KEYS);
            }
            experiment_cmd(&records, &out, &s)
        }
        Command::BenchOpt {
            suite,
            function,
            out,
        } => bench_cmd(suite, &function, &out, &s),
        Command::Synth { reviews, out } => {
            let records = synth::generate(&SynthConfig::new(reviews, s.seed()));
            write_with(&out, |w| ingest::write_reviews(w, &records))
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Domain(format!("cannot open {}: {e}", path.display())))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let file = File::create(path)
        .map_err(|e| Error::Domain(format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_examples(path: &Path) -> Result<Vec<LabeledExample>> {
    let (records, skipped) = ingest::parse_reviews(open(path)?)?;
    if skipped > 0 {
        eprintln!(
            "plrec: skipped {skipped} malformed lines in {}",
            path.display()
        );
    }
    ingest::label_records(records)
}

fn ingest_cmd(reviews: &Path, out: &Path) -> Result<()> {
    let (records, skipped) = ingest::parse_reviews(open(reviews)?)?;
    let examples = ingest::label_records(records)?;
    write_with(out, |w| ingest::write_examples(w, &examples))?;
    let positive = examples.iter().filter(|e| e.label == 1).count();
    println!(
        "{} records ({positive} positive), {skipped} malformed lines skipped",
        examples.len()
    );
    Ok(())
}

/// Plain `key = value` metadata kept next to features and models.
fn write_meta(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    write_with(path, |w| {
        for (k, v) in entries {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    })
}

fn read_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Domain(format!("cannot read {}: {e}", path.display())))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect())
}

fn meta_value<T: std::str::FromStr>(
    meta: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<T> {
    meta.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: missing or bad `{key}`", path.display())))
}

fn featurize_cmd(records: &Path, out: &Path, s: &Settings) -> Result<()> {
    let examples = read_examples(records)?;
    let fraction = s.real("train_fraction");
    let seed = eval::split_seed(s.seed(), fraction);
    let split = ingest::split(&examples, fraction, seed)?;
    let pipeline = FeaturePipeline::<f64>::fit(&split.train, &s.features(), seed)?;
    fs::create_dir_all(out)?;
    write_with(&out.join("tfidf.txt"), |w| pipeline.tfidf.save(w))?;
    write_with(&out.join("graph.txt"), |w| pipeline.embeddings.save(w))?;
    let dim = pipeline.dimension();
    for (name, part) in [("train.txt", &split.train), ("test.txt", &split.test)] {
        let rows = pipeline.transform_all(part)?;
        write_with(&out.join(name), |w| features::save_features(w, &rows, dim))?;
    }
    write_meta(
        &out.join("split.txt"),
        &[
            ("dataset", s.text("dataset").to_owned()),
            ("train_fraction", fraction.to_string()),
            ("seed", s.seed().to_string()),
        ],
    )?;
    println!(
        "{} train / {} test examples, dimension {dim}",
        split.train.len(),
        split.test.len()
    );
    Ok(())
}

fn load_rows(path: &Path) -> Result<(Vec<(plrec::FeatureVector, u8)>, usize)> {
    features::load_features(open(path)?)
}

fn train_cmd(features_dir: &Path, out: &Path, s: &Settings) -> Result<()> {
    let (rows, dim) = load_rows(&features_dir.join("train.txt"))?;
    let shape = ModelShape::for_features(dim, s.count("steps"), s.count("hidden"))?;
    let combine = s.combine();
    let method = s.method();
    let budget = s.count("budget");
    let iterations = budget * s.count("budget_scale");
    let optimizer = s.optimizer(1, iterations, s.seed());
    let bound = s.real("param_bound");
    let started = Instant::now();
    let (model, result) = bilstm::train(&rows, shape, combine, &optimizer, bound, method)?;
    fs::create_dir_all(out)?;
    let params = bilstm::flatten(&model);
    write_with(&out.join("params.csv"), |w| {
        bilstm::write_params_csv(&params, w)
    })?;
    write_with(&out.join("model.txt"), |w| {
        ModelHeader {
            shape,
            combine,
            bound,
        }
        .write(w)
    })?;
    write_with(&out.join("trace.csv"), |w| result.write_trace_csv(w))?;
    write_meta(
        &out.join("run.txt"),
        &[
            ("method", method.to_string()),
            ("budget", budget.to_string()),
            ("seed", s.seed().to_string()),
        ],
    )?;
    if result.rejected > 0 {
        eprintln!(
            "plrec: {} candidates rejected for non-finite fitness",
            result.rejected
        );
    }
    println!(
        "{method}: {} parameters, training mse {} after {iterations} iterations ({:.1}s)",
        params.values.len(),
        sig(result.best_fitness, 6),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn evaluate_cmd(model_dir: &Path, features_dir: &Path, out: &Path, s: &Settings) -> Result<()> {
    let header = ModelHeader::read(open(&model_dir.join("model.txt"))?)?;
    let params = bilstm::read_params_csv::<f64, _>(open(&model_dir.join("params.csv"))?, &header)?;
    let model = params.to_model()?;
    let (rows, _) = load_rows(&features_dir.join("test.txt"))?;
    let scores = rows
        .iter()
        .map(|(f, _)| bilstm::predict_sparse(&model, &SparseSequence::new(f, &header.shape)?))
        .collect::<Result<Vec<f64>>>()?;
    let labels: Vec<u8> = rows.iter().map(|&(_, l)| l).collect();
    let counts = eval::confusion(&scores, &labels, s.real("threshold"))?;
    let metrics = eval::metrics(&counts, &scores, &labels);

    let split_path = features_dir.join("split.txt");
    let split = read_meta(&split_path)?;
    let run_path = model_dir.join("run.txt");
    let run = read_meta(&run_path)?;
    let record = RunRecord {
        dataset_id: meta_value(&split, "dataset", &split_path)?,
        method: meta_value(&run, "method", &run_path)?,
        train_fraction: meta_value(&split, "train_fraction", &split_path)?,
        budget: meta_value(&run, "budget", &run_path)?,
        seed: meta_value(&run, "seed", &run_path)?,
        metrics: Some(metrics),
        error: None,
        wall_time_seconds: 0.0,
    };
    eval::emit_report(&[record], out, &s.formats())?;
    print_metrics(&metrics);
    Ok(())
}

fn print_metrics(m: &MetricReport<f64>) {
    println!(
        "precision {} recall {} f1 {} mse {}",
        sig(m.precision, 6),
        sig(m.recall, 6),
        sig(m.f1, 6),
        sig(m.mse, 6)
    );
}

fn experiment_cmd(records: &Path, out: &Path, s: &Settings) -> Result<()> {
    let examples = read_examples(records)?;
    let grid = s.grid();
    let mut all = Vec::new();
    let mut by_method = BTreeMap::new();
    for method in s.methods() {
        let runs = eval::run_experiment(&examples, &grid, &s.experiment(method))?;
        for r in &runs {
            if let Some(e) = &r.error {
                eprintln!(
                    "plrec: run {method} fraction {} budget {} seed {} failed: {e}",
                    r.train_fraction, r.budget, r.seed
                );
            }
        }
        by_method.insert(method.name().to_owned(), runs.clone());
        all.extend(runs);
    }
    if all.iter().all(|r| r.metrics.is_none()) {
        return Err(Error::Domain("every experiment run failed".into()));
    }
    let written = eval::emit_report(&all, out, &s.formats())?;
    let table = eval::compare_table(&by_method)?;
    fs::write(out.join("compare.txt"), table.to_text())?;
    print!("{}", table.to_text());
    println!(
        "{} runs, reports: {}",
        all.len(),
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}

fn bench_cmd(suite: bool, function: &str, out: &Path, s: &Settings) -> Result<()> {
    let functions: Vec<BenchmarkFunction> = if suite {
        benchmark_suite()
    } else {
        let f = benchmark_suite()
            .into_iter()
            .find(|f| f.name() == function)
            .ok_or_else(|| Error::Domain(format!("unknown benchmark function {function:?}")))?;
        vec![f]
    };
    fs::create_dir_all(out)?;
    let mut summary = String::from("function,method,best_fitness,evaluations,rejected\n");
    for f in &functions {
        for method in Method::ALL {
            let config = PLConfig {
                bounds: f.bounds(),
                ..s.optimizer(Objective::<f64>::dim(f), s.count("max_iter"), s.seed())
            };
            let result = method.run(f, &config)?;
            write_with(&out.join(format!("{}_{}.csv", f.name(), method)), |w| {
                result.write_trace_csv(w)
            })?;
            summary.push_str(&format!(
                "{},{method},{},{},{}\n",
                f.name(),
                sig(result.best_fitness, 9),
                result.evaluations,
                result.rejected
            ));
        }
    }
    fs::write(out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}
