use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use metablocks::blocks::class_index;
use metablocks::corpus::{generate_synthetic, load_corpus, save_corpus, Dataset, SynthConfig, SynthMode};
use metablocks::featurizer;
use metablocks::harness::{
    compare_all, evaluate, run_method, Checkpoint, Evaluation, Experiment, ExperimentConfig, MethodRegistry,
};

#[derive(Parser)]
#[command(
    name = "metablocks",
    version,
    about = "Joint text and meta-data message classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the meta-data featurizer on a corpus and write it as JSON.
    Featurize {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Experiment config; only its `[featurizer]` section is used.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train one method and save a checkpoint.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Method id (1-10) or name, e.g. `blocks-weighted`.
        #[arg(long)]
        method: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on every message of a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Run the method grid on shared splits and write the results table.
    Compare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output; an aligned text table is written next to it as `.txt`.
        #[arg(long)]
        report: PathBuf,
    },
    /// Generate a synthetic JSONL corpus.
    Synth {
        #[arg(long, value_parser = parse_mode)]
        mode: SynthMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        n_per_class: usize,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        /// Share of each class with another class's text (conflict mode).
        #[arg(long)]
        conflict_fraction: Option<f64>,
    },
}

fn parse_mode(s: &str) -> Result<SynthMode, String> {
    s.parse().map_err(|e: metablocks::Error| e.to_string())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Featurize { corpus, out, config } => featurize(&corpus, &out, config.as_deref()),
        Command::Train {
            corpus,
            method,
            config,
            seed,
            out,
        } => train(&corpus, &method, config.as_deref(), seed, &out),
        Command::Eval { checkpoint, corpus } => eval(&checkpoint, &corpus),
        Command::Compare {
            corpus,
            config,
            seed,
            report,
        } => compare(&corpus, config.as_deref(), seed, &report),
        Command::Synth {
            mode,
            seed,
            out,
            n_per_class,
            classes,
            conflict_fraction,
        } => synth(mode, seed, &out, n_per_class, classes, conflict_fraction),
    }
}

fn read_corpus(path: &Path) -> Result<Dataset> {
    let (ds, report) = load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))?;
    if !report.rejected.is_empty() {
        log::warn!("{}: {} records rejected", path.display(), report.rejected.len());
        for r in report.rejected.iter().take(5) {
            log::warn!("  line {}: {}", r.line, r.reason);
        }
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    log::info!(
        "{}: {} messages, {} labels",
        path.display(),
        ds.len(),
        ds.label_set.len()
    );
    Ok(ds)
}

fn read_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "corpus".into(), |s| s.to_string_lossy().into_owned())
}

fn featurize(corpus: &Path, out: &Path, config: Option<&Path>) -> Result<()> {
    let ds = read_corpus(corpus)?;
    let cfg = read_config(config, None)?;
    let model = featurizer::fit(&ds, &cfg.featurizer)?;
    model.save(out)?;
    let layout = model.layout();
    let sizes: Vec<String> = layout
        .slices
        .iter()
        .map(|s| format!("{}={}", s.name, s.range.len()))
        .collect();
    println!("feature_dim {}: {}", model.feature_dim(), sizes.join(" "));
    println!("wrote {}", out.display());
    Ok(())
}

fn train(corpus: &Path, method: &str, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<()> {
    let ds = read_corpus(corpus)?;
    let cfg = read_config(config, seed)?;
    let registry = MethodRegistry::standard();
    let method = registry.get(method)?;
    let exp = Experiment::new(dataset_name(corpus), &ds, cfg.clone(), cfg.seed)?;
    let (result, model) = run_method(&exp, method)?;
    let ck = Checkpoint::new(
        method.spec(),
        exp.classes.clone(),
        exp.encoder.clone(),
        cfg,
        exp.seed,
        model,
    );
    ck.save(out)?;
    println!(
        "method {}: test accuracy {:.4} ({}/{}) in {:.1}s",
        result.method, result.accuracy, result.evaluation.correct, result.evaluation.total, result.wall_clock_secs
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn eval(checkpoint: &Path, corpus: &Path) -> Result<()> {
    let ck = Checkpoint::load(checkpoint).with_context(|| format!("loading checkpoint {}", checkpoint.display()))?;
    let ds = read_corpus(corpus)?;
    let mut pred = Vec::with_capacity(ds.len());
    let mut gold = Vec::with_capacity(ds.len());
    for m in &ds.messages {
        gold.push(class_index(&ck.classes, &m.label).with_context(|| format!("message {}", m.id))?);
        pred.push(ck.predict(m)?.index);
    }
    let ev = evaluate(&pred, &gold, ck.classes.len())?;
    println!(
        "method {}: accuracy {:.4} ({}/{})",
        ck.method_spec()?,
        ev.accuracy,
        ev.correct,
        ev.total
    );
    print_per_class(&ev, &ck.classes);
    Ok(())
}

fn print_per_class(ev: &Evaluation, classes: &[String]) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.4}"));
    let width = classes.iter().map(String::len).max().unwrap_or(5).max(5);
    println!("{:width$}  precision  recall  support", "class");
    for (name, m) in classes.iter().zip(&ev.per_class) {
        println!(
            "{name:width$}  {:>9}  {:>6}  {:>7}",
            fmt(m.precision),
            fmt(m.recall),
            m.support
        );
    }
}

fn compare(corpus: &Path, config: Option<&Path>, seed: Option<u64>, report: &Path) -> Result<()> {
    let ds = read_corpus(corpus)?;
    let cfg = read_config(config, seed)?;
    let seed = cfg.seed;
    let exp = Experiment::new(dataset_name(corpus), &ds, cfg, seed)?;
    let table = compare_all(&exp, &MethodRegistry::standard())?;
    table.write(report)?;
    print!("{}", table.to_text());
    println!(
        "wrote {} and {}",
        report.display(),
        report.with_extension("txt").display()
    );
    Ok(())
}

fn synth(
    mode: SynthMode,
    seed: u64,
    out: &Path,
    n_per_class: usize,
    classes: usize,
    conflict_fraction: Option<f64>,
) -> Result<()> {
    let mut cfg = SynthConfig::new(seed, n_per_class, classes, mode);
    if let Some(f) = conflict_fraction {
        cfg.conflict_fraction = f;
    }
    let ds = generate_synthetic(&cfg)?;
    save_corpus(&ds, out)?;
    println!("wrote {} messages to {}", ds.len(), out.display());
    Ok(())
}
