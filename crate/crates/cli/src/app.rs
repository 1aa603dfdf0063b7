//! Command definitions and their implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use isotn::corpus::{build_vocab, detokenize, read_vocab, tokenize, windows, write_vocab, Scheme};
use isotn::diagnostics::{decay_curve, DecayComparison, MiSource, ModelDecay};
use isotn::graph::{build, topological_layers, EdgeKind, GraphKind};
use isotn::manifold::{gauge_orbit_rank, moduli_dimension};
use isotn::model::SampleMultiset;
use isotn::network::default_edge_dims;
use isotn::rng::{stream, Stream};
use isotn::sampling::sample;
use isotn::training::{mean_loss, train_with_checkpoints, TrainConfig};
use isotn::TensorNetwork;

use crate::model_file::{load, save, Model, TrainingInfo};

#[derive(Parser, Debug)]
#[command(name = "isotn", version, about = "Isometric tensor-network models of symbol sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a vocabulary file from text.
    Vocab(VocabArgs),
    /// Initialize a network and fit it to windows of a text.
    Train(TrainArgs),
    /// Draw sequences from a model.
    Sample(SampleArgs),
    /// Free energy, cross-entropy and perplexity of a model on a text.
    Eval(EvalArgs),
    /// Mutual-information decay curve of a model or a text, with fits.
    Mi(MiArgs),
    /// Moduli-space dimension and gauge-orbit rank of a model.
    Dim(DimArgs),
    /// Graph, dimensions and isometry violations of a model.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct VocabArgs {
    #[arg(long)]
    pub text: PathBuf,
    #[arg(long, default_value = "chars")]
    pub scheme: String,
    #[arg(long, default_value_t = 256)]
    pub max_size: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, default_value = "tree")]
    pub graph: String,
    #[arg(long)]
    pub n: usize,
    /// Bond dimension caps by depth, comma separated; the last applies below.
    #[arg(long, default_value = "4", value_delimiter = ',')]
    pub bond_dims: Vec<usize>,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "chars")]
    pub scheme: String,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Visit batches in data order instead of reshuffling each epoch.
    #[arg(long)]
    pub no_shuffle: bool,
    /// Write `<out>.ckpt` every this many steps; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub checkpoint_every: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub isometry_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
}

#[derive(Args, Debug)]
pub struct MiArgs {
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Vocabulary for `--data`; built from the data when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value = "chars")]
    pub scheme: String,
    /// Window length for `--data`; defaults to `lmax + 1`.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[arg(long)]
    pub lmax: usize,
    /// key=value report; defaults to `<input>.mi.txt`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DimArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Seed of the random gauge at which the orbit rank is evaluated.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Vocab(a) => vocab(a, out),
        Command::Train(a) => train(a, out),
        Command::Sample(a) => sample_cmd(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Mi(a) => mi(a, out),
        Command::Dim(a) => dim(a, out),
        Command::Inspect(a) => inspect(a, out),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_vocab(path: &Path) -> Result<isotn::model::SymbolSet> {
    let text = String::from_utf8(read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))?;
    read_vocab(&text).with_context(|| format!("invalid vocabulary file {}", path.display()))
}

fn vocab(a: VocabArgs, out: &mut dyn Write) -> Result<()> {
    let scheme = Scheme::parse(&a.scheme)?;
    let symbols = build_vocab(&read(&a.text)?, scheme, a.max_size)?;
    write_file(&a.out, write_vocab(&symbols).as_bytes())?;
    writeln!(out, "symbols {}", symbols.len())?;
    writeln!(out, "out_of_vocabulary {}", symbols.oov().is_some())?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let scheme = Scheme::parse(&a.scheme)?;
    let kind = GraphKind::parse(&a.graph)?;
    if kind == GraphKind::Custom {
        bail!("--graph must be chain, tree or mera");
    }
    if a.bond_dims.is_empty() || a.bond_dims.contains(&0) {
        bail!("--bond-dims must list positive integers");
    }
    let symbols = load_vocab(&a.vocab)?;
    let tokens =
        tokenize(&read(&a.data)?, scheme, &symbols).with_context(|| format!("tokenizing {}", a.data.display()))?;
    let samples = windows(&tokens, a.n, a.stride).with_context(|| format!("windowing {}", a.data.display()))?;

    let q = build(kind, a.n)?;
    let dims = default_edge_dims(&q, symbols.len(), &a.bond_dims)?;
    let init = TensorNetwork::random(q, dims, &mut stream(a.seed, Stream::Init))?;
    let cfg = TrainConfig {
        learning_rate: a.eta,
        steps: a.steps,
        batch_size: a.batch,
        seed: a.seed,
        shuffle: !a.no_shuffle,
        checkpoint_every: a.checkpoint_every,
        isometry_tol: a.isometry_tol,
    };
    let mut model = Model {
        net: init.clone(),
        symbols,
        scheme,
        vocab_source: Some(a.vocab.display().to_string()),
        seed: a.seed,
        training: Some(TrainingInfo {
            learning_rate: a.eta,
            steps: a.steps,
            batch_size: a.batch,
            bond_dims: a.bond_dims.clone(),
            data_source: Some(a.data.display().to_string()),
        }),
    };
    let initial = mean_loss(&init, &samples)?;
    let ckpt_path = with_suffix(&a.out, ".ckpt");
    let (net, trace) = train_with_checkpoints(&init, &samples, &cfg, |_, net| {
        let snapshot = Model { net: net.clone(), ..model.clone() };
        save(&snapshot, &ckpt_path).map_err(|e| isotn::Error::Precondition(format!("{e:#}")))
    })?;
    model.net = net;
    save(&model, &a.out)?;
    let trace_path = a.trace.unwrap_or_else(|| with_suffix(&a.out, ".loss.csv"));
    write_file(&trace_path, trace.to_csv().as_bytes())?;

    let last = trace.records.last().map_or(initial, |r| r.loss);
    writeln!(out, "windows {}", samples.cardinality())?;
    writeln!(out, "initial_loss {initial:.12e}")?;
    writeln!(out, "final_loss {last:.12e}")?;
    writeln!(out, "max_isometry_violation {:.3e}", model.net.max_isometry_violation())?;
    writeln!(out, "model {}", a.out.display())?;
    writeln!(out, "trace {}", trace_path.display())?;
    Ok(())
}

/// Detokenized text with line breaks escaped so each draw stays on one line.
fn one_line(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\r' => out.extend_from_slice(b"\\r"),
            b => out.push(b),
        }
    }
    out
}

fn sample_cmd(a: SampleArgs, out: &mut dyn Write) -> Result<()> {
    let model = load(&a.model)?;
    let draws = sample(&model.net, a.count, &mut stream(a.seed, Stream::Sample))?;
    for d in draws {
        out.write_all(&one_line(&detokenize(&d.symbols, model.scheme, &model.symbols)?))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let model = load(&a.model)?;
    let tokens = tokenize(&read(&a.data)?, model.scheme, &model.symbols)?;
    let samples = windows(&tokens, model.net.n_positions(), a.stride)?;
    let per_sequence = mean_loss(&model.net, &samples)?;
    let per_token = per_sequence / model.net.n_positions() as f64;
    writeln!(out, "windows {}", samples.cardinality())?;
    writeln!(out, "free_energy_per_sequence {per_sequence:.12e}")?;
    writeln!(out, "cross_entropy_per_token {per_token:.12e}")?;
    writeln!(out, "perplexity {:.12e}", per_token.exp())?;
    Ok(())
}

fn mi(a: MiArgs, out: &mut dyn Write) -> Result<()> {
    let (label, curve, input) = if let Some(path) = &a.model {
        let model = load(path)?;
        ("model", decay_curve(MiSource::Model(&model.net), a.lmax)?, path.clone())
    } else {
        let path = a.data.clone().expect("clap requires --model or --data");
        let scheme = Scheme::parse(&a.scheme)?;
        let text = read(&path)?;
        let symbols = match &a.vocab {
            Some(v) => load_vocab(v)?,
            None => build_vocab(&text, scheme, 256)?,
        };
        let tokens = tokenize(&text, scheme, &symbols)?;
        let samples: SampleMultiset = windows(&tokens, a.n.unwrap_or(a.lmax + 1), a.stride)?;
        ("data", decay_curve(MiSource::Samples(&samples), a.lmax)?, path)
    };
    let report = DecayComparison { models: vec![ModelDecay::from_curve(label, curve)] };
    out.write_all(report.to_table().as_bytes())?;
    let report_path = a.report.unwrap_or_else(|| with_suffix(&input, ".mi.txt"));
    write_file(&report_path, report.to_key_values().as_bytes())?;
    writeln!(out, "report {}", report_path.display())?;
    Ok(())
}

fn dim(a: DimArgs, out: &mut dyn Write) -> Result<()> {
    let model = load(&a.model)?;
    let net = &model.net;
    let real = net.stiefel_real_dimension();
    let rank = gauge_orbit_rank(net, &mut stream(a.seed, Stream::Gauge));
    match moduli_dimension(net) {
        Ok(d) => {
            writeln!(out, "moduli_dimension {d}")?;
            writeln!(out, "stiefel_real_dimension {real}")?;
            writeln!(out, "gauge_orbit_rank {rank}")?;
            let consistent = real >= rank && (real - rank) % 2 == 0 && (real - rank) / 2 == d;
            writeln!(
                out,
                "consistency ({real} - {rank}) / 2 = {} {}",
                (real as f64 - rank as f64) / 2.0,
                if consistent { "ok" } else { "MISMATCH" }
            )?;
        }
        Err(e) => {
            writeln!(out, "moduli_dimension unsupported ({e})")?;
            writeln!(out, "stiefel_real_dimension {real}")?;
            writeln!(out, "gauge_orbit_rank {rank}")?;
        }
    }
    Ok(())
}

fn inspect(a: InspectArgs, out: &mut dyn Write) -> Result<()> {
    let model = load(&a.model)?;
    let net = &model.net;
    let q = net.quiver();
    let layering = topological_layers(q)?;
    writeln!(out, "graph {}", q.kind())?;
    writeln!(out, "positions {}", q.n_positions())?;
    writeln!(out, "vertices {}", q.n_vertices())?;
    writeln!(
        out,
        "edges {} (in {}, internal {}, out {})",
        q.n_edges(),
        q.in_edges().len(),
        q.internal_edges().len(),
        q.out_edges().len()
    )?;
    writeln!(out, "layers {} sizes {:?}", layering.num_layers(), layering.sizes())?;
    writeln!(out, "tree {}", q.is_tree())?;
    writeln!(
        out,
        "symbols {} scheme {} oov {}",
        model.symbols.len(),
        model.scheme.name(),
        model.symbols.oov().is_some()
    )?;
    writeln!(out, "prng {} seed {}", isotn::rng::ALGORITHM, model.seed)?;
    writeln!(out, "max_isometry_violation {:.3e}", net.max_isometry_violation())?;
    writeln!(out, "edge kind source target dim")?;
    for (e, edge) in q.edges().iter().enumerate() {
        let kind = match edge.kind {
            EdgeKind::In => "in",
            EdgeKind::Out => "out",
            EdgeKind::Internal => "internal",
        };
        let show = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        writeln!(out, "{e} {kind} {} {} {}", show(edge.source), show(edge.target), net.edge_dim(e))?;
    }
    writeln!(out, "vertex shape isometry_violation")?;
    for v in 0..q.n_vertices() {
        let violation = isotn::tensor::isometry_violation(net.tensor(v), &net.vertex_split(v))?;
        writeln!(out, "{v} {:?} {violation:.3e}", net.vertex_shape(v))?;
    }
    Ok(())
}
