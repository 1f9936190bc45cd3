//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 any
//! validation or runtime failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{write_echo, PiSource, RunConfig};
use crate::denoiser::{train, Checkpoint, ContextModel, Denoiser, UniformDenoiser};
use crate::error::{Error, Result};
use crate::forward::{sample_xt, simulate_pure_birth};
use crate::objective::corpus_elbo;
use crate::sampler::{generate, shrink, shrink_k_gillespie, ShrinkMode};
use crate::scorer::{score_deletion_set, score_single_deletions, DEFAULT_MAX_EXACT, DEFAULT_N_MC};
use crate::seqcore::{format_fasta, read_corpus, toy_corpus, Alphabet, Corpus, Sequence};
use crate::selftest;

const FASTA_WIDTH: usize = 60;

#[derive(Debug, Parser)]
#[command(name = "insdiff", version, about = "Insertion-only discrete diffusion over sequences")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Start from the toy settings (alphabet ABC, uniform insertions) instead of the general defaults.
    #[arg(long, global = true, conflicts_with = "config")]
    toy: bool,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Alternating A/B sequences over {A,B,C}, as FASTA.
    Toygen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        max_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trains the context model and writes a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss trace TSV (step, loss, wallclock_secs).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// ELBO-based perplexity of a corpus, as JSON.
    Perplexity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        data: PathBuf,
        /// Score with the uniform denoiser instead of the trained model.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples sequences of a given length, as FASTA.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Overrides sampler.correctors.
        #[arg(long)]
        correctors: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deletes letters from every input sequence, as FASTA.
    Shrink {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of deletions.
        #[arg(long, conflicts_with = "frac", required_unless_present = "frac")]
        m: Option<usize>,
        /// Fraction of each sequence to delete; the count is rounded up.
        #[arg(long)]
        frac: Option<f64>,
        /// Overrides sampler.mode.
        #[arg(long)]
        mode: Option<ShrinkMode>,
        /// Overrides sampler.k (deletions per model call).
        #[arg(long)]
        k: Option<usize>,
        /// Per-step TSV (id, step, position, letter, log_prob); needs k = 1.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-deletion scores for every position, as TSV.
    Score {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scores of deletion sets given as a JSON list of position lists, as TSV.
    ScoreSet {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sets: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_EXACT)]
        max_exact: usize,
        #[arg(long, default_value_t = DEFAULT_N_MC)]
        n_mc: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noised copies of every input sequence at time t, as TSV.
    SimulateForward {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Use the event-by-event simulator instead of the closed form.
        #[arg(long)]
        events: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the oracle suite and prints PASS/FAIL per check.
    Selftest,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Checkpoint written by `train`.
    #[arg(long = "model", value_name = "PATH")]
    path: PathBuf,
}

impl clap::ValueEnum for ShrinkMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[ShrinkMode::Sample, ShrinkMode::Greedy]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            ShrinkMode::Sample => "sample",
            ShrinkMode::Greedy => "greedy",
        }))
    }
}

struct Loaded {
    ck: Checkpoint,
    config: RunConfig,
}

/// Loads a checkpoint and folds its alphabet, schedule, `π` and window
/// into the run config.
fn load_model(args: &ModelArgs, config: &RunConfig) -> Result<Loaded> {
    let ck = Checkpoint::load(&args.path)?;
    let mut config = config.resolved(&ck.alphabet, &ck.pi);
    config.schedule = ck.schedule;
    config.train.window = ck.window;
    let k = ck.alphabet.size();
    config.model = crate::config::ModelConfig {
        d: ck.model.shape().d,
        buckets: ck.model.shape().buckets,
        hidden: ck.model.shape().hidden,
        global: ck.model.shape().global,
        radius: ck.model.shape().radius,
    };
    debug_assert_eq!(config.model.shape(k), *ck.model.shape());
    Ok(Loaded { ck, config })
}

fn emit(out: Option<&Path>, text: &str, config: &RunConfig, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
            write_echo(path, config)?;
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e))?,
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn record_id(seq: &Sequence, i: usize) -> String {
    seq.id().map(str::to_string).unwrap_or_else(|| format!("seq{}", i + 1))
}

/// Deletions for a sequence of length `len`.
pub fn deletion_count(len: usize, m: Option<usize>, frac: Option<f64>) -> Result<usize> {
    let m = match (m, frac) {
        (Some(m), _) => m,
        (None, Some(f)) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("--frac {f} must lie in (0, 1)")));
            }
            (f * len as f64).ceil() as usize
        }
        (None, None) => return Err(Error::Config("one of --m or --frac is required".into())),
    };
    if m == 0 || m >= len {
        return Err(Error::Domain(format!(
            "deletion count {m} must satisfy 1 <= m < length {len}"
        )));
    }
    Ok(m)
}

#[derive(Serialize)]
struct PerplexityReport<'a> {
    denoiser: &'a str,
    sequences: usize,
    letters: usize,
    #[serde(flatten)]
    elbo: crate::objective::ElboReport,
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match (&cli.config, cli.toy) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, true) => RunConfig::toy(),
        (None, false) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<bool> {
    let config = base_config(&cli)?;
    let mut rng: ChaCha8Rng = config.rng();
    match cli.command {
        Command::Toygen { n, max_len, out } => {
            let corpus = toy_corpus(n, max_len, &mut rng)?;
            let alphabet = Alphabet::toy();
            let pi = match config.pi {
                PiSource::Corpus => crate::schedule::InsertionDistribution::from_corpus(&corpus)?,
                _ => config.resolve_pi(&alphabet, None)?,
            };
            let echo = config.resolved(&alphabet, &pi);
            emit(out.as_deref(), &format_fasta(&corpus, FASTA_WIDTH), &echo, stdout)?;
        }
        Command::Train {
            data,
            out,
            trace,
            steps,
        } => {
            let mut config = config;
            if let Some(s) = steps {
                config.train.steps = s;
                config.validate()?;
            }
            let alphabet = config.resolve_alphabet()?;
            let corpus = read_corpus(&data, &alphabet)?;
            let pi = config.resolve_pi(&alphabet, Some(&corpus))?;
            let model = ContextModel::new(config.model.shape(alphabet.size()), &mut rng)?;
            let snapshot = |step: usize, model: &ContextModel| Checkpoint {
                step,
                alphabet: alphabet.clone(),
                schedule: config.schedule,
                pi: pi.clone(),
                window: config.window(),
                model: model.clone(),
            };
            let total = config.train.steps;
            let mut save_intermediate = |step: usize, model: &ContextModel| -> Result<()> {
                if step == total {
                    return Ok(());
                }
                let mut name = out.as_os_str().to_owned();
                name.push(format!(".step{step}"));
                snapshot(step, model).save(PathBuf::from(name))
            };
            let outcome = train(
                &corpus,
                &config.schedule,
                &pi,
                &config.train,
                model,
                &mut rng,
                Some(&mut save_intermediate),
            )?;
            snapshot(total, &outcome.model).save(&out)?;
            write_echo(&out, &config.resolved(&alphabet, &pi))?;
            if let Some(path) = trace {
                let mut text = String::from("step\tloss\twallclock_secs\n");
                for row in &outcome.trace {
                    writeln!(text, "{}\t{}\t{:.6}", row.step, row.loss, row.wallclock_secs).unwrap();
                }
                write_file(&path, &text)?;
            }
        }
        Command::Perplexity {
            model,
            data,
            baseline,
            out,
        } => {
            let Loaded { ck, config: echo } = load_model(&model, &config)?;
            let corpus = read_corpus(&data, &ck.alphabet)?;
            let denoiser: &dyn Denoiser = if baseline { &UniformDenoiser } else { &ck.model };
            let elbo = corpus_elbo(
                &corpus,
                denoiser,
                &ck.schedule,
                &ck.pi,
                config.elbo_samples,
                Some(ck.window),
                &mut rng,
            )?;
            let report = PerplexityReport {
                denoiser: if baseline { "uniform" } else { "checkpoint" },
                sequences: corpus.len(),
                letters: corpus.total_letters(),
                elbo,
            };
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(out.as_deref(), &text, &echo, stdout)?;
        }
        Command::Generate {
            model,
            length,
            n,
            correctors,
            out,
        } => {
            let Loaded { ck, mut config } = load_model(&model, &config)?;
            if let Some(c) = correctors {
                config.sampler.correctors = c;
            }
            let mut seqs = Vec::with_capacity(n);
            for i in 0..n {
                let g = generate(
                    length,
                    &ck.model,
                    &ck.schedule,
                    &ck.pi,
                    config.sampler.correctors,
                    Some(ck.window),
                    &mut rng,
                )?;
                seqs.push(g.sequence.with_id(format!("gen{}", i + 1)));
            }
            let corpus = Corpus::new(ck.alphabet.clone(), seqs, "generate");
            emit(out.as_deref(), &format_fasta(&corpus, FASTA_WIDTH), &config, stdout)?;
        }
        Command::Shrink {
            model,
            input,
            m,
            frac,
            mode,
            k,
            trace,
            out,
        } => {
            let Loaded { ck, mut config } = load_model(&model, &config)?;
            if let Some(mode) = mode {
                config.sampler.mode = mode;
            }
            if let Some(k) = k {
                config.sampler.k = k;
            }
            config.validate()?;
            let kk = config.sampler.k;
            if kk > 1 && (trace.is_some() || config.sampler.mode == ShrinkMode::Greedy) {
                return Err(Error::Config(
                    "k > 1 supports neither --trace nor greedy mode".into(),
                ));
            }
            let corpus = read_corpus(&input, &ck.alphabet)?;
            let mut shrunk = Vec::with_capacity(corpus.len());
            let mut trace_text = String::from("id\tstep\tposition\tletter\tlog_prob\n");
            for (i, x) in corpus.sequences.iter().enumerate() {
                let id = record_id(x, i);
                let dels = deletion_count(x.len(), m, frac)?;
                let y = if kk == 1 {
                    let (y, tr) = shrink(x, dels, &ck.model, config.sampler.mode, Some(ck.window), &mut rng)?;
                    for (step, s) in tr.steps.iter().enumerate() {
                        writeln!(
                            trace_text,
                            "{id}\t{}\t{}\t{}\t{}",
                            step + 1,
                            s.position,
                            ck.alphabet.symbol(s.letter),
                            s.log_prob
                        )
                        .unwrap();
                    }
                    y
                } else {
                    shrink_k_gillespie(x, dels, &ck.model, kk, Some(ck.window), &mut rng)?.0
                };
                shrunk.push(y.with_id(id));
            }
            if let Some(path) = trace {
                write_file(&path, &trace_text)?;
            }
            let corpus = Corpus::new(ck.alphabet.clone(), shrunk, "shrink");
            emit(out.as_deref(), &format_fasta(&corpus, FASTA_WIDTH), &config, stdout)?;
        }
        Command::Score { model, input, out } => {
            let Loaded { ck, config } = load_model(&model, &config)?;
            let corpus = read_corpus(&input, &ck.alphabet)?;
            let mut text = String::from("id\tposition\tletter\tlog_prob\n");
            for (i, x) in corpus.sequences.iter().enumerate() {
                let id = record_id(x, i);
                for r in score_single_deletions(x, &ck.model)?.records {
                    writeln!(text, "{id}\t{}\t{}\t{}", r.position, ck.alphabet.symbol(r.letter), r.log_prob)
                        .unwrap();
                }
            }
            emit(out.as_deref(), &text, &config, stdout)?;
        }
        Command::ScoreSet {
            model,
            input,
            sets,
            max_exact,
            n_mc,
            out,
        } => {
            let Loaded { ck, config } = load_model(&model, &config)?;
            let corpus = read_corpus(&input, &ck.alphabet)?;
            let raw = std::fs::read_to_string(&sets).map_err(|e| Error::io(&sets, e))?;
            let sets: Vec<Vec<usize>> = serde_json::from_str(&raw)
                .map_err(|e| Error::Parse(format!("{}: expected a JSON list of position lists: {e}", sets.display())))?;
            let mut text = String::from("id\tset\tlog_prob\tmethod\n");
            for (i, x) in corpus.sequences.iter().enumerate() {
                let id = record_id(x, i);
                for set in &sets {
                    let s = score_deletion_set(x, set, &ck.model, max_exact, n_mc, &mut rng)?;
                    let joined: Vec<String> = set.iter().map(usize::to_string).collect();
                    writeln!(
                        text,
                        "{id}\t{}\t{}\t{}",
                        joined.join(","),
                        s.log_prob,
                        if s.exact { "exact" } else { "mc" }
                    )
                    .unwrap();
                }
            }
            emit(out.as_deref(), &text, &config, stdout)?;
        }
        Command::SimulateForward {
            input,
            t,
            n,
            events,
            out,
        } => {
            let alphabet = config.resolve_alphabet()?;
            let corpus = read_corpus(&input, &alphabet)?;
            let pi = config.resolve_pi(&alphabet, Some(&corpus))?;
            let mut text = String::from("id\tdraw\tt\tm_t\tlength\tgap_sizes\tx_t\n");
            for (i, x0) in corpus.sequences.iter().enumerate() {
                let id = record_id(x0, i);
                for draw in 0..n {
                    let s = if events {
                        simulate_pure_birth(x0, t, &config.schedule, &pi, &mut rng)?.0
                    } else {
                        sample_xt(x0, t, &config.schedule, &pi, &mut rng)?
                    };
                    let gaps: Vec<String> = s
                        .gap_sizes
                        .as_deref()
                        .unwrap_or_default()
                        .iter()
                        .map(u64::to_string)
                        .collect();
                    writeln!(
                        text,
                        "{id}\t{}\t{t}\t{}\t{}\t{}\t{}",
                        draw + 1,
                        s.m_t,
                        s.x_t.len(),
                        gaps.join(","),
                        alphabet.decode(&s.x_t)
                    )
                    .unwrap();
                }
            }
            emit(out.as_deref(), &text, &config.resolved(&alphabet, &pi), stdout)?;
        }
        Command::Selftest => {
            let checks = selftest::run()?;
            let mut all = true;
            for c in &checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{status}\t{}\t{}", c.name, c.detail).map_err(|e| Error::io("<stdout>", e))?;
                all &= c.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match execute(cli, stdout) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn deletion_counts_round_up() {
        assert_eq!(deletion_count(10, None, Some(0.5)).unwrap(), 5);
        assert_eq!(deletion_count(7, None, Some(0.5)).unwrap(), 4);
        assert_eq!(deletion_count(7, None, Some(0.01)).unwrap(), 1);
        assert_eq!(deletion_count(7, Some(3), None).unwrap(), 3);
        assert!(deletion_count(7, Some(7), None).is_err());
        assert!(deletion_count(7, None, Some(1.5)).is_err());
        assert!(deletion_count(1, None, Some(0.5)).is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_capture(&["insdiff"]).0, 1);
        assert_eq!(run_capture(&["insdiff", "frobnicate"]).0, 1);
        assert_eq!(run_capture(&["insdiff", "toygen", "--bogus"]).0, 1);
        let (code, out, _) = run_capture(&["insdiff", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("selftest"));
    }

    #[test]
    fn validation_errors_exit_two() {
        let (code, _, err) = run_capture(&["insdiff", "toygen", "--n", "3", "--max-len", "0"]);
        assert_eq!(code, 2);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn toygen_to_stdout_is_seeded() {
        let a = run_capture(&["insdiff", "toygen", "--n", "5", "--seed", "3"]);
        let b = run_capture(&["insdiff", "toygen", "--n", "5", "--seed", "3"]);
        let c = run_capture(&["insdiff", "toygen", "--n", "5", "--seed", "4"]);
        assert_eq!(a.0, 0);
        assert_eq!(a.1, b.1);
        assert_ne!(a.1, c.1);
        assert_eq!(a.1.matches('>').count(), 5);
    }
}
