//! Command-line front end.
//!
//! Every batch subcommand reads `--manifest`, writes new files into
//! `--out-dir` (never touching the input manifest) and reports failures per
//! row. Exit codes: 0 success, 1 at least one row failed, 2 usage error.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use semtok_core::Matrix;

use crate::manifest::{read_manifest, rebase_paths, resolve, write_manifest, UtteranceRecord};
use crate::npy::Dtype;
use crate::{save_matrix, Error, Result};

mod eval;
mod extract;
mod filter;
mod fuse;
mod prompt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ROW_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "semtok",
    version,
    about = "Semantic tokens, embedding fusion and speech metrics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pool hidden states into a token (or copy a token sequence) per utterance.
    ExtractToken(ExtractArgs),
    /// Project tokens and fuse them into acoustic embeddings.
    Fuse(FuseArgs),
    /// Mel-cepstral distortion and character/word error rates.
    Eval(EvalArgs),
    /// Build LM prompts for every transcript.
    Prompt(PromptArgs),
    /// Speaker/emotion-agreement filtering and train/dev/test splitting.
    Filter(FilterArgs),
    /// Write a synthetic fixture set.
    Fixtures(FixturesArgs),
    /// Run the built-in numerical verification suites.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Ave,
    Pca,
    Last,
    EisWord,
    EisSentence,
    Tex,
    Pho,
}

impl StrategyArg {
    pub fn strategy(self) -> semtok_core::strategies::Strategy {
        use semtok_core::strategies::{GlobalStrategy as G, SequenceKind as K, Strategy as S};
        match self {
            StrategyArg::Ave => S::Global(G::Ave),
            StrategyArg::Pca => S::Global(G::Pca),
            StrategyArg::Last => S::Global(G::Last),
            StrategyArg::EisWord => S::Global(G::EisWord),
            StrategyArg::EisSentence => S::Global(G::EisSentence),
            StrategyArg::Tex => S::Sequence(K::Tex),
            StrategyArg::Pho => S::Sequence(K::Pho),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FuseMode {
    Add,
    Att,
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    #[arg(long, value_enum)]
    pub mode: FuseMode,
    /// `d_model × d_sem` projection; seeded random init when absent.
    #[arg(long)]
    pub projection: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Attention temperature; defaults to sqrt(d_model).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Attention dropout rate; a positive rate switches on training mode.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = semtok_core::fusion::DEFAULT_MASK_FILL, allow_hyphen_values = true)]
    pub mask_fill: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    /// Align frames with DTW (default).
    #[arg(long, overrides_with = "no_dtw")]
    pub dtw: bool,
    #[arg(long, overrides_with = "dtw")]
    pub no_dtw: bool,
    /// Leave out the energy coefficient c0 (default).
    #[arg(long, overrides_with = "with_c0")]
    pub skip_c0: bool,
    #[arg(long, overrides_with = "skip_c0")]
    pub with_c0: bool,
    #[arg(long, default_value_t = 1024)]
    pub window: usize,
    #[arg(long, default_value_t = 256)]
    pub shift: usize,
    #[arg(long, default_value_t = 80)]
    pub n_mels: usize,
    /// Cepstral order K.
    #[arg(long, default_value_t = 12)]
    pub order: usize,
    /// Count spaces as characters in CER.
    #[arg(long)]
    pub cer_spaces: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptKindArg {
    EisWord,
    EisSentence,
    Emotion,
}

#[derive(Debug, Clone, Args)]
pub struct PromptArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long, value_enum)]
    pub kind: PromptKindArg,
    /// UTF-8 template with `{transcript}` (and `{labels}` for emotion).
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Comma-separated emotion labels.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    #[arg(long)]
    pub speaker: Option<String>,
    /// Keep only rows whose annotated and predicted emotions agree.
    #[arg(long)]
    pub agreement: bool,
    /// Train,dev,test fractions, e.g. `0.8,0.1,0.1`.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    /// Split by the `duration` field instead of record count.
    #[arg(long)]
    pub by_duration: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FixturesArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub utterances: usize,
    #[arg(long, default_value_t = 16)]
    pub d_sem: usize,
    #[arg(long, default_value_t = 8)]
    pub d_model: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SelfcheckArgs {
    /// Random instances for the gradient suite.
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub utt_id: String,
    pub message: String,
}

/// Outcome of one subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub rows: usize,
    pub failures: Vec<RowFailure>,
    /// Files written, in order.
    pub outputs: Vec<PathBuf>,
}

impl Report {
    fn fail(&mut self, utt_id: &str, err: impl std::fmt::Display) {
        log::error!("{utt_id}: {err}");
        self.failures.push(RowFailure {
            utt_id: utt_id.to_string(),
            message: err.to_string(),
        });
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            EXIT_OK
        } else {
            EXIT_ROW_FAILURES
        }
    }
}

/// A loaded input manifest plus the directory its relative paths hang off.
pub(crate) struct Batch {
    pub records: Vec<UtteranceRecord>,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Batch {
    pub fn open(args: &BatchArgs) -> Result<Self> {
        let records = read_manifest(&args.manifest)?;
        let base_dir = args
            .manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert(file_stem(&r.utt_id)) {
                return Err(Error::Usage(format!(
                    "utt_id `{}` collides with another id once made file-safe",
                    r.utt_id
                )));
            }
        }
        Ok(Self {
            records,
            base_dir,
            out_dir: args.out_dir.clone(),
        })
    }

    pub fn path(&self, entry: &str) -> PathBuf {
        resolve(&self.base_dir, entry)
    }

    /// Copy of `rec` whose relative paths resolve from the output directory.
    pub fn rebased(&self, rec: &UtteranceRecord) -> UtteranceRecord {
        let mut r = rec.clone();
        rebase_paths(&mut r, &self.base_dir, &self.out_dir);
        r
    }

    pub fn write_records(&self, records: &[UtteranceRecord], name: &str, report: &mut Report) -> Result<()> {
        let path = self.out_dir.join(name);
        write_manifest(records, &path)?;
        report.outputs.push(path);
        Ok(())
    }

    pub fn save(&self, m: &Matrix, dtype: Dtype, name: &str, report: &mut Report) -> Result<()> {
        let path = self.out_dir.join(name);
        save_matrix(m, dtype, &path)?;
        report.outputs.push(path);
        Ok(())
    }
}

/// File-system-safe form of an utterance id.
pub(crate) fn file_stem(utt_id: &str) -> String {
    utt_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Manifest path field for a required known field.
pub(crate) fn require<'a>(field: &'a Option<String>, name: &str) -> Result<&'a str> {
    field.as_deref().ok_or_else(|| Error::MissingField(name.to_string()))
}

pub fn run(cli: Cli) -> Result<Report> {
    match cli.command {
        Command::ExtractToken(a) => extract::run(&a),
        Command::Fuse(a) => fuse::run(&a),
        Command::Eval(a) => eval::run(&a),
        Command::Prompt(a) => prompt::run(&a),
        Command::Filter(a) => filter::run(&a),
        Command::Fixtures(a) => {
            let spec = crate::fixtures::FixtureSpec {
                utterances: a.utterances,
                d_sem: a.d_sem,
                d_model: a.d_model,
                seed: a.seed,
                ..Default::default()
            };
            let manifest = crate::fixtures::write_fixtures(&a.out_dir, &spec)?;
            println!("wrote {}", manifest.display());
            Ok(Report {
                rows: spec.utterances,
                outputs: vec![manifest],
                ..Default::default()
            })
        }
        Command::Selfcheck(a) => {
            let suites = crate::selfcheck::run_all(a.seeds);
            for s in &suites {
                println!("{s}");
            }
            let failures = suites
                .iter()
                .filter(|s| !s.passed)
                .map(|s| RowFailure {
                    utt_id: s.name.to_string(),
                    message: s.detail.clone(),
                })
                .collect();
            Ok(Report {
                rows: suites.len(),
                failures,
                outputs: Vec::new(),
            })
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(report) => {
            for f in &report.failures {
                eprintln!("row failed: {}: {}", f.utt_id, f.message);
            }
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
