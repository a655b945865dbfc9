//! Building a single-speaker emotional subset: speaker filter, agreement
//! between annotated and LM-predicted emotion, and a seeded three-way split.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Read access to the per-utterance metadata the filters look at.
pub trait UtteranceMeta {
    fn speaker(&self) -> Option<&str>;
    fn emotion_annotated(&self) -> Option<&str>;
    fn emotion_predicted(&self) -> Option<&str>;
    /// Audio duration in seconds, when known.
    fn duration_secs(&self) -> Option<f64> {
        None
    }
}

pub fn filter_by_speaker<T: UtteranceMeta>(records: Vec<T>, speaker_id: &str) -> Vec<T> {
    let kept: Vec<T> = records
        .into_iter()
        .filter(|r| r.speaker() == Some(speaker_id))
        .collect();
    if kept.is_empty() {
        log::warn!("no records for speaker `{speaker_id}`");
    }
    kept
}

fn normalize_label(s: &str) -> alloc::string::String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementOutcome<T> {
    pub kept: Vec<T>,
    /// Records dropped because one of the two labels was absent.
    pub missing_labels: usize,
}

/// Keeps records whose annotated and predicted emotions agree after
/// trimming and lowercasing.
pub fn filter_by_emotion_agreement<T: UtteranceMeta>(records: Vec<T>) -> AgreementOutcome<T> {
    let mut missing_labels = 0;
    let kept = records
        .into_iter()
        .filter(|r| match (r.emotion_annotated(), r.emotion_predicted()) {
            (Some(a), Some(p)) => normalize_label(a) == normalize_label(p),
            _ => {
                missing_labels += 1;
                false
            }
        })
        .collect();
    if missing_labels > 0 {
        log::warn!("{missing_labels} records dropped for missing emotion labels");
    }
    AgreementOutcome { kept, missing_labels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Partition sizes by record count.
    #[default]
    Count,
    /// Partition by cumulative audio duration; every record needs one.
    Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_fraction: train,
            dev_fraction: dev,
            test_fraction: test,
            seed,
            mode: SplitMode::Count,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_mode(mut self, mode: SplitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.dev_fraction, self.test_fraction];
        if f.iter().any(|x| x.is_nan() || *x <= 0.0) {
            return Err(Error::InvalidConfig("split fractions must be positive".into()));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(alloc::format!(
                "split fractions sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

// Guards floor() against products like 0.1 * 30 landing just under an integer.
const FLOOR_SLACK: f64 = 1e-9;

/// Seeded shuffle, then a contiguous train/dev/test partition.
///
/// Count mode floors the train and dev sizes and gives the remainder to
/// test. Duration mode walks the shuffled records and assigns each one by
/// the cumulative duration before it.
pub fn split<T: UtteranceMeta>(mut records: Vec<T>, spec: &SplitSpec) -> Result<Split<T>> {
    spec.validate()?;
    let n = records.len();
    if n < 3 {
        return Err(Error::TooFewRecords(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    records.shuffle(&mut rng);

    let (n_train, n_dev) = match spec.mode {
        SplitMode::Count => {
            let train = libm::floor(n as f64 * spec.train_fraction + FLOOR_SLACK) as usize;
            let dev = libm::floor(n as f64 * spec.dev_fraction + FLOOR_SLACK) as usize;
            (train.min(n), dev.min(n - train.min(n)))
        }
        SplitMode::Duration => {
            let durations = records
                .iter()
                .map(|r| r.duration_secs().filter(|d| d.is_finite() && *d >= 0.0))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::InvalidConfig("duration split needs a duration on every record".into()))?;
            let total: f64 = durations.iter().sum();
            let train_end = total * spec.train_fraction;
            let dev_end = total * (spec.train_fraction + spec.dev_fraction);
            let (mut train, mut dev, mut acc) = (0, 0, 0.0);
            for d in durations {
                if acc < train_end - FLOOR_SLACK {
                    train += 1;
                } else if acc < dev_end - FLOOR_SLACK {
                    dev += 1;
                }
                acc += d;
            }
            (train, dev)
        }
    };

    let test = records.split_off(n_train + n_dev);
    let dev = records.split_off(n_train);
    Ok(Split {
        train: records,
        dev,
        test,
    })
}
