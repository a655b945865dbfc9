//! Numerical self-verification suites behind `semtok selfcheck`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semtok_core::metrics::edit_stats;
use semtok_core::strategies::{extract_pca, pca_axis};
use semtok_core::Matrix;

use crate::npy::{decode, encode, Dtype};
use crate::oracle::{
    abs_cosine, all_sequences, brute_force_edit_distance, covariance_top_axis, gradient_check, random_grad_instance,
    random_pca_instance,
};

pub const GRADIENT_TOL: f64 = 1e-5;
pub const GRADIENT_MAX_DIM: usize = 8;
pub const PCA_COSINE_TOL: f64 = 1e-8;
pub const PCA_RANGE_TOL: f64 = 1e-9;
pub const PCA_INSTANCES: u64 = 50;
pub const PCA_MAX_DIM: usize = 10;
pub const EDIT_MAX_LEN: usize = 6;
pub const ROUND_TRIPS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Largest error observed, in the suite's own unit.
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub detail: String,
}

impl fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<10} cases={:<8} max_error={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_error,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, "  {}", self.detail)?;
        }
        Ok(())
    }
}

struct Tracker {
    max_error: f64,
    worst_seed: Option<u64>,
    first_failure: Option<String>,
}

impl Tracker {
    fn new() -> Self {
        Self {
            max_error: 0.0,
            worst_seed: None,
            first_failure: None,
        }
    }

    fn observe(&mut self, seed: u64, err: f64, tol: f64) {
        if err > self.max_error || err.is_nan() {
            self.max_error = if err.is_nan() { f64::INFINITY } else { err };
            self.worst_seed = Some(seed);
        }
        if (err.is_nan() || err > tol) && self.first_failure.is_none() {
            self.first_failure = Some(format!("seed {seed}: error {err:.3e}"));
        }
    }

    fn fail(&mut self, seed: u64, msg: String) {
        self.max_error = f64::INFINITY;
        if self.first_failure.is_none() {
            self.first_failure = Some(format!("seed {seed}: {msg}"));
        }
    }

    fn finish(self, name: &'static str, tol: f64, cases: usize) -> SuiteResult {
        let passed = self.first_failure.is_none();
        let detail = match (self.first_failure, self.worst_seed) {
            (Some(f), _) => format!("first failure at {f}"),
            (None, Some(s)) => format!("worst seed {s}"),
            (None, None) => String::new(),
        };
        SuiteResult {
            name,
            passed,
            max_error: self.max_error,
            tolerance: tol,
            cases,
            detail,
        }
    }
}

/// Analytic vs. central-difference gradients of sequential fusion.
pub fn gradient_suite(seeds: u64) -> SuiteResult {
    let mut t = Tracker::new();
    for seed in 0..seeds {
        match gradient_check(&random_grad_instance(seed, GRADIENT_MAX_DIM)) {
            Ok(err) => t.observe(seed, err, GRADIENT_TOL),
            Err(e) => t.fail(seed, e.to_string()),
        }
    }
    t.finish("gradient", GRADIENT_TOL, seeds as usize)
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// PCA axis against a dense covariance eigendecomposition, plus the range
/// of the rescaled token. The error is the larger of `1 - |cos|` and the
/// relative min/max mismatch.
pub fn pca_suite(instances: u64) -> SuiteResult {
    let mut t = Tracker::new();
    for seed in 0..instances {
        let h = random_pca_instance(seed, PCA_MAX_DIM);
        let result = pca_axis(&h).and_then(|axis| extract_pca(&h).map(|tok| (axis, tok)));
        let (axis, token) = match result {
            Ok(v) => v,
            Err(e) => {
                t.fail(seed, e.to_string());
                continue;
            }
        };
        let (oracle, _) = covariance_top_axis(&h);
        let cos_err = 1.0 - abs_cosine(&axis, &oracle);
        let tmin = token.vector.iter().copied().fold(f64::INFINITY, f64::min);
        let tmax = token.vector.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = (h.min_value().unwrap(), h.max_value().unwrap());
        // A one-entry (or constant) axis has no spread to stretch; it sits
        // at the midpoint and is exempt from the range check.
        let flat = axis.iter().all(|a| *a == axis[0]);
        let range_err = if flat {
            0.0
        } else {
            relative(tmin, lo).max(relative(tmax, hi))
        };
        t.observe(seed, cos_err.max(0.0), PCA_COSINE_TOL);
        if range_err > PCA_RANGE_TOL {
            t.fail(seed, format!("rescaled range off by {range_err:.3e}"));
        }
    }
    t.finish("pca", PCA_COSINE_TOL, instances as usize)
}

/// Every pair of sequences over `{0, 1, 2}` up to length `EDIT_MAX_LEN`.
/// The error is the number of pairs where S+D+I differs from the
/// brute-force minimum.
pub fn edit_suite() -> SuiteResult {
    let seqs = all_sequences(&[0u8, 1, 2], EDIT_MAX_LEN);
    let mut mismatches = 0usize;
    let mut first = None;
    for (i, a) in seqs.iter().enumerate() {
        for (j, b) in seqs.iter().enumerate() {
            let s = edit_stats(a, b);
            let ok = s.errors() == brute_force_edit_distance(a, b)
                && s.ref_len == a.len()
                && a.len() - s.deletions + s.insertions == b.len();
            if !ok {
                mismatches += 1;
                first.get_or_insert((i, j));
            }
        }
    }
    SuiteResult {
        name: "edit",
        passed: mismatches == 0,
        max_error: mismatches as f64,
        tolerance: 0.0,
        cases: seqs.len() * seqs.len(),
        detail: match first {
            Some((i, j)) => format!("first mismatch {:?} vs {:?}", seqs[i], seqs[j]),
            None => String::new(),
        },
    }
}

fn random_matrix(rng: &mut ChaCha8Rng) -> Matrix {
    let rows = rng.random_range(1..=12);
    let cols = rng.random_range(1..=12);
    let v = (0..rows * cols)
        .map(|_| {
            let mag = 10f64.powi(rng.random_range(-30..30));
            rng.random_range(-1.0..1.0) * mag
        })
        .collect();
    Matrix::new(rows, cols, v).expect("finite")
}

/// `.npy` encode/decode in both dtypes. An `f64` matrix must come back
/// bitwise; `f32` storage must come back as the `f32` rounding of each
/// value; encoding twice must give identical bytes.
pub fn round_trip_suite(count: u64) -> SuiteResult {
    let mut t = Tracker::new();
    for seed in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_matrix(&mut rng);
        let bytes = encode(&m, Dtype::F64);
        if bytes != encode(&m, Dtype::F64) {
            t.fail(seed, "two encodings differ".into());
            continue;
        }
        match decode(&bytes) {
            Ok((back, Dtype::F64)) if back.shape() == m.shape() => {
                let same = back
                    .as_slice()
                    .iter()
                    .zip(m.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    t.fail(seed, "f64 values changed".into());
                }
            }
            Ok(_) => t.fail(seed, "f64 dtype or shape changed".into()),
            Err(e) => t.fail(seed, e.to_string()),
        }
        match decode(&encode(&m, Dtype::F32)) {
            Ok((back, Dtype::F32)) => {
                let same = back
                    .as_slice()
                    .iter()
                    .zip(m.as_slice())
                    .all(|(a, b)| a.to_bits() == (*b as f32 as f64).to_bits());
                if !same {
                    t.fail(seed, "f32 values changed".into());
                }
            }
            Ok(_) => t.fail(seed, "f32 dtype changed".into()),
            Err(e) => t.fail(seed, e.to_string()),
        }
    }
    t.finish("roundtrip", 0.0, count as usize)
}

/// Runs every suite. The gradient suite uses `gradient_seeds` instances.
pub fn run_all(gradient_seeds: u64) -> Vec<SuiteResult> {
    vec![
        gradient_suite(gradient_seeds),
        pca_suite(PCA_INSTANCES),
        edit_suite(),
        round_trip_suite(ROUND_TRIPS),
    ]
}
