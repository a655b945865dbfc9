//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semtok::cli::{main_with_args, EXIT_OK};
use semtok::fixtures::{write_fixtures, FixtureSpec};
use semtok::npy::{read_array_with_dtype, write_array, Dtype};
use semtok::oracle::{gradient_check, random_grad_instance};
use semtok::selfcheck::{edit_suite, pca_suite};
use semtok_core::fusion::{fuse_global, fuse_sequential, FusionConfig, MaskPair};
use semtok_core::metrics::{
    dtw_align, format_mean_std, mcd, mel_cepstra_from_audio, wer, McdOptions, MeanStd, MelCepstra, MelConfig,
    TextNormalizer,
};
use semtok_core::strategies::{extract_ave, extract_eis_word};
use semtok_core::Matrix;

const GRAD_TOL: f64 = 1e-5;
const GRAD_SECS: Duration = Duration::from_secs(10);
const ROW_SUM_TOL: f64 = 1e-9;
const MASKED_WEIGHT_MAX: f64 = 1e-30;
const UNIFORM_TOL: f64 = 1e-6;
const EIS_MEAN_TOL: f64 = 1e-12;
const MCD_ANCHOR: f64 = 6.141851;
const MCD_ANCHOR_TOL: f64 = 1e-5;
const E2E_SECS: Duration = Duration::from_secs(30);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let v = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::new(rows, cols, v).unwrap()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let mut worst = (0.0f64, 0u64);
    for seed in 0..100 {
        let err = gradient_check(&random_grad_instance(seed, 8)).map_err(|e| format!("seed {seed}: {e}"))?;
        if err > worst.0 {
            worst = (err, seed);
        }
        check(err < GRAD_TOL, || format!("seed {seed}: relative error {err:.3e}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < GRAD_SECS, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "max rel err {:.2e} (seed {}), {:.2?}",
        worst.0, worst.1, elapsed
    ))
}

fn attention() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut max_sum_err, mut max_masked, mut max_uniform_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut wide_uniform_err = 0.0f64;
    for case in 0..300 {
        let (t, m, d) = (
            rng.random_range(1..=8),
            rng.random_range(1..=8),
            rng.random_range(1..=8),
        );
        // |q.k| <= d * a^2 = 100 with gamma = 1.
        let a = (100.0 / d as f64).sqrt();
        let q = random_matrix(&mut rng, t, d, a);
        let kv = random_matrix(&mut rng, m, d, a);
        let mut src: Vec<bool> = (0..m).map(|_| rng.random_bool(0.6)).collect();
        src[rng.random_range(0..m)] = true;
        let masks = MaskPair {
            tgt_mask: None,
            src_mask: Some(src.clone()),
        };
        let cfg = FusionConfig {
            gamma: 1.0,
            ..FusionConfig::for_width(d)
        };
        let w = fuse_sequential(&q, &kv, &cfg, &masks)
            .map_err(|e| e.to_string())?
            .attention
            .unwrap();
        for i in 0..t {
            let sum: f64 = w.row(i).iter().sum();
            max_sum_err = max_sum_err.max((sum - 1.0).abs());
            for j in (0..m).filter(|&j| !src[j]) {
                max_masked = max_masked.max(w.get(i, j));
            }
        }
        let hot = FusionConfig { gamma: 1e6, ..cfg };
        let valid = src.iter().filter(|v| **v).count() as f64;
        let uniform_err = |q: &Matrix, kv: &Matrix| -> Result<f64, String> {
            let w = fuse_sequential(q, kv, &hot, &masks)
                .map_err(|e| e.to_string())?
                .attention
                .unwrap();
            let mut worst = 0.0f64;
            for i in 0..t {
                for (j, &ok) in src.iter().enumerate() {
                    if ok {
                        worst = worst.max((w.get(i, j) - 1.0 / valid).abs());
                    }
                }
            }
            Ok(worst)
        };
        // Raw scores in [-100, 100] leave first-order drift up to 200 / (4 * 1e6)
        // at gamma = 1e6, so uniformity is checked on unit-scale scores
        // (|q.k| <= 1) and the wide-range drift is only reported.
        wide_uniform_err = wide_uniform_err.max(uniform_err(&q, &kv)?);
        let unit = 1.0 / (d as f64).sqrt();
        let (qu, kvu) = (random_matrix(&mut rng, t, d, unit), random_matrix(&mut rng, m, d, unit));
        max_uniform_err = max_uniform_err.max(uniform_err(&qu, &kvu)?);
        check(max_sum_err <= ROW_SUM_TOL, || {
            format!("case {case}: row sum off by {max_sum_err:.3e}")
        })?;
        check(max_masked < MASKED_WEIGHT_MAX, || {
            format!("case {case}: masked weight {max_masked:.3e}")
        })?;
        check(max_uniform_err <= UNIFORM_TOL, || {
            format!("case {case}: uniform off by {max_uniform_err:.3e}")
        })?;
    }
    Ok(format!(
        "row-sum err {max_sum_err:.1e}, masked max {max_masked:.1e}, uniform err {max_uniform_err:.1e} \
         (|q.k| <= 100 at gamma 1e6 drifts {wide_uniform_err:.1e})"
    ))
}

fn global_add() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for t in [1usize, 2, 17] {
        let d = 8;
        let mut v: Vec<f64> = (0..t * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        v[0] = -0.0;
        let acoustic = Matrix::new(t, d, v).unwrap();
        let zero = fuse_global(&acoustic, &vec![0.0; d]).map_err(|e| e.to_string())?.matrix;
        let same = zero
            .as_slice()
            .iter()
            .zip(acoustic.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        check(same, || format!("t={t}: zero token changed the input"))?;

        let token: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fused = fuse_global(&acoustic, &token).map_err(|e| e.to_string())?.matrix;
        for i in 0..t {
            for (j, s) in token.iter().enumerate() {
                let want = acoustic.get(i, j) + s;
                check(fused.get(i, j).to_bits() == want.to_bits(), || {
                    format!("t={t}: broadcast wrong at ({i},{j})")
                })?;
            }
        }
    }
    Ok("t in {1, 2, 17}, bitwise".into())
}

fn pca() -> Outcome {
    let r = pca_suite(50);
    if r.passed {
        Ok(format!("50 instances, max 1-|cos| {:.1e}", r.max_error))
    } else {
        Err(r.detail)
    }
}

fn eis() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let d = rng.random_range(1..=12);
        let parts: Vec<Matrix> = (0..3)
            .map(|_| {
                let n = rng.random_range(1..=5);
                random_matrix(&mut rng, n, d, 4.0)
            })
            .collect();
        let word = extract_eis_word(&parts[0], &parts[1], &parts[2]).map_err(|e| e.to_string())?;
        let stacked = Matrix::vstack(&[&parts[0], &parts[1], &parts[2]]).unwrap();
        let ave = extract_ave(&stacked).map_err(|e| e.to_string())?;
        check(word.vector == ave.vector, || {
            format!("triple {case}: differs from AVE of the concatenation")
        })?;
        // Independent column mean, accumulated per part.
        let total = stacked.rows() as f64;
        for j in 0..d {
            let s: f64 = parts
                .iter()
                .map(|p| (0..p.rows()).map(|i| p.get(i, j)).sum::<f64>())
                .sum();
            worst = worst.max((s / total - word.vector[j]).abs());
        }
        check(worst <= EIS_MEAN_TOL, || {
            format!("triple {case}: mean off by {worst:.3e}")
        })?;
    }
    Ok(format!(
        "20 triples, equal to AVE bitwise, |naive mean diff| {worst:.1e}"
    ))
}

fn edit() -> Outcome {
    let r = edit_suite();
    if !r.passed {
        return Err(r.detail);
    }
    let w = wer("hello world", "hello word", &TextNormalizer::default()).map_err(|e| e.to_string())?;
    check(w == 0.5, || format!("WER {w}"))?;
    Ok(format!(
        "{} pairs exhaustive, WER(hello world, hello word) = {w}",
        r.cases
    ))
}

fn cepstra(rows: &[Vec<f64>]) -> MelCepstra {
    MelCepstra::new(Matrix::from_rows(rows).unwrap(), 22050, 256).unwrap()
}

fn mcd_anchor() -> Outcome {
    let mut a = vec![0.0; 13];
    a[1] = 0.6;
    a[2] = 0.8;
    let unit = mcd(&cepstra(&[a]), &cepstra(&[vec![0.0; 13]]), McdOptions::default()).map_err(|e| e.to_string())?;
    check((unit - MCD_ANCHOR).abs() <= MCD_ANCHOR_TOL, || {
        format!("unit pair gives {unit}")
    })?;

    let pcm: Vec<f64> = (0..8000)
        .map(|i| (i as f64 * 0.05).sin() * 0.3 + (i as f64 * 0.013).cos() * 0.1)
        .collect();
    let c = mel_cepstra_from_audio(&pcm, &MelConfig::default()).map_err(|e| e.to_string())?;
    let self_mcd = mcd(&c, &c, McdOptions::default()).map_err(|e| e.to_string())?;
    check(self_mcd == 0.0, || format!("mcd(a, a) = {self_mcd}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..50 {
        let n = rng.random_range(1..=12);
        let mk = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..13).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect()
        };
        let (x, y) = (cepstra(&mk(&mut rng)), cepstra(&mk(&mut rng)));
        let cost = dtw_align(&x, &y).map_err(|e| e.to_string())?.cost;
        let diagonal: f64 = (0..n)
            .map(|i| {
                let (p, q) = (x.frame(i), y.frame(i));
                p[1..]
                    .iter()
                    .zip(&q[1..])
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt()
            })
            .sum();
        check(cost <= diagonal + 1e-12, || {
            format!("case {case}: DTW {cost} > diagonal {diagonal}")
        })?;
    }
    Ok(format!(
        "unit pair {unit:.6} dB, mcd(a,a) = 0, DTW <= diagonal on 50 cases"
    ))
}

fn round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..1000u32 {
        let (r, c) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let dtype = if case % 2 == 0 { Dtype::F64 } else { Dtype::F32 };
        let v: Vec<f64> = (0..r * c)
            .map(|_| {
                let x = rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-20..20));
                if dtype == Dtype::F32 {
                    x as f32 as f64
                } else {
                    x
                }
            })
            .collect();
        let m = Matrix::new(r, c, v).unwrap();
        let (p1, p2) = (dir.path().join("a.npy"), dir.path().join("b.npy"));
        write_array(&m, dtype, &p1).map_err(|e| e.to_string())?;
        write_array(&m, dtype, &p2).map_err(|e| e.to_string())?;
        let (back, dt) = read_array_with_dtype(&p1).map_err(|e| e.to_string())?;
        let bitwise = back.shape() == m.shape()
            && back
                .as_slice()
                .iter()
                .zip(m.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        check(dt == dtype && bitwise, || format!("case {case}: values changed"))?;
        let same = fs::read(&p1).map_err(|e| e.to_string())? == fs::read(&p2).map_err(|e| e.to_string())?;
        check(same, || format!("case {case}: two writes differ"))?;
    }
    let table = format_mean_std(7.32, 0.61, 2);
    check(table == "7.32 ± 0.61", || format!("formatter gave {table:?}"))?;
    let s = MeanStd::from_values(&[6.71, 7.93]).unwrap().display(2);
    check(s == "7.32 ± 0.86", || format!("summary gave {s:?}"))?;
    Ok(format!("1000 files bitwise, repeat writes identical, {table:?}"))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn pipeline(root: &Path) -> Result<(), String> {
    let manifest = write_fixtures(&root.join("fx"), &FixtureSpec::default()).map_err(|e| e.to_string())?;
    let m = manifest.to_str().unwrap();
    let step = |args: Vec<String>| -> Result<(), String> {
        let code = main_with_args(std::iter::once("semtok".to_string()).chain(args.iter().cloned()));
        check(code == EXIT_OK, || format!("`{}` exited {code}", args.join(" ")))
    };
    let s = |x: &str| x.to_string();
    for name in ["ave", "pca", "last", "eis-word", "eis-sentence", "tex", "pho"] {
        let ex = root.join(format!("extract-{name}"));
        step(vec![
            s("extract-token"),
            s("--manifest"),
            s(m),
            s("--out-dir"),
            s(ex.to_str().unwrap()),
            s("--strategy"),
            s(name),
        ])?;
        let mode = if matches!(name, "tex" | "pho") { "att" } else { "add" };
        let mut fuse = vec![
            s("fuse"),
            s("--manifest"),
            s(ex.join("manifest.jsonl").to_str().unwrap()),
            s("--out-dir"),
            s(root.join(format!("fuse-{name}")).to_str().unwrap()),
            s("--strategy"),
            s(name),
            s("--mode"),
            s(mode),
            s("--seed"),
            s("17"),
        ];
        if mode == "att" {
            fuse.extend([s("--dropout"), s("0.1")]);
        }
        step(fuse)?;
    }
    step(vec![
        s("eval"),
        s("--manifest"),
        s(m),
        s("--out-dir"),
        s(root.join("eval").to_str().unwrap()),
    ])
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (a, b) = (dir.path().join("run1"), dir.path().join("run2"));
    pipeline(&a)?;
    pipeline(&b)?;
    let elapsed = start.elapsed();
    let (fa, fb) = (files_under(&a), files_under(&b));
    check(fa == fb, || "runs produced different file sets".into())?;
    for f in &fa {
        let same = fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap();
        check(same, || format!("{} differs between runs", f.display()))?;
    }
    let fused = fa
        .iter()
        .filter(|p| p.to_string_lossy().ends_with(".fused.npy"))
        .count();
    check(fused == 35, || format!("expected 35 fused arrays, found {fused}"))?;
    check(elapsed < E2E_SECS, || format!("two runs took {elapsed:?}"))?;
    Ok(format!(
        "7 strategies, {} files bitwise identical across reruns, {elapsed:.2?} for both",
        fa.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fusion gradient check", gradient),
        ("attention invariants", attention),
        ("global-add identity", global_add),
        ("PCA oracle equivalence", pca),
        ("EIS equivalence", eis),
        ("edit-distance oracle", edit),
        ("MCD unit anchor", mcd_anchor),
        ("file-format round-trip", round_trip),
        ("end-to-end dry run", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
