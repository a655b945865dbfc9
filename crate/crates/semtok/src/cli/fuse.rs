use semtok_core::fusion::{fuse_global, fuse_sequential, FusionConfig, MaskPair, ProjectionMatrix};
use semtok_core::strategies::Strategy;
use semtok_core::Matrix;

use super::extract::{semantic_matrix, token_key};
use super::{file_stem, Batch, FuseArgs, FuseMode, Report};
use crate::manifest::{keys, UtteranceRecord};
use crate::npy::Dtype;
use crate::{load_matrix, Error, Result};

/// FNV-1a, so each row gets its own dropout stream from one `--seed`.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn validate(args: &FuseArgs) -> Result<Strategy> {
    let strategy = args.strategy.strategy();
    match (args.mode, strategy.is_global()) {
        (FuseMode::Add, false) => {
            return Err(Error::Usage(format!(
                "--mode add needs a global strategy, got `{strategy}`"
            )))
        }
        (FuseMode::Att, true) => return Err(Error::Usage(format!("--mode att needs tex or pho, got `{strategy}`"))),
        _ => {}
    }
    let mut cfg = FusionConfig::for_width(1);
    cfg.mask_fill = args.mask_fill;
    cfg.dropout_p = args.dropout;
    cfg.train_mode = args.dropout > 0.0;
    if let Some(g) = args.gamma {
        cfg.gamma = g;
    }
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    Ok(strategy)
}

struct Fuser<'a> {
    args: &'a FuseArgs,
    strategy: Strategy,
    projection: Option<ProjectionMatrix>,
    seeded: bool,
}

impl Fuser<'_> {
    fn projection_for(&mut self, d_model: usize, d_sem: usize) -> Result<&ProjectionMatrix> {
        if self.projection.is_none() {
            self.projection = Some(ProjectionMatrix::seeded(d_model, d_sem, self.args.seed)?);
            self.seeded = true;
        }
        let w = self.projection.as_ref().expect("set above");
        if w.d_in() != d_sem || w.d_out() != d_model {
            return Err(Error::Shape {
                what: "projection (d_model, d_sem) vs row",
                left: (w.d_out(), w.d_in()),
                right: (d_model, d_sem),
            });
        }
        Ok(w)
    }

    fn row(&mut self, batch: &Batch, rec: &UtteranceRecord) -> Result<(Matrix, Option<Matrix>)> {
        let semantic = match rec.extra_str(&token_key(self.strategy)) {
            Some(p) => load_matrix(batch.path(p))?,
            None => semantic_matrix(batch, rec, self.strategy)?,
        };
        let acoustic_path = rec
            .extra_str(keys::ACOUSTIC_PATH)
            .ok_or_else(|| Error::MissingField(keys::ACOUSTIC_PATH.into()))?;
        let acoustic = load_matrix(batch.path(acoustic_path))?;
        let w = self.projection_for(acoustic.cols(), semantic.cols())?;
        let projected = w.apply_rows(&semantic)?;
        match self.args.mode {
            FuseMode::Add => Ok((fuse_global(&acoustic, projected.row(0))?.matrix, None)),
            FuseMode::Att => {
                let mut cfg = FusionConfig::for_width(acoustic.cols());
                cfg.mask_fill = self.args.mask_fill;
                cfg.dropout_p = self.args.dropout;
                cfg.train_mode = self.args.dropout > 0.0;
                cfg.rng_seed = self.args.seed ^ fnv1a(&rec.utt_id);
                if let Some(g) = self.args.gamma {
                    cfg.gamma = g;
                }
                let fused = fuse_sequential(&acoustic, &projected, &cfg, &MaskPair::none())?;
                Ok((fused.matrix, fused.attention))
            }
        }
    }
}

pub(super) fn run(args: &FuseArgs) -> Result<Report> {
    let strategy = validate(args)?;
    let projection = match &args.projection {
        Some(p) => Some(ProjectionMatrix::new(load_matrix(p)?)?),
        None => None,
    };
    let batch = Batch::open(&args.batch)?;
    let mut fuser = Fuser {
        args,
        strategy,
        projection,
        seeded: false,
    };
    let mode = match args.mode {
        FuseMode::Add => "add",
        FuseMode::Att => "att",
    };
    let s = strategy.name().replace('-', "_");
    let mut report = Report {
        rows: batch.records.len(),
        ..Default::default()
    };
    let mut out = Vec::with_capacity(batch.records.len());
    for rec in &batch.records {
        let mut copy = batch.rebased(rec);
        let stem = file_stem(&rec.utt_id);
        let fused_name = format!("{stem}.{}.{mode}.fused.npy", strategy.name());
        let attn_name = format!("{stem}.{}.attn.npy", strategy.name());
        let written = fuser.row(&batch, rec).and_then(|(fused, attn)| {
            batch.save(&fused, Dtype::F32, &fused_name, &mut report)?;
            if let Some(a) = &attn {
                batch.save(a, Dtype::F32, &attn_name, &mut report)?;
            }
            Ok(attn.is_some())
        });
        match written {
            Ok(has_attn) => {
                copy.set_extra(format!("fused_{s}_{mode}_path"), fused_name);
                if has_attn {
                    copy.set_extra(format!("attention_{s}_path"), attn_name);
                }
            }
            Err(e) => report.fail(&rec.utt_id, e),
        }
        out.push(copy);
    }
    if fuser.seeded {
        let w = fuser.projection.as_ref().expect("seeded projection exists");
        batch.save(w.weights(), Dtype::F64, "projection.npy", &mut report)?;
    }
    batch.write_records(&out, "manifest.jsonl", &mut report)?;
    log::info!(
        "{strategy}/{mode}: {} rows, {} failed",
        report.rows,
        report.failures.len()
    );
    Ok(report)
}
