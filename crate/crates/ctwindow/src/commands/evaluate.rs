use std::path::{Path, PathBuf};

use ctwindow_core::metrics::{
    dice, lesion_instance_metrics, wilcoxon_signed_rank, Connectivity, F1Mode, InstanceConfig,
    SignificanceResult,
};
use ctwindow_core::stats::{classify_difficulty, DifficultyThresholds};
use ctwindow_core::volume::TUMOR;
use rayon::prelude::*;
use serde::Serialize;

use super::{pool, thresholds};
use crate::cli::{ConnectivityArg, EvaluateArgs, F1ModeArg};
use crate::corpus::{find_mask, masks};
use crate::ctv::{read_mask, read_volume};
use crate::error::{Context, Error, Result};
use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::report::{write_csv, write_json, MeanStd};

#[derive(Debug, Clone, Serialize)]
struct CaseMetrics {
    case_id: String,
    tumor_dice: f64,
    liver_dice: f64,
    lesion_f1: f64,
    lesion_recall: f64,
    lesion_precision: f64,
    true_positives: usize,
    false_positives: usize,
    false_negatives: usize,
    low_hu_contrast: Option<bool>,
    poor_ce_timing: Option<bool>,
    baseline_tumor_dice: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SubsetSummary {
    n: usize,
    tumor_dice: MeanStd,
    liver_dice: MeanStd,
    lesion_f1: MeanStd,
    lesion_recall: MeanStd,
    lesion_precision: MeanStd,
    baseline_tumor_dice: Option<MeanStd>,
    /// Paired test of tumor Dice against the baseline.
    significance: Option<SignificanceResult>,
}

#[derive(Debug, Serialize)]
struct Subsets {
    all: SubsetSummary,
    low_hu_contrast: Option<SubsetSummary>,
    poor_ce_timing: Option<SubsetSummary>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    config: InstanceConfig,
    thresholds: DifficultyThresholds,
    cases: Vec<CaseMetrics>,
    aggregate: Subsets,
}

struct Pair {
    id: String,
    gt: PathBuf,
    pred: PathBuf,
    baseline: Option<PathBuf>,
    image: Option<PathBuf>,
}

fn required(dir: &Path, id: &str, what: &str) -> Result<PathBuf> {
    find_mask(dir, id).ok_or_else(|| {
        Error::io(
            dir.join(format!("{id}.ctv")),
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("{what} not found")),
        )
    })
}

fn evaluate_case(
    p: &Pair,
    config: &InstanceConfig,
    th: &DifficultyThresholds,
) -> Result<CaseMetrics> {
    let ctx = || p.id.clone();
    let gt = read_mask(&p.gt)?;
    let pred = read_mask(&p.pred)?;
    let gt_tumor = gt.binary(TUMOR);
    let pred_tumor = pred.binary(TUMOR);
    let tumor_dice = dice(&pred_tumor, &gt_tumor).context(ctx)?;
    let liver_dice = dice(&pred.foreground(), &gt.foreground()).context(ctx)?;
    let lesions = lesion_instance_metrics(&pred_tumor, &gt_tumor, config).context(ctx)?;
    let baseline_tumor_dice = match &p.baseline {
        Some(path) => Some(dice(&read_mask(path)?.binary(TUMOR), &gt_tumor).context(ctx)?),
        None => None,
    };
    let flags = match &p.image {
        Some(path) => Some(classify_difficulty(&read_volume(path)?, &gt, th).context(ctx)?),
        None => None,
    };
    Ok(CaseMetrics {
        case_id: p.id.clone(),
        tumor_dice,
        liver_dice,
        lesion_f1: lesions.f1,
        lesion_recall: lesions.recall,
        lesion_precision: lesions.precision,
        true_positives: lesions.true_positives,
        false_positives: lesions.false_positives,
        false_negatives: lesions.false_negatives,
        low_hu_contrast: flags.as_ref().map(|f| f.low_hu_contrast),
        poor_ce_timing: flags.as_ref().map(|f| f.poor_ce_timing),
        baseline_tumor_dice,
    })
}

fn summarize(cases: &[&CaseMetrics]) -> Result<SubsetSummary> {
    let col =
        |f: fn(&CaseMetrics) -> f64| MeanStd::of(&cases.iter().map(|c| f(c)).collect::<Vec<_>>());
    let baseline: Option<Vec<f64>> = cases.iter().map(|c| c.baseline_tumor_dice).collect();
    let significance = match &baseline {
        Some(b) if !cases.is_empty() => {
            let ours: Vec<f64> = cases.iter().map(|c| c.tumor_dice).collect();
            Some(wilcoxon_signed_rank(&ours, b).context(|| "significance".into())?)
        }
        _ => None,
    };
    Ok(SubsetSummary {
        n: cases.len(),
        tumor_dice: col(|c| c.tumor_dice),
        liver_dice: col(|c| c.liver_dice),
        lesion_f1: col(|c| c.lesion_f1),
        lesion_recall: col(|c| c.lesion_recall),
        lesion_precision: col(|c| c.lesion_precision),
        baseline_tumor_dice: baseline
            .filter(|_| !cases.is_empty())
            .map(|b| MeanStd::of(&b)),
        significance,
    })
}

fn subset(
    cases: &[CaseMetrics],
    flag: fn(&CaseMetrics) -> Option<bool>,
) -> Result<Option<SubsetSummary>> {
    if cases.iter().any(|c| flag(c).is_none()) {
        return Ok(None);
    }
    let members: Vec<&CaseMetrics> = cases.iter().filter(|c| flag(c) == Some(true)).collect();
    summarize(&members).map(Some)
}

pub fn evaluate(a: EvaluateArgs, jobs: Option<usize>) -> Result<()> {
    let mut manifest = ManifestBuilder::new("evaluate");
    let config = InstanceConfig {
        overlap_threshold: a.overlap,
        connectivity: match a.connectivity {
            ConnectivityArg::Six => Connectivity::Face,
            ConnectivityArg::Eighteen => Connectivity::Edge,
            ConnectivityArg::TwentySix => Connectivity::Vertex,
        },
        f1_mode: match a.f1_mode {
            F1ModeArg::Detection => F1Mode::Detection,
            F1ModeArg::Harmonic => F1Mode::Harmonic,
        },
    };
    if !(0.0..1.0).contains(&config.overlap_threshold) {
        return Err(Error::Usage(format!(
            "--overlap {} must lie in [0, 1)",
            config.overlap_threshold
        )));
    }
    let th = thresholds(&a.thresholds);

    let mut pairs = Vec::new();
    for (id, gt) in masks(&a.gt)? {
        let pred = required(&a.pred, &id, "prediction")?;
        let baseline = match &a.baseline {
            Some(dir) => Some(required(dir, &id, "baseline prediction")?),
            None => None,
        };
        let image = a.images.as_ref().map(|d| d.join(format!("{id}.ctv")));
        for p in [Some(&gt), Some(&pred), baseline.as_ref(), image.as_ref()]
            .into_iter()
            .flatten()
        {
            manifest.input(p)?;
        }
        pairs.push(Pair {
            id,
            gt,
            pred,
            baseline,
            image,
        });
    }
    if pairs.is_empty() {
        return Err(Error::Core {
            context: a.gt.display().to_string(),
            source: ctwindow_core::Error::EmptyCorpus,
        });
    }
    let cases = pool(jobs)?.install(|| {
        pairs
            .par_iter()
            .map(|p| evaluate_case(p, &config, &th))
            .collect::<Result<Vec<_>>>()
    })?;

    let all: Vec<&CaseMetrics> = cases.iter().collect();
    let aggregate = Subsets {
        all: summarize(&all)?,
        low_hu_contrast: subset(&cases, |c| c.low_hu_contrast)?,
        poor_ce_timing: subset(&cases, |c| c.poor_ce_timing)?,
    };
    if let Some(csv) = &a.csv {
        write_csv(csv, cases.iter())?;
        manifest.output(csv);
    }
    let report = EvalReport {
        config,
        thresholds: th,
        cases,
        aggregate,
    };
    write_json(&a.out, &report)?;
    manifest.output(&a.out);
    manifest.finish(&manifest_path_for(&a.out, false))?;
    let all = &report.aggregate.all;
    println!(
        "{} case(s): tumor DSC {:.4}, lesion F1 {:.4}",
        all.n,
        all.tumor_dice.mean.unwrap_or(f64::NAN),
        all.lesion_f1.mean.unwrap_or(f64::NAN)
    );
    Ok(())
}
