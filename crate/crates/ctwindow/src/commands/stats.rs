use ctwindow_core::error::Error as CoreError;
use ctwindow_core::stats::{
    case_window, classify_ce_percentile, classify_difficulty, derive_aug_ranges,
    foreground_moments, AugRanges, CeTail, DifficultyFlags, DifficultyThresholds,
    MomentAccumulator, PooledSamples, RangeMethod,
};
use ctwindow_core::volume::{LIVER, TUMOR};
use ctwindow_core::ViewingWindow;
use rayon::prelude::*;
use serde::Serialize;

use super::{pool, thresholds};
use crate::cli::{ClassifyArgs, LabelArg, StatsArgs};
use crate::corpus::{discover, Case};
use crate::ctv::{read_mask, read_volume};
use crate::error::{Context, Result};
use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::report::{write_csv, write_json};

#[derive(Debug, Serialize)]
struct CaseStats {
    case_id: String,
    width: f64,
    level: f64,
    coverage: f64,
    voxel_count: usize,
    flags: Option<DifficultyFlags>,
}

#[derive(Debug, Serialize)]
struct Skipped {
    case_id: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct ZScoreStats {
    voxel_count: u64,
    mean: f64,
    std: f64,
}

#[derive(Debug, Serialize)]
struct StatsReport {
    label: &'static str,
    coverage: f64,
    cases: Vec<CaseStats>,
    skipped: Vec<Skipped>,
    pooled_window: ViewingWindow,
    range_method: RangeMethod,
    derived_ranges: Option<AugRanges>,
    zscore: Option<ZScoreStats>,
    thresholds: DifficultyThresholds,
}

#[derive(Debug, Serialize)]
struct CaseRow<'a> {
    case_id: &'a str,
    width: f64,
    level: f64,
    voxel_count: usize,
}

struct CaseOutput {
    estimate: std::result::Result<CaseStats, String>,
    values: Vec<f32>,
    moments: Option<MomentAccumulator>,
}

fn record_inputs(cases: &[Case], manifest: &mut ManifestBuilder) -> Result<()> {
    for c in cases {
        manifest.input(&c.image)?;
        manifest.input(&c.mask)?;
    }
    Ok(())
}

fn stats_case(c: &Case, label: u8, coverage: f64, th: &DifficultyThresholds) -> Result<CaseOutput> {
    let v = read_volume(&c.image)?;
    let m = read_mask(&c.mask)?;
    m.check_aligned(&v).context(|| c.id.clone())?;
    let estimate = match case_window(&c.id, &v, &m, label, coverage) {
        Ok(e) => Ok(CaseStats {
            case_id: c.id.clone(),
            width: e.window.width(),
            level: e.window.level(),
            coverage: e.coverage,
            voxel_count: e.voxel_count,
            flags: classify_difficulty(&v, &m, th).ok(),
        }),
        Err(e @ CoreError::EmptyLabel(_)) => Err(e.to_string()),
        Err(e) => return Err(e).context(|| c.id.clone()),
    };
    Ok(CaseOutput {
        estimate,
        values: m.select(&v, label).collect(),
        moments: foreground_moments(&v, &m).ok(),
    })
}

pub fn stats(a: StatsArgs, jobs: Option<usize>) -> Result<()> {
    let mut manifest = ManifestBuilder::new("stats");
    let cases = discover(&a.images, a.masks.as_deref())?;
    record_inputs(&cases, &mut manifest)?;
    let (label, label_name) = match a.label {
        LabelArg::Liver => (LIVER, "liver"),
        LabelArg::Tumor => (TUMOR, "tumor"),
    };
    let th = thresholds(&a.thresholds);
    let outputs = pool(jobs)?.install(|| {
        cases
            .par_iter()
            .map(|c| stats_case(c, label, a.coverage, &th))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut pooled = PooledSamples::new();
    let mut moments = MomentAccumulator::default();
    let mut per_case = Vec::new();
    let mut skipped = Vec::new();
    for (c, out) in cases.iter().zip(outputs) {
        pooled.extend(out.values);
        if let Some(m) = out.moments {
            moments.merge(&m);
        }
        match out.estimate {
            Ok(e) => per_case.push(e),
            Err(reason) => skipped.push(Skipped {
                case_id: c.id.clone(),
                reason,
            }),
        }
    }
    let pooled_window = pooled
        .window(a.coverage)
        .context(|| "pooled window".into())?;
    let method = RangeMethod::QuantileSpan { alpha: a.alpha };
    let base = match (a.base_width, a.base_level) {
        (Some(w), Some(l)) => Some(ViewingWindow::new(w, l).context(|| "base window".into())?),
        _ => None,
    };
    let estimates: Vec<_> = per_case
        .iter()
        .map(|c| {
            Ok(ctwindow_core::stats::CaseWindowEstimate {
                case_id: c.case_id.clone(),
                window: ViewingWindow::new(c.width, c.level).context(|| c.case_id.clone())?,
                coverage: c.coverage,
                label,
                voxel_count: c.voxel_count,
            })
        })
        .collect::<Result<_>>()?;
    let derived_ranges = match derive_aug_ranges(&estimates, method, base) {
        Ok(r) => Some(r),
        Err(CoreError::InsufficientCases { .. }) => None,
        Err(e) => return Err(e).context(|| "derived ranges".into()),
    };
    let zscore = (moments.count() > 0).then(|| ZScoreStats {
        voxel_count: moments.count(),
        mean: moments.mean(),
        std: moments.std(),
    });

    if let Some(csv) = &a.csv {
        write_csv(
            csv,
            per_case.iter().map(|c| CaseRow {
                case_id: &c.case_id,
                width: c.width,
                level: c.level,
                voxel_count: c.voxel_count,
            }),
        )?;
        manifest.output(csv);
    }
    let report = StatsReport {
        label: label_name,
        coverage: a.coverage,
        cases: per_case,
        skipped,
        pooled_window,
        range_method: method,
        derived_ranges,
        zscore,
        thresholds: th,
    };
    write_json(&a.out, &report)?;
    manifest.output(&a.out);
    manifest.finish(&manifest_path_for(&a.out, false))?;
    println!(
        "{} case(s), pooled window W={} L={}",
        report.cases.len(),
        pooled_window.width(),
        pooled_window.level()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ClassifiedCase {
    case_id: String,
    #[serde(flatten)]
    flags: DifficultyFlags,
    ce_tail: Option<CeTail>,
}

#[derive(Debug, Serialize)]
struct ClassifyReport {
    thresholds: DifficultyThresholds,
    percentile: Option<f64>,
    cases: Vec<ClassifiedCase>,
}

#[derive(Debug, Serialize)]
struct ClassifyRow<'a> {
    case_id: &'a str,
    low_hu_contrast: bool,
    mean_tissue_difference: Option<f64>,
    poor_ce_timing: bool,
    median_liver_hu: f64,
    tumor_present: bool,
    ce_tail: Option<CeTail>,
}

pub fn classify(a: ClassifyArgs, jobs: Option<usize>) -> Result<()> {
    let mut manifest = ManifestBuilder::new("classify");
    let cases = discover(&a.images, a.masks.as_deref())?;
    record_inputs(&cases, &mut manifest)?;
    let th = thresholds(&a.thresholds);
    let flags = pool(jobs)?.install(|| {
        cases
            .par_iter()
            .map(|c| {
                let v = read_volume(&c.image)?;
                let m = read_mask(&c.mask)?;
                classify_difficulty(&v, &m, &th).context(|| c.id.clone())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let tails = match a.percentile {
        Some(f) => {
            let medians: Vec<_> = cases
                .iter()
                .zip(&flags)
                .map(|(c, f)| (c.id.clone(), f.median_liver_hu))
                .collect();
            classify_ce_percentile(&medians, f)
                .context(|| "percentile".into())?
                .into_iter()
                .map(Some)
                .collect()
        }
        None => vec![None; cases.len()],
    };
    let classified: Vec<ClassifiedCase> = cases
        .iter()
        .zip(flags)
        .zip(tails)
        .map(|((c, flags), ce_tail)| ClassifiedCase {
            case_id: c.id.clone(),
            flags,
            ce_tail,
        })
        .collect();
    if let Some(csv) = &a.csv {
        write_csv(
            csv,
            classified.iter().map(|c| ClassifyRow {
                case_id: &c.case_id,
                low_hu_contrast: c.flags.low_hu_contrast,
                mean_tissue_difference: c.flags.mean_tissue_difference,
                poor_ce_timing: c.flags.poor_ce_timing,
                median_liver_hu: c.flags.median_liver_hu,
                tumor_present: c.flags.tumor_present,
                ce_tail: c.ce_tail,
            }),
        )?;
        manifest.output(csv);
    }
    let report = ClassifyReport {
        thresholds: th,
        percentile: a.percentile,
        cases: classified,
    };
    write_json(&a.out, &report)?;
    manifest.output(&a.out);
    manifest.finish(&manifest_path_for(&a.out, false))?;
    let low = report
        .cases
        .iter()
        .filter(|c| c.flags.low_hu_contrast)
        .count();
    let poor = report
        .cases
        .iter()
        .filter(|c| c.flags.poor_ce_timing)
        .count();
    println!(
        "{} case(s): {low} low-HU-contrast, {poor} poor-CE-timing",
        report.cases.len()
    );
    Ok(())
}
