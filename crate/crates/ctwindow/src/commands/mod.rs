pub mod analysis;
pub mod evaluate;
pub mod phantom;
pub mod stats;
pub mod transform;

use std::path::Path;

use ctwindow_core::intensity::{
    preset_nnunet, preset_unetr, run_pipeline, Anchor, Applied, IntensityTransform, Pipeline,
    TransformKind,
};
use ctwindow_core::stats::DifficultyThresholds;
use ctwindow_core::window::{apply_window, random_windowing, rw_shift_scale};
use ctwindow_core::{
    AugmentationSpec, Normalization, SampledWindow, Stream, ViewingWindow, Volume,
};
use serde::Serialize;

use crate::cli::{Method, NormalizationArg, SpecFlags, ThresholdFlags, TransformFlags};
use crate::error::{Context, Error, Result};
use crate::manifest::ManifestBuilder;
use crate::specdoc::SpecDocument;

pub(crate) fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Internal(e.to_string()))
}

pub(crate) fn thresholds(t: &ThresholdFlags) -> DifficultyThresholds {
    DifficultyThresholds {
        tissue_difference: t.tissue_difference,
        ce_low: t.ce_low,
        ce_high: t.ce_high,
    }
}

pub(crate) fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Usage(format!("{}: cannot derive a case id", path.display())))
}

/// The random stream for sample `index` of case `case_id`. Independent of
/// thread count and processing order.
pub fn sample_stream(seed: u64, case_id: &str, index: usize) -> Stream {
    Stream::for_key(seed, &format!("{case_id}/{index}"))
}

fn normalization(
    arg: Option<NormalizationArg>,
    current: Normalization,
    mean: Option<f64>,
    std: Option<f64>,
) -> Result<Normalization> {
    let (cur_mean, cur_std) = match current {
        Normalization::ZScoreGlobal { mean, std } => (Some(mean), Some(std)),
        _ => (None, None),
    };
    let zscore = || match (mean.or(cur_mean), std.or(cur_std)) {
        (Some(mean), Some(std)) => Ok(Normalization::ZScoreGlobal { mean, std }),
        _ => Err(Error::Usage(
            "z-score normalization needs --zscore-mean and --zscore-std".into(),
        )),
    };
    match arg {
        Some(NormalizationArg::MinMaxSampledWindow) => Ok(Normalization::MinMaxSampledWindow),
        Some(NormalizationArg::FixedBaseAffine) => Ok(Normalization::FixedBaseAffine),
        Some(NormalizationArg::ZScoreGlobal) => zscore(),
        None if mean.is_some() || std.is_some() => {
            if cur_mean.is_some() {
                zscore()
            } else {
                Err(Error::Usage(
                    "--zscore-mean/--zscore-std need z-score normalization".into(),
                ))
            }
        }
        None => Ok(current),
    }
}

/// Effective spec from an optional document plus flag overrides.
pub(crate) fn resolve_spec(
    flags: &SpecFlags,
    default_normalization: Normalization,
    manifest: &mut ManifestBuilder,
) -> Result<(AugmentationSpec, Option<Pipeline>)> {
    let doc = match &flags.spec {
        Some(path) => {
            manifest.spec(path)?;
            SpecDocument::load(path)?
        }
        None => SpecDocument::default(),
    };
    let mut spec = doc.window.unwrap_or(AugmentationSpec {
        normalization: default_normalization,
        ..AugmentationSpec::liver_tumor_default()
    });
    spec.base = ViewingWindow::new(
        flags.base_width.unwrap_or(spec.base.width()),
        flags.base_level.unwrap_or(spec.base.level()),
    )
    .context(|| "base window".into())?;
    if let Some(r) = &flags.level_range {
        spec.level_range = [r[0], r[1]];
    }
    if let Some(r) = &flags.width_range {
        spec.width_range = [r[0], r[1]];
    }
    spec.p_level = flags.p_level.unwrap_or(spec.p_level);
    spec.p_width = flags.p_width.unwrap_or(spec.p_width);
    spec.normalization = normalization(
        flags.normalization,
        spec.normalization,
        flags.zscore_mean,
        flags.zscore_std,
    )?;
    spec.seed = match (flags.seed, doc.window, &doc.pipeline) {
        (Some(s), _, _) => s,
        (None, Some(w), _) => w.seed,
        (None, None, Some(p)) => p.seed,
        _ => 0,
    };
    spec.validate().context(|| "effective spec".into())?;
    Ok((spec, doc.pipeline))
}

/// What a sample drew.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampled {
    Window(SampledWindow),
    Pipeline(Vec<Applied>),
}

pub struct Sample {
    pub volume: Volume,
    pub sampled: Sampled,
}

/// A named augmentation method with its resolved configuration.
pub struct Augmenter {
    pub method: Method,
    pub spec: AugmentationSpec,
    pub pipeline: Option<Pipeline>,
}

impl Augmenter {
    pub fn new(
        method: Method,
        spec_flags: &SpecFlags,
        t: &TransformFlags,
        manifest: &mut ManifestBuilder,
    ) -> Result<Self> {
        let default_normalization = match method {
            Method::RwShiftScale => Normalization::FixedBaseAffine,
            _ => Normalization::MinMaxSampledWindow,
        };
        let (spec, doc_pipeline) = resolve_spec(spec_flags, default_normalization, manifest)?;
        let single = |kind: TransformKind, range: [f64; 2]| {
            let range = t.param_range.as_ref().map_or(range, |r| [r[0], r[1]]);
            let mut tr = IntensityTransform::new(kind, range, t.probability.unwrap_or(1.0));
            tr.preserve_range = t.preserve_range;
            tr.clip_to_unit = t.clip_to_unit;
            if t.center_anchor {
                tr.anchor = Anchor::WindowCenter;
            }
            Pipeline::new(vec![tr])
        };
        let pipeline = match method {
            Method::RandomWindow | Method::RwShiftScale => None,
            Method::Nnunet => Some(preset_nnunet()),
            Method::Unetr => Some(preset_unetr()),
            Method::Pipeline => Some(doc_pipeline.ok_or_else(|| {
                Error::Usage("--method pipeline needs a spec with a \"pipeline\" key".into())
            })?),
            Method::Contrast => Some(single(TransformKind::Contrast, [0.75, 1.25])),
            Method::BrightnessMult => Some(single(
                TransformKind::BrightnessMultiplicative,
                [0.75, 1.25],
            )),
            Method::BrightnessAdd => Some(single(TransformKind::BrightnessAdditive, [-0.1, 0.1])),
            Method::Gamma => Some(single(TransformKind::Gamma, [0.7, 1.5])),
            Method::GammaInverse => Some(single(TransformKind::GammaInverse, [0.7, 1.5])),
        };
        if let Some(p) = &pipeline {
            p.validate().context(|| "pipeline".into())?;
        }
        Ok(Self {
            method,
            spec,
            pipeline,
        })
    }

    pub fn effective_spec(&self) -> serde_json::Value {
        SpecDocument {
            window: Some(self.spec),
            pipeline: self.pipeline.clone(),
        }
        .to_value()
    }

    /// Static clip of raw HU to the base window.
    pub fn base_clip(&self, raw: &Volume) -> Result<Volume> {
        apply_window(raw, self.spec.base, self.spec.output_map()).context(|| "base window".into())
    }

    pub fn sample(&self, raw: &Volume, rng: &mut Stream) -> Result<Sample> {
        let ctx = || format!("{:?}", self.method);
        match (&self.pipeline, self.method) {
            (None, Method::RwShiftScale) => {
                let s = rw_shift_scale(raw, &self.spec, rng).context(ctx)?;
                Ok(Sample {
                    volume: s.volume,
                    sampled: Sampled::Window(s.sampled),
                })
            }
            (None, _) => {
                let s = random_windowing(raw, &self.spec, rng).context(ctx)?;
                Ok(Sample {
                    volume: s.volume,
                    sampled: Sampled::Window(s.sampled),
                })
            }
            (Some(p), _) => {
                let clipped = self.base_clip(raw)?;
                let out = run_pipeline(&clipped, p, rng).context(ctx)?;
                Ok(Sample {
                    volume: out.volume,
                    sampled: Sampled::Pipeline(out.applied),
                })
            }
        }
    }

    /// The clipped volume a sample is compared against: the base-window clip,
    /// or for shift-scale the clip to the sampled window under the fixed map.
    pub fn reference(&self, raw: &Volume, sample: &Sample) -> Result<Volume> {
        match (&sample.sampled, self.method) {
            (Sampled::Window(w), Method::RwShiftScale) => {
                apply_window(raw, w.window, self.spec.output_map())
                    .context(|| "sampled window".into())
            }
            _ => self.base_clip(raw),
        }
    }
}
