//! Windowing and the window-space augmentations.
//!
//! Static windowing clips HU to `[L - W/2, L + W/2]` and maps the interval to
//! output intensities. Random windowing samples the window itself before
//! clipping: the width with probability `p_width` (window scaling), then the
//! level with probability `p_level` (window shifting). Because the
//! augmentation happens inside the clip, the boundary voxels always land on
//! the ends of the output interval.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::UniformSource;
use crate::volume::{Units, ViewingWindow, Volume};

/// How clipped HU are mapped to output intensities.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Normalization {
    /// `(x - lower) / W` of the applied window; output in `[0, 1]`.
    MinMaxSampledWindow,
    /// `(x - lower_base) / W_base`, whatever window was applied.
    FixedBaseAffine,
    /// `(x - mean) / std` with corpus statistics.
    ZScoreGlobal { mean: f64, std: f64 },
}

impl Normalization {
    pub fn output_map(&self, base: ViewingWindow) -> OutputMap {
        match *self {
            Normalization::MinMaxSampledWindow => OutputMap::MinMax,
            Normalization::FixedBaseAffine => OutputMap::Affine {
                offset: base.lower(),
                scale: base.width(),
            },
            Normalization::ZScoreGlobal { mean, std } => OutputMap::ZScore { mean, std },
        }
    }
}

/// A resolved clipped-HU to output mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutputMap {
    MinMax,
    Affine { offset: f64, scale: f64 },
    ZScore { mean: f64, std: f64 },
}

impl OutputMap {
    pub fn units(&self) -> Units {
        match self {
            OutputMap::MinMax => Units::Normalized01,
            OutputMap::Affine { .. } => Units::Rescaled,
            OutputMap::ZScore { .. } => Units::ZScore,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OutputMap::MinMax => Ok(()),
            OutputMap::Affine { offset, scale } => {
                if !(offset.is_finite() && scale.is_finite() && scale > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "affine map needs a positive finite scale, got {scale}"
                    )));
                }
                Ok(())
            }
            OutputMap::ZScore { mean, std } => {
                if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "z-score map needs a positive finite std, got {std}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Output intensity of an already clipped HU value.
    #[inline]
    pub fn map(&self, clipped: f64, window: &ViewingWindow) -> f64 {
        match *self {
            OutputMap::MinMax => (clipped - window.lower()) / window.width(),
            OutputMap::Affine { offset, scale } => (clipped - offset) / scale,
            OutputMap::ZScore { mean, std } => (clipped - mean) / std,
        }
    }
}

/// Clips HU to the window and maps the result.
pub fn apply_window(v: &Volume, window: ViewingWindow, map: OutputMap) -> Result<Volume> {
    v.require_units(Units::Hu)?;
    map.validate()?;
    let (lo, hi) = (window.lower(), window.upper());
    let voxels: Vec<f32> = v
        .voxels()
        .iter()
        .map(|&x| map.map(f64::from(x).max(lo).min(hi), &window) as f32)
        .collect();
    v.with_voxels(map.units(), voxels)
}

/// Sampling ranges and gates for Random windowing.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawSpec", into = "RawSpec"))]
pub struct AugmentationSpec {
    pub base: ViewingWindow,
    pub level_range: [f64; 2],
    pub width_range: [f64; 2],
    pub p_level: f64,
    pub p_width: f64,
    pub normalization: Normalization,
    pub seed: u64,
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy)]
struct RawSpec {
    base: ViewingWindow,
    level_range: [f64; 2],
    width_range: [f64; 2],
    p_level: f64,
    p_width: f64,
    normalization: Normalization,
    #[cfg_attr(feature = "serde", serde(default))]
    seed: u64,
}

impl TryFrom<RawSpec> for AugmentationSpec {
    type Error = Error;

    fn try_from(r: RawSpec) -> Result<Self> {
        let spec = AugmentationSpec {
            base: r.base,
            level_range: r.level_range,
            width_range: r.width_range,
            p_level: r.p_level,
            p_width: r.p_width,
            normalization: r.normalization,
            seed: r.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<AugmentationSpec> for RawSpec {
    fn from(s: AugmentationSpec) -> Self {
        RawSpec {
            base: s.base,
            level_range: s.level_range,
            width_range: s.width_range,
            p_level: s.p_level,
            p_width: s.p_width,
            normalization: s.normalization,
            seed: s.seed,
        }
    }
}

impl AugmentationSpec {
    /// Tumor base window with level range `[12, 130]`, width range
    /// `[129, 298]` and both gates at 0.3.
    pub fn liver_tumor_default() -> Self {
        Self {
            base: ViewingWindow::TUMOR,
            level_range: [12.0, 130.0],
            width_range: [129.0, 298.0],
            p_level: 0.3,
            p_width: 0.3,
            normalization: Normalization::MinMaxSampledWindow,
            seed: 0,
        }
    }

    /// A spec whose gates never fire: plain static windowing.
    pub fn static_window(base: ViewingWindow, normalization: Normalization) -> Self {
        Self {
            base,
            level_range: [base.level(); 2],
            width_range: [base.width(); 2],
            p_level: 0.0,
            p_width: 0.0,
            normalization,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidSpec(msg));
        let [l_min, l_max] = self.level_range;
        let [w_min, w_max] = self.width_range;
        if ![l_min, l_max, w_min, w_max].iter().all(|v| v.is_finite()) {
            return bad(format!(
                "non-finite range in {:?} / {:?}",
                self.level_range, self.width_range
            ));
        }
        if l_min > l_max {
            return bad(format!("level range [{l_min}, {l_max}] is reversed"));
        }
        if w_min > w_max {
            return bad(format!("width range [{w_min}, {w_max}] is reversed"));
        }
        if w_min <= 0.0 {
            return bad(format!("minimum width {w_min} must be positive"));
        }
        let wb = self.base.width();
        if !(w_min <= wb && wb <= w_max) {
            return bad(format!(
                "base width {wb} outside width range [{w_min}, {w_max}]"
            ));
        }
        for (name, p) in [("p_level", self.p_level), ("p_width", self.p_width)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if let Normalization::ZScoreGlobal { mean, std } = self.normalization {
            if !(mean.is_finite() && std.is_finite() && std > 0.0) {
                return bad(format!(
                    "z-score statistics mean {mean}, std {std} are invalid"
                ));
            }
        }
        Ok(())
    }

    pub fn output_map(&self) -> OutputMap {
        self.normalization.output_map(self.base)
    }
}

/// A window drawn by [`sample_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SampledWindow {
    pub window: ViewingWindow,
    pub level_was_shifted: bool,
    pub width_was_scaled: bool,
    pub draws_consumed: u32,
}

/// Draws a window in the fixed order: width gate, width value, level gate,
/// level value. A value draw only happens when its gate passes
/// (`u < p`), so two to four uniforms are consumed.
pub fn sample_window<R: UniformSource + ?Sized>(
    spec: &AugmentationSpec,
    rng: &mut R,
) -> SampledWindow {
    let mut width = spec.base.width();
    let mut level = spec.base.level();
    let mut draws = 0;

    draws += 1;
    let width_was_scaled = rng.next_uniform() < spec.p_width;
    if width_was_scaled {
        draws += 1;
        width = rng.uniform_in(spec.width_range[0], spec.width_range[1]);
    }
    draws += 1;
    let level_was_shifted = rng.next_uniform() < spec.p_level;
    if level_was_shifted {
        draws += 1;
        level = rng.uniform_in(spec.level_range[0], spec.level_range[1]);
    }

    SampledWindow {
        // width >= W_min > 0 for a validated spec
        window: ViewingWindow::new(width, level).expect("validated spec yields a valid window"),
        level_was_shifted,
        width_was_scaled,
        draws_consumed: draws,
    }
}

/// Output of a window-space augmentation together with the window used.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub volume: Volume,
    pub sampled: SampledWindow,
}

/// Random windowing: sample a window, clip, apply the configured normalization.
///
/// With [`Normalization::MinMaxSampledWindow`] every output lies in `[0, 1]`.
pub fn random_windowing<R: UniformSource + ?Sized>(
    v: &Volume,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<WindowedSample> {
    v.require_units(Units::Hu)?;
    spec.validate()?;
    let sampled = sample_window(spec, rng);
    let volume = apply_window(v, sampled.window, spec.output_map())?;
    Ok(WindowedSample { volume, sampled })
}

/// HU-preserving variant: clip to a sampled window but normalize with the
/// fixed base-affine or z-score map, so a surviving HU value always maps to
/// the same output. Only the amount of retained context varies.
pub fn rw_shift_scale<R: UniformSource + ?Sized>(
    v: &Volume,
    spec: &AugmentationSpec,
    rng: &mut R,
) -> Result<WindowedSample> {
    if spec.normalization == Normalization::MinMaxSampledWindow {
        return Err(Error::InvalidSpec(
            "shift-scale needs FixedBaseAffine or ZScoreGlobal normalization; \
             MinMaxSampledWindow is plain random windowing"
                .into(),
        ));
    }
    random_windowing(v, spec, rng)
}
