//! Baseline intensity augmentations applied after clipping.
//!
//! These act on windowed (normalized or z-scored) intensities. None of them
//! re-clip by default, which is what lets them push clipped boundary mass
//! into the interior of the original interval.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::UniformSource;
use crate::volume::{Units, ViewingWindow, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TransformKind {
    Contrast,
    BrightnessMultiplicative,
    BrightnessAdditive,
    Gamma,
    GammaInverse,
}

/// Center of a contrast change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Anchor {
    #[default]
    ImageMean,
    /// 0.5 for normalized volumes, otherwise the midpoint of the volume's
    /// value range (the window center for a clipped volume).
    WindowCenter,
}

impl Anchor {
    fn value(&self, v: &Volume) -> f64 {
        match self {
            Anchor::ImageMean => v.mean(),
            Anchor::WindowCenter => {
                if v.units() == Units::Normalized01 {
                    0.5
                } else {
                    let (lo, hi) = v.min_max();
                    0.5 * (f64::from(lo) + f64::from(hi))
                }
            }
        }
    }
}

/// One stochastic intensity transform.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IntensityTransform {
    pub kind: TransformKind,
    pub parameter_range: [f64; 2],
    pub probability: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub anchor: Anchor,
    #[cfg_attr(feature = "serde", serde(default))]
    pub preserve_range: bool,
    /// Re-clip brightness output to `[0, 1]`.
    #[cfg_attr(feature = "serde", serde(default))]
    pub clip_to_unit: bool,
}

impl IntensityTransform {
    pub fn new(kind: TransformKind, parameter_range: [f64; 2], probability: f64) -> Self {
        Self {
            kind,
            parameter_range,
            probability,
            anchor: Anchor::ImageMean,
            preserve_range: false,
            clip_to_unit: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.parameter_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidSpec(format!(
                "{:?}: parameter range [{lo}, {hi}] is invalid",
                self.kind
            )));
        }
        if matches!(
            self.kind,
            TransformKind::Gamma | TransformKind::GammaInverse
        ) && lo <= 0.0
        {
            return Err(Error::InvalidSpec(format!(
                "{:?}: gamma must be positive, range starts at {lo}",
                self.kind
            )));
        }
        if !(0.0..=1.0).contains(&self.probability) {
            return Err(Error::InvalidSpec(format!(
                "{:?}: probability {} out of [0, 1]",
                self.kind, self.probability
            )));
        }
        Ok(())
    }

    /// Applies the transform with a fixed parameter.
    pub fn apply(&self, v: &Volume, param: f64) -> Result<Volume> {
        Ok(match self.kind {
            TransformKind::Contrast => contrast(v, param, self.anchor, self.preserve_range),
            TransformKind::BrightnessMultiplicative => brightness_mult(v, param, self.clip_to_unit),
            TransformKind::BrightnessAdditive => brightness_add(v, param, self.clip_to_unit),
            TransformKind::Gamma => gamma(v, param, false)?,
            TransformKind::GammaInverse => gamma(v, param, true)?,
        })
    }
}

/// An ordered list of transforms, each gated independently.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Pipeline {
    pub transforms: Vec<IntensityTransform>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    /// Marks an intentionally empty pipeline.
    #[cfg_attr(feature = "serde", serde(default))]
    pub identity: bool,
}

impl Pipeline {
    pub fn new(transforms: Vec<IntensityTransform>) -> Self {
        Self {
            transforms,
            seed: 0,
            identity: false,
        }
    }

    pub fn identity() -> Self {
        Self {
            transforms: Vec::new(),
            seed: 0,
            identity: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.transforms.is_empty() && !self.identity {
            return Err(Error::InvalidSpec(
                "pipeline has no transforms and is not marked identity".into(),
            ));
        }
        self.transforms
            .iter()
            .try_for_each(IntensityTransform::validate)
    }

    pub fn kinds(&self) -> Vec<TransformKind> {
        self.transforms.iter().map(|t| t.kind).collect()
    }
}

/// `anchor + alpha (x - anchor)`, optionally clipped to the volume's
/// original `[min, max]`.
pub fn contrast(v: &Volume, alpha: f64, anchor: Anchor, preserve_range: bool) -> Volume {
    let a = anchor.value(v);
    let (lo, hi) = v.min_max();
    v.map_intensities(|x| {
        let y = (a + alpha * (f64::from(x) - a)) as f32;
        if preserve_range {
            y.clamp(lo, hi)
        } else {
            y
        }
    })
}

pub fn brightness_mult(v: &Volume, factor: f64, clip_to_unit: bool) -> Volume {
    v.map_intensities(|x| unit_clip((f64::from(x) * factor) as f32, clip_to_unit))
}

pub fn brightness_add(v: &Volume, offset: f64, clip_to_unit: bool) -> Volume {
    v.map_intensities(|x| unit_clip((f64::from(x) + offset) as f32, clip_to_unit))
}

fn unit_clip(x: f32, on: bool) -> f32 {
    if on {
        x.clamp(0.0, 1.0)
    } else {
        x
    }
}

/// Gamma on the volume rescaled to `[0, 1]` by its own min/max, then mapped
/// back. The inverse form applies `1 - (1 - x)^g`. Constant volumes and
/// `g = 1` are returned unchanged.
pub fn gamma(v: &Volume, g: f64, inverse: bool) -> Result<Volume> {
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma {g} must be positive"
        )));
    }
    let (lo, hi) = v.min_max();
    if lo == hi || g == 1.0 {
        return Ok(v.clone());
    }
    let (lo, span) = (f64::from(lo), f64::from(hi) - f64::from(lo));
    Ok(v.map_intensities(|x| {
        let t = ((f64::from(x) - lo) / span).clamp(0.0, 1.0);
        let t = if inverse {
            1.0 - libm::pow(1.0 - t, g)
        } else {
            libm::pow(t, g)
        };
        (lo + t * span) as f32
    }))
}

/// A transform that fired during [`run_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Applied {
    pub kind: TransformKind,
    pub parameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub volume: Volume,
    pub applied: Vec<Applied>,
}

/// Runs the transforms in order. Each one draws a gate uniform and, when it
/// passes (`u < probability`), a parameter uniform from its range.
pub fn run_pipeline<R: UniformSource + ?Sized>(
    v: &Volume,
    p: &Pipeline,
    rng: &mut R,
) -> Result<PipelineOutput> {
    p.validate()?;
    let mut current = v.clone();
    let mut applied = Vec::new();
    for t in &p.transforms {
        if rng.next_uniform() < t.probability {
            let param = rng.uniform_in(t.parameter_range[0], t.parameter_range[1]);
            current = t.apply(&current, param)?;
            applied.push(Applied {
                kind: t.kind,
                parameter: param,
            });
        }
    }
    Ok(PipelineOutput {
        volume: current,
        applied,
    })
}

/// Contrast, multiplicative brightness, gamma and inverse gamma, with the
/// ranges and probabilities of the nnU-Net default recipe.
pub fn preset_nnunet() -> Pipeline {
    let mut contrast = IntensityTransform::new(TransformKind::Contrast, [0.75, 1.25], 0.15);
    contrast.preserve_range = true;
    Pipeline::new(alloc::vec![
        contrast,
        IntensityTransform::new(TransformKind::BrightnessMultiplicative, [0.75, 1.25], 0.15),
        IntensityTransform::new(TransformKind::Gamma, [0.7, 1.5], 0.3),
        IntensityTransform::new(TransformKind::GammaInverse, [0.7, 1.5], 0.1),
    ])
}

/// Additive then multiplicative intensity jitter, as in the Unetr recipe.
pub fn preset_unetr() -> Pipeline {
    Pipeline::new(alloc::vec![
        IntensityTransform::new(TransformKind::BrightnessAdditive, [-0.1, 0.1], 0.5),
        IntensityTransform::new(TransformKind::BrightnessMultiplicative, [0.9, 1.1], 0.1),
    ])
}

/// Intensity-shift and scale ranges on the z-scored axis that match the
/// strength of window shifting and scaling in HU.
///
/// Raising the level by `dL` darkens the image by `dL / std`; widening to `W`
/// scales contrast by `W_base / W`.
pub fn equal_strength_ranges(
    base: ViewingWindow,
    level_range: [f64; 2],
    width_range: [f64; 2],
    global_std: f64,
) -> Result<([f64; 2], [f64; 2])> {
    if !(global_std.is_finite() && global_std > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "global std {global_std} must be positive"
        )));
    }
    if width_range[0] <= 0.0 || width_range[0] > width_range[1] {
        return Err(Error::InvalidArgument(format!(
            "width range {width_range:?} is invalid"
        )));
    }
    let offset = [
        (base.level() - level_range[1]) / global_std,
        (base.level() - level_range[0]) / global_std,
    ];
    let factor = [base.width() / width_range[1], base.width() / width_range[0]];
    Ok((offset, factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{FixedDraws, Stream};
    use crate::volume::{Shape, Spacing};
    use proptest::prelude::*;

    fn norm(values: &[f32]) -> Volume {
        let shape = Shape::new(1, 1, values.len()).unwrap();
        Volume::new(
            shape,
            Spacing::default(),
            Units::Normalized01,
            values.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn contrast_identity_and_constant() {
        let v = norm(&[0.0, 0.3, 0.9]);
        assert_eq!(contrast(&v, 1.0, Anchor::ImageMean, false), v);
        let c = norm(&[0.4; 5]);
        assert_eq!(contrast(&c, 1.7, Anchor::ImageMean, false), c);
    }

    #[test]
    fn contrast_two_voxel_example() {
        let v = norm(&[0.0, 1.0]);
        let kept = contrast(&v, 2.0, Anchor::WindowCenter, true);
        assert_eq!(kept.voxels(), &[0.0, 1.0]);
        assert_eq!(kept.units(), Units::Normalized01);
        let free = contrast(&v, 2.0, Anchor::WindowCenter, false);
        assert_eq!(free.voxels(), &[-0.5, 1.5]);
        assert_eq!(free.units(), Units::Rescaled);
    }

    #[test]
    fn brightness_examples() {
        let v = norm(&[0.0, 0.5, 1.0]);
        assert_eq!(brightness_mult(&v, 1.0, false), v);
        assert_eq!(brightness_add(&v, 0.0, false), v);
        assert_eq!(brightness_mult(&v, 0.9, false).voxels(), &[0.0, 0.45, 0.9]);
        let shifted = brightness_add(&v, 0.1, false);
        assert_eq!(shifted.min_max().0, 0.1);
        assert_eq!(shifted.units(), Units::Rescaled);
        assert_eq!(brightness_add(&v, 0.1, true).min_max(), (0.1, 1.0));
    }

    #[test]
    fn gamma_examples() {
        let v = norm(&[0.0, 0.25, 1.0]);
        assert_eq!(gamma(&v, 1.0, false).unwrap(), v);
        assert_eq!(gamma(&v, 2.0, false).unwrap().voxels(), &[0.0, 0.0625, 1.0]);
        let inv = gamma(&v, 2.0, true).unwrap();
        assert_eq!(inv.voxels(), &[0.0, 0.4375, 1.0]);
        assert!(gamma(&v, 0.0, false).is_err());
        let c = norm(&[0.3; 4]);
        assert_eq!(gamma(&c, 3.0, true).unwrap(), c);
    }

    #[test]
    fn gamma_rescales_by_own_range() {
        let v = norm(&[0.2, 0.4, 0.6]);
        let out = gamma(&v, 2.0, false).unwrap();
        // 0.4 sits at t = 0.5 of [0.2, 0.6]
        assert!((out.voxels()[1] - 0.3).abs() < 1e-7);
        assert_eq!(out.voxels()[0], 0.2);
        assert_eq!(out.voxels()[2], 0.6);
    }

    #[test]
    fn preset_contents() {
        use TransformKind::*;
        assert_eq!(
            preset_nnunet().kinds(),
            vec![Contrast, BrightnessMultiplicative, Gamma, GammaInverse]
        );
        assert_eq!(
            preset_unetr().kinds(),
            vec![BrightnessAdditive, BrightnessMultiplicative]
        );
        assert!(preset_nnunet().validate().is_ok());
        assert!(preset_unetr().validate().is_ok());
    }

    #[test]
    fn zero_probability_pipeline_is_identity() {
        let v = norm(&[0.0, 0.2, 0.7, 1.0]);
        let mut p = preset_nnunet();
        p.transforms.iter_mut().for_each(|t| t.probability = 0.0);
        let out = run_pipeline(&v, &p, &mut Stream::new(3)).unwrap();
        assert_eq!(out.volume, v);
        assert!(out.applied.is_empty());
    }

    #[test]
    fn certain_degenerate_transform_is_deterministic() {
        let v = norm(&[0.0, 0.5, 1.0]);
        let p = Pipeline::new(vec![IntensityTransform::new(
            TransformKind::BrightnessMultiplicative,
            [0.9, 0.9],
            1.0,
        )]);
        for seed in 0..5 {
            let out = run_pipeline(&v, &p, &mut Stream::new(seed)).unwrap();
            assert_eq!(out.volume.voxels(), &[0.0, 0.45, 0.9]);
        }
    }

    #[test]
    fn pipeline_draws_gate_then_value_in_list_order() {
        let v = norm(&[0.0, 0.5, 1.0]);
        let p = preset_unetr();
        // additive: gate 0.2 < 0.5 fires, value 0.75 -> -0.1 + 0.75 * 0.2 = 0.05
        // multiplicative: gate 0.5 >= 0.1 does not fire
        let mut draws = FixedDraws::new(&[0.2, 0.75, 0.5]);
        let out = run_pipeline(&v, &p, &mut draws).unwrap();
        assert_eq!(draws.consumed(), 3);
        assert_eq!(out.applied.len(), 1);
        assert_eq!(out.applied[0].kind, TransformKind::BrightnessAdditive);
        assert!((out.applied[0].parameter - 0.05).abs() < 1e-12);
    }

    #[test]
    fn empty_pipeline_needs_identity_flag() {
        assert!(Pipeline::new(vec![]).validate().is_err());
        assert!(Pipeline::identity().validate().is_ok());
        let v = norm(&[0.1, 0.9]);
        let out = run_pipeline(&v, &Pipeline::identity(), &mut Stream::new(0)).unwrap();
        assert_eq!(out.volume, v);
    }

    #[test]
    fn invalid_transforms_rejected() {
        let mut t = IntensityTransform::new(TransformKind::Gamma, [0.0, 1.5], 0.3);
        assert!(t.validate().is_err());
        t.parameter_range = [1.5, 0.7];
        assert!(t.validate().is_err());
        t.parameter_range = [0.7, 1.5];
        t.probability = -0.1;
        assert!(t.validate().is_err());
    }

    #[test]
    fn equal_strength_matches_window_ranges() {
        let (offset, factor) =
            equal_strength_ranges(ViewingWindow::TUMOR, [12.0, 130.0], [129.0, 298.0], 50.0)
                .unwrap();
        assert_eq!(offset, [(65.0 - 130.0) / 50.0, (65.0 - 12.0) / 50.0]);
        assert_eq!(factor, [169.0 / 298.0, 169.0 / 129.0]);
        assert!(offset[0] < 0.0 && offset[1] > 0.0);
        assert!(factor[0] < 1.0 && factor[1] > 1.0);
        assert!(equal_strength_ranges(ViewingWindow::TUMOR, [0.0; 2], [1.0; 2], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn gamma_is_monotone(
            mut values in prop::collection::vec(0.0f32..=1.0, 2..40),
            g in 0.2f64..4.0,
            inverse in any::<bool>(),
        ) {
            values.sort_by(f32::total_cmp);
            let out = gamma(&norm(&values), g, inverse).unwrap();
            prop_assert!(out.voxels().windows(2).all(|p| p[0] <= p[1]));
        }

        #[test]
        fn identity_parameters_are_voxel_exact(
            values in prop::collection::vec(0.0f32..=1.0, 1..40),
            seed in any::<u64>(),
        ) {
            let v = norm(&values);
            let p = Pipeline::new(vec![
                IntensityTransform::new(TransformKind::Contrast, [1.0, 1.0], 1.0),
                IntensityTransform::new(TransformKind::BrightnessMultiplicative, [1.0, 1.0], 1.0),
                IntensityTransform::new(TransformKind::BrightnessAdditive, [0.0, 0.0], 1.0),
                IntensityTransform::new(TransformKind::Gamma, [1.0, 1.0], 1.0),
                IntensityTransform::new(TransformKind::GammaInverse, [1.0, 1.0], 1.0),
            ]);
            let out = run_pipeline(&v, &p, &mut Stream::new(seed)).unwrap();
            prop_assert_eq!(out.volume, v);
        }

        #[test]
        fn pipeline_reruns_are_bit_identical(
            values in prop::collection::vec(0.0f32..=1.0, 1..40),
            seed in any::<u64>(),
        ) {
            let v = norm(&values);
            let a = run_pipeline(&v, &preset_nnunet(), &mut Stream::new(seed)).unwrap();
            let b = run_pipeline(&v, &preset_nnunet(), &mut Stream::new(seed)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
