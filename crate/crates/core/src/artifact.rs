//! Clipping-artifact detection and histogram-shape comparison.
//!
//! An intensity transform `t` applied after clipping produces an artifact when
//! it moves the clipped extremes into the interior of the original interval:
//! `t(x_min) > x_min` or `t(x_max) < x_max`. Volumes realize `x_min` and
//! `x_max` through sets of voxels, so the test looks at where the whole
//! argmin (argmax) set ends up.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

/// Default tolerance for [`detect_artifact`], in normalized units.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ArtifactReport {
    pub lower_artifact: bool,
    pub upper_artifact: bool,
    /// `min(after over argmin(before)) - min(before)`; positive is inward.
    pub displaced_lower: f64,
    /// `max(after over argmax(before)) - max(before)`; negative is inward.
    pub displaced_upper: f64,
    /// Share of boundary voxels (argmin and argmax sets) moved inward by
    /// more than the tolerance.
    pub fraction_boundary_voxels_moved: f64,
}

impl ArtifactReport {
    pub fn any(&self) -> bool {
        self.lower_artifact || self.upper_artifact
    }
}

/// Checks whether `after = t(before)` moved the extremes of `before` inward.
pub fn detect_artifact(before: &Volume, after: &Volume, tolerance: f64) -> Result<ArtifactReport> {
    if before.shape() != after.shape() {
        return Err(Error::ShapeMismatch {
            left: before.shape(),
            right: after.shape(),
        });
    }
    let (lo, hi) = before.min_max();
    let (lo, hi) = (f64::from(lo), f64::from(hi));

    let mut after_lo = f64::INFINITY;
    let mut after_hi = f64::NEG_INFINITY;
    let (mut boundary, mut moved) = (0usize, 0usize);
    for (&b, &a) in before.voxels().iter().zip(after.voxels()) {
        let (b, a) = (f64::from(b), f64::from(a));
        if b == lo {
            after_lo = after_lo.min(a);
            boundary += 1;
            if a - lo > tolerance {
                moved += 1;
            }
        }
        // a constant volume is both argmin and argmax; count it once
        if b == hi && hi != lo {
            after_hi = after_hi.max(a);
            boundary += 1;
            if hi - a > tolerance {
                moved += 1;
            }
        }
    }
    if lo == hi {
        after_hi = after
            .voxels()
            .iter()
            .map(|&a| f64::from(a))
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let displaced_lower = after_lo - lo;
    let displaced_upper = after_hi - hi;
    Ok(ArtifactReport {
        lower_artifact: displaced_lower > tolerance,
        upper_artifact: displaced_upper < -tolerance,
        displaced_lower,
        displaced_upper,
        fraction_boundary_voxels_moved: if boundary == 0 {
            0.0
        } else {
            moved as f64 / boundary as f64
        },
    })
}

/// Fixed-width histogram. Bins are closed-open except the last, which is
/// closed. Values outside the range land in `underflow` / `overflow`, so
/// `sum(counts) + underflow + overflow == total`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        let n = self.counts.len();
        (self.bin_edges[n] - self.bin_edges[0]) / n as f64
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts divided by the in-range total.
    pub fn normalized(&self) -> Vec<f64> {
        let n = self.in_range();
        if n == 0 {
            return alloc::vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

/// Bins the voxels of `v` into `bins` equal bins over `[lo, hi]`.
pub fn histogram(v: &Volume, bins: usize, range: [f64; 2]) -> Result<Histogram> {
    histogram_of(v.voxels().iter().map(|&x| f64::from(x)), bins, range)
}

pub fn histogram_of(
    values: impl IntoIterator<Item = f64>,
    bins: usize,
    [lo, hi]: [f64; 2],
) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(alloc::format!(
            "histogram range [{lo}, {hi}] is empty"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let mut h = Histogram {
        bin_edges: (0..=bins).map(|i| lo + i as f64 * width).collect(),
        counts: alloc::vec![0; bins],
        total: 0,
        underflow: 0,
        overflow: 0,
    };
    h.bin_edges[bins] = hi;
    for x in values {
        h.total += 1;
        if x < lo {
            h.underflow += 1;
        } else if x > hi || x.is_nan() {
            h.overflow += 1;
        } else {
            let i = (libm::floor((x - lo) / width) as usize).min(bins - 1);
            h.counts[i] += 1;
        }
    }
    Ok(h)
}

/// Smallest L1 distance between the count-normalized histograms over integer
/// bin shifts of `b` (bounded to `±(bins - 1)`). Zero exactly when `b` is a
/// whole-bin translation of `a`; at most 2.
pub fn shape_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    let (wa, wb) = (a.bin_width(), b.bin_width());
    if (wa - wb).abs() > 1e-9 * wa.abs().max(wb.abs()) {
        return Err(Error::BinWidthMismatch(wa, wb));
    }
    let (pa, pb) = (a.normalized(), b.normalized());
    let (na, nb) = (pa.len() as isize, pb.len() as isize);
    let reach = na.max(nb) - 1;
    let at = |p: &[f64], i: isize| {
        if i >= 0 && (i as usize) < p.len() {
            p[i as usize]
        } else {
            0.0
        }
    };
    let mut best = f64::INFINITY;
    for k in -reach..=reach {
        let (start, end) = (0.min(-k), na.max(nb - k));
        let d: f64 = (start..end)
            .map(|j| (at(&pa, j) - at(&pb, j + k)).abs())
            .sum();
        best = best.min(d);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::{brightness_add, brightness_mult, contrast, gamma, Anchor};
    use crate::volume::{Shape, Spacing, Units};
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

    fn hist(counts: &[u64]) -> Histogram {
        let n = counts.len();
        Histogram {
            bin_edges: (0..=n).map(|i| i as f64).collect(),
            counts: counts.to_vec(),
            total: counts.iter().sum(),
            underflow: 0,
            overflow: 0,
        }
    }

    #[test]
    fn identity_has_no_artifact() {
        let v = norm(&[0.0, 0.0, 0.4, 1.0]);
        let r = detect_artifact(&v, &v, DEFAULT_TOLERANCE).unwrap();
        assert!(!r.any());
        assert_eq!(r.displaced_lower, 0.0);
        assert_eq!(r.fraction_boundary_voxels_moved, 0.0);
    }

    #[test]
    fn additive_shift_lifts_floor() {
        let v = norm(&[0.0, 0.0, 0.4, 1.0]);
        let after = brightness_add(&v, 0.1, false);
        let r = detect_artifact(&v, &after, DEFAULT_TOLERANCE).unwrap();
        assert!(r.lower_artifact);
        assert!(!r.upper_artifact);
        assert!((r.displaced_lower - 0.1).abs() < 1e-7);
        // both floor voxels moved in, the ceiling voxel moved out
        assert!((r.fraction_boundary_voxels_moved - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn multiplicative_dimming_lowers_ceiling() {
        let v = norm(&[0.0, 0.5, 1.0]);
        let r = detect_artifact(&v, &brightness_mult(&v, 0.9, false), DEFAULT_TOLERANCE).unwrap();
        assert!(!r.lower_artifact);
        assert!(r.upper_artifact);
        assert!((r.displaced_upper + 0.1).abs() < 1e-7);
    }

    #[test]
    fn contrast_reduction_moves_both_ends_inward() {
        let v = norm(&[0.0, 0.5, 1.0]);
        let after = contrast(&v, 0.8, Anchor::ImageMean, false);
        let r = detect_artifact(&v, &after, DEFAULT_TOLERANCE).unwrap();
        assert!(r.lower_artifact && r.upper_artifact);
    }

    #[test]
    fn expanding_contrast_and_gamma_keep_extremes() {
        let v = norm(&[0.0, 0.3, 1.0]);
        let wider = contrast(&v, 1.25, Anchor::ImageMean, false);
        let r = detect_artifact(&v, &wider, DEFAULT_TOLERANCE).unwrap();
        assert!(!r.any());
        assert!(r.displaced_lower < 0.0 && r.displaced_upper > 0.0);
        let g = gamma(&v, 1.7, false).unwrap();
        assert!(!detect_artifact(&v, &g, DEFAULT_TOLERANCE).unwrap().any());
    }

    #[test]
    fn plural_extremes_use_the_lowest_image() {
        // one floor voxel moves in, the other stays: the floor survives
        let before = norm(&[0.0, 0.0, 1.0]);
        let after = norm(&[0.0, 0.3, 1.0]);
        let r = detect_artifact(&before, &after, DEFAULT_TOLERANCE).unwrap();
        assert!(!r.lower_artifact);
        assert!((r.fraction_boundary_voxels_moved - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn artifact_shape_mismatch() {
        let a = norm(&[0.0, 1.0]);
        let b = norm(&[0.0, 1.0, 0.5]);
        assert!(matches!(
            detect_artifact(&a, &b, DEFAULT_TOLERANCE),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn constant_volume_single_bin() {
        let v = norm(&[0.3; 10]);
        let h = histogram(&v, 8, [0.0, 1.0]).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[2], 10);
        assert_eq!(h.total, 10);
    }

    #[test]
    fn ramp_fills_bins_evenly() {
        let values: Vec<f32> = (0..103).map(|i| i as f32 / 102.0).collect();
        let h = histogram(&norm(&values), 4, [0.0, 1.0]).unwrap();
        // counting oracle: bin k holds i with k/4 <= i/102 < (k+1)/4, last bin closed
        let mut oracle = [0u64; 4];
        for i in 0..103u64 {
            let k = ((i * 4) / 102).min(3) as usize;
            oracle[k] += 1;
        }
        assert_eq!(h.counts, oracle.to_vec());
        let (mn, mx) = (
            h.counts.iter().min().unwrap(),
            h.counts.iter().max().unwrap(),
        );
        assert!(mx - mn <= 1);
    }

    #[test]
    fn out_of_range_values_overflow() {
        let h = histogram_of([-1.0, 0.0, 0.5, 1.0, 2.0], 2, [0.0, 1.0]).unwrap();
        assert_eq!(h.counts, vec![1, 2]);
        assert_eq!((h.underflow, h.overflow, h.total), (1, 1, 5));
        assert!(histogram_of([0.0], 0, [0.0, 1.0]).is_err());
        assert!(histogram_of([0.0], 3, [1.0, 1.0]).is_err());
    }

    #[test]
    fn shape_distance_examples() {
        let a = hist(&[3, 1, 0, 2, 0, 0]);
        assert_eq!(shape_distance(&a, &a).unwrap(), 0.0);
        let shifted = hist(&[0, 0, 3, 1, 0, 2]);
        assert_eq!(shape_distance(&a, &shifted).unwrap(), 0.0);
        // delta at bin 0 vs uniform over 4 bins: any shift overlaps at most
        // one quarter, |1 - 1/4| + 3/4 = 1.5
        let delta = hist(&[1, 0, 0, 0]);
        let uniform = hist(&[1, 1, 1, 1]);
        assert!((shape_distance(&delta, &uniform).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn shape_distance_needs_equal_widths() {
        let a = hist(&[1, 2]);
        let mut b = hist(&[1, 2]);
        b.bin_edges = vec![0.0, 2.0, 4.0];
        assert!(matches!(
            shape_distance(&a, &b),
            Err(Error::BinWidthMismatch(..))
        ));
    }

    proptest! {
        #[test]
        fn histogram_accounts_for_every_voxel(
            values in prop::collection::vec(-2.0f32..3.0, 1..200),
            bins in 1usize..40,
        ) {
            let h = histogram(&norm_free(&values), bins, [0.0, 1.0]).unwrap();
            prop_assert_eq!(h.total as usize, values.len());
            prop_assert_eq!(h.in_range() + h.underflow + h.overflow, h.total);
            prop_assert_eq!(h.bin_edges.len(), h.counts.len() + 1);
        }

        #[test]
        fn shape_distance_bounded_and_symmetric_under_translation(
            counts in prop::collection::vec(0u64..20, 2..16),
            other in prop::collection::vec(0u64..20, 2..16),
            k in 0usize..6,
        ) {
            prop_assume!(counts.iter().sum::<u64>() > 0 && other.iter().sum::<u64>() > 0);
            let a = hist(&counts);
            let b = hist(&other);
            let d = shape_distance(&a, &b).unwrap();
            prop_assert!((0.0..=2.0 + 1e-12).contains(&d));
            let mut padded = vec![0; k];
            padded.extend_from_slice(&counts);
            prop_assert_eq!(shape_distance(&a, &hist(&padded)).unwrap(), 0.0);
        }

        #[test]
        fn linear_maps_preserve_bin_counts(
            steps in prop::collection::vec(0u32..64, 1..100),
            factor_pow in 0i32..3,
            shift_steps in -16i32..16,
        ) {
            // values on a 1/64 grid offset to bin centers; power-of-two factors and
            // grid shifts keep every operation exact
            let factor = f64::from(1u32 << factor_pow);
            let offset = f64::from(shift_steps) / 64.0;
            let values: Vec<f32> = steps.iter().map(|&s| (f64::from(s) / 64.0 + 1.0 / 128.0) as f32).collect();
            let v = norm_free(&values);
            let moved = brightness_add(&brightness_mult(&v, factor, false), offset, false);
            let before = histogram(&v, 16, [0.0, 1.0]).unwrap();
            let after = histogram(&moved, 16, [offset, offset + factor]).unwrap();
            prop_assert_eq!(before.counts, after.counts);
        }
    }

    fn norm_free(values: &[f32]) -> Volume {
        let shape = Shape::new(1, 1, values.len()).unwrap();
        Volume::new(shape, Spacing::default(), Units::Rescaled, values.to_vec()).unwrap()
    }
}
