//! Corpus statistics: per-case and pooled viewing windows, augmentation
//! ranges, difficulty flags and global intensity moments.
//!
//! Quantiles are nearest-rank on sorted values. Coverage windows trim the
//! same number of samples from each tail: the lower bound is the nearest-rank
//! `(1 - c) / 2` quantile and the upper bound is its mirror from the top, so a
//! window always holds at least `ceil(c * n)` of the samples.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Mask, Units, ViewingWindow, Volume, LIVER, TUMOR};

/// Narrowest width reported for a case window, in HU.
pub const MIN_WINDOW_WIDTH: f64 = 1.0;

/// Zero-based index of the nearest-rank `p` quantile among `n` sorted values.
pub fn nearest_rank_index(n: usize, p: f64) -> usize {
    debug_assert!(n > 0);
    let rank = libm::ceil(p * n as f64 - 1e-9).max(1.0) as usize;
    rank.min(n) - 1
}

pub fn quantile_nearest_rank(sorted: &[f32], p: f64) -> f32 {
    sorted[nearest_rank_index(sorted.len(), p)]
}

/// Conventional median (mean of the two middle values for even counts).
pub fn median(sorted: &[f32]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        f64::from(sorted[n / 2])
    } else {
        0.5 * (f64::from(sorted[n / 2 - 1]) + f64::from(sorted[n / 2]))
    }
}

fn sort_values(values: &mut [f32]) {
    values.sort_unstable_by(f32::total_cmp);
}

/// Symmetric nearest-rank bounds holding at least `coverage` of `sorted`.
pub fn coverage_bounds(sorted: &[f32], coverage: f64) -> (f32, f32) {
    let n = sorted.len();
    let tail = (1.0 - coverage) / 2.0;
    let lo = nearest_rank_index(n, tail);
    let lo = lo.min((n - 1) / 2);
    (sorted[lo], sorted[n - 1 - lo])
}

fn window_from_bounds(lower: f32, upper: f32) -> ViewingWindow {
    let (lower, upper) = (f64::from(lower), f64::from(upper));
    let level = 0.5 * (lower + upper);
    let width = (upper - lower).max(MIN_WINDOW_WIDTH);
    ViewingWindow::new(width, level).expect("floored width is positive")
}

fn check_coverage(coverage: f64) -> Result<()> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "coverage {coverage} must lie in (0, 1]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CaseWindowEstimate {
    pub case_id: String,
    pub window: ViewingWindow,
    pub coverage: f64,
    pub label: u8,
    pub voxel_count: usize,
}

/// Window covering `coverage` of the HU under `label` in one case.
/// Degenerate windows are widened to [`MIN_WINDOW_WIDTH`].
pub fn case_window(
    case_id: &str,
    v: &Volume,
    m: &Mask,
    label: u8,
    coverage: f64,
) -> Result<CaseWindowEstimate> {
    v.require_units(Units::Hu)?;
    m.check_aligned(v)?;
    check_coverage(coverage)?;
    let mut values: Vec<f32> = m.select(v, label).collect();
    if values.is_empty() {
        return Err(Error::EmptyLabel(label));
    }
    sort_values(&mut values);
    let (lo, hi) = coverage_bounds(&values, coverage);
    Ok(CaseWindowEstimate {
        case_id: case_id.into(),
        window: window_from_bounds(lo, hi),
        coverage,
        label,
        voxel_count: values.len(),
    })
}

/// Labeled voxel values gathered across a corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PooledSamples {
    values: Vec<f32>,
}

impl PooledSamples {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_case(&mut self, v: &Volume, m: &Mask, label: u8) -> Result<()> {
        m.check_aligned(v)?;
        self.values.extend(m.select(v, label));
        Ok(())
    }

    pub fn extend(&mut self, values: impl IntoIterator<Item = f32>) {
        self.values.extend(values);
    }

    pub fn merge(&mut self, other: PooledSamples) {
        self.values.extend(other.values);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Coverage window over every pooled voxel.
    pub fn window(&self, coverage: f64) -> Result<ViewingWindow> {
        check_coverage(coverage)?;
        if self.values.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut sorted = self.values.clone();
        sort_values(&mut sorted);
        let (lo, hi) = coverage_bounds(&sorted, coverage);
        Ok(window_from_bounds(lo, hi))
    }
}

/// Quantile window over the labeled voxels of all cases pooled together.
pub fn pooled_window<'a>(
    cases: impl IntoIterator<Item = (&'a Volume, &'a Mask)>,
    label: u8,
    coverage: f64,
) -> Result<ViewingWindow> {
    let mut pool = PooledSamples::new();
    for (v, m) in cases {
        pool.add_case(v, m, label)?;
    }
    pool.window(coverage)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum RangeMethod {
    /// `[q_alpha, q_(1 - alpha)]` of per-case levels and widths.
    QuantileSpan { alpha: f64 },
}

impl Default for RangeMethod {
    fn default() -> Self {
        RangeMethod::QuantileSpan { alpha: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AugRanges {
    pub level_range: [f64; 2],
    pub width_range: [f64; 2],
}

/// Level and width sampling ranges from per-case windows. When `base` is
/// given the ranges are widened to contain it.
pub fn derive_aug_ranges(
    per_case: &[CaseWindowEstimate],
    method: RangeMethod,
    base: Option<ViewingWindow>,
) -> Result<AugRanges> {
    if per_case.len() < 2 {
        return Err(Error::InsufficientCases {
            needed: 2,
            found: per_case.len(),
        });
    }
    let RangeMethod::QuantileSpan { alpha } = method;
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(alloc::format!(
            "alpha {alpha} must lie in [0, 0.5)"
        )));
    }
    let span = |mut xs: Vec<f64>| {
        xs.sort_unstable_by(f64::total_cmp);
        let lo = nearest_rank_index(xs.len(), alpha).min((xs.len() - 1) / 2);
        [xs[lo], xs[xs.len() - 1 - lo]]
    };
    let mut level_range = span(per_case.iter().map(|c| c.window.level()).collect());
    let mut width_range = span(per_case.iter().map(|c| c.window.width()).collect());
    if let Some(b) = base {
        level_range = [level_range[0].min(b.level()), level_range[1].max(b.level())];
        width_range = [width_range[0].min(b.width()), width_range[1].max(b.width())];
    }
    Ok(AugRanges {
        level_range,
        width_range,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DifficultyThresholds {
    /// Cases with `|mean tumor - mean liver| <` this are low-contrast.
    pub tissue_difference: f64,
    /// Median liver HU below this is poorly timed.
    pub ce_low: f64,
    /// Median liver HU above this is poorly timed.
    pub ce_high: f64,
}

impl Default for DifficultyThresholds {
    fn default() -> Self {
        Self {
            tissue_difference: 20.0,
            ce_low: 89.0,
            ce_high: 137.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DifficultyFlags {
    pub low_hu_contrast: bool,
    /// `None` when the case has no tumor voxels.
    pub mean_tissue_difference: Option<f64>,
    pub poor_ce_timing: bool,
    pub median_liver_hu: f64,
    pub tumor_present: bool,
}

/// Flags low tumor/liver HU contrast and poorly timed contrast enhancement.
///
/// Liver statistics use parenchyma only (liver label, tumor excluded).
pub fn classify_difficulty(
    v: &Volume,
    m: &Mask,
    thresholds: &DifficultyThresholds,
) -> Result<DifficultyFlags> {
    v.require_units(Units::Hu)?;
    m.check_aligned(v)?;
    let mut liver: Vec<f32> = m.select(v, LIVER).collect();
    if liver.is_empty() {
        return Err(Error::EmptyLabel(LIVER));
    }
    let tumor = MomentAccumulator::from_values(m.select(v, TUMOR));
    let liver_mean = MomentAccumulator::from_values(liver.iter().copied()).mean();
    sort_values(&mut liver);
    let median_liver_hu = median(&liver);

    let mean_tissue_difference = (tumor.count() > 0).then(|| (tumor.mean() - liver_mean).abs());
    Ok(DifficultyFlags {
        low_hu_contrast: mean_tissue_difference.is_some_and(|d| d < thresholds.tissue_difference),
        mean_tissue_difference,
        poor_ce_timing: median_liver_hu < thresholds.ce_low || median_liver_hu > thresholds.ce_high,
        median_liver_hu,
        tumor_present: tumor.count() > 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CeTail {
    Normal,
    Low,
    High,
}

/// Corpus-relative CE-timing flags: the `floor(fraction * N)` cases with the
/// lowest and highest median liver HU. Cases are ranked by `(median, case_id)`.
/// Returns one tail per input, in input order.
pub fn classify_ce_percentile(cases: &[(String, f64)], fraction: f64) -> Result<Vec<CeTail>> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::InvalidArgument(alloc::format!(
            "tail fraction {fraction} must lie in [0, 0.5]"
        )));
    }
    let n = cases.len();
    let k = libm::floor(fraction * n as f64 + 1e-9) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        cases[a]
            .1
            .total_cmp(&cases[b].1)
            .then_with(|| cases[a].0.cmp(&cases[b].0))
    });
    let mut tails = alloc::vec![CeTail::Normal; n];
    for &i in &order[..k] {
        tails[i] = CeTail::Low;
    }
    for &i in &order[n - k..] {
        tails[i] = CeTail::High;
    }
    Ok(tails)
}

/// Mergeable count / mean / second-moment accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn from_values(values: impl IntoIterator<Item = f32>) -> Self {
        let mut acc = Self::default();
        for v in values {
            acc.push(f64::from(v));
        }
        acc
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            libm::sqrt(self.m2 / self.n as f64)
        }
    }
}

/// Moments of HU over foreground (non-background) voxels of one case.
pub fn foreground_moments(v: &Volume, m: &Mask) -> Result<MomentAccumulator> {
    v.require_units(Units::Hu)?;
    m.check_aligned(v)?;
    Ok(MomentAccumulator::from_values(
        m.labels()
            .iter()
            .zip(v.voxels())
            .filter(|(&l, _)| l != crate::volume::BACKGROUND)
            .map(|(_, &x)| x),
    ))
}

/// Orders cases by id for deterministic reductions.
pub fn by_case_id(a: &CaseWindowEstimate, b: &CaseWindowEstimate) -> Ordering {
    a.case_id.cmp(&b.case_id)
}
