//! Segmentation metrics: Dice, connected components, lesion instance
//! detection and the Wilcoxon signed-rank test.

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Shape};

/// Dice similarity `2|P ∩ G| / (|P| + |G|)`. Two empty masks score 1.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    pred.check_same_shape(gt)?;
    let (mut inter, mut p, mut g) = (0u64, 0u64, 0u64);
    for (&a, &b) in pred.bits().iter().zip(gt.bits()) {
        p += u64::from(a);
        g += u64::from(b);
        inter += u64::from(a && b);
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Voxel adjacency for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Connectivity {
    /// 6 face neighbours (4 within a slice).
    Face,
    /// 18 face and edge neighbours.
    Edge,
    /// 26 neighbours (8 within a slice).
    #[default]
    Vertex,
}

impl Connectivity {
    fn max_nonzero_axes(&self) -> usize {
        match self {
            Connectivity::Face => 1,
            Connectivity::Edge => 2,
            Connectivity::Vertex => 3,
        }
    }

    /// Neighbour offsets preceding a voxel in scan order.
    fn backward_offsets(&self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let d = [dz, dy, dx];
                    let nonzero = d.iter().filter(|&&c| c != 0).count();
                    if nonzero == 0 || nonzero > self.max_nonzero_axes() {
                        continue;
                    }
                    if d < [0, 0, 0] {
                        out.push(d);
                    }
                }
            }
        }
        out
    }
}

/// Component labels (0 = background, 1..=count) numbered by the scan order
/// of each component's first voxel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub shape: Shape,
    pub labels: Vec<u32>,
    pub count: usize,
}

impl Components {
    /// Voxel count of each component, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Two-pass union-find labeling.
pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> Components {
    let shape = m.shape();
    let [nz, ny, nx] = shape.dims();
    let offsets = connectivity.backward_offsets();
    let bits = m.bits();

    let mut provisional = alloc::vec![0u32; bits.len()];
    let mut parent: Vec<u32> = alloc::vec![0];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = shape.index(z, y, x);
                if !bits[i] {
                    continue;
                }
                let mut current = 0u32;
                for d in &offsets {
                    let (qz, qy, qx) = (z as isize + d[0], y as isize + d[1], x as isize + d[2]);
                    if qz < 0 || qy < 0 || qx < 0 || qy >= ny as isize || qx >= nx as isize {
                        continue;
                    }
                    let j = shape.index(qz as usize, qy as usize, qx as usize);
                    let l = provisional[j];
                    if l == 0 {
                        continue;
                    }
                    if current == 0 {
                        current = find(&mut parent, l);
                    } else {
                        let (a, b) = (find(&mut parent, current), find(&mut parent, l));
                        if a != b {
                            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                            parent[hi as usize] = lo;
                            current = lo;
                        }
                    }
                }
                if current == 0 {
                    current = parent.len() as u32;
                    parent.push(current);
                }
                provisional[i] = current;
            }
        }
    }

    let mut canonical = alloc::vec![0u32; parent.len()];
    let mut count = 0u32;
    let labels = provisional
        .iter()
        .map(|&l| {
            if l == 0 {
                return 0;
            }
            let root = find(&mut parent, l) as usize;
            if canonical[root] == 0 {
                count += 1;
                canonical[root] = count;
            }
            canonical[root]
        })
        .collect();
    Components {
        shape,
        labels,
        count: count as usize,
    }
}

/// How F1 is formed from the matched counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum F1Mode {
    /// `2 TP / (2 TP + FP + FN)` with TP = detected ground-truth lesions.
    #[default]
    Detection,
    /// Harmonic mean of precision and recall.
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InstanceConfig {
    /// A lesion (component) counts when strictly more than this fraction of
    /// its voxels is covered.
    pub overlap_threshold: f64,
    pub connectivity: Connectivity,
    pub f1_mode: F1Mode,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.10,
            connectivity: Connectivity::Vertex,
            f1_mode: F1Mode::Detection,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InstanceMatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Predicted components covering ground truth above the threshold.
    pub correct_predictions: usize,
    pub predicted_components: usize,
    /// Covered fraction of each ground-truth lesion.
    pub gt_overlaps: Vec<f64>,
    /// Ground-truth fraction of each predicted component.
    pub pred_overlaps: Vec<f64>,
    pub f1: f64,
    pub recall: f64,
    pub precision: f64,
}

/// Lesion-level detection metrics after connected-component analysis.
///
/// A ground-truth lesion is detected when the prediction covers more than
/// the threshold fraction of its voxels; a predicted component is correct
/// when more than the threshold fraction of its voxels lies on ground truth.
/// Recall (precision) is 1 when there are no ground-truth lesions
/// (predictions).
pub fn lesion_instance_metrics(
    pred: &BinaryMask,
    gt: &BinaryMask,
    config: &InstanceConfig,
) -> Result<InstanceMatchResult> {
    pred.check_same_shape(gt)?;
    let gt_cc = connected_components(gt, config.connectivity);
    let pred_cc = connected_components(pred, config.connectivity);

    let fractions = |cc: &Components, other: &BinaryMask| -> Vec<f64> {
        let mut hit = alloc::vec![0usize; cc.count];
        for (&l, &o) in cc.labels.iter().zip(other.bits()) {
            if l > 0 && o {
                hit[l as usize - 1] += 1;
            }
        }
        hit.iter()
            .zip(cc.sizes())
            .map(|(&h, s)| h as f64 / s as f64)
            .collect()
    };
    let gt_overlaps = fractions(&gt_cc, pred);
    let pred_overlaps = fractions(&pred_cc, gt);

    let thr = config.overlap_threshold;
    let tp = gt_overlaps.iter().filter(|&&f| f > thr).count();
    let correct = pred_overlaps.iter().filter(|&&f| f > thr).count();
    let fn_ = gt_cc.count - tp;
    let fp = pred_cc.count - correct;

    let recall = if gt_cc.count == 0 {
        1.0
    } else {
        tp as f64 / gt_cc.count as f64
    };
    let precision = if pred_cc.count == 0 {
        1.0
    } else {
        correct as f64 / pred_cc.count as f64
    };
    let f1 = match config.f1_mode {
        F1Mode::Detection => {
            let denom = 2 * tp + fp + fn_;
            if denom == 0 {
                1.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        }
        F1Mode::Harmonic => {
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        }
    };

    Ok(InstanceMatchResult {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        correct_predictions: correct,
        predicted_components: pred_cc.count,
        gt_overlaps,
        pred_overlaps,
        f1,
        recall,
        precision,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignificanceMethod {
    ExactEnumeration,
    NormalApproximation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SignificanceResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n_effective: usize,
    pub method: SignificanceMethod,
}

/// Largest number of non-zero differences handled by the exact null.
pub const EXACT_MAX_N: usize = 25;

/// Doubled average ranks of `|d|` (tied values share `first + last` of their
/// 1-based rank span), so the ranks stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = alloc::vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied magnitudes share average ranks. Up
/// to [`EXACT_MAX_N`] differences the null distribution of `W+` is computed
/// exactly over all `2^n` sign assignments (by counting subset sums);
/// beyond that a normal approximation with tie and continuity corrections is
/// used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<SignificanceResult> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument(
            "wilcoxon needs at least one pair".into(),
        ));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(SignificanceResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: SignificanceMethod::ExactEnumeration,
        });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let total2: u64 = ranks.iter().sum();
    let w_plus2: u64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();
    let statistic = w_plus2.min(total2 - w_plus2) as f64 / 2.0;

    if n <= EXACT_MAX_N {
        // counts[s]: sign assignments with doubled W+ equal to s
        let mut counts = alloc::vec![0u64; total2 as usize + 1];
        counts[0] = 1;
        let mut reach = 0usize;
        for &r in &ranks {
            let r = r as usize;
            for s in (0..=reach).rev() {
                counts[s + r] += counts[s];
            }
            reach += r;
        }
        let w = w_plus2 as usize;
        let lower: u64 = counts[..=w].iter().sum();
        let upper: u64 = counts[w..].iter().sum();
        let p = 2.0 * lower.min(upper) as f64 / libm::ldexp(1.0, n as i32);
        return Ok(SignificanceResult {
            statistic,
            p_value: p.min(1.0),
            n_effective: n,
            method: SignificanceMethod::ExactEnumeration,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let w_plus = w_plus2 as f64 / 2.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
    let p = libm::erfc(z / core::f64::consts::SQRT_2);
    Ok(SignificanceResult {
        statistic,
        p_value: p.min(1.0),
        n_effective: n,
        method: SignificanceMethod::NormalApproximation,
    })
}
