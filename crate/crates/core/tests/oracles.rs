//! Library results against brute-force reference implementations.

use ctwindow_core::intensity::{contrast, Anchor};
use ctwindow_core::metrics::{connected_components, dice, wilcoxon_signed_rank, Connectivity};
use ctwindow_core::window::apply_window;
use ctwindow_core::{
    BinaryMask, OutputMap, Shape, Spacing, Stream, UniformSource, Units, ViewingWindow, Volume,
};
use proptest::prelude::*;

fn random_mask(rng: &mut Stream, shape: Shape, density: f64) -> BinaryMask {
    let bits = (0..shape.len())
        .map(|_| rng.next_uniform() < density)
        .collect();
    BinaryMask::new(shape, bits).unwrap()
}

fn flood_fill_labels(m: &BinaryMask, conn: Connectivity) -> Vec<u32> {
    let shape = m.shape();
    let [nz, ny, nx] = shape.dims();
    let mut labels = vec![0u32; shape.len()];
    let mut next = 0;
    for start in 0..shape.len() {
        if !m.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            let [z, y, x] = shape.coords(i);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let order = dz.abs() + dy.abs() + dx.abs();
                        let allowed = match conn {
                            Connectivity::Face => order == 1,
                            Connectivity::Edge => order == 1 || order == 2,
                            Connectivity::Vertex => order >= 1,
                        };
                        let (zz, yy, xx) = (z as i64 + dz, y as i64 + dy, x as i64 + dx);
                        if !allowed
                            || zz < 0
                            || yy < 0
                            || xx < 0
                            || zz >= nz as i64
                            || yy >= ny as i64
                            || xx >= nx as i64
                        {
                            continue;
                        }
                        let j = shape.index(zz as usize, yy as usize, xx as usize);
                        if m.bits()[j] && labels[j] == 0 {
                            labels[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
        }
    }
    labels
}

#[test]
fn components_match_flood_fill() {
    let shape = Shape::new(10, 10, 10).unwrap();
    let mut rng = Stream::new(11);
    for trial in 0..30 {
        let density = 0.1 + 0.4 * (trial as f64 / 30.0);
        let m = random_mask(&mut rng, shape, density);
        for conn in [Connectivity::Face, Connectivity::Edge, Connectivity::Vertex] {
            let expected = flood_fill_labels(&m, conn);
            let got = connected_components(&m, conn);
            assert_eq!(got.labels, expected, "trial {trial} {conn:?}");
            assert_eq!(
                got.count as u32,
                expected.iter().copied().max().unwrap_or(0)
            );
        }
    }
}

#[test]
fn dice_matches_counts() {
    let shape = Shape::new(3, 4, 5).unwrap();
    let mut rng = Stream::new(5);
    for _ in 0..200 {
        let a = random_mask(&mut rng, shape, 0.3);
        let b = random_mask(&mut rng, shape, 0.3);
        let inter = a
            .bits()
            .iter()
            .zip(b.bits())
            .filter(|(x, y)| **x && **y)
            .count();
        let total = a.count() + b.count();
        let expected = if total == 0 {
            1.0
        } else {
            2.0 * inter as f64 / total as f64
        };
        assert_eq!(dice(&a, &b).unwrap(), expected);
    }
}

/// Two-sided p by enumerating every sign assignment of the ranks.
fn wilcoxon_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        for k in i..=j {
            ranks[idx[k]] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    let observed: f64 = (0..n).filter(|&k| d[k] > 0.0).map(|k| ranks[k]).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for signs in 0u32..(1 << n) {
        let w: f64 = (0..n)
            .filter(|&k| signs >> k & 1 == 1)
            .map(|k| ranks[k])
            .sum();
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
}

#[test]
fn wilcoxon_exact_matches_enumeration() {
    let mut rng = Stream::new(99);
    for n in 1..=12 {
        for _ in 0..10 {
            // coarse values force ties and zero differences
            let a: Vec<f64> = (0..n).map(|_| (rng.next_uniform() * 8.0).floor()).collect();
            let b: Vec<f64> = (0..n).map(|_| (rng.next_uniform() * 8.0).floor()).collect();
            let got = wilcoxon_signed_rank(&a, &b).unwrap().p_value;
            let want = wilcoxon_enumerated(&a, &b);
            assert!((got - want).abs() < 1e-12, "n={n}: {got} vs {want}");
        }
    }
}

fn hu_volume(values: Vec<f32>) -> Volume {
    let n = values.len();
    Volume::new(
        Shape::new(1, 1, n).unwrap(),
        Spacing::default(),
        Units::Hu,
        values,
    )
    .unwrap()
}

proptest! {
    #[test]
    fn window_matches_clip_then_affine(
        values in prop::collection::vec(-1500.0f32..2500.0, 1..200),
        width in 1.0f64..2000.0,
        level in -500.0f64..500.0,
    ) {
        let w = ViewingWindow::new(width, level).unwrap();
        let out = apply_window(&hu_volume(values.clone()), w, OutputMap::MinMax).unwrap();
        for (x, y) in values.iter().zip(out.voxels()) {
            let clipped = f64::from(*x).clamp(w.lower(), w.upper());
            prop_assert_eq!(*y, ((clipped - w.lower()) / w.width()) as f32);
        }
    }

    #[test]
    fn narrowing_the_window_is_centered_contrast(
        values in prop::collection::vec(-400.0f32..500.0, 1..200),
        width in 5.0f64..169.0,
    ) {
        let base = ViewingWindow::TUMOR;
        let mut values = values;
        values.extend([-1000.0, 1000.0]);
        let v = hu_volume(values);
        let base_out = apply_window(&v, base, OutputMap::MinMax).unwrap();
        let boosted = contrast(&base_out, base.width() / width, Anchor::WindowCenter, true);
        let narrow = apply_window(&v, ViewingWindow::new(width, base.level()).unwrap(), OutputMap::MinMax).unwrap();
        for (a, b) in boosted.voxels().iter().zip(narrow.voxels()) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }
}
