//! Deterministic synthetic abdominal CT phantoms.
//!
//! Geometry lives in normalized coordinates: along each axis the voxel center
//! `i` maps to `2 (i + 0.5) / n - 1`, so the phantom scales with the grid. A
//! voxel belongs to a structure when its center lies inside it.
//!
//! Layout: an ellipsoidal body in air, a liver ellipsoid on the right of the
//! body, spherical tumors strung along the liver's long axis, and a bony ring
//! posterior to the liver. Contrast enhancement adds `ce_offset` to liver and
//! tumor HU. Gaussian noise is drawn per z-slab from a substream keyed by the
//! slab index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Stream, UniformSource};
use crate::volume::{Mask, Shape, Spacing, Units, Volume, BACKGROUND, LIVER, TUMOR};

const BODY_RADII: [f64; 3] = [0.95, 0.8, 0.9];
const LIVER_CENTER: [f64; 3] = [0.0, -0.05, -0.35];
const LIVER_RADII: [f64; 3] = [0.7, 0.4, 0.35];
const BONE_CENTER_YX: [f64; 2] = [0.55, 0.0];
const BONE_RADII: [f64; 2] = [0.08, 0.16];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PhantomSpec {
    pub shape: [usize; 3],
    pub spacing: [f64; 3],
    pub body_hu: f64,
    pub liver_hu: f64,
    /// One spherical tumor per entry, at `liver_hu + offset`.
    pub tumor_offsets: Vec<f64>,
    /// Tumor radius in normalized coordinates.
    pub tumor_radius: f64,
    pub bone_hu: f64,
    pub air_hu: f64,
    pub ce_offset: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            shape: [24, 48, 48],
            spacing: [1.5; 3],
            body_hu: 40.0,
            liver_hu: 110.0,
            tumor_offsets: vec![-30.0],
            tumor_radius: 0.15,
            bone_hu: 700.0,
            air_hu: -1000.0,
            ce_offset: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    /// Tumor centers, evenly spaced along the liver's z axis.
    pub fn tumor_centers(&self) -> Vec<[f64; 3]> {
        let k = self.tumor_offsets.len();
        (0..k)
            .map(|t| {
                let s = ((2 * t + 1) as f64 / k as f64 - 1.0) * 0.5;
                [
                    LIVER_CENTER[0] + s * LIVER_RADII[0],
                    LIVER_CENTER[1],
                    LIVER_CENTER[2],
                ]
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let shape = Shape::try_from(self.shape)?;
        Spacing::try_from(self.spacing)?;
        let finite = [
            self.body_hu,
            self.liver_hu,
            self.bone_hu,
            self.air_hu,
            self.ce_offset,
            self.noise_sigma,
            self.tumor_radius,
        ];
        if finite
            .iter()
            .chain(&self.tumor_offsets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidPhantom("non-finite parameter".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidPhantom(format!(
                "noise sigma {} is negative",
                self.noise_sigma
            )));
        }
        if self.tumor_radius <= 0.0 && !self.tumor_offsets.is_empty() {
            return Err(Error::InvalidPhantom(
                "tumor radius must be positive".into(),
            ));
        }
        // a sphere of radius r around c lies in the liver if, in coordinates
        // scaled by the liver radii, |c| + r / min(radii) < 1
        let min_r = LIVER_RADII.iter().copied().fold(f64::INFINITY, f64::min);
        for (i, c) in self.tumor_centers().iter().enumerate() {
            let scaled: f64 = (0..3)
                .map(|a| sq((c[a] - LIVER_CENTER[a]) / LIVER_RADII[a]))
                .sum();
            if libm::sqrt(scaled) + self.tumor_radius / min_r >= 1.0 {
                return Err(Error::InvalidPhantom(format!(
                    "tumor {i} (radius {}) is not strictly inside the liver",
                    self.tumor_radius
                )));
            }
        }
        // each tumor must hit at least one voxel center
        let centers = self.tumor_centers();
        let mut hit = vec![false; centers.len()];
        for i in 0..shape.len() {
            let p = normalized(shape, i);
            for (t, c) in centers.iter().enumerate() {
                if in_sphere(p, *c, self.tumor_radius) {
                    hit[t] = true;
                }
            }
        }
        if let Some(t) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidPhantom(format!(
                "tumor {t} covers no voxel center on a {:?} grid",
                self.shape
            )));
        }
        Ok(())
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

fn normalized(shape: Shape, index: usize) -> [f64; 3] {
    let c = shape.coords(index);
    let d = shape.dims();
    core::array::from_fn(|a| 2.0 * (c[a] as f64 + 0.5) / d[a] as f64 - 1.0)
}

fn in_ellipsoid(p: [f64; 3], center: [f64; 3], radii: [f64; 3]) -> bool {
    (0..3)
        .map(|a| sq((p[a] - center[a]) / radii[a]))
        .sum::<f64>()
        <= 1.0
}

fn in_sphere(p: [f64; 3], center: [f64; 3], r: f64) -> bool {
    in_ellipsoid(p, center, [r; 3])
}

fn in_bone_ring(p: [f64; 3]) -> bool {
    let dy = p[1] - BONE_CENTER_YX[0];
    let dx = p[2] - BONE_CENTER_YX[1];
    let r2 = dy * dy + dx * dx;
    (BONE_RADII[0] * BONE_RADII[0]..=BONE_RADII[1] * BONE_RADII[1]).contains(&r2)
}

/// Rasterizes the phantom and adds noise. The mask reflects the geometry
/// before noise.
pub fn generate(spec: &PhantomSpec) -> Result<(Volume, Mask)> {
    spec.validate()?;
    let shape = Shape::try_from(spec.shape)?;
    let spacing = Spacing::try_from(spec.spacing)?;
    let centers = spec.tumor_centers();

    let mut hu = Vec::with_capacity(shape.len());
    let mut labels = Vec::with_capacity(shape.len());
    for i in 0..shape.len() {
        let p = normalized(shape, i);
        let (value, label) = if !in_ellipsoid(p, [0.0; 3], BODY_RADII) {
            (spec.air_hu, BACKGROUND)
        } else if in_ellipsoid(p, LIVER_CENTER, LIVER_RADII) {
            match centers
                .iter()
                .position(|&c| in_sphere(p, c, spec.tumor_radius))
            {
                Some(t) => (
                    spec.liver_hu + spec.tumor_offsets[t] + spec.ce_offset,
                    TUMOR,
                ),
                None => (spec.liver_hu + spec.ce_offset, LIVER),
            }
        } else if in_bone_ring(p) {
            (spec.bone_hu, BACKGROUND)
        } else {
            (spec.body_hu, BACKGROUND)
        };
        hu.push(value);
        labels.push(label);
    }

    let voxels: Vec<f32> = if spec.noise_sigma > 0.0 {
        let slab = shape.y() * shape.x();
        let mut out = Vec::with_capacity(hu.len());
        for (z, chunk) in hu.chunks(slab).enumerate() {
            let mut rng = Stream::for_index(spec.seed, z as u64);
            let mut spare = None;
            for &v in chunk {
                let n = match spare.take() {
                    Some(n) => n,
                    None => {
                        let (a, b) = rng.normal_pair();
                        spare = Some(b);
                        a
                    }
                };
                out.push((v + spec.noise_sigma * n) as f32);
            }
        }
        out
    } else {
        hu.iter().map(|&v| v as f32).collect()
    };

    Ok((
        Volume::new(shape, spacing, Units::Hu, voxels)?,
        Mask::liver(shape, spacing, labels)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{classify_difficulty, median, DifficultyThresholds, MomentAccumulator};

    fn small() -> PhantomSpec {
        PhantomSpec {
            shape: [12, 32, 32],
            ..PhantomSpec::default()
        }
    }

    #[test]
    fn noise_free_regions_are_exact() {
        let (v, m) = generate(&small()).unwrap();
        assert!(m.count(LIVER) > 0 && m.count(TUMOR) > 0);
        assert!(m.select(&v, LIVER).all(|x| x == 110.0));
        assert!(m.select(&v, TUMOR).all(|x| x == 80.0));
        let background: Vec<f32> = m.select(&v, BACKGROUND).collect();
        assert!(background.contains(&-1000.0));
        assert!(background.contains(&40.0));
        assert!(background.contains(&700.0));
    }

    #[test]
    fn ce_offset_shifts_liver_median() {
        let base = generate(&small()).unwrap();
        let shifted = generate(&PhantomSpec {
            ce_offset: 60.0,
            ..small()
        })
        .unwrap();
        let med = |(v, m): &(Volume, Mask)| {
            let mut xs: Vec<f32> = m.select(v, LIVER).collect();
            xs.sort_by(f32::total_cmp);
            median(&xs)
        };
        assert_eq!(med(&shifted) - med(&base), 60.0);
        assert_eq!(base.1, shifted.1);
    }

    #[test]
    fn low_contrast_tumor_is_flagged() {
        let (v, m) = generate(&PhantomSpec {
            tumor_offsets: vec![-10.0],
            ..small()
        })
        .unwrap();
        let f = classify_difficulty(&v, &m, &DifficultyThresholds::default()).unwrap();
        assert_eq!(f.mean_tissue_difference, Some(10.0));
        assert!(f.low_hu_contrast);
    }

    #[test]
    fn noise_keeps_labels_and_means() {
        let clean = generate(&small()).unwrap();
        let spec = PhantomSpec {
            noise_sigma: 20.0,
            seed: 4,
            ..small()
        };
        let (v, m) = generate(&spec).unwrap();
        assert_eq!(m, clean.1);
        let liver = MomentAccumulator::from_values(m.select(&v, LIVER));
        let n = liver.count() as f64;
        assert!((liver.mean() - 110.0).abs() < 3.0 * 20.0 / n.sqrt());
        assert!((liver.std() - 20.0).abs() < 2.0);
    }

    #[test]
    fn same_seed_same_volume() {
        let spec = PhantomSpec {
            noise_sigma: 10.0,
            seed: 99,
            ..small()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = PhantomSpec {
            seed: 100,
            ..spec.clone()
        };
        assert_ne!(generate(&spec).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn tumors_sit_inside_liver_and_geometry_is_validated() {
        let spec = PhantomSpec {
            tumor_offsets: vec![-30.0, -20.0, 15.0],
            tumor_radius: 0.1,
            shape: [24, 32, 32],
            ..PhantomSpec::default()
        };
        let (v, m) = generate(&spec).unwrap();
        let tumor_hu: Vec<f32> = m.select(&v, TUMOR).collect();
        for hu in [80.0, 90.0, 125.0] {
            assert!(tumor_hu.contains(&hu));
        }
        let too_big = PhantomSpec {
            tumor_radius: 0.4,
            ..PhantomSpec::default()
        };
        assert!(matches!(generate(&too_big), Err(Error::InvalidPhantom(_))));
        let too_small = PhantomSpec {
            tumor_radius: 0.001,
            shape: [4, 4, 4],
            ..PhantomSpec::default()
        };
        assert!(matches!(
            generate(&too_small),
            Err(Error::InvalidPhantom(_))
        ));
        let negative_noise = PhantomSpec {
            noise_sigma: -1.0,
            ..PhantomSpec::default()
        };
        assert!(generate(&negative_noise).is_err());
    }

    #[test]
    fn no_tumor_phantom() {
        let (_, m) = generate(&PhantomSpec {
            tumor_offsets: vec![],
            ..small()
        })
        .unwrap();
        assert_eq!(m.count(TUMOR), 0);
    }
}
