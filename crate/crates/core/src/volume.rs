//! Volumes, masks, viewing windows, HU calibration and resampling.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BACKGROUND: u8 = 0;
pub const LIVER: u8 = 1;
pub const TUMOR: u8 = 2;

/// Volume extent as `(z, y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "[usize; 3]", into = "[usize; 3]"))]
pub struct Shape([usize; 3]);

impl Shape {
    pub fn new(z: usize, y: usize, x: usize) -> Result<Self> {
        Self::try_from([z, y, x])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.0
    }

    pub fn z(&self) -> usize {
        self.0[0]
    }

    pub fn y(&self) -> usize {
        self.0[1]
    }

    pub fn x(&self) -> usize {
        self.0[2]
    }

    pub fn len(&self) -> usize {
        self.0[0] * self.0[1] * self.0[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.0[1] + y) * self.0[2] + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.0[2];
        let rest = index / self.0[2];
        [rest / self.0[1], rest % self.0[1], x]
    }
}

impl TryFrom<[usize; 3]> for Shape {
    type Error = Error;

    fn try_from(dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidShape(dims));
        }
        Ok(Self(dims))
    }
}

impl From<Shape> for [usize; 3] {
    fn from(s: Shape) -> Self {
        s.0
    }
}

/// Voxel spacing in millimeters, `(z, y, x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "[f64; 3]", into = "[f64; 3]"))]
pub struct Spacing([f64; 3]);

impl Spacing {
    pub fn new(z: f64, y: f64, x: f64) -> Result<Self> {
        Self::try_from([z, y, x])
    }

    pub fn isotropic(mm: f64) -> Result<Self> {
        Self::try_from([mm; 3])
    }

    pub fn mm(&self) -> [f64; 3] {
        self.0
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self([1.0; 3])
    }
}

impl TryFrom<[f64; 3]> for Spacing {
    type Error = Error;

    fn try_from(mm: [f64; 3]) -> Result<Self> {
        if mm.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidSpacing(mm));
        }
        Ok(Self(mm))
    }
}

impl From<Spacing> for [f64; 3] {
    fn from(s: Spacing) -> Self {
        s.0
    }
}

/// Intensity unit tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Units {
    #[cfg_attr(feature = "serde", serde(rename = "hu"))]
    Hu,
    /// Every voxel in `[0, 1]`.
    #[cfg_attr(feature = "serde", serde(rename = "norm01"))]
    Normalized01,
    #[cfg_attr(feature = "serde", serde(rename = "zscore"))]
    ZScore,
    /// A fixed affine map of clipped HU (or a transform of normalized
    /// intensities) whose values may leave `[0, 1]`.
    #[cfg_attr(feature = "serde", serde(rename = "rescaled"))]
    Rescaled,
}

impl Units {
    pub fn as_str(&self) -> &'static str {
        match self {
            Units::Hu => "hu",
            Units::Normalized01 => "norm01",
            Units::ZScore => "zscore",
            Units::Rescaled => "rescaled",
        }
    }
}

/// A dense 3D scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    shape: Shape,
    spacing: Spacing,
    units: Units,
    voxels: Vec<f32>,
}

impl Volume {
    pub fn new(shape: Shape, spacing: Spacing, units: Units, voxels: Vec<f32>) -> Result<Self> {
        if voxels.len() != shape.len() {
            return Err(Error::VoxelCount {
                shape,
                found: voxels.len(),
            });
        }
        if units == Units::Normalized01 {
            if let Some(&bad) = voxels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::OutOfUnitRange(bad));
            }
        }
        Ok(Self {
            shape,
            spacing,
            units,
            voxels,
        })
    }

    /// Volume of HU values widened from 16-bit integers.
    pub fn from_i16(shape: Shape, spacing: Spacing, voxels: &[i16]) -> Result<Self> {
        Self::new(
            shape,
            spacing,
            Units::Hu,
            voxels.iter().map(|&v| f32::from(v)).collect(),
        )
    }

    pub fn filled(shape: Shape, spacing: Spacing, units: Units, value: f32) -> Result<Self> {
        Self::new(shape, spacing, units, alloc::vec![value; shape.len()])
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn into_voxels(self) -> Vec<f32> {
        self.voxels
    }

    pub fn get(&self, z: usize, y: usize, x: usize) -> f32 {
        self.voxels[self.shape.index(z, y, x)]
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Same geometry, new voxels and units.
    pub fn with_voxels(&self, units: Units, voxels: Vec<f32>) -> Result<Self> {
        Self::new(self.shape, self.spacing, units, voxels)
    }

    /// Same geometry with voxels produced by a per-voxel transform of a
    /// normalized or rescaled volume. Normalized inputs keep their tag only if
    /// the result stays inside `[0, 1]`.
    pub(crate) fn map_intensities(&self, f: impl Fn(f32) -> f32) -> Volume {
        let voxels: Vec<f32> = self.voxels.iter().map(|&x| f(x)).collect();
        let units = match self.units {
            Units::Normalized01 if voxels.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                Units::Rescaled
            }
            u => u,
        };
        Volume {
            shape: self.shape,
            spacing: self.spacing,
            units,
            voxels,
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        self.voxels.iter().map(|&v| f64::from(v)).sum::<f64>() / self.voxels.len() as f64
    }

    pub fn require_units(&self, expected: Units) -> Result<()> {
        if self.units != expected {
            return Err(Error::UnitsMismatch {
                expected,
                found: self.units,
            });
        }
        Ok(())
    }
}

/// The default label declaration: background, liver, tumor.
pub fn liver_label_set() -> BTreeMap<u8, String> {
    [
        (BACKGROUND, "background"),
        (LIVER, "liver"),
        (TUMOR, "tumor"),
    ]
    .into_iter()
    .map(|(k, v)| (k, v.to_string()))
    .collect()
}

/// Integer label field aligned with a [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    shape: Shape,
    spacing: Spacing,
    label_names: BTreeMap<u8, String>,
    labels: Vec<u8>,
}

impl Mask {
    pub fn new(
        shape: Shape,
        spacing: Spacing,
        label_names: BTreeMap<u8, String>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if labels.len() != shape.len() {
            return Err(Error::VoxelCount {
                shape,
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|l| !label_names.contains_key(l)) {
            return Err(Error::UndeclaredLabel(bad));
        }
        Ok(Self {
            shape,
            spacing,
            label_names,
            labels,
        })
    }

    /// Mask using the background/liver/tumor label set.
    pub fn liver(shape: Shape, spacing: Spacing, labels: Vec<u8>) -> Result<Self> {
        Self::new(shape, spacing, liver_label_set(), labels)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label_names(&self) -> &BTreeMap<u8, String> {
        &self.label_names
    }

    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Voxels equal to `label`.
    pub fn binary(&self, label: u8) -> BinaryMask {
        BinaryMask {
            shape: self.shape,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Voxels with any non-background label.
    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            shape: self.shape,
            bits: self.labels.iter().map(|&l| l != BACKGROUND).collect(),
        }
    }

    pub fn check_aligned(&self, v: &Volume) -> Result<()> {
        if self.shape != v.shape() {
            return Err(Error::ShapeMismatch {
                left: v.shape(),
                right: self.shape,
            });
        }
        Ok(())
    }

    /// Values of `v` at voxels carrying `label`, in scan order.
    pub fn select<'a>(&'a self, v: &'a Volume, label: u8) -> impl Iterator<Item = f32> + 'a {
        self.labels
            .iter()
            .zip(v.voxels())
            .filter(move |(&l, _)| l == label)
            .map(|(_, &x)| x)
    }
}

/// Boolean voxel set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    shape: Shape,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(shape: Shape, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != shape.len() {
            return Err(Error::VoxelCount {
                shape,
                found: bits.len(),
            });
        }
        Ok(Self { shape, bits })
    }

    pub fn empty(shape: Shape) -> Self {
        Self {
            shape,
            bits: alloc::vec![false; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn check_same_shape(&self, other: &BinaryMask) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: other.shape,
            });
        }
        Ok(())
    }
}

/// A viewing window in HU: the interval `[level - width/2, level + width/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawWindow", into = "RawWindow"))]
pub struct ViewingWindow {
    width: f64,
    level: f64,
}

#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[derive(Debug, Clone, Copy)]
struct RawWindow {
    width: f64,
    level: f64,
}

impl TryFrom<RawWindow> for ViewingWindow {
    type Error = Error;

    fn try_from(r: RawWindow) -> Result<Self> {
        ViewingWindow::new(r.width, r.level)
    }
}

impl From<ViewingWindow> for RawWindow {
    fn from(w: ViewingWindow) -> Self {
        RawWindow {
            width: w.width,
            level: w.level,
        }
    }
}

impl ViewingWindow {
    /// Whole-range window (W 2000, L 0).
    pub const RAW: ViewingWindow = ViewingWindow {
        width: 2000.0,
        level: 0.0,
    };
    /// Generic abdominal window (W 500, L 150).
    pub const ABDOMEN: ViewingWindow = ViewingWindow {
        width: 500.0,
        level: 150.0,
    };
    /// Liver window covering 99 % of liver HU on LiTS (W 196, L 91).
    pub const LIVER: ViewingWindow = ViewingWindow {
        width: 196.0,
        level: 91.0,
    };
    /// Tumor window covering 99 % of tumor HU on LiTS (W 169, L 65).
    pub const TUMOR: ViewingWindow = ViewingWindow {
        width: 169.0,
        level: 65.0,
    };

    pub fn new(width: f64, level: f64) -> Result<Self> {
        if !(width.is_finite() && level.is_finite() && width > 0.0) {
            return Err(Error::InvalidWindow { width, level });
        }
        let w = Self { width, level };
        if w.lower() >= w.upper() {
            return Err(Error::InvalidWindow { width, level });
        }
        Ok(w)
    }

    /// Window spanning `[lower, upper]`.
    pub fn from_bounds(lower: f64, upper: f64) -> Result<Self> {
        Self::new(upper - lower, 0.5 * (lower + upper))
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn lower(&self) -> f64 {
        self.level - self.width / 2.0
    }

    pub fn upper(&self) -> f64 {
        self.level + self.width / 2.0
    }

    pub fn contains(&self, hu: f64) -> bool {
        hu >= self.lower() && hu <= self.upper()
    }
}

/// Sign convention for HU calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum HuConvention {
    /// Water 0, air -1000.
    #[default]
    Conventional,
    /// `1000 (mu - mu_water) / (mu_air - mu_water)`: air lands at +1000.
    Verbatim,
}

/// Calibrates a linear attenuation coefficient to HU.
pub fn hu_from_attenuation(
    mu: f64,
    mu_water: f64,
    mu_air: f64,
    convention: HuConvention,
) -> Result<f64> {
    let denom = mu_air - mu_water;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateCalibration);
    }
    let verbatim = 1000.0 * ((mu - mu_water) / denom);
    Ok(match convention {
        HuConvention::Verbatim => verbatim,
        HuConvention::Conventional => -verbatim,
    })
}

fn resampled_shape(shape: Shape, from: Spacing, to: Spacing) -> Shape {
    let (n, a, b) = (shape.dims(), from.mm(), to.mm());
    Shape(core::array::from_fn(|axis| {
        (libm::round(n[axis] as f64 * a[axis] / b[axis]) as usize).max(1)
    }))
}

/// Source coordinate of output index `i` along one axis, clamped to the grid.
fn source_coord(i: usize, ratio: f64, n: usize) -> f64 {
    (i as f64 * ratio).min((n - 1) as f64)
}

/// Trilinear resampling to a new voxel spacing.
///
/// Voxel 0 stays anchored; output sample `i` reads input coordinate
/// `i * target / spacing`, clamped to the last input voxel.
pub fn resample_trilinear(v: &Volume, target: Spacing) -> Volume {
    let shape = v.shape();
    let out_shape = resampled_shape(shape, v.spacing(), target);
    if out_shape == shape && target == v.spacing() {
        return v.clone();
    }
    let [nz, ny, nx] = shape.dims();
    let ratio: [f64; 3] = core::array::from_fn(|a| target.mm()[a] / v.spacing().mm()[a]);
    let axis = |i: usize, a: usize, n: usize| {
        let c = source_coord(i, ratio[a], n);
        let i0 = libm::floor(c) as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, c - i0 as f64)
    };
    let src = v.voxels();
    let mut out = Vec::with_capacity(out_shape.len());
    for oz in 0..out_shape.z() {
        let (z0, z1, fz) = axis(oz, 0, nz);
        for oy in 0..out_shape.y() {
            let (y0, y1, fy) = axis(oy, 1, ny);
            for ox in 0..out_shape.x() {
                let (x0, x1, fx) = axis(ox, 2, nx);
                let at = |z, y, x| f64::from(src[shape.index(z, y, x)]);
                let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
                let c00 = lerp(at(z0, y0, x0), at(z0, y0, x1), fx);
                let c01 = lerp(at(z0, y1, x0), at(z0, y1, x1), fx);
                let c10 = lerp(at(z1, y0, x0), at(z1, y0, x1), fx);
                let c11 = lerp(at(z1, y1, x0), at(z1, y1, x1), fx);
                let c0 = lerp(c00, c01, fy);
                let c1 = lerp(c10, c11, fy);
                out.push(lerp(c0, c1, fz) as f32);
            }
        }
    }
    Volume {
        shape: out_shape,
        spacing: target,
        units: v.units(),
        voxels: out,
    }
}

/// Nearest-neighbour resampling of a label mask onto the grid that
/// [`resample_trilinear`] produces for the same spacings.
pub fn resample_nearest(m: &Mask, target: Spacing) -> Mask {
    let shape = m.shape();
    let out_shape = resampled_shape(shape, m.spacing(), target);
    let ratio: [f64; 3] = core::array::from_fn(|a| target.mm()[a] / m.spacing().mm()[a]);
    let near = |i: usize, a: usize| {
        let n = shape.dims()[a];
        (libm::round(source_coord(i, ratio[a], n)) as usize).min(n - 1)
    };
    let mut out = Vec::with_capacity(out_shape.len());
    for oz in 0..out_shape.z() {
        let z = near(oz, 0);
        for oy in 0..out_shape.y() {
            let y = near(oy, 1);
            for ox in 0..out_shape.x() {
                out.push(m.labels[shape.index(z, y, near(ox, 2))]);
            }
        }
    }
    Mask {
        shape: out_shape,
        spacing: target,
        label_names: m.label_names.clone(),
        labels: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_x(nx: usize) -> Volume {
        let shape = Shape::new(1, 1, nx).unwrap();
        Volume::new(
            shape,
            Spacing::default(),
            Units::Hu,
            (0..nx).map(|i| i as f32).collect(),
        )
        .unwrap()
    }

    #[test]
    fn water_calibrates_to_zero() {
        for conv in [HuConvention::Conventional, HuConvention::Verbatim] {
            assert_eq!(hu_from_attenuation(0.19, 0.19, 0.0002, conv).unwrap(), 0.0);
        }
    }

    #[test]
    fn air_sign_depends_on_convention() {
        let (w, a) = (0.19, 0.0002);
        assert_eq!(
            hu_from_attenuation(a, w, a, HuConvention::Verbatim).unwrap(),
            1000.0
        );
        assert_eq!(
            hu_from_attenuation(a, w, a, HuConvention::Conventional).unwrap(),
            -1000.0
        );
    }

    #[test]
    fn midpoint_attenuation_is_half_scale() {
        let (w, a) = (0.25, 0.05);
        let mid = 0.5 * (w + a);
        let hu = hu_from_attenuation(mid, w, a, HuConvention::Verbatim).unwrap();
        assert!((hu - 500.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_calibration_rejected() {
        assert_eq!(
            hu_from_attenuation(0.1, 0.2, 0.2, HuConvention::default()),
            Err(Error::DegenerateCalibration)
        );
    }

    #[test]
    fn window_bounds() {
        let w = ViewingWindow::TUMOR;
        assert_eq!(w.lower(), -19.5);
        assert_eq!(w.upper(), 149.5);
        assert!(ViewingWindow::new(0.0, 10.0).is_err());
        assert!(ViewingWindow::new(-5.0, 10.0).is_err());
        assert!(ViewingWindow::new(f64::NAN, 10.0).is_err());
        let b = ViewingWindow::from_bounds(-19.5, 149.5).unwrap();
        assert_eq!(b, w);
    }

    #[test]
    fn volume_invariants() {
        let shape = Shape::new(1, 2, 2).unwrap();
        assert!(Volume::new(shape, Spacing::default(), Units::Hu, vec![0.0; 3]).is_err());
        assert!(Volume::new(
            shape,
            Spacing::default(),
            Units::Normalized01,
            vec![0.0, 0.5, 1.0, 1.5]
        )
        .is_err());
        assert!(Spacing::new(1.0, 0.0, 1.0).is_err());
        assert!(Shape::new(0, 1, 1).is_err());
        let v = Volume::from_i16(shape, Spacing::default(), &[-1024, 0, 40, 3071]).unwrap();
        assert_eq!(v.voxels(), &[-1024.0, 0.0, 40.0, 3071.0]);
    }

    #[test]
    fn mask_rejects_undeclared_labels() {
        let shape = Shape::new(1, 1, 3).unwrap();
        assert_eq!(
            Mask::liver(shape, Spacing::default(), vec![0, 1, 7]),
            Err(Error::UndeclaredLabel(7))
        );
    }

    #[test]
    fn index_coords_roundtrip() {
        let s = Shape::new(3, 4, 5).unwrap();
        for i in 0..s.len() {
            let [z, y, x] = s.coords(i);
            assert_eq!(s.index(z, y, x), i);
        }
        assert_eq!(s.index(0, 0, 1), 1);
        assert_eq!(s.index(0, 1, 0), 5);
        assert_eq!(s.index(1, 0, 0), 20);
    }

    #[test]
    fn resample_identity_is_exact() {
        let v = ramp_x(7);
        assert_eq!(resample_trilinear(&v, Spacing::default()), v);
    }

    #[test]
    fn upsampled_ramp_has_halved_step() {
        let v = ramp_x(6);
        let out = resample_trilinear(&v, Spacing::new(1.0, 1.0, 0.5).unwrap());
        assert_eq!(out.shape().dims(), [1, 1, 12]);
        // last sample clamps to the final input voxel
        for i in 0..=10 {
            assert_eq!(out.voxels()[i], i as f32 * 0.5);
        }
        assert_eq!(out.voxels()[11], 5.0);
    }

    #[test]
    fn nearest_mask_follows_volume_grid() {
        let shape = Shape::new(1, 1, 4).unwrap();
        let m = Mask::liver(shape, Spacing::default(), vec![0, 1, 2, 2]).unwrap();
        let out = resample_nearest(&m, Spacing::new(1.0, 1.0, 2.0).unwrap());
        assert_eq!(out.labels(), &[0, 2]);
        let up = resample_nearest(&m, Spacing::new(1.0, 1.0, 0.5).unwrap());
        assert_eq!(up.shape().x(), 8);
        assert_eq!(up.labels()[0], 0);
        assert_eq!(up.labels()[2], 1);
    }

    proptest! {
        #[test]
        fn calibration_is_affine(a in -2.0f64..2.0, b in -2.0f64..2.0, t in 0.0f64..1.0) {
            let (w, air) = (0.2, 0.01);
            let h = |m| hu_from_attenuation(m, w, air, HuConvention::Conventional).unwrap();
            let mix = t * a + (1.0 - t) * b;
            prop_assert!((h(mix) - (t * h(a) + (1.0 - t) * h(b))).abs() < 1e-8);
        }

        #[test]
        fn constant_volume_stays_constant(
            value in -1000.0f32..1000.0,
            dims in prop::array::uniform3(1usize..6),
            target in prop::array::uniform3(0.4f64..3.0),
        ) {
            let shape = Shape::try_from(dims).unwrap();
            let v = Volume::filled(shape, Spacing::default(), Units::Hu, value).unwrap();
            let out = resample_trilinear(&v, Spacing::try_from(target).unwrap());
            prop_assert!(out.voxels().iter().all(|&x| x == value));
        }

        #[test]
        fn resampling_stays_within_input_range(
            values in prop::collection::vec(-1000.0f32..1000.0, 27),
            target in prop::array::uniform3(0.3f64..2.5),
        ) {
            let shape = Shape::new(3, 3, 3).unwrap();
            let v = Volume::new(shape, Spacing::default(), Units::Hu, values).unwrap();
            let (lo, hi) = v.min_max();
            let out = resample_trilinear(&v, Spacing::try_from(target).unwrap());
            for &x in out.voxels() {
                prop_assert!(x >= lo && x <= hi);
            }
        }
    }
}
