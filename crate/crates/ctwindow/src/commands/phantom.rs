use ctwindow_core::phantom::{generate, PhantomSpec};

use crate::cli::{DtypeArg, PhantomArgs};
use crate::corpus::mask_path;
use crate::ctv::{write_mask, write_volume, Dtype};
use crate::error::{Context, Error, Result};
use crate::manifest::{manifest_path_for, ManifestBuilder};

fn effective(a: &PhantomArgs, manifest: &mut ManifestBuilder) -> Result<PhantomSpec> {
    let mut spec = match &a.spec {
        Some(path) => {
            manifest.spec(path)?;
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_slice(&bytes).map_err(|e| Error::Spec {
                path: path.clone(),
                message: e.to_string(),
            })?
        }
        None => PhantomSpec::default(),
    };
    if let Some(s) = &a.shape {
        spec.shape = [s[0], s[1], s[2]];
    }
    if let Some(s) = &a.spacing {
        spec.spacing = [s[0], s[1], s[2]];
    }
    if !a.tumor_offset.is_empty() {
        spec.tumor_offsets = a.tumor_offset.clone();
    }
    let set = |field: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *field = v;
        }
    };
    set(&mut spec.body_hu, a.body_hu);
    set(&mut spec.liver_hu, a.liver_hu);
    set(&mut spec.tumor_radius, a.tumor_radius);
    set(&mut spec.bone_hu, a.bone_hu);
    set(&mut spec.air_hu, a.air_hu);
    set(&mut spec.ce_offset, a.ce_offset);
    set(&mut spec.noise_sigma, a.noise_sigma);
    spec.seed = a.seed.unwrap_or(spec.seed);
    spec.validate().context(|| "phantom spec".into())?;
    Ok(spec)
}

pub fn phantom(a: PhantomArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("phantom");
    let spec = effective(&a, &mut manifest)?;
    manifest
        .effective_spec(serde_json::to_value(&spec).map_err(|e| Error::Internal(e.to_string()))?);
    manifest.seed(spec.seed);
    let dtype = match a.dtype {
        DtypeArg::F32 => Dtype::F32,
        DtypeArg::I16 => Dtype::I16,
    };
    for i in 0..a.count {
        let (name, case_spec) = if a.count == 1 {
            (a.name.clone(), spec.clone())
        } else {
            (
                format!("{}_{i:03}", a.name),
                PhantomSpec {
                    seed: spec.seed.wrapping_add(i as u64),
                    ..spec.clone()
                },
            )
        };
        let (v, m) = generate(&case_spec).context(|| name.clone())?;
        let vp = a.out_dir.join(format!("{name}.ctv"));
        let mp = mask_path(&a.out_dir, &name);
        write_volume(&vp, &v, dtype)?;
        write_mask(&mp, &m)?;
        manifest.output(&vp);
        manifest.output(&mp);
    }
    manifest.finish(&manifest_path_for(&a.out_dir, true))?;
    println!("wrote {} phantom(s) to {}", a.count, a.out_dir.display());
    Ok(())
}
