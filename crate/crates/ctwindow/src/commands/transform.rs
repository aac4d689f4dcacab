use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ctwindow_core::window::apply_window;
use ctwindow_core::{AugmentationSpec, Normalization, ViewingWindow};
use rayon::prelude::*;
use serde::Serialize;

use super::{normalization, pool, sample_stream, stem, Augmenter, Sampled};
use crate::cli::{AugmentArgs, WindowArgs};
use crate::ctv::{read_volume, write_volume, Dtype};
use crate::error::{Context, Error, Result};
use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::report::write_json;
use crate::specdoc::SpecDocument;

fn case_ids(inputs: &[PathBuf]) -> Result<Vec<String>> {
    let ids = inputs.iter().map(|p| stem(p)).collect::<Result<Vec<_>>>()?;
    let unique: BTreeSet<_> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::Usage("input file names must be unique".into()));
    }
    Ok(ids)
}

fn output_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.ctv"))
}

pub fn window(a: WindowArgs, jobs: Option<usize>) -> Result<()> {
    let mut manifest = ManifestBuilder::new("window");
    let doc_spec = match &a.spec {
        Some(path) => {
            manifest.spec(path)?;
            SpecDocument::load(path)?.window
        }
        None => None,
    };
    let (width, level) = match (a.width, a.level, doc_spec) {
        (Some(w), Some(l), _) => (w, l),
        (w, l, Some(s)) => (w.unwrap_or(s.base.width()), l.unwrap_or(s.base.level())),
        _ => {
            return Err(Error::Usage(
                "window needs --width and --level, or a --spec".into(),
            ))
        }
    };
    let base = ViewingWindow::new(width, level).context(|| "window".into())?;
    let current = doc_spec.map_or(Normalization::MinMaxSampledWindow, |s| s.normalization);
    let norm = normalization(a.normalization, current, a.zscore_mean, a.zscore_std)?;
    let spec = AugmentationSpec::static_window(base, norm);
    spec.validate().context(|| "window".into())?;
    manifest.effective_spec(
        SpecDocument {
            window: Some(spec),
            pipeline: None,
        }
        .to_value(),
    );

    let ids = case_ids(&a.inputs)?;
    for p in &a.inputs {
        manifest.input(p)?;
    }
    let map = spec.output_map();
    let outputs = pool(jobs)?.install(|| {
        a.inputs
            .par_iter()
            .zip(&ids)
            .map(|(input, id)| {
                let raw = read_volume(input)?;
                let out = apply_window(&raw, base, map).context(|| input.display().to_string())?;
                let path = output_path(&a.out_dir, id);
                write_volume(&path, &out, Dtype::F32)?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    for p in &outputs {
        manifest.output(p);
    }
    manifest.finish(&manifest_path_for(&a.out_dir, true))?;
    println!(
        "windowed {} volume(s) into {}",
        outputs.len(),
        a.out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct SampleRecord {
    case_id: String,
    index: usize,
    output: String,
    sampled: Sampled,
}

pub fn augment(a: AugmentArgs, jobs: Option<usize>) -> Result<()> {
    let mut manifest = ManifestBuilder::new("augment");
    let aug = Augmenter::new(a.method, &a.spec, &a.transform, &mut manifest)?;
    manifest.effective_spec(aug.effective_spec());
    manifest.seed(aug.spec.seed);
    let ids = case_ids(&a.inputs)?;
    for p in &a.inputs {
        manifest.input(p)?;
    }
    let per_case = pool(jobs)?.install(|| {
        a.inputs
            .par_iter()
            .zip(&ids)
            .map(|(input, id)| {
                let raw = read_volume(input)?;
                let mut records = Vec::with_capacity(a.count);
                for index in 0..a.count {
                    let mut rng = sample_stream(aug.spec.seed, id, index);
                    let sample = aug.sample(&raw, &mut rng)?;
                    let name = format!("{id}_aug{index:03}");
                    write_volume(&output_path(&a.out_dir, &name), &sample.volume, Dtype::F32)?;
                    records.push(SampleRecord {
                        case_id: id.clone(),
                        index,
                        output: format!("{name}.ctv"),
                        sampled: sample.sampled,
                    });
                }
                Ok(records)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let records: Vec<SampleRecord> = per_case.into_iter().flatten().collect();
    for r in &records {
        manifest.output(&a.out_dir.join(&r.output));
    }
    let samples = a.out_dir.join("samples.json");
    write_json(&samples, &records)?;
    manifest.output(&samples);
    manifest.finish(&manifest_path_for(&a.out_dir, true))?;
    println!(
        "wrote {} sample(s) to {}",
        records.len(),
        a.out_dir.display()
    );
    Ok(())
}
