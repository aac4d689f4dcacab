use std::path::PathBuf;

use ctwindow_core::artifact::{
    detect_artifact, histogram as histogram_of_volume, shape_distance, ArtifactReport, Histogram,
};
use ctwindow_core::Volume;
use serde::Serialize;
use serde_json::Value;

use super::{sample_stream, stem, Augmenter, Sampled};
use crate::cli::{ArtifactArgs, HistogramArgs, Method};
use crate::ctv::read_volume;
use crate::error::{Context, Error, Result};
use crate::manifest::{manifest_path_for, ManifestBuilder};
use crate::report::{write_csv, write_json};

#[derive(Debug, Serialize)]
struct PairReport {
    before: PathBuf,
    after: PathBuf,
    tolerance: f64,
    report: ArtifactReport,
}

#[derive(Debug, Serialize)]
struct Draw {
    draw: usize,
    sampled: Sampled,
    report: ArtifactReport,
}

#[derive(Debug, Serialize)]
struct SimulationReport {
    input: PathBuf,
    method: Method,
    spec: Value,
    tolerance: f64,
    draws: usize,
    fired: usize,
    lower_fired: usize,
    upper_fired: usize,
    results: Vec<Draw>,
}

pub fn artifact_check(a: ArtifactArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("artifact-check");
    if a.tolerance.is_nan() || a.tolerance < 0.0 {
        return Err(Error::Usage(format!(
            "--tolerance {} must be non-negative",
            a.tolerance
        )));
    }
    let summary = match (&a.before, &a.after, &a.input, a.method) {
        (Some(before), Some(after), _, _) => {
            manifest.input(before)?;
            manifest.input(after)?;
            let report = detect_artifact(&read_volume(before)?, &read_volume(after)?, a.tolerance)
                .context(|| "artifact check".into())?;
            let fired = report.any();
            write_json(
                &a.out,
                &PairReport {
                    before: before.clone(),
                    after: after.clone(),
                    tolerance: a.tolerance,
                    report,
                },
            )?;
            format!("artifact: {fired}")
        }
        (_, _, Some(input), Some(method)) => {
            manifest.input(input)?;
            let aug = Augmenter::new(method, &a.spec, &a.transform, &mut manifest)?;
            manifest.effective_spec(aug.effective_spec());
            manifest.seed(aug.spec.seed);
            let raw = read_volume(input)?;
            let id = stem(input)?;
            let mut results = Vec::with_capacity(a.draws);
            for draw in 0..a.draws {
                let sample = aug.sample(&raw, &mut sample_stream(aug.spec.seed, &id, draw))?;
                let reference = aug.reference(&raw, &sample)?;
                let report = detect_artifact(&reference, &sample.volume, a.tolerance)
                    .context(|| format!("draw {draw}"))?;
                results.push(Draw {
                    draw,
                    sampled: sample.sampled,
                    report,
                });
            }
            let count =
                |f: fn(&ArtifactReport) -> bool| results.iter().filter(|d| f(&d.report)).count();
            let report = SimulationReport {
                input: input.clone(),
                method,
                spec: aug.effective_spec(),
                tolerance: a.tolerance,
                draws: a.draws,
                fired: count(ArtifactReport::any),
                lower_fired: count(|r| r.lower_artifact),
                upper_fired: count(|r| r.upper_artifact),
                results,
            };
            write_json(&a.out, &report)?;
            format!(
                "{} of {} draws produced an artifact",
                report.fired, report.draws
            )
        }
        _ => {
            return Err(Error::Usage(
                "artifact-check needs --before/--after or --input/--method".into(),
            ))
        }
    };
    manifest.output(&a.out);
    manifest.finish(&manifest_path_for(&a.out, false))?;
    println!("{summary}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct Series {
    name: &'static str,
    histogram: Histogram,
}

#[derive(Debug, Serialize)]
struct HistogramReport {
    input: PathBuf,
    bins: usize,
    range: [f64; 2],
    method: Option<Method>,
    sampled: Option<Sampled>,
    series: Vec<Series>,
    shape_distance: Option<f64>,
}

#[derive(Debug, Serialize)]
struct BinRow {
    series: &'static str,
    bin_lo: f64,
    bin_hi: f64,
    count: u64,
}

fn value_range(volumes: &[&Volume]) -> [f64; 2] {
    let (lo, hi) = volumes
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| {
            let (a, b) = v.min_max();
            (lo.min(a), hi.max(b))
        });
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    if lo < hi {
        [lo, hi]
    } else {
        [lo - 0.5, hi + 0.5]
    }
}

pub fn histogram(a: HistogramArgs) -> Result<()> {
    let mut manifest = ManifestBuilder::new("histogram");
    manifest.input(&a.input)?;
    let input = read_volume(&a.input)?;
    let (named, sampled): (Vec<(&'static str, Volume)>, Option<Sampled>) = match a.method {
        None => (vec![("input", input)], None),
        Some(method) => {
            let aug = Augmenter::new(method, &a.spec, &a.transform, &mut manifest)?;
            manifest.effective_spec(aug.effective_spec());
            manifest.seed(aug.spec.seed);
            let id = stem(&a.input)?;
            let before = aug.base_clip(&input)?;
            let sample = aug.sample(&input, &mut sample_stream(aug.spec.seed, &id, 0))?;
            (
                vec![("before", before), ("after", sample.volume)],
                Some(sample.sampled),
            )
        }
    };
    let range = match &a.range {
        Some(r) => [r[0], r[1]],
        None => value_range(&named.iter().map(|(_, v)| v).collect::<Vec<_>>()),
    };
    let series = named
        .iter()
        .map(|(name, v)| {
            Ok(Series {
                name,
                histogram: histogram_of_volume(v, a.bins, range).context(|| "histogram".into())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shape_distance = match series.as_slice() {
        [b, c] => {
            Some(shape_distance(&b.histogram, &c.histogram).context(|| "shape distance".into())?)
        }
        _ => None,
    };
    if let Some(csv) = &a.csv {
        let rows = series.iter().flat_map(|s| {
            let e = &s.histogram.bin_edges;
            s.histogram
                .counts
                .iter()
                .enumerate()
                .map(move |(i, &count)| BinRow {
                    series: s.name,
                    bin_lo: e[i],
                    bin_hi: e[i + 1],
                    count,
                })
        });
        write_csv(csv, rows)?;
        manifest.output(csv);
    }
    let report = HistogramReport {
        input: a.input.clone(),
        bins: a.bins,
        range,
        method: a.method,
        sampled,
        series,
        shape_distance,
    };
    write_json(&a.out, &report)?;
    manifest.output(&a.out);
    manifest.finish(&manifest_path_for(&a.out, false))?;
    match shape_distance {
        Some(d) => println!("shape distance {d}"),
        None => println!("wrote {}", a.out.display()),
    }
    Ok(())
}
