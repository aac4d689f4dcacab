//! JSON spec documents.
//!
//! The top level holds the [`AugmentationSpec`] fields. An optional
//! `pipeline` key holds a baseline [`Pipeline`] in the same document.

use std::fs;
use std::path::Path;

use ctwindow_core::intensity::Pipeline;
use ctwindow_core::AugmentationSpec;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

const WINDOW_KEYS: [&str; 7] = [
    "base",
    "level_range",
    "width_range",
    "p_level",
    "p_width",
    "normalization",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecDocument {
    pub window: Option<AugmentationSpec>,
    pub pipeline: Option<Pipeline>,
}

impl SpecDocument {
    pub fn from_value(value: Value) -> std::result::Result<Self, String> {
        let Value::Object(mut map) = value else {
            return Err("spec must be a JSON object".into());
        };
        let mut pipeline = match map.remove("pipeline") {
            Some(p) => {
                let p: Pipeline =
                    serde_json::from_value(p).map_err(|e| format!("pipeline: {e}"))?;
                p.validate().map_err(|e| format!("pipeline: {e}"))?;
                Some(p)
            }
            None => None,
        };
        if let Some(k) = map.keys().find(|k| !WINDOW_KEYS.contains(&k.as_str())) {
            return Err(format!("unknown field {k:?}"));
        }
        let only_seed = map.len() == 1 && map.contains_key("seed");
        let window = if map.is_empty() || only_seed && pipeline.is_some() {
            if let (Some(p), Some(seed)) = (pipeline.as_mut(), map.get("seed")) {
                p.seed = seed.as_u64().ok_or("seed must be a non-negative integer")?;
            }
            None
        } else {
            Some(serde_json::from_value(Value::Object(map)).map_err(|e| e.to_string())?)
        };
        Ok(Self { window, pipeline })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let spec_err = |message: String| Error::Spec {
            path: path.into(),
            message,
        };
        let value: Value = serde_json::from_slice(&bytes).map_err(|e| spec_err(e.to_string()))?;
        Self::from_value(value).map_err(spec_err)
    }

    pub fn to_value(&self) -> Value {
        let mut map = match self.window.map(serde_json::to_value) {
            Some(Ok(Value::Object(m))) => m,
            _ => Map::new(),
        };
        if let Some(p) = &self.pipeline {
            map.insert(
                "pipeline".into(),
                serde_json::to_value(p).unwrap_or(Value::Null),
            );
        }
        Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctwindow_core::intensity::{preset_nnunet, preset_unetr};
    use ctwindow_core::{Normalization, ViewingWindow};

    #[test]
    fn window_spec_roundtrip() {
        let doc = SpecDocument {
            window: Some(AugmentationSpec::liver_tumor_default()),
            pipeline: None,
        };
        let v = doc.to_value();
        assert_eq!(v["base"]["width"], 169.0);
        assert_eq!(v["normalization"], "MinMaxSampledWindow");
        assert_eq!(SpecDocument::from_value(v).unwrap(), doc);
    }

    #[test]
    fn presets_roundtrip_under_pipeline_key() {
        for p in [preset_nnunet(), preset_unetr()] {
            let doc = SpecDocument {
                window: Some(AugmentationSpec::static_window(
                    ViewingWindow::TUMOR,
                    Normalization::MinMaxSampledWindow,
                )),
                pipeline: Some(p),
            };
            let text = serde_json::to_string(&doc.to_value()).unwrap();
            let back = SpecDocument::from_value(serde_json::from_str(&text).unwrap()).unwrap();
            assert_eq!(back, doc);
        }
        let only = SpecDocument {
            window: None,
            pipeline: Some(preset_unetr()),
        };
        assert_eq!(SpecDocument::from_value(only.to_value()).unwrap(), only);
    }

    #[test]
    fn zscore_normalization_parses() {
        let v = serde_json::json!({
            "base": {"width": 169.0, "level": 65.0},
            "level_range": [12.0, 130.0],
            "width_range": [129.0, 298.0],
            "p_level": 0.3,
            "p_width": 0.3,
            "normalization": {"ZScoreGlobal": {"mean": 90.0, "std": 40.0}},
            "seed": 7
        });
        let spec = SpecDocument::from_value(v).unwrap().window.unwrap();
        assert_eq!(
            spec.normalization,
            Normalization::ZScoreGlobal {
                mean: 90.0,
                std: 40.0
            }
        );
        assert_eq!(spec.seed, 7);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        let mut v = SpecDocument {
            window: Some(AugmentationSpec::liver_tumor_default()),
            pipeline: None,
        }
        .to_value();
        v["p_level"] = serde_json::json!(1.5);
        assert!(SpecDocument::from_value(v.clone()).is_err());
        v["p_level"] = serde_json::json!(0.3);
        v["levle_range"] = serde_json::json!([0, 1]);
        assert!(SpecDocument::from_value(v)
            .unwrap_err()
            .contains("levle_range"));
        assert!(SpecDocument::from_value(serde_json::json!([1, 2])).is_err());
    }
}
