//! Case discovery. A case `id` is an image `id.ctv` with its mask
//! `id_mask.ctv`, either alongside or in a separate mask directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MASK_SUFFIX: &str = "_mask";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

pub fn mask_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}{MASK_SUFFIX}.ctv"))
}

fn ctv_stems(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "ctv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Images in `dir` (files not ending in `_mask.ctv`) paired with masks from
/// `mask_dir`, sorted by case id.
pub fn discover(dir: &Path, mask_dir: Option<&Path>) -> Result<Vec<Case>> {
    let mask_dir = mask_dir.unwrap_or(dir);
    let mut cases = Vec::new();
    for (stem, image) in ctv_stems(dir)? {
        if stem.ends_with(MASK_SUFFIX) {
            continue;
        }
        let mask = mask_path(mask_dir, &stem);
        if !mask.exists() {
            return Err(Error::io(
                &mask,
                std::io::Error::new(std::io::ErrorKind::NotFound, "mask for case not found"),
            ));
        }
        cases.push(Case {
            id: stem,
            image,
            mask,
        });
    }
    Ok(cases)
}

/// Masks in `dir` keyed by case id. If any `<id>_mask.ctv` files exist only
/// those are taken; otherwise every `<id>.ctv` is a mask.
pub fn masks(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let all = ctv_stems(dir)?;
    let suffixed: Vec<_> = all
        .iter()
        .filter_map(|(stem, p)| Some((stem.strip_suffix(MASK_SUFFIX)?.to_string(), p.clone())))
        .collect();
    Ok(if suffixed.is_empty() { all } else { suffixed })
}

/// Looks up case `id` in a mask directory under either naming.
pub fn find_mask(dir: &Path, id: &str) -> Option<PathBuf> {
    [mask_path(dir, id), dir.join(format!("{id}.ctv"))]
        .into_iter()
        .find(|p| p.exists())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(p: &Path) {
        fs::write(p, b"{}").unwrap();
    }

    #[test]
    fn pairs_images_with_masks() {
        let dir = tempfile::tempdir().unwrap();
        for f in [
            "b.ctv",
            "b_mask.ctv",
            "a.ctv",
            "a_mask.ctv",
            "a.raw",
            "notes.txt",
        ] {
            touch(&dir.path().join(f));
        }
        let cases = discover(dir.path(), None).unwrap();
        let ids: Vec<_> = cases.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(cases[0].mask, dir.path().join("a_mask.ctv"));
        let m = masks(dir.path()).unwrap();
        assert_eq!(
            m,
            [
                ("a".to_string(), dir.path().join("a_mask.ctv")),
                ("b".to_string(), dir.path().join("b_mask.ctv"))
            ]
        );
        let plain = tempfile::tempdir().unwrap();
        touch(&plain.path().join("c.ctv"));
        assert_eq!(masks(plain.path()).unwrap()[0].0, "c");
        assert_eq!(
            find_mask(dir.path(), "b"),
            Some(dir.path().join("b_mask.ctv"))
        );
        assert_eq!(find_mask(dir.path(), "c"), None);
    }

    #[test]
    fn missing_mask_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("lonely.ctv"));
        assert_eq!(
            discover(dir.path(), None).unwrap_err().kind().exit_code(),
            3
        );
    }
}
