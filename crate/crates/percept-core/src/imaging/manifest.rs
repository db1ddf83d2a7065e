//! Dataset manifests: a CSV of `path,label` rows describing a directory of
//! sample files.

use std::path::{Path, PathBuf};

use super::ImagingError;

/// Read a `path,label` manifest. An optional literal `path,label` header is
/// skipped; paths are resolved relative to the manifest's own directory.
pub fn read_manifest(path: &Path) -> Result<Vec<(PathBuf, u32)>, ImagingError> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || (line_no == 1 && line == "path,label") {
            continue;
        }
        let (file, label_s) = line.rsplit_once(',').ok_or_else(|| ImagingError::ManifestRow {
            line: line_no,
            message: "expected 'path,label'".into(),
        })?;
        let label: u32 = label_s
            .trim()
            .parse()
            .map_err(|_| ImagingError::ManifestRow {
                line: line_no,
                message: format!("label '{}' is not an integer", label_s.trim()),
            })?;
        out.push((base.join(file.trim()), label));
    }
    Ok(out)
}
