//! File plumbing: atomic writes and the parameter CSV reader.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mfm_core::model::ParameterSet;

/// Write `content` to a sibling temp file and rename it into place, so an
/// interrupted run never leaves a partially written output.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Read parameter sets from CSV: a header naming the 32 fields, one row per
/// set. Comment lines starting with `#` are skipped.
pub fn read_params_csv(path: &Path) -> Result<Vec<ParameterSet>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    let mut seen_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            seen_header = true;
            if line.starts_with(|c: char| c.is_alphabetic()) {
                continue;
            }
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 32 {
            bail!(
                "{}:{}: expected 32 fields, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            );
        }
        let mut vals = [0.0f64; 32];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.trim().parse().with_context(|| {
                format!("{}:{}: bad number {f:?}", path.display(), lineno + 1)
            })?;
        }
        out.push(ParameterSet::from_array(&vals));
    }
    if out.is_empty() {
        bail!("{}: no parameter rows", path.display());
    }
    Ok(out)
}
