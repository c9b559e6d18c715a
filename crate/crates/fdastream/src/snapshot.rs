//! Snapshot files. Writes go to a temporary file in the target directory
//! that is renamed into place, so a failed write never leaves a partial
//! file behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use fdastream_core::OnlineEstimator;

use crate::error::Result;

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn save(path: &Path, est: &OnlineEstimator) -> Result<()> {
    write_atomic(path, &est.to_bytes())
}

pub fn load(path: &Path) -> Result<OnlineEstimator> {
    let bytes = fs::read(path)?;
    Ok(OnlineEstimator::from_bytes(&bytes)?)
}
