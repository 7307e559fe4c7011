//! Number formatting and atomic file output.

use std::io::Write;
use std::path::Path;

use crate::failure::{CliResult, Failure};

/// `x` with 17 significant digits, enough to read back the same double.
/// Positional notation for ordinary magnitudes, scientific otherwise.
pub fn sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..=15).contains(&e) {
        format!("{:.*}", (16 - e) as usize, x)
    } else {
        format!("{x:.16e}")
    }
}

/// Writes via a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let fail = |e: std::io::Error| Failure::data(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Failure::usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(fail)
}
