//! Artifact emission: atomic file writes and output-directory discipline.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

/// Creates the output directory, refusing to reuse an existing one unless
/// `force` is set.
pub fn prepare_out_dir(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        if !force {
            bail!(
                "output directory {} already exists; pass --force to overwrite",
                out.display()
            );
        }
    } else {
        fs::create_dir_all(out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
    }
    Ok(())
}

/// Writes bytes to `dir/name` via a hidden temp file and rename, so an
/// interrupted run never leaves a partial file under the final name.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let tmp = dir.join(format!(".tmp.{name}"));
    fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
    let final_path = dir.join(name);
    fs::rename(&tmp, &final_path)
        .with_context(|| format!("cannot move temp file into place as {name}"))?;
    Ok(final_path)
}

/// Builds a CSV in memory and writes it atomically. The row closure receives
/// a writer that already holds the header.
pub fn write_csv<F>(dir: &Path, name: &str, header: &[&str], fill: F) -> Result<PathBuf>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header)?;
    }
    fill(&mut w)?;
    let bytes = w.into_inner().context("csv buffer flush failed")?;
    write_atomic(dir, name, &bytes)
}

/// Best-effort SVG emission: failures are reported on stderr and swallowed so
/// chart trouble never changes the exit status.
pub fn write_svg_best_effort(dir: &Path, name: &str, render: impl FnOnce() -> Result<String>) {
    match render().and_then(|svg| write_atomic(dir, name, svg.as_bytes()).map(|_| ())) {
        Ok(()) => {}
        Err(e) => eprintln!("warning: skipping {name}: {e:#}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_atomic(dir.path(), "x.csv", b"a,b\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"a,b\n");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.csv")]);
    }

    #[test]
    fn existing_dir_refused_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        prepare_out_dir(&out, false).unwrap();
        let err = prepare_out_dir(&out, false).unwrap_err();
        assert!(format!("{err}").contains("--force"));
        prepare_out_dir(&out, true).unwrap();
    }
}
