//! Output plumbing: atomic writes and batch output-path resolution.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use esrpcb_core::image::{save_image, ImageBuffer};

/// Writes via a temporary file in the target directory plus a rename, so
/// readers never observe a partial file.
pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    std::fs::write(tmp.path(), bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    widen_temp_permissions(path);
    Ok(())
}

/// Temp files are created 0600; give persisted outputs the usual mode.
fn widen_temp_permissions(path: &Path) {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let _ = std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o644));
    }
}

pub fn atomic_write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write_bytes(path, text.as_bytes())
}

/// Atomic image save: encodes into a temp file with the same extension,
/// then renames into place.
pub fn atomic_save_image(img: &ImageBuffer, path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("png")
        .to_string();
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let tmp = tempfile::Builder::new()
        .suffix(&format!(".{ext}"))
        .tempfile_in(dir)?;
    save_image(img, tmp.path())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    widen_temp_permissions(path);
    Ok(())
}

/// Splits positional arguments into inputs and outputs. With `-o` every
/// positional is an input; without it, exactly two positionals are read as
/// `INPUT OUTPUT`.
pub fn resolve_in_out(
    mut inputs: Vec<PathBuf>,
    out: Option<PathBuf>,
    suffix: &str,
    default_ext: &str,
) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    match out {
        Some(out) => {
            let outs = resolve_outputs(&inputs, &out, suffix, default_ext)?;
            Ok((inputs, outs))
        }
        None if inputs.len() == 2 => {
            let output = inputs.pop().expect("two elements");
            Ok((inputs, vec![output]))
        }
        None => bail!("specify an output with -o OUT, or give exactly INPUT OUTPUT"),
    }
}

/// Maps each input to its output path: a single input may write to an
/// explicit file path; multiple inputs require `out` to be a directory,
/// where each file lands as `{stem}{suffix}.{ext}`.
pub fn resolve_outputs(
    inputs: &[PathBuf],
    out: &Path,
    suffix: &str,
    default_ext: &str,
) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        bail!("no input files given");
    }
    let out_is_dir = out.is_dir() || (inputs.len() > 1 && out.extension().is_none());
    if inputs.len() > 1 && !out_is_dir {
        bail!(
            "{} is not a directory but {} inputs were given",
            out.display(),
            inputs.len()
        );
    }
    if out_is_dir {
        std::fs::create_dir_all(out)?;
        inputs
            .iter()
            .map(|input| {
                let stem = input
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .context("input file has no stem")?;
                Ok(out.join(format!("{stem}{suffix}.{default_ext}")))
            })
            .collect()
    } else {
        Ok(vec![out.to_path_buf()])
    }
}

/// Inserts a channel tag before the extension: `edges.png` → `edges_gx.png`.
pub fn tag_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("png");
    path.with_file_name(format!("{stem}_{tag}.{ext}"))
}
