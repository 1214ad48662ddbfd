//! All-or-nothing output: files are written to hidden temporaries beside their
//! destination and renamed into place only once every output of a command exists.

use anyhow::{bail, Context, Result};
use laaca_core::image::{save_image, ImageTensor};
use std::path::{Path, PathBuf};

pub struct Staged {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl Drop for Staged {
    fn drop(&mut self) {
        if !self.committed {
            let _ = std::fs::remove_file(&self.tmp);
        }
    }
}

fn temp_for(dest: &Path) -> PathBuf {
    let name = dest
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    dest.with_file_name(format!(".{name}.{}.partial", std::process::id()))
}

/// Fails if any destination exists and `force` is not set.
pub fn ensure_writable(dests: &[PathBuf], force: bool) -> Result<()> {
    for d in dests {
        if d.exists() && !force {
            bail!("{} already exists (use --force to overwrite)", d.display());
        }
    }
    Ok(())
}

pub fn stage_image(img: &ImageTensor, dest: &Path) -> Result<Staged> {
    let tmp = temp_for(dest);
    let staged = Staged {
        tmp,
        dest: dest.to_path_buf(),
        committed: false,
    };
    save_image(img, &staged.tmp).with_context(|| format!("writing {}", dest.display()))?;
    Ok(staged)
}

pub fn stage_bytes(bytes: &[u8], dest: &Path) -> Result<Staged> {
    let tmp = temp_for(dest);
    let staged = Staged {
        tmp,
        dest: dest.to_path_buf(),
        committed: false,
    };
    std::fs::write(&staged.tmp, bytes).with_context(|| format!("writing {}", dest.display()))?;
    Ok(staged)
}

pub fn commit(mut staged: Vec<Staged>) -> Result<()> {
    for s in &mut staged {
        std::fs::rename(&s.tmp, &s.dest).with_context(|| format!("renaming into {}", s.dest.display()))?;
        s.committed = true;
    }
    Ok(())
}
