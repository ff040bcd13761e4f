//! File formats: images in and out, checkpoints, atomic writes.

mod checkpoint;
mod image;

use std::fs;
use std::path::Path;

pub use self::image::{encode_pgm, load_image, load_images, parse_idx, parse_pgm, stretch, write_pgm, LoadedImage};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, ARRAYS_FILE, CHECKPOINT_VERSION, MANIFEST_FILE};

use crate::error::Result;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
