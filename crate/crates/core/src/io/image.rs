//! Grayscale image input (PGM, PNG, IDX) and PGM output.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{Grid2, Shape};

/// An image with the peak value of its bit depth.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedImage {
    pub grid: Grid2,
    pub peak: f64,
}

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
const IDX_U8: u8 = 0x08;

/// Loads one grayscale image from a PGM (`P2`/`P5`), PNG or single-image IDX file.
pub fn load_image(path: impl AsRef<Path>) -> Result<LoadedImage> {
    let path = path.as_ref();
    let mut images = load_file(path)?;
    match images.len() {
        1 => Ok(images.pop().expect("one image").1),
        n => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: format!("expected a single image, file holds {n}"),
        }),
    }
}

/// Loads every image in `path`: a directory (supported files in name order),
/// an IDX container, or a single image file. Each image gets an id.
pub fn load_images(path: impl AsRef<Path>) -> Result<Vec<(String, LoadedImage)>> {
    let path = path.as_ref();
    if !path.is_dir() {
        return load_file(path);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_supported_extension(p))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_file(&f)?);
    }
    if out.is_empty() {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: "directory holds no pgm/png/idx images".into(),
        });
    }
    Ok(out)
}

fn is_supported_extension(p: &Path) -> bool {
    let name = p
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    [".pgm", ".png", "-ubyte", ".idx"].iter().any(|ext| name.ends_with(ext))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string()
}

fn load_file(path: &Path) -> Result<Vec<(String, LoadedImage)>> {
    let bytes = fs::read(path)?;
    let name = stem(path);
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        Ok(vec![(name, parse_pgm(&bytes, path)?)])
    } else if bytes.starts_with(PNG_SIGNATURE) {
        Ok(vec![(name, decode_png(&bytes, path)?)])
    } else if bytes.len() >= 4 && bytes[0] == 0 && bytes[1] == 0 && bytes[2] == IDX_U8 {
        let images = parse_idx(&bytes, path)?;
        let width = images.len().to_string().len();
        Ok(images
            .into_iter()
            .enumerate()
            .map(|(i, img)| (format!("{name}-{i:0width$}"), img))
            .collect())
    } else {
        Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            message: "not a PGM, PNG or unsigned-byte IDX file".into(),
        })
    }
}

/// Peak of the smallest bit depth holding `maxval`.
fn bit_depth_peak(maxval: u32) -> f64 {
    let bits = 32 - maxval.leading_zeros();
    ((1u64 << bits) - 1) as f64
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn header_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.err(format!("file ends before {what}"))
            } else {
                self.err(format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: self.path.to_path_buf(),
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Parses binary (`P5`, 8- or 16-bit big-endian) and ASCII (`P2`) PGM.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<LoadedImage> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if bytes.len() < 2 {
        return Err(cur.err("file ends inside the magic number"));
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(cur.err("not a P2/P5 graymap")),
    };
    cur.pos = 2;
    let width = cur.header_uint("width")? as usize;
    let height = cur.header_uint("height")? as usize;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image extent"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width * height;
    let mut values = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() {
            return Err(cur.err("file ends before the raster"));
        }
        cur.pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let need = n * bps;
        let available = bytes.len() - cur.pos;
        if available < need {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                offset: bytes.len(),
                message: format!("truncated raster: {available} of {need} bytes"),
            });
        }
        for i in 0..n {
            let at = cur.pos + i * bps;
            let v = if bps == 1 {
                bytes[at] as u32
            } else {
                u16::from_be_bytes([bytes[at], bytes[at + 1]]) as u32
            };
            if v > maxval {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            values.push(v as f64);
        }
    } else {
        for _ in 0..n {
            let at = cur.pos;
            let v = cur.header_uint("sample")?;
            if v > maxval {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    offset: at,
                    message: format!("sample {v} exceeds maxval {maxval}"),
                });
            }
            values.push(v as f64);
        }
    }
    Ok(LoadedImage {
        grid: Grid2::new(height, width, values)?,
        peak: bit_depth_peak(maxval),
    })
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<LoadedImage> {
    use image::DynamicImage;
    let unsupported = |message: String| Error::UnsupportedFormat {
        path: path.to_path_buf(),
        message,
    };
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| unsupported(format!("corrupt png: {e}")))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (values, peak): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(b) => (b.into_raw().into_iter().map(f64::from).collect(), 255.0),
        DynamicImage::ImageLumaA8(_) => (img.to_luma8().into_raw().into_iter().map(f64::from).collect(), 255.0),
        DynamicImage::ImageLuma16(b) => (b.into_raw().into_iter().map(f64::from).collect(), 65535.0),
        DynamicImage::ImageLumaA16(_) => (img.to_luma16().into_raw().into_iter().map(f64::from).collect(), 65535.0),
        other => return Err(unsupported(format!("{:?} png is not grayscale", other.color()))),
    };
    Ok(LoadedImage {
        grid: Grid2::new(h, w, values)?,
        peak,
    })
}

/// Parses an unsigned-byte IDX file with 2 (one image) or 3 (a stack) dimensions.
pub fn parse_idx(bytes: &[u8], path: &Path) -> Result<Vec<LoadedImage>> {
    let err = |offset: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        offset,
        message,
    };
    if bytes.len() < 4 {
        return Err(err(bytes.len(), "file ends inside the magic number".into()));
    }
    if bytes[2] != IDX_U8 {
        return Err(err(2, format!("element type {:#04x} is not unsigned byte", bytes[2])));
    }
    let ndims = bytes[3] as usize;
    if !(2..=3).contains(&ndims) {
        return Err(err(3, format!("{ndims} dimensions; expected 2 or 3")));
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(err(bytes.len(), "file ends inside the dimension header".into()));
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| {
            let at = 4 + 4 * i;
            u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]) as usize
        })
        .collect();
    let (count, rows, cols) = if ndims == 3 {
        (dims[0], dims[1], dims[2])
    } else {
        (1, dims[0], dims[1])
    };
    let shape = Shape::new(rows, cols);
    if shape.is_empty() || count == 0 {
        return Err(err(4, "zero dimension".into()));
    }
    let need = count * shape.len();
    if bytes.len() - header < need {
        return Err(err(
            bytes.len(),
            format!("truncated data: {} of {need} bytes", bytes.len() - header),
        ));
    }
    Ok(bytes[header..header + need]
        .chunks_exact(shape.len())
        .map(|c| LoadedImage {
            grid: Grid2::from_raw(shape, c.iter().map(|&b| f64::from(b)).collect()),
            peak: 255.0,
        })
        .collect())
}

/// Binary PGM of `grid` clamped to `[0, peak]` and rounded; 16-bit when `peak > 255`.
pub fn encode_pgm(grid: &Grid2, peak: f64) -> Vec<u8> {
    let maxval = peak.round().clamp(1.0, 65535.0) as u32;
    let mut out = format!("P5\n{} {}\n{}\n", grid.cols(), grid.rows(), maxval).into_bytes();
    for &v in grid.values() {
        let s = v.clamp(0.0, maxval as f64).round() as u32;
        if maxval < 256 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&(s as u16).to_be_bytes());
        }
    }
    out
}

pub fn write_pgm(path: impl AsRef<Path>, grid: &Grid2, peak: f64) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_pgm(grid, peak))
}

/// Rescales `grid` linearly so its range spans `[0, peak]`.
pub fn stretch(grid: &Grid2, peak: f64) -> Grid2 {
    let (lo, hi) = grid
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi > lo {
        grid.map(|v| (v - lo) / (hi - lo) * peak)
    } else {
        grid.map(|_| peak / 2.0)
    }
}
