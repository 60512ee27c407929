//! Binary netpbm (P5/P6, maxval 255) reader and writer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::media::{Dims, MaskStack, VideoTensor};
use crate::Scalar;

/// A decoded 8-bit netpbm image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub data: Vec<u8>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
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

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .filter(|s| !s.is_empty())
    }
}

fn parse_pnm(bytes: &[u8], path: &Path) -> Result<PnmImage> {
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match cur.token() {
        Some("P5") => 1,
        Some("P6") => 3,
        Some(other) => return Err(malformed(&format!("unsupported magic {other:?}"))),
        None => return Err(malformed("empty file")),
    };
    let mut number = |what: &str| -> Result<usize> {
        cur.token()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| malformed(&format!("missing or invalid {what}")))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if maxval != 255 {
        return Err(malformed(&format!("maxval {maxval}, only 255 is supported")));
    }
    // exactly one whitespace byte separates the header from the raster
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(malformed("missing whitespace after maxval"));
    }
    let start = cur.pos + 1;
    let expected = width * height * channels;
    let found = bytes.len().saturating_sub(start);
    if found < expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(PnmImage {
        width,
        height,
        channels,
        data: bytes[start..start + expected].to_vec(),
    })
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<PnmImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&bytes, path)
}

fn write_pnm(path: &Path, magic: &str, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() + 20);
    write!(buf, "{magic}\n{width} {height}\n255\n").expect("write to Vec");
    buf.extend_from_slice(data);
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} bytes for a {width}x{height} P5 image",
            data.len()
        )));
    }
    write_pnm(path.as_ref(), "P5", width, height, data)
}

pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if data.len() != width * height * 3 {
        return Err(Error::DimensionMismatch(format!(
            "{} bytes for a {width}x{height} P6 image",
            data.len()
        )));
    }
    write_pnm(path.as_ref(), "P6", width, height, data)
}

fn byte_to_unit<T: Scalar>(b: u8) -> T {
    T::of_usize(b as usize) / T::lit(255.0)
}

/// Reads an ordered list of P5/P6 files into a video; intensities are `byte / 255`.
pub fn read_frames<T: Scalar, P: AsRef<Path>>(paths: &[P]) -> Result<VideoTensor<T>> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Empty("no frame files".into()))?;
    let head = read_pnm(first)?;
    let (w, h, c) = (head.width, head.height, head.channels);
    let mut data: Vec<T> = Vec::with_capacity(paths.len() * w * h * c);
    data.extend(head.data.iter().map(|&b| byte_to_unit::<T>(b)));
    for p in &paths[1..] {
        let img = read_pnm(p)?;
        if (img.width, img.height, img.channels) != (w, h, c) {
            return Err(Error::DimensionMismatch(format!(
                "{} is {}x{}x{}, first frame is {w}x{h}x{c}",
                p.as_ref().display(),
                img.width,
                img.height,
                img.channels
            )));
        }
        data.extend(img.data.iter().map(|&b| byte_to_unit::<T>(b)));
    }
    VideoTensor::new(paths.len(), h, w, c, data)
}

/// Quantizes `[0,1]` values to bytes with round-half-up: `floor(v·255 + 0.5)`.
pub fn quantize_unit<T: Scalar>(v: T) -> u8 {
    let scaled = (v.to_f64_lossy() * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

/// Writes one frame of values in `[0,1]` as an 8-bit P5 file.
pub fn write_mask_pgm<T: Scalar>(
    values: &[T],
    height: usize,
    width: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    if let Some(bad) = values
        .iter()
        .find(|v| !(**v >= T::zero() && **v <= T::one()))
    {
        return Err(Error::OutOfRange(format!("mask value {bad} outside [0,1]")));
    }
    let bytes: Vec<u8> = values.iter().map(|&v| quantize_unit(v)).collect();
    write_pgm(path, width, height, &bytes)
}

/// Reads a P5 file as a binary mask (`byte ≥ 128` is foreground).
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<bool>)> {
    let path = path.as_ref();
    let img = read_pnm(path)?;
    if img.channels != 1 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "mask must be P5".into(),
        });
    }
    Ok((
        img.height,
        img.width,
        img.data.iter().map(|&b| b >= 128).collect(),
    ))
}

/// Reads a list of mask files into a stack.
pub fn read_mask_stack<P: AsRef<Path>>(paths: &[P]) -> Result<MaskStack> {
    let mut data = Vec::new();
    let mut size = None;
    for p in paths {
        let (h, w, m) = read_mask_pgm(p)?;
        match size {
            None => size = Some((h, w)),
            Some(s) if s != (h, w) => {
                return Err(Error::DimensionMismatch(format!(
                    "{} is {w}x{h}, expected {}x{}",
                    p.as_ref().display(),
                    s.1,
                    s.0
                )))
            }
            _ => {}
        }
        data.extend(m);
    }
    let (h, w) = size.ok_or_else(|| Error::Empty("no mask files".into()))?;
    MaskStack::new(Dims::new(paths.len(), h, w), data)
}

/// Reads one P5 probability map per frame; values are `byte / 255`.
pub fn read_probability_maps<T: Scalar, P: AsRef<Path>>(
    paths: &[P],
    dims: Dims,
) -> Result<Vec<Vec<T>>> {
    if paths.len() != dims.frames {
        return Err(Error::FrameCountMismatch {
            expected: dims.frames,
            found: paths.len(),
        });
    }
    paths
        .iter()
        .map(|p| {
            let img = read_pnm(p)?;
            if img.channels != 1 || img.height != dims.height || img.width != dims.width {
                return Err(Error::DimensionMismatch(format!(
                    "probability map {} is {}x{}x{}, expected {}x{}x1",
                    p.as_ref().display(),
                    img.width,
                    img.height,
                    img.channels,
                    dims.width,
                    dims.height
                )));
            }
            Ok(img.data.iter().map(|&b| byte_to_unit::<T>(b)).collect())
        })
        .collect()
}

/// Files in `dir` with extension `ext`, sorted by name.
pub fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().and_then(|e| e.to_str()) == Some(ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn all_255_p5_reads_as_ones() {
        let dir = tempdir().unwrap();
        let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("{i}.pgm"))).collect();
        for p in &paths {
            write_pgm(p, 2, 2, &[255; 4]).unwrap();
        }
        let v: VideoTensor<f64> = read_frames(&paths).unwrap();
        assert_eq!((v.frames(), v.height(), v.width(), v.channels()), (2, 2, 2, 1));
        assert!(v.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn p6_pixel_scales_linearly() {
        let dir = tempdir().unwrap();
        let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("{i}.ppm"))).collect();
        for p in &paths {
            write_ppm(p, 1, 1, &[128, 0, 255]).unwrap();
        }
        let v: VideoTensor<f64> = read_frames(&paths).unwrap();
        assert_eq!(v.pixel(0, 0, 0), &[128.0 / 255.0, 0.0, 1.0]);
    }

    #[test]
    fn mixed_sizes_are_rejected() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        write_pgm(&a, 2, 2, &[0; 4]).unwrap();
        write_pgm(&b, 4, 4, &[0; 16]).unwrap();
        let err = read_frames::<f64, _>(&[a, b]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)), "{err}");
    }

    #[test]
    fn malformed_and_truncated_files() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.pgm");
        fs::write(&p, b"P3\n1 1\n255\n0").unwrap();
        assert!(matches!(read_pnm(&p), Err(Error::MalformedHeader { .. })));
        fs::write(&p, b"P5\n2 2\n65535\n").unwrap();
        assert!(matches!(read_pnm(&p), Err(Error::MalformedHeader { .. })));
        fs::write(&p, b"P5\n2 2\n255\n\x01\x02").unwrap();
        assert!(matches!(
            read_pnm(&p),
            Err(Error::TruncatedPayload {
                expected: 4,
                found: 2,
                ..
            })
        ));
        fs::write(&p, b"P5 # comment\n1 1\n255\n\x07").unwrap();
        assert_eq!(read_pnm(&p).unwrap().data, vec![7]);
    }

    #[test]
    fn mask_quantization_rounds_half_up() {
        assert_eq!(quantize_unit(0.5f64), 128);
        assert_eq!(quantize_unit(0.0f64), 0);
        assert_eq!(quantize_unit(1.0f64), 255);
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        write_mask_pgm(&[0.5f64; 6], 2, 3, &p).unwrap();
        let img = read_pnm(&p).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert!(img.data.iter().all(|&b| b == 128));
        write_mask_pgm(&[0.0f64; 6], 2, 3, &p).unwrap();
        assert!(read_pnm(&p).unwrap().data.iter().all(|&b| b == 0));
        assert!(write_mask_pgm(&[1.2f64], 1, 1, &p).is_err());
    }

    #[test]
    fn probability_maps_scale_and_count() {
        let dir = tempdir().unwrap();
        let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("{i}.pgm"))).collect();
        for p in &paths {
            write_pgm(p, 2, 1, &[255, 51]).unwrap();
        }
        let maps: Vec<Vec<f64>> = read_probability_maps(&paths, Dims::new(3, 1, 2)).unwrap();
        assert_eq!(maps[0][0], 1.0);
        assert!((maps[2][1] - 0.2).abs() < 1e-15);
        let err = read_probability_maps::<f64, _>(&paths[..2], Dims::new(3, 1, 2)).unwrap_err();
        assert!(matches!(err, Error::FrameCountMismatch { .. }));
        let err = read_probability_maps::<f64, _>(&paths, Dims::new(3, 2, 2)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }
}
