//! Middlebury `.flo`: `f32` magic 202021.25, `i32` width, `i32` height, then
//! `height × width` interleaved `(dx, dy)` `f32` pairs, row-major, little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::media::FlowField;

pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}

fn le4(bytes: &[u8], at: usize) -> [u8; 4] {
    [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]
}

fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic = f32::from_le_bytes(le4(bytes, 0));
    if magic != FLO_MAGIC {
        return Err(Error::WrongMagic {
            path: path.to_path_buf(),
            found: magic,
        });
    }
    let width = i32::from_le_bytes(le4(bytes, 4));
    let height = i32::from_le_bytes(le4(bytes, 8));
    if width <= 0 || height <= 0 {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("non-positive size {width}x{height}"),
        });
    }
    let (width, height) = (width as usize, height as usize);
    let expected = HEADER_LEN + width * height * 8;
    if bytes.len() != expected {
        return Err(Error::TruncatedPayload {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    FlowField::new(height, width, data)
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !field.is_finite() {
        return Err(Error::NonFinite(format!(
            "flow field destined for {}",
            path.display()
        )));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + field.data().len() * 4);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(field.width() as i32).to_le_bytes());
    buf.extend_from_slice(&(field.height() as i32).to_le_bytes());
    for v in field.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn decodes_single_pixel_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&FLO_MAGIC.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&0.5f32.to_le_bytes());
        bytes.extend_from_slice(&(-0.25f32).to_le_bytes());
        let f = decode_flo(&bytes, Path::new("x.flo")).unwrap();
        assert_eq!((f.height(), f.width()), (1, 1));
        assert_eq!(f.get(0, 0), (0.5, -0.25));
    }

    #[test]
    fn rejects_wrong_magic_and_size_mismatch() {
        let mut bytes = vec![0u8; 12 + 8];
        bytes[4] = 1;
        bytes[8] = 1;
        assert!(matches!(
            decode_flo(&bytes, Path::new("x")),
            Err(Error::WrongMagic { found, .. }) if found == 0.0
        ));
        bytes[..4].copy_from_slice(&FLO_MAGIC.to_le_bytes());
        bytes.pop();
        assert!(matches!(
            decode_flo(&bytes, Path::new("x")),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn zero_field_size_on_disk() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("z.flo");
        write_flo(&FlowField::zeros(2, 2), &p).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 4 + 8 + 32);
    }

    #[test]
    fn nan_rejected_before_write() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("n.flo");
        let mut f = FlowField::zeros(1, 1);
        f.set(0, 0, (0.0, f32::NAN));
        assert!(matches!(write_flo(&f, &p), Err(Error::NonFinite(_))));
        assert!(!p.exists());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn round_trip_is_bit_exact(
            h in 1usize..6,
            w in 1usize..6,
            seed in proptest::collection::vec(-1e6f32..1e6, 72),
        ) {
            let data: Vec<f32> = seed.into_iter().cycle().take(h * w * 2).collect();
            let f = FlowField::new(h, w, data).unwrap();
            let dir = tempdir().unwrap();
            let p = dir.path().join("r.flo");
            write_flo(&f, &p).unwrap();
            let back = read_flo(&p).unwrap();
            prop_assert_eq!(back.height(), h);
            prop_assert_eq!(back.width(), w);
            for (a, b) in f.data().iter().zip(back.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
