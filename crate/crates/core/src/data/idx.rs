//! Strict big-endian IDX reader (MNIST layout).

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, Normalization};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset as u64, "truncated header"))
}

/// Parses an IDX3 image file into `(N × rows·cols` intensities in `[0, 1]`,
/// `rows`, `cols)`.
pub fn read_idx_images(bytes: &[u8]) -> Result<(Array2<f64>, usize, usize)> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(0, format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let d = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::format(8, "image dimensions overflow"))?;
    let need = n
        .checked_mul(d)
        .and_then(|p| p.checked_add(16))
        .ok_or_else(|| Error::format(4, "image count overflows"))?;
    if bytes.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated image payload: expected {need} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > need {
        return Err(Error::format(
            need as u64,
            "trailing bytes after image payload",
        ));
    }
    let x = Array2::from_shape_vec(
        (n, d),
        bytes[16..].iter().map(|&b| b as f64 / 255.0).collect(),
    )
    .expect("length checked");
    Ok((x, rows, cols))
}

/// Parses an IDX1 label file.
pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(0, format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4)? as usize;
    let need = n + 8;
    if bytes.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated label payload: expected {need} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > need {
        return Err(Error::format(
            need as u64,
            "trailing bytes after label payload",
        ));
    }
    Ok(bytes[8..].iter().map(|&b| b as u32).collect())
}

/// Loads an image/label IDX pair, pixels scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let (x, _, _) = read_idx_images(&fs::read(images_path)?)?;
    let labels = read_idx_labels(&fs::read(labels_path.as_ref())?)?;
    if labels.len() != x.nrows() {
        return Err(Error::format(
            4,
            format!(
                "image count {} does not match label count {}",
                x.nrows(),
                labels.len()
            ),
        ));
    }
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".to_string());
    Dataset::new(x, Some(labels), name, Normalization::Scale255)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn image_file(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IMAGES_MAGIC, n, rows, cols] {
            v.extend_from_slice(&w.to_be_bytes());
        }
        v.extend_from_slice(pixels);
        v
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    #[test]
    fn single_blank_image() {
        let (x, r, c) = read_idx_images(&image_file(1, 28, 28, &[0u8; 784])).unwrap();
        assert_eq!((x.dim(), r, c), ((1, 784), 28, 28));
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pixels_scaled() {
        let (x, _, _) = read_idx_images(&image_file(1, 1, 2, &[255, 51])).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![1.0, 0.2]);
    }

    #[test]
    fn errors_name_offsets() {
        let mut bad = image_file(1, 1, 2, &[0, 0]);
        bad[3] = 0x01;
        assert!(matches!(
            read_idx_images(&bad),
            Err(Error::Format { offset: 0, .. })
        ));
        let short = image_file(2, 1, 2, &[0, 0, 0]);
        assert!(matches!(
            read_idx_images(&short),
            Err(Error::Format { offset: 19, .. })
        ));
        assert!(matches!(
            read_idx_images(&[0, 0]),
            Err(Error::Format { .. })
        ));
        let labels = label_file(&[1, 2]);
        assert_eq!(read_idx_labels(&labels).unwrap(), vec![1, 2]);
        assert!(read_idx_labels(&labels[..9]).is_err());
        assert!(read_idx_labels(&image_file(0, 1, 1, &[])).is_err());
    }

    #[test]
    fn count_mismatch_between_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        fs::write(&img, image_file(2, 1, 1, &[0, 255])).unwrap();
        fs::write(&lab, label_file(&[7])).unwrap();
        assert!(matches!(load_idx(&img, &lab), Err(Error::Format { .. })));
        fs::write(&lab, label_file(&[7, 3])).unwrap();
        let d = load_idx(&img, &lab).unwrap();
        assert_eq!(d.labels, Some(vec![7, 3]));
        assert_eq!(d.normalization, Normalization::Scale255);
    }
}
