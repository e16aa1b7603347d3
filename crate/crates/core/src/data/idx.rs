//! Reader for the IDX files used by MNIST and FashionMNIST.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! images: u32 magic = 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8 pixels
//! labels: u32 magic = 0x00000801, u32 count, count u8 labels
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::LabeledExample;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn header(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let truncated = |expected: usize| Error::IdxTruncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(4));
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            found,
            expected: magic,
        });
    }
    let header_len = 4 + 4 * dims;
    if bytes.len() < header_len {
        return Err(truncated(header_len));
    }
    let sizes: Vec<usize> = (0..dims).map(|d| read_u32(bytes, 4 + 4 * d) as usize).collect();
    let expected = header_len + sizes.iter().product::<usize>();
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    Ok(sizes)
}

/// Loads an image/label file pair. Pixels are scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<LabeledExample>> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;

    let image_dims = header(images_path, &images, IMAGES_MAGIC, 3)?;
    let label_dims = header(labels_path, &labels, LABELS_MAGIC, 1)?;
    let (count, pixels) = (image_dims[0], image_dims[1] * image_dims[2]);
    if count != label_dims[0] {
        return Err(Error::IdxCountMismatch {
            images: count,
            labels: label_dims[0],
        });
    }

    let pixel_data = &images[16..];
    let label_data = &labels[8..];
    Ok((0..count)
        .map(|i| {
            let features = pixel_data[i * pixels..(i + 1) * pixels]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect();
            LabeledExample::new(features, label_data[i] as usize)
        })
        .collect())
}
