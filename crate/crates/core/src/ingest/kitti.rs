//! KITTI velodyne frames: consecutive little-endian `f32` quadruples
//! `(x, y, z, reflectance)` with reflectance in `[0, 1]`.

use std::fs;
use std::path::Path;

use super::{collect_finite, Loaded};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, ATTRIBUTE_PEAK};

const RECORD: usize = 16;

pub fn load_kitti_bin(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_kitti_bin(&bytes).map_err(|e| match e {
        Error::Malformed(m) => Error::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_kitti_bin(bytes: &[u8]) -> Result<Loaded> {
    if bytes.len() % RECORD != 0 {
        return Err(Error::Malformed(format!(
            "KITTI file size {} is not a multiple of {RECORD} bytes",
            bytes.len()
        )));
    }
    let raw = bytes.chunks_exact(RECORD).map(|rec| {
        let f = |i: usize| f32::from_le_bytes(rec[4 * i..4 * i + 4].try_into().unwrap()) as f64;
        // Reflectance outside [0, 1] is clamped rather than rejected.
        let a = (f(3).clamp(0.0, 1.0) * ATTRIBUTE_PEAK).round();
        ([f(0), f(1), f(2)], if f(3).is_nan() { f64::NAN } else { a })
    });
    collect_finite(raw, "KITTI frame")
}

/// Writes coordinates as `f32` and attributes as reflectance `a / 255`.
pub fn write_kitti_bin(path: impl AsRef<Path>, pc: &PointCloud) -> Result<()> {
    let mut out = Vec::with_capacity(pc.len() * RECORD);
    for (p, a) in pc.iter() {
        for v in [p.x as f32, p.y as f32, p.z as f32, (a / ATTRIBUTE_PEAK) as f32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}
