//! Point cloud loaders (KITTI `.bin`, PLY) and a synthetic LiDAR sweep
//! generator. Every loader maps intensities onto `[0, 255]` and drops
//! non-finite points, reporting how many were dropped.

mod kitti;
mod ply;
mod synth;

pub use kitti::{load_kitti_bin, parse_kitti_bin, write_kitti_bin};
pub use ply::{load_ply, parse_ply, write_ply, PlyEncoding};
pub use synth::{synth_sweep, IntensityModel, SweepSpec};

use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{CartesianPoint, PointCloud};

/// A loaded cloud and the number of non-finite points dropped from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub cloud: PointCloud,
    pub dropped: usize,
}

/// Loads by extension: `.bin` as KITTI, `.ply` as PLY.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<Loaded> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("bin") => load_kitti_bin(path),
        Some("ply") => load_ply(path),
        _ => Err(Error::Malformed(format!(
            "{}: unknown point cloud format (expected .bin or .ply)",
            path.display()
        ))),
    }
}

/// Builds a cloud, skipping points with a non-finite coordinate or
/// intensity.
fn collect_finite(raw: impl Iterator<Item = ([f64; 3], f64)>, source: &str) -> Result<Loaded> {
    let mut points = Vec::new();
    let mut attributes = Vec::new();
    let mut dropped = 0;
    for ([x, y, z], a) in raw {
        let p = CartesianPoint::new(x, y, z);
        if p.is_finite() && a.is_finite() {
            points.push(p);
            attributes.push(a);
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        warn!("{source}: dropped {dropped} non-finite points");
    }
    Ok(Loaded {
        cloud: PointCloud::new(points, attributes)?,
        dropped,
    })
}
