//! Voxel grids in Cartesian and cylindrical coordinates.
//!
//! Every grid is separable: three axes, each split into `2^depth` half-open
//! bins of equal width in its (possibly transformed) coordinate. The Cartesian
//! axes are `(x, y, z)` over a cube; the cylindrical axes are `(r, theta, h)`
//! where the radial axis is either linear on `[0, R)` or logarithmic on
//! `[ln r_min, ln R)`. Points with `r < r_min` are clamped into the first
//! logarithmic shell.
//!
//! Bin `b` on an axis covers `[lo + b * step, lo + (b + 1) * step)`, so a point
//! sitting exactly on an edge belongs to the upper bin.

use std::f64::consts::PI;
use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box, bounding_cylinder, to_cartesian, to_cylindrical, BoundingBox, BoundingCylinder,
    CartesianPoint, CylindricalPoint, PointCloud, ATTRIBUTE_PEAK,
};
use crate::morton;

/// Default inner radius of the logarithmic radial partition, in meters.
pub const DEFAULT_R_MIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoordinateSystem {
    Cartesian,
    Cylindrical,
}

impl std::fmt::Display for CoordinateSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CoordinateSystem::Cartesian => "cartesian",
            CoordinateSystem::Cylindrical => "cylindrical",
        })
    }
}

impl std::str::FromStr for CoordinateSystem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cartesian" | "cart" => Ok(CoordinateSystem::Cartesian),
            "cylindrical" | "cyl" => Ok(CoordinateSystem::Cylindrical),
            other => Err(Error::InvalidConfig(format!("unknown coordinate system '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialScale {
    Linear,
    Log { r_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridBounds {
    Cartesian(BoundingBox),
    Cylindrical {
        cylinder: BoundingCylinder,
        radial: RadialScale,
    },
}

/// One axis of a grid in its binning domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRange {
    pub lo: f64,
    pub extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridConfig {
    depth: u32,
    bounds: GridBounds,
}

impl VoxelGridConfig {
    pub fn new(depth: u32, bounds: GridBounds) -> Result<Self> {
        if !(1..=morton::MAX_DEPTH).contains(&depth) {
            return Err(Error::InvalidConfig(format!(
                "depth {depth} outside [1, {}]",
                morton::MAX_DEPTH
            )));
        }
        match bounds {
            GridBounds::Cartesian(b) => b.validate()?,
            GridBounds::Cylindrical { cylinder, radial } => {
                cylinder.validate()?;
                if let RadialScale::Log { r_min } = radial {
                    if !(r_min.is_finite() && r_min > 0.0) {
                        return Err(Error::InvalidConfig(format!("r_min must be positive, got {r_min}")));
                    }
                    if r_min >= cylinder.radius {
                        return Err(Error::InvalidConfig(format!(
                            "r_min {r_min} must be below the bounding radius {}",
                            cylinder.radius
                        )));
                    }
                }
            }
        }
        let cfg = Self { depth, bounds };
        if cfg.steps().iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            return Err(Error::InvalidConfig(format!("non-positive step in {cfg:?}")));
        }
        Ok(cfg)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    pub fn system(&self) -> CoordinateSystem {
        match self.bounds {
            GridBounds::Cartesian(_) => CoordinateSystem::Cartesian,
            GridBounds::Cylindrical { .. } => CoordinateSystem::Cylindrical,
        }
    }

    pub fn log_radial(&self) -> Option<f64> {
        match self.bounds {
            GridBounds::Cylindrical {
                radial: RadialScale::Log { r_min },
                ..
            } => Some(r_min),
            _ => None,
        }
    }

    /// Bins per axis, `2^depth`.
    pub fn resolution(&self) -> u32 {
        1 << self.depth
    }

    pub fn axis_ranges(&self) -> [AxisRange; 3] {
        match self.bounds {
            GridBounds::Cartesian(b) => b.origin.map(|lo| AxisRange { lo, extent: b.side }),
            GridBounds::Cylindrical { cylinder, radial } => {
                let r = match radial {
                    RadialScale::Linear => AxisRange {
                        lo: 0.0,
                        extent: cylinder.radius,
                    },
                    RadialScale::Log { r_min } => AxisRange {
                        lo: r_min.ln(),
                        extent: cylinder.radius.ln() - r_min.ln(),
                    },
                };
                [
                    r,
                    AxisRange {
                        lo: -PI,
                        extent: 2.0 * PI,
                    },
                    AxisRange {
                        lo: cylinder.h_min,
                        extent: cylinder.height,
                    },
                ]
            }
        }
    }

    /// Per-axis bin widths in the binning domain: `Q` on every Cartesian
    /// axis, or `(Q1, Q2, Q3)` for `(r or ln r, theta, h)`.
    pub fn steps(&self) -> [f64; 3] {
        let n = self.resolution() as f64;
        self.axis_ranges().map(|a| a.extent / n)
    }

    /// Coordinates of `p` in the binning domain, with the log-radial clamp
    /// applied.
    pub fn grid_coordinates(&self, p: &CartesianPoint) -> Result<[f64; 3]> {
        match self.bounds {
            GridBounds::Cartesian(_) => Ok(p.as_array()),
            GridBounds::Cylindrical { radial, .. } => {
                let c = to_cylindrical(*p)?;
                let r = match radial {
                    RadialScale::Linear => c.r,
                    RadialScale::Log { r_min } => c.r.max(r_min).ln(),
                };
                Ok([r, c.theta, c.h])
            }
        }
    }

    fn edge(range: &AxisRange, step: f64, b: u32) -> f64 {
        range.lo + b as f64 * step
    }

    /// Bin of the point with position `point_index` in its cloud.
    pub fn voxel_of(&self, p: &CartesianPoint, point_index: usize) -> Result<VoxelIndex> {
        let coords = self.grid_coordinates(p)?;
        let ranges = self.axis_ranges();
        let steps = self.steps();
        let n = self.resolution();
        let mut out = [0u32; 3];
        for axis in 0..3 {
            let (v, range, step) = (coords[axis], ranges[axis], steps[axis]);
            if !(v >= range.lo && v <= range.lo + range.extent) {
                return Err(Error::OutOfRange {
                    index: point_index,
                    detail: format!(
                        "axis {axis} coordinate {v} not in [{}, {}]",
                        range.lo,
                        range.lo + range.extent
                    ),
                });
            }
            let mut b = (((v - range.lo) / step).floor() as i64).clamp(0, n as i64 - 1) as u32;
            // Settle rounding so the bin agrees with its explicit edges.
            while b + 1 < n && v >= Self::edge(&range, step, b + 1) {
                b += 1;
            }
            while b > 0 && v < Self::edge(&range, step, b) {
                b -= 1;
            }
            out[axis] = b;
        }
        Ok(VoxelIndex::from(out))
    }

    /// Bin edges along `axis` in the original coordinate (meters or
    /// radians); logarithmic radial edges are exponentiated.
    pub fn bin_edges(&self, axis: usize) -> Vec<f64> {
        let range = self.axis_ranges()[axis];
        let step = self.steps()[axis];
        let log = axis == 0 && self.log_radial().is_some();
        (0..=self.resolution())
            .map(|b| {
                let e = Self::edge(&range, step, b);
                if log {
                    e.exp()
                } else {
                    e
                }
            })
            .collect()
    }

    /// Center of a voxel in Cartesian space. Logarithmic shells use the
    /// geometric center `exp(mid(ln r))`.
    pub fn voxel_center(&self, index: VoxelIndex) -> CartesianPoint {
        let ranges = self.axis_ranges();
        let steps = self.steps();
        let idx = index.as_array();
        let mid: [f64; 3] = std::array::from_fn(|a| ranges[a].lo + (idx[a] as f64 + 0.5) * steps[a]);
        match self.bounds {
            GridBounds::Cartesian(_) => CartesianPoint::new(mid[0], mid[1], mid[2]),
            GridBounds::Cylindrical { radial, .. } => {
                let r = match radial {
                    RadialScale::Linear => mid[0],
                    RadialScale::Log { .. } => mid[0].exp(),
                };
                to_cartesian(CylindricalPoint {
                    r,
                    theta: mid[1],
                    h: mid[2],
                })
            }
        }
    }
}

/// Derives a grid from the cloud's tight (padded) bounds.
pub fn make_config(
    pc: &PointCloud,
    system: CoordinateSystem,
    depth: u32,
    log_radial: bool,
    r_min: f64,
) -> Result<VoxelGridConfig> {
    let bounds = match system {
        CoordinateSystem::Cartesian => GridBounds::Cartesian(bounding_box(pc)?),
        CoordinateSystem::Cylindrical => GridBounds::Cylindrical {
            cylinder: bounding_cylinder(pc)?,
            radial: if log_radial {
                RadialScale::Log { r_min }
            } else {
                RadialScale::Linear
            },
        },
    };
    VoxelGridConfig::new(depth, bounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl VoxelIndex {
    pub fn as_array(&self) -> [u32; 3] {
        [self.i, self.j, self.k]
    }

    pub fn morton(&self) -> u64 {
        morton::encode(self.as_array())
    }

    pub fn from_morton(code: u64) -> Self {
        morton::decode(code).into()
    }
}

impl From<[u32; 3]> for VoxelIndex {
    fn from([i, j, k]: [u32; 3]) -> Self {
        Self { i, j, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voxel {
    pub index: VoxelIndex,
    /// Mean attribute of the member points.
    pub attribute: f64,
    /// Number of member points.
    pub weight: u32,
}

/// Occupied voxels sorted by Morton code.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelizedCloud {
    pub config: VoxelGridConfig,
    pub voxels: Vec<Voxel>,
}

impl VoxelizedCloud {
    pub fn point_count(&self) -> u64 {
        self.voxels.iter().map(|v| v.weight as u64).sum()
    }

    pub fn attributes(&self) -> Vec<f64> {
        self.voxels.iter().map(|v| v.attribute).collect()
    }
}

pub fn voxelize(pc: &PointCloud, cfg: &VoxelGridConfig) -> Result<VoxelizedCloud> {
    let mut keyed = pc
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| Ok((cfg.voxel_of(p, i)?.morton(), i)))
        .collect::<Result<Vec<_>>>()?;
    keyed.sort_unstable();

    let attrs = pc.attributes();
    let mut voxels: Vec<Voxel> = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let code = keyed[start].0;
        let end = start + keyed[start..].partition_point(|&(c, _)| c == code);
        let members = keyed[start..end].iter().map(|&(_, i)| attrs[i]);
        let (mut sum, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for a in members {
            sum += a;
            lo = lo.min(a);
            hi = hi.max(a);
        }
        let weight = (end - start) as u32;
        voxels.push(Voxel {
            index: VoxelIndex::from_morton(code),
            attribute: (sum / weight as f64).clamp(lo, hi),
            weight,
        });
        start = end;
    }
    Ok(VoxelizedCloud {
        config: *cfg,
        voxels,
    })
}

/// One point per voxel at its center, carrying the voxel's mean attribute.
pub fn devoxelize(vc: &VoxelizedCloud) -> PointCloud {
    let points = vc.voxels.iter().map(|v| vc.config.voxel_center(v.index)).collect();
    let attributes = vc
        .voxels
        .iter()
        .map(|v| v.attribute.clamp(0.0, ATTRIBUTE_PEAK))
        .collect();
    PointCloud::new(points, attributes).expect("voxel centers are finite")
}

/// Center of the voxel containing each point of `pc`, in input order.
pub fn reconstruct_points(pc: &PointCloud, cfg: &VoxelGridConfig) -> Result<Vec<CartesianPoint>> {
    pc.points()
        .iter()
        .enumerate()
        .map(|(i, p)| Ok(cfg.voxel_center(cfg.voxel_of(p, i)?)))
        .collect()
}

/// Squared Euclidean distance between a point and its reconstruction.
pub fn voxelization_error_cartesian(p: &CartesianPoint, reconstructed: &CartesianPoint) -> f64 {
    p.distance_squared(reconstructed)
}

/// Squared Cartesian error of a cylindrical reconstruction whose radial,
/// angular and height errors are `e1`, `e2`, `e3`:
/// `e1^2 + 2 r (r + e1) (1 - cos e2) + e3^2`.
///
/// `1 - cos e2` is evaluated as `2 sin^2(e2 / 2)` to avoid cancellation.
pub fn voxelization_error_cylindrical(r: f64, e1: f64, e2: f64, e3: f64) -> f64 {
    let half = (0.5 * e2).sin();
    e1 * e1 + 4.0 * r * (r + e1) * half * half + e3 * e3
}

/// Per-axis variances of the voxelization error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub sigma3_sq: f64,
}

impl ErrorModel {
    pub fn new(sigma1_sq: f64, sigma2_sq: f64, sigma3_sq: f64) -> Result<Self> {
        if [sigma1_sq, sigma2_sq, sigma3_sq]
            .iter()
            .any(|s| !(s.is_finite() && *s >= 0.0))
        {
            return Err(Error::InvalidInput(format!(
                "variances must be finite and non-negative: {sigma1_sq}, {sigma2_sq}, {sigma3_sq}"
            )));
        }
        Ok(Self {
            sigma1_sq,
            sigma2_sq,
            sigma3_sq,
        })
    }

    pub fn isotropic(sigma_sq: f64) -> Result<Self> {
        Self::new(sigma_sq, sigma_sq, sigma_sq)
    }

    /// Uniform rounding error over bins of the given widths (`Q^2 / 12`).
    pub fn uniform(steps: [f64; 3]) -> Result<Self> {
        let [a, b, c] = steps.map(|q| q * q / 12.0);
        Self::new(a, b, c)
    }
}

/// Second-order approximation of the mean cylindrical error at radius `r`:
/// `sigma1^2 + r^2 sigma2^2 + sigma3^2`.
pub fn expected_error_cylindrical(r: f64, model: &ErrorModel) -> f64 {
    model.sigma1_sq + r * r * model.sigma2_sq + model.sigma3_sq
}

/// Mean Cartesian error, `sigma1^2 + sigma2^2 + sigma3^2` (`3 sigma^2` for an
/// isotropic model).
pub fn expected_error_cartesian(model: &ErrorModel) -> f64 {
    model.sigma1_sq + model.sigma2_sq + model.sigma3_sq
}

/// For every point, its radius and the mean distance to its `k` nearest
/// neighbours (the point itself excluded).
pub fn knn_mean_distance(pc: &PointCloud, k: usize) -> Result<Vec<(f64, f64)>> {
    if k == 0 || pc.len() <= k {
        return Err(Error::InvalidInput(format!(
            "need more than k = {k} points (k >= 1), cloud has {}",
            pc.len()
        )));
    }
    let coords: Vec<[f64; 3]> = pc.points().iter().map(|p| p.as_array()).collect();
    let tree: ImmutableKdTree<f64, u32, 3, 32> = ImmutableKdTree::new_from_slice(&coords);
    let query = NonZero::new(k + 1).expect("k + 1 > 0");
    Ok(coords
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let found = tree.nearest_n::<SquaredEuclidean>(q, query);
            // Drop the query point; with duplicates it may not come first.
            let skip = found
                .iter()
                .position(|n| n.item as usize == i)
                .unwrap_or(found.len() - 1);
            let total: f64 = found
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != skip)
                .map(|(_, n)| n.distance.sqrt())
                .sum();
            (pc.points()[i].radius(), total / k as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyStats {
    pub voxels: usize,
    pub mean_points: f64,
}

pub fn occupancy_stats(vc: &VoxelizedCloud) -> OccupancyStats {
    let voxels = vc.voxels.len();
    OccupancyStats {
        voxels,
        mean_points: if voxels == 0 {
            0.0
        } else {
            vc.point_count() as f64 / voxels as f64
        },
    }
}
