//! Points, clouds and bounding volumes.
//!
//! Cylindrical coordinates use the usual mathematical convention: `r` is the
//! distance from the z axis, `theta` is measured counter-clockwise from the
//! positive x axis and `h = z`. `theta` always lies in the half-open interval
//! `[-pi, pi)`: the value `+pi` that `atan2` produces for points on the
//! negative x axis is mapped to `-pi`. Points on the z axis get `theta = 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Relative padding applied to tight bounds so the largest coordinates fall
/// inside the last bin of a half-open partition.
pub const BOUNDS_EPSILON: f64 = 1e-9;

/// Largest attribute value; intensities live on an 8-bit scale.
pub const ATTRIBUTE_PEAK: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CartesianPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance_squared(&self, other: &CartesianPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    /// Radial distance from the z axis.
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylindricalPoint {
    pub r: f64,
    pub theta: f64,
    pub h: f64,
}

impl CylindricalPoint {
    /// Builds a point after checking `r >= 0`, `theta` in `[-pi, pi)` and
    /// finiteness.
    pub fn new(r: f64, theta: f64, h: f64) -> Result<Self> {
        let p = Self { r, theta, h };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.r.is_finite() && self.theta.is_finite() && self.h.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite cylindrical point {self:?}")));
        }
        if self.r < 0.0 {
            return Err(Error::InvalidInput(format!("negative radius {}", self.r)));
        }
        if !(-PI..PI).contains(&self.theta) {
            return Err(Error::InvalidInput(format!("theta {} outside [-pi, pi)", self.theta)));
        }
        Ok(())
    }
}

/// Maps any finite angle onto `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t -= 2.0 * PI;
    }
    t
}

pub fn to_cylindrical(p: CartesianPoint) -> Result<CylindricalPoint> {
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite point {p:?}")));
    }
    let r = p.radius();
    let theta = if p.x == 0.0 && p.y == 0.0 {
        0.0
    } else {
        let t = p.y.atan2(p.x);
        if t >= PI {
            -PI
        } else {
            t
        }
    };
    Ok(CylindricalPoint { r, theta, h: p.z })
}

pub fn to_cartesian(p: CylindricalPoint) -> CartesianPoint {
    debug_assert!(p.validate().is_ok(), "{p:?}");
    let (s, c) = p.theta.sin_cos();
    CartesianPoint::new(p.r * c, p.r * s, p.h)
}

/// An ordered list of points with one intensity per point.
///
/// Clouds may be empty (a sweep can produce no returns); operations that need
/// at least one point report an error instead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<CartesianPoint>,
    attributes: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<CartesianPoint>, attributes: Vec<f64>) -> Result<Self> {
        if points.len() != attributes.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} attributes",
                points.len(),
                attributes.len()
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        if let Some(i) = attributes
            .iter()
            .position(|a| !(0.0..=ATTRIBUTE_PEAK).contains(a))
        {
            return Err(Error::InvalidInput(format!(
                "attribute {} of point {i} outside [0, 255]",
                attributes[i]
            )));
        }
        Ok(Self { points, attributes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[CartesianPoint] {
        &self.points
    }

    pub fn attributes(&self) -> &[f64] {
        &self.attributes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CartesianPoint, f64)> {
        self.points.iter().zip(self.attributes.iter().copied())
    }

    fn require_points(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::InvalidInput("point cloud is empty".into()))
        } else {
            Ok(())
        }
    }
}

/// Pads a tight extent so `min + padded > max` holds in floating point.
fn pad_extent(extent: f64, magnitude: f64) -> f64 {
    extent + BOUNDS_EPSILON * extent.max(magnitude).max(1.0)
}

/// Cylinder around the z axis containing a cloud. `theta` always spans the
/// full `[-pi, pi)` turn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingCylinder {
    pub radius: f64,
    pub height: f64,
    pub h_min: f64,
}

impl BoundingCylinder {
    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.height
    }

    pub fn contains(&self, p: &CylindricalPoint) -> bool {
        p.r <= self.radius && p.h >= self.h_min && p.h <= self.h_min + self.height
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.radius.is_finite()
            && self.height.is_finite()
            && self.h_min.is_finite()
            && self.radius > 0.0
            && self.height > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("degenerate bounding cylinder {self:?}")))
        }
    }
}

/// Axis-aligned cube `[origin, origin + side)^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub origin: [f64; 3],
    pub side: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: &CartesianPoint) -> bool {
        p.as_array()
            .iter()
            .zip(self.origin)
            .all(|(&v, o)| v >= o && v < o + self.side)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.origin.iter().all(|o| o.is_finite()) && self.side.is_finite() && self.side > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("degenerate bounding box {self:?}")))
        }
    }
}

pub fn bounding_cylinder(pc: &PointCloud) -> Result<BoundingCylinder> {
    pc.require_points()?;
    let mut r_max = 0.0f64;
    let mut h_lo = f64::INFINITY;
    let mut h_hi = f64::NEG_INFINITY;
    for p in pc.points() {
        r_max = r_max.max(p.radius());
        h_lo = h_lo.min(p.z);
        h_hi = h_hi.max(p.z);
    }
    Ok(BoundingCylinder {
        radius: pad_extent(r_max, r_max),
        height: pad_extent(h_hi - h_lo, h_lo.abs().max(h_hi.abs())),
        h_min: h_lo,
    })
}

pub fn bounding_box(pc: &PointCloud) -> Result<BoundingBox> {
    pc.require_points()?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pc.points() {
        for (axis, v) in p.as_array().into_iter().enumerate() {
            lo[axis] = lo[axis].min(v);
            hi[axis] = hi[axis].max(v);
        }
    }
    let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    let magnitude = lo.iter().chain(hi.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(BoundingBox {
        origin: lo,
        side: pad_extent(extent, magnitude),
    })
}
