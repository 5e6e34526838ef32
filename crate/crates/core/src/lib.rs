//! Point cloud codec for rotating LiDAR sweeps.
//!
//! Geometry is voxelized either on a uniform Cartesian grid or on a cylindrical
//! `(r, theta, h)` grid (optionally with logarithmic radial shells), then coded
//! as a breadth-first octree occupancy stream. Per-point intensities are
//! averaged per voxel, transformed with the Region Adaptive Hierarchical
//! Transform (RAHT), uniformly quantized and entropy coded with an adaptive
//! run-length / Golomb-Rice coder.
//!
//! The [`experiment`] module carries the rate-distortion harness used by the
//! `cylpc` command-line tool.

pub mod bitstream;
pub mod coeff_codec;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ingest;
pub mod metrics;
pub mod morton;
pub mod octree;
pub mod raht;
pub mod voxelizer;

pub use error::{Error, Result};
pub use geometry::{BoundingBox, BoundingCylinder, CartesianPoint, CylindricalPoint, PointCloud};
pub use voxelizer::{CoordinateSystem, VoxelGridConfig, VoxelIndex, VoxelizedCloud};
