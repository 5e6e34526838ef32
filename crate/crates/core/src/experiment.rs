//! Rate-distortion sweeps, Cartesian-vs-cylindrical comparisons and the
//! density/occupancy analyses, with their CSV outputs.
//!
//! Attribute distortion is measured per occupied voxel: the voxel-mean
//! attributes the encoder sees against the decoded ones. Rates divide by the
//! original point count.

use std::io::Write;

use rayon::prelude::*;

use crate::bitstream::{decode, encode_voxelized, CodecParams, RateReport};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::{bd_metrics, format_sig6, mean_squared_error, psnr_attribute, spearman, BdMetrics, Psnr, RatePoint, RdCurve};
use crate::voxelizer::{knn_mean_distance, make_config, occupancy_stats, voxelize, CoordinateSystem, VoxelizedCloud};

pub const DEFAULT_QSTEPS: [f64; 7] = [64.0, 32.0, 16.0, 8.0, 4.0, 2.0, 1.0];
pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_ANALYSIS_DEPTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub qstep: f64,
    pub report: RateReport,
    pub mse: f64,
    pub psnr: Psnr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub system: CoordinateSystem,
    pub depth: u32,
    /// In the order the qsteps were given.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Geometry cost; identical for every qstep.
    pub fn geometry_bpp(&self) -> f64 {
        self.points[0].report.geometry_bpp
    }

    /// Attribute RD curve. Qsteps that land on the same rate keep only
    /// their best PSNR.
    pub fn curve(&self) -> Result<RdCurve> {
        let mut pts: Vec<RatePoint> = self
            .points
            .iter()
            .map(|p| RatePoint {
                bpp: p.report.attribute_bpp,
                psnr: p.psnr.value(),
            })
            .collect();
        pts.sort_by(|a, b| a.bpp.total_cmp(&b.bpp).then(b.psnr.total_cmp(&a.psnr)));
        pts.dedup_by(|later, kept| later.bpp == kept.bpp);
        RdCurve::new(pts)
    }
}

/// Encodes and decodes `vc` once per qstep, in parallel.
pub fn sweep_voxelized(vc: &VoxelizedCloud, r_min: f64, qsteps: &[f64]) -> Result<SweepResult> {
    if qsteps.len() < 4 {
        return Err(Error::InvalidConfig(format!("need at least 4 qsteps, got {}", qsteps.len())));
    }
    let reference = vc.attributes();
    let points = qsteps
        .par_iter()
        .map(|&qstep| {
            let enc = encode_voxelized(vc, r_min, qstep)?;
            let dec = decode(&enc.bytes)?;
            Ok(SweepPoint {
                qstep,
                report: enc.report,
                mse: mean_squared_error(&reference, &dec.attributes)?,
                psnr: psnr_attribute(&reference, &dec.attributes)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        system: vc.config.system(),
        depth: vc.config.depth(),
        points,
    })
}

pub fn rd_sweep(pc: &PointCloud, params: &CodecParams, qsteps: &[f64]) -> Result<SweepResult> {
    let vc = voxelize(pc, &params.grid(pc)?)?;
    sweep_voxelized(&vc, params.r_min, qsteps)
}

/// Writes the sweep as an RD curve CSV with the geometry rate sidecar.
pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepResult) -> Result<()> {
    crate::metrics::write_rd_csv(out, &sweep.curve()?, Some(sweep.geometry_bpp()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub cartesian: SweepResult,
    pub cylindrical: SweepResult,
    /// Cylindrical relative to Cartesian: positive dB and negative percent
    /// favor the cylindrical grid.
    pub bd: BdMetrics,
}

/// Runs both pipelines on the same cloud. `cartesian` and `cylindrical`
/// carry the depth and radial options of each side; their qsteps are
/// ignored in favor of `qsteps`.
pub fn compare(pc: &PointCloud, cartesian: &CodecParams, cylindrical: &CodecParams, qsteps: &[f64]) -> Result<Comparison> {
    let a = rd_sweep(pc, cartesian, qsteps)?;
    let b = rd_sweep(pc, cylindrical, qsteps)?;
    let bd = bd_metrics(&a.curve()?, &b.curve()?)?;
    Ok(Comparison {
        cartesian: a,
        cylindrical: b,
        bd,
    })
}

impl Comparison {
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for s in [&self.cartesian, &self.cylindrical] {
            writeln!(out, "{} depth={} geometry_bpp={}", s.system, s.depth, format_sig6(s.geometry_bpp()))?;
            for p in &s.points {
                writeln!(
                    out,
                    "  qstep={} attribute_bpp={} psnr_db={}",
                    format_sig6(p.qstep),
                    format_sig6(p.report.attribute_bpp),
                    format_sig6(p.psnr.value())
                )?;
            }
        }
        writeln!(out, "bd_delta_psnr_db={}", format_sig6(self.bd.delta_psnr_db))?;
        writeln!(out, "bd_delta_rate_percent={}", format_sig6(self.bd.delta_rate_percent))?;
        Ok(())
    }

    /// One row per (system, qstep) followed by `#` summary lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "system,depth,qstep,geometry_bpp,attribute_bpp,psnr_db")?;
        for s in [&self.cartesian, &self.cylindrical] {
            for p in &s.points {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    s.system,
                    s.depth,
                    format_sig6(p.qstep),
                    format_sig6(p.report.geometry_bpp),
                    format_sig6(p.report.attribute_bpp),
                    format_sig6(p.psnr.value())
                )?;
            }
        }
        writeln!(out, "# bd_delta_psnr_db={}", format_sig6(self.bd.delta_psnr_db))?;
        writeln!(out, "# bd_delta_rate_percent={}", format_sig6(self.bd.delta_rate_percent))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyRow {
    pub system: CoordinateSystem,
    pub depth: u32,
    pub voxels: usize,
    pub mean_points: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// `(r, mean distance to the k nearest neighbours)` per point.
    pub knn: Vec<(f64, f64)>,
    pub occupancy: [OccupancyRow; 2],
    /// Spearman correlation of the two `knn` columns.
    pub radius_knn_spearman: f64,
}

pub fn analyze(pc: &PointCloud, k: usize, depth: u32, log_radial: bool, r_min: f64) -> Result<Analysis> {
    let knn = knn_mean_distance(pc, k)?;
    let (r, d): (Vec<f64>, Vec<f64>) = knn.iter().copied().unzip();
    let radius_knn_spearman = spearman(&r, &d)?;
    let row = |system| -> Result<OccupancyRow> {
        let vc = voxelize(pc, &make_config(pc, system, depth, log_radial, r_min)?)?;
        let s = occupancy_stats(&vc);
        Ok(OccupancyRow {
            system,
            depth,
            voxels: s.voxels,
            mean_points: s.mean_points,
        })
    };
    Ok(Analysis {
        knn,
        occupancy: [row(CoordinateSystem::Cartesian)?, row(CoordinateSystem::Cylindrical)?],
        radius_knn_spearman,
    })
}

impl Analysis {
    pub fn write_knn_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,mean_knn_distance")?;
        for (r, d) in &self.knn {
            writeln!(out, "{},{}", format_sig6(*r), format_sig6(*d))?;
        }
        Ok(())
    }

    pub fn write_occupancy_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "system,depth,voxels,mean_points")?;
        for row in &self.occupancy {
            writeln!(out, "{},{},{},{}", row.system, row.depth, row.voxels, format_sig6(row.mean_points))?;
        }
        Ok(())
    }
}
