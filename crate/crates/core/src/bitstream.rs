//! The `CYLPC1` container and the end-to-end encode/decode pipelines.
//!
//! Layout, all multi-byte values little-endian:
//!
//! | offset | size | field                                              |
//! |--------|------|----------------------------------------------------|
//! | 0      | 6    | magic `CYLPC1`                                     |
//! | 6      | 1    | version (1)                                        |
//! | 7      | 1    | coordinate system: 0 Cartesian, 1 cylindrical      |
//! | 8      | 1    | octree depth                                       |
//! | 9      | 1    | log-radial flag                                    |
//! | 10     | 8    | `r_min` (f64)                                      |
//! | 18     | 48   | bounds, 6 x f64                                    |
//! | 66     | 8    | original point count `N` (u64)                     |
//! | 74     | 8    | qstep (f64)                                        |
//! | 82     | 8    | geometry length `G` (u64), then `G` occupancy bytes |
//! |        | 8    | attribute length `A` (u64), then `A` RLGR bytes     |
//!
//! Bounds are `[ox, oy, oz, side, 0, 0]` for a Cartesian grid and
//! `[radius, height, h_min, 0, 0, 0]` for a cylindrical one. The attribute
//! value count is not stored: it equals the number of decoded leaves.
//!
//! Corrupt-stream errors carry section-relative offsets: bytes for the
//! header and geometry, bits for the attribute payload.

use crate::coeff_codec::{dequantize, quantize, rlgr_decode, rlgr_encode, QuantizedStream, RlgrPayload};
use crate::error::{Error, Result, Section};
use crate::geometry::{BoundingBox, BoundingCylinder, PointCloud, ATTRIBUTE_PEAK};
use crate::octree::{build_octree, deserialize, serialize, OccupancyStream};
use crate::raht::{inverse_values, raht_forward, WeightedLeaf};
use crate::voxelizer::{
    make_config, voxelize, CoordinateSystem, GridBounds, RadialScale, VoxelGridConfig, VoxelIndex, VoxelizedCloud,
    DEFAULT_R_MIN,
};

pub const MAGIC: &[u8; 6] = b"CYLPC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 82;
const LENGTH_PREFIX: usize = 8;

/// Octree depth used when none is given.
pub fn default_depth(system: CoordinateSystem) -> u32 {
    match system {
        CoordinateSystem::Cartesian => 16,
        CoordinateSystem::Cylindrical => 13,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    pub system: CoordinateSystem,
    pub depth: u32,
    pub qstep: f64,
    pub log_radial: bool,
    pub r_min: f64,
}

impl CodecParams {
    pub fn new(system: CoordinateSystem, qstep: f64) -> Self {
        Self {
            system,
            depth: default_depth(system),
            qstep,
            log_radial: false,
            r_min: DEFAULT_R_MIN,
        }
    }

    pub fn grid(&self, pc: &PointCloud) -> Result<VoxelGridConfig> {
        make_config(pc, self.system, self.depth, self.log_radial, self.r_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub config: VoxelGridConfig,
    pub point_count: u64,
    pub qstep: f64,
}

/// Byte and rate accounting of one bitstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub point_count: u64,
    pub voxel_count: usize,
    pub geometry_bytes: usize,
    pub attribute_bytes: usize,
    pub total_bytes: usize,
    /// Section payload bits per original point; headers and length
    /// prefixes are excluded.
    pub geometry_bpp: f64,
    pub attribute_bpp: f64,
    /// Whole file, `8 * total_bytes / N`.
    pub total_bpp: f64,
}

impl RateReport {
    fn new(point_count: u64, voxel_count: usize, geometry_bytes: usize, attribute_bytes: usize) -> Self {
        let n = point_count as f64;
        let total_bytes = HEADER_LEN + 2 * LENGTH_PREFIX + geometry_bytes + attribute_bytes;
        Self {
            point_count,
            voxel_count,
            geometry_bytes,
            attribute_bytes,
            total_bytes,
            geometry_bpp: 8.0 * geometry_bytes as f64 / n,
            attribute_bpp: 8.0 * attribute_bytes as f64 / n,
            total_bpp: 8.0 * total_bytes as f64 / n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub bytes: Vec<u8>,
    pub report: RateReport,
}

/// Voxelizes and encodes a cloud.
pub fn encode(pc: &PointCloud, params: &CodecParams) -> Result<(Encoded, VoxelizedCloud)> {
    let cfg = params.grid(pc)?;
    let vc = voxelize(pc, &cfg)?;
    let enc = encode_voxelized(&vc, params.r_min, params.qstep)?;
    Ok((enc, vc))
}

/// Encodes an already voxelized cloud. Every occupied voxel enters the
/// transform with unit weight, so the decoder needs nothing beyond the
/// occupancy stream. `r_min` is recorded in the header even when the grid
/// is not log-radial.
pub fn encode_voxelized(vc: &VoxelizedCloud, r_min: f64, qstep: f64) -> Result<Encoded> {
    let point_count = vc.point_count();
    if point_count == 0 {
        return Err(Error::InvalidInput("cannot encode an empty cloud".into()));
    }
    let octree = build_octree(vc)?;
    let geometry = serialize(&octree);
    let leaves: Vec<WeightedLeaf> = vc
        .voxels
        .iter()
        .map(|v| WeightedLeaf {
            index: v.index,
            attribute: v.attribute,
            weight: 1,
        })
        .collect();
    let coeffs = raht_forward(&leaves, vc.config.depth())?;
    let payload = rlgr_encode(&quantize(&coeffs, qstep)?.to_symbols());

    let header = Header {
        config: vc.config,
        point_count,
        qstep,
    };
    let mut bytes = Vec::with_capacity(HEADER_LEN + 2 * LENGTH_PREFIX + geometry.bytes.len() + payload.bytes.len());
    write_header(&mut bytes, &header, vc.config.log_radial().unwrap_or(r_min));
    bytes.extend_from_slice(&(geometry.bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&geometry.bytes);
    bytes.extend_from_slice(&(payload.bytes.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&payload.bytes);

    let report = RateReport::new(point_count, vc.voxels.len(), geometry.bytes.len(), payload.bytes.len());
    debug_assert_eq!(report.total_bytes, bytes.len());
    Ok(Encoded { bytes, report })
}

fn write_header(out: &mut Vec<u8>, h: &Header, r_min: f64) {
    let cfg = &h.config;
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(match cfg.system() {
        CoordinateSystem::Cartesian => 0,
        CoordinateSystem::Cylindrical => 1,
    });
    out.push(cfg.depth() as u8);
    out.push(cfg.log_radial().is_some() as u8);
    out.extend_from_slice(&r_min.to_le_bytes());
    let bounds = match *cfg.bounds() {
        GridBounds::Cartesian(b) => [b.origin[0], b.origin[1], b.origin[2], b.side, 0.0, 0.0],
        GridBounds::Cylindrical { cylinder: c, .. } => [c.radius, c.height, c.h_min, 0.0, 0.0, 0.0],
    };
    for v in bounds {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&h.point_count.to_le_bytes());
    out.extend_from_slice(&h.qstep.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::corrupt(Section::Header, self.pos, format!("truncated before {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parsed container sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: Header,
    pub geometry: OccupancyStream,
    pub attributes: Vec<u8>,
}

pub fn parse_container(bytes: &[u8]) -> Result<Container> {
    let mut c = Cursor { bytes, pos: 0 };
    let bad = |offset: usize, detail: String| Error::corrupt(Section::Header, offset, detail);

    if c.take(6, "magic")? != MAGIC {
        return Err(bad(0, "bad magic".into()));
    }
    let version = c.u8("version")?;
    if version != VERSION {
        return Err(bad(6, format!("unsupported version {version}")));
    }
    let system = match c.u8("coordinate system")? {
        0 => CoordinateSystem::Cartesian,
        1 => CoordinateSystem::Cylindrical,
        v => return Err(bad(7, format!("unknown coordinate system {v}"))),
    };
    let depth = c.u8("depth")? as u32;
    let log = match c.u8("log-radial flag")? {
        0 => false,
        1 => true,
        v => return Err(bad(9, format!("bad log-radial flag {v}"))),
    };
    if log && system == CoordinateSystem::Cartesian {
        return Err(bad(9, "log-radial flag on a Cartesian grid".into()));
    }
    let r_min = c.f64("r_min")?;
    let mut b = [0.0; 6];
    for v in &mut b {
        *v = c.f64("bounds")?;
    }
    let bounds = match system {
        CoordinateSystem::Cartesian => GridBounds::Cartesian(BoundingBox {
            origin: [b[0], b[1], b[2]],
            side: b[3],
        }),
        CoordinateSystem::Cylindrical => GridBounds::Cylindrical {
            cylinder: BoundingCylinder {
                radius: b[0],
                height: b[1],
                h_min: b[2],
            },
            radial: if log { RadialScale::Log { r_min } } else { RadialScale::Linear },
        },
    };
    let config = VoxelGridConfig::new(depth, bounds).map_err(|e| bad(8, format!("invalid grid: {e}")))?;
    let point_count = c.u64("point count")?;
    if point_count == 0 {
        return Err(bad(66, "zero point count".into()));
    }
    let qstep = c.f64("qstep")?;
    if !(qstep.is_finite() && qstep > 0.0) {
        return Err(bad(74, format!("invalid qstep {qstep}")));
    }

    let section = |c: &mut Cursor<'_>, name: &str| -> Result<Vec<u8>> {
        let at = c.pos;
        let len = c.u64(&format!("{name} length"))?;
        let len = usize::try_from(len)
            .ok()
            .filter(|&l| l <= c.bytes.len() - c.pos)
            .ok_or_else(|| bad(at, format!("{name} length {len} exceeds remaining {} bytes", c.bytes.len() - c.pos)))?;
        Ok(c.take(len, name)?.to_vec())
    };
    let geometry = section(&mut c, "geometry")?;
    let attributes = section(&mut c, "attribute")?;
    if c.pos != bytes.len() {
        return Err(bad(c.pos, format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(Container {
        header: Header {
            config,
            point_count,
            qstep,
        },
        geometry: OccupancyStream { bytes: geometry },
        attributes,
    })
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub header: Header,
    /// Occupied voxels in Morton order.
    pub indices: Vec<VoxelIndex>,
    /// Decoded attribute per voxel, clamped to `[0, 255]`.
    pub attributes: Vec<f64>,
    pub report: RateReport,
}

impl Decoded {
    /// One point per voxel at its center.
    pub fn to_cloud(&self) -> PointCloud {
        let points = self.indices.iter().map(|&i| self.header.config.voxel_center(i)).collect();
        PointCloud::new(points, self.attributes.clone()).expect("voxel centers are finite")
    }
}

pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    let c = parse_container(bytes)?;
    let depth = c.header.config.depth();
    let octree = deserialize(&c.geometry, depth)?;
    let codes = octree.leaves();
    if codes.len() as u64 > c.header.point_count {
        return Err(Error::corrupt(
            Section::Header,
            66,
            format!("{} voxels for {} points", codes.len(), c.header.point_count),
        ));
    }
    let payload = RlgrPayload {
        bytes: c.attributes,
        count: codes.len(),
    };
    let symbols = rlgr_decode(&payload)?;
    let coeffs = dequantize(&QuantizedStream::from_symbols(c.header.qstep, &symbols)?);
    let values = inverse_values(&coeffs, codes, &vec![1; codes.len()], depth)?;
    let report = RateReport::new(c.header.point_count, codes.len(), c.geometry.bytes.len(), payload.bytes.len());
    Ok(Decoded {
        header: c.header,
        indices: codes.iter().map(|&code| VoxelIndex::from_morton(code)).collect(),
        attributes: values.into_iter().map(|v| v.clamp(0.0, ATTRIBUTE_PEAK)).collect(),
        report,
    })
}
