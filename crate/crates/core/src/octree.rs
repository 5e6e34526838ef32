//! Occupancy octree over voxel indices and its breadth-first byte stream.
//!
//! Nodes are identified by Morton codes at their own level, so a node's parent
//! is `code >> 3` and its child slot is `code & 7`. The stream holds one byte
//! per occupied internal node, level by level from the root, nodes in
//! ascending code order within a level. Bit `4 * c2 + 2 * c1 + c0` of a byte
//! is set when the child at offset `(c0, c1, c2)` along axes `(0, 1, 2)` is
//! occupied.

use crate::error::{Error, Result, Section};
use crate::morton;
use crate::voxelizer::{VoxelIndex, VoxelizedCloud};

#[derive(Debug, Clone, PartialEq)]
pub struct Octree {
    depth: u32,
    /// `levels[l]` holds the occupied node codes at level `l`, ascending;
    /// `levels[0] == [0]` and `levels[depth]` are the leaves.
    levels: Vec<Vec<u64>>,
    /// `(mean attribute, weight)` per leaf, aligned with `levels[depth]`.
    leaf_payload: Vec<(f64, u32)>,
}

impl Octree {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn levels(&self) -> &[Vec<u64>] {
        &self.levels
    }

    pub fn leaves(&self) -> &[u64] {
        &self.levels[self.depth as usize]
    }

    pub fn leaf_indices(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.leaves().iter().map(|&c| VoxelIndex::from_morton(c))
    }

    pub fn leaf_payload(&self) -> &[(f64, u32)] {
        &self.leaf_payload
    }

    /// Occupied nodes above the leaf level; one stream byte each.
    pub fn internal_node_count(&self) -> usize {
        self.levels[..self.depth as usize].iter().map(Vec::len).sum()
    }

    fn from_leaves(depth: u32, leaves: Vec<u64>, leaf_payload: Vec<(f64, u32)>) -> Self {
        let mut levels = vec![Vec::new(); depth as usize + 1];
        levels[depth as usize] = leaves;
        for l in (0..depth as usize).rev() {
            let mut parents: Vec<u64> = levels[l + 1].iter().map(|c| c >> 3).collect();
            parents.dedup();
            levels[l] = parents;
        }
        Self {
            depth,
            levels,
            leaf_payload,
        }
    }
}

pub fn build_octree(vc: &VoxelizedCloud) -> Result<Octree> {
    let depth = vc.config.depth();
    if vc.voxels.is_empty() {
        return Err(Error::InvalidInput("no occupied voxels".into()));
    }
    let limit = 1u32 << depth;
    let mut leaves = Vec::with_capacity(vc.voxels.len());
    for v in &vc.voxels {
        if v.index.as_array().iter().any(|&c| c >= limit) {
            return Err(Error::InvalidInput(format!("voxel {:?} exceeds depth {depth}", v.index)));
        }
        let code = v.index.morton();
        if leaves.last().is_some_and(|&prev| prev >= code) {
            return Err(Error::InvalidInput("voxels not strictly sorted by Morton code".into()));
        }
        leaves.push(code);
    }
    let payload = vc.voxels.iter().map(|v| (v.attribute, v.weight)).collect();
    Ok(Octree::from_leaves(depth, leaves, payload))
}

/// Octree over bare leaf codes with unit weights and zero attributes.
pub fn octree_from_codes(depth: u32, mut leaves: Vec<u64>) -> Result<Octree> {
    if !(1..=morton::MAX_DEPTH).contains(&depth) {
        return Err(Error::InvalidInput(format!("depth {depth} out of range")));
    }
    if leaves.is_empty() {
        return Err(Error::InvalidInput("no occupied voxels".into()));
    }
    leaves.sort_unstable();
    leaves.dedup();
    if leaves.last().is_some_and(|&c| c >> (3 * depth) != 0) {
        return Err(Error::InvalidInput(format!("leaf code exceeds depth {depth}")));
    }
    let n = leaves.len();
    Ok(Octree::from_leaves(depth, leaves, vec![(0.0, 1); n]))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyStream {
    pub bytes: Vec<u8>,
}

pub fn serialize(ot: &Octree) -> OccupancyStream {
    let mut bytes = Vec::with_capacity(ot.internal_node_count());
    for l in 0..ot.depth as usize {
        let children = &ot.levels[l + 1];
        let mut c = 0;
        for &node in &ot.levels[l] {
            let mut byte = 0u8;
            while c < children.len() && children[c] >> 3 == node {
                byte |= 1 << (children[c] & 7);
                c += 1;
            }
            bytes.push(byte);
        }
    }
    OccupancyStream { bytes }
}

/// Rebuilds the geometry of an octree. Leaves get unit weights and zero
/// attributes.
pub fn deserialize(stream: &OccupancyStream, depth: u32) -> Result<Octree> {
    if !(1..=morton::MAX_DEPTH).contains(&depth) {
        return Err(Error::corrupt(Section::Geometry, 0, format!("depth {depth} out of range")));
    }
    let bytes = &stream.bytes;
    let mut pos = 0usize;
    let mut levels = Vec::with_capacity(depth as usize + 1);
    levels.push(vec![0u64]);
    for l in 0..depth as usize {
        let parents = &levels[l];
        let mut next = Vec::with_capacity(parents.len() * 2);
        for &node in parents {
            let Some(&byte) = bytes.get(pos) else {
                return Err(Error::corrupt(
                    Section::Geometry,
                    pos,
                    format!("stream ends inside level {l}"),
                ));
            };
            if byte == 0 {
                return Err(Error::corrupt(Section::Geometry, pos, "empty occupancy byte"));
            }
            for bit in 0..8u64 {
                if byte & (1 << bit) != 0 {
                    next.push(node << 3 | bit);
                }
            }
            pos += 1;
        }
        levels.push(next);
    }
    if pos != bytes.len() {
        return Err(Error::corrupt(
            Section::Geometry,
            pos,
            format!("{} trailing bytes", bytes.len() - pos),
        ));
    }
    let n = levels[depth as usize].len();
    Ok(Octree {
        depth,
        levels,
        leaf_payload: vec![(0.0, 1); n],
    })
}

/// Raw occupancy cost, `8 * bytes / N`.
pub fn geometry_bpp(stream: &OccupancyStream, point_count: usize) -> Result<f64> {
    if point_count == 0 {
        return Err(Error::InvalidInput("point count must be positive".into()));
    }
    Ok(8.0 * stream.bytes.len() as f64 / point_count as f64)
}
