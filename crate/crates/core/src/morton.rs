//! Interleaved (Morton / Z-order) codes for 3-axis voxel indices.
//!
//! Bit `3b + a` of a code holds bit `b` of the index along axis `a`, so the
//! three low bits of a code select one of the 8 children of its parent
//! (`child = 4 * axis2 + 2 * axis1 + axis0`) and `code >> 3` is the parent.

/// Largest depth whose codes fit in 64 bits.
pub const MAX_DEPTH: u32 = 21;

const MASK21: u64 = 0x1f_ffff;

fn spread(v: u32) -> u64 {
    let mut x = v as u64 & MASK21;
    x = (x | x << 32) & 0x001f_0000_0000_ffff;
    x = (x | x << 16) & 0x001f_0000_ff00_00ff;
    x = (x | x << 8) & 0x100f_00f0_0f00_f00f;
    x = (x | x << 4) & 0x10c3_0c30_c30c_30c3;
    x = (x | x << 2) & 0x1249_2492_4924_9249;
    x
}

fn compact(code: u64) -> u32 {
    let mut x = code & 0x1249_2492_4924_9249;
    x = (x ^ (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x ^ (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x ^ (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x ^ (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x ^ (x >> 32)) & MASK21;
    x as u32
}

pub fn encode(index: [u32; 3]) -> u64 {
    spread(index[0]) | spread(index[1]) << 1 | spread(index[2]) << 2
}

pub fn decode(code: u64) -> [u32; 3] {
    [compact(code), compact(code >> 1), compact(code >> 2)]
}
