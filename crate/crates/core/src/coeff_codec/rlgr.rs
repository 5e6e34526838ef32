//! Adaptive run-length / Golomb-Rice (RLGR) coding of signed integers.
//!
//! Values are zigzag-mapped to unsigned (`0, -1, 1, -2, ...` become
//! `0, 1, 2, 3, ...`) and coded in one of two modes chosen by a
//! backward-adaptive parameter `k`:
//!
//! * `k == 0` (no-run mode): every value is a Golomb-Rice codeword with
//!   parameter `kr`.
//! * `k > 0` (run mode): a complete run of `2^k` zeros is the single bit `0`;
//!   a shorter run of `m` zeros ended by a non-zero `u` is `1`, then `m` in
//!   `k` bits, then the Golomb-Rice codeword of `u - 1`.
//!
//! `k` and `kr` are kept as scaled integers `kp = k * 4` and `krp = kr * 4`
//! so they adapt in quarter steps:
//!
//! | event                           | update            |
//! |---------------------------------|-------------------|
//! | no-run mode, value is zero      | `kp += 3`         |
//! | no-run mode, value is non-zero  | `kp -= 1`         |
//! | run mode, complete run          | `kp += 2`         |
//! | run mode, run ended by non-zero | `kp -= 1`         |
//! | GR value `u`, `p = u >> kr == 0`| `krp -= 2`        |
//! | GR value `u`, `p > 1`           | `krp += p + 1`    |
//!
//! Both parameters start at `k = 0`, `kr = 2`. A run still open at the end of
//! the sequence is closed with the `0` codeword; the decoder stops at the
//! known value count.
//!
//! Golomb-Rice codewords are the quotient `p` in unary (ones terminated by a
//! zero) followed by the `kr` low bits. Quotients of 32 or more are escaped
//! as 32 ones, a 7-bit length `n` and the full value in `n` bits.

use super::bitio::{BitReader, BitWriter};
use crate::error::{Error, Result, Section};

const LOG_SCALE: u32 = 2;
const UP_NO_RUN: u32 = 3;
const DOWN_NO_RUN: u32 = 1;
const UP_RUN: u32 = 2;
const DOWN_RUN: u32 = 1;
const KP_INIT: u32 = 0;
const KRP_INIT: u32 = 2 << LOG_SCALE;
const KP_MAX: u32 = 16 << LOG_SCALE;
const KRP_MAX: u32 = 56 << LOG_SCALE;
const ESCAPE_QUOTIENT: u64 = 32;
const ESCAPE_LEN_BITS: u32 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RlgrPayload {
    pub bytes: Vec<u8>,
    pub count: usize,
}

pub fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

pub fn unzigzag(u: u64) -> i64 {
    ((u >> 1) as i64) ^ -((u & 1) as i64)
}

#[derive(Debug, Clone, Copy)]
struct State {
    kp: u32,
    krp: u32,
}

impl State {
    fn new() -> Self {
        Self {
            kp: KP_INIT,
            krp: KRP_INIT,
        }
    }

    fn k(&self) -> u32 {
        self.kp >> LOG_SCALE
    }

    fn kr(&self) -> u32 {
        self.krp >> LOG_SCALE
    }

    fn raise_k(&mut self, by: u32) {
        self.kp = (self.kp + by).min(KP_MAX);
    }

    fn lower_k(&mut self, by: u32) {
        self.kp = self.kp.saturating_sub(by);
    }

    fn adapt_kr(&mut self, u: u64) {
        match u >> self.kr() {
            0 => self.krp = self.krp.saturating_sub(2),
            1 => {}
            p => self.krp = (self.krp as u64 + p + 1).min(KRP_MAX as u64) as u32,
        }
    }
}

fn write_gr(w: &mut BitWriter, u: u64, kr: u32) {
    let p = u >> kr;
    if p < ESCAPE_QUOTIENT {
        w.write_ones(p);
        w.write_bit(false);
        w.write_bits(u, kr);
    } else {
        w.write_ones(ESCAPE_QUOTIENT);
        let n = 64 - u.leading_zeros();
        w.write_bits(n as u64, ESCAPE_LEN_BITS);
        w.write_bits(u, n);
    }
}

fn read_gr(r: &mut BitReader<'_>, kr: u32) -> Result<u64> {
    let start = r.position();
    let mut p = 0u64;
    while p < ESCAPE_QUOTIENT && r.read_bit()? {
        p += 1;
    }
    if p < ESCAPE_QUOTIENT {
        return Ok(p << kr | r.read_bits(kr)?);
    }
    let n = r.read_bits(ESCAPE_LEN_BITS)? as u32;
    if n > 64 {
        return Err(Error::corrupt(Section::Attributes, start, format!("escape length {n}")));
    }
    let u = r.read_bits(n)?;
    if (u >> kr) < ESCAPE_QUOTIENT {
        return Err(Error::corrupt(Section::Attributes, start, "non-canonical escape"));
    }
    Ok(u)
}

pub fn rlgr_encode(values: &[i64]) -> RlgrPayload {
    let mut w = BitWriter::new();
    let mut s = State::new();
    let mut i = 0;
    while i < values.len() {
        let k = s.k();
        if k == 0 {
            let u = zigzag(values[i]);
            write_gr(&mut w, u, s.kr());
            s.adapt_kr(u);
            if u == 0 {
                s.raise_k(UP_NO_RUN);
            } else {
                s.lower_k(DOWN_NO_RUN);
            }
            i += 1;
            continue;
        }
        let full = 1usize << k;
        let zeros = values[i..].iter().take(full).take_while(|&&v| v == 0).count();
        if zeros == full || i + zeros == values.len() {
            w.write_bit(false);
            s.raise_k(UP_RUN);
            i += zeros;
        } else {
            w.write_bit(true);
            w.write_bits(zeros as u64, k);
            let u = zigzag(values[i + zeros]) - 1;
            write_gr(&mut w, u, s.kr());
            s.adapt_kr(u);
            s.lower_k(DOWN_RUN);
            i += zeros + 1;
        }
    }
    RlgrPayload {
        bytes: w.finish(),
        count: values.len(),
    }
}

pub fn rlgr_decode(payload: &RlgrPayload) -> Result<Vec<i64>> {
    let n = payload.count;
    let mut r = BitReader::new(&payload.bytes, Section::Attributes);
    let mut s = State::new();
    let mut out = Vec::with_capacity(n.min(1 << 20));
    while out.len() < n {
        let k = s.k();
        if k == 0 {
            let u = read_gr(&mut r, s.kr())?;
            s.adapt_kr(u);
            if u == 0 {
                s.raise_k(UP_NO_RUN);
            } else {
                s.lower_k(DOWN_NO_RUN);
            }
            out.push(unzigzag(u));
            continue;
        }
        let at = r.position();
        if !r.read_bit()? {
            let run = (1usize << k).min(n - out.len());
            out.resize(out.len() + run, 0);
            s.raise_k(UP_RUN);
            continue;
        }
        let zeros = r.read_bits(k)? as usize;
        if out.len() + zeros >= n {
            return Err(Error::corrupt(Section::Attributes, at, "run overflows value count"));
        }
        out.resize(out.len() + zeros, 0);
        let u = read_gr(&mut r, s.kr())?;
        s.adapt_kr(u);
        let mapped = u
            .checked_add(1)
            .ok_or_else(|| Error::corrupt(Section::Attributes, at, "value overflow"))?;
        out.push(unzigzag(mapped));
        s.lower_k(DOWN_RUN);
    }
    r.expect_end()?;
    Ok(out)
}
