//! MSB-first bit packing.

use crate::error::{Error, Result, Section};

#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, bit: bool) {
        self.acc = self.acc << 1 | bit as u8;
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    /// Writes the low `n` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in (0..n).rev() {
            self.write_bit(value >> i & 1 == 1);
        }
    }

    pub fn write_ones(&mut self, n: u64) {
        for _ in 0..n {
            self.write_bit(true);
        }
    }

    /// Pads the last byte with zeros.
    pub fn finish(mut self) -> Vec<u8> {
        if self.used > 0 {
            self.bytes.push(self.acc << (8 - self.used));
        }
        self.bytes
    }
}

#[derive(Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    section: Section,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8], section: Section) -> Self {
        Self {
            bytes,
            pos: 0,
            section,
        }
    }

    /// Bits consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let Some(byte) = self.bytes.get(self.pos / 8) else {
            return Err(Error::corrupt(self.section, self.pos, "unexpected end of payload"));
        };
        let bit = byte >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        debug_assert!(n <= 64);
        let mut v = 0u64;
        for _ in 0..n {
            v = v << 1 | self.read_bit()? as u64;
        }
        Ok(v)
    }

    /// Fails unless only zero padding of the final byte remains.
    pub fn expect_end(&self) -> Result<()> {
        let used_bytes = self.pos.div_ceil(8);
        if used_bytes != self.bytes.len() {
            return Err(Error::corrupt(
                self.section,
                self.pos,
                format!("{} trailing bytes", self.bytes.len() - used_bytes),
            ));
        }
        let rem = self.pos % 8;
        if rem != 0 && self.bytes[used_bytes - 1] & (0xFF >> rem) != 0 {
            return Err(Error::corrupt(self.section, self.pos, "non-zero padding bits"));
        }
        Ok(())
    }
}
