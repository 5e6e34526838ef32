//! Uniform scalar quantization and lossless entropy coding of RAHT
//! coefficients.

mod bitio;
pub mod rlgr;

pub use rlgr::{rlgr_decode, rlgr_encode, RlgrPayload};

use crate::error::{Error, Result};
use crate::raht::CoefficientStream;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedStream {
    pub qstep: f64,
    pub dc_q: i64,
    pub highs_q: Vec<i64>,
}

impl QuantizedStream {
    /// DC first, then the high-pass coefficients in transform order.
    pub fn to_symbols(&self) -> Vec<i64> {
        std::iter::once(self.dc_q).chain(self.highs_q.iter().copied()).collect()
    }

    pub fn from_symbols(qstep: f64, symbols: &[i64]) -> Result<Self> {
        check_qstep(qstep)?;
        let (&dc_q, highs) = symbols
            .split_first()
            .ok_or_else(|| Error::InvalidInput("no quantized coefficients".into()))?;
        Ok(Self {
            qstep,
            dc_q,
            highs_q: highs.to_vec(),
        })
    }
}

fn check_qstep(qstep: f64) -> Result<()> {
    if qstep.is_finite() && qstep > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("qstep must be positive and finite, got {qstep}")))
    }
}

/// Rounds half away from zero.
fn quantize_value(c: f64, qstep: f64) -> i64 {
    (c / qstep).round() as i64
}

pub fn quantize(coeffs: &CoefficientStream, qstep: f64) -> Result<QuantizedStream> {
    check_qstep(qstep)?;
    Ok(QuantizedStream {
        qstep,
        dc_q: quantize_value(coeffs.dc, qstep),
        highs_q: coeffs.highs.iter().map(|&c| quantize_value(c, qstep)).collect(),
    })
}

pub fn dequantize(qs: &QuantizedStream) -> CoefficientStream {
    CoefficientStream {
        dc: qs.dc_q as f64 * qs.qstep,
        highs: qs.highs_q.iter().map(|&q| q as f64 * qs.qstep).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(dc: f64, highs: &[f64]) -> CoefficientStream {
        CoefficientStream {
            dc,
            highs: highs.to_vec(),
        }
    }

    #[test]
    fn examples() {
        let q = quantize(&stream(7.4, &[0.0, -0.0, 1.0, -1.0, -3.0]), 2.0).unwrap();
        assert_eq!(q.dc_q, 4);
        assert_eq!(q.highs_q, vec![0, 0, 1, -1, -2]);
        assert_eq!(quantize(&stream(0.0, &[]), 0.37).unwrap().dc_q, 0);
        assert!(quantize(&stream(1.0, &[]), 0.0).is_err());
        assert!(quantize(&stream(1.0, &[]), -1.0).is_err());
        assert!(quantize(&stream(1.0, &[]), f64::NAN).is_err());

        let zeros = QuantizedStream {
            qstep: 3.0,
            dc_q: 0,
            highs_q: vec![0; 4],
        };
        assert_eq!(dequantize(&zeros), stream(0.0, &[0.0; 4]));
        assert_eq!(QuantizedStream::from_symbols(3.0, &zeros.to_symbols()).unwrap(), zeros);
    }

    proptest! {
        #[test]
        fn quantizer_bound(c in -1e6..1e6f64, qstep in 0.01..100.0f64) {
            let q = quantize(&stream(c, &[c]), qstep).unwrap();
            let d = dequantize(&q);
            prop_assert!((d.dc - c).abs() <= qstep / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn multiples_are_fixed_points(k in -100_000i64..100_000, qstep in 0.01..100.0f64) {
            let c = k as f64 * qstep;
            let q = quantize(&stream(c, &[]), qstep).unwrap();
            prop_assert_eq!(q.dc_q, k);
            prop_assert_eq!(dequantize(&q).dc, c);
        }
    }
}
