//! Rate and distortion measurement.
//!
//! Attribute distortion is an 8-bit PSNR (`peak = 255`) and rates are bits
//! per point, `R = B / N`. Two rate-distortion curves are compared with the
//! classic Bjontegaard metric: cubic least-squares fits of PSNR against
//! `log10(rate)` (and of `log10(rate)` against PSNR), integrated in closed
//! form over the overlapping interval.

use std::io::{BufRead, Write};

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::ATTRIBUTE_PEAK;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Db(f64),
    /// Decoded signal identical to the original.
    Lossless,
}

impl Psnr {
    /// Decibels, with `+inf` for lossless.
    pub fn value(&self) -> f64 {
        match *self {
            Psnr::Db(v) => v,
            Psnr::Lossless => f64::INFINITY,
        }
    }
}

pub fn mean_squared_error(original: &[f64], decoded: &[f64]) -> Result<f64> {
    if original.len() != decoded.len() {
        return Err(Error::InvalidInput(format!(
            "signal lengths differ: {} vs {}",
            original.len(),
            decoded.len()
        )));
    }
    if original.is_empty() {
        return Err(Error::InvalidInput("empty signal".into()));
    }
    let sse: f64 = original.iter().zip(decoded).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sse / original.len() as f64)
}

/// `-10 log10(||I - I'||^2 / (255^2 N))`.
pub fn psnr_attribute(original: &[f64], decoded: &[f64]) -> Result<Psnr> {
    let mse = mean_squared_error(original, decoded)?;
    if mse == 0.0 {
        return Ok(Psnr::Lossless);
    }
    Ok(Psnr::Db(10.0 * (ATTRIBUTE_PEAK * ATTRIBUTE_PEAK / mse).log10()))
}

/// Bits per point, `B / N`.
pub fn attribute_bpp(bits: u64, point_count: usize) -> Result<f64> {
    if point_count == 0 {
        return Err(Error::InvalidInput("point count must be positive".into()));
    }
    Ok(bits as f64 / point_count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub bpp: f64,
    /// `+inf` marks a lossless point.
    pub psnr: f64,
}

/// Rate-distortion points sorted by strictly increasing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RatePoint>,
}

impl RdCurve {
    pub fn new(points: Vec<RatePoint>) -> Result<Self> {
        for p in &points {
            if !(p.bpp.is_finite() && p.bpp > 0.0) {
                return Err(Error::InvalidInput(format!("rate must be positive, got {}", p.bpp)));
            }
            if p.psnr.is_nan() || p.psnr == f64::NEG_INFINITY {
                return Err(Error::InvalidInput(format!("invalid PSNR {}", p.psnr)));
            }
        }
        if points.windows(2).any(|w| w[1].bpp <= w[0].bpp) {
            return Err(Error::InvalidInput("rates must be strictly increasing".into()));
        }
        if points.windows(2).any(|w| w[1].psnr < w[0].psnr) {
            warn!("PSNR decreases with rate somewhere along the curve");
        }
        Ok(Self { points })
    }

    /// Builds a curve from points in any order.
    pub fn from_unsorted(mut points: Vec<RatePoint>) -> Result<Self> {
        points.sort_by(|a, b| a.bpp.total_cmp(&b.bpp));
        Self::new(points)
    }

    pub fn points(&self) -> &[RatePoint] {
        &self.points
    }

    fn finite(&self) -> Vec<RatePoint> {
        self.points.iter().copied().filter(|p| p.psnr.is_finite()).collect()
    }
}

/// Least-squares polynomial coefficients, lowest order first.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return Err(Error::InvalidInput(format!(
            "need more than {degree} samples for a degree-{degree} fit"
        )));
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |r, c| xs[r].powi(c as i32));
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidInput(format!("polynomial fit failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

fn integrate_poly(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    let antiderivative = |x: f64| {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * x.powi(i as i32 + 1) / (i as f64 + 1.0))
            .sum::<f64>()
    };
    antiderivative(hi) - antiderivative(lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdMetrics {
    /// Average PSNR gap of B over A, in dB.
    pub delta_psnr_db: f64,
    /// Average rate change of B relative to A, in percent.
    pub delta_rate_percent: f64,
}

fn average_gap(xa: &[f64], ya: &[f64], xb: &[f64], yb: &[f64]) -> Result<f64> {
    let lo = xa.iter().cloned().fold(f64::INFINITY, f64::min).max(xb.iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = xa
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .min(xb.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if !(hi > lo) {
        return Err(Error::InvalidInput("curves do not overlap".into()));
    }
    let pa = polyfit(xa, ya, 3)?;
    let pb = polyfit(xb, yb, 3)?;
    Ok((integrate_poly(&pb, lo, hi) - integrate_poly(&pa, lo, hi)) / (hi - lo))
}

/// Bjontegaard delta-PSNR and delta-rate of curve `b` against curve `a`.
/// Lossless points are ignored; each curve needs at least four others.
pub fn bd_metrics(a: &RdCurve, b: &RdCurve) -> Result<BdMetrics> {
    let (pa, pb) = (a.finite(), b.finite());
    if pa.len() < 4 || pb.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 finite points per curve, got {} and {}",
            pa.len(),
            pb.len()
        )));
    }
    let lr = |pts: &[RatePoint]| pts.iter().map(|p| p.bpp.log10()).collect::<Vec<_>>();
    let ps = |pts: &[RatePoint]| pts.iter().map(|p| p.psnr).collect::<Vec<_>>();
    let (ra, rb, qa, qb) = (lr(&pa), lr(&pb), ps(&pa), ps(&pb));

    let delta_psnr_db = average_gap(&ra, &qa, &rb, &qb)?;
    let log_rate_gap = average_gap(&qa, &ra, &qb, &rb)?;
    Ok(BdMetrics {
        delta_psnr_db,
        delta_rate_percent: (10f64.powf(log_rate_gap) - 1.0) * 100.0,
    })
}

/// Formats with six significant digits.
pub fn format_sig6(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v.is_nan() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const RD_CSV_HEADER: &str = "bpp,psnr_db";

/// Writes `bpp,psnr_db` rows and, if given, a trailing
/// `# geometry_bpp=<value>` line.
pub fn write_rd_csv<W: Write>(mut out: W, curve: &RdCurve, geometry_bpp: Option<f64>) -> Result<()> {
    writeln!(out, "{RD_CSV_HEADER}")?;
    for p in curve.points() {
        writeln!(out, "{},{}", format_sig6(p.bpp), format_sig6(p.psnr))?;
    }
    if let Some(g) = geometry_bpp {
        writeln!(out, "# geometry_bpp={}", format_sig6(g))?;
    }
    Ok(())
}

/// Reads a curve written by [`write_rd_csv`], returning the geometry rate
/// if the sidecar line is present.
pub fn read_rd_csv<R: BufRead>(input: R) -> Result<(RdCurve, Option<f64>)> {
    let mut points = Vec::new();
    let mut geometry = None;
    let mut saw_header = false;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let location = || format!("line {}", n + 1);
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("geometry_bpp=") {
                geometry = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse {
                    location: location(),
                    detail: e.to_string(),
                })?);
            }
            continue;
        }
        if !saw_header {
            if line != RD_CSV_HEADER {
                return Err(Error::Parse {
                    location: location(),
                    detail: format!("expected header '{RD_CSV_HEADER}', found '{line}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse {
                location: location(),
                detail: format!("'{s}': {e}"),
            })
        };
        match fields.as_slice() {
            [bpp, psnr] => points.push(RatePoint {
                bpp: parse(bpp)?,
                psnr: parse(psnr)?,
            }),
            _ => {
                return Err(Error::Parse {
                    location: location(),
                    detail: format!("expected 2 fields, found {}", fields.len()),
                })
            }
        }
    }
    if !saw_header {
        return Err(Error::Parse {
            location: "line 1".into(),
            detail: "missing header".into(),
        });
    }
    Ok((RdCurve::new(points)?, geometry))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("need two equally long samples of size >= 2".into()));
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput("constant sample has no rank correlation".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(points: &[(f64, f64)]) -> RdCurve {
        RdCurve::new(points.iter().map(|&(bpp, psnr)| RatePoint { bpp, psnr }).collect()).unwrap()
    }

    fn base() -> RdCurve {
        curve(&[(0.25, 28.1), (0.6, 31.4), (1.3, 35.0), (2.4, 38.2), (4.1, 41.9), (6.0, 44.0)])
    }

    #[test]
    fn psnr_examples() {
        let orig = vec![10.0, 200.0, 0.0, 255.0];
        let off255: Vec<f64> = [255.0, 0.0, 255.0, 0.0].to_vec();
        let a = vec![0.0, 255.0, 0.0, 255.0];
        assert_eq!(psnr_attribute(&a, &off255).unwrap(), Psnr::Db(0.0));
        let plus1: Vec<f64> = orig.iter().map(|v| v + 1.0).collect();
        let Psnr::Db(db) = psnr_attribute(&orig, &plus1).unwrap() else { panic!() };
        assert!((db - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((db - 48.1308).abs() < 1e-3);
        assert_eq!(psnr_attribute(&orig, &orig).unwrap(), Psnr::Lossless);
        assert!(psnr_attribute(&orig, &orig[..2]).is_err());
        assert!(psnr_attribute(&[], &[]).is_err());
    }

    #[test]
    fn bpp_examples() {
        assert_eq!(attribute_bpp(0, 10).unwrap(), 0.0);
        assert_eq!(attribute_bpp(30, 10).unwrap(), 3.0);
        assert!(attribute_bpp(1, 0).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(RdCurve::new(vec![RatePoint { bpp: 0.0, psnr: 1.0 }]).is_err());
        assert!(RdCurve::new(vec![RatePoint { bpp: 2.0, psnr: 1.0 }, RatePoint { bpp: 1.0, psnr: 2.0 }]).is_err());
        assert!(RdCurve::from_unsorted(vec![RatePoint { bpp: 2.0, psnr: 1.0 }, RatePoint { bpp: 1.0, psnr: 2.0 }]).is_ok());
    }

    #[test]
    fn bd_identity_and_shift() {
        let a = base();
        let same = bd_metrics(&a, &a).unwrap();
        assert!(same.delta_psnr_db.abs() < 1e-12 && same.delta_rate_percent.abs() < 1e-10);

        let up = curve(&a.points().iter().map(|p| (p.bpp, p.psnr + 1.0)).collect::<Vec<_>>());
        let d = bd_metrics(&a, &up).unwrap();
        assert!((d.delta_psnr_db - 1.0).abs() < 1e-6, "{d:?}");
        assert!(d.delta_rate_percent < 0.0);

        let half = curve(&a.points().iter().map(|p| (p.bpp / 2.0, p.psnr)).collect::<Vec<_>>());
        let d = bd_metrics(&a, &half).unwrap();
        assert!((d.delta_rate_percent + 50.0).abs() < 1e-6, "{d:?}");
    }

    #[test]
    fn bd_ignores_lossless_and_needs_four_points() {
        let mut pts: Vec<(f64, f64)> = base().points().iter().map(|p| (p.bpp, p.psnr)).collect();
        pts.push((9.0, f64::INFINITY));
        let with_lossless = curve(&pts);
        let d = bd_metrics(&base(), &with_lossless).unwrap();
        assert!(d.delta_psnr_db.abs() < 1e-12);

        let short = curve(&[(1.0, 30.0), (2.0, 33.0), (3.0, 35.0), (4.0, f64::INFINITY)]);
        assert!(bd_metrics(&short, &base()).is_err());

        let far = curve(&[(100.0, 60.0), (200.0, 61.0), (300.0, 62.0), (400.0, 63.0)]);
        assert!(bd_metrics(&base(), &far).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut pts: Vec<(f64, f64)> = base().points().iter().map(|p| (p.bpp, p.psnr)).collect();
        pts.push((8.123456789, f64::INFINITY));
        let c = curve(&pts);
        let mut buf = Vec::new();
        write_rd_csv(&mut buf, &c, Some(23.456789)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("bpp,psnr_db\n0.250000,28.1000\n"), "{text}");
        assert!(text.contains("8.12346,inf\n"));
        assert!(text.ends_with("# geometry_bpp=23.4568\n"));
        let (back, geom) = read_rd_csv(buf.as_slice()).unwrap();
        assert_eq!(geom, Some(23.4568));
        assert_eq!(back.points().len(), c.points().len());
        assert!(bd_metrics(&c, &back).unwrap().delta_psnr_db.abs() < 1e-4);

        assert!(read_rd_csv("bpp;psnr\n1,2\n".as_bytes()).is_err());
        assert!(read_rd_csv("bpp,psnr_db\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(48.130803), "48.1308");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(0.0), "0");
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((spearman(&x, &[1.0, 4.0, 9.0, 16.0, 100.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert!(spearman(&x, &[1.0; 5]).is_err());
    }

    proptest! {
        #[test]
        fn bd_antisymmetry(
            psnr_shift in -2.0..2.0f64,
            rate_scale in 0.5..2.0f64,
            wobble in prop::collection::vec(-0.3..0.3f64, 6),
        ) {
            let a = base();
            let b = curve(&a.points().iter().zip(&wobble)
                .map(|(p, w)| (p.bpp * rate_scale, p.psnr + psnr_shift + w))
                .collect::<Vec<_>>());
            let ab = bd_metrics(&a, &b).unwrap();
            let ba = bd_metrics(&b, &a).unwrap();
            prop_assert!((ab.delta_psnr_db + ba.delta_psnr_db).abs() < 1e-9);
            let prod = (1.0 + ab.delta_rate_percent / 100.0) * (1.0 + ba.delta_rate_percent / 100.0);
            prop_assert!((prod - 1.0).abs() < 1e-6);
        }

        #[test]
        fn smaller_errors_never_lower_psnr(
            pairs in prop::collection::vec((0.0..=255.0f64, -40.0..40.0f64), 1..200),
            shrink in 0.0..1.0f64,
        ) {
            let orig: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let worse: Vec<f64> = pairs.iter().map(|p| p.0 + p.1).collect();
            let better: Vec<f64> = pairs.iter().map(|p| p.0 + p.1 * shrink).collect();
            let (w, b) = (psnr_attribute(&orig, &worse).unwrap(), psnr_attribute(&orig, &better).unwrap());
            prop_assert!(b.value() >= w.value());
        }
    }
}
