//! Region Adaptive Hierarchical Transform.
//!
//! Leaves are merged bottom-up one axis at a time: at every octree level the
//! transform first pairs nodes that differ only along axis 0, then axis 1,
//! then axis 2 (`x, y, z` or `r, theta, h`, whichever the grid uses). With
//! Morton codes this is simply "pair neighbours whose codes differ in bit 0,
//! then shift right by one", repeated `3 * depth` times.
//!
//! A pair of nodes with values `(a1, a2)` and weights `(w1, w2)` goes through
//! the orthonormal butterfly
//!
//! ```text
//! low  = ( sqrt(w1) a1 + sqrt(w2) a2) / sqrt(w1 + w2)
//! high = (-sqrt(w2) a1 + sqrt(w1) a2) / sqrt(w1 + w2)
//! ```
//!
//! and the low-pass value continues upward with weight `w1 + w2`. Unpaired
//! nodes pass through untouched. High-pass coefficients are emitted pass by
//! pass (deepest level first, axis order within a level) and in ascending
//! code order within a pass, so the decoder can regenerate the schedule from
//! geometry alone.
//!
//! The leaf values themselves are the transform input, so the total energy of
//! the coefficients equals the sum of squared leaf values for any weights.
//! With unit leaf weights the DC coefficient is `sqrt(n)` times the mean.

use crate::error::{Error, Result};
use crate::morton;
use crate::octree::Octree;
use crate::voxelizer::VoxelIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedLeaf {
    pub index: VoxelIndex,
    pub attribute: f64,
    pub weight: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientStream {
    pub dc: f64,
    pub highs: Vec<f64>,
}

impl CoefficientStream {
    pub fn len(&self) -> usize {
        self.highs.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn energy(&self) -> f64 {
        self.dc * self.dc + self.highs.iter().map(|h| h * h).sum::<f64>()
    }
}

/// One butterfly: output slot in the pass and the two input weights.
#[derive(Debug, Clone, Copy)]
struct Merge {
    out: u32,
    w1: u64,
    w2: u64,
}

#[derive(Debug, Default)]
struct Pass {
    in_len: usize,
    merges: Vec<Merge>,
}

/// Merge schedule of a leaf set, independent of attribute values.
#[derive(Debug)]
struct Plan {
    passes: Vec<Pass>,
}

fn butterfly_gains(w1: u64, w2: u64) -> (f64, f64) {
    let total = (w1 + w2) as f64;
    ((w1 as f64 / total).sqrt(), (w2 as f64 / total).sqrt())
}

impl Plan {
    fn new(codes: &[u64], weights: &[u64], depth: u32) -> Self {
        let mut codes = codes.to_vec();
        let mut weights = weights.to_vec();
        let mut passes = Vec::with_capacity(3 * depth as usize);
        for _ in 0..3 * depth {
            let mut pass = Pass {
                in_len: codes.len(),
                merges: Vec::new(),
            };
            let mut next_codes = Vec::with_capacity(codes.len());
            let mut next_weights = Vec::with_capacity(codes.len());
            let mut i = 0;
            while i < codes.len() {
                let parent = codes[i] >> 1;
                if i + 1 < codes.len() && codes[i + 1] >> 1 == parent {
                    pass.merges.push(Merge {
                        out: next_codes.len() as u32,
                        w1: weights[i],
                        w2: weights[i + 1],
                    });
                    next_weights.push(weights[i] + weights[i + 1]);
                    i += 2;
                } else {
                    next_weights.push(weights[i]);
                    i += 1;
                }
                next_codes.push(parent);
            }
            passes.push(pass);
            codes = next_codes;
            weights = next_weights;
        }
        debug_assert_eq!(codes.len(), 1);
        Self { passes }
    }
}

fn check_codes(codes: &[u64], depth: u32) -> Result<()> {
    if !(1..=morton::MAX_DEPTH).contains(&depth) {
        return Err(Error::InvalidInput(format!("depth {depth} out of range")));
    }
    if codes.is_empty() {
        return Err(Error::InvalidInput("no leaves to transform".into()));
    }
    if codes.last().is_some_and(|&c| c >> (3 * depth) != 0) {
        return Err(Error::InvalidInput(format!("leaf index exceeds depth {depth}")));
    }
    if codes.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate leaf indices".into()));
    }
    Ok(())
}

/// Forward transform. Leaves may come in any order; they are processed in
/// Morton order.
pub fn raht_forward(leaves: &[WeightedLeaf], depth: u32) -> Result<CoefficientStream> {
    let mut keyed: Vec<(u64, f64, u64)> = leaves
        .iter()
        .map(|l| (l.index.morton(), l.attribute, l.weight as u64))
        .collect();
    keyed.sort_by_key(|k| k.0);
    let codes: Vec<u64> = keyed.iter().map(|k| k.0).collect();
    check_codes(&codes, depth)?;
    if keyed.iter().any(|k| k.2 == 0) {
        return Err(Error::InvalidInput("leaf weights must be positive".into()));
    }
    let weights: Vec<u64> = keyed.iter().map(|k| k.2).collect();
    let plan = Plan::new(&codes, &weights, depth);

    let mut values: Vec<f64> = keyed.iter().map(|k| k.1).collect();
    let mut highs = Vec::with_capacity(values.len() - 1);
    for pass in &plan.passes {
        let mut next = Vec::with_capacity(pass.in_len - pass.merges.len());
        let mut merges = pass.merges.iter().peekable();
        let mut i = 0;
        while i < pass.in_len {
            match merges.next_if(|m| m.out as usize == next.len()) {
                Some(m) => {
                    let (a, b) = butterfly_gains(m.w1, m.w2);
                    let (x1, x2) = (values[i], values[i + 1]);
                    next.push(a * x1 + b * x2);
                    highs.push(-b * x1 + a * x2);
                    i += 2;
                }
                None => {
                    next.push(values[i]);
                    i += 1;
                }
            }
        }
        values = next;
    }
    Ok(CoefficientStream { dc: values[0], highs })
}

/// Inverse transform over the leaves of `geometry`, using its leaf weights.
pub fn raht_inverse(coeffs: &CoefficientStream, geometry: &Octree) -> Result<Vec<WeightedLeaf>> {
    let codes = geometry.leaves();
    let weights: Vec<u64> = geometry.leaf_payload().iter().map(|p| p.1 as u64).collect();
    let values = inverse_values(coeffs, codes, &weights, geometry.depth())?;
    Ok(codes
        .iter()
        .zip(values)
        .zip(&weights)
        .map(|((&code, attribute), &w)| WeightedLeaf {
            index: VoxelIndex::from_morton(code),
            attribute,
            weight: w as u32,
        })
        .collect())
}

/// Inverse transform over sorted leaf codes; returns one value per code.
pub fn inverse_values(
    coeffs: &CoefficientStream,
    codes: &[u64],
    weights: &[u64],
    depth: u32,
) -> Result<Vec<f64>> {
    check_codes(codes, depth)?;
    if codes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("leaf codes must be sorted".into()));
    }
    if weights.len() != codes.len() || weights.contains(&0) {
        return Err(Error::InvalidInput("one positive weight per leaf required".into()));
    }
    if coeffs.len() != codes.len() {
        return Err(Error::InvalidInput(format!(
            "{} coefficients for {} leaves",
            coeffs.len(),
            codes.len()
        )));
    }
    let plan = Plan::new(codes, weights, depth);

    let mut values = vec![coeffs.dc];
    let mut end = coeffs.highs.len();
    for pass in plan.passes.iter().rev() {
        let start = end - pass.merges.len();
        let highs = &coeffs.highs[start..end];
        let mut prev = Vec::with_capacity(pass.in_len);
        let mut merges = pass.merges.iter().zip(highs).peekable();
        for (j, &v) in values.iter().enumerate() {
            match merges.next_if(|(m, _)| m.out as usize == j) {
                Some((m, &high)) => {
                    let (a, b) = butterfly_gains(m.w1, m.w2);
                    prev.push(a * v - b * high);
                    prev.push(b * v + a * high);
                }
                None => prev.push(v),
            }
        }
        debug_assert_eq!(prev.len(), pass.in_len);
        values = prev;
        end = start;
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::octree::octree_from_codes;
    use proptest::prelude::*;

    fn leaf(i: u32, j: u32, k: u32, attribute: f64, weight: u32) -> WeightedLeaf {
        WeightedLeaf {
            index: VoxelIndex { i, j, k },
            attribute,
            weight,
        }
    }

    #[test]
    fn single_leaf_is_pure_dc() {
        let c = raht_forward(&[leaf(3, 1, 2, 77.0, 9)], 4).unwrap();
        assert_eq!(c.dc, 77.0);
        assert!(c.highs.is_empty());
        let ot = octree_from_codes(4, vec![VoxelIndex { i: 3, j: 1, k: 2 }.morton()]).unwrap();
        let back = raht_inverse(&c, &ot).unwrap();
        assert_eq!(back[0].attribute, 77.0);
    }

    #[test]
    fn two_siblings() {
        let c = raht_forward(&[leaf(0, 0, 0, 4.0, 1), leaf(1, 0, 0, 8.0, 1)], 1).unwrap();
        assert!((c.dc - 12.0 / 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(c.highs.len(), 1);
        assert!((c.highs[0] - 4.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((c.dc - 8.485_281).abs() < 1e-6 && (c.highs[0] - 2.828_427).abs() < 1e-6);
    }

    #[test]
    fn constant_signal_is_pure_dc() {
        let leaves: Vec<WeightedLeaf> = (0..37u32).map(|n| leaf(n % 8, (n / 8) * 3, n % 5, 6.5, 1)).collect();
        let mut codes: Vec<u64> = leaves.iter().map(|l| l.index.morton()).collect();
        codes.sort_unstable();
        codes.dedup();
        let leaves: Vec<WeightedLeaf> = codes
            .iter()
            .map(|&c| WeightedLeaf {
                index: VoxelIndex::from_morton(c),
                attribute: 6.5,
                weight: 1,
            })
            .collect();
        let c = raht_forward(&leaves, 5).unwrap();
        let n = leaves.len() as f64;
        assert!((c.dc - 6.5 * n.sqrt()).abs() < 1e-12);
        assert!(c.highs.iter().all(|h| h.abs() < 1e-12));

        let dc_only = CoefficientStream {
            dc: 6.5 * n.sqrt(),
            highs: vec![0.0; leaves.len() - 1],
        };
        let back = raht_inverse(&dc_only, &octree_from_codes(5, codes).unwrap()).unwrap();
        assert!(back.iter().all(|l| (l.attribute - 6.5).abs() < 1e-12));
    }

    #[test]
    fn axis_order_is_x_then_y_then_z() {
        // x-pair merges in the first pass, its high coefficient comes first.
        let leaves = [
            leaf(0, 0, 0, 1.0, 1),
            leaf(1, 0, 0, 3.0, 1),
            leaf(0, 1, 0, 10.0, 1),
        ];
        let c = raht_forward(&leaves, 1).unwrap();
        assert_eq!(c.highs.len(), 2);
        assert!((c.highs[0] - 2.0 / 2f64.sqrt()).abs() < 1e-12);
        // Second pass pairs the x-merged node (weight 2) with the y neighbour.
        let low = 4.0 / 2f64.sqrt();
        let (a, b) = (2f64.sqrt() / 3f64.sqrt(), 1.0 / 3f64.sqrt());
        assert!((c.highs[1] - (-b * low + a * 10.0)).abs() < 1e-12);
        assert!((c.dc - (a * low + b * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(raht_forward(&[], 3).is_err());
        assert!(raht_forward(&[leaf(1, 1, 1, 0.0, 1), leaf(1, 1, 1, 2.0, 1)], 3).is_err());
        assert!(raht_forward(&[leaf(8, 0, 0, 0.0, 1)], 3).is_err());
        assert!(raht_forward(&[leaf(0, 0, 0, 0.0, 0)], 3).is_err());
        let ot = octree_from_codes(2, vec![0, 1]).unwrap();
        let c = CoefficientStream { dc: 1.0, highs: vec![] };
        assert!(matches!(raht_inverse(&c, &ot), Err(Error::InvalidInput(_))));
    }

    fn arb_leaves() -> impl Strategy<Value = (u32, Vec<WeightedLeaf>)> {
        (1u32..=8).prop_flat_map(|depth| {
            let side = 1u32 << depth;
            (
                Just(depth),
                prop::collection::btree_map((0..side, 0..side, 0..side), (-300.0..300.0f64, 1u32..=50), 1..400)
                    .prop_map(|m| {
                        m.into_iter()
                            .map(|((i, j, k), (attribute, weight))| leaf(i, j, k, attribute, weight))
                            .collect()
                    }),
            )
        })
    }

    fn geometry(depth: u32, leaves: &[WeightedLeaf]) -> (Vec<u64>, Vec<u64>, Vec<f64>) {
        let mut v: Vec<(u64, u64, f64)> =
            leaves.iter().map(|l| (l.index.morton(), l.weight as u64, l.attribute)).collect();
        v.sort_by_key(|x| x.0);
        let _ = depth;
        (v.iter().map(|x| x.0).collect(), v.iter().map(|x| x.1).collect(), v.iter().map(|x| x.2).collect())
    }

    proptest! {
        #[test]
        fn parseval_and_round_trip((depth, leaves) in arb_leaves()) {
            let c = raht_forward(&leaves, depth).unwrap();
            prop_assert_eq!(c.len(), leaves.len());
            let energy: f64 = leaves.iter().map(|l| l.attribute * l.attribute).sum();
            prop_assert!((c.energy() - energy).abs() <= 1e-9 * energy.max(1e-300));
            let (codes, weights, attrs) = geometry(depth, &leaves);
            let back = inverse_values(&c, &codes, &weights, depth).unwrap();
            for (a, b) in attrs.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn dc_closed_form((depth, leaves) in arb_leaves()) {
            let c = raht_forward(&leaves, depth).unwrap();
            let total: f64 = leaves.iter().map(|l| l.weight as f64).sum();
            let want: f64 = leaves.iter().map(|l| (l.weight as f64).sqrt() * l.attribute).sum::<f64>() / total.sqrt();
            prop_assert!((c.dc - want).abs() <= 1e-9 * (1.0 + want.abs()));

            let unit: Vec<WeightedLeaf> = leaves.iter().map(|l| WeightedLeaf { weight: 1, ..*l }).collect();
            let c = raht_forward(&unit, depth).unwrap();
            let n = unit.len() as f64;
            let mean = unit.iter().map(|l| l.attribute).sum::<f64>() / n;
            prop_assert!((c.dc - mean * n.sqrt()).abs() <= 1e-9 * (1.0 + c.dc.abs()));
        }

        #[test]
        fn linearity((depth, leaves) in arb_leaves(), alpha in -3.0..3.0f64, beta in -3.0..3.0f64, seed in any::<u64>()) {
            let other: Vec<WeightedLeaf> = leaves
                .iter()
                .enumerate()
                .map(|(i, l)| WeightedLeaf { attribute: ((seed.wrapping_mul(i as u64 + 1) % 1000) as f64) - 500.0, ..*l })
                .collect();
            let mixed: Vec<WeightedLeaf> = leaves
                .iter()
                .zip(&other)
                .map(|(x, y)| WeightedLeaf { attribute: alpha * x.attribute + beta * y.attribute, ..*x })
                .collect();
            let (tx, ty, tm) = (
                raht_forward(&leaves, depth).unwrap(),
                raht_forward(&other, depth).unwrap(),
                raht_forward(&mixed, depth).unwrap(),
            );
            prop_assert!((tm.dc - (alpha * tx.dc + beta * ty.dc)).abs() < 1e-9 * (1.0 + tm.dc.abs()));
            for ((m, x), y) in tm.highs.iter().zip(&tx.highs).zip(&ty.highs) {
                prop_assert!((m - (alpha * x + beta * y)).abs() < 1e-9 * (1.0 + m.abs()));
            }
        }
    }
}
