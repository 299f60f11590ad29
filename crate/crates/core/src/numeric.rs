//! Small numeric helpers shared by the loss terms and metrics.

/// Pairwise (cascade) summation in a fixed order.
///
/// The reduction tree depends only on the slice length, so results are
/// reproducible bit-for-bit regardless of how the inputs were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Index of the lower median of `values` (the element at rank `(n-1)/2`),
/// with ties broken by position so the choice is deterministic.
pub fn lower_median_index(values: &[f64]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    Some(order[(values.len() - 1) / 2])
}

pub fn lower_median(values: &[f64]) -> Option<f64> {
    lower_median_index(values).map(|i| values[i])
}

/// Sign with `sign(0) == 0`, the subgradient choice used for every L1 kink.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// SplitMix64 finalizer; used to derive independent sub-seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 45.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn pairwise_is_accurate_on_long_input() {
        let v = vec![0.1; 100_000];
        assert!((pairwise_sum(&v) - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn lower_median_picks_lower_of_two_middles() {
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
        assert_eq!(lower_median(&[2.0, 2.5, 10.0]), Some(2.5));
        assert_eq!(lower_median(&[]), None);
        // ties resolve to the earliest position
        assert_eq!(lower_median_index(&[1.0, 1.0, 1.0]), Some(1));
    }

    #[test]
    fn seeds_differ_per_part() {
        assert_ne!(mix_seed(&[1, 2, 3]), mix_seed(&[1, 2, 4]));
        assert_ne!(mix_seed(&[1, 2]), mix_seed(&[2, 1]));
        assert_eq!(mix_seed(&[7, 0, 1]), mix_seed(&[7, 0, 1]));
    }
}
