//! Small numeric helpers shared by the modules.

const PAIRWISE_BLOCK: usize = 16;

/// Pairwise (cascade) summation in a fixed tree order.
///
/// The split points only depend on the slice length, so results are
/// bit-reproducible for a given input order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, v| acc * v as f64)
}

#[cfg(test)]
pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub(crate) fn powi(x: f64, k: i32) -> f64 {
    libm::pow(x, k as f64)
}
