//! Small order-statistics helpers.

/// Nearest-rank percentile: the smallest value with at least `p`% of the
/// samples at or below it. Reorders `values`. `p` is clamped to `[0, 100]`.
pub fn percentile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let p = p.clamp(0.0, 100.0);
    let exact = p / 100.0 * n as f64;
    // 0.999 * 1000 is 999.0000000000001 in f64; snap near-integers before ceil
    let nearest = libm::round(exact);
    let rank = if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { libm::ceil(exact) } as usize;
    let idx = rank.clamp(1, n) - 1;
    let (_, v, _) = values.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    Some(*v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let mut v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(percentile(&mut v, 100.0), Some(5.0));
        assert_eq!(percentile(&mut v, 0.0), Some(1.0));
        assert_eq!(percentile(&mut v, 50.0), Some(3.0));
        assert_eq!(percentile(&mut v, 41.0), Some(3.0));
        assert_eq!(percentile(&mut v, 40.0), Some(2.0));
        assert_eq!(percentile(&mut [], 50.0), None);
    }
}
