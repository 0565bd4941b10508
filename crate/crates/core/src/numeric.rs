/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    if sum.is_finite() {
        sum + comp
    } else {
        sum
    }
}

/// Suffix sums `out[r] = sum_{j >= r} values[j]`, with `out[len] = 0`,
/// accumulated right to left with compensation.
pub fn suffix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (r, &v) in values.iter().enumerate().rev() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        out[r] = sum + comp;
    }
    out
}

/// Prefix sums `out[r] = sum_{j < r} values[j]`, with `out[0] = 0`.
pub fn prefix_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (r, &v) in values.iter().enumerate() {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        out[r + 1] = sum + comp;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_keeps_infinity() {
        assert_eq!(neumaier_sum([1.0, f64::INFINITY, 2.0]), f64::INFINITY);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((neumaier_sum(v) - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn prefix_and_suffix_agree_with_total() {
        let v = [0.5, 0.25, 0.125, 0.125];
        let p = prefix_sums(&v);
        let s = suffix_sums(&v);
        assert_eq!(p, vec![0.0, 0.5, 0.75, 0.875, 1.0]);
        assert_eq!(s, vec![1.0, 0.5, 0.25, 0.125, 0.0]);
    }
}
