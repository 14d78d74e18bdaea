/// Mean computed about the first value, so identical inputs give that value exactly.
pub fn mean(values: &[f64]) -> f64 {
    let Some(&first) = values.first() else {
        return f64::NAN;
    };
    first + values.iter().map(|v| v - first).sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let se = (sample_variance(values) / values.len() as f64).sqrt();
    (mean(values), se)
}

/// Unbiased sample covariance of two equally long sequences.
pub(crate) fn sample_covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_is_exact() {
        let v = vec![0.1; 1000];
        assert_eq!(mean(&v), 0.1);
        assert_eq!(sample_variance(&v), 0.0);
        assert_eq!(mean_and_stderr(&v).1, 0.0);
    }

    #[test]
    fn small_examples() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0]), 1.0);
        assert_eq!(sample_covariance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert!(mean(&[]).is_nan());
        assert!(sample_variance(&[1.0]).is_nan());
    }
}
