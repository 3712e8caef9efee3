use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Two-sided paired t-test on `a[k] − b[k]`.
///
/// All-zero differences give 1.0; constant nonzero differences (zero
/// variance) give 0.0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::data("paired t-test needs at least two pairs"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite paired difference".into()));
    }
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(1.0);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (nf - 1.0);
    if var == 0.0 {
        return Ok(0.0);
    }
    let t = mean / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        assert_eq!(paired_t_test(&[0.1, 0.5, 0.9], &[0.1, 0.5, 0.9]).unwrap(), 1.0);
    }

    #[test]
    fn constant_difference() {
        assert_eq!(paired_t_test(&[2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 0.0);
    }

    #[test]
    fn length_checks() {
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
        assert!(paired_t_test(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn five_pair_fixture() {
        // scipy.stats.ttest_rel
        let a = [0.62, 0.71, 0.58, 0.66, 0.69];
        let b = [0.60, 0.65, 0.59, 0.61, 0.64];
        let p = paired_t_test(&a, &b).unwrap();
        assert!((p - 0.05764594853549908).abs() < 1e-6, "{p}");
    }

    #[test]
    fn symmetric_in_argument_order() {
        let a = [0.3, 0.7, 0.2, 0.9, 0.4];
        let b = [0.1, 0.6, 0.4, 0.5, 0.3];
        assert_eq!(paired_t_test(&a, &b).unwrap(), paired_t_test(&b, &a).unwrap());
    }
}
