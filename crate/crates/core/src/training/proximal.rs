use crate::numerics::Matrix;

/// Soft-thresholding `sign(h)·max(|h| − threshold, 0)` of every entry.
pub fn proximal_l1(h: &Matrix, threshold: f64) -> Matrix {
    let mut out = h.clone();
    proximal_l1_in_place(&mut out, threshold);
    out
}

pub fn proximal_l1_in_place(h: &mut Matrix, threshold: f64) {
    if threshold <= 0.0 {
        return;
    }
    for x in h.as_mut_slice() {
        let shrunk = x.abs() - threshold;
        *x = if shrunk > 0.0 { shrunk.copysign(*x) } else { 0.0 };
    }
}

/// Fraction of entries that are exactly zero.
pub fn sparsity_ratio(h: &Matrix) -> f64 {
    let n = h.as_slice().len();
    if n == 0 {
        return 0.0;
    }
    h.as_slice().iter().filter(|&&x| x == 0.0).count() as f64 / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let h = Matrix::from_rows(&[vec![0.25, -0.25], vec![0.05, -0.5]]).unwrap();
        assert_eq!(proximal_l1(&h, 0.0), h);
        let p = proximal_l1(&h, 0.1);
        assert!((p.get(0, 0) - 0.15).abs() < 1e-15);
        assert!((p.get(0, 1) + 0.15).abs() < 1e-15);
        assert_eq!(p.get(1, 0), 0.0);
        assert!((p.get(1, 1) + 0.4).abs() < 1e-15);
        assert_eq!(proximal_l1(&h, 1.0), Matrix::zeros(2, 2));
    }

    #[test]
    fn ratios() {
        assert_eq!(sparsity_ratio(&Matrix::zeros(3, 4)), 1.0);
        assert_eq!(sparsity_ratio(&Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap()), 0.0);
        assert_eq!(sparsity_ratio(&Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 3.0]]).unwrap()), 0.5);
    }

    proptest! {
        #[test]
        fn no_residue_below_threshold(values in prop::collection::vec(-1.0f64..1.0, 1..40), t in 0.0f64..0.5) {
            let h = Matrix::from_vec(1, values.len(), values.clone()).unwrap();
            let p = proximal_l1(&h, t);
            for (&before, &after) in values.iter().zip(p.as_slice()) {
                if before.abs() <= t {
                    prop_assert_eq!(after, 0.0);
                } else {
                    prop_assert!(after.signum() == before.signum());
                    prop_assert!((after.abs() - (before.abs() - t)).abs() < 1e-15);
                }
            }
        }
    }
}
