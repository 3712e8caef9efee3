use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `theta`:
/// `(f(θ + εeᵢ) − f(θ − εeᵢ)) / 2ε` for every coordinate.
pub fn finite_difference_gradient<F>(mut f: F, theta: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::Oracle(format!("step must be positive, got {eps}")));
    }
    let mut point = theta.to_vec();
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + eps;
        let plus = f(&point);
        point[i] = orig - eps;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Oracle(format!(
                "non-finite objective around coordinate {i}: f(+)={plus}, f(-)={minus}"
            )));
        }
        grad.push((plus - minus) / (2.0 * eps));
    }
    Ok(grad)
}

/// `|a − b| / max(|a|, |b|, floor)`; zero when both are zero.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (a - b).abs() / denom
    }
}

/// Largest [`relative_error`] over paired coordinates, with its index.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> (f64, usize) {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (&x, &y))| (relative_error(x, y, floor), i))
        .fold((0.0, 0), |acc, cur| if cur.0 > acc.0 { cur } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::sigmoid;
    use proptest::prelude::*;

    #[test]
    fn quadratic() {
        let g = finite_difference_gradient(|t| t[0] * t[0], &[3.0], 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_difference_gradient(|_| 4.5, &[1.0, -2.0, 3.0], 1e-6).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let g = finite_difference_gradient(|t| sigmoid(t[0]), &[0.0], 1e-6).unwrap();
        assert!((g[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let r = finite_difference_gradient(|t| (t[0]).ln(), &[0.0], 1e-6);
        assert!(matches!(r, Err(Error::Oracle(_))));
        assert!(finite_difference_gradient(|t| t[0], &[0.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn exact_on_quadratics(
            a in proptest::collection::vec(-3.0f64..3.0, 3),
            b in proptest::collection::vec(-3.0f64..3.0, 3),
            c in -3.0f64..3.0,
            x in proptest::collection::vec(-3.0f64..3.0, 3),
        ) {
            // f(x) = Σ aᵢxᵢ² + Σ bᵢxᵢ + c·x₀x₁
            let f = |t: &[f64]| {
                (0..3).map(|i| a[i] * t[i] * t[i] + b[i] * t[i]).sum::<f64>() + c * t[0] * t[1]
            };
            let fd = finite_difference_gradient(f, &x, 1e-5).unwrap();
            let exact = [
                2.0 * a[0] * x[0] + b[0] + c * x[1],
                2.0 * a[1] * x[1] + b[1] + c * x[0],
                2.0 * a[2] * x[2] + b[2],
            ];
            for i in 0..3 {
                prop_assert!(relative_error(fd[i], exact[i], 1.0) < 1e-6,
                    "coord {} fd {} exact {}", i, fd[i], exact[i]);
            }
        }
    }
}
