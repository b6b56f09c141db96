//! Euclidean projection onto the unit simplex.

use crate::error::{Error, Result};

/// Projects `v` onto `Δ_l = {a ≥ 0, Σ a_i = 1}`.
///
/// Sort-based finite algorithm: after sorting in decreasing order, the
/// threshold `θ` is fixed by the largest prefix whose shifted entries stay
/// positive, and the result is `max(v - θ, 0)`.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Shape("cannot project an empty vector".into()));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = v.to_vec();
    project_simplex_in_place(&mut out);
    Ok(out)
}

/// In-place variant of [`project_simplex`]; `v` must be finite and non-empty.
pub fn project_simplex_in_place(v: &mut [f64]) {
    let threshold = simplex_threshold(v);
    for x in v.iter_mut() {
        *x = (*x - threshold).max(0.0);
    }
}

fn simplex_threshold(v: &[f64]) -> f64 {
    // Small label counts dominate; avoid the allocation for them.
    let mut buf = [0.0f64; 16];
    let mut heap;
    let sorted: &mut [f64] = if v.len() <= buf.len() {
        buf[..v.len()].copy_from_slice(v);
        &mut buf[..v.len()]
    } else {
        heap = v.to_vec();
        &mut heap
    };
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            threshold = t;
        }
    }
    threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn examples() {
        assert!(close(&project_simplex(&[0.2, 0.8]).unwrap(), &[0.2, 0.8], 1e-15));
        assert_eq!(project_simplex(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(close(&project_simplex(&[0.6, 0.6, 0.0]).unwrap(), &[0.5, 0.5, 0.0], 1e-15));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(project_simplex(&[1.0, f64::NAN]), Err(Error::NonFinite { index: 1 })));
        assert!(project_simplex(&[f64::INFINITY, 0.0]).is_err());
        assert!(project_simplex(&[]).is_err());
    }

    #[test]
    fn long_vectors_use_heap_path() {
        let v: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let p = project_simplex(&v).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    proptest! {
        #[test]
        fn idempotent(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
            let p = project_simplex(&v).unwrap();
            let q = project_simplex(&p).unwrap();
            prop_assert!(close(&p, &q, 1e-12));
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn optimality_conditions(v in prop::collection::vec(-5.0f64..5.0, 2..8)) {
            // KKT: v - p = θ on the support, v - p ≤ θ off it.
            let p = project_simplex(&v).unwrap();
            let theta = v.iter().zip(&p).filter(|(_, &pi)| pi > 0.0)
                .map(|(vi, pi)| vi - pi).next().unwrap();
            for (vi, pi) in v.iter().zip(&p) {
                if *pi > 0.0 {
                    prop_assert!((vi - pi - theta).abs() < 1e-12);
                } else {
                    prop_assert!(*vi <= theta + 1e-12);
                }
            }
        }
    }
}
