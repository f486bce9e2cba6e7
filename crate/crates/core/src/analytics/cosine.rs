use super::AnalyticsError;

/// `1 - u.v / (|u| |v|)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f32], v: &[f32]) -> Result<f64, AnalyticsError> {
    debug_assert_eq!(u.len(), v.len());
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 {
        return Err(AnalyticsError::ZeroVector(0));
    }
    if nv == 0.0 {
        return Err(AnalyticsError::ZeroVector(1));
    }
    Ok((1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0))
}

/// Rows scaled to unit length, in f64. Fails on the first all-zero row.
pub(crate) fn unit_rows(emb: &crate::table::EmbeddingMatrix) -> Result<Vec<f64>, AnalyticsError> {
    let d = emb.d();
    let mut out = Vec::with_capacity(emb.n() * d);
    for (i, row) in emb.rows().enumerate() {
        let norm = row.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(AnalyticsError::ZeroVector(i));
        }
        out.extend(row.iter().map(|&x| f64::from(x) / norm));
    }
    Ok(out)
}

/// Cosine distance between two unit vectors.
#[inline]
pub(crate) fn unit_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot).clamp(0.0, 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn orthogonal() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
    }

    #[test]
    fn parallel_scaled() {
        assert!(cosine_distance(&[2.0, 0.0], &[4.0, 0.0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn diagonal_vs_axis() {
        let expected = 1.0 - 1.0 / 2f64.sqrt();
        let got = cosine_distance(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.2928932).abs() < 1e-7);
    }

    #[test]
    fn opposite_is_two() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-3.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(AnalyticsError::ZeroVector(0))
        );
        assert_eq!(
            cosine_distance(&[1.0, 0.0], &[0.0, 0.0]),
            Err(AnalyticsError::ZeroVector(1))
        );
    }

    fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f32>> {
        proptest::collection::vec(-100f32..100.0, d)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn symmetric_scale_invariant_self_zero(
            (u, v) in (1usize..12).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
            s in 0.01f32..100.0,
        ) {
            let duv = cosine_distance(&u, &v).unwrap();
            let dvu = cosine_distance(&v, &u).unwrap();
            prop_assert!((0.0..=2.0).contains(&duv));
            prop_assert!((duv - dvu).abs() < 1e-12);
            let scaled: Vec<f32> = u.iter().map(|x| x * s).collect();
            prop_assert!((cosine_distance(&scaled, &v).unwrap() - duv).abs() < 1e-5);
            prop_assert!(cosine_distance(&u, &u).unwrap() < 1e-12);
        }
    }
}
