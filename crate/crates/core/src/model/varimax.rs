use nalgebra::DMatrix;

/// Raw varimax criterion Σ_j [mean_i λ_ij⁴ − (mean_i λ_ij²)²].
pub fn varimax_criterion(loading: &DMatrix<f64>) -> f64 {
    let d = loading.nrows() as f64;
    loading
        .column_iter()
        .map(|col| {
            let m2 = col.iter().map(|v| v * v).sum::<f64>() / d;
            let m4 = col.iter().map(|v| v.powi(4)).sum::<f64>() / d;
            m4 - m2 * m2
        })
        .sum()
}

/// Varimax rotation by sweeps of pairwise planar rotations.
pub fn varimax(loading: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, q) = loading.shape();
    let mut l = loading.clone();
    if q < 2 || d == 0 {
        return l;
    }
    let n = d as f64;
    let mut crit = varimax_criterion(&l);
    for _ in 0..500 {
        for j in 0..q - 1 {
            for k in j + 1..q {
                let (mut a, mut b, mut c, mut e) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..d {
                    let (x, y) = (l[(i, j)], l[(i, k)]);
                    let u = x * x - y * y;
                    let v = 2.0 * x * y;
                    a += u;
                    b += v;
                    c += u * u - v * v;
                    e += 2.0 * u * v;
                }
                let num = e - 2.0 * a * b / n;
                let den = c - (a * a - b * b) / n;
                let phi = 0.25 * num.atan2(den);
                if phi.abs() < 1e-15 {
                    continue;
                }
                let (s, co) = phi.sin_cos();
                for i in 0..d {
                    let (x, y) = (l[(i, j)], l[(i, k)]);
                    l[(i, j)] = co * x + s * y;
                    l[(i, k)] = -s * x + co * y;
                }
            }
        }
        let next = varimax_criterion(&l);
        let gain = next - crit;
        crit = next;
        if gain < 1e-8 {
            break;
        }
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_untouched() {
        let l = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        assert_eq!(varimax(&l), l);
    }

    #[test]
    fn beats_rotation_grid() {
        let l = DMatrix::from_row_slice(
            8,
            2,
            &[0.8, 0.3, 0.7, 0.4, 0.9, 0.1, 0.6, 0.5, 0.2, 0.8, 0.3, 0.9, 0.1, 0.7, 0.4, 0.6],
        );
        let best = varimax_criterion(&varimax(&l));
        for k in 0..360 {
            let t = (k as f64).to_radians();
            let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
            assert!(best >= varimax_criterion(&(&l * rot)) - 1e-10);
        }
    }

    #[test]
    fn fixed_point() {
        let l = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.9, 0.0, 0.0, 1.0, 0.0, 0.8]);
        let v = varimax(&l);
        assert!((varimax_criterion(&v) - varimax_criterion(&l)).abs() < 1e-12);
        assert!((v.abs() - l.abs()).norm() < 1e-8);
    }
}
