use nalgebra::DMatrix;

use crate::data::Dataset;

/// Numerical rank of the `n × d` design: singular values above
/// `tol · σ_max`. Zero for an all-zero design.
pub fn design_rank(ds: &Dataset, tol: f64) -> usize {
    let (n, d) = (ds.n(), ds.d());
    if n == 0 || d == 0 {
        return 0;
    }
    // Rank of XᵀX equals rank of X; the Gram route keeps memory at d² for tall
    // designs but squares the condition number, so use the Gram only when n is
    // much larger than d.
    let sv = if n > 4 * d {
        let m = DMatrix::from_row_slice(n, d, ds.features());
        let gram = m.transpose() * &m;
        gram.symmetric_eigenvalues()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect::<Vec<_>>()
    } else {
        let m = DMatrix::from_row_slice(n, d, ds.features());
        m.singular_values().iter().copied().collect()
    };
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    // The Gram route cannot resolve below sqrt(machine eps) relative to σ_max.
    let floor = if n > 4 * d { tol.max(1e-7) } else { tol };
    sv.iter().filter(|&&s| s > floor * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::RngHandle;

    #[test]
    fn zero_design() {
        let ds = Dataset::new(3, vec![0.0; 12], vec![0.0; 4], 1.0, 1.0).unwrap();
        assert_eq!(design_rank(&ds, 1e-10), 0);
    }

    #[test]
    fn gaussian_full_rank() {
        let mut rng = RngHandle::new(5, 0);
        let f: Vec<f64> = (0..500).map(|_| rng.standard_normal()).collect();
        let ds = Dataset::new(10, f, vec![0.0; 50], 100.0, 1.0).unwrap();
        assert_eq!(design_rank(&ds, 1e-10), 10);
    }

    #[test]
    fn duplicated_columns() {
        let mut rng = RngHandle::new(6, 0);
        let mut f = Vec::new();
        for _ in 0..200 {
            let (a, b) = (rng.standard_normal(), rng.standard_normal());
            f.extend_from_slice(&[a, b, a + b, 2.0 * a]);
        }
        let ds = Dataset::new(4, f, vec![0.0; 200], 100.0, 1.0).unwrap();
        assert_eq!(design_rank(&ds, 1e-10), 2);
    }

    #[test]
    fn smooth_hard_active_coordinates() {
        let s = crate::instances::SmoothHardSpec {
            n: 30,
            d: 8,
            d_prime: 3,
            p_mass: 1.0,
            b_bias: 0.3,
            signs: vec![],
            y_bound: 1.0,
            x_bound: 1.0,
            dummy: false,
            dummy_c: None,
        };
        let inst = crate::instances::gen_smooth_hard(&s).unwrap();
        assert_eq!(design_rank(&inst.dataset, 1e-10), 3);
    }
}
