use crate::error::{invalid, Error, Result};
use crate::math::vector::{check_dims, dot, norm};
use crate::math::{RngHandle, Vector};

/// Dense Gaussian embedding `R^d -> R^k` with i.i.d. `N(0, 1/k)` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct JlMatrix {
    rows: usize,
    cols: usize,
    /// Row-major `rows x cols`.
    entries: Vec<f64>,
}

impl JlMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Mean over columns of the squared column norm; 1 in expectation.
    pub fn mean_sq_column_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>() / self.cols as f64
    }

    /// `Φ x` written into `out` (length `rows`).
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    /// `Φᵀ w` written into `out` (length `cols`), accumulated row by row.
    pub(crate) fn lift_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, wi) in w.iter().enumerate() {
            crate::math::axpy(*wi, self.row(i), out);
        }
    }
}

/// Smallest `k` with the `(alpha, beta)` dot-product preservation property
/// under the constant-8 Gaussian bound: `ceil(8 ln(2/beta) / alpha^2)`.
pub fn jl_required_dim(alpha: f64, beta: f64) -> Result<usize> {
    if !(alpha > 0.0) {
        return Err(invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must be in (0,1), got {beta}")));
    }
    Ok((8.0 * (2.0 / beta).ln() / (alpha * alpha)).ceil() as usize)
}

pub fn jl_sample(rng: &mut RngHandle, k: usize, d: usize) -> Result<JlMatrix> {
    if k == 0 || d == 0 {
        return Err(invalid(
            "k, d",
            format!("dimensions must be positive, got k={k}, d={d}"),
        ));
    }
    let sd = (1.0 / k as f64).sqrt();
    let entries: Vec<f64> = (0..k * d).map(|_| sd * rng.standard_normal()).collect();
    let m = JlMatrix {
        rows: k,
        cols: d,
        entries,
    };
    // Generation-time calibration: k * d squared entries with mean 1/k each;
    // the statistic has standard deviation sqrt(2/(k d)).
    debug_assert!(
        (m.mean_sq_column_norm() - 1.0).abs() <= 10.0 * (2.0 / (k * d) as f64).sqrt() + 1e-12,
        "JL calibration off: {}",
        m.mean_sq_column_norm()
    );
    Ok(m)
}

pub fn jl_apply(m: &JlMatrix, x: &Vector) -> Result<Vector> {
    check_dims(m.cols, x.dim())?;
    let mut out = vec![0.0; m.rows];
    m.apply_into(x.as_slice(), &mut out);
    Vector::new(out)
}

pub fn jl_lift(m: &JlMatrix, w: &Vector) -> Result<Vector> {
    check_dims(m.rows, w.dim())?;
    let mut out = vec![0.0; m.cols];
    m.lift_into(w.as_slice(), &mut out);
    Vector::new(out)
}

/// Empirical frequency of `|<Φu,Φv> - <u,v>| > alpha` over `trials` fresh
/// draws of Φ and of a random unit pair `(u, v)` in `R^d`.
pub fn empirical_jl_failure_rate(
    rng: &mut RngHandle,
    k: usize,
    d: usize,
    alpha: f64,
    trials: usize,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Empty("trials"));
    }
    let mut failures = 0usize;
    let mut pu = vec![0.0; k];
    let mut pv = vec![0.0; k];
    for _ in 0..trials {
        let u = random_unit(rng, d);
        let v = random_unit(rng, d);
        let m = jl_sample(rng, k, d)?;
        m.apply_into(&u, &mut pu);
        m.apply_into(&v, &mut pv);
        if (dot(&pu, &pv) - dot(&u, &v)).abs() > alpha {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

pub(crate) fn random_unit(rng: &mut RngHandle, d: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let n = norm(&v);
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
            return v;
        }
    }
}
