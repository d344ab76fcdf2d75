use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::losses::GlmLoss;
use crate::math::{axpy, dot, norm, norm_sq, project_ball_in_place};

pub const MAX_ITERATIONS: usize = 100_000;

/// Default stopping tolerance `1e-8·(1 + Y²)`.
pub fn default_tolerance(loss: &dyn GlmLoss) -> f64 {
    1e-8 * (1.0 + loss.bound_at_zero())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErmSolution {
    pub w: Vec<f64>,
    pub iterations: usize,
    /// Projected-gradient residual for smooth losses, duality gap otherwise.
    pub residual: f64,
}

/// `(1/n) Σ φ_{y_i}(⟨w, x_i⟩) + (λ/2)‖w‖²`.
pub fn regularized_objective(loss: &dyn GlmLoss, ds: &Dataset, lambda: f64, w: &[f64]) -> f64 {
    ds.empirical_risk(loss, w) + 0.5 * lambda * norm_sq(w)
}

/// Minimises `L̂(w; S) + (λ/2)‖w‖²` over `‖w‖ ≤ b`.
///
/// Smooth losses use accelerated projected gradient with step
/// `1/(H‖X‖² + λ)` and adaptive restart, stopping once the projected-gradient
/// residual `‖w − Π(w − η∇)‖/η` at the returned point is at most `tol`.
/// Losses of the form `a|z − y|` are solved through their box-constrained
/// dual by coordinate ascent; the ball constraint is enforced by raising the
/// regularisation until the unconstrained minimiser lands on the sphere.
pub fn regularized_erm_solve(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    b: f64,
    lambda: f64,
    tol: f64,
) -> Result<ErmSolution> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(invalid(
            "lambda",
            format!("must be finite and >= 0, got {lambda}"),
        ));
    }
    if !(b >= 0.0) {
        return Err(invalid("b", format!("must be >= 0, got {b}")));
    }
    if lambda == 0.0 && b.is_infinite() {
        return Err(invalid("lambda, b", "need lambda > 0 or a finite radius"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be > 0, got {tol}")));
    }
    if ds.n() == 0 {
        return Err(Error::Empty("dataset"));
    }
    if let Some(h) = loss.smoothness() {
        solve_smooth(loss, ds, h, b, lambda, tol)
    } else if let Some(a) = loss.absolute_slope() {
        solve_absolute(ds, a, b, lambda, tol)
    } else {
        Err(Error::MissingRegularity {
            loss: loss.name(),
            needed: "smoothness or absolute-value form",
        })
    }
}

struct Objective<'a> {
    loss: &'a dyn GlmLoss,
    ds: &'a Dataset,
    lambda: f64,
    b: f64,
    eta: f64,
}

impl Objective<'_> {
    /// `Π_b(w − η∇f(w))` into `out`; returns the residual `‖w − out‖/η`.
    fn step(&self, w: &[f64], grad: &mut [f64], out: &mut [f64]) -> f64 {
        self.ds.gradient_into(self.loss, w, grad);
        axpy(self.lambda, w, grad);
        out.copy_from_slice(w);
        axpy(-self.eta, grad, out);
        project_ball_in_place(out, self.b);
        let mut diff = 0.0;
        for (a, c) in w.iter().zip(out.iter()) {
            diff += (a - c) * (a - c);
        }
        diff.sqrt() / self.eta
    }
}

fn solve_smooth(
    loss: &dyn GlmLoss,
    ds: &Dataset,
    h: f64,
    b: f64,
    lambda: f64,
    tol: f64,
) -> Result<ErmSolution> {
    let d = ds.d();
    let x2 = ds.x_bound() * ds.x_bound();
    let lip = h * x2 + lambda;
    if lip == 0.0 {
        // Constant objective.
        return Ok(ErmSolution {
            w: vec![0.0; d],
            iterations: 0,
            residual: 0.0,
        });
    }
    let obj = Objective {
        loss,
        ds,
        lambda,
        b,
        eta: 1.0 / lip,
    };
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut x_new = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut probe = vec![0.0; d];
    let mut tk = 1.0f64;
    let mut residual = f64::INFINITY;
    let mut it = 0;
    while it < MAX_ITERATIONS {
        it += 1;
        let r_y = obj.step(&y, &mut grad, &mut x_new);
        if !r_y.is_finite() {
            return Err(Error::NonFiniteGradient { step: it });
        }
        if r_y <= 0.5 * tol {
            residual = obj.step(&x_new, &mut grad, &mut probe);
            it += 1;
            if residual <= tol {
                return Ok(ErmSolution {
                    w: x_new,
                    iterations: it,
                    residual,
                });
            }
        }
        // Restart momentum when the step opposes it.
        let mut restart = 0.0;
        for j in 0..d {
            restart += (y[j] - x_new[j]) * (x_new[j] - x[j]);
        }
        let t_next = if restart > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt())
        };
        let mom = if restart > 0.0 {
            0.0
        } else {
            (tk - 1.0) / t_next
        };
        for j in 0..d {
            y[j] = x_new[j] + mom * (x_new[j] - x[j]);
        }
        tk = t_next;
        std::mem::swap(&mut x, &mut x_new);
    }
    Err(Error::NotConverged {
        iterations: it,
        residual,
        tol,
    })
}

/// Dual coordinate ascent for `(1/n) Σ a|⟨w, x_i⟩ − y_i| + (ρ/2)‖w‖²` with
/// `w(α) = −(1/(ρn)) Σ α_i x_i`, `α ∈ [−a, a]^n`. Warm-starts from `alpha`.
fn absolute_dual(
    ds: &Dataset,
    a: f64,
    rho: f64,
    tol: f64,
    alpha: &mut [f64],
) -> Result<(Vec<f64>, usize, f64)> {
    let n = ds.n();
    let nf = n as f64;
    let mut w = vec![0.0; ds.d()];
    for (i, ai) in alpha.iter().enumerate() {
        axpy(-ai / (rho * nf), ds.x(i), &mut w);
    }
    let sq: Vec<f64> = (0..n).map(|i| norm_sq(ds.x(i))).collect();
    let mut gap = f64::INFINITY;
    let mut epoch = 0;
    while epoch < MAX_ITERATIONS {
        epoch += 1;
        for i in 0..n {
            if sq[i] == 0.0 {
                // Only the −α_i y_i term depends on α_i.
                alpha[i] = if ds.y(i) > 0.0 {
                    -a
                } else if ds.y(i) < 0.0 {
                    a
                } else {
                    0.0
                };
                continue;
            }
            let x = ds.x(i);
            let delta = rho * nf * (dot(&w, x) - ds.y(i)) / sq[i];
            let next = (alpha[i] + delta).clamp(-a, a);
            let change = next - alpha[i];
            if change != 0.0 {
                axpy(-change / (rho * nf), x, &mut w);
                alpha[i] = next;
            }
        }
        // Recompute w from α to keep rounding drift out of the gap.
        w.iter_mut().for_each(|v| *v = 0.0);
        for (i, ai) in alpha.iter().enumerate() {
            axpy(-ai / (rho * nf), ds.x(i), &mut w);
        }
        let ww = norm_sq(&w);
        let mut primal = 0.0;
        let mut dual = 0.0;
        for (i, ai) in alpha.iter().enumerate() {
            primal += a * (dot(&w, ds.x(i)) - ds.y(i)).abs();
            dual -= ai * ds.y(i);
        }
        primal = primal / nf + 0.5 * rho * ww;
        dual = dual / nf - 0.5 * rho * ww;
        gap = primal - dual;
        if gap <= tol {
            return Ok((w, epoch, gap.max(0.0)));
        }
    }
    Err(Error::NotConverged {
        iterations: epoch,
        residual: gap,
        tol,
    })
}

fn solve_absolute(ds: &Dataset, a: f64, b: f64, lambda: f64, tol: f64) -> Result<ErmSolution> {
    if lambda <= 0.0 {
        return Err(invalid(
            "lambda",
            "the absolute-loss solver needs lambda > 0",
        ));
    }
    let mut alpha = vec![0.0; ds.n()];
    let (w, mut iterations, gap) = absolute_dual(ds, a, lambda, tol, &mut alpha)?;
    if norm(&w) <= b {
        return Ok(ErmSolution {
            w,
            iterations,
            residual: gap,
        });
    }
    // ‖w(ρ)‖ is non-increasing in ρ; bracket then bisect ρ = λ + μ.
    let (mut lo, mut hi) = (lambda, 2.0 * lambda);
    loop {
        let (w_hi, it, _) = absolute_dual(ds, a, hi, tol, &mut alpha)?;
        iterations += it;
        if norm(&w_hi) <= b {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut best = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (w_mid, it, g) = absolute_dual(ds, a, mid, tol, &mut alpha)?;
        iterations += it;
        if norm(&w_mid) > b {
            lo = mid;
        } else {
            hi = mid;
            best = Some((w_mid, g));
        }
        if (hi - lo) <= 1e-13 * hi {
            break;
        }
    }
    let (mut w, gap) = match best {
        Some(v) => v,
        None => {
            let (w_hi, it, g) = absolute_dual(ds, a, hi, tol, &mut alpha)?;
            iterations += it;
            (w_hi, g)
        }
    };
    project_ball_in_place(&mut w, b);
    Ok(ErmSolution {
        w,
        iterations,
        residual: gap,
    })
}
