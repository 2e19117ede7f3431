//! Small dense Levenberg–Marquardt least squares.
//!
//! Parameter counts here are at most five, so the normal equations are
//! formed and solved directly.

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative parameter step falls below this.
    pub xtol: f64,
    /// Stop when the relative cost decrease of an accepted step falls below this.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            xtol: 1e-12,
            ftol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `Σ r_i(x)²` where `residuals(x, r)` fills `r` (length `m`).
pub fn minimize<F>(residuals: F, m: usize, x0: &[f64], opts: &LmOptions) -> LmResult
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return LmResult {
            params: x,
            cost,
            iterations: 0,
            converged: false,
        };
    }
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * n];
    let mut r_trial = vec![0.0; m];
    let mut converged = false;
    let mut it = 0;

    while it < opts.max_iterations {
        it += 1;
        jacobian(&residuals, &x, &mut jac, m);
        // JᵀJ and Jᵀr
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for i in 0..m {
            let row = &jac[i * n..(i + 1) * n];
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in a..n {
                    jtj[a * n + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[a * n + b] = jtj[b * n + a];
            }
        }
        if jtr.iter().all(|g| g.abs() <= 1e-300) {
            converged = true;
            break;
        }

        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[k * n + k] += lambda * jtj[k * n + k].max(1e-12);
            }
            let Some(step) = solve(&mut a, &jtr.iter().map(|g| -g).collect::<Vec<_>>(), n) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(xi, s)| xi + s).collect();
            residuals(&trial, &mut r_trial);
            let c = sum_sq(&r_trial);
            if c.is_finite() && c <= cost {
                let small_step = step
                    .iter()
                    .zip(&x)
                    .all(|(s, xi)| s.abs() <= opts.xtol * (xi.abs() + opts.xtol));
                let small_gain = cost - c <= opts.ftol * cost;
                x = trial;
                std::mem::swap(&mut r, &mut r_trial);
                cost = c;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if small_step || small_gain || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // no downhill step left at any damping: a stationary point
            converged = true;
            break;
        }
    }
    LmResult {
        params: x,
        cost,
        iterations: it,
        converged,
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Central-difference Jacobian, row-major `m × n`.
fn jacobian<F: Fn(&[f64], &mut [f64])>(f: &F, x: &[f64], jac: &mut [f64], m: usize) {
    let n = x.len();
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for k in 0..n {
        let h = 1e-6 * x[k].abs().max(1e-3);
        xp[k] = x[k] + h;
        f(&xp, &mut rp);
        xp[k] = x[k] - h;
        f(&xp, &mut rm);
        xp[k] = x[k];
        for i in 0..m {
            jac[i * n + k] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
}

/// Gaussian elimination with partial pivoting. `None` for a singular system.
fn solve(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut b = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if !(a[piv * n + col].abs() > 1e-300) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_an_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * (-t / 1.7).exp() + 0.3).collect();
        let res = minimize(
            |p, r| {
                for (i, ti) in t.iter().enumerate() {
                    r[i] = p[0] * (-ti / p[1]).exp() + p[2] - y[i];
                }
            },
            t.len(),
            &[1.0, 1.0, 0.0],
            &LmOptions::default(),
        );
        assert!(res.converged);
        assert!((res.params[0] - 2.0).abs() < 1e-8);
        assert!((res.params[1] - 1.7).abs() < 1e-8);
        assert!((res.params[2] - 0.3).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let res = minimize(
            |p, r| {
                r[0] = 10.0 * (p[1] - p[0] * p[0]);
                r[1] = 1.0 - p[0];
            },
            2,
            &[-1.2, 1.0],
            &LmOptions::default(),
        );
        assert!((res.params[0] - 1.0).abs() < 1e-6 && (res.params[1] - 1.0).abs() < 1e-6, "{:?}", res.params);
    }

    #[test]
    fn singular_solve() {
        let mut a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(solve(&mut a, &[1.0, 2.0], 2).is_none());
    }
}
