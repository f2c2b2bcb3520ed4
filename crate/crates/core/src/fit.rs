//! Damped least squares shared by the tomography, calibration and benchmarking fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop once the cost itself drops below this.
    pub absolute_cost: f64,
    /// Finite-difference step relative to `max(|p|, scale)`.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            cost_tolerance: 1e-10,
            absolute_cost: 1e-28,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub residual_count: usize,
    /// `s² (JᵀJ)⁻¹` with `s² = cost / (n - p)`; absent when JᵀJ is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub converged: bool,
    pub iterations: usize,
}

impl LmFit {
    pub fn stderr(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..self.params.len()).map(|k| c[(k, k)].max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; self.params.len()],
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian. `scale` sets the step floor per parameter.
pub fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], scale: &[f64], step: f64) -> DMatrix<f64> {
    let n = f(p).len();
    let mut jac = DMatrix::zeros(n, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = step * p[k].abs().max(scale[k]);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let down = f(&q);
        q[k] = p[k];
        for i in 0..n {
            jac[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    jac
}

/// Minimize `Σ r_i(p)²` from `p0`. `scale` gives each parameter's typical size and
/// sets the finite-difference step floor.
pub fn levenberg_marquardt(
    f: &dyn Fn(&[f64]) -> Vec<f64>,
    p0: &[f64],
    scale: &[f64],
    opts: &LmOptions,
) -> Result<LmFit> {
    if p0.len() != scale.len() {
        return Err(Error::input("parameter and scale lengths differ"));
    }
    let mut p = p0.to_vec();
    let mut r = f(&p);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Fit("residuals are not finite at the starting point".into()));
    }
    let n = r.len();
    let m = p.len();
    if n < m {
        return Err(Error::Fit(format!("{n} residuals cannot determine {m} parameters")));
    }
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        if cost <= opts.absolute_cost {
            converged = true;
            break;
        }
        let jac = jacobian(f, &p, scale, opts.fd_step);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..m {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(x, d)| x + d).collect();
            let rt = f(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct < cost {
                let small_step = delta
                    .iter()
                    .zip(&p)
                    .zip(scale)
                    .all(|((d, x), s)| d.abs() <= 1e-14 * x.abs().max(*s));
                let rel = (cost - ct) / cost;
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if rel < opts.cost_tolerance || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no downhill step at any damping: a (numerical) minimum
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    let jac = jacobian(f, &p, scale, opts.fd_step);
    let dof = n.saturating_sub(m).max(1) as f64;
    let covariance = (jac.transpose() * &jac).try_inverse().map(|inv| inv * (cost / dof));
    Ok(LmFit {
        params: p,
        cost,
        residual_count: n,
        covariance,
        converged,
        iterations,
    })
}
