use super::linalg::{check_finite, inf_norm, re, CMatrix, I};
use super::operator::Operator;
use super::state::DensityMatrix;
use crate::error::{Error, Result};

/// Step size that keeps `‖H‖·dt` at or below `max_phase` radians.
pub fn default_dt(h_norm: f64, max_phase: f64) -> f64 {
    if h_norm <= 0.0 {
        1.0
    } else {
        max_phase / h_norm
    }
}

fn steps(t_span: (f64, f64), dt: f64) -> Result<(usize, f64)> {
    let (t0, t1) = t_span;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::input(format!("time step must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(Error::input(format!("invalid time span {t0}..{t1}")));
    }
    let n = ((t1 - t0) / dt).ceil().max(0.0) as usize;
    let h = if n == 0 { 0.0 } else { (t1 - t0) / n as f64 };
    Ok((n, h))
}

fn hamiltonian_at(h: &dyn Fn(f64) -> Operator, t: f64, dim: usize) -> Result<CMatrix> {
    let op = h(t);
    if op.dim() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: op.dim(),
        });
    }
    Ok(op.into_matrix())
}

/// Propagator `U(t1, t0)` of `dU/dt = -i H(t) U` by classical RK4.
pub fn propagator(
    h: &dyn Fn(f64) -> Operator,
    t_span: (f64, f64),
    dt: f64,
    dim: usize,
) -> Result<CMatrix> {
    let (n, step) = steps(t_span, dt)?;
    let mut u = CMatrix::identity(dim, dim);
    let mut t = t_span.0;
    let mi = -I;
    for _ in 0..n {
        let h0 = hamiltonian_at(h, t, dim)?;
        let hm = hamiltonian_at(h, t + step / 2.0, dim)?;
        let h1 = hamiltonian_at(h, t + step, dim)?;
        let k1 = &h0 * &u * mi;
        let k2 = &hm * (&u + &k1 * re(step / 2.0)) * mi;
        let k3 = &hm * (&u + &k2 * re(step / 2.0)) * mi;
        let k4 = &h1 * (&u + &k3 * re(step)) * mi;
        u += (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(step / 6.0);
        t += step;
    }
    check_finite(&u)?;
    Ok(u)
}

fn lindblad_rhs(h: &CMatrix, rho: &CMatrix, ops: &[(CMatrix, CMatrix, CMatrix)]) -> CMatrix {
    let mut out = (h * rho - rho * h) * (-I);
    for (l, l_dag, ldl) in ops {
        out += l * rho * l_dag - (ldl * rho + rho * ldl) * re(0.5);
    }
    out
}

/// Raw RK4 integration of the Lindblad equation without any post-processing.
pub fn evolve_matrix(
    h: &dyn Fn(f64) -> Operator,
    t_span: (f64, f64),
    dt: f64,
    initial: &CMatrix,
    collapse_ops: &[Operator],
) -> Result<CMatrix> {
    let dim = initial.nrows();
    if collapse_ops.iter().any(|l| l.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: collapse_ops.iter().map(|l| l.dim()).find(|&d| d != dim).unwrap_or(0),
        });
    }
    if collapse_ops.is_empty() {
        let u = propagator(h, t_span, dt, dim)?;
        return Ok(&u * initial * u.adjoint());
    }
    let ops: Vec<(CMatrix, CMatrix, CMatrix)> = collapse_ops
        .iter()
        .map(|l| {
            let m = l.matrix().clone();
            let d = m.adjoint();
            let dl = &d * &m;
            (m, d, dl)
        })
        .collect();
    let (n, step) = steps(t_span, dt)?;
    let mut rho = initial.clone();
    let mut t = t_span.0;
    for _ in 0..n {
        let h0 = hamiltonian_at(h, t, dim)?;
        let hm = hamiltonian_at(h, t + step / 2.0, dim)?;
        let h1 = hamiltonian_at(h, t + step, dim)?;
        let k1 = lindblad_rhs(&h0, &rho, &ops);
        let k2 = lindblad_rhs(&hm, &(&rho + &k1 * re(step / 2.0)), &ops);
        let k3 = lindblad_rhs(&hm, &(&rho + &k2 * re(step / 2.0)), &ops);
        let k4 = lindblad_rhs(&h1, &(&rho + &k3 * re(step)), &ops);
        rho += (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(step / 6.0);
        t += step;
    }
    check_finite(&rho)?;
    Ok(rho)
}

/// Propagate a density matrix under `dρ/dt = -i[H,ρ] + Σ D[L]ρ` with fixed-step RK4.
/// Without collapse operators the unitary is integrated and applied by conjugation.
pub fn evolve(
    h: &dyn Fn(f64) -> Operator,
    t_span: (f64, f64),
    dt: f64,
    initial: &DensityMatrix,
    collapse_ops: &[Operator],
) -> Result<DensityMatrix> {
    let rho = evolve_matrix(h, t_span, dt, initial.matrix(), collapse_ops)?;
    DensityMatrix::repaired(rho, initial.space().clone())
}

/// `max_t ‖H(t)‖_∞` sampled on a uniform grid, for choosing a step size.
pub fn max_norm(h: &dyn Fn(f64) -> Operator, t_span: (f64, f64), samples: usize) -> f64 {
    let n = samples.max(2);
    (0..n)
        .map(|k| {
            let t = t_span.0 + (t_span.1 - t_span.0) * k as f64 / (n - 1) as f64;
            inf_norm(h(t).matrix())
        })
        .fold(0.0, f64::max)
}
