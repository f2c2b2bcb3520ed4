use super::hamiltonian::SystemOperators;
use super::model::{DeviceModel, DriveSettings};
use crate::error::Result;
use crate::quantum::linalg::{hermitize, re, CMatrix, C64};
use crate::quantum::operator::Operator;
use crate::quantum::space::HilbertSpec;

/// A Hamiltonian written as a finite Fourier series `H(t) = Σ_j C_j e^{i ν_j t}`.
#[derive(Debug, Clone)]
pub struct FrameGenerator {
    pub space: HilbertSpec,
    pub components: Vec<(f64, CMatrix)>,
}

impl FrameGenerator {
    pub fn at(&self, t: f64) -> Operator {
        let d = self.space.total();
        let mut h = CMatrix::zeros(d, d);
        for (nu, m) in &self.components {
            h += m * C64::from_polar(1.0, nu * t);
        }
        Operator::new(hermitize(&h), self.space.clone()).expect("generator shape")
    }

    /// Components with `|ν| < tol`, summed.
    pub fn static_part(&self, tol: f64) -> CMatrix {
        let d = self.space.total();
        let mut h = CMatrix::zeros(d, d);
        for (nu, m) in &self.components {
            if nu.abs() < tol {
                h += m;
            }
        }
        hermitize(&h)
    }

    /// Trapezoid average of `H(t)` over `[0, window]` with `points` intervals.
    pub fn time_average(&self, window: f64, points: usize) -> CMatrix {
        let d = self.space.total();
        let n = points.max(2);
        let step = window / n as f64;
        let mut acc = CMatrix::zeros(d, d);
        for k in 0..=n {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += self.at(k as f64 * step).into_matrix() * re(w);
        }
        acc * re(1.0 / n as f64)
    }

    fn push(&mut self, nu: f64, m: CMatrix) {
        if m.iter().all(|z| z.norm() == 0.0) {
            return;
        }
        if let Some(slot) = self.components.iter_mut().find(|(f, _)| (f - nu).abs() < 1e-12) {
            slot.1 += m;
        } else {
            self.components.push((nu, m));
        }
    }
}

/// Split `op` into pieces that change the total excitation number by k.
fn excitation_components(op: &CMatrix, number: &[i64]) -> Vec<(i64, CMatrix)> {
    let n = op.nrows();
    let mut out: Vec<(i64, CMatrix)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = op[(i, j)];
            if v.norm() == 0.0 {
                continue;
            }
            let k = number[i] - number[j];
            match out.iter_mut().find(|(kk, _)| *kk == k) {
                Some((_, m)) => m[(i, j)] = v,
                None => {
                    let mut m = CMatrix::zeros(n, n);
                    m[(i, j)] = v;
                    out.push((k, m));
                }
            }
        }
    }
    out
}

/// Lab Hamiltonian transformed by `U = exp(i ω_f t N)`, where N counts excitations in
/// every transmon and cable mode: `U H U† + i (dU/dt) U†`. On the qubits this is the
/// usual `exp[-i ω_f t (Z_c + Z_t)/2]` up to a global phase. With `rwa`, components
/// oscillating at `|ν| ≥ |ω_c − ω_t|` are dropped.
pub fn rotating_frame(model: &DeviceModel, drive: &DriveSettings, frame: f64, rwa: bool) -> Result<FrameGenerator> {
    model.validate()?;
    let ops = SystemOperators::new(model)?;
    let total = ops.total_number();
    let number: Vec<i64> = (0..ops.dim()).map(|i| total[(i, i)].re.round() as i64).collect();
    let x = |b: &CMatrix| b + b.adjoint();
    let nq = |b: &CMatrix, w: f64, eta: f64| {
        let n = b.adjoint() * b;
        let n2 = &n * &n - &n;
        &n * re(w) + n2 * re(eta / 2.0)
    };

    let mut static_lab = nq(&ops.b_control, model.control.frequency, model.control.anharmonicity)
        + nq(&ops.b_target, model.target.frequency, model.target.anharmonicity);
    let mut driven: Vec<(f64, f64, CMatrix)> = vec![
        (drive.control_amplitude, drive.control_phase, x(&ops.b_control)),
        (drive.target_amplitude, drive.target_phase, x(&ops.b_target)),
    ];
    for (mode, a) in model.modes.iter().zip(&ops.modes) {
        let xa = x(a);
        static_lab += a.adjoint() * a * re(mode.frequency);
        static_lab += &xa * x(&ops.b_control) * re(mode.g_control);
        static_lab += &xa * x(&ops.b_target) * re(mode.parity() * mode.g_target);
        driven.push((drive.control_amplitude * mode.alpha_control, drive.control_phase, xa.clone()));
        driven.push((drive.target_amplitude * mode.alpha_target, drive.target_phase, xa));
    }

    let mut gen = FrameGenerator {
        space: ops.space.clone(),
        components: Vec::new(),
    };
    for (k, m) in excitation_components(&static_lab, &number) {
        gen.push(k as f64 * frame, m);
    }
    gen.push(0.0, &total * re(-frame));
    let w = drive.frequency;
    for (amp, phase, op) in driven {
        if amp == 0.0 {
            continue;
        }
        for (k, m) in excitation_components(&op, &number) {
            let kf = k as f64 * frame;
            gen.push(kf + w, &m * (C64::from_polar(amp / 2.0, phase)));
            gen.push(kf - w, &m * (C64::from_polar(amp / 2.0, -phase)));
        }
    }
    if rwa {
        let cutoff = (model.control.frequency - model.target.frequency).abs();
        gen.components.retain(|(nu, _)| nu.abs() < cutoff);
    }
    Ok(gen)
}

/// The rotating-wave Hamiltonian for constant drives in the frame of the carrier.
pub fn rwa_hamiltonian(model: &DeviceModel, drive: &DriveSettings) -> Result<CMatrix> {
    let gen = rotating_frame(model, drive, drive.frequency, true)?;
    Ok(gen.static_part(1e-9))
}
