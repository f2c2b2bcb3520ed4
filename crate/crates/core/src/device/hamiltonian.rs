use super::model::{DeviceModel, DriveSettings, Qubit};
use crate::error::{Error, Result};
use crate::quantum::linalg::{re, CMatrix};
use crate::quantum::operator::{destroy, Operator};
use crate::quantum::space::HilbertSpec;

/// Ladder operators of every subsystem embedded in the full space.
#[derive(Debug, Clone)]
pub struct SystemOperators {
    pub space: HilbertSpec,
    pub b_control: CMatrix,
    pub b_target: CMatrix,
    pub modes: Vec<CMatrix>,
}

impl SystemOperators {
    pub fn new(model: &DeviceModel) -> Result<Self> {
        let space = model.space()?;
        let lift = |k: usize| -> Result<CMatrix> {
            Ok(Operator::embed(&destroy(space.dims()[k]), k, &space)?.into_matrix())
        };
        Ok(Self {
            b_control: lift(0)?,
            b_target: lift(1)?,
            modes: (0..model.modes.len()).map(|k| lift(k + 2)).collect::<Result<_>>()?,
            space,
        })
    }

    pub fn b(&self, q: Qubit) -> &CMatrix {
        match q {
            Qubit::Control => &self.b_control,
            Qubit::Target => &self.b_target,
        }
    }

    pub fn number(&self, q: Qubit) -> CMatrix {
        let b = self.b(q);
        b.adjoint() * b
    }

    /// Total excitation number, the generator of the common rotating frame.
    pub fn total_number(&self) -> CMatrix {
        let mut n = self.number(Qubit::Control) + self.number(Qubit::Target);
        for a in &self.modes {
            n += a.adjoint() * a;
        }
        n
    }

    pub fn dim(&self) -> usize {
        self.space.total()
    }
}

fn transmon_energy(b: &CMatrix, freq: f64, anharm: f64) -> CMatrix {
    let n = b.adjoint() * b;
    let n2 = &n * &n - &n;
    &n * re(freq) + n2 * re(anharm / 2.0)
}

/// Lab-frame Hamiltonian at time `t` for constant drive amplitudes.
///
/// Transmons are `ω n + (η/2) n(n-1)`; on the qubit subspace this is `-(ω/2) Z` plus
/// a constant, so the `ω` here is the 0-1 transition frequency.
pub fn build_system_hamiltonian(model: &DeviceModel, drive: &DriveSettings, t: f64) -> Result<Operator> {
    if !(t >= 0.0) {
        return Err(Error::input(format!("time must be non-negative, got {t}")));
    }
    model.validate()?;
    let ops = SystemOperators::new(model)?;
    let x = |b: &CMatrix| b + b.adjoint();
    let mut h = transmon_energy(&ops.b_control, model.control.frequency, model.control.anharmonicity)
        + transmon_energy(&ops.b_target, model.target.frequency, model.target.anharmonicity);
    let drive_c = drive.control_amplitude * (drive.frequency * t + drive.control_phase).cos();
    let drive_t = drive.target_amplitude * (drive.frequency * t + drive.target_phase).cos();
    h += x(&ops.b_control) * re(drive_c) + x(&ops.b_target) * re(drive_t);
    for (mode, a) in model.modes.iter().zip(&ops.modes) {
        let xa = x(a);
        h += a.adjoint() * a * re(mode.frequency);
        h += &xa * x(&ops.b_control) * re(mode.g_control);
        h += &xa * x(&ops.b_target) * re(mode.parity() * mode.g_target);
        h += &xa * re(mode.alpha_control * drive_c + mode.alpha_target * drive_t);
    }
    Operator::new(h, ops.space)
}

/// Time-independent part of the rotating-wave Hamiltonian in a frame rotating at
/// `frame` (rad/ns) on every subsystem.
pub fn static_rwa_hamiltonian(model: &DeviceModel, ops: &SystemOperators, frame: f64) -> CMatrix {
    let mut h = transmon_energy(&ops.b_control, model.control.frequency - frame, model.control.anharmonicity)
        + transmon_energy(&ops.b_target, model.target.frequency - frame, model.target.anharmonicity);
    for (mode, a) in model.modes.iter().zip(&ops.modes) {
        let ad = a.adjoint();
        h += &ad * a * re(mode.frequency - frame);
        h += (&ad * &ops.b_control + a * ops.b_control.adjoint()) * re(mode.g_control);
        h += (&ad * &ops.b_target + a * ops.b_target.adjoint()) * re(mode.parity() * mode.g_target);
    }
    h
}

/// `D_q = b_q + Σ_n α_{n,q} a_n`: the operator a drive on qubit `q` couples to,
/// including leakage onto the cable. A complex drive amplitude `ε` enters as `ε D† + ε* D`.
pub fn drive_operator(model: &DeviceModel, ops: &SystemOperators, q: Qubit) -> CMatrix {
    let mut d = ops.b(q).clone();
    for (mode, a) in model.modes.iter().zip(&ops.modes) {
        let alpha = match q {
            Qubit::Control => mode.alpha_control,
            Qubit::Target => mode.alpha_target,
        };
        if alpha != 0.0 {
            d += a * re(alpha);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::max_asymmetry;

    #[test]
    fn lab_hamiltonian_is_hermitian() {
        let model = DeviceModel::default_device();
        let drive = DriveSettings {
            control_amplitude: 0.3,
            control_phase: 0.7,
            target_amplitude: 0.02,
            target_phase: 2.0,
            frequency: model.target.frequency,
            drag: 0.0,
        };
        for t in [0.0, 0.13, 7.9] {
            let h = build_system_hamiltonian(&model, &drive, t).unwrap();
            assert_eq!(max_asymmetry(h.matrix()), 0.0);
        }
    }
}
