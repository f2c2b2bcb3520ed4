use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::pulse::readout::{correlators, measure, Axis, MeasurementConfig};
use crate::pulse::rng::derive_seed;
use crate::quantum::linalg::{c, eigh, from_spectrum, project_spectrum, re, vec_col, CMatrix, CVector};
use crate::quantum::pauli::pauli_basis;
use crate::quantum::{DensityMatrix, HilbertSpec, ProcessMatrix};

const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

/// All sixteen two-qubit Pauli expectations (`PAULI_LABELS` order) from the nine
/// settings {X, Y, Z}²; single-qubit terms average the three settings that contain them.
pub fn pauli_expectations(rho: &DensityMatrix, cfg: &MeasurementConfig, seed: u64) -> Result<[f64; 16]> {
    let mut sums = [0.0; 16];
    let mut counts = [0usize; 16];
    sums[0] = 1.0;
    counts[0] = 1;
    for (a, &ax) in AXES.iter().enumerate() {
        for (b, &bx) in AXES.iter().enumerate() {
            let k = (3 * a + b) as u64;
            let p = measure(rho, [ax, bx], cfg, derive_seed(seed, &[k]))?.estimate;
            let [ab, a_only, b_only] = correlators(&p);
            for (idx, v) in [(4 * (a + 1) + b + 1, ab), (4 * (a + 1), a_only), (b + 1, b_only)] {
                sums[idx] += v;
                counts[idx] += 1;
            }
        }
    }
    let mut out = [0.0; 16];
    for k in 0..16 {
        out[k] = sums[k] / counts[k] as f64;
    }
    Ok(out)
}

/// `ρ = Σ_P ⟨P⟩ P / 4`.
pub fn linear_inversion(expectations: &[f64; 16]) -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (p, e) in pauli_basis().iter().zip(expectations) {
        m += p * re(e / 4.0);
    }
    m
}

/// Nearest density matrix in Frobenius norm (shifted, clipped spectrum).
pub fn project_state(m: &CMatrix) -> Result<DensityMatrix> {
    let (values, vectors) = eigh(m);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    DensityMatrix::repaired(
        from_spectrum(&project_spectrum(&values), &vectors, re),
        HilbertSpec::qubits(m.nrows().trailing_zeros() as usize),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct StateTomography {
    #[serde(skip)]
    pub raw: CMatrix,
    #[serde(skip)]
    pub state: DensityMatrix,
    pub expectations: [f64; 16],
}

pub fn state_tomography(rho: &DensityMatrix, cfg: &MeasurementConfig, seed: u64) -> Result<StateTomography> {
    let expectations = pauli_expectations(rho, cfg, seed)?;
    let raw = linear_inversion(&expectations);
    let state = project_state(&raw)?;
    Ok(StateTomography {
        raw,
        state,
        expectations,
    })
}

/// The four single-qubit preparations {|0⟩, |1⟩, |+⟩, |+i⟩}.
pub fn tomography_inputs() -> [CVector; 4] {
    let h = FRAC_1_SQRT_2;
    [
        CVector::from_column_slice(&[re(1.0), re(0.0)]),
        CVector::from_column_slice(&[re(0.0), re(1.0)]),
        CVector::from_column_slice(&[re(h), re(h)]),
        CVector::from_column_slice(&[re(h), c(0.0, h)]),
    ]
}

/// Product input `k = 4 a + b`: control prepared in input `a`, target in input `b`.
pub fn product_input(k: usize) -> DensityMatrix {
    let ins = tomography_inputs();
    let ket = ins[k / 4].kronecker(&ins[k % 4]);
    DensityMatrix::from_pure(&ket, HilbertSpec::qubits(2)).expect("normalized product state")
}

#[derive(Debug, Clone)]
pub struct QptResult {
    /// Linear-inversion chi, possibly non-physical.
    pub raw: CMatrix,
    pub projected: ProcessMatrix,
    pub min_eigenvalue: f64,
    /// Raw chi had an eigenvalue below -0.1.
    pub suspicious: bool,
}

/// Two-qubit process tomography: 16 product inputs, all Pauli expectations of each
/// output, linear inversion of the Pauli transfer matrix, conversion to chi and
/// projection onto the physical cone.
pub fn quantum_process_tomography(
    executor: &(dyn Fn(&DensityMatrix) -> Result<DensityMatrix> + Sync),
    cfg: &MeasurementConfig,
    seed: u64,
) -> Result<QptResult> {
    let basis = pauli_basis();
    let outputs: Vec<[f64; 16]> = (0..16usize)
        .into_par_iter()
        .map(|k| {
            let out = executor(&product_input(k))?;
            pauli_expectations(&out, cfg, derive_seed(seed, &[k as u64]))
        })
        .collect::<Result<_>>()?;
    // a_kj = Tr(P_j ρ_k), e_ki = Σ_j R_ij a_kj
    let a = nalgebra::DMatrix::<f64>::from_fn(16, 16, |k, j| (&basis[j] * product_input(k).matrix()).trace().re);
    let e = nalgebra::DMatrix::<f64>::from_fn(16, 16, |k, i| outputs[k][i]);
    let rt = a
        .lu()
        .solve(&e)
        .ok_or_else(|| Error::Singular("tomography input set".into()))?;
    let vecs: Vec<CVector> = basis.iter().map(vec_col).collect();
    let mut s = CMatrix::zeros(16, 16);
    for i in 0..16 {
        for j in 0..16 {
            let r = rt[(j, i)];
            if r != 0.0 {
                s += &vecs[i] * vecs[j].adjoint() * re(r / 4.0);
            }
        }
    }
    let raw = ProcessMatrix::chi_from_superoperator(&s)?;
    let projection = ProcessMatrix::project_psd(&raw)?;
    Ok(QptResult {
        raw,
        projected: projection.chi,
        min_eigenvalue: projection.min_eigenvalue,
        suspicious: projection.suspicious,
    })
}

/// `{"real": [[..]], "imag": [[..]]}`, row-major.
pub fn chi_json(chi: &CMatrix) -> serde_json::Value {
    let rows = |f: fn(&crate::quantum::C64) -> f64| -> Vec<Vec<f64>> {
        (0..chi.nrows()).map(|i| (0..chi.ncols()).map(|j| f(&chi[(i, j)])).collect()).collect()
    };
    serde_json::json!({ "real": rows(|z| z.re), "imag": rows(|z| z.im) })
}
