use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{xeb_gate, GateSet};
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::pulse::readout::{born_probabilities, measure, Axis, MeasurementConfig};
use crate::pulse::rng::{derive_seed, rng};
use crate::quantum::linalg::CMatrix;
use crate::quantum::{DensityMatrix, HilbertSpec};

/// Hilbert-space dimension of the two-qubit register.
pub const XEB_DIMENSION: f64 = 4.0;

/// Random single-qubit layers; with `interleaved` a CNOT follows each layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XebCircuit {
    /// Per layer, the gate index k of θ = kπ/4 on control and target.
    pub layers: Vec<[u8; 2]>,
    pub interleaved: bool,
    pub seed: u64,
}

impl XebCircuit {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

pub fn sample_xeb_circuit(depth: usize, interleaved: bool, seed: u64) -> Result<XebCircuit> {
    if depth == 0 {
        return Err(Error::input("XEB circuit depth must be at least 1"));
    }
    let mut r = rng(seed);
    let layers = (0..depth).map(|_| [r.random_range(0..8u8), r.random_range(0..8u8)]).collect();
    Ok(XebCircuit {
        layers,
        interleaved,
        seed,
    })
}

/// Output state of `circuit` from `initial`.
pub fn run_circuit(gates: &GateSet, circuit: &XebCircuit, initial: &DensityMatrix) -> Result<DensityMatrix> {
    let table: Vec<CMatrix> = (0..8).map(xeb_gate).collect();
    let mut rho = initial.clone();
    for [a, b] in &circuit.layers {
        rho = gates.apply_layer(&rho, [&table[*a as usize], &table[*b as usize]])?;
        if circuit.interleaved {
            rho = gates.apply_cnot(&rho)?;
        }
    }
    Ok(rho)
}

/// Linear cross-entropy `D Σ_x p_ideal(x) q(x) − 1` of an observed distribution `q`.
pub fn linear_xeb(ideal: &[f64; 4], observed: &[f64; 4]) -> f64 {
    XEB_DIMENSION * ideal.iter().zip(observed).map(|(p, q)| p * q).sum::<f64>() - 1.0
}

/// Linear cross-entropy from measured counts: `D ⟨p_ideal(x)⟩ − 1` over the shots.
pub fn xeb_fidelity(ideal: &[f64; 4], counts: &[u64; 4]) -> Result<f64> {
    let shots: u64 = counts.iter().sum();
    if shots == 0 {
        return Err(Error::input("XEB fidelity needs at least one shot"));
    }
    let q = counts.map(|n| n as f64 / shots as f64);
    Ok(linear_xeb(ideal, &q))
}

/// Per-circuit values at one depth. `measured` is the linear cross-entropy of the data,
/// `ideal` that of the ideal distribution with itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebDepth {
    pub depth: usize,
    pub measured: Vec<f64>,
    pub ideal: Vec<f64>,
}

impl XebDepth {
    /// Pooled fidelity `Σ measured / Σ ideal`: exactly `λᵐ` under depolarizing noise.
    pub fn fidelity(&self) -> Result<f64> {
        pooled(&self.measured, &self.ideal, self.depth)
    }
}

fn pooled(measured: &[f64], ideal: &[f64], depth: usize) -> Result<f64> {
    let den: f64 = ideal.iter().sum();
    if measured.is_empty() || den <= 1e-9 * ideal.len() as f64 {
        return Err(Error::input(format!(
            "depth {depth}: ideal outputs are uniform, XEB carries no information"
        )));
    }
    Ok(measured.iter().sum::<f64>() / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub p: f64,
    pub p_stderr: f64,
    /// Covariance of (amplitude, p).
    pub covariance: [[f64; 2]; 2],
}

/// Least-squares `F(m) = A pᵐ`, seeded by a log-linear fit of the positive points.
pub fn fit_decay(depths: &[usize], fidelities: &[f64]) -> Result<DecayFit> {
    if depths.len() != fidelities.len() || depths.len() < 3 {
        return Err(Error::input("decay fit needs at least three depths with one fidelity each"));
    }
    if fidelities.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite);
    }
    let pts: Vec<(f64, f64)> = depths
        .iter()
        .zip(fidelities)
        .filter(|(_, f)| **f > 0.0)
        .map(|(m, f)| (*m as f64, f.ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::Fit("all XEB fidelities are non-positive".into()));
    }
    let (a0, p0) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = if sxx > 0.0 {
            pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
        } else {
            0.0
        };
        ((my - slope * mx).exp(), slope.exp())
    } else {
        (pts[0].1.exp(), 1.0)
    };
    let m: Vec<f64> = depths.iter().map(|&d| d as f64).collect();
    let model = |q: &[f64]| -> Vec<f64> {
        m.iter()
            .zip(fidelities)
            .map(|(m, f)| q[0] * q[1].powf(*m) - f)
            .collect()
    };
    let fit = levenberg_marquardt(&model, &[a0, p0], &[1.0, 1.0], &LmOptions::default())?;
    let cov = fit
        .covariance
        .as_ref()
        .map_or([[0.0; 2]; 2], |c| [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]]);
    Ok(DecayFit {
        amplitude: fit.params[0],
        p: fit.params[1],
        p_stderr: cov[1][1].max(0.0).sqrt(),
        covariance: cov,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebConfig {
    pub depths: Vec<usize>,
    pub circuits: usize,
    pub measurement: MeasurementConfig,
    pub seed: u64,
}

impl Default for XebConfig {
    fn default() -> Self {
        Self {
            depths: vec![2, 3, 5, 7, 10, 15, 20, 30],
            circuits: 20,
            measurement: MeasurementConfig::shots(2000),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XebResult {
    pub interleaved: bool,
    pub depths: Vec<XebDepth>,
    /// Pooled fidelity per depth.
    pub fidelities: Vec<f64>,
    pub fit: DecayFit,
}

pub fn run_xeb(gates: &GateSet, interleaved: bool, cfg: &XebConfig) -> Result<XebResult> {
    if cfg.circuits == 0 || cfg.depths.is_empty() {
        return Err(Error::input("XEB needs at least one circuit and one depth"));
    }
    let initial = cfg.measurement.prepared_ground();
    let ideal_start = DensityMatrix::basis(&HilbertSpec::qubits(2), &[0, 0]);
    let ideal_gates = GateSet::ideal();
    let jobs: Vec<(usize, usize)> = (0..cfg.depths.len())
        .flat_map(|d| (0..cfg.circuits).map(move |c| (d, c)))
        .collect();
    let values: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(d, c)| {
            let seed = derive_seed(cfg.seed, &[interleaved as u64, cfg.depths[d] as u64, c as u64]);
            let circuit = sample_xeb_circuit(cfg.depths[d], interleaved, seed)?;
            let p = born_probabilities(&run_circuit(&ideal_gates, &circuit, &ideal_start)?, [Axis::Z; 2])?;
            let out = run_circuit(gates, &circuit, &initial)?;
            let q = measure(&out, [Axis::Z; 2], &cfg.measurement, derive_seed(seed, &[1]))?.estimate;
            Ok((linear_xeb(&p, &q), linear_xeb(&p, &p)))
        })
        .collect::<Result<_>>()?;
    let depths: Vec<XebDepth> = cfg
        .depths
        .iter()
        .enumerate()
        .map(|(d, &depth)| {
            let chunk = &values[d * cfg.circuits..(d + 1) * cfg.circuits];
            XebDepth {
                depth,
                measured: chunk.iter().map(|v| v.0).collect(),
                ideal: chunk.iter().map(|v| v.1).collect(),
            }
        })
        .collect();
    let fidelities = depths.iter().map(XebDepth::fidelity).collect::<Result<Vec<_>>>()?;
    let fit = fit_decay(&cfg.depths, &fidelities)?;
    Ok(XebResult {
        interleaved,
        depths,
        fidelities,
        fit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnotXeb {
    pub fidelity: f64,
    pub ratio: f64,
    /// False unless `0 < p_int ≤ p_ref ≤ 1`.
    pub physical: bool,
}

/// `F = 1 − (D − 1)(1 − p_int/p_ref)/D` with D = 4.
pub fn cnot_fidelity_from_xeb(p_ref: f64, p_int: f64) -> Result<CnotXeb> {
    if p_ref == 0.0 || !p_ref.is_finite() || !p_int.is_finite() {
        return Err(Error::input(format!("invalid decay rates p_ref = {p_ref}, p_int = {p_int}")));
    }
    let ratio = p_int / p_ref;
    let d = XEB_DIMENSION;
    Ok(CnotXeb {
        fidelity: 1.0 - (d - 1.0) * (1.0 - ratio) / d,
        ratio,
        physical: 0.0 < p_int && p_int <= p_ref && p_ref <= 1.0,
    })
}

fn table_fidelity(depths: &[XebDepth], pick: &dyn Fn(usize, usize) -> usize) -> Result<f64> {
    let mut fids = Vec::with_capacity(depths.len());
    for (d, x) in depths.iter().enumerate() {
        let n = x.measured.len();
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let i = pick(d, k);
            num += x.measured[i];
            den += x.ideal[i];
        }
        fids.push(pooled(&[num], &[den], x.depth)?);
    }
    let m: Vec<usize> = depths.iter().map(|x| x.depth).collect();
    Ok(fit_decay(&m, &fids)?.p)
}

/// Standard deviation of F_CNOT over `resamples` bootstrap draws: circuits are resampled
/// with replacement within each depth of both tables and both decays refitted.
pub fn bootstrap_stderr(reference: &[XebDepth], interleaved: &[XebDepth], resamples: usize, seed: u64) -> Result<f64> {
    if reference.is_empty() || interleaved.is_empty() {
        return Err(Error::input("bootstrap needs non-empty reference and interleaved tables"));
    }
    if reference.iter().chain(interleaved).any(|d| d.measured.is_empty() || d.measured.len() != d.ideal.len()) {
        return Err(Error::input("every depth needs matching, non-empty per-circuit values"));
    }
    if resamples < 100 {
        return Err(Error::input("bootstrap needs at least 100 resamples"));
    }
    let draws: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut g = rng(derive_seed(seed, &[r as u64]));
            let mut draw = |table: &[XebDepth]| -> Vec<Vec<usize>> {
                table
                    .iter()
                    .map(|x| (0..x.measured.len()).map(|_| g.random_range(0..x.measured.len())).collect())
                    .collect()
            };
            let (ir, ii) = (draw(reference), draw(interleaved));
            let p_ref = table_fidelity(reference, &|d, k| ir[d][k])?;
            let p_int = table_fidelity(interleaved, &|d, k| ii[d][k])?;
            Ok(cnot_fidelity_from_xeb(p_ref, p_int)?.fidelity)
        })
        .collect::<Result<_>>()?;
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    Ok((draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterleavedXeb {
    pub reference: XebResult,
    pub interleaved: XebResult,
    pub cnot: CnotXeb,
    pub stderr: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Reference and interleaved runs, F_CNOT and its bootstrap error.
pub fn interleaved_xeb(gates: &GateSet, cfg: &XebConfig, resamples: usize) -> Result<InterleavedXeb> {
    let reference = run_xeb(gates, false, cfg)?;
    let interleaved = run_xeb(gates, true, cfg)?;
    let cnot = cnot_fidelity_from_xeb(reference.fit.p, interleaved.fit.p)?;
    let stderr = bootstrap_stderr(&reference.depths, &interleaved.depths, resamples, derive_seed(cfg.seed, &[2]))?;
    Ok(InterleavedXeb {
        reference,
        interleaved,
        cnot,
        stderr,
        resamples,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_and_peaked_estimates() {
        let p = [0.4, 0.3, 0.2, 0.1];
        assert!(linear_xeb(&p, &[0.25; 4]).abs() < 1e-15);
        assert!((xeb_fidelity(&p, &[10, 0, 0, 0]).unwrap() - (4.0 * 0.4 - 1.0)).abs() < 1e-15);
        assert!(xeb_fidelity(&p, &[0; 4]).is_err());
    }

    #[test]
    fn pooled_rejects_uniform_ideal() {
        let d = XebDepth {
            depth: 1,
            measured: vec![0.0, 0.0],
            ideal: vec![0.0, 0.0],
        };
        assert!(d.fidelity().is_err());
    }
}
