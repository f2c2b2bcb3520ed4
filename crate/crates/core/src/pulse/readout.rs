use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{BufRead, Write};

use nalgebra::Matrix4;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::rng::rng;
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::quantum::linalg::{kron, re, CMatrix, C64};
use crate::quantum::{DensityMatrix, HilbertSpec};

/// Measurement axis for one qubit. Outcome 0 is the +1 eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    /// `cos β X + sin β Y`.
    Equatorial(f64),
}

impl Axis {
    pub fn label(&self) -> String {
        match self {
            Axis::X => "X".into(),
            Axis::Y => "Y".into(),
            Axis::Z => "Z".into(),
            Axis::Equatorial(b) => format!("eq({b})"),
        }
    }

    /// Rows are the bras of the +1 and -1 eigenvectors.
    fn rotation(&self) -> Result<CMatrix> {
        let beta = match *self {
            Axis::Z => return Ok(CMatrix::identity(2, 2)),
            Axis::X => 0.0,
            Axis::Y => std::f64::consts::FRAC_PI_2,
            Axis::Equatorial(b) if b.is_finite() => b,
            Axis::Equatorial(b) => return Err(Error::input(format!("invalid equatorial angle {b}"))),
        };
        let e = C64::from_polar(FRAC_1_SQRT_2, -beta);
        Ok(CMatrix::from_row_slice(2, 2, &[re(FRAC_1_SQRT_2), e, re(FRAC_1_SQRT_2), -e]))
    }
}

/// Shot budget per measurement setting. `Analytic` replaces sampling by exact expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shots {
    Analytic,
    Finite(u64),
}

/// Per-qubit confusion matrices and thermal preparation error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    /// `confusion[q][i][j]` = P(report j | true i), q = 0 control, 1 target.
    pub confusion: [[[f64; 2]; 2]; 2],
    pub thermal: [f64; 2],
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ReadoutModel {
    pub fn ideal() -> Self {
        Self {
            confusion: [[[1.0, 0.0], [0.0, 1.0]]; 2],
            thermal: [0.0; 2],
        }
    }

    /// Same symmetric flip probability on both qubits.
    pub fn symmetric(flip: f64) -> Self {
        Self {
            confusion: [[[1.0 - flip, flip], [flip, 1.0 - flip]]; 2],
            thermal: [0.0; 2],
        }
    }

    pub fn from_model(model: &DeviceModel) -> Self {
        Self {
            confusion: [model.control.readout, model.target.readout],
            thermal: [model.control.thermal_population, model.target.thermal_population],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        for (q, c) in self.confusion.iter().enumerate() {
            for (i, row) in c.iter().enumerate() {
                if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row[0] + row[1] - 1.0).abs() > 1e-9 {
                    errors.push(format!("qubit {q}: confusion row {i} is not a distribution"));
                }
            }
        }
        for (q, p) in self.thermal.iter().enumerate() {
            if !(0.0..=0.1).contains(p) {
                errors.push(format!("qubit {q}: thermal population must lie in [0, 0.1]"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// `(C_c ⊗ C_t)[i][j]` = P(report j | true i) over outcomes 00, 01, 10, 11.
    pub fn joint(&self) -> Matrix4<f64> {
        let [c, t] = &self.confusion;
        Matrix4::from_fn(|i, j| c[i / 2][j / 2] * t[i % 2][j % 2])
    }

    /// Push a true outcome distribution through the confusion matrices.
    pub fn apply(&self, p: &[f64; 4]) -> [f64; 4] {
        let m = self.joint();
        let mut out = [0.0; 4];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|i| p[i] * m[(i, j)]).sum();
        }
        out
    }

    /// Confusion matrices as an experiment would calibrate them, by preparing |0⟩ and
    /// π-pulsed |1⟩ from the thermal ground state. Correcting with these over-corrects.
    pub fn as_calibrated(&self) -> Self {
        let mut out = self.clone();
        for (q, c) in self.confusion.iter().enumerate() {
            let p = self.thermal[q];
            for i in 0..2 {
                for j in 0..2 {
                    out.confusion[q][i][j] = (1.0 - p) * c[i][j] + p * c[1 - i][j];
                }
            }
        }
        out
    }

    /// `ρ_c ⊗ ρ_t` with each qubit in |1⟩ with its thermal probability.
    pub fn prepared_ground(&self) -> DensityMatrix {
        let [pc, pt] = self.thermal;
        let diag = [(1.0 - pc) * (1.0 - pt), (1.0 - pc) * pt, pc * (1.0 - pt), pc * pt];
        let m = CMatrix::from_fn(4, 4, |i, j| if i == j { re(diag[i]) } else { re(0.0) });
        DensityMatrix::new(m, HilbertSpec::qubits(2)).expect("diagonal state")
    }
}

/// Born distribution over outcomes 00, 01, 10, 11 (control bit first).
pub fn born_probabilities(rho: &DensityMatrix, axes: [Axis; 2]) -> Result<[f64; 4]> {
    rho.space().ensure_same(&HilbertSpec::qubits(2))?;
    let r = kron(&axes[0].rotation()?, &axes[1].rotation()?);
    let m = &r * rho.matrix() * r.adjoint();
    let mut p = [0.0; 4];
    for (k, v) in p.iter_mut().enumerate() {
        *v = m[(k, k)].re.max(0.0);
    }
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

pub fn expected_frequencies(rho: &DensityMatrix, axes: [Axis; 2], readout: Option<&ReadoutModel>) -> Result<[f64; 4]> {
    let p = born_probabilities(rho, axes)?;
    Ok(match readout {
        Some(r) => r.apply(&p),
        None => p,
    })
}

/// Multinomial draw by sequential binomials.
pub fn sample_counts(p: &[f64; 4], shots: u64, rng: &mut impl rand::Rng) -> [u64; 4] {
    let mut counts = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let n = Binomial::new(left, q).expect("valid binomial").sample(rng);
        counts[k] = n;
        left -= n;
        mass -= p[k];
    }
    counts[3] = left;
    counts
}

/// Counts for one basis setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub axes: [Axis; 2],
    pub counts: [u64; 4],
    pub shots: u64,
    pub seed: u64,
}

impl ShotRecord {
    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.shots as f64;
        self.counts.map(|c| c as f64 / n)
    }
}

pub fn sample_measurement(
    rho: &DensityMatrix,
    axes: [Axis; 2],
    shots: u64,
    readout: Option<&ReadoutModel>,
    seed: u64,
) -> Result<ShotRecord> {
    if shots == 0 {
        return Err(Error::input("shots must be positive"));
    }
    let p = expected_frequencies(rho, axes, readout)?;
    let counts = sample_counts(&p, shots, &mut rng(seed));
    Ok(ShotRecord { axes, counts, shots, seed })
}

/// How a measurement setting is executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementConfig {
    pub shots: Shots,
    pub readout: Option<ReadoutModel>,
    /// Invert the confusion matrices (clipped) before estimating anything.
    pub correct: bool,
}

impl MeasurementConfig {
    pub fn analytic() -> Self {
        Self {
            shots: Shots::Analytic,
            readout: None,
            correct: false,
        }
    }

    pub fn shots(n: u64) -> Self {
        Self {
            shots: Shots::Finite(n),
            readout: None,
            correct: false,
        }
    }

    pub fn with_readout(mut self, readout: ReadoutModel, correct: bool) -> Self {
        self.readout = Some(readout);
        self.correct = correct;
        self
    }

    /// State the experiment starts from: ground, or thermal when a readout model is set.
    pub fn prepared_ground(&self) -> DensityMatrix {
        match &self.readout {
            Some(r) => r.prepared_ground(),
            None => DensityMatrix::basis(&HilbertSpec::qubits(2), &[0, 0]),
        }
    }
}

/// Observed and readout-corrected outcome distributions of one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub observed: [f64; 4],
    /// Clipped inverse when correction is on, otherwise the observed distribution.
    pub estimate: [f64; 4],
    /// Unclipped inverse when correction is on.
    pub unclipped: [f64; 4],
    pub record: Option<ShotRecord>,
}

pub fn measure(rho: &DensityMatrix, axes: [Axis; 2], cfg: &MeasurementConfig, seed: u64) -> Result<Measured> {
    let (observed, record) = match cfg.shots {
        Shots::Analytic => (expected_frequencies(rho, axes, cfg.readout.as_ref())?, None),
        Shots::Finite(n) => {
            let rec = sample_measurement(rho, axes, n, cfg.readout.as_ref(), seed)?;
            (rec.frequencies(), Some(rec))
        }
    };
    let (estimate, unclipped) = match (&cfg.readout, cfg.correct) {
        (Some(r), true) => {
            let c = correct_frequencies(&observed, r)?;
            (c.clipped, c.raw)
        }
        _ => (observed, observed),
    };
    Ok(Measured {
        observed,
        estimate,
        unclipped,
        record,
    })
}

/// `⟨A⊗B⟩`, `⟨A⊗I⟩`, `⟨I⊗B⟩` from an outcome distribution.
pub fn correlators(p: &[f64; 4]) -> [f64; 3] {
    [
        p[0] - p[1] - p[2] + p[3],
        p[0] + p[1] - p[2] - p[3],
        p[0] - p[1] + p[2] - p[3],
    ]
}

/// Readout-corrected distribution: `raw` is the plain inverse, `clipped` has negative
/// entries set to zero and is renormalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corrected {
    pub raw: [f64; 4],
    pub clipped: [f64; 4],
}

pub fn correct_frequencies(freq: &[f64; 4], readout: &ReadoutModel) -> Result<Corrected> {
    let m = readout.joint();
    // observed_j = Σ_i p_i M_ij, so p = (Mᵀ)⁻¹ observed
    if m.determinant().abs() < 1e-12 {
        return Err(Error::Singular("confusion matrix".into()));
    }
    let inv = m
        .transpose()
        .try_inverse()
        .ok_or_else(|| Error::Singular("confusion matrix".into()))?;
    let v = inv * nalgebra::Vector4::from_column_slice(freq);
    let raw = [v[0], v[1], v[2], v[3]];
    let mut clipped = raw.map(|x| x.max(0.0));
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(Error::input("corrected distribution vanished after clipping"));
    }
    for x in &mut clipped {
        *x /= total;
    }
    Ok(Corrected { raw, clipped })
}

pub fn apply_readout_correction(record: &ShotRecord, readout: &ReadoutModel) -> Result<Corrected> {
    correct_frequencies(&record.frequencies(), readout)
}

/// One JSON object per line.
pub fn write_records(mut w: impl Write, records: &[ShotRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records(r: impl BufRead) -> Result<Vec<ShotRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ShotRecord = serde_json::from_str(&line)?;
        if rec.counts.iter().sum::<u64>() != rec.shots {
            return Err(Error::input("record counts do not sum to its shot total"));
        }
        out.push(rec);
    }
    Ok(out)
}
