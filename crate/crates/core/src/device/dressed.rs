use super::hamiltonian::{static_rwa_hamiltonian, SystemOperators};
use super::model::{DeviceModel, Qubit};
use crate::error::{Error, Result};
use crate::quantum::linalg::{eigh, CMatrix, C64};

/// Eigenbasis of the undriven device, each eigenvector labelled by the bare
/// product state it overlaps most. Column `b` of `vectors` is the dressed state
/// continuously connected to bare state `b`, phased so its `b` component is real positive.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub vectors: CMatrix,
    /// Energies in the non-rotating RWA frame (rad/ns), indexed by bare label.
    pub energies: Vec<f64>,
    levels: Vec<usize>,
}

impl DressedBasis {
    pub fn new(model: &DeviceModel) -> Result<Self> {
        let ops = SystemOperators::new(model)?;
        Self::with_operators(model, &ops)
    }

    pub fn with_operators(model: &DeviceModel, ops: &SystemOperators) -> Result<Self> {
        let h = static_rwa_hamiltonian(model, ops, 0.0);
        let (values, v) = eigh(&h);
        let n = values.len();
        let weight = |b: usize, k: usize| v[(b, k)].norm_sqr();
        let mut order: Vec<usize> = (0..n).collect();
        let best = |b: usize| (0..n).map(|k| weight(b, k)).fold(0.0, f64::max);
        order.sort_by(|&a, &b| best(b).total_cmp(&best(a)).then(a.cmp(&b)));
        let mut used = vec![false; n];
        let mut vectors = CMatrix::zeros(n, n);
        let mut energies = vec![0.0; n];
        for b in order {
            let k = (0..n)
                .filter(|&k| !used[k])
                .max_by(|&x, &y| weight(b, x).total_cmp(&weight(b, y)).then(y.cmp(&x)))
                .expect("free eigenvector");
            used[k] = true;
            let phase = v[(b, k)].arg();
            let rot = C64::from_polar(1.0, -phase);
            for i in 0..n {
                vectors[(i, b)] = v[(i, k)] * rot;
            }
            energies[b] = values[k];
        }
        let basis = Self {
            vectors,
            energies,
            levels: ops.space.dims().to_vec(),
        };
        for q in [Qubit::Control, Qubit::Target] {
            let idx = basis.index(q.excited_levels());
            if basis.vectors[(idx, idx)].norm_sqr() < 0.5 {
                return Err(Error::input(format!(
                    "{q:?} qubit is strongly hybridized with the cable; dressed labelling is ambiguous"
                )));
            }
        }
        Ok(basis)
    }

    pub fn index(&self, levels: [usize; 2]) -> usize {
        let mut full = vec![0; self.levels.len()];
        full[0] = levels[0];
        full[1] = levels[1];
        full.iter().zip(&self.levels).fold(0, |acc, (&l, &d)| acc * d + l)
    }

    /// Bare indices of |c t, cable vacuum⟩ for (c, t) in 00, 01, 10, 11.
    pub fn computational(&self) -> [usize; 4] {
        [
            self.index([0, 0]),
            self.index([0, 1]),
            self.index([1, 0]),
            self.index([1, 1]),
        ]
    }

    /// Dressed 0-1 transition frequency of a qubit with the other in its ground state.
    pub fn frequency(&self, q: Qubit) -> f64 {
        self.energies[self.index(q.excited_levels())] - self.energies[0]
    }

    /// Static ZZ shift `E11 - E10 - E01 + E00` (rad/ns).
    pub fn zz_shift(&self) -> f64 {
        let [i00, i01, i10, i11] = self.computational();
        self.energies[i11] - self.energies[i10] - self.energies[i01] + self.energies[i00]
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }
}

impl Qubit {
    fn excited_levels(self) -> [usize; 2] {
        match self {
            Qubit::Control => [1, 0],
            Qubit::Target => [0, 1],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoupled_device_is_bare() {
        let mut model = DeviceModel::default_device();
        for m in &mut model.modes {
            m.g_control = 0.0;
            m.g_target = 0.0;
        }
        let d = DressedBasis::new(&model).unwrap();
        assert!((d.vectors.clone() - CMatrix::identity(d.dim(), d.dim())).norm() < 1e-12);
        assert!((d.frequency(Qubit::Target) - model.target.frequency).abs() < 1e-12);
        assert!(d.zz_shift().abs() < 1e-12);
    }

    #[test]
    fn default_device_shifts_are_small() {
        let model = DeviceModel::default_device();
        let d = DressedBasis::new(&model).unwrap();
        let shift = (d.frequency(Qubit::Target) - model.target.frequency).abs();
        assert!(shift > 0.0 && shift < std::f64::consts::TAU * 0.01);
        let u = d.vectors.adjoint() * &d.vectors;
        assert!((u - CMatrix::identity(d.dim(), d.dim())).norm() < 1e-10);
    }
}
