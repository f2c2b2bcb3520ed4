use std::collections::HashMap;

use super::envelope::{sample_count, Envelope};
use super::schedule::{Carrier, Channel, Entry, PulseSchedule};
use crate::device::hamiltonian::{drive_operator, static_rwa_hamiltonian, SystemOperators};
use crate::device::{DeviceModel, DressedBasis, Qubit};
use crate::error::{Error, Result};
use crate::quantum::linalg::{eigh, from_spectrum, kron, re, unvec_col, vec_col, CMatrix, C64};
use crate::quantum::operator::destroy;
use crate::quantum::{DensityMatrix, HilbertSpec, ProcessMatrix};

/// Largest carrier phase advance per sub-step when a pulse is off the frame frequency.
const MAX_SUBSTEP_PHASE: f64 = 0.02;

/// Populations outside the qubit subspace at the end of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    /// Second-excited-state population of control and target, binned into |1⟩.
    pub leakage: [f64; 2],
    /// Population outside the cable vacuum.
    pub cable_excitation: f64,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub state: DensityMatrix,
    pub diagnostics: Diagnostics,
}

enum Block {
    Unitary(CMatrix),
    Frame(Qubit, f64),
}

struct ResolvedPulse {
    channel: Channel,
    first: usize,
    envelope: Envelope,
}

/// Pulse-level simulator for one device.
///
/// Evolution runs in the rotating-wave approximation in a common frame at the
/// dressed target frequency, with piecewise-constant drive samples. States enter
/// and leave in the dressed qubit frames: at the end the free dressed precession
/// of each qubit is removed, cable modes are traced out and the transmon second
/// level is binned into |1⟩.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: DeviceModel,
    ops: SystemOperators,
    basis: DressedBasis,
    frame: f64,
    h0: CMatrix,
    drive: [CMatrix; 2],
    qubit_frequency: [f64; 2],
    /// Local Lindblad generators (column stacking) per transmon subsystem.
    dissipators: Vec<(usize, CMatrix)>,
}

impl Simulator {
    pub fn new(model: &DeviceModel) -> Result<Self> {
        model.validate()?;
        let ops = SystemOperators::new(model)?;
        let basis = DressedBasis::with_operators(model, &ops)?;
        let qubit_frequency = [basis.frequency(Qubit::Control), basis.frequency(Qubit::Target)];
        let frame = qubit_frequency[1];
        let h0 = static_rwa_hamiltonian(model, &ops, frame);
        let drive = [
            drive_operator(model, &ops, Qubit::Control),
            drive_operator(model, &ops, Qubit::Target),
        ];
        let mut dissipators = Vec::new();
        for q in [Qubit::Control, Qubit::Target] {
            if let Some(l) = local_generator(model.transmon(q), model.levels) {
                dissipators.push((q.subsystem(), l));
            }
        }
        Ok(Self {
            model: model.clone(),
            ops,
            basis,
            frame,
            h0,
            drive,
            qubit_frequency,
            dissipators,
        })
    }

    pub fn model(&self) -> &DeviceModel {
        &self.model
    }

    pub fn basis(&self) -> &DressedBasis {
        &self.basis
    }

    pub fn space(&self) -> &HilbertSpec {
        &self.ops.space
    }

    /// Dressed 0-1 frequency (rad/ns).
    pub fn frequency(&self, q: Qubit) -> f64 {
        self.qubit_frequency[q.subsystem()]
    }

    /// `|⟨1̃|D_q|0̃⟩|`-style matrix element: the Rabi rate per unit drive amplitude is
    /// this value, so a resonant pulse of area `θ / element` rotates the qubit by `θ`.
    pub fn drive_matrix_element(&self, q: Qubit) -> f64 {
        let levels = match q {
            Qubit::Control => [1, 0],
            Qubit::Target => [0, 1],
        };
        let one = self.basis.vectors.column(self.basis.index(levels)).clone_owned();
        let zero = self.basis.vectors.column(self.basis.index([0, 0])).clone_owned();
        (one.adjoint() * &self.drive[q.subsystem()].adjoint() * zero)[(0, 0)].norm()
    }

    fn carrier(&self, c: Carrier) -> f64 {
        match c {
            Carrier::Control => self.qubit_frequency[0],
            Carrier::Target => self.qubit_frequency[1],
            Carrier::Fixed { frequency } => frequency,
        }
    }

    fn hamiltonian(&self, eps: [C64; 2]) -> CMatrix {
        let mut h = self.h0.clone();
        for (d, e) in self.drive.iter().zip(eps) {
            if e.norm() > 0.0 {
                h += d.adjoint() * e + d * e.conj();
            }
        }
        h
    }

    /// Break a schedule into unitary blocks and frame changes. With `merge`, runs of
    /// identical samples are folded into one exponential.
    fn blocks(&self, schedule: &PulseSchedule, merge: bool) -> Result<Vec<Block>> {
        schedule.validate()?;
        let dt = schedule.dt;
        let mut pulses = Vec::new();
        let mut frames: Vec<(usize, Qubit, f64)> = Vec::new();
        for e in &schedule.entries {
            match e {
                Entry::Pulse { channel, start, pulse } => {
                    let envelope = pulse.sample(dt, self.carrier(pulse.carrier()))?;
                    pulses.push(ResolvedPulse {
                        channel: *channel,
                        first: sample_count(*start, dt)?,
                        envelope,
                    });
                }
                Entry::FrameChange { channel, time, phase } => {
                    frames.push((sample_count(*time, dt)?, channel.qubit(), *phase));
                }
            }
        }
        let total = pulses.iter().map(|p| p.first + p.envelope.len()).max().unwrap_or(0);
        let total = frames.iter().map(|f| f.0).fold(total, usize::max);

        let mut out = Vec::new();
        let mut spectra: HashMap<[u64; 4], (Vec<f64>, CMatrix)> = HashMap::new();
        let mut run: Option<([u64; 4], usize)> = None;
        let flush = |run: &mut Option<([u64; 4], usize)>,
                     out: &mut Vec<Block>,
                     spectra: &HashMap<[u64; 4], (Vec<f64>, CMatrix)>| {
            if let Some((key, count)) = run.take() {
                let (values, vectors) = &spectra[&key];
                let t = dt * count as f64;
                out.push(Block::Unitary(from_spectrum(values, vectors, |e| C64::from_polar(1.0, -e * t))));
            }
        };

        for k in 0..=total {
            for &(_, q, phase) in frames.iter().filter(|f| f.0 == k) {
                flush(&mut run, &mut out, &spectra);
                out.push(Block::Frame(q, phase));
            }
            if k == total {
                break;
            }
            let t0 = k as f64 * dt;
            let mut amps: Vec<(usize, C64, f64)> = Vec::new();
            for p in &pulses {
                if k < p.first || k >= p.first + p.envelope.len() {
                    continue;
                }
                let j = k - p.first;
                let e = &p.envelope;
                let a = C64::new(e.i[j], e.q[j]) * 0.5 * C64::from_polar(1.0, -e.phase);
                amps.push((p.channel.qubit().subsystem(), a, e.carrier - self.frame));
            }
            let detuned = amps.iter().map(|a| a.2.abs()).fold(0.0, f64::max);
            if detuned * dt < 1e-12 {
                let mut eps = [C64::new(0.0, 0.0); 2];
                for (q, a, _) in &amps {
                    eps[*q] += a;
                }
                let key = [eps[0].re.to_bits(), eps[0].im.to_bits(), eps[1].re.to_bits(), eps[1].im.to_bits()];
                spectra.entry(key).or_insert_with(|| eigh(&self.hamiltonian(eps)));
                match &mut run {
                    Some((rk, count)) if merge && *rk == key => *count += 1,
                    _ => {
                        flush(&mut run, &mut out, &spectra);
                        run = Some((key, 1));
                    }
                }
                if !merge {
                    flush(&mut run, &mut out, &spectra);
                }
            } else {
                flush(&mut run, &mut out, &spectra);
                let m = ((detuned * dt) / MAX_SUBSTEP_PHASE).ceil().max(1.0) as usize;
                let h = dt / m as f64;
                let d = self.ops.dim();
                let mut u = CMatrix::identity(d, d);
                for s in 0..m {
                    let t = t0 + (s as f64 + 0.5) * h;
                    let mut eps = [C64::new(0.0, 0.0); 2];
                    for (q, a, delta) in &amps {
                        eps[*q] += a * C64::from_polar(1.0, -delta * t);
                    }
                    let (values, vectors) = eigh(&self.hamiltonian(eps));
                    u = from_spectrum(&values, &vectors, |e| C64::from_polar(1.0, -e * h)) * u;
                }
                out.push(Block::Unitary(u));
            }
        }
        flush(&mut run, &mut out, &spectra);
        Ok(out)
    }

    /// `exp(iδ n̂_q)` built on the dressed levels of `q`.
    fn frame_operator(&self, q: Qubit, phase: f64) -> CMatrix {
        let space = &self.ops.space;
        let d = space.total();
        let sub = q.subsystem();
        let diag = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::from_polar(1.0, phase * space.levels(i)[sub] as f64)
            } else {
                re(0.0)
            }
        });
        &self.basis.vectors * diag * self.basis.vectors.adjoint()
    }

    /// Full-space propagator in the common rotating frame, bare basis.
    pub fn unitary(&self, schedule: &PulseSchedule) -> Result<CMatrix> {
        let d = self.ops.dim();
        let mut u = CMatrix::identity(d, d);
        for b in self.blocks(schedule, true)? {
            u = match b {
                Block::Unitary(step) => step * u,
                Block::Frame(q, phase) => self.frame_operator(q, phase) * u,
            };
        }
        Ok(u)
    }

    /// Noiseless propagator restricted to the dressed computational states, in the
    /// qubit frames. Not unitary when population leaves the qubit subspace.
    pub fn computational_block(&self, schedule: &PulseSchedule) -> Result<CMatrix> {
        let u = self.unitary(schedule)?;
        let t = schedule.duration();
        let comp = self.basis.computational();
        let ud = self.basis.vectors.adjoint() * u * &self.basis.vectors;
        let phase = |k: usize| {
            let (c, tq) = (k / 2, k % 2);
            t * ((self.qubit_frequency[0] - self.frame) * c as f64 + (self.qubit_frequency[1] - self.frame) * tq as f64)
        };
        Ok(CMatrix::from_fn(4, 4, |i, j| {
            ud[(comp[i], comp[j])] * C64::from_polar(1.0, phase(i))
        }))
    }

    /// Embed a two-qubit operator on the dressed computational states, cable in vacuum.
    pub fn embed(&self, m: &CMatrix) -> Result<CMatrix> {
        if m.nrows() != 4 || m.ncols() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                found: m.nrows(),
            });
        }
        let comp = self.basis.computational();
        let s = CMatrix::from_fn(self.ops.dim(), 4, |i, j| self.basis.vectors[(i, comp[j])]);
        Ok(&s * m * s.adjoint())
    }

    /// Take a full-space operator at time `duration` back to the two-qubit frame.
    fn reduce_with(&self, full: &CMatrix, duration: f64) -> Result<(CMatrix, Diagnostics)> {
        let space = &self.ops.space;
        let mut rho = self.basis.vectors.adjoint() * full * &self.basis.vectors;
        let d = space.total();
        let labels: Vec<Vec<usize>> = (0..d).map(|i| space.levels(i)).collect();
        let phase: Vec<f64> = labels
            .iter()
            .map(|l| {
                duration
                    * ((self.qubit_frequency[0] - self.frame) * l[0] as f64
                        + (self.qubit_frequency[1] - self.frame) * l[1] as f64)
            })
            .collect();
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] *= C64::from_polar(1.0, phase[i] - phase[j]);
            }
        }
        let mut diag = Diagnostics::default();
        for (i, l) in labels.iter().enumerate() {
            let p = rho[(i, i)].re;
            if l[2..].iter().any(|&n| n > 0) {
                diag.cable_excitation += p;
            }
            for q in 0..2 {
                if l[q] >= 2 {
                    diag.leakage[q] += p;
                }
            }
        }
        let transmons = crate::quantum::state::partial_trace(&rho, space, &[0, 1])?;
        Ok((bin_levels(&transmons, self.model.levels), diag))
    }

    fn dissipate(&self, rho: &mut CMatrix, steps: &[(usize, CMatrix)]) {
        for (sub, s) in steps {
            apply_local(rho, self.ops.space.dims(), *sub, s);
        }
    }

    /// Evolve a full-space operator through the schedule. Noise uses Strang
    /// splitting per sample with local transmon dissipators.
    fn propagate(&self, schedule: &PulseSchedule, mut rho: Vec<CMatrix>, noise: bool) -> Result<Vec<CMatrix>> {
        let noisy = noise && !self.dissipators.is_empty();
        if !noisy {
            let u = self.unitary(schedule)?;
            for r in &mut rho {
                *r = &u * &*r * u.adjoint();
            }
            return Ok(rho);
        }
        let half: Vec<(usize, CMatrix)> = self
            .dissipators
            .iter()
            .map(|(k, l)| (*k, (l * re(schedule.dt / 2.0)).exp()))
            .collect();
        for b in self.blocks(schedule, false)? {
            match b {
                Block::Unitary(u) => {
                    let ud = u.adjoint();
                    for r in &mut rho {
                        self.dissipate(r, &half);
                        *r = &u * &*r * &ud;
                        self.dissipate(r, &half);
                    }
                }
                Block::Frame(q, phase) => {
                    let v = self.frame_operator(q, phase);
                    let vd = v.adjoint();
                    for r in &mut rho {
                        *r = &v * &*r * &vd;
                    }
                }
            }
        }
        Ok(rho)
    }

    pub fn run(&self, schedule: &PulseSchedule, initial: &DensityMatrix, noise: bool) -> Result<Outcome> {
        Ok(self.run_many(schedule, std::slice::from_ref(initial), noise)?.pop().expect("one state"))
    }

    /// Several initial states through one schedule, sharing the propagator.
    pub fn run_many(&self, schedule: &PulseSchedule, initial: &[DensityMatrix], noise: bool) -> Result<Vec<Outcome>> {
        let two = HilbertSpec::qubits(2);
        let full = initial
            .iter()
            .map(|rho| {
                rho.space().ensure_same(&two)?;
                self.embed(rho.matrix())
            })
            .collect::<Result<Vec<_>>>()?;
        self.propagate(schedule, full, noise)?
            .iter()
            .map(|out| {
                let (rho, diagnostics) = self.reduce_with(out, schedule.duration())?;
                Ok(Outcome {
                    state: DensityMatrix::repaired(rho, two.clone())?,
                    diagnostics,
                })
            })
            .collect()
    }

    /// `n` back-to-back copies of `schedule`. Without noise, and with every carrier
    /// on the frame frequency, the single-copy propagator is simply raised to the n-th power.
    pub fn run_repeated(
        &self,
        schedule: &PulseSchedule,
        n: usize,
        initial: &[DensityMatrix],
        noise: bool,
    ) -> Result<Vec<Outcome>> {
        let noisy = noise && !self.dissipators.is_empty();
        if noisy || !self.stationary(schedule) {
            return self.run_many(&PulseSchedule::repeated(schedule, n)?, initial, noise);
        }
        let d = self.ops.dim();
        let one = self.unitary(schedule)?;
        let mut u = CMatrix::identity(d, d);
        let mut base = one;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                u = &base * &u;
            }
            base = &base * &base;
            k >>= 1;
        }
        let two = HilbertSpec::qubits(2);
        let duration = schedule.duration() * n as f64;
        initial
            .iter()
            .map(|rho| {
                rho.space().ensure_same(&two)?;
                let full = &u * self.embed(rho.matrix())? * u.adjoint();
                let (rho, diagnostics) = self.reduce_with(&full, duration)?;
                Ok(Outcome {
                    state: DensityMatrix::repaired(rho, two.clone())?,
                    diagnostics,
                })
            })
            .collect()
    }

    /// Every pulse rides on the frame frequency, so the propagator does not depend on
    /// the absolute start time.
    fn stationary(&self, schedule: &PulseSchedule) -> bool {
        schedule.entries.iter().all(|e| match e {
            Entry::Pulse { pulse, .. } => (self.carrier(pulse.carrier()) - self.frame).abs() < 1e-12,
            Entry::FrameChange { .. } => true,
        })
    }

    /// Column-stacked 16×16 superoperator of the schedule on the two-qubit space.
    pub fn superoperator(&self, schedule: &PulseSchedule, noise: bool) -> Result<CMatrix> {
        let inputs: Vec<CMatrix> = (0..16)
            .map(|k| {
                let mut e = CMatrix::zeros(4, 4);
                e[(k % 4, k / 4)] = re(1.0);
                self.embed(&e)
            })
            .collect::<Result<_>>()?;
        let outputs = self.propagate(schedule, inputs, noise)?;
        let mut s = CMatrix::zeros(16, 16);
        for (k, o) in outputs.iter().enumerate() {
            let (m, _) = self.reduce_with(o, schedule.duration())?;
            s.set_column(k, &vec_col(&m));
        }
        Ok(s)
    }

    pub fn process(&self, schedule: &PulseSchedule, noise: bool) -> Result<ProcessMatrix> {
        ProcessMatrix::from_superoperator(&self.superoperator(schedule, noise)?)
    }
}

/// `simulate_schedule` with diagnostics dropped.
pub fn simulate_schedule(
    model: &DeviceModel,
    schedule: &PulseSchedule,
    initial: &DensityMatrix,
    noise_on: bool,
) -> Result<DensityMatrix> {
    Ok(Simulator::new(model)?.run(schedule, initial, noise_on)?.state)
}

/// Lindblad generator `D[√(1/T1) b] + D[√(2γφ) n]` on one transmon.
fn local_generator(t: &crate::device::Transmon, levels: usize) -> Option<CMatrix> {
    if !t.has_noise() {
        return None;
    }
    let b = destroy(levels);
    let n = b.adjoint() * &b;
    let mut ops = Vec::new();
    if let Some(t1) = t.t1 {
        ops.push(&b * re((1.0 / t1).sqrt()));
    }
    let gphi = t.dephasing_rate();
    if gphi > 0.0 {
        ops.push(&n * re((2.0 * gphi).sqrt()));
    }
    let id = CMatrix::identity(levels, levels);
    let mut gen = CMatrix::zeros(levels * levels, levels * levels);
    for l in ops {
        let ldl = l.adjoint() * &l;
        gen += kron(&l.map(|z| z.conj()), &l);
        gen -= kron(&id, &ldl) * re(0.5);
        gen -= kron(&ldl.transpose(), &id) * re(0.5);
    }
    Some(gen)
}

/// Apply a local column-stacked superoperator `s` to subsystem `sub` of `rho`.
fn apply_local(rho: &mut CMatrix, dims: &[usize], sub: usize, s: &CMatrix) {
    let d = dims[sub];
    let inner: usize = dims[sub + 1..].iter().product();
    let outer: usize = dims[..sub].iter().product();
    let idx = |o: usize, a: usize, r: usize| (o * d + a) * inner + r;
    let mut block = CMatrix::zeros(d, d);
    for o1 in 0..outer {
        for r1 in 0..inner {
            for o2 in 0..outer {
                for r2 in 0..inner {
                    for a in 0..d {
                        for b in 0..d {
                            block[(a, b)] = rho[(idx(o1, a, r1), idx(o2, b, r2))];
                        }
                    }
                    let next = unvec_col(&(s * vec_col(&block)), d);
                    for a in 0..d {
                        for b in 0..d {
                            rho[(idx(o1, a, r1), idx(o2, b, r2))] = next[(a, b)];
                        }
                    }
                }
            }
        }
    }
}

/// Bin the second excited level of each transmon into |1⟩ with Kraus operators
/// `{P₀₁, |1⟩⟨2|}` and drop everything above.
fn bin_levels(rho: &CMatrix, levels: usize) -> CMatrix {
    if levels == 2 {
        return rho.clone();
    }
    let keep = CMatrix::from_fn(2, levels, |i, j| if i == j { re(1.0) } else { re(0.0) });
    let lift = CMatrix::from_fn(2, levels, |i, j| if i == 1 && j == 2 { re(1.0) } else { re(0.0) });
    let kraus = [&keep, &lift];
    let mut out = CMatrix::zeros(4, 4);
    for a in kraus {
        for b in kraus {
            let k = kron(a, b);
            out += &k * rho * k.adjoint();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_preserves_trace() {
        let rho = CMatrix::from_fn(9, 9, |i, j| if i == j { re(1.0 / 9.0) } else { re(0.0) });
        let b = bin_levels(&rho, 3);
        assert!((b.trace().re - 1.0).abs() < 1e-14);
        assert!((b[(3, 3)].re - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn local_channel_matches_full_space() {
        let dims = [3, 2];
        let s = CMatrix::from_fn(9, 9, |i, j| C64::new((i * 9 + j) as f64 * 0.01, (i as f64 - j as f64) * 0.02));
        let rho = CMatrix::from_fn(6, 6, |i, j| C64::new((i + 2 * j) as f64, (i * j) as f64 * 0.3));
        let mut local = rho.clone();
        apply_local(&mut local, &dims, 0, &s);
        // oracle: full superoperator (I_2 ⊗ S) acting on the reshuffled vectorization
        let mut full = CMatrix::zeros(6, 6);
        for a2 in 0..3 {
            for b2 in 0..3 {
                for r1 in 0..2 {
                    for r2 in 0..2 {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..3 {
                            for b in 0..3 {
                                acc += s[(a2 + 3 * b2, a + 3 * b)] * rho[(a * 2 + r1, b * 2 + r2)];
                            }
                        }
                        full[(a2 * 2 + r1, b2 * 2 + r2)] = acc;
                    }
                }
            }
        }
        assert!((local - full).norm() < 1e-12);
    }
}
