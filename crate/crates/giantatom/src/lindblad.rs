//! Time-dependent N-atom three-level master equation: generator assembly and
//! integration.
//!
//! Each atom is a Ξ-type three-level system. In a frame rotating at ω_ref the
//! Hamiltonian carries detunings (ω_j-ω_ref)|1⟩⟨1| + (2(ω_j-ω_ref)+χ_j)|2⟩⟨2|
//! and waveguide-mediated exchange between all level pairs, with couplings
//! evaluated at the participating transition frequencies. Dissipation enters
//! through per-atom decay on the (01) and (12) ladders, pure dephasing, and
//! collective cross-atom decay with rates Γ_coll evaluated likewise.
//!
//! Within a schedule segment the generator is constant, so the fixed-step RK4
//! update is a linear map; we materialize that map once per distinct
//! (frequencies, duration) pair and apply it by square-and-multiply. Because
//! every term conserves or lowers the total excitation number, evolution is
//! restricted exactly to the excitation sectors populated by the initial
//! state, which keeps the few-excitation workloads small.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::{CouplingLayout, PairRate};
use crate::linalg::CMat;
use crate::schedule::{AtomSpec, FrequencySchedule};

/// Hard capacity: dense 3^N states beyond N = 6 are refused outright.
pub const MAX_ATOMS: usize = 6;

/// Largest Hilbert dimension for which the dense one-step propagator is
/// materialized; larger problems fall back to sequential RK4 in operator
/// form.
const DENSE_PROPAGATOR_DIM: usize = 16;

fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

/// Level of `atom` in the product state `full` (atom 0 is the slowest index).
fn level_of(full: usize, atom: usize, n_atoms: usize) -> usize {
    full / pow3(n_atoms - 1 - atom) % 3
}

fn excitation_of(full: usize, n_atoms: usize) -> usize {
    (0..n_atoms).map(|a| level_of(full, a, n_atoms)).sum()
}

// ---------------------------------------------------------------------------
// Density matrix
// ---------------------------------------------------------------------------

/// State of the N-atom register in the 3^N product basis,
/// levels |0⟩,|1⟩,|2⟩ per atom, atom 0 slowest.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub n_atoms: usize,
    pub mat: CMat,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn zeros(n_atoms: usize) -> Self {
        let d = pow3(n_atoms);
        Self { n_atoms, mat: CMat::zeros(d, d) }
    }

    /// |l₀ l₁ …⟩⟨l₀ l₁ …| for the given per-atom levels.
    pub fn basis_state(levels: &[u8]) -> Self {
        let n = levels.len();
        let idx = levels
            .iter()
            .fold(0usize, |acc, &l| acc * 3 + l as usize);
        let mut rho = Self::zeros(n);
        rho.mat[(idx, idx)] = C64::new(1.0, 0.0);
        rho
    }

    /// Pure state from amplitudes over the full product basis.
    pub fn from_pure(n_atoms: usize, amplitudes: &[C64]) -> Self {
        let d = pow3(n_atoms);
        assert_eq!(amplitudes.len(), d);
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let mut rho = Self::zeros(n_atoms);
        for r in 0..d {
            for c in 0..d {
                rho.mat[(r, c)] = amplitudes[r] * amplitudes[c].conj() / norm;
            }
        }
        rho
    }

    pub fn maximally_mixed(n_atoms: usize) -> Self {
        let d = pow3(n_atoms);
        let mut rho = Self::zeros(n_atoms);
        for i in 0..d {
            rho.mat[(i, i)] = C64::new(1.0 / d as f64, 0.0);
        }
        rho
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// ⟨|1⟩⟨1|⟩ of one atom (by layout index).
    pub fn population(&self, atom: usize) -> f64 {
        self.level_population(atom, 1)
    }

    /// ⟨|2⟩⟨2|⟩ of one atom: leakage out of the qubit subspace.
    pub fn leakage(&self, atom: usize) -> f64 {
        self.level_population(atom, 2)
    }

    fn level_population(&self, atom: usize, level: usize) -> f64 {
        assert!(atom < self.n_atoms, "unknown atom index {atom}");
        let d = self.dim();
        (0..d)
            .filter(|&i| level_of(i, atom, self.n_atoms) == level)
            .map(|i| self.mat[(i, i)].re)
            .sum()
    }

    /// Hermiticity, unit trace, and positivity within the stated tolerances.
    pub fn validate(&self) -> Result<()> {
        let herm = self.mat.hermiticity_defect();
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("hermiticity defect {herm:.2e}")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min_eig = self.mat.min_eigenvalue_hermitian();
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.2e}")));
        }
        Ok(())
    }
}

/// Virtual-Z frame correction: multiplies each atom's |1⟩ amplitude by
/// e^{-iφ_k} and |2⟩ by e^{-2iφ_k} — i.e. rotates subsequent gate frames by
/// the ledger phases φ_k = ∫(ω_k - ω_ref) dt. To advance the *state* into
/// the corrected frame, pass the negated ledger.
pub fn apply_virtual_z(rho: &mut DensityMatrix, phases: &[f64]) {
    assert_eq!(phases.len(), rho.n_atoms);
    let n = rho.n_atoms;
    let d = rho.dim();
    let factor: Vec<C64> = (0..d)
        .map(|s| {
            let total: f64 = (0..n)
                .map(|a| phases[a] * level_of(s, a, n) as f64)
                .sum();
            C64::new(0.0, -total).exp()
        })
        .collect();
    for r in 0..d {
        for c in 0..d {
            rho.mat[(r, c)] *= factor[r] * factor[c].conj();
        }
    }
}

// ---------------------------------------------------------------------------
// Excitation-sector basis
// ---------------------------------------------------------------------------

/// Subset of the 3^N product basis closed under the generator: all states
/// with total excitation ≤ q_max.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n_atoms: usize,
    /// Full product-basis indices, ascending.
    pub states: Vec<usize>,
    pos_of: Vec<i32>,
}

impl SectorBasis {
    pub fn full(n_atoms: usize) -> Self {
        Self::restricted(n_atoms, 2 * n_atoms)
    }

    pub fn restricted(n_atoms: usize, q_max: usize) -> Self {
        let d = pow3(n_atoms);
        let mut states = Vec::new();
        let mut pos_of = vec![-1i32; d];
        for s in 0..d {
            if excitation_of(s, n_atoms) <= q_max {
                pos_of[s] = states.len() as i32;
                states.push(s);
            }
        }
        Self { n_atoms, states, pos_of }
    }

    /// Smallest sector set supporting every nonzero entry of `rho`.
    pub fn from_support(rho: &DensityMatrix) -> Self {
        let d = rho.dim();
        let mut q_max = 0usize;
        for r in 0..d {
            for c in 0..d {
                let v = rho.mat[(r, c)];
                if v.re != 0.0 || v.im != 0.0 {
                    q_max = q_max
                        .max(excitation_of(r, rho.n_atoms))
                        .max(excitation_of(c, rho.n_atoms));
                }
            }
        }
        Self::restricted(rho.n_atoms, q_max)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn pos(&self, full: usize) -> Option<usize> {
        let p = self.pos_of[full];
        (p >= 0).then_some(p as usize)
    }

    fn project(&self, rho: &DensityMatrix) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        for (pr, &r) in self.states.iter().enumerate() {
            for (pc, &c) in self.states.iter().enumerate() {
                out[(pr, pc)] = rho.mat[(r, c)];
            }
        }
        out
    }

    fn embed(&self, small: &CMat, n_atoms: usize) -> DensityMatrix {
        let mut rho = DensityMatrix::zeros(n_atoms);
        for (pr, &r) in self.states.iter().enumerate() {
            for (pc, &c) in self.states.iter().enumerate() {
                rho.mat[(r, c)] = small[(pr, pc)];
            }
        }
        rho
    }
}

// ---------------------------------------------------------------------------
// Symbolic generator
// ---------------------------------------------------------------------------

/// Which single-atom ladder a lowering operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    L01,
    L12,
}

impl Ladder {
    fn upper(self) -> usize {
        match self {
            Ladder::L01 => 1,
            Ladder::L12 => 2,
        }
    }
    /// Harmonic-ladder matrix-element factor (√2 on the 1-2 leg).
    fn amp(self) -> f64 {
        match self {
            Ladder::L01 => 1.0,
            Ladder::L12 => std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExchangeTerm {
    pub raise_atom: usize,
    pub raise_ladder: Ladder,
    pub lower_atom: usize,
    pub lower_ladder: Ladder,
    /// Full amplitude including ladder factors; +h.c. implied.
    pub amplitude: f64,
}

#[derive(Debug, Clone)]
pub struct DecayChannel {
    pub atom: usize,
    pub ladder: Ladder,
    /// Jump-operator amplitude on the bare |lower⟩⟨upper|.
    pub amplitude: f64,
}

/// One ordered collective term: rate · (A ρ B† - ½{B†A, ρ}) with
/// A = |lower⟩⟨upper| on `atom_a`, B likewise on `atom_b`; the rate carries
/// the ladder amplitude factors.
#[derive(Debug, Clone)]
pub struct CollectiveTerm {
    pub atom_a: usize,
    pub ladder_a: Ladder,
    pub atom_b: usize,
    pub ladder_b: Ladder,
    pub rate: f64,
}

/// Options controlling which parts of the generator are assembled.
#[derive(Debug, Clone, Copy)]
#[derive(Default)]
pub struct GeneratorOptions {
    /// Drop every dissipative term (waveguide, extra decay, dephasing);
    /// useful for validating coherent physics in isolation.
    pub coherent_only: bool,
}


/// The master-equation generator at one frequency assignment.
#[derive(Debug, Clone)]
pub struct LindbladGenerator {
    pub n_atoms: usize,
    /// δ_j = ω_j - ω_ref.
    pub detuning_1: Vec<f64>,
    /// 2δ_j + χ_j, the |2⟩ level in the rotating frame.
    pub detuning_2: Vec<f64>,
    pub exchange: Vec<ExchangeTerm>,
    pub decay: Vec<DecayChannel>,
    /// √(2Γ_φ) dephasing amplitude per atom.
    pub dephasing: Vec<f64>,
    pub collective: Vec<CollectiveTerm>,
}

/// Assemble the generator for `layout` with the atoms at `frequencies`
/// (layout order, absolute rad/µs), in the frame rotating at `omega_ref`.
pub fn build_generator(
    layout: &CouplingLayout,
    specs: &[AtomSpec],
    frequencies: &[f64],
    omega_ref: f64,
    opts: &GeneratorOptions,
) -> Result<LindbladGenerator> {
    let n = layout.n_atoms();
    if n > MAX_ATOMS {
        return Err(Error::Capacity(format!(
            "{n} atoms exceeds the dense-engine limit of {MAX_ATOMS}"
        )));
    }
    if frequencies.len() != n {
        return Err(Error::FrequencyCountMismatch { expected: n, got: frequencies.len() });
    }
    let specs = ordered_specs(layout, specs)?;

    let mut gen = LindbladGenerator {
        n_atoms: n,
        detuning_1: Vec::with_capacity(n),
        detuning_2: Vec::with_capacity(n),
        exchange: Vec::new(),
        decay: Vec::new(),
        dephasing: Vec::new(),
        collective: Vec::new(),
    };

    for j in 0..n {
        let delta = frequencies[j] - omega_ref;
        gen.detuning_1.push(delta);
        gen.detuning_2.push(2.0 * delta + specs[j].chi);
    }

    // Transition frequency of atom j on a given ladder.
    let omega_l = |j: usize, l: Ladder| match l {
        Ladder::L01 => frequencies[j],
        Ladder::L12 => frequencies[j] + specs[j].chi,
    };

    let ids: Vec<usize> = layout.atoms.iter().map(|a| a.id).collect();

    // Coherent exchange: (01)-(01) and (12)-(12) once per unordered pair,
    // the cross (12)-(01) block once per ordered pair.
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let same_block = |la: Ladder| -> Result<f64> {
                layout.two_frequency_rate(
                    ids[j],
                    ids[k],
                    omega_l(j, la),
                    omega_l(k, la),
                    PairRate::Exchange,
                )
            };
            if j < k {
                let g01 = same_block(Ladder::L01)?;
                if g01 != 0.0 {
                    gen.exchange.push(ExchangeTerm {
                        raise_atom: j,
                        raise_ladder: Ladder::L01,
                        lower_atom: k,
                        lower_ladder: Ladder::L01,
                        amplitude: g01,
                    });
                }
                let g12 = same_block(Ladder::L12)?;
                if g12 != 0.0 {
                    gen.exchange.push(ExchangeTerm {
                        raise_atom: j,
                        raise_ladder: Ladder::L12,
                        lower_atom: k,
                        lower_ladder: Ladder::L12,
                        amplitude: 2.0 * g12,
                    });
                }
            }
            let g_cross = layout.two_frequency_rate(
                ids[j],
                ids[k],
                omega_l(j, Ladder::L12),
                omega_l(k, Ladder::L01),
                PairRate::Exchange,
            )?;
            if g_cross != 0.0 {
                gen.exchange.push(ExchangeTerm {
                    raise_atom: j,
                    raise_ladder: Ladder::L12,
                    lower_atom: k,
                    lower_ladder: Ladder::L01,
                    amplitude: std::f64::consts::SQRT_2 * g_cross,
                });
            }
        }
    }

    if !opts.coherent_only {
        for j in 0..n {
            let g01 = layout.individual_decay(ids[j], omega_l(j, Ladder::L01))?.max(0.0);
            let g12 = layout.individual_decay(ids[j], omega_l(j, Ladder::L12))?.max(0.0);
            let r01 = g01 + specs[j].gamma_ex;
            let r12 = g12 + specs[j].gamma_ex;
            if r01 > 0.0 {
                gen.decay.push(DecayChannel {
                    atom: j,
                    ladder: Ladder::L01,
                    amplitude: r01.sqrt(),
                });
            }
            if r12 > 0.0 {
                gen.decay.push(DecayChannel {
                    atom: j,
                    ladder: Ladder::L12,
                    amplitude: Ladder::L12.amp() * r12.sqrt(),
                });
            }
            gen.dephasing.push((2.0 * specs[j].gamma_phi).sqrt());
        }
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                for la in [Ladder::L01, Ladder::L12] {
                    for lb in [Ladder::L01, Ladder::L12] {
                        // split-phasor rate: correlated decay needs both
                        // transitions emitting into the waveguide, so each
                        // leg is evaluated at its own frequency
                        let rate = layout.collective_cross_rate(
                            ids[j],
                            ids[k],
                            omega_l(j, la),
                            omega_l(k, lb),
                        )?;
                        let rate = la.amp() * lb.amp() * rate;
                        if rate != 0.0 {
                            gen.collective.push(CollectiveTerm {
                                atom_a: j,
                                ladder_a: la,
                                atom_b: k,
                                ladder_b: lb,
                                rate,
                            });
                        }
                    }
                }
            }
        }
    } else {
        gen.dephasing = vec![0.0; n];
    }

    Ok(gen)
}

fn ordered_specs(layout: &CouplingLayout, specs: &[AtomSpec]) -> Result<Vec<AtomSpec>> {
    layout
        .atoms
        .iter()
        .map(|a| {
            specs
                .iter()
                .find(|s| s.atom_id == a.id)
                .copied()
                .ok_or(Error::UnknownAtom(a.id))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Materialized generator over a sector basis
// ---------------------------------------------------------------------------

type Triplet = (usize, usize, C64);

fn sparse_conj_transpose(t: &[Triplet]) -> Vec<Triplet> {
    t.iter().map(|&(a, b, v)| (b, a, v.conj())).collect()
}

fn sparse_mul(a: &[Triplet], b: &[Triplet]) -> Vec<Triplet> {
    let mut by_row: BTreeMap<usize, Vec<(usize, C64)>> = BTreeMap::new();
    for &(r, c, v) in b {
        by_row.entry(r).or_default().push((c, v));
    }
    let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    for &(r, k, va) in a {
        if let Some(row) = by_row.get(&k) {
            for &(c, vb) in row {
                *acc.entry((r, c)).or_insert(C64::new(0.0, 0.0)) += va * vb;
            }
        }
    }
    acc.into_iter().map(|((r, c), v)| (r, c, v)).collect()
}

fn sparse_apply_left(t: &[Triplet], rho: &CMat, out: &mut CMat, scale: C64) {
    // out += scale · T · rho
    let d = rho.cols;
    for &(r, k, v) in t {
        let sv = scale * v;
        let src = &rho.data[k * d..(k + 1) * d];
        let dst = &mut out.data[r * d..(r + 1) * d];
        for j in 0..d {
            dst[j] += sv * src[j];
        }
    }
}

fn sparse_apply_right(t: &[Triplet], rho: &CMat, out: &mut CMat, scale: C64) {
    // out += scale · rho · T
    let d = rho.rows;
    for &(k, c, v) in t {
        let sv = scale * v;
        for r in 0..d {
            out.data[r * d + c] += sv * rho.data[r * d + k];
        }
    }
}

fn sparse_sandwich(a: &[Triplet], bdag: &[Triplet], rho: &CMat, out: &mut CMat, scale: C64) {
    // out += scale · A · rho · B†   (bdag holds B† triplets)
    let d = rho.rows;
    for &(ra, ka, va) in a {
        for &(kb, cb, vb) in bdag {
            out.data[ra * d + cb] += scale * va * vb * rho.data[ka * d + kb];
        }
    }
}

/// Generator materialized on a sector basis, ready to integrate.
struct BuiltGenerator {
    dim: usize,
    h: Vec<Triplet>,
    /// (jump operator, its B† and M = B†A) per dissipative term; individual
    /// channels have B = A.
    dissipators: Vec<(Vec<Triplet>, Vec<Triplet>, Vec<Triplet>, f64)>,
    /// Gershgorin-style magnitude of the fastest generator scale.
    rate_scale: f64,
    superop: Option<CMat>,
}

impl LindbladGenerator {
    fn lowering_op(&self, basis: &SectorBasis, atom: usize, ladder: Ladder, amp: f64) -> Vec<Triplet> {
        let n = self.n_atoms;
        let stride = pow3(n - 1 - atom);
        let mut out = Vec::new();
        for (p, &s) in basis.states.iter().enumerate() {
            if level_of(s, atom, n) == ladder.upper() {
                let target = s - stride;
                if let Some(q) = basis.pos(target) {
                    out.push((q, p, C64::new(amp, 0.0)));
                }
            }
        }
        out
    }

    fn hamiltonian_triplets(&self, basis: &SectorBasis) -> Vec<Triplet> {
        let n = self.n_atoms;
        let mut trips: Vec<Triplet> = Vec::new();
        for (p, &s) in basis.states.iter().enumerate() {
            let mut diag = 0.0;
            for a in 0..n {
                match level_of(s, a, n) {
                    1 => diag += self.detuning_1[a],
                    2 => diag += self.detuning_2[a],
                    _ => {}
                }
            }
            if diag != 0.0 {
                trips.push((p, p, C64::new(diag, 0.0)));
            }
        }
        for term in &self.exchange {
            // amp · σ⁺_{raise} σ⁻_{lower} + h.c.
            let n_at = self.n_atoms;
            let stride_r = pow3(n_at - 1 - term.raise_atom);
            let stride_l = pow3(n_at - 1 - term.lower_atom);
            for (p, &s) in basis.states.iter().enumerate() {
                let lr = level_of(s, term.raise_atom, n_at);
                let ll = level_of(s, term.lower_atom, n_at);
                if lr + 1 == term.raise_ladder.upper() && ll == term.lower_ladder.upper() {
                    let target = s + stride_r - stride_l;
                    if let Some(q) = basis.pos(target) {
                        trips.push((q, p, C64::new(term.amplitude, 0.0)));
                        trips.push((p, q, C64::new(term.amplitude, 0.0)));
                    }
                }
            }
        }
        trips
    }

    /// Public form of the rotating-frame Hamiltonian, for inspection/tests.
    pub fn hamiltonian_matrix(&self) -> CMat {
        let basis = SectorBasis::full(self.n_atoms);
        let mut h = CMat::zeros(basis.dim(), basis.dim());
        for (r, c, v) in self.hamiltonian_triplets(&basis) {
            h[(r, c)] += v;
        }
        h
    }

    fn build(&self, basis: &SectorBasis, want_dense: bool) -> BuiltGenerator {
        let dim = basis.dim();
        let h = self.hamiltonian_triplets(basis);
        let mut dissipators: Vec<(Vec<Triplet>, Vec<Triplet>, Vec<Triplet>, f64)> = Vec::new();

        for ch in &self.decay {
            let l = self.lowering_op(basis, ch.atom, ch.ladder, ch.amplitude);
            let ldag = sparse_conj_transpose(&l);
            let m = sparse_mul(&ldag, &l);
            dissipators.push((l, ldag, m, 1.0));
        }
        for (atom, &amp) in self.dephasing.iter().enumerate() {
            if amp == 0.0 {
                continue;
            }
            let n = self.n_atoms;
            let mut l = Vec::new();
            for (p, &s) in basis.states.iter().enumerate() {
                let w = match level_of(s, atom, n) {
                    1 => 1.0,
                    2 => 2.0,
                    _ => 0.0,
                };
                if w != 0.0 {
                    l.push((p, p, C64::new(amp * w, 0.0)));
                }
            }
            let ldag = sparse_conj_transpose(&l);
            let m = sparse_mul(&ldag, &l);
            dissipators.push((l, ldag, m, 1.0));
        }
        for term in &self.collective {
            let a = self.lowering_op(basis, term.atom_a, term.ladder_a, 1.0);
            let b = self.lowering_op(basis, term.atom_b, term.ladder_b, 1.0);
            let bdag = sparse_conj_transpose(&b);
            let m = sparse_mul(&bdag, &a);
            dissipators.push((a, bdag, m, term.rate));
        }

        // Gershgorin bound on the Hamiltonian spectrum plus total dissipation.
        let mut diag = vec![0.0f64; dim];
        let mut rowsum = vec![0.0f64; dim];
        for &(r, c, v) in &h {
            if r == c {
                diag[r] += v.re;
            } else {
                rowsum[r] += v.norm();
            }
        }
        let hmax = (0..dim)
            .map(|r| diag[r] + rowsum[r])
            .fold(f64::NEG_INFINITY, f64::max);
        let hmin = (0..dim)
            .map(|r| diag[r] - rowsum[r])
            .fold(f64::INFINITY, f64::min);
        let mut diss_scale = 0.0;
        for (_, _, m, rate) in &dissipators {
            let mnorm: f64 = m.iter().map(|&(_, _, v)| v.norm()).fold(0.0, f64::max);
            diss_scale += rate.abs() * mnorm;
        }
        let rate_scale = ((hmax - hmin).abs() + 2.0 * diss_scale).max(1e-12);

        let superop = want_dense.then(|| {
            let d2 = dim * dim;
            let mut s = CMat::zeros(d2, d2);
            let mi = C64::new(0.0, -1.0);
            let pi = C64::new(0.0, 1.0);
            for &(a, b, v) in &h {
                for k in 0..dim {
                    s[(a * dim + k, b * dim + k)] += mi * v;
                    s[(k * dim + b, k * dim + a)] += pi * v;
                }
            }
            for (l, bdag, m, rate) in &dissipators {
                let r = C64::new(*rate, 0.0);
                for &(ra, ka, va) in l {
                    for &(kb, cb, vb) in bdag {
                        s[(ra * dim + cb, ka * dim + kb)] += r * va * vb;
                    }
                }
                for &(a, b, v) in m {
                    let half = C64::new(0.5 * rate, 0.0) * v;
                    for k in 0..dim {
                        s[(a * dim + k, b * dim + k)] -= half;
                        s[(k * dim + b, k * dim + a)] -= half;
                    }
                }
            }
            s
        });

        BuiltGenerator { dim, h, dissipators, rate_scale, superop }
    }
}

impl BuiltGenerator {
    /// dρ/dt in operator form.
    fn rhs(&self, rho: &CMat, out: &mut CMat) {
        for v in &mut out.data {
            *v = C64::new(0.0, 0.0);
        }
        let mi = C64::new(0.0, -1.0);
        let pi = C64::new(0.0, 1.0);
        sparse_apply_left(&self.h, rho, out, mi);
        sparse_apply_right(&self.h, rho, out, pi);
        for (l, bdag, m, rate) in &self.dissipators {
            let r = C64::new(*rate, 0.0);
            sparse_sandwich(l, bdag, rho, out, r);
            let half = C64::new(-0.5 * rate, 0.0);
            sparse_apply_left(m, rho, out, half);
            sparse_apply_right(m, rho, out, half);
        }
    }
}

// ---------------------------------------------------------------------------
// Step control and the engine
// ---------------------------------------------------------------------------

/// Fixed-step RK4 control: h ≤ min(max_phase / ‖rates‖_max, segment/min_steps).
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub max_phase_per_step: f64,
    pub min_steps_per_segment: u64,
    pub max_steps_per_segment: u64,
    /// Hilbert dimension up to which the dense one-step map is materialized.
    pub dense_dim_limit: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            max_phase_per_step: 0.02,
            min_steps_per_segment: 50,
            max_steps_per_segment: 1_000_000_000,
            dense_dim_limit: DENSE_PROPAGATOR_DIM,
        }
    }
}

/// Evolution record at the requested sample times.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub populations: Vec<Vec<f64>>,
    pub leakage: Vec<Vec<f64>>,
    pub trace: Vec<f64>,
    pub final_ledger: Vec<f64>,
}

/// Integration context: layout, per-atom specs, options, and the propagator
/// cache reused across segments and runs.
pub struct Engine<'a> {
    pub layout: &'a CouplingLayout,
    specs: Vec<AtomSpec>,
    pub opts: GeneratorOptions,
    pub step: StepControl,
    built_cache: RefCell<HashMap<(usize, Vec<u64>), Rc<BuiltGenerator>>>,
    prop_cache: RefCell<HashMap<(usize, Vec<u64>, u64), Rc<CMat>>>,
}

impl<'a> Engine<'a> {
    pub fn new(layout: &'a CouplingLayout, specs: &[AtomSpec]) -> Result<Self> {
        if layout.n_atoms() > MAX_ATOMS {
            return Err(Error::Capacity(format!(
                "{} atoms exceeds the dense-engine limit of {MAX_ATOMS}",
                layout.n_atoms()
            )));
        }
        let specs = ordered_specs(layout, specs)?;
        Ok(Self {
            layout,
            specs,
            opts: GeneratorOptions::default(),
            step: StepControl::default(),
            built_cache: RefCell::new(HashMap::new()),
            prop_cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn with_options(mut self, opts: GeneratorOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn with_step(mut self, step: StepControl) -> Self {
        self.step = step;
        self
    }

    pub fn specs(&self) -> &[AtomSpec] {
        &self.specs
    }

    /// Evolve a validated state through `schedule` over `t_span`, sampling at
    /// `sample_times` (each snapped to the integration breakpoints).
    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        schedule: &FrequencySchedule,
        t_span: (f64, f64),
        sample_times: &[f64],
    ) -> Result<Trajectory> {
        rho0.validate()?;
        let basis = SectorBasis::from_support(rho0);
        let (mats, ledger, times) =
            self.propagate(&rho0.mat, &basis, schedule, t_span, sample_times)?;
        let n = rho0.n_atoms;
        let states: Vec<DensityMatrix> = mats.iter().map(|m| basis.embed(m, n)).collect();
        let populations = states
            .iter()
            .map(|s| (0..n).map(|a| s.population(a)).collect())
            .collect();
        let leakage = states
            .iter()
            .map(|s| (0..n).map(|a| s.leakage(a)).collect())
            .collect();
        let trace = states.iter().map(|s| s.trace()).collect();
        Ok(Trajectory { times, states, populations, leakage, trace, final_ledger: ledger })
    }

    /// Propagate an arbitrary operator (tomography inputs need not be
    /// states) over the whole span; returns samples in the given basis plus
    /// the final virtual-Z ledger.
    pub(crate) fn propagate(
        &self,
        op0: &CMat,
        basis: &SectorBasis,
        schedule: &FrequencySchedule,
        t_span: (f64, f64),
        sample_times: &[f64],
    ) -> Result<(Vec<CMat>, Vec<f64>, Vec<f64>)> {
        let n = self.layout.n_atoms();
        if schedule.n_atoms() != n {
            return Err(Error::FrequencyCountMismatch { expected: n, got: schedule.n_atoms() });
        }
        schedule.validate(t_span)?;
        let dim = basis.dim();
        let full_dim = pow3(n);
        let small = if op0.rows == full_dim && dim != full_dim {
            // project onto the sector basis
            let rho_like = DensityMatrix { n_atoms: n, mat: op0.clone() };
            basis.project(&rho_like)
        } else {
            op0.clone()
        };
        let mut v: Vec<C64> = small.data.clone();

        let mut points = schedule.breakpoints(t_span);
        for &t in sample_times {
            points.push(t);
        }
        points.retain(|&t| t >= t_span.0 - 1e-12 && t <= t_span.1 + 1e-12);
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + a.abs()));

        let close = |a: f64, b: f64| (a - b).abs() < 1e-12 * (1.0 + a.abs());
        let mut samples: Vec<CMat> = Vec::new();
        let mut sample_at: Vec<f64> = Vec::new();
        let mut ledger = vec![0.0f64; n];

        let mut record = |t: f64, v: &[C64], ledger: &[f64]| {
            if sample_times.iter().any(|&s| close(s, t)) {
                let mut m = CMat::zeros(dim, dim);
                m.data.copy_from_slice(v);
                samples.push(m);
                sample_at.push(t);
                let _ = ledger;
            }
        };

        let apply_layers_at = |t: f64, v: &mut [C64], ledger: &mut Vec<f64>| {
            for layer in &schedule.rz_layers {
                if close(layer.time, t) {
                    // advance the state by e^{+iφ} per |1⟩ quantum: the
                    // deliberate phase, plus the accumulated ledger when the
                    // layer compensates (which then resets it)
                    let phases: Vec<f64> = (0..n)
                        .map(|a| {
                            let extra = layer.extra_phase.get(a).copied().unwrap_or(0.0);
                            if layer.compensate {
                                ledger[a] + extra
                            } else {
                                extra
                            }
                        })
                        .collect();
                    if !phases.iter().all(|&p| p == 0.0) {
                        let fac: Vec<C64> = basis
                            .states
                            .iter()
                            .map(|&s| {
                                let total: f64 = (0..n)
                                    .map(|a| phases[a] * level_of(s, a, n) as f64)
                                    .sum();
                                C64::new(0.0, total).exp()
                            })
                            .collect();
                        for r in 0..dim {
                            for c in 0..dim {
                                v[r * dim + c] *= fac[r] * fac[c].conj();
                            }
                        }
                    }
                    if layer.compensate {
                        for l in ledger.iter_mut() {
                            *l = 0.0;
                        }
                    }
                }
            }
        };

        apply_layers_at(points[0], &mut v, &mut ledger);
        record(points[0], &v, &ledger);

        for w in points.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let lambda = t1 - t0;
            if lambda > 0.0 {
                let tm = 0.5 * (t0 + t1);
                let freqs: Vec<f64> = (0..n)
                    .map(|a| schedule.omega_at(a, tm))
                    .collect::<Result<_>>()?;
                self.advance(&mut v, basis, &freqs, schedule.omega_ref, lambda, t0)?;
                for a in 0..n {
                    ledger[a] += (freqs[a] - schedule.frame_of(a)) * lambda;
                }
            }
            apply_layers_at(t1, &mut v, &mut ledger);
            record(t1, &v, &ledger);
        }

        Ok((samples, ledger, sample_at))
    }

    fn built_for(&self, basis: &SectorBasis, freqs: &[f64], omega_ref: f64) -> Result<Rc<BuiltGenerator>> {
        let key = (
            basis.dim(),
            freqs
                .iter()
                .chain(std::iter::once(&omega_ref))
                .map(|f| f.to_bits())
                .collect::<Vec<u64>>(),
        );
        let cached = self.built_cache.borrow().get(&key).cloned();
        if let Some(b) = cached {
            return Ok(b);
        }
        let gen = build_generator(self.layout, &self.specs, freqs, omega_ref, &self.opts)?;
        let want_dense = basis.dim() <= self.step.dense_dim_limit;
        let built = Rc::new(gen.build(basis, want_dense));
        self.built_cache.borrow_mut().insert(key, built.clone());
        Ok(built)
    }

    fn advance(
        &self,
        v: &mut Vec<C64>,
        basis: &SectorBasis,
        freqs: &[f64],
        omega_ref: f64,
        lambda: f64,
        t_start: f64,
    ) -> Result<()> {
        let built = self.built_for(basis, freqs, omega_ref)?;
        let h_max = self.step.max_phase_per_step / built.rate_scale;
        let m = ((lambda / h_max).ceil() as u64).max(self.step.min_steps_per_segment);
        if m > self.step.max_steps_per_segment {
            return Err(Error::StepUnderflow { t_start, length: lambda, steps: m });
        }
        let h = lambda / m as f64;

        if built.superop.is_some() {
            let key = (
                basis.dim(),
                freqs
                    .iter()
                    .chain(std::iter::once(&omega_ref))
                    .map(|f| f.to_bits())
                    .collect::<Vec<u64>>(),
                lambda.to_bits(),
            );
            let cached = self.prop_cache.borrow().get(&key).cloned();
            let total = match cached {
                Some(p) => p,
                None => {
                    let s = built.superop.as_ref().unwrap();
                    let p1 = rk4_step_matrix(s, h);
                    let total = Rc::new(mat_pow(&p1, m));
                    self.prop_cache.borrow_mut().insert(key, total.clone());
                    total
                }
            };
            *v = total.matvec(v);
        } else {
            // operator-form sequential RK4
            let dim = built.dim;
            let mut rho = CMat::zeros(dim, dim);
            rho.data.copy_from_slice(v);
            let mut k1 = CMat::zeros(dim, dim);
            let mut k2 = CMat::zeros(dim, dim);
            let mut k3 = CMat::zeros(dim, dim);
            let mut k4 = CMat::zeros(dim, dim);
            let mut tmp = CMat::zeros(dim, dim);
            for _ in 0..m {
                built.rhs(&rho, &mut k1);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(0.5 * h, 0.0), &k1);
                built.rhs(&tmp, &mut k2);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(0.5 * h, 0.0), &k2);
                built.rhs(&tmp, &mut k3);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(h, 0.0), &k3);
                built.rhs(&tmp, &mut k4);
                let w = h / 6.0;
                for i in 0..rho.data.len() {
                    rho.data[i] += C64::new(w, 0.0)
                        * (k1.data[i]
                            + C64::new(2.0, 0.0) * (k2.data[i] + k3.data[i])
                            + k4.data[i]);
                }
            }
            v.copy_from_slice(&rho.data);
        }
        Ok(())
    }
}

/// One fixed-step RK4 update of dv/dt = S v as a matrix:
/// I + hS + (hS)²/2 + (hS)³/6 + (hS)⁴/24.
fn rk4_step_matrix(s: &CMat, h: f64) -> CMat {
    let d = s.rows;
    let a = s.scale(C64::new(h, 0.0));
    let eye = CMat::identity(d);
    let mut x = eye.clone();
    x.axpy(C64::new(0.25, 0.0), &a);
    let mut y = eye.clone();
    y.axpy(C64::new(1.0 / 3.0, 0.0), &a.mul(&x));
    let mut z = eye.clone();
    z.axpy(C64::new(0.5, 0.0), &a.mul(&y));
    let mut p = eye;
    p.axpy(C64::new(1.0, 0.0), &a.mul(&z));
    p
}

fn mat_pow(p: &CMat, mut m: u64) -> CMat {
    let mut result = CMat::identity(p.rows);
    let mut base = p.clone();
    while m > 0 {
        if m & 1 == 1 {
            result = base.mul(&result);
        }
        m >>= 1;
        if m > 0 {
            base = base.mul(&base);
        }
    }
    result
}
