//! Independent reference solvers used as test oracles: exact Lindblad
//! evolution of the spin-1/2 target model, ideal-gate circuit execution, and
//! small closed-form propagators.
//!
//! Nothing here touches the three-level engine; operators, integrator, and
//! step control are built separately so agreement between the two paths is
//! evidence, not tautology.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{expm_2x2_hermitian, CMat};
use crate::trotter::TrotterPlan;

fn pow2(n: usize) -> usize {
    1usize << n
}

/// Bit of `site` in a 2^N basis index, site 0 the slowest.
fn bit_of(idx: usize, site: usize, n: usize) -> usize {
    (idx >> (n - 1 - site)) & 1
}

/// Spin-chain density matrix in the qubit basis, |1⟩ = spin up.
#[derive(Debug, Clone)]
pub struct SpinState {
    pub n_sites: usize,
    pub mat: CMat,
}

impl SpinState {
    pub fn basis_state(bits: &[u8]) -> Self {
        let n = bits.len();
        let idx = bits.iter().fold(0usize, |acc, &b| acc * 2 + b as usize);
        let mut mat = CMat::zeros(pow2(n), pow2(n));
        mat[(idx, idx)] = C64::new(1.0, 0.0);
        Self { n_sites: n, mat }
    }

    /// Population n_k = ⟨σ⁺σ⁻⟩ of one site (diagonal sum over bit = 1).
    pub fn population(&self, site: usize) -> f64 {
        let n = self.n_sites;
        (0..self.mat.rows)
            .filter(|&i| bit_of(i, site, n) == 1)
            .map(|i| self.mat[(i, i)].re)
            .sum()
    }

    /// Same population through (⟨σ^z⟩+1)/2; must agree with
    /// [`Self::population`] to machine precision.
    pub fn population_via_sigma_z(&self, site: usize) -> f64 {
        let n = self.n_sites;
        let z: f64 = (0..self.mat.rows)
            .map(|i| {
                let sign = if bit_of(i, site, n) == 1 { 1.0 } else { -1.0 };
                sign * self.mat[(i, i)].re
            })
            .sum();
        0.5 * (z + 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }
}

/// Dense XXZ Hamiltonian with open boundaries.
pub fn xxz_hamiltonian(n: usize, j: f64, j_z: f64) -> CMat {
    let d = pow2(n);
    let mut h = CMat::zeros(d, d);
    for s in 0..d {
        let mut diag = 0.0;
        for k in 0..n - 1 {
            let (ba, bb) = (bit_of(s, k, n), bit_of(s, k + 1, n));
            // Z⊗Z: +1 on equal bits, -1 otherwise
            diag += j_z * if ba == bb { 1.0 } else { -1.0 };
            // XX+YY hops an excitation between neighbors with element 2J
            if ba != bb {
                let t = s ^ (1 << (n - 1 - k)) ^ (1 << (n - 2 - k));
                h[(t, s)] += C64::new(2.0 * j, 0.0);
            }
        }
        h[(s, s)] += C64::new(diag, 0.0);
    }
    h
}

/// Exact (solver-converged) populations of the dissipative XXZ model at the
/// requested times, starting from σ₁⁺|Ω⟩ unless an initial state is given.
pub fn exact_lindblad(
    n: usize,
    j: f64,
    j_z: f64,
    gamma: f64,
    t_grid: &[f64],
    initial: Option<&SpinState>,
) -> Result<Vec<SpinState>> {
    if n > 8 {
        return Err(Error::Capacity("exact solver is limited to 8 sites".into()));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidArgument("Γ must be ≥ 0".into()));
    }
    let d = pow2(n);
    let h = xxz_hamiltonian(n, j, j_z);
    // lowering on the last site: amplitude √Γ |…0⟩⟨…1|
    let lower: Vec<(usize, usize)> = (0..d)
        .filter(|&s| bit_of(s, n - 1, n) == 1)
        .map(|s| (s ^ 1, s))
        .collect();

    let mut rho = match initial {
        Some(s) => s.mat.clone(),
        None => {
            let mut bits = vec![0u8; n];
            bits[0] = 1;
            SpinState::basis_state(&bits).mat
        }
    };

    let scale = j.abs().max(j_z.abs()).max(gamma).max(1e-9);
    let dt_target = 1e-3 / scale;

    let rhs = |rho: &CMat, out: &mut CMat| {
        for v in &mut out.data {
            *v = C64::new(0.0, 0.0);
        }
        let hr = h.mul(rho);
        let rh = rho.mul(&h);
        let mi = C64::new(0.0, -1.0);
        for i in 0..out.data.len() {
            out.data[i] = mi * (hr.data[i] - rh.data[i]);
        }
        if gamma > 0.0 {
            // L ρ L† and -½{L†L, ρ}; L†L projects onto bit_N = 1
            for &(t, s) in &lower {
                for &(t2, s2) in &lower {
                    out[(t, t2)] += C64::new(gamma, 0.0) * rho[(s, s2)];
                }
            }
            for &(_, s) in &lower {
                for c in 0..d {
                    out[(s, c)] -= C64::new(0.5 * gamma, 0.0) * rho[(s, c)];
                    out[(c, s)] -= C64::new(0.5 * gamma, 0.0) * rho[(c, s)];
                }
            }
        }
    };

    let mut states = Vec::with_capacity(t_grid.len());
    let mut t_now = 0.0;
    let mut sorted: Vec<(usize, f64)> = t_grid.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut out_states: Vec<Option<SpinState>> = vec![None; t_grid.len()];

    let mut k1 = CMat::zeros(d, d);
    let mut k2 = CMat::zeros(d, d);
    let mut k3 = CMat::zeros(d, d);
    let mut k4 = CMat::zeros(d, d);
    let mut tmp = CMat::zeros(d, d);
    for (orig_idx, t_target) in sorted {
        let span = t_target - t_now;
        if span > 0.0 {
            let m = (span / dt_target).ceil().max(1.0) as u64;
            let dt = span / m as f64;
            for _ in 0..m {
                rhs(&rho, &mut k1);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(0.5 * dt, 0.0), &k1);
                rhs(&tmp, &mut k2);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(0.5 * dt, 0.0), &k2);
                rhs(&tmp, &mut k3);
                tmp.data.copy_from_slice(&rho.data);
                tmp.axpy(C64::new(dt, 0.0), &k3);
                rhs(&tmp, &mut k4);
                let w = dt / 6.0;
                for i in 0..rho.data.len() {
                    rho.data[i] += C64::new(w, 0.0)
                        * (k1.data[i]
                            + C64::new(2.0, 0.0) * (k2.data[i] + k3.data[i])
                            + k4.data[i]);
                }
            }
            t_now = t_target;
        }
        out_states[orig_idx] = Some(SpinState { n_sites: n, mat: rho.clone() });
    }
    for s in out_states {
        states.push(s.unwrap());
    }
    Ok(states)
}

/// Populations-only convenience wrapper: rows\[t\]\[site\].
pub fn exact_lindblad_populations(
    n: usize,
    j: f64,
    j_z: f64,
    gamma: f64,
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let states = exact_lindblad(n, j, j_z, gamma, t_grid, None)?;
    Ok(states
        .iter()
        .map(|s| (0..n).map(|k| s.population(k)).collect())
        .collect())
}

// ---------------------------------------------------------------------------
// Ideal two-qubit gates and the ideal-circuit executor
// ---------------------------------------------------------------------------

/// exp(-iθ(σ⁺σ⁻+σ⁻σ⁺)) on a pair, basis (00,01,10,11).
pub fn ideal_rxy(theta: f64) -> CMat {
    let mut u = CMat::identity(4);
    u[(1, 1)] = C64::new(theta.cos(), 0.0);
    u[(2, 2)] = C64::new(theta.cos(), 0.0);
    u[(1, 2)] = C64::new(0.0, -theta.sin());
    u[(2, 1)] = C64::new(0.0, -theta.sin());
    u
}

/// Standard iSWAP: swaps |01⟩ and |10⟩ with phase +i.
pub fn ideal_iswap() -> CMat {
    let mut u = CMat::identity(4);
    u[(1, 1)] = C64::new(0.0, 0.0);
    u[(2, 2)] = C64::new(0.0, 0.0);
    u[(1, 2)] = C64::new(0.0, 1.0);
    u[(2, 1)] = C64::new(0.0, 1.0);
    u
}

/// Controlled phase: diag(1, 1, 1, e^{iφ}); φ = π is CZ.
pub fn ideal_czphi(phi: f64) -> CMat {
    let mut u = CMat::identity(4);
    u[(3, 3)] = C64::new(0.0, phi).exp();
    u
}

pub fn ideal_cz() -> CMat {
    ideal_czphi(std::f64::consts::PI)
}

/// exp(-iθ Z⊗Z) with Z = diag(-1, +1) in the (|0⟩,|1⟩) ordering.
pub fn ideal_rzz(theta: f64) -> CMat {
    let mut u = CMat::identity(4);
    let inner = C64::new(0.0, theta).exp(); // bits differ: ZZ = -1
    let outer = C64::new(0.0, -theta).exp();
    u[(0, 0)] = outer;
    u[(1, 1)] = inner;
    u[(2, 2)] = inner;
    u[(3, 3)] = outer;
    u
}

fn embed_pair_unitary(u4: &CMat, a: usize, b: usize, n: usize) -> CMat {
    let d = pow2(n);
    let mut u = CMat::zeros(d, d);
    for s in 0..d {
        let (ba, bb) = (bit_of(s, a, n), bit_of(s, b, n));
        let col = ba * 2 + bb;
        for row in 0..4 {
            let v = u4[(row, col)];
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            let (na, nb) = (row / 2, row % 2);
            let mut t = s;
            t = (t & !(1 << (n - 1 - a))) | (na << (n - 1 - a));
            t = (t & !(1 << (n - 1 - b))) | (nb << (n - 1 - b));
            u[(t, s)] += v;
        }
    }
    u
}

fn apply_unitary(rho: &mut CMat, u: &CMat) {
    *rho = u.mul(rho).mul(&u.dagger());
}

/// Exact amplitude damping with survival e^{-Γτ} on one site.
fn apply_decay(rho: &mut CMat, site: usize, n: usize, gamma_tau: f64) {
    let d = rho.rows;
    let s_amp = (-gamma_tau).exp().sqrt(); // amplitude on |1⟩
    let p = 1.0 - (-gamma_tau).exp();
    let mut out = CMat::zeros(d, d);
    // K0 = diag(1, e^{-Γτ/2}) on the site
    for r in 0..d {
        for c in 0..d {
            let fr = if bit_of(r, site, n) == 1 { s_amp } else { 1.0 };
            let fc = if bit_of(c, site, n) == 1 { s_amp } else { 1.0 };
            out[(r, c)] += C64::new(fr * fc, 0.0) * rho[(r, c)];
        }
    }
    // K1 = √p |0⟩⟨1|
    for r in 0..d {
        if bit_of(r, site, n) != 1 {
            continue;
        }
        let rt = r ^ (1 << (n - 1 - site));
        for c in 0..d {
            if bit_of(c, site, n) != 1 {
                continue;
            }
            let ct = c ^ (1 << (n - 1 - site));
            out[(rt, ct)] += C64::new(p, 0.0) * rho[(r, c)];
        }
    }
    *rho = out;
}

/// Execute a Trotter plan with perfect gates: exact pair unitaries and exact
/// end-site amplitude damping, no hardware model. Returns populations at the
/// l+1 step boundaries. This isolates pure Trotter error.
pub fn ideal_circuit(plan: &TrotterPlan) -> Result<Vec<Vec<f64>>> {
    let n = plan.model.n_sites;
    if n > 8 {
        return Err(Error::Capacity("ideal circuit is limited to 8 sites".into()));
    }
    let mut bits = vec![0u8; n];
    bits[0] = 1;
    let mut state = SpinState::basis_state(&bits);

    let mut boundaries = Vec::with_capacity(plan.l + 1);
    let pops = |s: &SpinState| (0..n).map(|k| s.population(k)).collect::<Vec<f64>>();
    boundaries.push(pops(&state));

    // Pre-build the step's full-space unitaries once.
    let mut unitaries: Vec<CMat> = Vec::new();
    for pg in &plan.step.rxy_odd {
        unitaries.push(embed_pair_unitary(&ideal_rxy(pg.angle), pg.a, pg.b, n));
    }
    for pg in &plan.step.zz_odd {
        unitaries.push(embed_pair_unitary(&ideal_rzz(pg.angle), pg.a, pg.b, n));
    }
    for pg in &plan.step.rxy_even {
        unitaries.push(embed_pair_unitary(&ideal_rxy(pg.angle), pg.a, pg.b, n));
    }
    for pg in &plan.step.zz_even {
        unitaries.push(embed_pair_unitary(&ideal_rzz(pg.angle), pg.a, pg.b, n));
    }

    for _ in 0..plan.l {
        for u in &unitaries {
            apply_unitary(&mut state.mat, u);
        }
        if let Some(decay) = plan.step.decay {
            apply_decay(
                &mut state.mat,
                decay.site,
                n,
                plan.model.gamma * decay.sim_duration,
            );
        }
        boundaries.push(pops(&state));
    }
    Ok(boundaries)
}

/// Exact propagator of a Hermitian 2×2 block, for phase-law checks.
pub fn two_level_block(h: &CMat, t: f64) -> CMat {
    expm_2x2_hermitian(h, t)
}

/// Per-point simulation error and summary norms.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// delta[t][site] = exact - simulated
    pub delta: Vec<Vec<f64>>,
    pub max_abs: f64,
    pub mean_abs: f64,
}

pub fn error_report(simulated: &[Vec<f64>], exact: &[Vec<f64>]) -> Result<ErrorReport> {
    if simulated.len() != exact.len() {
        return Err(Error::InvalidArgument(format!(
            "grid mismatch: {} vs {} rows",
            simulated.len(),
            exact.len()
        )));
    }
    let mut delta = Vec::with_capacity(exact.len());
    let mut max_abs = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (s, e) in simulated.iter().zip(exact) {
        if s.len() != e.len() {
            return Err(Error::InvalidArgument("grid mismatch: row widths".into()));
        }
        let row: Vec<f64> = e.iter().zip(s).map(|(ev, sv)| ev - sv).collect();
        for d in &row {
            max_abs = max_abs.max(d.abs());
            sum += d.abs();
            count += 1;
        }
        delta.push(row);
    }
    Ok(ErrorReport { delta, max_abs, mean_abs: sum / count.max(1) as f64 })
}
