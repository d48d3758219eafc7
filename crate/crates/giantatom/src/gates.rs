//! Two-qubit gates as frequency schedules, Choi-matrix tomography, process
//! fidelities, and the nearest-neighbor addressing rules for the chain and
//! grid architectures.
//!
//! The gate set comes out of frequency tuning alone: an R_XY(θ) puts both
//! atoms on one decoherence-free frequency for τ = θ/g; the CZ family parks
//! the pair one anharmonicity apart so |11⟩ swaps into |20⟩ and back,
//! picking up a controlled phase that follows
//! φ = π(1 + Δ/√(8g² + Δ²)) as the detuning Δ is varied.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AtomId, CouplingLayout, PairRate, PresetKind};
use crate::linalg::{eigh, sqrt_psd, CMat};
use crate::lindblad::{Engine, SectorBasis};
use crate::oracle;
use crate::schedule::{AtomSpec, ScheduleBuilder};

/// What a protocol implements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateKind {
    Rxy(f64),
    Cz,
    CzPhi(f64),
    Decay { duration: f64 },
    Idle { duration: f64 },
}

/// A two-qubit (or single-qubit decay) operation lowered to frequencies and
/// a hold time.
#[derive(Debug, Clone)]
pub struct GateProtocol {
    pub kind: GateKind,
    pub targets: Vec<AtomId>,
    /// One frequency per atom in layout order, held for `duration`.
    pub frequencies: Vec<f64>,
    pub duration: f64,
}

fn check_braided(layout: &CouplingLayout, a: AtomId, b: AtomId) -> Result<()> {
    let ga = layout.atom(a)?;
    let gb = layout.atom(b)?;
    for (wg, pa) in &ga.points {
        let Some(pb) = gb.points.get(wg) else { continue };
        let (a0, a1) = (pa[0].position, pa[pa.len() - 1].position);
        let (b0, b1) = (pb[0].position, pb[pb.len() - 1].position);
        if a0 < b1 && b0 < a1 {
            return Ok(());
        }
    }
    Err(Error::InvalidArgument(format!(
        "atoms {a} and {b} are not braided; no decoherence-free coupling"
    )))
}

fn parked_frequencies(layout: &CouplingLayout, assignments: &[(usize, f64)]) -> Result<Vec<f64>> {
    // Unassigned atoms idle at detuned DF frequencies so they stay inert.
    let n = layout.n_atoms();
    match layout.preset {
        Some(PresetKind::Chain) => {
            let mut freqs = chain_idle_frequencies(layout, n)?;
            for &(idx, w) in assignments {
                freqs[idx] = w;
            }
            Ok(freqs)
        }
        Some(PresetKind::Grid { rows, cols }) => {
            let mut freqs = grid_idle_frequencies(layout, rows, cols)?;
            for &(idx, w) in assignments {
                freqs[idx] = w;
            }
            Ok(freqs)
        }
        _ => {
            // two-atom building block: idle at (n3, n1)
            let mut freqs = vec![layout.df_nm(3)?; n];
            if n > 1 {
                freqs[1] = layout.df_nm(1)?;
            }
            for &(idx, w) in assignments {
                freqs[idx] = w;
            }
            Ok(freqs)
        }
    }
}

/// R_XY(θ): both atoms on one DF frequency with g ≠ 0 for τ = θ/g (g > 0)
/// or τ = (2π-θ)/|g| (g < 0). The default frequency is the third DF label,
/// where the two-atom block has g ≈ 2.1γ.
pub fn rxy_protocol(layout: &CouplingLayout, pair: (AtomId, AtomId), theta: f64) -> Result<GateProtocol> {
    let omega = layout.df_nm(3)?;
    rxy_protocol_at(layout, pair, theta, omega)
}

pub fn rxy_protocol_at(
    layout: &CouplingLayout,
    pair: (AtomId, AtomId),
    theta: f64,
    omega: f64,
) -> Result<GateProtocol> {
    if !(theta > 0.0 && theta < 2.0 * std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("θ = {theta} outside (0, 2π)")));
    }
    check_braided(layout, pair.0, pair.1)?;
    let g = layout.exchange_coupling(pair.0, pair.1, omega)?;
    if g == 0.0 {
        return Err(Error::InvalidArgument("pair has zero coupling at that frequency".into()));
    }
    let duration = if g > 0.0 { theta / g } else { (2.0 * std::f64::consts::PI - theta) / g.abs() };
    let ia = layout.atom_index(pair.0)?;
    let ib = layout.atom_index(pair.1)?;
    let frequencies = parked_frequencies(layout, &[(ia, omega), (ib, omega)])?;
    Ok(GateProtocol {
        kind: GateKind::Rxy(theta),
        targets: vec![pair.0, pair.1],
        frequencies,
        duration,
    })
}

/// CZ: first atom at the second DF label, second at the first, which puts
/// |11⟩ on resonance with |20⟩ when χ₁ matches the comb spacing;
/// τ = π/(√2 g).
pub fn cz_protocol(
    layout: &CouplingLayout,
    specs: &[AtomSpec],
    pair: (AtomId, AtomId),
) -> Result<GateProtocol> {
    czphi_protocol(layout, specs, pair, std::f64::consts::PI).map(|mut p| {
        p.kind = GateKind::Cz;
        p
    })
}

/// Detuning that realizes a target conditional phase, inverting
/// φ = π(1 + Δ/√(8g²+Δ²)).
pub fn czphi_detuning(phi: f64, g: f64) -> Result<f64> {
    let u = phi / std::f64::consts::PI - 1.0;
    if !(u.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "φ = {phi} needs an infinite detuning"
        )));
    }
    Ok(2.0 * std::f64::consts::SQRT_2 * g * u / (1.0 - u * u).sqrt())
}

/// Conditional phase produced by a detuning (forward form of the inversion).
pub fn czphi_phase(delta: f64, g: f64) -> f64 {
    std::f64::consts::PI * (1.0 + delta / (8.0 * g * g + delta * delta).sqrt())
}

/// CZ_φ: the second atom parks at (first DF label) + Δ with
/// Δ = 2√2·g·u/√(1-u²), u = φ/π - 1, for τ = π/√(2ĝ² + Δ²/4); ĝ is the
/// coupling measured at the detuned operating point.
pub fn czphi_protocol(
    layout: &CouplingLayout,
    specs: &[AtomSpec],
    pair: (AtomId, AtomId),
    phi: f64,
) -> Result<GateProtocol> {
    check_braided(layout, pair.0, pair.1)?;
    let (a, b) = pair;
    let ia = layout.atom_index(a)?;
    let ib = layout.atom_index(b)?;
    let omega_a = layout.df_nm(2)?;
    let omega_b0 = layout.df_nm(1)?;
    let spec_a = specs
        .iter()
        .find(|s| s.atom_id == a)
        .ok_or(Error::UnknownAtom(a))?;
    let resonant = omega_a + spec_a.chi;
    if (resonant - omega_b0).abs() > 1e-6 * layout.omega0 {
        return Err(Error::ResonanceMismatch(format!(
            "χ of atom {a} misses the DF spacing by {:.3e}·ω₀",
            (resonant - omega_b0).abs() / layout.omega0
        )));
    }
    let g_nominal = layout.two_frequency_rate(a, b, resonant, omega_b0, PairRate::Exchange)?;
    let delta = czphi_detuning(phi, g_nominal.abs())?;
    let omega_b = omega_b0 + delta;
    // coupling at the detuned operating point
    let g_eff = layout.two_frequency_rate(a, b, resonant, omega_b, PairRate::Exchange)?;
    let g_prime = (2.0 * g_eff * g_eff + 0.25 * delta * delta).sqrt();
    let duration = std::f64::consts::PI / g_prime;
    let frequencies = parked_frequencies(layout, &[(ia, omega_a), (ib, omega_b)])?;
    Ok(GateProtocol {
        kind: GateKind::CzPhi(phi),
        targets: vec![a, b],
        frequencies,
        duration,
    })
}

/// Where within [ω_DF,n2, ω_DF,n3] the individual decay comes closest to the
/// published Γ₀ = 1.36γ; returns (ω_decay, measured Γ₀).
pub fn decay_operating_point(layout: &CouplingLayout, gamma: f64) -> Result<(f64, f64)> {
    let lo = layout.df_nm(2)?;
    let hi = layout.df_nm(3)?;
    let target = 1.36 * gamma;
    let probe_atom = layout.atoms[0].id;
    let mut best = (lo, f64::INFINITY, 0.0);
    for i in 1..2000 {
        let w = lo + (hi - lo) * i as f64 / 2000.0;
        let g = layout.individual_decay(probe_atom, w)?;
        let miss = (g - target).abs();
        if miss < best.1 {
            best = (w, miss, g);
        }
    }
    Ok((best.0, best.2))
}

/// Controlled decay: park one atom at ω_decay for `duration`; everyone else
/// stays at detuned DF frequencies.
pub fn decay_protocol(
    layout: &CouplingLayout,
    atom: AtomId,
    omega_decay: f64,
    duration: f64,
) -> Result<GateProtocol> {
    let lo = layout.df_nm(2)?;
    let hi = layout.df_nm(3)?;
    if !(omega_decay >= lo.min(hi) && omega_decay <= lo.max(hi)) {
        return Err(Error::InvalidArgument("ω_decay outside the [ω_DF,n2, ω_DF,n3] operating window".to_string()));
    }
    if duration < 0.0 {
        return Err(Error::InvalidArgument("negative duration".into()));
    }
    let idx = layout.atom_index(atom)?;
    let frequencies = parked_frequencies(layout, &[(idx, omega_decay)])?;
    Ok(GateProtocol {
        kind: GateKind::Decay { duration },
        targets: vec![atom],
        frequencies,
        duration,
    })
}

// ---------------------------------------------------------------------------
// Choi matrices and fidelities
// ---------------------------------------------------------------------------

/// Choi state of a two-qubit channel, trace-normalized; leakage out of the
/// computational subspace shows up as a trace deficit.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    pub mat: CMat,
}

impl ChoiMatrix {
    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn validate(&self) -> Result<()> {
        if self.mat.hermiticity_defect() > 1e-8 {
            return Err(Error::InvalidState("Choi matrix not Hermitian".into()));
        }
        let min_eig = self.mat.min_eigenvalue_hermitian();
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!(
                "Choi matrix not PSD: min eigenvalue {min_eig:.2e}"
            )));
        }
        Ok(())
    }
}

/// Choi state of an ideal two-qubit unitary.
pub fn ideal_choi(u: &CMat) -> ChoiMatrix {
    let mut psi = vec![C64::new(0.0, 0.0); 16];
    for n in 0..4 {
        for m in 0..4 {
            psi[n * 4 + m] = u[(m, n)] * C64::new(0.5, 0.0);
        }
    }
    let mut mat = CMat::zeros(16, 16);
    for r in 0..16 {
        for c in 0..16 {
            mat[(r, c)] = psi[r] * psi[c].conj();
        }
    }
    ChoiMatrix { mat }
}

/// Run two-qubit process tomography of a protocol through the full
/// three-level engine: all 16 computational matrix units are propagated, the
/// outputs projected back onto the computational subspace (no
/// renormalization), and assembled into Φ = (1/4) Σ |n⟩⟨m| ⊗ E(|n⟩⟨m|).
pub fn choi_of_protocol(
    layout: &CouplingLayout,
    specs: &[AtomSpec],
    protocol: &GateProtocol,
    engine: &Engine,
) -> Result<ChoiMatrix> {
    if protocol.targets.len() != 2 {
        return Err(Error::InvalidArgument("tomography needs a two-atom protocol".into()));
    }
    let t_end = protocol.duration;
    let n = layout.n_atoms();
    let mut builder = ScheduleBuilder::new(&protocol.frequencies, layout.default_omega_ref());
    builder.window(t_end, &[]);
    builder.rz_layer(vec![0.0; n]);
    let schedule = builder.finish();
    let _ = specs;
    choi_of_schedule(
        layout,
        &schedule,
        (protocol.targets[0], protocol.targets[1]),
        t_end,
        engine,
    )
}

/// Tomography of an arbitrary schedule acting on two target atoms.
pub fn choi_of_schedule(
    layout: &CouplingLayout,
    schedule: &crate::schedule::FrequencySchedule,
    targets: (AtomId, AtomId),
    t_end: f64,
    engine: &Engine,
) -> Result<ChoiMatrix> {
    let n = layout.n_atoms();
    let ia = layout.atom_index(targets.0)?;
    let ib = layout.atom_index(targets.1)?;
    let full_dim = 3usize.pow(n as u32);
    let basis = SectorBasis::restricted(n, 2);

    // computational |q_a q_b⟩ with every other atom in |0⟩
    let comp_index = |qa: usize, qb: usize| -> usize {
        let mut idx = 0usize;
        for at in 0..n {
            let l = if at == ia {
                qa
            } else if at == ib {
                qb
            } else {
                0
            };
            idx = idx * 3 + l;
        }
        idx
    };

    let mut choi = CMat::zeros(16, 16);
    for n_in in 0..4 {
        for m_in in 0..4 {
            let mut unit = CMat::zeros(full_dim, full_dim);
            unit[(comp_index(n_in / 2, n_in % 2), comp_index(m_in / 2, m_in % 2))] =
                C64::new(1.0, 0.0);
            let (samples, _, _) = if t_end > 0.0 {
                engine.propagate(&unit, &basis, schedule, (0.0, t_end), &[t_end])?
            } else {
                let small = {
                    let rho_like =
                        crate::lindblad::DensityMatrix { n_atoms: n, mat: unit.clone() };
                    let mut sm = CMat::zeros(basis.dim(), basis.dim());
                    for (pr, &r) in basis.states.iter().enumerate() {
                        for (pc, &c) in basis.states.iter().enumerate() {
                            sm[(pr, pc)] = rho_like.mat[(r, c)];
                        }
                    }
                    sm
                };
                (vec![small], vec![0.0; n], vec![0.0])
            };
            let out = &samples[samples.len() - 1];
            for n_out in 0..4 {
                for m_out in 0..4 {
                    let r = basis.pos(comp_index(n_out / 2, n_out % 2)).unwrap();
                    let c = basis.pos(comp_index(m_out / 2, m_out % 2)).unwrap();
                    choi[(n_in * 4 + n_out, m_in * 4 + m_out)] =
                        out[(r, c)] * C64::new(0.25, 0.0);
                }
            }
        }
    }
    Ok(ChoiMatrix { mat: choi })
}

/// Uhlmann fidelity of two Choi states: [tr √(√Φ Φ₀ √Φ)]².
pub fn process_fidelity(choi: &ChoiMatrix, choi_ref: &ChoiMatrix) -> Result<f64> {
    choi.validate()?;
    choi_ref.validate()?;
    let a = sqrt_psd(&choi.mat, 1e-8);
    let m = a.mul(&choi_ref.mat).mul(&a);
    let (vals, _) = eigh(&m);
    let s: f64 = vals.iter().map(|&l| if l > 0.0 { l.sqrt() } else { 0.0 }).sum();
    Ok(s * s)
}

/// Average gate fidelity from process fidelity: (dF + 1)/(d + 1).
pub fn average_gate_fidelity(f_process: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0 + 1e-9).contains(&f_process) || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need F ∈ [0,1] and d ≥ 2, got F = {f_process}, d = {d}"
        )));
    }
    Ok((d as f64 * f_process + 1.0) / (d as f64 + 1.0))
}

/// Fidelity against a pure reference Choi after optimizing single-qubit Z
/// phases on both sides of the channel; returns (optimized, raw).
pub fn gauge_optimized_fidelity(choi: &ChoiMatrix, ideal_u: &CMat) -> (f64, f64) {
    let mut psi = vec![C64::new(0.0, 0.0); 16];
    for n in 0..4 {
        for m in 0..4 {
            psi[n * 4 + m] = ideal_u[(m, n)] * C64::new(0.5, 0.0);
        }
    }
    // F(θ) = ⟨ψ| U(θ) Φ U(θ)† |ψ⟩ with U diagonal phases
    // α·(input qubit bits) + β·(output qubit bits).
    let eval = |th: &[f64; 4], choi: &CMat| -> f64 {
        let mut fac = [C64::new(0.0, 0.0); 16];
        for (idx, f) in fac.iter_mut().enumerate() {
            let (n, m) = (idx / 4, idx % 4);
            let phase = th[0] * (n / 2) as f64
                + th[1] * (n % 2) as f64
                + th[2] * (m / 2) as f64
                + th[3] * (m % 2) as f64;
            *f = C64::new(0.0, phase).exp();
        }
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..16 {
            let pr = (psi[r] * fac[r]).conj();
            for c in 0..16 {
                acc += pr * choi[(r, c)] * psi[c] * fac[c];
            }
        }
        acc.re
    };
    let raw = eval(&[0.0; 4], &choi.mat);
    let mut th = [0.0f64; 4];
    let mut best = raw;
    for _sweep in 0..4 {
        for k in 0..4 {
            // coarse scan then golden refinement on a 2π-periodic coordinate
            let mut local_best = (th[k], best);
            for i in 0..32 {
                let cand = i as f64 / 32.0 * 2.0 * std::f64::consts::PI;
                let mut t2 = th;
                t2[k] = cand;
                let v = eval(&t2, &choi.mat);
                if v > local_best.1 {
                    local_best = (cand, v);
                }
            }
            let (mut lo, mut hi) =
                (local_best.0 - 0.25, local_best.0 + 0.25);
            for _ in 0..40 {
                let m1 = lo + 0.382 * (hi - lo);
                let m2 = lo + 0.618 * (hi - lo);
                let (mut a, mut b) = (th, th);
                a[k] = m1;
                b[k] = m2;
                if eval(&a, &choi.mat) >= eval(&b, &choi.mat) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            th[k] = 0.5 * (lo + hi);
            let mut t2 = th;
            t2[k] = th[k];
            best = eval(&t2, &choi.mat);
        }
    }
    (best.max(raw), raw)
}

// ---------------------------------------------------------------------------
// Fidelity sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepGate {
    ISwap,
    Cz,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub gamma_ex_over_g: f64,
    pub gamma_phi_over_g: f64,
    pub f_process: f64,
    pub f_process_raw: f64,
    pub f_average: f64,
}

/// Least-squares plane F ≈ baseline - slope_ex·(Γ_ex/g) - slope_phi·(Γ_φ/g).
#[derive(Debug, Clone, Copy)]
pub struct FidelityFit {
    pub baseline: f64,
    pub slope_ex: f64,
    pub slope_phi: f64,
    pub residual: f64,
    pub nonlinear: bool,
}

pub fn fit_fidelity_plane(points: &[SweepPoint]) -> FidelityFit {
    // normal equations for (c0, a, b) in F = c0 - a x - b y
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for p in points {
        let row = [1.0, -p.gamma_ex_over_g, -p.gamma_phi_over_g];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * p.f_process;
        }
    }
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let solve_col = |col: usize| {
        let mut mc = m;
        for i in 0..3 {
            mc[i][col] = rhs[i];
        }
        det(&mc) / d
    };
    let (c0, a, b) = (solve_col(0), solve_col(1), solve_col(2));
    let residual = points
        .iter()
        .map(|p| {
            (p.f_process - (c0 - a * p.gamma_ex_over_g - b * p.gamma_phi_over_g)).abs()
        })
        .fold(0.0f64, f64::max);
    FidelityFit { baseline: c0, slope_ex: a, slope_phi: b, residual, nonlinear: residual > 1e-3 }
}

/// Default sweep grid Γ/g ∈ {0, 0.002, …, 0.02}.
pub fn default_noise_grid() -> Vec<f64> {
    (0..=10).map(|i| 0.002 * i as f64).collect()
}

/// Process-fidelity sweep of an iSWAP or CZ over a grid of Γ_ex/g, Γ_φ/g,
/// with the least-squares plane fit.
pub fn fidelity_sweep(
    gate: SweepGate,
    layout: &CouplingLayout,
    ex_grid: &[f64],
    phi_grid: &[f64],
) -> Result<(Vec<SweepPoint>, FidelityFit)> {
    if ex_grid.is_empty() || phi_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    let tasks: Vec<(f64, f64)> = ex_grid
        .iter()
        .flat_map(|&x| phi_grid.iter().map(move |&y| (x, y)))
        .collect();
    let points: Result<Vec<SweepPoint>> = tasks
        .par_iter()
        .map(|&(x, y)| fidelity_point(gate, layout, x, y))
        .collect();
    let points = points?;
    let fit = fit_fidelity_plane(&points);
    Ok((points, fit))
}

/// One sweep point: noise rates set to (x·g, y·g) for the gate's coupling g.
pub fn fidelity_point(
    gate: SweepGate,
    layout: &CouplingLayout,
    x: f64,
    y: f64,
) -> Result<SweepPoint> {
    let (a, b) = (layout.atoms[0].id, layout.atoms[1].id);
    let base_specs = AtomSpec::noiseless_for(layout);
    let g = match gate {
        SweepGate::ISwap => layout.exchange_coupling(a, b, layout.df_nm(3)?)?,
        SweepGate::Cz => {
            let resonant = layout.df_nm(2)? + base_specs[0].chi;
            layout.two_frequency_rate(a, b, resonant, layout.df_nm(1)?, PairRate::Exchange)?
        }
    }
    .abs();
    let specs: Vec<AtomSpec> = base_specs
        .iter()
        .map(|s| s.with_noise(x * g, y * g))
        .collect();
    let (protocol, ideal) = match gate {
        SweepGate::ISwap => (
            rxy_protocol(layout, (a, b), std::f64::consts::FRAC_PI_2)?,
            oracle::ideal_iswap(),
        ),
        SweepGate::Cz => (cz_protocol(layout, &specs, (a, b))?, oracle::ideal_cz()),
    };
    let engine = Engine::new(layout, &specs)?;
    let choi = choi_of_protocol(layout, &specs, &protocol, &engine)?;
    let (f_opt, f_raw) = gauge_optimized_fidelity(&choi, &ideal);
    Ok(SweepPoint {
        gamma_ex_over_g: x,
        gamma_phi_over_g: y,
        f_process: f_opt,
        f_process_raw: f_raw,
        f_average: average_gate_fidelity(f_opt.min(1.0), 4)?,
    })
}

/// CZ_φ fidelity over (φ, Γ_ex) at fixed Γ_φ; the detuning-induced waveguide
/// decay of the parked atom enters automatically through the engine.
#[derive(Debug, Clone, Copy)]
pub struct CzPhiScanPoint {
    pub phi: f64,
    pub gamma_ex: f64,
    pub f_process: f64,
    pub f_average: f64,
}

pub fn czphi_fidelity_scan(
    layout: &CouplingLayout,
    phi_grid: &[f64],
    gamma_ex_grid: &[f64],
    gamma_phi: f64,
) -> Result<Vec<CzPhiScanPoint>> {
    let (a, b) = (layout.atoms[0].id, layout.atoms[1].id);
    let tasks: Vec<(f64, f64)> = phi_grid
        .iter()
        .flat_map(|&p| gamma_ex_grid.iter().map(move |&x| (p, x)))
        .collect();
    tasks
        .par_iter()
        .map(|&(phi, gx)| {
            let specs: Vec<AtomSpec> = AtomSpec::noiseless_for(layout)
                .iter()
                .map(|s| s.with_noise(gx, gamma_phi))
                .collect();
            let protocol = czphi_protocol(layout, &specs, (a, b), phi)?;
            let engine = Engine::new(layout, &specs)?;
            let choi = choi_of_protocol(layout, &specs, &protocol, &engine)?;
            let (f_opt, _) = gauge_optimized_fidelity(&choi, &oracle::ideal_czphi(phi));
            Ok(CzPhiScanPoint {
                phi,
                gamma_ex: gx,
                f_process: f_opt,
                f_average: average_gate_fidelity(f_opt.min(1.0), 4)?,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Addressing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RequestKind {
    Rxy,
    Cz,
}

#[derive(Debug, Clone, Copy)]
pub struct GateRequest {
    pub kind: RequestKind,
    pub pair: (AtomId, AtomId),
}

/// Idle frequencies of the first `n` chain atoms: odd sites fixed at the
/// second/fifth DF labels by (id mod 4), even sites at the third.
pub fn chain_idle_frequencies(layout: &CouplingLayout, n: usize) -> Result<Vec<f64>> {
    (1..=n)
        .map(|id| {
            if id % 2 == 1 {
                if id % 4 == 1 {
                    layout.df_nm(2)
                } else {
                    layout.df_nm(5)
                }
            } else {
                layout.df_nm(3)
            }
        })
        .collect()
}

fn chain_fixed_freq(layout: &CouplingLayout, odd_id: AtomId) -> Result<f64> {
    if odd_id % 4 == 1 {
        layout.df_nm(2)
    } else {
        layout.df_nm(5)
    }
}

/// For an RXY between chain sites (0-based indices): which atom index moves,
/// to what frequency, and the coupling there.
pub fn chain_rxy_assignment(
    layout: &CouplingLayout,
    a: usize,
    b: usize,
) -> Result<(usize, f64, f64)> {
    let (ida, idb) = (a + 1, b + 1);
    let (odd, even) = if ida % 2 == 1 { (ida, idb) } else { (idb, ida) };
    let freq = chain_fixed_freq(layout, odd)?;
    let g = layout.exchange_coupling(ida, idb, freq)?;
    Ok((even - 1, freq, g))
}

/// For a CZ_φ between chain sites: the even atom parks at the odd partner's
/// frequency plus its anharmonicity (one comb spacing down) plus Δ(φ);
/// returns (tuned atom index, frequency, gate duration).
pub fn chain_czphi_assignment(
    layout: &CouplingLayout,
    a: usize,
    b: usize,
    phi: f64,
) -> Result<(usize, f64, f64)> {
    let (ida, idb) = (a + 1, b + 1);
    let (odd, even) = if ida % 2 == 1 { (ida, idb) } else { (idb, ida) };
    let fixed = chain_fixed_freq(layout, odd)?;
    let chi = layout
        .chi_hint
        .get(odd - 1)
        .copied()
        .ok_or_else(|| Error::InvalidArgument("layout has no χ hint".into()))?;
    let resonant = fixed + chi;
    let g_nominal = layout
        .two_frequency_rate(ida, idb, resonant, resonant, PairRate::Exchange)?
        .abs();
    let delta = czphi_detuning(phi, g_nominal)?;
    let freq = resonant + delta;
    let g_eff = layout.two_frequency_rate(ida, idb, resonant, freq, PairRate::Exchange)?;
    let g_prime = (2.0 * g_eff * g_eff + 0.25 * delta * delta).sqrt();
    Ok((even - 1, freq, std::f64::consts::PI / g_prime))
}

/// Frequency assignment for simultaneous nearest-neighbor gates on the chain
/// (one frequency per atom, layout order).
pub fn chain_addressing(
    layout: &CouplingLayout,
    n_sites: usize,
    requests: &[GateRequest],
) -> Result<Vec<f64>> {
    let mut freqs = chain_idle_frequencies(layout, n_sites)?;
    let mut used = vec![false; n_sites + 1];
    for r in requests {
        let (a, b) = r.pair;
        if a.abs_diff(b) != 1 {
            return Err(Error::AddressingConflict(format!(
                "({a},{b}) is not a nearest-neighbor pair"
            )));
        }
        for id in [a, b] {
            if id == 0 || id > n_sites {
                return Err(Error::UnknownAtom(id));
            }
            if used[id] {
                return Err(Error::AddressingConflict(format!("atom {id} in two gates")));
            }
            used[id] = true;
        }
        let (odd, even) = if a % 2 == 1 { (a, b) } else { (b, a) };
        let fixed = chain_fixed_freq(layout, odd)?;
        freqs[even - 1] = match r.kind {
            RequestKind::Rxy => fixed,
            RequestKind::Cz => {
                let chi = layout.chi_hint[odd - 1];
                fixed + chi
            }
        };
    }
    Ok(freqs)
}

/// Idle frequencies of the grid: odd rows at the fifth DF label, even rows
/// alternating second/fourth (rows ≡ 0 mod 4) or seventh/ninth (rows ≡ 2
/// mod 4) by column parity; braided pairs are then always detuned and off
/// any CZ resonance.
pub fn grid_idle_frequencies(layout: &CouplingLayout, rows: usize, cols: usize) -> Result<Vec<f64>> {
    let mut freqs = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let m = if r % 2 == 1 {
                5
            } else if r % 4 == 0 {
                if c % 2 == 0 {
                    2
                } else {
                    4
                }
            } else if c % 2 == 0 {
                7
            } else {
                9
            };
            freqs.push(layout.df_nm(m)?);
        }
    }
    Ok(freqs)
}

/// Frequency assignment for gates between braided grid neighbors: the
/// odd-row atom of each pair retunes onto (RXY) or one comb step below (CZφ)
/// its partner's frequency.
pub fn grid_addressing(
    layout: &CouplingLayout,
    rows: usize,
    cols: usize,
    requests: &[GateRequest],
) -> Result<Vec<f64>> {
    let mut freqs = grid_idle_frequencies(layout, rows, cols)?;
    let mut used = vec![false; rows * cols + 1];
    let row_of = |id: AtomId| (id - 1) / cols;
    let col_of = |id: AtomId| (id - 1) % cols;
    for r in requests {
        let (a, b) = r.pair;
        for id in [a, b] {
            if id == 0 || id > rows * cols {
                return Err(Error::UnknownAtom(id));
            }
            if used[id] {
                return Err(Error::AddressingConflict(format!("atom {id} in two gates")));
            }
            used[id] = true;
        }
        let (ra, rb) = (row_of(a), row_of(b));
        if ra.abs_diff(rb) != 1 {
            return Err(Error::AddressingConflict(format!(
                "({a},{b}) are not braided grid neighbors"
            )));
        }
        let (tuned, fixed) = if ra % 2 == 1 { (a, b) } else { (b, a) };
        let (ct, cf) = (col_of(tuned), col_of(fixed));
        if !(cf == ct || cf == ct + 1) {
            return Err(Error::AddressingConflict(format!(
                "({a},{b}) are not braided grid neighbors"
            )));
        }
        let fixed_freq = freqs[fixed - 1];
        freqs[tuned - 1] = match r.kind {
            RequestKind::Rxy => fixed_freq,
            RequestKind::Cz => {
                let chi = layout.chi_hint[fixed - 1];
                fixed_freq + chi
            }
        };
    }
    Ok(freqs)
}
