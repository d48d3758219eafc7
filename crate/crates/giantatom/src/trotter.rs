//! Trotterized simulation of the dissipative XXZ chain on the giant-atom
//! processor: model decomposition, schedule compilation, execution, and
//! error scans against the exact solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates;
use crate::geometry::CouplingLayout;
use crate::lindblad::{DensityMatrix, Engine, GeneratorOptions, StepControl};
use crate::oracle;
use crate::schedule::{AtomSpec, FrequencySchedule, ScheduleBuilder};
use crate::units;

/// Dissipative XXZ chain: H = Σ J(XᵢXᵢ₊₁+YᵢYᵢ₊₁) + J_z ZᵢZᵢ₊₁ with a
/// lowering dissipator √Γ σ⁻ on the last site. Couplings in rad/µs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct XXZModel {
    pub n_sites: usize,
    pub j: f64,
    pub j_z: f64,
    pub gamma: f64,
}

impl XXZModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 || !self.n_sites.is_multiple_of(2) {
            return Err(Error::InvalidArgument(
                "the pairing split needs an even number of sites ≥ 2".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArgument("Γ must be ≥ 0".into()));
        }
        Ok(())
    }
}

/// Two-site gate within a Trotter step; sites 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGate {
    pub a: usize,
    pub b: usize,
    /// For XY slots: exp(-iθ(σ⁺σ⁻+σ⁻σ⁺)); for ZZ slots: exp(-iθ Z⊗Z).
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySlot {
    pub site: usize,
    /// Simulated-model duration t/l over which exp(L₅·) acts.
    pub sim_duration: f64,
}

/// One Trotter step in the order H₁, H₂, H₃, H₄, L₅.
#[derive(Debug, Clone, Default)]
pub struct TrotterStep {
    pub rxy_odd: Vec<PairGate>,
    pub zz_odd: Vec<PairGate>,
    pub rxy_even: Vec<PairGate>,
    pub zz_even: Vec<PairGate>,
    pub decay: Option<DecaySlot>,
}

impl TrotterStep {
    pub fn is_empty(&self) -> bool {
        self.rxy_odd.is_empty()
            && self.zz_odd.is_empty()
            && self.rxy_even.is_empty()
            && self.zz_even.is_empty()
            && self.decay.is_none()
    }

    /// Count of two-qubit gate instances in this step.
    pub fn two_qubit_gate_count(&self) -> usize {
        self.rxy_odd.len() + self.zz_odd.len() + self.rxy_even.len() + self.zz_even.len()
    }
}

/// First-order product-formula plan: the same step applied l times.
#[derive(Debug, Clone)]
pub struct TrotterPlan {
    pub model: XXZModel,
    pub t_total: f64,
    pub l: usize,
    pub step: TrotterStep,
}

/// Split exp(Lt) into [exp(L₁t/l)…exp(L₅t/l)]^l. The XY angle per step is
/// 2J·t/l and the ZZ angle J_z·t/l, both as exact exponent angles (the
/// published label carries the opposite sign purely by rotation convention).
pub fn decompose(model: &XXZModel, t: f64, l: usize) -> Result<TrotterPlan> {
    model.validate()?;
    if !(t > 0.0) || l < 1 {
        return Err(Error::InvalidArgument("need t > 0 and l ≥ 1".into()));
    }
    let tau = t / l as f64;
    let theta = 2.0 * model.j * tau;
    let phi0 = model.j_z * tau;
    let n = model.n_sites;
    let mut step = TrotterStep::default();
    if theta != 0.0 {
        for k in 0..n / 2 {
            step.rxy_odd.push(PairGate { a: 2 * k, b: 2 * k + 1, angle: theta });
        }
        for k in 0..n / 2 - 1 {
            step.rxy_even.push(PairGate { a: 2 * k + 1, b: 2 * k + 2, angle: theta });
        }
    }
    if phi0 != 0.0 {
        for k in 0..n / 2 {
            step.zz_odd.push(PairGate { a: 2 * k, b: 2 * k + 1, angle: phi0 });
        }
        for k in 0..n / 2 - 1 {
            step.zz_even.push(PairGate { a: 2 * k + 1, b: 2 * k + 2, angle: phi0 });
        }
    }
    if model.gamma > 0.0 {
        step.decay = Some(DecaySlot { site: n - 1, sim_duration: tau });
    }
    Ok(TrotterPlan { model: *model, t_total: t, l, step })
}

// ---------------------------------------------------------------------------
// Hardware compilation
// ---------------------------------------------------------------------------

/// Hardware parameters of the chain processor.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HardwareParams {
    /// Per-point waveguide coupling γ, rad/µs.
    pub gamma: f64,
    /// Extra decay Γ_ex, 1/µs.
    pub gamma_ex: f64,
    /// Dephasing Γ_φ, 1/µs.
    pub gamma_phi: f64,
    /// Comb period ω₀, rad/µs.
    pub omega0: f64,
    /// Single-qubit gate slot, µs.
    pub t3: f64,
    /// Model R_z slots as zero-duration frame updates instead of t₃ idles.
    pub rz_virtual_only: bool,
}

impl Default for HardwareParams {
    fn default() -> Self {
        Self {
            gamma: units::default_gamma(),
            gamma_ex: units::DEFAULT_GAMMA_EX,
            gamma_phi: units::DEFAULT_GAMMA_PHI,
            omega0: units::default_omega0(),
            t3: units::DEFAULT_T3,
            rz_virtual_only: false,
        }
    }
}

impl HardwareParams {
    pub fn noiseless() -> Self {
        Self { gamma_ex: 0.0, gamma_phi: 0.0, ..Default::default() }
    }
}

/// Timing constants of one compiled Trotter step.
#[derive(Debug, Clone, Default)]
pub struct StepTiming {
    /// Durations of the XY slot per odd pair (t₁) and even pair (t′₁).
    pub t1: f64,
    pub t1_prime: f64,
    /// Stagger offset t₀ = t₁ - t′₁ (clamped at 0 when t′₁ ≥ t₁).
    pub t0: f64,
    /// CZφ slot durations for odd and even pairs, and their offset t′₀.
    pub t2: f64,
    pub t2_prime: f64,
    pub t0_prime: f64,
    /// Single-qubit slot length actually used.
    pub t3: f64,
    /// Decay-slot park time t₄ = Γ t /(Γ₀ l).
    pub t4: f64,
    /// ω_decay and the measured Γ₀ at that point.
    pub omega_decay: f64,
    pub gamma0: f64,
    /// Wall-clock duration of the whole step.
    pub step_duration: f64,
    /// Number of two-qubit gate slots (time windows) in the step.
    pub two_qubit_slots: usize,
}

/// A Trotter plan lowered onto the chain hardware.
#[derive(Debug, Clone)]
pub struct CompiledSchedule {
    pub schedule: FrequencySchedule,
    pub timing: StepTiming,
    pub total_duration: f64,
    /// Sample instants at the Trotter-step boundaries.
    pub boundaries: Vec<f64>,
    pub idle_freqs: Vec<f64>,
}

/// Lower a plan onto the chain layout: addressing per the nearest-neighbor
/// protocol, XY/CZφ slots staggered to end together, R_z layers as t₃ idles
/// with ledger updates, and a decay park on the last site.
pub fn compile(
    plan: &TrotterPlan,
    layout: &CouplingLayout,
    hw: &HardwareParams,
) -> Result<CompiledSchedule> {
    let n = plan.model.n_sites;
    if layout.n_atoms() < n {
        return Err(Error::Capacity(format!(
            "chain layout has {} atoms, model needs {n}",
            layout.n_atoms()
        )));
    }
    let idle = gates::chain_idle_frequencies(layout, n)?;
    let omega_ref = layout.default_omega_ref();
    let t3 = if hw.rz_virtual_only { 0.0 } else { hw.t3 };
    let (omega_decay, gamma0) = gates::decay_operating_point(layout, hw.gamma)?;

    let mut timing = StepTiming { t3, omega_decay, gamma0, ..Default::default() };
    let mut state = CompilerState {
        builder: ScheduleBuilder::new(&idle, omega_ref),
        phase: vec![0.0; layout.n_atoms()],
        idle: idle.clone(),
        omega_ref,
    };
    let mut boundaries = vec![0.0];

    for _ in 0..plan.l {
        compile_step(plan, layout, &mut state, t3, omega_decay, gamma0, &mut timing)?;
        boundaries.push(state.builder.cursor());
    }
    timing.step_duration = if plan.l > 0 { boundaries[1] } else { 0.0 };
    let total_duration = state.builder.cursor();
    let schedule = state.builder.finish();
    Ok(CompiledSchedule { schedule, timing, total_duration, boundaries, idle_freqs: idle })
}

/// Builder plus the compiler's record of each atom's accumulated detuning
/// phase (the state's |1⟩ amplitude carries e^{-i·phase} in the ω_ref
/// frame); emitted windows and Z gates keep it current.
struct CompilerState {
    builder: ScheduleBuilder,
    phase: Vec<f64>,
    idle: Vec<f64>,
    omega_ref: f64,
}

impl CompilerState {
    fn window(&mut self, duration: f64, assignments: &[(usize, f64)]) {
        if duration <= 0.0 {
            return;
        }
        for (a, ph) in self.phase.iter_mut().enumerate() {
            let omega = assignments
                .iter()
                .find(|(idx, _)| *idx == a)
                .map(|(_, w)| *w)
                .unwrap_or(self.idle[a]);
            *ph += (omega - self.omega_ref) * duration;
        }
        self.builder.window(duration, assignments);
    }

    /// Apply frame-alignment Z gates: e^{+i·extra} on |1⟩ advances the
    /// bookkeeping phase by -extra.
    fn rz_align(&mut self, extras: Vec<f64>) {
        if extras.iter().all(|&e| e == 0.0) {
            return;
        }
        for (ph, e) in self.phase.iter_mut().zip(&extras) {
            *ph -= e;
        }
        self.builder.rz_gates(extras);
    }

    /// Apply the deliberate Z halves of an RZZ decomposition. These are part
    /// of the realized gate (CZφ plus two Z's equals the ZZ rotation up to a
    /// global phase), so the frame record stays put.
    fn rz_deliberate(&mut self, extras: Vec<f64>) {
        if extras.iter().all(|&e| e == 0.0) {
            return;
        }
        self.builder.rz_gates(extras);
    }
}

#[allow(clippy::too_many_arguments)]
fn compile_step(
    plan: &TrotterPlan,
    layout: &CouplingLayout,
    state: &mut CompilerState,
    t3: f64,
    omega_decay: f64,
    gamma0: f64,
    timing: &mut StepTiming,
) -> Result<()> {
    let step = &plan.step;
    timing.two_qubit_slots = 0;

    if !step.rxy_odd.is_empty() {
        state.window(t3, &[]);
        let slots = xy_slot_assignments(layout, &step.rxy_odd)?;
        timing.t1 = slots.iter().map(|s| s.duration).fold(0.0, f64::max);
        timing.t1_prime = slots.iter().map(|s| s.duration).fold(f64::INFINITY, f64::min);
        timing.t0 = timing.t1 - timing.t1_prime;
        emit_xy_layer(state, &slots);
        timing.two_qubit_slots += slots.len();
    }
    if !step.zz_odd.is_empty() {
        state.window(t3, &[]);
        state.rz_deliberate(zz_extra_phases(&step.zz_odd, layout.n_atoms()));
        let slots = zz_slot_assignments(layout, &step.zz_odd)?;
        timing.t2 = slots.iter().map(|s| s.duration).fold(0.0, f64::max);
        timing.t2_prime = slots.iter().map(|s| s.duration).fold(f64::INFINITY, f64::min);
        timing.t0_prime = timing.t2 - timing.t2_prime;
        emit_aligned_slots(state, &slots);
        timing.two_qubit_slots += slots.len();
    }
    if !step.rxy_even.is_empty() {
        state.window(t3, &[]);
        let slots = xy_slot_assignments(layout, &step.rxy_even)?;
        emit_xy_layer(state, &slots);
        timing.two_qubit_slots += slots.len();
    }
    if !step.zz_even.is_empty() {
        state.window(t3, &[]);
        state.rz_deliberate(zz_extra_phases(&step.zz_even, layout.n_atoms()));
        let slots = zz_slot_assignments(layout, &step.zz_even)?;
        emit_aligned_slots(state, &slots);
        timing.two_qubit_slots += slots.len();
    }
    if let Some(decay) = step.decay {
        let t4 = plan.model.gamma * decay.sim_duration / gamma0;
        timing.t4 = t4;
        state.window(t4, &[(decay.site, omega_decay)]);
    }
    Ok(())
}

/// An XY layer needs the pair's accumulated phases equal when each gate
/// starts (the exchange axis rides on the phase difference), so a physical
/// Z on the tuned atom closes the gap; spectators are left untouched and
/// their residual couplings keep averaging out.
fn emit_xy_layer(state: &mut CompilerState, slots: &[GateSlot]) {
    let t_max = slots.iter().map(|s| s.duration).fold(0.0, f64::max);
    let mut extras = vec![0.0; state.phase.len()];
    for s in slots {
        let offset = t_max - s.duration;
        let (tuned, fixed) = (s.tuned, s.fixed);
        // drift between the layer time and the gate's staggered start
        let drift = (state.idle[tuned] - state.idle[fixed]) * offset;
        extras[tuned] = (state.phase[tuned] - state.phase[fixed]) + drift;
    }
    state.rz_align(extras);
    emit_aligned_slots(state, slots);
}

struct GateSlot {
    /// atoms retuned during the slot (atom index, frequency)
    assignments: Vec<(usize, f64)>,
    duration: f64,
    tuned: usize,
    fixed: usize,
}

/// RXY gates: retune the even-site atom of each pair onto its partner's
/// fixed frequency; duration θ/g per the g-sign rule.
fn xy_slot_assignments(layout: &CouplingLayout, gates_: &[PairGate]) -> Result<Vec<GateSlot>> {
    gates_
        .iter()
        .map(|pg| {
            let (tuned, freq, g) = gates::chain_rxy_assignment(layout, pg.a, pg.b)?;
            let theta = wrap_angle(pg.angle);
            let duration = if g > 0.0 {
                theta / g
            } else {
                (std::f64::consts::TAU - theta) / g.abs()
            };
            let fixed = if tuned == pg.a { pg.b } else { pg.a };
            Ok(GateSlot { assignments: vec![(tuned, freq)], duration, tuned, fixed })
        })
        .collect()
}

/// ZZ gates as one CZφ with φ = -4·angle plus R_z corrections (already
/// scheduled in the preceding layer).
fn zz_slot_assignments(layout: &CouplingLayout, gates_: &[PairGate]) -> Result<Vec<GateSlot>> {
    gates_
        .iter()
        .map(|pg| {
            let phi = wrap_angle(-4.0 * pg.angle);
            let (tuned, freq, duration) = gates::chain_czphi_assignment(layout, pg.a, pg.b, phi)?;
            let fixed = if tuned == pg.a { pg.b } else { pg.a };
            Ok(GateSlot { assignments: vec![(tuned, freq)], duration, tuned, fixed })
        })
        .collect()
}

/// Emit simultaneous slots so that all gates end together: later-starting
/// (shorter) gates are delayed by the difference.
fn emit_aligned_slots(state: &mut CompilerState, slots: &[GateSlot]) {
    let t_max = slots.iter().map(|s| s.duration).fold(0.0, f64::max);
    if t_max <= 0.0 {
        return;
    }
    let mut marks: Vec<f64> = slots.iter().map(|s| t_max - s.duration).collect();
    marks.push(0.0);
    marks.push(t_max);
    marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * (1.0 + t_max));

    for w in marks.windows(2) {
        let (w0, w1) = (w[0], w[1]);
        let active: Vec<(usize, f64)> = slots
            .iter()
            .filter(|s| t_max - s.duration <= w0 + 1e-15 * (1.0 + t_max))
            .flat_map(|s| s.assignments.iter().copied())
            .collect();
        state.window(w1 - w0, &active);
    }
}

/// Reduce an angle into [0, 2π).
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut t = theta % tau;
    if t < 0.0 {
        t += tau;
    }
    t
}

/// Extra R_z phase (on |1⟩) per atom for the CZφ realization of the ZZ
/// layer: +2·angle on both members of each pair.
fn zz_extra_phases(gates_: &[PairGate], n_atoms: usize) -> Vec<f64> {
    let mut extras = vec![0.0; n_atoms];
    for pg in gates_ {
        extras[pg.a] += 2.0 * pg.angle;
        extras[pg.b] += 2.0 * pg.angle;
    }
    extras
}

// ---------------------------------------------------------------------------
// Execution and error scans
// ---------------------------------------------------------------------------

/// Populations of a hardware run sampled at the end of the final Trotter
/// step, one row per requested model time.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub times: Vec<f64>,
    /// rows[t][site] = n_site(t)
    pub populations: Vec<Vec<f64>>,
    pub leakage: Vec<Vec<f64>>,
    pub trace: Vec<f64>,
}

/// Run the Trotterized model on the chain engine. Each entry of `t_grid` is
/// simulated by a fresh l-step run with step t/l; the initial state is
/// σ₁⁺|Ω⟩ = |10…0⟩.
pub fn run_simulation(
    model: &XXZModel,
    t_grid: &[f64],
    l: usize,
    hw: &HardwareParams,
) -> Result<SimulationResult> {
    model.validate()?;
    if model.n_sites > 5 {
        return Err(Error::Capacity("hardware engine is limited to 5 sites".into()));
    }
    let layout =
        crate::geometry::preset_chain_with(model.n_sites, hw.gamma, hw.omega0)?;
    let specs: Vec<AtomSpec> = AtomSpec::defaults_for(&layout)
        .into_iter()
        .map(|s| s.with_noise(hw.gamma_ex, hw.gamma_phi))
        .collect();
    let engine = Engine::new(&layout, &specs)?
        .with_options(GeneratorOptions::default())
        .with_step(StepControl::default());

    let mut levels = vec![0u8; model.n_sites];
    levels[0] = 1;
    let rho0 = DensityMatrix::basis_state(&levels);

    let mut populations = Vec::with_capacity(t_grid.len());
    let mut leakage = Vec::with_capacity(t_grid.len());
    let mut trace = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t <= 0.0 {
            populations.push((0..model.n_sites).map(|s| rho0.population(s)).collect());
            leakage.push(vec![0.0; model.n_sites]);
            trace.push(1.0);
            continue;
        }
        let plan = decompose(model, t, l)?;
        let compiled = compile(&plan, &layout, hw)?;
        let t_end = compiled.total_duration;
        let traj = engine.evolve(&rho0, &compiled.schedule, (0.0, t_end), &[t_end])?;
        populations.push(traj.populations[0][..model.n_sites].to_vec());
        leakage.push(traj.leakage[0][..model.n_sites].to_vec());
        trace.push(traj.trace[0]);
    }
    Ok(SimulationResult { times: t_grid.to_vec(), populations, leakage, trace })
}

/// Simulation error Δn_k(t) of the hardware run against the exact solver,
/// for each Trotter-step count in `l_list`.
#[derive(Debug, Clone)]
pub struct ErrorScan {
    pub times: Vec<f64>,
    pub l_list: Vec<usize>,
    /// delta[l_idx][t_idx][site] = n_exact - n_sim
    pub delta: Vec<Vec<Vec<f64>>>,
    /// populations[l_idx][t_idx][site]
    pub populations: Vec<Vec<Vec<f64>>>,
    pub exact: Vec<Vec<f64>>,
    /// argmin over l of max_k |Δn_k| per time
    pub l_opt: Vec<usize>,
}

pub fn error_scan(
    model: &XXZModel,
    t_grid: &[f64],
    l_list: &[usize],
    hw: &HardwareParams,
) -> Result<ErrorScan> {
    let exact = oracle::exact_lindblad_populations(
        model.n_sites,
        model.j,
        model.j_z,
        model.gamma,
        t_grid,
    )?;
    let mut delta = Vec::with_capacity(l_list.len());
    let mut populations = Vec::with_capacity(l_list.len());
    for &l in l_list {
        let sim = run_simulation(model, t_grid, l, hw)?;
        let d: Vec<Vec<f64>> = sim
            .populations
            .iter()
            .zip(&exact)
            .map(|(s, e)| e.iter().zip(s).map(|(ev, sv)| ev - sv).collect())
            .collect();
        delta.push(d);
        populations.push(sim.populations);
    }
    let l_opt = (0..t_grid.len())
        .map(|ti| {
            let mut best = (0usize, f64::INFINITY);
            for (li, _) in l_list.iter().enumerate() {
                let worst = delta[li][ti]
                    .iter()
                    .map(|d| d.abs())
                    .fold(0.0f64, f64::max);
                if worst < best.1 {
                    best = (li, worst);
                }
            }
            l_list[best.0]
        })
        .collect();
    Ok(ErrorScan {
        times: t_grid.to_vec(),
        l_list: l_list.to_vec(),
        delta,
        populations,
        exact,
        l_opt,
    })
}
