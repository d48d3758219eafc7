//! Coupling-point layouts and the interference-mediated rates they produce.
//!
//! A giant atom couples to a waveguide at several discrete points. Summing
//! the emission phasors over those points gives a frequency-dependent
//! individual decay rate Γ_ind(ω), an exchange coupling g_jk(ω) between
//! atoms, and a collective decay rate Γ_coll,jk(ω):
//!
//! ```text
//! Γ_ind,k(ω)  = Σ_{n,m} √(γ_kn γ_km) cos φ_{kn,km}(ω)
//! g_jk(ω)     = Σ_{n,m} √(γ_jn γ_km)/2 · sin φ_{jn,km}(ω)
//! Γ_coll,jk(ω)= Σ_{n,m} √(γ_jn γ_km) cos φ_{jn,km}(ω)
//! ```
//!
//! with φ(ω) = 2π (ω/ω₀) · |Δx| the phase accumulated between coupling
//! points (positions in units of the spacing Δx, ω₀ = 2πv/Δx). Frequencies
//! where Γ_ind vanishes are decoherence-free (DF); braided atoms keep a
//! finite g there, which is what makes the gate set work.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub type AtomId = usize;
pub type WaveguideId = usize;

/// One connection of an atom to a waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    /// Position along the waveguide in units of Δx.
    pub position: f64,
    /// Coupling strength γ_kn in rad/µs.
    pub strength: f64,
}

/// All coupling points of one atom, per waveguide it touches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomGeometry {
    pub id: AtomId,
    /// waveguide id → points, positions strictly increasing.
    pub points: BTreeMap<WaveguideId, Vec<CouplingPoint>>,
}

/// Physical lengths, needed only for Markovianity estimates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveguideUnits {
    pub delta_x_m: f64,
    pub v_m_per_s: f64,
}

/// Which preset produced a layout, when any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PresetKind {
    TwoAtom,
    Chain,
    Grid { rows: usize, cols: usize },
}

/// A set of giant atoms on shared waveguides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingLayout {
    pub atoms: Vec<AtomGeometry>,
    pub waveguides: Vec<WaveguideId>,
    /// Comb period ω₀ = 2πv/Δx, rad/µs.
    pub omega0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<WaveguideUnits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetKind>,
    /// DF comb as fractions of ω₀ within one period, sorted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub df_comb: Vec<f64>,
    /// Paper-style labels m → fraction of ω₀ (the two-atom comb skips m=4).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub df_labels: Vec<(usize, f64)>,
    /// Absolute operating band (lo, hi) used by the gate protocols.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
    /// Suggested per-atom anharmonicity matching the protocol spacings.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chi_hint: Vec<f64>,
}

/// Which pair rate to evaluate in [`CouplingLayout::two_frequency_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRate {
    Exchange,
    CollectiveDecay,
}

/// Batched rates at a fixed frequency assignment.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub gamma_ind: Vec<f64>,
    /// Row-major symmetric N×N, zero diagonal.
    pub g: Vec<f64>,
    /// Row-major symmetric N×N, zero diagonal.
    pub gamma_coll: Vec<f64>,
    pub evaluated_at: Vec<f64>,
    pub n_atoms: usize,
}

impl RateTable {
    pub fn g_at(&self, j: usize, k: usize) -> f64 {
        self.g[j * self.n_atoms + k]
    }
    pub fn gamma_coll_at(&self, j: usize, k: usize) -> f64 {
        self.gamma_coll[j * self.n_atoms + k]
    }
}

/// Phase accumulated between two coupling points: 2π (ω/ω₀) · distance.
pub fn accumulated_phase(omega: f64, distance: f64, omega0: f64) -> f64 {
    2.0 * PI * (omega / omega0) * distance
}

/// Markovianity ratio γ L_w / v with γ in rad/s, L_w in meters, v in m/s.
pub fn markovianity_ratio(gamma_rad_per_s: f64, length_m: f64, v_m_per_s: f64) -> Result<f64> {
    if gamma_rad_per_s < 0.0 || length_m < 0.0 || v_m_per_s <= 0.0 {
        return Err(Error::InvalidArgument(
            "markovianity ratio needs γ ≥ 0, L ≥ 0, v > 0".into(),
        ));
    }
    Ok(gamma_rad_per_s * length_m / v_m_per_s)
}

impl AtomGeometry {
    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::InvalidLayout(format!(
                "atom {} touches no waveguide",
                self.id
            )));
        }
        for (wg, pts) in &self.points {
            if pts.is_empty() {
                return Err(Error::InvalidLayout(format!(
                    "atom {} has no points on waveguide {wg}",
                    self.id
                )));
            }
            for p in pts {
                if !(p.strength > 0.0) || !p.position.is_finite() {
                    return Err(Error::InvalidLayout(format!(
                        "atom {} has a point with strength {} at {}",
                        self.id, p.strength, p.position
                    )));
                }
            }
            for w in pts.windows(2) {
                if w[1].position <= w[0].position {
                    return Err(Error::InvalidLayout(format!(
                        "atom {}: positions not strictly increasing on waveguide {wg}",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Emission phasor Σ √γ e^{iφ} on one waveguide at absolute positions.
    fn phasor(&self, wg: WaveguideId, omega: f64, omega0: f64) -> Option<(f64, f64)> {
        let pts = self.points.get(&wg)?;
        let mut re = 0.0;
        let mut im = 0.0;
        for p in pts {
            let phi = accumulated_phase(omega, p.position, omega0);
            let amp = p.strength.sqrt();
            re += amp * phi.cos();
            im += amp * phi.sin();
        }
        Some((re, im))
    }

    /// Same phasor with positions relative to the first point; zeros are
    /// identical but the argument stays small for far-out atoms.
    fn phasor_relative(&self, wg: WaveguideId, omega: f64, omega0: f64) -> Option<(f64, f64)> {
        let pts = self.points.get(&wg)?;
        let x0 = pts[0].position;
        let mut re = 0.0;
        let mut im = 0.0;
        for p in pts {
            let phi = accumulated_phase(omega, p.position - x0, omega0);
            let amp = p.strength.sqrt();
            re += amp * phi.cos();
            im += amp * phi.sin();
        }
        Some((re, im))
    }

    fn peak_rate(&self) -> f64 {
        self.points
            .values()
            .map(|pts| {
                let s: f64 = pts.iter().map(|p| p.strength.sqrt()).sum();
                s * s
            })
            .fold(0.0, f64::max)
    }
}

impl CouplingLayout {
    pub fn new(
        atoms: Vec<AtomGeometry>,
        waveguides: Vec<WaveguideId>,
        omega0: f64,
    ) -> Result<Self> {
        let layout = Self {
            atoms,
            waveguides,
            omega0,
            units: None,
            preset: None,
            df_comb: Vec::new(),
            df_labels: Vec::new(),
            band: None,
            chi_hint: Vec::new(),
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidLayout("ω₀ must be positive".into()));
        }
        if self.atoms.is_empty() {
            return Err(Error::InvalidLayout("layout has no atoms".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for atom in &self.atoms {
            atom.validate()?;
            if !seen.insert(atom.id) {
                return Err(Error::InvalidLayout(format!("duplicate atom id {}", atom.id)));
            }
            for wg in atom.points.keys() {
                if !self.waveguides.contains(wg) {
                    return Err(Error::UnknownWaveguide(*wg));
                }
            }
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom_index(&self, id: AtomId) -> Result<usize> {
        self.atoms
            .iter()
            .position(|a| a.id == id)
            .ok_or(Error::UnknownAtom(id))
    }

    pub fn atom(&self, id: AtomId) -> Result<&AtomGeometry> {
        self.atoms
            .iter()
            .find(|a| a.id == id)
            .ok_or(Error::UnknownAtom(id))
    }

    /// Γ_ind,k(ω): the modulus squared of the emission phasor, summed over
    /// the atom's waveguides.
    pub fn individual_decay(&self, atom_id: AtomId, omega: f64) -> Result<f64> {
        let atom = self.atom(atom_id)?;
        let mut total = 0.0;
        for wg in atom.points.keys() {
            let (re, im) = atom.phasor_relative(*wg, omega, self.omega0).unwrap();
            total += re * re + im * im;
        }
        Ok(total)
    }

    /// g_jk(ω): pairwise sine sum over shared waveguides; the phase takes the
    /// absolute distance, so braiding decides the sign structure.
    ///
    /// The pair is canonicalized before summing, making g_jk = g_kj exact.
    pub fn exchange_coupling(&self, j: AtomId, k: AtomId, omega: f64) -> Result<f64> {
        if j == k {
            return Err(Error::SelfCoupling(j));
        }
        let (j, k) = (j.min(k), j.max(k));
        let aj = self.atom(j)?;
        let ak = self.atom(k)?;
        let mut total = 0.0;
        for (wg, pj) in &aj.points {
            let Some(pk) = ak.points.get(wg) else { continue };
            for a in pj {
                for b in pk {
                    let d = (a.position - b.position).abs();
                    let phi = accumulated_phase(omega, d, self.omega0);
                    total += 0.5 * (a.strength * b.strength).sqrt() * phi.sin();
                }
            }
        }
        Ok(total)
    }

    /// Γ_coll,jk(ω): pairwise cosine sum; equals Re[conj(A_j) A_k] since the
    /// cosine is even in the distance.
    pub fn collective_decay(&self, j: AtomId, k: AtomId, omega: f64) -> Result<f64> {
        if j == k {
            return Err(Error::SelfCoupling(j));
        }
        let (j, k) = (j.min(k), j.max(k));
        let aj = self.atom(j)?;
        let ak = self.atom(k)?;
        let mut total = 0.0;
        for wg in aj.points.keys() {
            if !ak.points.contains_key(wg) {
                continue;
            }
            let (rj, ij) = aj.phasor(*wg, omega, self.omega0).unwrap();
            let (rk, ik) = ak.phasor(*wg, omega, self.omega0).unwrap();
            total += rj * rk + ij * ik;
        }
        Ok(total)
    }

    /// Correlated-decay rate between two transitions at different
    /// frequencies: Re[conj(A_j(ω_j)) · A_k(ω_k)] summed over shared
    /// waveguides, each atom's emission phasor taken at its own frequency.
    /// Reduces to [`Self::collective_decay`] on resonance and vanishes
    /// whenever either transition is decoherence-free, so parked atoms do
    /// not pick up spurious cross-dissipation.
    pub fn collective_cross_rate(
        &self,
        j: AtomId,
        k: AtomId,
        omega_j: f64,
        omega_k: f64,
    ) -> Result<f64> {
        if j == k {
            return Err(Error::SelfCoupling(j));
        }
        let aj = self.atom(j)?;
        let ak = self.atom(k)?;
        let mut total = 0.0;
        for wg in aj.points.keys() {
            if !ak.points.contains_key(wg) {
                continue;
            }
            let (rj, ij) = aj.phasor(*wg, omega_j, self.omega0).unwrap();
            let (rk, ik) = ak.phasor(*wg, omega_k, self.omega0).unwrap();
            total += rj * rk + ij * ik;
        }
        Ok(total)
    }

    /// Pair rate for atoms sitting at two different transition frequencies;
    /// evaluated at the arithmetic mean, which reduces to the
    /// single-frequency rate on resonance.
    pub fn two_frequency_rate(
        &self,
        j: AtomId,
        k: AtomId,
        omega_j: f64,
        omega_k: f64,
        kind: PairRate,
    ) -> Result<f64> {
        let omega = 0.5 * (omega_j + omega_k);
        match kind {
            PairRate::Exchange => self.exchange_coupling(j, k, omega),
            PairRate::CollectiveDecay => self.collective_decay(j, k, omega),
        }
    }

    /// Batch Γ_ind, g, Γ_coll for one frequency per atom (in layout order).
    pub fn rate_table(&self, frequencies: &[f64]) -> Result<RateTable> {
        let n = self.n_atoms();
        if frequencies.len() != n {
            return Err(Error::FrequencyCountMismatch {
                expected: n,
                got: frequencies.len(),
            });
        }
        let mut gamma_ind = Vec::with_capacity(n);
        for (a, &w) in self.atoms.iter().zip(frequencies) {
            gamma_ind.push(self.individual_decay(a.id, w)?);
        }
        let mut g = vec![0.0; n * n];
        let mut coll = vec![0.0; n * n];
        for jj in 0..n {
            for kk in (jj + 1)..n {
                let (ja, ka) = (self.atoms[jj].id, self.atoms[kk].id);
                let gv = self.two_frequency_rate(
                    ja,
                    ka,
                    frequencies[jj],
                    frequencies[kk],
                    PairRate::Exchange,
                )?;
                let cv = self.two_frequency_rate(
                    ja,
                    ka,
                    frequencies[jj],
                    frequencies[kk],
                    PairRate::CollectiveDecay,
                )?;
                g[jj * n + kk] = gv;
                g[kk * n + jj] = gv;
                coll[jj * n + kk] = cv;
                coll[kk * n + jj] = cv;
            }
        }
        Ok(RateTable {
            gamma_ind,
            g,
            gamma_coll: coll,
            evaluated_at: frequencies.to_vec(),
            n_atoms: n,
        })
    }

    /// All decoherence-free frequencies of one atom inside `band`.
    ///
    /// Zeros of the nonnegative Γ_ind are found through the sign-changing
    /// real and imaginary parts of the emission phasor: bracket each on a
    /// uniform grid (512 samples per ω₀), bisect to 1e-12·ω₀, keep the
    /// candidates where Γ_ind < tol · (Σ√γ)², and deduplicate anything
    /// closer than 1e-9·ω₀.
    pub fn find_df_frequencies(
        &self,
        atom_id: AtomId,
        band: (f64, f64),
        tol: f64,
    ) -> Result<Vec<f64>> {
        let atom = self.atom(atom_id)?;
        let (lo, hi) = band;
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if !(hi > lo) {
            return Err(Error::InvalidArgument("empty frequency band".into()));
        }
        if hi - lo > 8.0 * self.omega0 {
            return Err(Error::InvalidArgument(
                "band wider than a few ω₀; split the search".into(),
            ));
        }
        let scale = atom.peak_rate();
        let wg0 = *atom.points.keys().next().unwrap();
        let re_part = |w: f64| atom.phasor_relative(wg0, w, self.omega0).unwrap().0;
        let im_part = |w: f64| atom.phasor_relative(wg0, w, self.omega0).unwrap().1;

        let samples = (((hi - lo) / self.omega0 * 512.0).ceil() as usize).max(64);
        let step = (hi - lo) / samples as f64;
        let refine_tol = 1e-12 * self.omega0;

        let mut candidates: Vec<f64> = Vec::new();
        for part in 0..2 {
            let f: &dyn Fn(f64) -> f64 = if part == 0 { &re_part } else { &im_part };
            let mut x_prev = lo;
            let mut f_prev = f(x_prev);
            for i in 1..=samples {
                let x = lo + step * i as f64;
                let fx = f(x);
                if f_prev == 0.0 {
                    candidates.push(x_prev);
                } else if fx != 0.0 && f_prev * fx < 0.0 {
                    candidates.push(bisect(f, x_prev, x, refine_tol)?);
                }
                x_prev = x;
                f_prev = fx;
            }
            if f_prev == 0.0 && x_prev < hi + 0.5 * step {
                candidates.push(x_prev);
            }
        }

        let mut roots: Vec<f64> = candidates
            .into_iter()
            .filter(|&w| w >= lo && w < hi)
            .filter(|&w| self.individual_decay(atom_id, w).unwrap() < tol * scale)
            .collect();
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * self.omega0);
        Ok(roots)
    }

    /// Paper-style DF label ω_DF,nm for preset layouts.
    pub fn df_nm(&self, m: usize) -> Result<f64> {
        let base = self
            .band
            .map(|(lo, _)| (lo / self.omega0).floor() * self.omega0)
            .unwrap_or(0.0);
        let frac = self
            .df_labels
            .iter()
            .find(|(label, _)| *label == m)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no DF label m={m} for this layout"))
            })?;
        Ok(base + frac * self.omega0)
    }

    /// Largest DF frequency inside the operating band; the default rotating
    /// frame for time evolution.
    pub fn default_omega_ref(&self) -> f64 {
        match self.band {
            Some((lo, hi)) => {
                let base = (lo / self.omega0).floor() * self.omega0;
                self.df_comb
                    .iter()
                    .map(|f| base + f * self.omega0)
                    .filter(|w| *w >= lo - 1e-9 && *w <= hi + 1e-9)
                    .fold(lo, f64::max)
            }
            None => self.omega0,
        }
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    if f(hi) == 0.0 {
        return Ok(hi);
    }
    if flo * f(hi) > 0.0 {
        return Err(Error::BracketFailure { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

fn atom_on_wg(id: AtomId, wg: WaveguideId, positions: &[f64], strengths: &[f64]) -> AtomGeometry {
    let pts = positions
        .iter()
        .zip(strengths)
        .map(|(&position, &strength)| CouplingPoint { position, strength })
        .collect();
    let mut points = BTreeMap::new();
    points.insert(wg, pts);
    AtomGeometry { id, points }
}

/// Two braided four-point atoms: atom 1 at {0,2,4,6}Δx, atom 2 at
/// {3,5,7,9}Δx, all strengths γ. DF comb (n + m/8)ω₀ for m ∈ {1,2,3,5,6,7};
/// the merged gap sequence along the waveguide is [2,1,1,1,1,1,2]Δx.
pub fn preset_two_atom() -> CouplingLayout {
    preset_two_atom_with(units::default_gamma(), units::default_omega0())
}

pub fn preset_two_atom_with(gamma: f64, omega0: f64) -> CouplingLayout {
    let s = [gamma; 4];
    let atoms = vec![
        atom_on_wg(1, 0, &[0.0, 2.0, 4.0, 6.0], &s),
        atom_on_wg(2, 0, &[3.0, 5.0, 7.0, 9.0], &s),
    ];
    let mut layout = CouplingLayout::new(atoms, vec![0], omega0).unwrap();
    layout.preset = Some(PresetKind::TwoAtom);
    layout.df_comb = [1.0, 2.0, 3.0, 5.0, 6.0, 7.0].iter().map(|m| m / 8.0).collect();
    layout.df_labels = [1usize, 2, 3, 5, 6, 7].iter().map(|&m| (m, m as f64 / 8.0)).collect();
    layout.band = Some((omega0 * (1.0 + 1.0 / 8.0), omega0 * (1.0 + 3.0 / 8.0)));
    layout.chi_hint = vec![-omega0 / 8.0; 2];
    layout.units = Some(default_units(omega0));
    layout
}

/// DF comb fractions of the six-point chain atom: zeros of
/// (1+z)(z⁴+√1.4 z²+1) with z = e^{i4πω/ω₀}, ten per period.
pub fn chain_df_comb() -> Vec<f64> {
    let alpha = (-(1.4f64).sqrt() / 2.0).acos();
    let half: Vec<f64> = vec![
        (alpha / 2.0) / (4.0 * PI),
        (PI - alpha / 2.0) / (4.0 * PI),
        0.25,
        (PI + alpha / 2.0) / (4.0 * PI),
        (2.0 * PI - alpha / 2.0) / (4.0 * PI),
    ];
    let mut comb = half.clone();
    comb.extend(half.iter().map(|f| f + 0.5));
    comb
}

/// Chain of six-point atoms, 2Δx point spacing, strengths
/// [γ, γ, 1.4γ, 1.4γ, γ, γ], neighbors offset by 7Δx so consecutive atoms
/// braid and next-nearest ones do not overlap.
///
/// The 7Δx offset is what reproduces the published nearest-neighbor
/// couplings (g at the second and fifth DF points of the comb); see the
/// rate tests.
pub fn preset_chain(n_atoms: usize) -> Result<CouplingLayout> {
    preset_chain_with(n_atoms, units::default_gamma(), units::default_omega0())
}

pub const CHAIN_NEIGHBOR_OFFSET: f64 = 7.0;

pub fn preset_chain_with(n_atoms: usize, gamma: f64, omega0: f64) -> Result<CouplingLayout> {
    if n_atoms < 1 {
        return Err(Error::InvalidArgument("chain needs at least one atom".into()));
    }
    let strengths = [gamma, gamma, 1.4 * gamma, 1.4 * gamma, gamma, gamma];
    let atoms = (0..n_atoms)
        .map(|k| {
            let start = CHAIN_NEIGHBOR_OFFSET * k as f64;
            let positions: Vec<f64> = (0..6).map(|j| start + 2.0 * j as f64).collect();
            atom_on_wg(k + 1, 0, &positions, &strengths)
        })
        .collect();
    let mut layout = CouplingLayout::new(atoms, vec![0], omega0)?;
    layout.preset = Some(PresetKind::Chain);
    layout.df_comb = chain_df_comb();
    layout.df_labels = layout
        .df_comb
        .iter()
        .enumerate()
        .map(|(i, &f)| (i + 1, f))
        .collect();
    let base = omega0;
    layout.band = Some((base + layout.df_comb[0] * omega0, base + layout.df_comb[4] * omega0));
    let chi = (layout.df_comb[0] - layout.df_comb[1]) * omega0;
    layout.chi_hint = vec![chi; n_atoms];
    layout.units = Some(default_units(omega0));
    Ok(layout)
}

/// Square-lattice processor: ten-point atoms (2Δx spacing, uniform γ) on an
/// array of waveguides, one between each pair of adjacent rows. Odd rows are
/// offset by 9Δx so the lattice braids; boundary rows touch one waveguide,
/// interior rows two. DF comb (n/2 + m/20)ω₀, m = 1…9.
pub fn preset_grid(rows: usize, cols: usize) -> Result<CouplingLayout> {
    preset_grid_with(rows, cols, units::default_gamma(), units::default_omega0())
}

pub fn preset_grid_with(
    rows: usize,
    cols: usize,
    gamma: f64,
    omega0: f64,
) -> Result<CouplingLayout> {
    if rows < 1 || cols < 1 {
        return Err(Error::InvalidArgument("grid needs rows, cols ≥ 1".into()));
    }
    let n_wg = if rows == 1 { 1 } else { rows - 1 };
    let strengths = [gamma; 10];
    let mut atoms = Vec::with_capacity(rows * cols);
    let mut chi_hint = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c + 1;
            let start = 20.0 * c as f64 + if r % 2 == 1 { 9.0 } else { 0.0 };
            let positions: Vec<f64> = (0..10).map(|j| start + 2.0 * j as f64).collect();
            let mut points = BTreeMap::new();
            let mut wgs: Vec<WaveguideId> = Vec::new();
            if rows == 1 {
                wgs.push(0);
            } else {
                if r > 0 {
                    wgs.push(r - 1);
                }
                if r < rows - 1 {
                    wgs.push(r);
                }
            }
            for wg in wgs {
                let pts: Vec<CouplingPoint> = positions
                    .iter()
                    .zip(&strengths)
                    .map(|(&position, &strength)| CouplingPoint { position, strength })
                    .collect();
                points.insert(wg, pts);
            }
            atoms.push(AtomGeometry { id, points });
            // Boundary-style rows get χ = -ω₀/20 (one comb step); interior
            // rows -ω₀/10 so no parked pair sits on a stray CZ resonance.
            chi_hint.push(if r % 2 == 0 { -omega0 / 20.0 } else { -omega0 / 10.0 });
        }
    }
    let mut layout = CouplingLayout::new(atoms, (0..n_wg).collect(), omega0)?;
    layout.preset = Some(PresetKind::Grid { rows, cols });
    let mut comb: Vec<f64> = (1..=9).map(|m| m as f64 / 20.0).collect();
    comb.extend((1..=9).map(|m| 0.5 + m as f64 / 20.0));
    layout.df_comb = comb;
    layout.df_labels = (1..=9).map(|m| (m, m as f64 / 20.0)).collect();
    layout.band = Some((omega0 * (1.0 + 1.0 / 20.0), omega0 * (1.0 + 9.0 / 20.0)));
    layout.chi_hint = chi_hint;
    layout.units = Some(default_units(omega0));
    Ok(layout)
}

fn default_units(omega0: f64) -> WaveguideUnits {
    // v ≈ 1.3e8 m/s; Δx = 2πv/ω₀ with ω₀ in rad/s.
    let v = 1.3e8;
    let omega0_rad_per_s = omega0 * 1e6;
    WaveguideUnits { delta_x_m: 2.0 * PI * v / omega0_rad_per_s, v_m_per_s: v }
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LayoutFilePoint {
    waveguide: WaveguideId,
    position_dx: f64,
    strength_mhz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutFileAtom {
    id: AtomId,
    points: Vec<LayoutFilePoint>,
}

/// On-disk layout document: `{omega0_ghz, waveguides, atoms:[{id, points:
/// [{waveguide, position_dx, strength_mhz}]}]}`. Strengths are ν = γ/2π.
#[derive(Debug, Serialize, Deserialize)]
pub struct LayoutFile {
    omega0_ghz: f64,
    waveguides: Vec<WaveguideId>,
    atoms: Vec<LayoutFileAtom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<WaveguideUnits>,
}

impl CouplingLayout {
    pub fn to_json(&self) -> Result<String> {
        let file = LayoutFile {
            omega0_ghz: units::angular_to_ghz(self.omega0),
            waveguides: self.waveguides.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| LayoutFileAtom {
                    id: a.id,
                    points: a
                        .points
                        .iter()
                        .flat_map(|(wg, pts)| {
                            pts.iter().map(|p| LayoutFilePoint {
                                waveguide: *wg,
                                position_dx: p.position,
                                strength_mhz: units::angular_to_mhz(p.strength),
                            })
                        })
                        .collect(),
                })
                .collect(),
            units: self.units,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        let atoms = file
            .atoms
            .into_iter()
            .map(|a| {
                let mut points: BTreeMap<WaveguideId, Vec<CouplingPoint>> = BTreeMap::new();
                for p in a.points {
                    points.entry(p.waveguide).or_default().push(CouplingPoint {
                        position: p.position_dx,
                        strength: units::mhz_to_angular(p.strength_mhz),
                    });
                }
                for pts in points.values_mut() {
                    pts.sort_by(|x, y| x.position.partial_cmp(&y.position).unwrap());
                }
                AtomGeometry { id: a.id, points }
            })
            .collect();
        let mut layout =
            CouplingLayout::new(atoms, file.waveguides, units::ghz_to_angular(file.omega0_ghz))?;
        layout.units = file.units;
        Ok(layout)
    }
}
