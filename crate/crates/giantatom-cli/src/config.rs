//! Run configuration: one JSON document, flags override a few fields.

use serde::{Deserialize, Serialize};

use giantatom::error::{Error, Result};
use giantatom::geometry::{
    preset_chain_with, preset_grid_with, preset_two_atom_with, CouplingLayout,
};
use giantatom::units;

fn default_gamma_mhz() -> f64 {
    2.0
}

fn default_omega0_ghz() -> f64 {
    3.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    /// "two-atom", "chain", "grid", or "file".
    #[serde(default = "LayoutConfig::default_preset")]
    pub preset: String,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default = "LayoutConfig::default_chain_atoms")]
    pub chain_atoms: usize,
    #[serde(default = "LayoutConfig::default_grid")]
    pub grid_rows: usize,
    #[serde(default = "LayoutConfig::default_grid")]
    pub grid_cols: usize,
    /// ν = γ/2π per coupling point.
    #[serde(default = "default_gamma_mhz")]
    pub gamma_mhz: f64,
    /// ν = ω₀/2π. When `omega0_over_gamma` is set it wins.
    #[serde(default = "default_omega0_ghz")]
    pub omega0_ghz: f64,
    #[serde(default)]
    pub omega0_over_gamma: Option<f64>,
}

impl LayoutConfig {
    fn default_preset() -> String {
        "two-atom".into()
    }
    fn default_chain_atoms() -> usize {
        4
    }
    fn default_grid() -> usize {
        3
    }

    pub fn build(&self) -> Result<CouplingLayout> {
        let gamma = units::mhz_to_angular(self.gamma_mhz);
        let omega0 = match self.omega0_over_gamma {
            Some(r) => r * gamma,
            None => units::ghz_to_angular(self.omega0_ghz),
        };
        match self.preset.as_str() {
            "two-atom" => Ok(preset_two_atom_with(gamma, omega0)),
            "chain" => preset_chain_with(self.chain_atoms, gamma, omega0),
            "grid" => preset_grid_with(self.grid_rows, self.grid_cols, gamma, omega0),
            "file" => {
                let path = self.path.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("layout.preset = \"file\" needs layout.path".into())
                })?;
                let text = std::fs::read_to_string(path)?;
                CouplingLayout::from_json(&text)
            }
            other => Err(Error::InvalidArgument(format!("unknown layout preset {other:?}"))),
        }
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(default = "RatesConfig::default_samples")]
    pub samples: usize,
    /// Sweep bounds in units of ω₀.
    #[serde(default)]
    pub omega_min_over_omega0: f64,
    #[serde(default = "RatesConfig::default_omega_max")]
    pub omega_max_over_omega0: f64,
    /// Atom ids for Γ_ind columns; empty = all.
    #[serde(default)]
    pub atoms: Vec<usize>,
    /// Pairs for g and Γ_coll columns; empty = all pairs of the first
    /// few atoms.
    #[serde(default)]
    pub pairs: Vec<(usize, usize)>,
}

impl RatesConfig {
    fn default_samples() -> usize {
        1601
    }
    fn default_omega_max() -> f64 {
        1.0
    }
}

impl Default for RatesConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfConfig {
    #[serde(default = "DfConfig::default_atom")]
    pub atom: usize,
    /// Band in units of ω₀.
    #[serde(default)]
    pub band_lo_over_omega0: f64,
    #[serde(default = "DfConfig::default_band_hi")]
    pub band_hi_over_omega0: f64,
    #[serde(default = "DfConfig::default_tol")]
    pub tol: f64,
}

impl DfConfig {
    fn default_atom() -> usize {
        1
    }
    fn default_band_hi() -> f64 {
        1.0
    }
    fn default_tol() -> f64 {
        1e-9
    }
}

impl Default for DfConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateFidelityConfig {
    /// "iswap" or "cz".
    #[serde(default = "GateFidelityConfig::default_gate")]
    pub gate: String,
    #[serde(default = "GateFidelityConfig::default_grid_max")]
    pub grid_max: f64,
    #[serde(default = "GateFidelityConfig::default_grid_steps")]
    pub grid_steps: usize,
}

impl GateFidelityConfig {
    fn default_gate() -> String {
        "iswap".into()
    }
    fn default_grid_max() -> f64 {
        0.02
    }
    fn default_grid_steps() -> usize {
        10
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..=self.grid_steps)
            .map(|i| self.grid_max * i as f64 / self.grid_steps as f64)
            .collect()
    }
}

impl Default for GateFidelityConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzPhiScanConfig {
    #[serde(default = "CzPhiScanConfig::default_phi_steps")]
    pub phi_steps: usize,
    /// The scan runs its own two-atom block at this design ratio, so the
    /// anharmonicity χ = -ω₀/8 matches the realistic 200 MHz at the default
    /// γ/2π = 2 MHz.
    #[serde(default = "CzPhiScanConfig::default_ratio")]
    pub omega0_over_gamma: f64,
    /// Extra decay grid, 1/µs.
    #[serde(default = "CzPhiScanConfig::default_gamma_ex")]
    pub gamma_ex_list: Vec<f64>,
    #[serde(default = "CzPhiScanConfig::default_gamma_phi")]
    pub gamma_phi: f64,
}

impl CzPhiScanConfig {
    fn default_phi_steps() -> usize {
        15
    }
    fn default_ratio() -> f64 {
        800.0
    }
    fn default_gamma_ex() -> Vec<f64> {
        vec![0.0, 0.02, 0.04, 0.06, 0.08, 0.1]
    }
    fn default_gamma_phi() -> f64 {
        0.05
    }

    pub fn phi_grid(&self) -> Vec<f64> {
        (1..=self.phi_steps)
            .map(|i| 2.0 * std::f64::consts::PI * i as f64 / (self.phi_steps as f64 + 1.0))
            .collect()
    }
}

impl Default for CzPhiScanConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    #[serde(default = "default_gamma_mhz")]
    pub gamma_mhz: f64,
    #[serde(default = "HardwareConfig::default_gamma_ex")]
    pub gamma_ex_mhz: f64,
    #[serde(default = "HardwareConfig::default_gamma_phi")]
    pub gamma_phi_mhz: f64,
    #[serde(default = "default_omega0_ghz")]
    pub omega0_ghz: f64,
    #[serde(default = "HardwareConfig::default_t3")]
    pub t3_ns: f64,
    #[serde(default)]
    pub rz_virtual_only: bool,
}

impl HardwareConfig {
    fn default_gamma_ex() -> f64 {
        0.02
    }
    fn default_gamma_phi() -> f64 {
        0.05
    }
    fn default_t3() -> f64 {
        30.0
    }

    pub fn build(&self) -> giantatom::trotter::HardwareParams {
        giantatom::trotter::HardwareParams {
            gamma: units::mhz_to_angular(self.gamma_mhz),
            gamma_ex: self.gamma_ex_mhz,
            gamma_phi: self.gamma_phi_mhz,
            omega0: units::ghz_to_angular(self.omega0_ghz),
            t3: self.t3_ns * 1e-3,
            rz_virtual_only: self.rz_virtual_only,
        }
    }
}

impl Default for HardwareConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XxzConfig {
    #[serde(default = "XxzConfig::default_n")]
    pub n_sites: usize,
    /// Couplings in 1/µs.
    #[serde(default = "XxzConfig::default_j")]
    pub j_mhz: f64,
    #[serde(default)]
    pub jz_mhz: f64,
    #[serde(default = "XxzConfig::default_j")]
    pub gamma_mhz: f64,
    /// Model times in µs.
    #[serde(default = "XxzConfig::default_t_list")]
    pub t_list: Vec<f64>,
    #[serde(default = "XxzConfig::default_l")]
    pub l: usize,
    #[serde(default = "XxzConfig::default_l_list")]
    pub l_list: Vec<usize>,
    #[serde(default)]
    pub hardware: HardwareConfig,
}

impl XxzConfig {
    fn default_n() -> usize {
        4
    }
    fn default_j() -> f64 {
        1.0
    }
    fn default_t_list() -> Vec<f64> {
        (0..=20).map(|i| 0.2 * i as f64).collect()
    }
    fn default_l() -> usize {
        30
    }
    fn default_l_list() -> Vec<usize> {
        vec![10, 20, 30]
    }

    pub fn model(&self) -> giantatom::trotter::XXZModel {
        giantatom::trotter::XXZModel {
            n_sites: self.n_sites,
            j: self.j_mhz,
            j_z: self.jz_mhz,
            gamma: self.gamma_mhz,
        }
    }
}

impl Default for XxzConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkovConfig {
    #[serde(default = "default_gamma_mhz")]
    pub gamma_mhz: f64,
    #[serde(default = "MarkovConfig::default_length")]
    pub length_m: f64,
    #[serde(default = "MarkovConfig::default_v")]
    pub v_m_per_s: f64,
}

impl MarkovConfig {
    fn default_length() -> f64 {
        130.0
    }
    fn default_v() -> f64 {
        1.3e8
    }
}

impl Default for MarkovConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

/// The whole run configuration document.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub layout: LayoutConfig,
    /// Noise rates in 1/µs for gate tomography.
    #[serde(default)]
    pub rates: RatesConfig,
    #[serde(default)]
    pub df: DfConfig,
    #[serde(default)]
    pub gate_fidelity: GateFidelityConfig,
    #[serde(default)]
    pub czphi_scan: CzPhiScanConfig,
    #[serde(default)]
    pub xxz: XxzConfig,
    #[serde(default)]
    pub markov: MarkovConfig,
    #[serde(default = "RunConfig::default_out")]
    pub output_dir: String,
}

impl RunConfig {
    fn default_out() -> String {
        "out".into()
    }

    pub fn load(path: Option<&str>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(Self::default()),
        }
    }
}
