//! Per-atom parameters and piecewise-constant frequency timelines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AtomId, CouplingLayout};
use crate::units;

/// Static per-atom parameters: anharmonicity and intrinsic noise rates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AtomSpec {
    pub atom_id: AtomId,
    /// χ = ω₁₂ - ω₀₁ in rad/µs, negative for transmons.
    pub chi: f64,
    /// Extra decay to environments other than the waveguide, 1/µs.
    pub gamma_ex: f64,
    /// Pure dephasing rate, 1/µs.
    pub gamma_phi: f64,
}

impl AtomSpec {
    pub fn new(atom_id: AtomId, chi: f64) -> Self {
        Self { atom_id, chi, gamma_ex: 0.0, gamma_phi: 0.0 }
    }

    pub fn with_noise(mut self, gamma_ex: f64, gamma_phi: f64) -> Self {
        self.gamma_ex = gamma_ex;
        self.gamma_phi = gamma_phi;
        self
    }

    /// Specs for every atom of a layout, anharmonicities from the layout's
    /// protocol hint, default noise rates.
    pub fn defaults_for(layout: &CouplingLayout) -> Vec<AtomSpec> {
        layout
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let chi = layout
                    .chi_hint
                    .get(i)
                    .copied()
                    .unwrap_or(-layout.omega0 / 8.0);
                AtomSpec::new(a.id, chi)
                    .with_noise(units::DEFAULT_GAMMA_EX, units::DEFAULT_GAMMA_PHI)
            })
            .collect()
    }

    /// Same, with all noise turned off.
    pub fn noiseless_for(layout: &CouplingLayout) -> Vec<AtomSpec> {
        Self::defaults_for(layout)
            .into_iter()
            .map(|s| s.with_noise(0.0, 0.0))
            .collect()
    }
}

/// One constant-frequency stretch of an atom's timeline.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub omega: f64,
}

/// A frame-correction layer at `time`: with `compensate` set, every atom's
/// accumulated virtual-Z ledger is undone (and then reset) on top of the
/// extra deliberate Z phases; without it only the extra phases apply, as
/// plain single-qubit Z gates (on |1⟩, doubled on |2⟩).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RzLayer {
    pub time: f64,
    /// Extra phase per atom in layout order, radians on |1⟩.
    pub extra_phase: Vec<f64>,
    #[serde(default = "default_true")]
    pub compensate: bool,
}

fn default_true() -> bool {
    true
}

/// Piecewise-constant transition-frequency timeline for every atom, plus the
/// rotating-frame reference and the scheduled frame corrections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySchedule {
    /// Per atom in layout order; segments contiguous and non-overlapping.
    pub segments: Vec<Vec<Segment>>,
    /// Rotating frame used for integration.
    pub omega_ref: f64,
    pub rz_layers: Vec<RzLayer>,
    /// Per-atom virtual-Z reference ω_ref,k: the ledger tracks
    /// ∫(ω_k - ω_ref,k)dt, so compensation only undoes excursions from each
    /// atom's own frame. Defaults to ω_ref for every atom.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_freqs: Option<Vec<f64>>,
}

impl FrequencySchedule {
    /// All atoms held at fixed frequencies over [0, t_end].
    pub fn constant(freqs: &[f64], t_end: f64, omega_ref: f64) -> Self {
        Self {
            segments: freqs
                .iter()
                .map(|&omega| vec![Segment { t_start: 0.0, t_end, omega }])
                .collect(),
            omega_ref,
            rz_layers: Vec::new(),
            frame_freqs: None,
        }
    }

    /// Per-atom frame frequency ω_ref,k, falling back to the global frame.
    pub fn frame_of(&self, idx: usize) -> f64 {
        self.frame_freqs
            .as_ref()
            .and_then(|f| f.get(idx).copied())
            .unwrap_or(self.omega_ref)
    }

    pub fn n_atoms(&self) -> usize {
        self.segments.len()
    }

    pub fn t_end(&self) -> f64 {
        self.segments
            .iter()
            .filter_map(|s| s.last())
            .map(|s| s.t_end)
            .fold(0.0, f64::max)
    }

    /// Frequency of atom `idx` at time `t` (segment containing `t`).
    pub fn omega_at(&self, idx: usize, t: f64) -> Result<f64> {
        let segs = &self.segments[idx];
        for s in segs {
            if t >= s.t_start - 1e-12 && t <= s.t_end + 1e-12 {
                return Ok(s.omega);
            }
        }
        Err(Error::ScheduleGap { atom: idx, t0: t, t1: t })
    }

    pub fn validate(&self, t_span: (f64, f64)) -> Result<()> {
        for (idx, segs) in self.segments.iter().enumerate() {
            if segs.is_empty() {
                return Err(Error::ScheduleGap { atom: idx, t0: t_span.0, t1: t_span.1 });
            }
            if segs[0].t_start > t_span.0 + 1e-12
                || segs.last().unwrap().t_end < t_span.1 - 1e-12
            {
                return Err(Error::ScheduleGap { atom: idx, t0: t_span.0, t1: t_span.1 });
            }
            for w in segs.windows(2) {
                if (w[1].t_start - w[0].t_end).abs() > 1e-9 {
                    return Err(Error::ScheduleGap {
                        atom: idx,
                        t0: w[0].t_end,
                        t1: w[1].t_start,
                    });
                }
            }
        }
        Ok(())
    }

    /// Sorted unique time breakpoints: segment edges and Rz layers.
    pub fn breakpoints(&self, t_span: (f64, f64)) -> Vec<f64> {
        let mut pts = vec![t_span.0, t_span.1];
        for segs in &self.segments {
            for s in segs {
                pts.push(s.t_start);
                pts.push(s.t_end);
            }
        }
        for l in &self.rz_layers {
            pts.push(l.time);
        }
        pts.retain(|&t| t >= t_span.0 - 1e-12 && t <= t_span.1 + 1e-12);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * (1.0 + a.abs()));
        pts
    }
}

/// Builds multi-atom schedules window by window.
pub struct ScheduleBuilder {
    idle: Vec<f64>,
    omega_ref: f64,
    cursor: f64,
    segments: Vec<Vec<Segment>>,
    rz_layers: Vec<RzLayer>,
    frame_freqs: Option<Vec<f64>>,
}

impl ScheduleBuilder {
    pub fn new(idle_freqs: &[f64], omega_ref: f64) -> Self {
        Self {
            idle: idle_freqs.to_vec(),
            omega_ref,
            cursor: 0.0,
            segments: vec![Vec::new(); idle_freqs.len()],
            rz_layers: Vec::new(),
            frame_freqs: None,
        }
    }

    /// Use per-atom virtual-Z references (typically the idle frequencies).
    pub fn with_frames(&mut self, frames: Vec<f64>) -> &mut Self {
        self.frame_freqs = Some(frames);
        self
    }

    pub fn cursor(&self) -> f64 {
        self.cursor
    }

    /// Advance by `duration`; the listed atoms sit at their assigned
    /// frequencies, everyone else idles.
    pub fn window(&mut self, duration: f64, assignments: &[(usize, f64)]) -> &mut Self {
        if duration <= 0.0 {
            return self;
        }
        let t0 = self.cursor;
        let t1 = t0 + duration;
        for (idx, segs) in self.segments.iter_mut().enumerate() {
            let omega = assignments
                .iter()
                .find(|(a, _)| *a == idx)
                .map(|(_, w)| *w)
                .unwrap_or(self.idle[idx]);
            // merge with the previous segment when the frequency repeats
            if let Some(last) = segs.last_mut() {
                if (last.omega - omega).abs() < 1e-12 && (last.t_end - t0).abs() < 1e-12 {
                    last.t_end = t1;
                    continue;
                }
            }
            segs.push(Segment { t_start: t0, t_end: t1, omega });
        }
        self.cursor = t1;
        self
    }

    /// Schedule a compensating frame-correction layer at the current cursor.
    pub fn rz_layer(&mut self, extra_phase: Vec<f64>) -> &mut Self {
        self.rz_layers
            .push(RzLayer { time: self.cursor, extra_phase, compensate: true });
        self
    }

    /// Schedule plain single-qubit Z gates (no ledger compensation).
    pub fn rz_gates(&mut self, extra_phase: Vec<f64>) -> &mut Self {
        self.rz_layers
            .push(RzLayer { time: self.cursor, extra_phase, compensate: false });
        self
    }

    pub fn finish(mut self) -> FrequencySchedule {
        for (idx, segs) in self.segments.iter_mut().enumerate() {
            if segs.is_empty() {
                segs.push(Segment { t_start: 0.0, t_end: self.cursor, omega: self.idle[idx] });
            }
        }
        FrequencySchedule {
            segments: self.segments,
            omega_ref: self.omega_ref,
            rz_layers: self.rz_layers,
            frame_freqs: self.frame_freqs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_schedule_covers() {
        let s = FrequencySchedule::constant(&[1.0, 2.0], 3.0, 1.5);
        s.validate((0.0, 3.0)).unwrap();
        assert_eq!(s.omega_at(1, 2.9).unwrap(), 2.0);
        assert_eq!(s.breakpoints((0.0, 3.0)), vec![0.0, 3.0]);
    }

    #[test]
    fn builder_windows_merge() {
        let mut b = ScheduleBuilder::new(&[5.0, 5.0], 5.0);
        b.window(1.0, &[]);
        b.window(0.5, &[(0, 7.0)]);
        b.window(0.5, &[(0, 7.0), (1, 6.0)]);
        b.rz_layer(vec![0.0, 0.0]);
        b.window(1.0, &[]);
        let s = b.finish();
        s.validate((0.0, 3.0)).unwrap();
        // atom 0: idle 1.0, then 7.0 for a merged full 1.0, then idle
        assert_eq!(s.segments[0].len(), 3);
        assert_eq!(s.omega_at(0, 1.7).unwrap(), 7.0);
        assert_eq!(s.omega_at(1, 1.2).unwrap(), 5.0);
        assert_eq!(s.omega_at(1, 1.7).unwrap(), 6.0);
        assert_eq!(s.rz_layers.len(), 1);
        assert!((s.rz_layers[0].time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gap_detected() {
        let s = FrequencySchedule {
            segments: vec![vec![
                Segment { t_start: 0.0, t_end: 1.0, omega: 1.0 },
                Segment { t_start: 1.5, t_end: 2.0, omega: 1.0 },
            ]],
            omega_ref: 1.0,
            rz_layers: vec![],
            frame_freqs: None,
        };
        assert!(s.validate((0.0, 2.0)).is_err());
    }
}
