//! File export of trajectories and Choi matrices: CSV traces with a JSON
//! sidecar describing exactly what produced them.

use std::path::Path;

use crate::error::Result;
use crate::gates::ChoiMatrix;
use crate::geometry::CouplingLayout;
use crate::lindblad::{StepControl, Trajectory};
use crate::schedule::FrequencySchedule;

/// 12 significant digits, stable across platforms.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    format!("{x:.11e}")
}

/// FNV-1a 64-bit fingerprint (not cryptographic).
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

/// Trajectory as CSV: `t, n_1…n_N, leak_1…leak_N, trace`.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let n = traj.populations.first().map(Vec::len).unwrap_or(0);
    let mut lines = Vec::with_capacity(traj.times.len() + 1);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|k| format!("n_{k}")));
    header.extend((1..=n).map(|k| format!("leak_{k}")));
    header.push("trace".into());
    lines.push(header.join(","));
    for (i, &t) in traj.times.iter().enumerate() {
        let mut row = vec![sig(t)];
        row.extend(traj.populations[i].iter().map(|v| sig(*v)));
        row.extend(traj.leakage[i].iter().map(|v| sig(*v)));
        row.push(sig(traj.trace[i]));
        lines.push(row.join(","));
    }
    std::fs::write(path, lines.join("\n") + "\n")?;
    Ok(())
}

/// Sidecar JSON: layout fingerprint, the schedule, and the solver settings
/// that produced a trajectory.
pub fn write_trajectory_sidecar(
    path: &Path,
    layout: &CouplingLayout,
    schedule: &FrequencySchedule,
    step: &StepControl,
) -> Result<()> {
    let layout_json = layout.to_json()?;
    let doc = serde_json::json!({
        "layout_hash": fingerprint(layout_json.as_bytes()),
        "omega_ref": schedule.omega_ref,
        "schedule": schedule,
        "solver": {
            "max_phase_per_step": step.max_phase_per_step,
            "min_steps_per_segment": step.min_steps_per_segment,
            "dense_dim_limit": step.dense_dim_limit,
        },
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
    Ok(())
}

/// Choi matrix as a JSON array of rows of [re, im] pairs, row-major.
pub fn choi_to_json(choi: &ChoiMatrix) -> String {
    let rows: Vec<Vec<[f64; 2]>> = (0..choi.mat.rows)
        .map(|r| {
            (0..choi.mat.cols)
                .map(|c| {
                    let v = choi.mat[(r, c)];
                    [v.re, v.im]
                })
                .collect()
        })
        .collect();
    serde_json::to_string(&rows).unwrap()
}
