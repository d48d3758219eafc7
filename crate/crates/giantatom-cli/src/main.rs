//! Batch front-end for the giant-atom processor simulator.

mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::RunConfig;
use giantatom::error::Error;
use giantatom::gates::{
    czphi_fidelity_scan, default_noise_grid, fidelity_sweep, SweepGate,
};
use giantatom::geometry::markovianity_ratio;
use giantatom::trotter::{error_scan, run_simulation};
use giantatom::units;
use output::{sig, CsvWriter, RunManifest};

#[derive(Parser)]
#[command(
    name = "giantatom",
    about = "Giant-atom waveguide-QED processor simulator",
    version
)]
struct Cli {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads for sweeps; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Skip sweep points already present in previous outputs.
    #[arg(long, global = true)]
    resume: bool,
    /// Reserved: all computations are deterministic already.
    #[arg(long, global = true)]
    seedless: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Γ_ind, g, Γ_coll versus frequency for a layout.
    Rates,
    /// Decoherence-free frequencies of one atom.
    Df,
    /// Process-fidelity sweep of the iSWAP or CZ gate with a plane fit.
    GateFidelity,
    /// CZφ fidelity over (φ, Γ_ex) at fixed dephasing.
    CzphiScan,
    /// Trotterized dissipative XXZ chain populations.
    Xxz,
    /// Simulation error against the exact solver for several step counts.
    TrotterError,
    /// Markovianity ratio γL/v in both frequency conventions.
    MarkovCheck,
}

#[derive(Parser)]
#[command(name = "giantatom", version)]
struct FullCli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Cli,
}

fn main() {
    let cli = FullCli::parse();
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Capacity(_) => 4,
        Error::InvalidArgument(_)
        | Error::InvalidLayout(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::UnknownAtom(_)
        | Error::UnknownWaveguide(_) => 2,
        _ => 3,
    }
}

fn run(cli: &FullCli) -> Result<(), Error> {
    if let Some(jobs) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(cli.common.config.as_deref())?;
    if let Some(out) = &cli.common.out {
        cfg.output_dir = out.clone();
    }
    let out_dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&out_dir)?;
    let started = Instant::now();

    // --resume only trusts prior rows produced by the same configuration
    let resume = cli.common.resume && manifest_matches(&out_dir, &cfg);

    let (name, files) = match cli.command {
        Command::Rates => ("rates", cmd_rates(&cfg, &out_dir)?),
        Command::Df => ("df", cmd_df(&cfg, &out_dir)?),
        Command::GateFidelity => ("gate-fidelity", cmd_gate_fidelity(&cfg, &out_dir, resume)?),
        Command::CzphiScan => ("czphi-scan", cmd_czphi_scan(&cfg, &out_dir, resume)?),
        Command::Xxz => ("xxz", cmd_xxz(&cfg, &out_dir, resume)?),
        Command::TrotterError => ("trotter-error", cmd_trotter_error(&cfg, &out_dir)?),
        Command::MarkovCheck => ("markov-check", cmd_markov_check(&cfg, &out_dir)?),
    };

    let mut manifest = RunManifest::new(name, &cfg);
    if let Ok(layout) = cfg.layout.build() {
        if let Ok(json) = layout.to_json() {
            manifest.layout_hash = Some(output::fnv1a_hex(json.as_bytes()));
        }
    }
    manifest.wall_seconds = started.elapsed().as_secs_f64();
    manifest.files = files;
    manifest.write(&out_dir)?;
    Ok(())
}

/// True when the previous run in `out_dir` used exactly this configuration.
fn manifest_matches(out_dir: &std::path::Path, cfg: &RunConfig) -> bool {
    let Ok(text) = std::fs::read_to_string(out_dir.join("run_manifest.json")) else {
        return false;
    };
    let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) else {
        return false;
    };
    let canonical = serde_json::to_string(&serde_json::to_value(cfg).unwrap_or_default())
        .unwrap_or_default();
    doc["config_hash"].as_str() == Some(output::fnv1a_hex(canonical.as_bytes()).as_str())
}

fn cmd_rates(cfg: &RunConfig, out: &std::path::Path) -> Result<Vec<String>, Error> {
    let layout = cfg.layout.build()?;
    let rc = &cfg.rates;
    if rc.samples < 2 {
        return Err(Error::InvalidArgument("rates.samples must be ≥ 2".into()));
    }
    let atoms: Vec<usize> = if rc.atoms.is_empty() {
        layout.atoms.iter().map(|a| a.id).collect()
    } else {
        rc.atoms.clone()
    };
    let pairs: Vec<(usize, usize)> = if rc.pairs.is_empty() {
        let ids: Vec<usize> = layout.atoms.iter().map(|a| a.id).collect();
        let mut ps = Vec::new();
        for i in 0..ids.len() {
            for j in (i + 1)..ids.len() {
                ps.push((ids[i], ids[j]));
            }
        }
        ps
    } else {
        rc.pairs.clone()
    };

    let mut header: Vec<String> = vec!["omega_over_omega0".into()];
    for a in &atoms {
        header.push(format!("gamma_ind_{a}"));
    }
    for (a, b) in &pairs {
        header.push(format!("g_{a}_{b}"));
    }
    for (a, b) in &pairs {
        header.push(format!("gamma_coll_{a}_{b}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(&header_refs);

    for i in 0..rc.samples {
        let frac = rc.omega_min_over_omega0
            + (rc.omega_max_over_omega0 - rc.omega_min_over_omega0) * i as f64
                / (rc.samples - 1) as f64;
        let omega = frac * layout.omega0;
        let mut row = vec![frac];
        for a in &atoms {
            row.push(layout.individual_decay(*a, omega)?);
        }
        for (a, b) in &pairs {
            row.push(layout.exchange_coupling(*a, *b, omega)?);
        }
        for (a, b) in &pairs {
            row.push(layout.collective_decay(*a, *b, omega)?);
        }
        w.row_f64(&row);
    }
    let path = out.join("rates.csv");
    w.write(&path)?;
    Ok(vec![path.display().to_string()])
}

fn cmd_df(cfg: &RunConfig, out: &std::path::Path) -> Result<Vec<String>, Error> {
    let layout = cfg.layout.build()?;
    let dc = &cfg.df;
    let band = (
        dc.band_lo_over_omega0 * layout.omega0,
        dc.band_hi_over_omega0 * layout.omega0,
    );
    let roots = layout.find_df_frequencies(dc.atom, band, dc.tol)?;
    let doc = serde_json::json!({
        "atom": dc.atom,
        "band_over_omega0": [dc.band_lo_over_omega0, dc.band_hi_over_omega0],
        "tolerance": dc.tol,
        "count": roots.len(),
        "frequencies_over_omega0": roots.iter().map(|r| r / layout.omega0).collect::<Vec<_>>(),
        "frequencies_ghz": roots.iter().map(|r| units::angular_to_ghz(*r)).collect::<Vec<_>>(),
    });
    let path = out.join("df.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    Ok(vec![path.display().to_string()])
}

fn cmd_gate_fidelity(
    cfg: &RunConfig,
    out: &std::path::Path,
    resume: bool,
) -> Result<Vec<String>, Error> {
    let layout = cfg.layout.build()?;
    let gc = &cfg.gate_fidelity;
    let gate = match gc.gate.as_str() {
        "iswap" => SweepGate::ISwap,
        "cz" => SweepGate::Cz,
        other => {
            return Err(Error::InvalidArgument(format!(
                "gate_fidelity.gate must be \"iswap\" or \"cz\", got {other:?}"
            )))
        }
    };
    let grid = if gc.grid_steps == 10 && gc.grid_max == 0.02 {
        default_noise_grid()
    } else {
        gc.grid()
    };
    let csv_path = out.join("gate_fidelity.csv");
    let existing = if resume {
        CsvWriter::load_existing(&csv_path, 2)
    } else {
        Default::default()
    };

    let mut w = CsvWriter::new(&[
        "gamma_ex_over_g",
        "gamma_phi_over_g",
        "f_process",
        "f_process_raw",
        "f_average",
    ]);
    let mut points = Vec::new();
    let mut fresh = Vec::new();
    for &x in &grid {
        for &y in &grid {
            let key = format!("{},{}", sig(x), sig(y));
            if let Some(line) = existing.get(&key) {
                let f: Vec<f64> =
                    line.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect();
                points.push(giantatom::gates::SweepPoint {
                    gamma_ex_over_g: f[0],
                    gamma_phi_over_g: f[1],
                    f_process: f[2],
                    f_process_raw: f[3],
                    f_average: f[4],
                });
            } else {
                fresh.push((x, y));
            }
        }
    }
    let computed = if fresh.len() == grid.len() * grid.len() {
        fidelity_sweep(gate, &layout, &grid, &grid)?.0
    } else {
        use rayon::prelude::*;
        fresh
            .par_iter()
            .map(|&(x, y)| giantatom::gates::fidelity_point(gate, &layout, x, y))
            .collect::<Result<Vec<_>, _>>()?
    };
    points.extend(computed);
    points.sort_by(|a, b| {
        (a.gamma_ex_over_g, a.gamma_phi_over_g)
            .partial_cmp(&(b.gamma_ex_over_g, b.gamma_phi_over_g))
            .unwrap()
    });
    for p in &points {
        w.row_f64(&[
            p.gamma_ex_over_g,
            p.gamma_phi_over_g,
            p.f_process,
            p.f_process_raw,
            p.f_average,
        ]);
    }
    w.write(&csv_path)?;

    let fit = giantatom::gates::fit_fidelity_plane(&points);
    let fit_doc = serde_json::json!({
        "gate": gc.gate,
        "baseline": fit.baseline,
        "slope_ex": fit.slope_ex,
        "slope_phi": fit.slope_phi,
        "residual": fit.residual,
        "nonlinear": fit.nonlinear,
    });
    let fit_path = out.join("gate_fidelity_fit.json");
    std::fs::write(&fit_path, serde_json::to_string_pretty(&fit_doc)?)?;
    Ok(vec![csv_path.display().to_string(), fit_path.display().to_string()])
}

fn cmd_czphi_scan(
    cfg: &RunConfig,
    out: &std::path::Path,
    resume: bool,
) -> Result<Vec<String>, Error> {
    let sc = &cfg.czphi_scan;
    let gamma = units::mhz_to_angular(cfg.layout.gamma_mhz);
    let layout =
        giantatom::geometry::preset_two_atom_with(gamma, sc.omega0_over_gamma * gamma);
    let phi_grid = sc.phi_grid();
    let csv_path = out.join("czphi_scan.csv");
    let existing = if resume {
        CsvWriter::load_existing(&csv_path, 2)
    } else {
        Default::default()
    };
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut missing_phi: Vec<f64> = Vec::new();
    for &phi in &phi_grid {
        let all_there = sc.gamma_ex_list.iter().all(|&gx| {
            existing.contains_key(&format!("{},{}", sig(phi), sig(gx)))
        });
        if all_there {
            for &gx in &sc.gamma_ex_list {
                let line = &existing[&format!("{},{}", sig(phi), sig(gx))];
                let f: Vec<f64> =
                    line.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect();
                rows.push((f[0], f[1], f[2], f[3]));
            }
        } else {
            missing_phi.push(phi);
        }
    }
    if !missing_phi.is_empty() {
        let pts = czphi_fidelity_scan(&layout, &missing_phi, &sc.gamma_ex_list, sc.gamma_phi)?;
        for p in pts {
            rows.push((p.phi, p.gamma_ex, p.f_process, p.f_average));
        }
    }
    rows.sort_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    let mut w = CsvWriter::new(&["phi", "gamma_ex", "f_process", "f_average"]);
    for r in &rows {
        w.row_f64(&[r.0, r.1, r.2, r.3]);
    }
    w.write(&csv_path)?;
    Ok(vec![csv_path.display().to_string()])
}

fn cmd_xxz(cfg: &RunConfig, out: &std::path::Path, resume: bool) -> Result<Vec<String>, Error> {
    let xc = &cfg.xxz;
    if xc.t_list.is_empty() {
        return Err(Error::InvalidArgument("xxz.t_list must not be empty".into()));
    }
    let model = xc.model();
    let hw = xc.hardware.build();
    let csv_path = out.join("xxz.csv");
    let existing = if resume {
        CsvWriter::load_existing(&csv_path, 2)
    } else {
        Default::default()
    };
    let todo: Vec<f64> = xc
        .t_list
        .iter()
        .copied()
        .filter(|&t| !existing.contains_key(&format!("{},{}", sig(t), xc.l)))
        .collect();
    let sim = run_simulation(&model, &todo, xc.l, &hw)?;

    let mut header: Vec<String> = vec!["t".into(), "l".into()];
    for k in 1..=model.n_sites {
        header.push(format!("n_{k}"));
    }
    for k in 1..=model.n_sites {
        header.push(format!("leak_{k}"));
    }
    header.push("trace".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(&header_refs);

    let mut lines: Vec<(f64, Vec<String>)> = Vec::new();
    for (i, &t) in todo.iter().enumerate() {
        let mut fields = vec![sig(t), format!("{}", xc.l)];
        fields.extend(sim.populations[i].iter().map(|v| sig(*v)));
        fields.extend(sim.leakage[i].iter().map(|v| sig(*v)));
        fields.push(sig(sim.trace[i]));
        lines.push((t, fields));
    }
    for (key, line) in &existing {
        let t: f64 = key.split(',').next().unwrap().parse().unwrap_or(f64::NAN);
        lines.push((t, line.split(',').map(String::from).collect()));
    }
    lines.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (_, fields) in &lines {
        w.row(fields);
    }
    w.write(&csv_path)?;
    Ok(vec![csv_path.display().to_string()])
}

fn cmd_trotter_error(cfg: &RunConfig, out: &std::path::Path) -> Result<Vec<String>, Error> {
    let xc = &cfg.xxz;
    let model = xc.model();
    let hw = xc.hardware.build();
    let scan = error_scan(&model, &xc.t_list, &xc.l_list, &hw)?;

    let mut header: Vec<String> = vec!["t".into(), "l".into()];
    for k in 1..=model.n_sites {
        header.push(format!("n_{k}"));
    }
    for k in 1..=model.n_sites {
        header.push(format!("dn_{k}"));
    }
    header.push("max_abs_dn".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut w = CsvWriter::new(&header_refs);
    for (li, &l) in scan.l_list.iter().enumerate() {
        for (ti, &t) in scan.times.iter().enumerate() {
            let mut fields = vec![sig(t), format!("{l}")];
            fields.extend(scan.populations[li][ti].iter().map(|v| sig(*v)));
            fields.extend(scan.delta[li][ti].iter().map(|v| sig(*v)));
            let max_abs = scan.delta[li][ti]
                .iter()
                .map(|d| d.abs())
                .fold(0.0f64, f64::max);
            fields.push(sig(max_abs));
            w.row(&fields);
        }
    }
    let csv_path = out.join("trotter_error.csv");
    w.write(&csv_path)?;

    let opt_doc = serde_json::json!({
        "t": scan.times,
        "l_opt": scan.l_opt,
    });
    let opt_path = out.join("l_opt.json");
    std::fs::write(&opt_path, serde_json::to_string_pretty(&opt_doc)?)?;
    Ok(vec![csv_path.display().to_string(), opt_path.display().to_string()])
}

fn cmd_markov_check(cfg: &RunConfig, out: &std::path::Path) -> Result<Vec<String>, Error> {
    let mc = &cfg.markov;
    let gamma_angular_rad_s = 2.0 * std::f64::consts::PI * mc.gamma_mhz * 1e6;
    let gamma_ordinary_rad_s = mc.gamma_mhz * 1e6;
    let angular = markovianity_ratio(gamma_angular_rad_s, mc.length_m, mc.v_m_per_s)?;
    let ordinary = markovianity_ratio(gamma_ordinary_rad_s, mc.length_m, mc.v_m_per_s)?;
    let doc = serde_json::json!({
        "gamma_mhz": mc.gamma_mhz,
        "length_m": mc.length_m,
        "v_m_per_s": mc.v_m_per_s,
        "ratio_gamma_angular": angular,
        "ratio_gamma_ordinary": ordinary,
        "markovian_angular": angular < 0.1,
        "markovian_ordinary": ordinary < 0.1,
    });
    let path = out.join("markov.json");
    std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
    println!(
        "γL/v = {} (γ angular), {} (γ ordinary)",
        sig(angular),
        sig(ordinary)
    );
    Ok(vec![path.display().to_string()])
}
