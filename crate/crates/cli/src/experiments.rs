//! One runner per experiment kind. Each writes its tables into the run
//! directory and returns a summary for the manifest plus any warnings.

use anyhow::{anyhow, bail, Result};
use serde_json::{json, Value};

use ddxy::cqed::{compare_to_xy, derived_couplings, dispersive_checks, time_grid, truncation_difference};
use ddxy::dense::{dense_liouvillian, steadystate_dense};
use ddxy::meanfield::{
    fit_density_oscillations, locate_transition, scan_bistability, sweep_detuning, MeanFieldOptions, SweepGrid,
    SweepResult, SweepSpec,
};
use ddxy::meanfield::ProductState;
use ddxy::tensor::{correlation_features, mpo_sweep, mps_trajectory_run, product_mpo, save_checkpoint, MpoPoint};
use ddxy::trajectories::{run_ensemble, EnsembleStats};
use ddxy::{Lattice, LocalOp, ModelParams};

use crate::config::{Direction, EnsembleBlock, ExperimentConfig, Kind};
use crate::output::{num, opt, RunDir};

pub struct Outcome {
    pub summary: Value,
    pub warnings: Vec<String>,
}

fn s(x: impl ToString) -> String {
    x.to_string()
}

fn label(d: Direction) -> &'static str {
    match d {
        Direction::LeftToRight => "L-R",
        Direction::RightToLeft => "R-L",
    }
}

pub fn run(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome> {
    let seed = cfg.seed.ok_or_else(|| anyhow!("seed not resolved"))?;
    match cfg.kind {
        Kind::MfSweep => mf_sweep(cfg, seed, dir),
        Kind::MfScan => mf_scan(cfg, seed, dir),
        Kind::MfTraj | Kind::MpsTraj => trajectories(cfg, seed, dir),
        Kind::MpoNess => mpo_ness(cfg, dir),
        Kind::MpoSweep => mpo_sweep_run(cfg, dir),
        Kind::CqedCompare => cqed(cfg, dir),
        Kind::Oracle => oracle(cfg, dir),
    }
}

fn setup(cfg: &ExperimentConfig) -> Result<(ModelParams, Lattice)> {
    Ok((cfg.model().map_err(|e| anyhow!(e))?, cfg.lattice().map_err(|e| anyhow!(e))?))
}

fn mf_sweep(cfg: &ExperimentConfig, seed: u64, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let opts = cfg.meanfield.unwrap_or_default();
    let mut warnings = Vec::new();
    let mut results: Vec<(Direction, SweepResult)> = Vec::new();
    for &d in &sweep.directions {
        let mut spec = SweepSpec::new(sweep.ordered(d).map_err(|e| anyhow!(e))?, d.into(), seed);
        spec.anchor_seeds = sweep.anchor_seeds;
        spec.warm_start = sweep.warm_start;
        let r = sweep_detuning(&spec, &params, &lattice, &opts)?;
        let unconverged = r.records.iter().filter(|x| !x.converged).count();
        if unconverged > 0 {
            warnings.push(format!("{}: {unconverged} points did not reach tol", label(d)));
        }
        if !r.anchor_unique {
            warnings.push(format!("{}: anchor seeds disagree by {:.3e}", label(d), r.anchor_spread));
        }
        results.push((d, r));
    }

    let gamma = params.decay;
    let mut t = dir.table("sweep.csv", &["delta_over_gamma", "direction", "n_c", "converged"]);
    let mut prof = dir.table("profiles.csv", &["delta_over_gamma", "direction", "site", "n"]);
    for (d, r) in &results {
        for rec in &r.records {
            t.row(&[num(rec.detuning / gamma), s(label(*d)), num(rec.central_density), s(rec.converged)]);
            for (j, n) in rec.profile.iter().enumerate() {
                prof.row(&[num(rec.detuning / gamma), s(label(*d)), s(j + 1), num(*n)]);
            }
        }
    }
    dir.write_table(t)?;
    dir.write_table(prof)?;

    let transitions: Vec<Value> = results
        .iter()
        .map(|(d, r)| {
            let tr = locate_transition(&r.records);
            json!({
                "direction": label(*d),
                "transition": tr.map(|t| t.detuning / gamma),
                "jump": tr.map(|t| t.jump),
                "anchor_spread": r.anchor_spread,
            })
        })
        .collect();

    let mut fits = Vec::new();
    if let Some(fit) = &cfg.fit {
        let mut ft = dir.table(
            "fit.csv",
            &["delta_over_gamma", "direction", "amplitude", "decay_length", "wavenumber", "phase", "bulk_density", "relative_residual", "failed"],
        );
        for &target in &fit.detunings {
            // Prefer the branch reached from large detuning.
            let (d, r) = results
                .iter()
                .find(|(d, _)| *d == Direction::RightToLeft)
                .or_else(|| results.first())
                .expect("at least one direction");
            let rec = r.nearest(target).expect("non-empty sweep");
            if (rec.detuning - target).abs() > 1e-9 {
                warnings.push(format!("fit at {target}: using nearest grid point {}", rec.detuning));
            }
            let f = fit_density_oscillations(&rec.profile, &fit.window)?;
            if f.failed {
                warnings.push(format!("fit at {target}: profile is not oscillatory"));
            }
            ft.row(&[
                num(rec.detuning / gamma),
                s(label(*d)),
                num(f.amplitude),
                num(f.decay_length),
                num(f.wavenumber),
                num(f.phase),
                num(f.bulk_density),
                num(f.relative_residual),
                s(f.failed),
            ]);
            fits.push(json!({"detuning": rec.detuning, "decay_length": f.decay_length, "wavenumber": f.wavenumber}));
        }
        dir.write_table(ft)?;
    }
    Ok(Outcome { summary: json!({"transitions": transitions, "fits": fits}), warnings })
}

fn mf_scan(cfg: &ExperimentConfig, seed: u64, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let sweep = cfg.sweep.as_ref().expect("validated");
    let scan = cfg.scan.as_ref().expect("validated");
    let grid = SweepGrid {
        anchor_low: sweep.anchor_low.expect("validated"),
        anchor_high: sweep.anchor_high.expect("validated"),
        step: sweep.step.expect("validated"),
    };
    let opts: MeanFieldOptions = cfg.meanfield.unwrap_or_default();
    let recs = scan_bistability(&scan.hoppings, &scan.drives, &params, &lattice, &grid, &opts, seed)?;
    let mut t = dir.table(
        "scan.csv",
        &["hopping", "drive", "transition_lr", "transition_rl", "interval_low", "interval_high", "max_branch_difference", "converged"],
    );
    let mut warnings = Vec::new();
    let mut bistable = 0;
    for r in &recs {
        if !r.all_converged {
            warnings.push(format!("J={} Ω={}: some points did not reach tol", r.hopping, r.drive));
        }
        bistable += usize::from(r.interval.is_some());
        t.row(&[
            num(r.hopping),
            num(r.drive),
            opt(r.left_to_right.map(|x| x.detuning)),
            opt(r.right_to_left.map(|x| x.detuning)),
            opt(r.interval.map(|x| x.0)),
            opt(r.interval.map(|x| x.1)),
            num(r.max_branch_difference),
            s(r.all_converged),
        ]);
    }
    dir.write_table(t)?;
    Ok(Outcome { summary: json!({"points": recs.len(), "bistable": bistable}), warnings })
}

fn trajectories(cfg: &ExperimentConfig, seed: u64, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let e: &EnsembleBlock = cfg.ensemble.as_ref().expect("validated");
    let detunings = e.detunings.clone().unwrap_or_else(|| vec![params.detuning]);
    let spec = e.spec(seed);
    let gamma = params.decay;
    let mut t = dir.table(
        "ensemble.csv",
        &["delta_over_gamma", "n_traj", "mean", "stderr", "total_jumps", "low_peak", "high_peak", "low_count", "high_count"],
    );
    let mut h = dir.table("histogram.csv", &["delta_over_gamma", "bin_center", "count"]);
    let mut a = dir.table("averages.csv", &["delta_over_gamma", "trajectory", "n_c"]);
    let mut summary = Vec::new();
    for &d in &detunings {
        let p = params.with_detuning(d);
        let stats: EnsembleStats = match (cfg.kind, e.chi) {
            (Kind::MpsTraj, Some(chi)) => mps_trajectory_run(&p, &lattice, chi, &spec)?,
            (Kind::MpsTraj, None) => bail!("mps-traj needs ensemble.chi"),
            _ => run_ensemble(&p, &lattice, &spec)?,
        };
        let bi = stats.histogram.bimodality(0.15, 0.05);
        t.row(&[
            num(d / gamma),
            s(stats.n_traj),
            num(stats.mean),
            num(stats.stderr),
            s(stats.total_jumps),
            opt(bi.map(|b| b.low_peak)),
            opt(bi.map(|b| b.high_peak)),
            s(bi.map_or(0, |b| b.low_count)),
            s(bi.map_or(0, |b| b.high_count)),
        ]);
        for (k, c) in stats.histogram.counts.iter().enumerate() {
            h.row(&[num(d / gamma), num(stats.histogram.center(k)), s(c)]);
        }
        for (k, x) in stats.central_averages.iter().enumerate() {
            a.row(&[num(d / gamma), s(k), num(*x)]);
        }
        summary.push(json!({"detuning": d, "mean": stats.mean, "stderr": stats.stderr, "bimodal": bi.is_some()}));
    }
    dir.write_table(t)?;
    dir.write_table(h)?;
    dir.write_table(a)?;
    Ok(Outcome { summary: json!({"ensembles": summary}), warnings: Vec::new() })
}

fn correlation_columns(max_distance: usize) -> Vec<String> {
    (1..=max_distance).map(|r| format!("C{r}")).collect()
}

fn point_row(p: &MpoPoint, gamma: f64, direction: &str, width: usize) -> Vec<String> {
    let mut row = vec![num(p.detuning / gamma), s(direction), num(p.central_density)];
    for r in 0..width {
        row.push(p.correlations.get(r).map_or_else(|| "nan".into(), |c| num(c.value)));
    }
    row.extend([num(p.entropy), s(p.report.converged), num(p.report.residual), s(p.report.max_bond)]);
    row
}

fn mpo_columns(max_distance: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["delta_over_gamma", "direction", "n_c"].map(String::from).to_vec();
    cols.extend(correlation_columns(max_distance));
    cols.extend(["entropy", "converged", "residual", "max_bond"].map(String::from));
    cols
}

fn mpo_ness(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let tebd = cfg.tebd.as_ref().expect("validated");
    let opts = tebd.options().map_err(|e| anyhow!(e))?;
    let start = product_mpo(&ProductState::all_down(lattice.n_sites()));
    let (points, state) = mpo_sweep(&params, &lattice, &[params.detuning], start, &opts)?;
    let p = &points[0];
    let mut warnings = Vec::new();
    if !p.report.converged {
        warnings.push(format!("not converged: residual {:.3e} after t={}", p.report.residual, p.report.elapsed));
    }
    let cols = mpo_columns(opts.max_distance);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = dir.table("ness.csv", &cols);
    t.row(&point_row(p, params.decay, "-", opts.max_distance));
    dir.write_table(t)?;
    let mut prof = dir.table("profile.csv", &["site", "n"]);
    for (j, n) in p.profile.iter().enumerate() {
        prof.row(&[s(j + 1), num(*n)]);
    }
    dir.write_table(prof)?;
    let mut checkpoint = None;
    if tebd.checkpoint {
        let name = format!("ness-{}.json", &dir.hash()[..12]);
        save_checkpoint(&state, &dir.path(&name))?;
        dir.register(&name);
        checkpoint = Some(name);
    }
    Ok(Outcome {
        summary: json!({
            "central_density": p.central_density,
            "entropy": p.entropy,
            "discarded_weight": p.report.discarded_weight,
            "checkpoint": checkpoint,
        }),
        warnings,
    })
}

fn mpo_sweep_run(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let tebd = cfg.tebd.as_ref().expect("validated");
    let sweep = cfg.sweep.as_ref().expect("validated");
    let opts = tebd.options().map_err(|e| anyhow!(e))?;
    let cols = mpo_columns(opts.max_distance);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = dir.table("mpo_sweep.csv", &cols);
    let mut warnings = Vec::new();
    let mut features = Vec::new();
    for &d in &sweep.directions {
        let grid = sweep.ordered(d).map_err(|e| anyhow!(e))?;
        let start = product_mpo(&ProductState::all_down(lattice.n_sites()));
        let (mut points, _) = mpo_sweep(&params, &lattice, &grid, start, &opts)?;
        let unconverged = points.iter().filter(|p| !p.report.converged).count();
        if unconverged > 0 {
            warnings.push(format!("{}: {unconverged} points did not reach tol", label(d)));
        }
        for p in &points {
            t.row(&point_row(p, params.decay, label(d), opts.max_distance));
        }
        points.sort_by(|a, b| a.detuning.total_cmp(&b.detuning));
        let xs: Vec<f64> = points.iter().map(|p| p.detuning / params.decay).collect();
        let c1: Vec<f64> = points.iter().map(|p| p.correlations.first().map_or(f64::NAN, |c| c.value)).collect();
        let ent: Vec<f64> = points.iter().map(|p| p.entropy).collect();
        let f = correlation_features(&xs, &c1, &ent)?;
        features.push(json!({"direction": label(d), "features": f}));
    }
    dir.write_table(t)?;
    Ok(Outcome { summary: json!({"features": features}), warnings })
}

fn cqed(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome> {
    let c = cfg.circuit.as_ref().expect("validated");
    let times = time_grid(c.t_end(), c.samples);
    let mut t = dir.table(
        "cqed.csv",
        &["scale", "j_eff", "j12", "mapped_detuning", "deviation", "norm_error"],
    );
    let mut pops = dir.table("populations.csv", &["scale", "time", "qubit", "full", "xy"]);
    let mut warnings = Vec::new();
    for f in dispersive_checks(&c.spec(1.0), c.decay) {
        if f.level == ddxy::cqed::FindingLevel::Warn {
            warnings.push(format!("{}: {}", f.check, f.detail));
        }
    }
    let mut deviations = Vec::new();
    for &scale in &c.scales {
        let spec = c.spec(scale);
        let cmp = compare_to_xy(&spec, c.reference, &times)?;
        let dc = derived_couplings(&spec)?;
        t.row(&[
            num(scale),
            num(dc.j_eff),
            num(dc.j12),
            num(dc.mapped_detuning),
            num(cmp.deviation),
            num(cmp.full.norm_error),
        ]);
        for (k, time) in times.iter().enumerate() {
            for q in 0..spec.n_qubits {
                pops.row(&[num(scale), num(*time), s(q + 1), num(cmp.full.values[k][q]), num(cmp.xy.values[k][q])]);
            }
        }
        deviations.push(json!({"scale": scale, "deviation": cmp.deviation}));
    }
    let cutoff = truncation_difference(&c.spec(1.0), c.n_max, c.n_max + 1, &times).ok();
    dir.write_table(t)?;
    dir.write_table(pops)?;
    Ok(Outcome { summary: json!({"deviations": deviations, "cutoff_difference": cutoff}), warnings })
}

fn oracle(cfg: &ExperimentConfig, dir: &mut RunDir) -> Result<Outcome> {
    let (params, lattice) = setup(cfg)?;
    let ss = steadystate_dense(&dense_liouvillian(&lattice, &params)?)?;
    let mut warnings = Vec::new();
    if ss.is_degenerate() {
        warnings.push("steady state is not unique".into());
    }
    let rho = &ss.state;
    let n = lattice.n_sites();
    let dens = rho.densities();
    let mut prof = dir.table("profile.csv", &["site", "n"]);
    for (j, x) in dens.iter().enumerate() {
        prof.row(&[s(j + 1), num(*x)]);
    }
    dir.write_table(prof)?;
    let mut corr = dir.table("correlations.csv", &["site_a", "site_b", "nn", "g2"]);
    for a in 0..n {
        for b in a + 1..n {
            let nn = rho.two_point(LocalOp::Number, a, LocalOp::Number, b).re;
            corr.row(&[s(a + 1), s(b + 1), num(nn), num(nn / (dens[a] * dens[b]))]);
        }
    }
    dir.write_table(corr)?;
    Ok(Outcome {
        summary: json!({
            "central_density": dens[lattice.central_site()],
            "min_eigenvalue": rho.min_eigenvalue()?,
        }),
        warnings,
    })
}
