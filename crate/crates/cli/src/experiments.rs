//! The named experiment recipes. Each one records tables, reported values
//! and pass/fail checks; core errors are carried into the summary.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use soliton_core::diagnostics::{
    decay_scan, default_phase_window, monotonicity_audit, momentum_window, phase_extract, bump_window, Cutoff,
};
use soliton_core::dynamics::{
    evolve, fitted_slope, soliton_center, Formulation, IntegratorConfig, State, TrajectoryRecord,
};
use soliton_core::modulation::{decompose, track, virial_series, ModulationOptions, ModulationSeries, VirialWeights};
use soliton_core::soliton::{
    ode_residuals, soliton_dc, soliton_dx, soliton_hydro, soliton_spin, SolitonParams,
};
use soliton_core::spectral::{
    apply_hc, assemble_hc, chi_decay, coercivity_gc, coercivity_hc_with, essential_edge, essential_edge_numeric,
    form_gc, mc_swap_factor, negative_eigenpair, McReading,
};
use soliton_core::transforms::{constraint_residual, hydro_to_psi, hydro_to_spin};
use soliton_core::{Grid, HydroPair, Result, Window};

use crate::config::{ConfigError, Experiment, ExperimentConfig, PerturbationKind};
use crate::output::{fmt_f64, Check, RunReport, Status, Summary, Table};
use crate::perturb::initial_pair;

#[derive(Default)]
struct Recorder {
    checks: Vec<Check>,
    values: BTreeMap<String, String>,
    tables: Vec<Table>,
    timings: BTreeMap<String, f64>,
}

impl Recorder {
    fn value(&mut self, key: &str, x: f64) {
        self.values.insert(key.to_string(), fmt_f64(x));
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(stage.to_string()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Validates `cfg` and runs its experiment.
pub fn run(cfg: &ExperimentConfig) -> std::result::Result<RunReport, ConfigError> {
    cfg.validate()?;
    let g = cfg.build_grid()?;
    let mut rec = Recorder::default();
    let start = Instant::now();
    let outcome = match cfg.experiment {
        Experiment::Simulate => simulate(cfg, &g, &mut rec),
        Experiment::Spectrum => spectrum(cfg, &g, &mut rec),
        Experiment::Modulate => modulate(cfg, &g, &mut rec),
        Experiment::Monotonicity => monotonicity(cfg, &g, &mut rec),
        Experiment::Virial => virial(cfg, &g, &mut rec),
        Experiment::Phase => phase(cfg, &g, &mut rec),
    };
    rec.timings.insert("total".into(), start.elapsed().as_secs_f64() * 1e3);
    let errors: Vec<String> = outcome.err().map(|e| e.to_string()).into_iter().collect();
    let status = if !errors.is_empty() {
        Status::Error
    } else if rec.checks.iter().any(|c| c.hard && !c.passed) {
        Status::Fail
    } else {
        Status::Pass
    };
    Ok(RunReport {
        config_text: cfg.canonical(),
        summary: Summary {
            experiment: cfg.experiment.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: cfg.hash(),
            speed: fmt_f64(cfg.speed),
            status,
            checks: rec.checks,
            values: rec.values,
            errors,
        },
        tables: rec.tables,
        timings: rec.timings,
    })
}

fn integrator(cfg: &ExperimentConfig) -> IntegratorConfig {
    IntegratorConfig {
        // validated before any run starts
        dt: cfg.time_step().expect("validated config"),
        t_final: cfg.integrator.t_final,
        snapshot_stride: cfg.snapshot_stride(),
        v_guard: cfg.integrator.v_guard,
    }
}

fn initial_state(scheme: Formulation, p: &HydroPair, phase: f64, g: &Grid) -> Result<State> {
    Ok(match scheme {
        Formulation::Spin => State::Spin(hydro_to_spin(p, phase, g)?),
        Formulation::Hydro => State::Hydro(p.clone()),
        Formulation::Psi => State::Psi(hydro_to_psi(p, g)?),
    })
}

fn run_scheme(
    cfg: &ExperimentConfig,
    scheme: Formulation,
    factor: f64,
    g: &Grid,
    rec: &mut Recorder,
) -> Result<TrajectoryRecord> {
    let p0 = initial_pair(cfg.speed, cfg.position, &cfg.perturbation, factor, g)?;
    let state = initial_state(scheme, &p0, cfg.phase, g)?;
    let it = integrator(cfg);
    rec.timed(&format!("evolve_{}", scheme.name()), || evolve(state, g, &it, &mut []))
}

fn perturbed(cfg: &ExperimentConfig) -> bool {
    cfg.perturbation.kind != PerturbationKind::None && cfg.perturbation.amplitude > 0.0
}

fn centers(snaps: &[(f64, HydroPair)], start: f64, g: &Grid) -> Vec<f64> {
    let mut hint = start;
    snaps
        .iter()
        .map(|(_, p)| {
            hint = soliton_center(p, g, hint);
            hint
        })
        .collect()
}

fn l2_distance(a: &HydroPair, b: &HydroPair, g: &Grid) -> f64 {
    let d = a.sub(b);
    g.pair_dot(&d, &d).sqrt()
}

fn simulate(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let primary = cfg.integrator.scheme;
    let traj = run_scheme(cfg, primary, 1.0, g, rec)?;
    let snaps = traj.hydro_snapshots(g)?;
    let center = centers(&snaps, cfg.position, g);
    let constraint: Vec<f64> = traj
        .snapshots
        .iter()
        .map(|s| match &s.state {
            State::Psi(p) => constraint_residual(p, g),
            _ => 0.0,
        })
        .collect();
    let mut columns = vec!["time", "energy", "momentum", "max_v", "unit_deviation", "center"];
    if primary == Formulation::Psi {
        columns.push("constraint");
    }
    let mut table = Table::new("trajectory", &columns);
    for i in 0..traj.times.len() {
        let mut row = vec![
            traj.times[i],
            traj.energy[i],
            traj.momentum[i],
            traj.max_v[i],
            traj.unit_deviation[i],
            center[i],
        ];
        if primary == Formulation::Psi {
            row.push(constraint[i]);
        }
        table.push(&row);
    }
    rec.tables.push(table);

    let speed = fitted_slope(&traj.times, &center);
    let e_drift = TrajectoryRecord::max_relative_drift(&traj.energy);
    let p_drift = TrajectoryRecord::max_relative_drift(&traj.momentum);
    rec.value("fitted_speed", speed);
    rec.value("speed_error", (speed - cfg.speed).abs());
    rec.value("energy_drift", e_drift);
    rec.value("momentum_drift", p_drift);
    rec.check(Check::at_most("energy_drift", e_drift, 1e-8, true));
    rec.check(Check::at_most("momentum_drift", p_drift, 1e-8, true));
    if !perturbed(cfg) {
        rec.check(Check::at_most("speed_error", (speed - cfg.speed).abs(), 1e-3, true));
    }
    match primary {
        Formulation::Spin => {
            let dev = traj.unit_deviation.iter().copied().fold(0.0, f64::max);
            rec.value("unit_deviation", dev);
            rec.check(Check::at_most("unit_deviation", dev, 1e-12, true));
        }
        Formulation::Psi => {
            let worst = constraint.iter().copied().fold(0.0, f64::max);
            rec.value("constraint_residual", worst);
            rec.check(Check::at_most("constraint_residual", worst, 1e-6, true));
        }
        Formulation::Hydro => {}
    }

    if cfg.integrator.compare {
        let schemes = [Formulation::Spin, Formulation::Hydro, Formulation::Psi];
        let mut runs: Vec<(Formulation, Vec<(f64, HydroPair)>)> = vec![(primary, snaps)];
        for s in schemes.into_iter().filter(|s| *s != primary) {
            let t = run_scheme(cfg, s, 1.0, g, rec)?;
            if s == Formulation::Psi {
                let worst = t
                    .snapshots
                    .iter()
                    .map(|x| match &x.state {
                        State::Psi(p) => constraint_residual(p, g),
                        _ => 0.0,
                    })
                    .fold(0.0, f64::max);
                rec.value("constraint_residual", worst);
                if primary != Formulation::Psi {
                    rec.check(Check::at_most("constraint_residual", worst, 1e-6, true));
                }
            }
            runs.push((s, t.hydro_snapshots(g)?));
        }
        runs.sort_by_key(|(s, _)| schemes.iter().position(|x| x == s));
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let names: Vec<String> = pairs
            .iter()
            .map(|(a, b)| format!("l2_{}_{}", runs[*a].0.name(), runs[*b].0.name()))
            .collect();
        let mut columns = vec!["time"];
        columns.extend(names.iter().map(String::as_str));
        let mut table = Table::new("formulations", &columns);
        let mut worst = [0.0_f64; 3];
        for i in 0..runs[0].1.len() {
            let mut row = vec![runs[0].1[i].0];
            for (k, (a, b)) in pairs.iter().enumerate() {
                let d = l2_distance(&runs[*a].1[i].1, &runs[*b].1[i].1, g);
                worst[k] = worst[k].max(d);
                row.push(d);
            }
            table.push(&row);
        }
        rec.tables.push(table);
        for (k, name) in names.iter().enumerate() {
            rec.value(name, worst[k]);
            rec.check(Check::at_most(name, worst[k], 1e-4, true));
        }
    }
    Ok(())
}

/// Smooth pair built from four Gaussian bumps, two per component.
fn random_pair(rng: &mut ChaCha20Rng, g: &Grid) -> HydroPair {
    let mut bumps = [(0.0, 0.0, 1.0); 4];
    for b in bumps.iter_mut() {
        *b = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.7..2.5),
        );
    }
    let f = |i: usize, x: f64| {
        let (a, c, w): (f64, f64, f64) = bumps[i];
        a * (-((x - c) / w).powi(2)).exp()
    };
    HydroPair {
        v: g.map(|x| f(0, x) + f(1, x)),
        w: g.map(|x| f(2, x) + f(3, x)),
    }
}

fn spectrum(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let c = cfg.speed;
    let seed = cfg.perturbation.seed.unwrap_or(0);

    let eigenvalues = rec.timed("hc_dense", || assemble_hc(c, g).map(|m| m.eigenvalues()))?;
    let scale = eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let negatives = eigenvalues.iter().filter(|&&x| x < -1e-8 * scale).count();
    let mut table = Table::new("hc_eigenvalues", &["index", "value"]);
    for (i, x) in eigenvalues.iter().take(cfg.spectrum.eigenvalues).enumerate() {
        table.push(&[i as f64, *x]);
    }
    rec.tables.push(table);
    rec.value("negative_count", negatives as f64);
    rec.check(Check::flag("single_negative_eigenvalue", negatives == 1, true));
    let eig = rec.timed("negative_eigenpair", || negative_eigenpair(c, g))?;
    rec.value("lambda", eig.lambda);
    rec.value("gap", eig.gap);
    let mut table = Table::new("chi", &["x", "chi_v", "chi_w"]);
    for (j, &x) in g.nodes().iter().enumerate() {
        table.push(&[x, eig.chi.v[j], eig.chi.w[j]]);
    }
    rec.tables.push(table);

    let dq = soliton_dx(c, 0.0, g)?;
    let r = apply_hc(c, &dq, g)?;
    let kernel = g.pair_dot(&r, &r).sqrt() / g.pair_dot(&dq, &dq).sqrt();
    rec.value("kernel_residual", kernel);
    rec.check(Check::at_most("kernel_residual", kernel, 1e-6, true));
    let dc = soliton_dc(c, 0.0, g)?;
    let identity = apply_hc(c, &dc, g)?.sub(&soliton_hydro(c, 0.0, g)?.swap()).max_norm();
    rec.value("speed_derivative_identity", identity);
    rec.check(Check::at_most("speed_derivative_identity", identity, 1e-6, true));

    let decay = chi_decay(&eig, g)?;
    rec.value("chi_decay_rate", decay.rate);
    rec.value("chi_decay_predicted", decay.predicted);
    rec.check(Check::at_least("chi_decay_margin", decay.margin(), 1e-3, true));
    rec.check(Check::at_most("chi_decay_relative_error", decay.relative_error(), 0.1, true));

    let edge = essential_edge(c)?;
    rec.value("tau", edge.tau);
    let reference = essential_edge(std::f64::consts::FRAC_1_SQRT_2)?.tau;
    rec.check(Check::at_most("tau_reference_speed", (reference - 1.0).abs(), 1e-12, true));
    if cfg.spectrum.edge {
        let eg = Grid::new(cfg.spectrum.edge_half_length, cfg.spectrum.edge_points)?;
        let est = rec.timed("tc_edge", || essential_edge_numeric(c, &eg))?;
        rec.value("edge_smallest_nonkernel", est.smallest_nonkernel);
        rec.value("edge_extended", est.extended_edge);
        rec.value("edge_kernel_value", est.kernel_value);
        rec.value("edge_below_count", est.below_edge as f64);
        rec.value("edge_extended_relative_error", (est.extended_edge - est.tau).abs() / est.tau);
        rec.check(Check::at_most("edge_relative_error", est.relative_error(), 0.05, true));
    }

    let h = rec.timed("coercivity_h", || coercivity_hc_with(c, g, &eig, cfg.spectrum.restarts, seed))?;
    rec.value("coercivity_h", h.value);
    if let Some(x) = h.cross_check {
        rec.value("coercivity_h_cross_check", x);
    }
    rec.check(Check::greater("coercivity_h", h.value, 0.0, true));
    let gc = rec.timed("coercivity_g", || coercivity_gc(c, g, &eig, true))?;
    let gc_free = rec.timed("coercivity_g", || coercivity_gc(c, g, &eig, false))?;
    rec.value("coercivity_g", gc.value);
    rec.value("coercivity_g_unconstrained", gc_free.value);
    rec.check(Check::greater("coercivity_g", gc.value, 0.0, true));
    rec.check(Check::at_most("coercivity_g_unconstrained", gc_free.value.abs(), 1e-6, true));

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut table = Table::new(
        "gc_paths",
        &["pair", "path_a", "path_b", "path_b_printed", "path_k", "path_k_printed"],
    );
    let (mut ab, mut bk, mut printed, mut min_b) = (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY);
    for i in 0..cfg.spectrum.random_pairs {
        let u = random_pair(&mut rng, g);
        let v = form_gc(c, &u, g)?;
        ab = ab.max(v.ab_relative());
        bk = bk.max(v.bk_relative());
        printed = printed.max((v.path_a - v.path_b_printed).abs() / v.path_a.abs());
        min_b = min_b.min(v.path_b);
        table.push(&[i as f64, v.path_a, v.path_b, v.path_b_printed, v.path_k, v.path_k_printed]);
    }
    rec.tables.push(table);
    rec.value("gc_path_ab", ab);
    rec.value("gc_path_bk", bk);
    rec.value("gc_printed_weight_mismatch", printed);
    rec.check(Check::at_most("gc_path_ab", ab, 1e-7, true));
    rec.check(Check::at_most("gc_path_bk", bk, 1e-7, true));
    rec.check(Check::at_least("gc_nonnegative", min_b, 0.0, true));
    let fine = Grid::for_speed_resolved(c, 10.0)?;
    let q = soliton_hydro(c, 0.0, &fine)?;
    let on_soliton = form_gc(c, &q, &fine)?;
    let q_scale = fine.norm_x(&q, None)?.powi(2);
    let kernel_g = on_soliton.path_a.abs().max(on_soliton.path_b.abs()).max(on_soliton.path_k.abs()) / q_scale;
    rec.value("gc_on_soliton", kernel_g);
    rec.check(Check::at_most("gc_on_soliton", kernel_g, 1e-10, true));
    let (factor, residual) = mc_swap_factor(c, g, McReading::Squared)?;
    rec.value("mc_swap_factor", factor);
    rec.value("mc_swap_residual", residual);
    rec.check(Check::at_most("mc_swap_factor", (factor + 1.0).abs(), 1e-8, true));
    rec.check(Check::at_most("mc_swap_residual", residual, 1e-8, true));
    Ok(())
}

/// Largest `d_j / min_{i<j} d_i` over frames after `start`.
fn rebound(values: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for &d in values {
        if best.is_finite() && best > 0.0 {
            worst = worst.max(d / best);
        }
        best = best.min(d);
    }
    worst
}

struct TrackedRun {
    snaps: Vec<(f64, HydroPair)>,
    series: ModulationSeries,
}

fn tracked_run(cfg: &ExperimentConfig, factor: f64, g: &Grid, rec: &mut Recorder) -> Result<TrackedRun> {
    let traj = run_scheme(cfg, cfg.integrator.scheme, factor, g, rec)?;
    let snaps = traj.hydro_snapshots(g)?;
    let series = rec.timed("track", || {
        track(&snaps, (cfg.speed, cfg.position), g, ModulationOptions::default())
    });
    Ok(TrackedRun { snaps, series })
}

fn track_table(name: &str, series: &ModulationSeries, window: f64, g: &Grid) -> Result<(Table, Vec<f64>, Vec<f64>)> {
    let mut table = Table::new(
        name,
        &["time", "speed", "position", "eps_x", "eps_window", "orth_dx", "orth_chi", "iterations"],
    );
    let (mut full, mut local) = (Vec::new(), Vec::new());
    for f in &series.frames {
        match &f.state {
            Some(s) => {
                let e = g.norm_x(&s.residual, None)?;
                let w = g.norm_x(&s.residual, Some(Window::ball(0.0, window)))?;
                full.push(e);
                local.push(w);
                table.push(&[
                    f.time,
                    s.speed,
                    s.position,
                    e,
                    w,
                    s.orthogonality[0],
                    s.orthogonality[1],
                    s.iterations as f64,
                ]);
            }
            None => table.push(&[f.time, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]),
        }
    }
    Ok((table, full, local))
}

fn modulate(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let amp = cfg.perturbation.amplitude;
    let factors: &[f64] = if cfg.modulation.scaling && perturbed(cfg) {
        &[1.0, 0.5]
    } else {
        &[1.0]
    };
    let mut rates = Vec::new();
    let mut sups = Vec::new();
    let mut failed = 0;
    for (i, &factor) in factors.iter().enumerate() {
        let run = tracked_run(cfg, factor, g, rec)?;
        failed += run.series.frames.iter().filter(|f| f.state.is_none()).count();
        let label = if i == 0 { "full" } else { "half" };
        let (table, full, local) = track_table(&format!("track_{label}"), &run.series, cfg.diagnostics.window, g)?;
        rec.tables.push(table);
        let rate = run.series.modulation_rate();
        rec.value(&format!("modulation_rate_{label}"), rate);
        rates.push(rate);
        let times: Vec<f64> = run.series.successful().map(|(t, _)| t).collect();
        let t_end = times.last().copied().unwrap_or(0.0);
        let late: Vec<f64> = times
            .iter()
            .zip(&local)
            .filter(|(t, _)| **t >= cfg.diagnostics.transient * t_end)
            .map(|(_, d)| *d)
            .collect();
        let back = rebound(&late);
        rec.value(&format!("window_rebound_{label}"), back);
        rec.check(Check::at_most(&format!("window_distance_nonincreasing_{label}"), back, 1.05, false));
        if perturbed(cfg) {
            let sup = full.iter().copied().fold(0.0, f64::max) / (amp * factor);
            rec.value(&format!("sup_eps_over_amplitude_{label}"), sup);
            rec.check(Check::at_most(&format!("sup_eps_over_amplitude_{label}"), sup, 10.0, false));
            sups.push(sup);
        }
    }
    rec.value("failed_frames", failed as f64);
    rec.check(Check::flag("tracking_complete", failed == 0, true));
    if rates.len() == 2 {
        rec.value("rate_ratio", rates[0] / rates[1]);
        rec.check(Check::within("rate_ratio", rates[0] / rates[1], 1.5, 2.5, true));
    }
    if sups.len() == 2 {
        rec.value("sup_ratio", sups[0] / sups[1]);
        rec.check(Check::within("sup_ratio", sups[0] / sups[1], 0.5, 2.0, false));
    }
    if cfg.modulation.recovery_grid {
        let mut worst: f64 = 0.0;
        let mut table = Table::new("recovery", &["c", "a", "speed_error", "position_error", "iterations"]);
        rec.timed("recovery_grid", || -> Result<()> {
            for c in [0.3, 0.6, 0.8] {
                let fine = Grid::for_speed_resolved(c, 10.0)?;
                for a in [-1.5, 0.0, 1.5] {
                    let s = decompose(&soliton_hydro(c, a, &fine)?, (c - 0.01, a + 0.03), &fine)?;
                    let (dc, da) = ((s.speed - c).abs(), (s.position - a).abs());
                    worst = worst.max(dc).max(da);
                    table.push(&[c, a, dc, da, s.iterations as f64]);
                }
            }
            Ok(())
        })?;
        rec.tables.push(table);
        rec.value("recovery_error", worst);
        rec.check(Check::at_most("recovery_error", worst, 1e-10, true));
    }
    Ok(())
}

fn monotonicity(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let c = cfg.speed;
    let cutoff = match cfg.diagnostics.nu {
        Some(nu) => Cutoff::new(nu)?,
        None => Cutoff::for_speed(c)?,
    };
    let run = tracked_run(cfg, 1.0, g, rec)?;
    let failed = run.series.frames.iter().filter(|f| f.state.is_none()).count();
    rec.check(Check::flag("tracking_complete", failed == 0, true));
    if failed > 0 {
        return Ok(());
    }
    let sigmas = cfg.sigma_values();
    let report = rec.timed("audit", || {
        monotonicity_audit(&run.snaps, &run.series, &cfg.diagnostics.r_grid, &sigmas, cutoff, g)
    })?;
    let mut cells = Table::new(
        "cells",
        &[
            "r",
            "sigma",
            "identity_error",
            "identity_error_printed",
            "fitted_b",
            "fitted_b_two_time",
            "window_variation",
        ],
    );
    let mut audit = Table::new(
        "audit",
        &["r", "sigma", "time", "window", "rate", "identity", "identity_printed", "lower_term"],
    );
    let nu = cutoff.rate;
    let mut common_b: f64 = 0.0;
    let has_static = report.cells.iter().any(|cell| cell.sigma == 0.0);
    for cell in &report.cells {
        let lo = cell.window.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = cell.window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cells.push(&[
            cell.r,
            cell.sigma,
            cell.identity_error,
            cell.identity_error_printed,
            cell.fitted_b,
            cell.fitted_b_two_time,
            hi - lo,
        ]);
        for i in 0..cell.times.len() {
            audit.push(&[
                cell.r,
                cell.sigma,
                cell.times[i],
                cell.window[i],
                cell.rate[i],
                cell.identity[i],
                cell.identity_printed[i],
                cell.lower_term[i],
            ]);
        }
        if !has_static || cell.sigma == 0.0 {
            common_b = common_b.max(cell.fitted_b_two_time);
        }
    }
    rec.tables.push(cells);
    rec.tables.push(audit);
    let printed = report
        .cells
        .iter()
        .map(|c| c.identity_error_printed)
        .fold(0.0, f64::max);
    rec.value("identity_error", report.max_identity_error());
    rec.value("identity_error_printed", printed);
    rec.value("two_time_b", common_b);
    rec.value("cutoff_rate", nu);
    rec.check(Check::at_most("identity_error", report.max_identity_error(), 1e-4, true));
    // every pair (t0 <= t1) at every static R satisfies the inequality with the common B
    let holds = report
        .cells
        .iter()
        .filter(|cell| !has_static || cell.sigma == 0.0)
        .all(|cell| {
            let bound = common_b * (-2.0 * nu * cell.r.abs()).exp();
            cell.window.iter().enumerate().all(|(i, &w0)| {
                cell.window[i..]
                    .iter()
                    .all(|&w1| w1 >= w0 - bound * (1.0 + 1e-12) - 1e-15)
            })
        });
    rec.check(Check::flag("two_time_inequality", holds && common_b.is_finite(), true));
    rec.check(Check::at_most("two_time_b_order_one", common_b, 10.0, false));

    let mut decay = Table::new(
        "decay",
        &std::iter::once("time".to_string())
            .chain((0..=cfg.diagnostics.k_max).map(|k| format!("v_d{k}")))
            .chain((0..=cfg.diagnostics.k_max).map(|k| format!("w_d{k}")))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
    );
    let mut decay_max: f64 = 0.0;
    for ((t, p), f) in run.snaps.iter().zip(&run.series.frames) {
        let Some(s) = &f.state else { continue };
        let scan = decay_scan(p, s.position, nu, cfg.diagnostics.k_max, g)?;
        let mut row = vec![*t];
        row.extend(&scan.v);
        row.extend(&scan.w);
        decay_max = decay_max.max(scan.v[0] + scan.w[0]);
        decay.push(&row);
    }
    rec.tables.push(decay);
    rec.value("decay_max", decay_max);

    if cfg.diagnostics.soliton_check {
        let q = soliton_hydro(c, cfg.position, g)?;
        let it = integrator(cfg);
        let traj = rec.timed("soliton_run", || evolve(State::Hydro(q), g, &it, &mut []))?;
        let mut variation: f64 = 0.0;
        for &r in &cfg.diagnostics.r_grid {
            let values: Vec<f64> = traj
                .snapshots
                .iter()
                .map(|s| {
                    let p = s.state.hydro(g)?;
                    momentum_window(&p, cfg.position + c * s.time, r, cutoff, g)
                })
                .collect::<Result<_>>()?;
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            variation = variation.max(hi - lo);
        }
        rec.value("soliton_window_variation", variation);
        rec.check(Check::at_most("soliton_window_variation", variation, 1e-6, true));
    }
    Ok(())
}

fn virial(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let run = tracked_run(cfg, 1.0, g, rec)?;
    let failed = run.series.frames.iter().filter(|f| f.state.is_none()).count();
    rec.check(Check::flag("tracking_complete", failed == 0, true));
    let weights = VirialWeights::default();
    let v = virial_series(&run.series, weights, g)?;
    let mut table = Table::new("virial", &["time", "i", "j", "n", "n_rate", "u_norm2"]);
    for k in 0..v.times.len() {
        table.push(&[v.times[k], v.i[k], v.j[k], v.n[k], v.n_rate[k], v.u_norm2[k]]);
    }
    rec.tables.push(table);
    rec.value("fitted_a", v.fitted_a);
    rec.value("weight_a", weights.a);
    rec.value("weight_b", weights.b);
    rec.value("weight_r", weights.r);
    Ok(())
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

fn phase(cfg: &ExperimentConfig, g: &Grid, rec: &mut Recorder) -> Result<()> {
    let c = cfg.speed;
    let chi = if cfg.phase_window == 4.0 {
        default_phase_window(g)
    } else {
        bump_window(g, cfg.phase_window)
    };
    let m = soliton_spin(SolitonParams::new(c.abs(), 0.0, 0.0)?, g)?;
    let base = phase_extract(&m, 0.0, &chi, g)?;
    rec.value("soliton_phase", base);
    rec.check(Check::at_most("soliton_phase_zero", angular_distance(base, 0.0), 1e-10, true));
    let mut worst: f64 = 0.0;
    for theta in [0.3, 2.0, 5.5] {
        let got = phase_extract(&m.rotated(theta), 0.0, &chi, g)?;
        worst = worst.max(angular_distance(got, theta));
    }
    rec.check(Check::at_most("rotation_equivariance", worst, 1e-10, true));
    let neg = soliton_spin(SolitonParams::new(-c.abs(), 0.0, 0.0)?, g)?;
    let flipped = phase_extract(&neg, 0.0, &chi, g)?;
    rec.check(Check::at_most(
        "negative_speed_branch",
        angular_distance(flipped, std::f64::consts::PI),
        1e-10,
        true,
    ));

    let p0 = initial_pair(c, cfg.position, &cfg.perturbation, 1.0, g)?;
    let state = State::Spin(hydro_to_spin(&p0, cfg.phase, g)?);
    let it = integrator(cfg);
    let traj = rec.timed("evolve_spin", || evolve(state, g, &it, &mut []))?;
    let snaps = traj.hydro_snapshots(g)?;
    let series = rec.timed("track", || track(&snaps, (c, cfg.position), g, ModulationOptions::default()));
    let mut table = Table::new("phase", &["time", "position", "theta"]);
    let mut undefined = 0;
    for (snap, frame) in traj.snapshots.iter().zip(&series.frames) {
        let (State::Spin(m), Some(s)) = (&snap.state, &frame.state) else {
            undefined += 1;
            continue;
        };
        match phase_extract(m, s.position, &chi, g) {
            Ok(theta) => table.push(&[snap.time, s.position, theta]),
            Err(_) => undefined += 1,
        }
    }
    rec.tables.push(table);
    rec.value("undefined_frames", undefined as f64);
    rec.check(Check::flag("phase_defined", undefined == 0, true));
    Ok(())
}

/// `max_c ode residual` over the listed speeds on `g`.
pub fn soliton_residual(speeds: &[f64], g: &Grid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &c in speeds {
        worst = worst.max(ode_residuals(c, g)?.max());
    }
    Ok(worst)
}
