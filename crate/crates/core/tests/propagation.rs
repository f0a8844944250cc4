use soliton_core::diagnostics::{monotonicity_audit, Cutoff};
use soliton_core::dynamics::{evolve, IntegratorConfig, State};
use soliton_core::modulation::{track, ModulationOptions};
use soliton_core::soliton::soliton_hydro;
use soliton_core::transforms::{hydro_to_psi, hydro_to_spin, psi_to_hydro, spin_to_hydro};
use soliton_core::{Grid, HydroPair};

fn l2(a: &HydroPair, b: &HydroPair, g: &Grid) -> f64 {
    let d = a.sub(b);
    g.pair_dot(&d, &d).sqrt()
}

fn bumped(c: f64, g: &Grid) -> HydroPair {
    let mut p = soliton_hydro(c, 0.0, g).unwrap();
    for (j, x) in g.nodes().iter().enumerate() {
        p.v[j] += 5e-3 * (-(x - 1.0) * (x - 1.0)).exp();
        p.w[j] -= 5e-3 * (-(x + 1.0) * (x + 1.0)).exp();
    }
    p
}

#[test]
fn every_formulation_transports_the_soliton() {
    let c = 0.6;
    let g = Grid::for_speed(c).unwrap();
    let q = soliton_hydro(c, 0.0, &g).unwrap();
    let cfg = IntegratorConfig {
        dt: 1e-3,
        t_final: 1.0,
        snapshot_stride: 1000,
        v_guard: 0.05,
    };
    let exact = soliton_hydro(c, c * cfg.t_final, &g).unwrap();
    let states = [
        State::Hydro(q.clone()),
        State::Spin(hydro_to_spin(&q, 0.0, &g).unwrap()),
        State::Psi(hydro_to_psi(&q, &g).unwrap()),
    ];
    for s in states {
        let name = s.formulation().name();
        let rec = evolve(s, &g, &cfg, &mut []).unwrap();
        let last = rec.snapshots.last().unwrap().state.hydro(&g).unwrap();
        let err = l2(&last, &exact, &g);
        assert!(err < 1e-6, "{name}: {err:e}");
    }
}

#[test]
fn transforms_round_trip_on_perturbed_data() {
    // wide box: the wrapped soliton tail costs ~1e-10 at the default size
    let g = Grid::new(40.0, 1024).unwrap();
    let p = bumped(0.6, &g);
    let via_spin = spin_to_hydro(&hydro_to_spin(&p, 0.4, &g).unwrap(), &g).unwrap();
    let via_psi = psi_to_hydro(&hydro_to_psi(&p, &g).unwrap(), &g).unwrap();
    assert!(via_spin.sub(&p).max_norm() < 1e-10);
    assert!(via_psi.sub(&p).max_norm() < 1e-10);
}

#[test]
fn audit_closes_along_a_perturbed_run() {
    let c = 0.6;
    let g = Grid::new(80.0, 2048).unwrap();
    let cfg = IntegratorConfig {
        dt: 1e-3,
        t_final: 1.0,
        snapshot_stride: 10,
        v_guard: 0.05,
    };
    let rec = evolve(State::Hydro(bumped(c, &g)), &g, &cfg, &mut []).unwrap();
    let snaps = rec.hydro_snapshots(&g).unwrap();
    let series = track(&snaps, (c, 0.0), &g, ModulationOptions::default());
    let report = monotonicity_audit(
        &snaps,
        &series,
        &[5.0, 10.0],
        &[-0.1, 0.0, 0.1],
        Cutoff::for_speed(c).unwrap(),
        &g,
    )
    .unwrap();
    assert_eq!(report.cells.len(), 6);
    assert!(report.max_identity_error() < 1e-4, "{:e}", report.max_identity_error());
    for cell in &report.cells {
        assert!(cell.identity_error_printed > 10.0 * cell.identity_error);
    }
}
