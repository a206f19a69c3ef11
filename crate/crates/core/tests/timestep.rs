mod common;

use common::{discrete_phasor, exact_march, rectifier_problem, rel_l2};
use pmono::netlist::{parse_netlist, partition_search};
use pmono::timestep::{march, smooth_diodes, MarchConfig, DEFAULT_EPS};
use pmono::{condat_vu_solve, Grid, Problem, SolverConfig, Waveform};

fn one_port(text: &str, grid: Grid, amplitude: f64, hz: f64) -> Problem {
    let n = parse_netlist(text).unwrap();
    let d = partition_search(&n, &n.pinned_choices()).unwrap();
    let wave = Waveform::Sine {
        amplitude,
        frequency_hz: hz,
        phase_rad: 0.0,
    };
    d.problem(&n, grid, &[("p".into(), wave)]).unwrap()
}

#[test]
fn series_rc_march_settles_on_the_discrete_phasor() {
    let grid = Grid::new(200, 1e-4).unwrap();
    let prob = one_port("PORT p a b\nR r a m 1k\nC c m b 1u\nEXCITE p V\n", grid, 10.0, 50.0);
    let m = march(&prob, &MarchConfig::new(50)).unwrap();
    // Port current is the negated loop current.
    let want = discrete_phasor(10.0, 1, 200, 1e-4, |l| -1.0 / (1e3 + 1.0 / (1e-6 * l)));
    let got = m.y.get("i_p").unwrap().values();
    // Limited by the per-step stopping rule, not by the discretization.
    assert!(rel_l2(&want, got) < 1e-4, "{}", rel_l2(&want, got));
}

#[test]
fn series_rl_march_settles_on_the_discrete_phasor() {
    let grid = Grid::new(100, 2e-4).unwrap();
    let prob = one_port("PORT p a b\nR r a m 10\nL l m b 10m\nEXCITE p V\n", grid, 5.0, 100.0);
    let m = march(&prob, &MarchConfig::new(50)).unwrap();
    let want = discrete_phasor(5.0, 2, 100, 2e-4, |l| -1.0 / (10.0 + 1e-2 * l));
    let got = m.y.get("i_p").unwrap().values();
    assert!(rel_l2(&want, got) < 1e-6, "{}", rel_l2(&want, got));
}

#[test]
fn zero_periods_give_rest() {
    let prob = rectifier_problem();
    let m = march(&smooth_diodes(&prob, DEFAULT_EPS).unwrap(), &MarchConfig::new(0)).unwrap();
    assert!(m.y.max_abs() == 0.0 && m.steps == 0);
}

#[test]
fn smoothed_rectifier_periodic_solution_matches_piecewise_march() {
    let prob = smooth_diodes(&rectifier_problem(), DEFAULT_EPS).unwrap();
    let exact = exact_march(&prob, 50);
    // A longer march changes nothing: 50 periods is steady state.
    assert!(rel_l2(&exact[1], &exact_march(&prob, 60)[1]) < 1e-9);
    let mut cfg = SolverConfig::new(0.005, 0.005);
    cfg.tol = 1e-8;
    cfg.max_iters = 1_000_000;
    let r = condat_vu_solve(&prob, &cfg).unwrap();
    assert!(r.converged);
    let got = r.y.get("v_q").unwrap().values();
    assert!(rel_l2(&exact[1], got) < 1e-5, "{}", rel_l2(&exact[1], got));
}
