#![allow(dead_code)]

pub mod properties;

use nalgebra::{DMatrix, DVector};
use pmono::netlist::{parse_netlist, partition_search, Netlist};
use pmono::{ElementLaw, Grid, Problem, Waveform};
use rustfft::num_complex::Complex64;

pub const RECTIFIER: &str = include_str!("../../../../fixtures/rectifier.net");

pub fn rectifier_netlist() -> Netlist {
    parse_netlist(RECTIFIER).unwrap()
}

pub fn rectifier_waves() -> Vec<(String, Waveform)> {
    vec![
        (
            "p".to_string(),
            Waveform::Sine {
                amplitude: 240.0,
                frequency_hz: 50.0,
                phase_rad: 0.0,
            },
        ),
        ("q".to_string(), Waveform::Constant { level: -5e-3 }),
    ]
}

pub fn rectifier_grid() -> Grid {
    Grid::new(200, 1e-4).unwrap()
}

pub fn rectifier_problem() -> Problem {
    let n = rectifier_netlist();
    let d = partition_search(&n, &n.pinned_choices()).unwrap();
    d.problem(&n, rectifier_grid(), &rectifier_waves()).unwrap()
}

/// `|x - reference| / |reference|` in the plain Euclidean norm.
pub fn rel_l2(reference: &[f64], x: &[f64]) -> f64 {
    assert_eq!(reference.len(), x.len());
    let num: f64 = reference.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|a| a * a).sum();
    (num / den).sqrt()
}

/// Steady response of a one-port to `amplitude * sin(2 pi cycles k / n)`
/// on the periodic grid, given the transfer function in terms of the
/// backward-difference eigenvalue `lambda`.
pub fn discrete_phasor(
    amplitude: f64,
    cycles: usize,
    n: usize,
    dt: f64,
    transfer: impl Fn(Complex64) -> Complex64,
) -> Vec<f64> {
    let theta = 2.0 * std::f64::consts::PI * cycles as f64 / n as f64;
    let lambda = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta)) / dt;
    let h = transfer(lambda);
    (0..n)
        .map(|k| (Complex64::from_polar(amplitude, theta * k as f64) * h).im)
        .collect()
}

/// Affine pieces `(slope, offset, lo, hi)` of one frozen law for one
/// backward-Euler step.
fn segments(law: &ElementLaw, dt: f64, prev_in: f64, prev_out: f64) -> Vec<(f64, f64, f64, f64)> {
    let all = (f64::NEG_INFINITY, f64::INFINITY);
    match law {
        ElementLaw::PwlResistor(c) => {
            let p = c.points();
            let last = p.len() - 2;
            (0..=last)
                .map(|w| {
                    let ((x0, y0), (x1, y1)) = (p[w], p[w + 1]);
                    let s = (y1 - y0) / (x1 - x0);
                    let lo = if w == 0 { all.0 } else { x0 };
                    let hi = if w == last { all.1 } else { x1 };
                    (s, y0 - s * x0, lo, hi)
                })
                .collect()
        }
        ElementLaw::ResistorImpedance { ohms } => vec![(*ohms, 0.0, all.0, all.1)],
        ElementLaw::ResistorAdmittance { siemens } => vec![(*siemens, 0.0, all.0, all.1)],
        ElementLaw::CapacitorAdmittance { farads } => {
            vec![(farads / dt, -farads / dt * prev_in, all.0, all.1)]
        }
        ElementLaw::InductorImpedance { henries } => {
            vec![(henries / dt, -henries / dt * prev_in, all.0, all.1)]
        }
        ElementLaw::ParallelRcImpedance { ohms, farads } => {
            let a = ohms * farads / dt;
            vec![(ohms / (1.0 + a), a * prev_out / (1.0 + a), all.0, all.1)]
        }
        other => panic!("no affine pieces for {other:?}"),
    }
}

/// Backward-Euler march from rest by enumeration of affine pieces: at each
/// step every combination is solved as a dense linear system until one
/// lands inside its own pieces. Returns the port responses over the last
/// period.
pub fn exact_march(prob: &Problem, periods: usize) -> Vec<Vec<f64>> {
    let ic = &prob.ic;
    let (p, q, m) = (ic.p, ic.q, ic.m);
    let n = prob.grid.samples();
    let dt = prob.grid.dt();
    let u = prob.u.rows();
    let laws: Vec<ElementLaw> = prob.r_block.laws().iter().chain(prob.g_block.laws()).cloned().collect();
    let mut prev_in = vec![0.0; p + q];
    let mut prev_out = vec![0.0; p + q];
    let mut y = vec![vec![0.0; n]; m];
    let total = periods * n;
    for step in 1..=total {
        let s = step % n;
        let us = DVector::from_iterator(m, (0..m).map(|k| u[k][s]));
        let pieces: Vec<_> = (0..p + q).map(|j| segments(&laws[j], dt, prev_in[j], prev_out[j])).collect();
        let count: usize = pieces.iter().map(Vec::len).product();
        let mut found = None;
        for combo in 0..count {
            let mut c = combo;
            let pick: Vec<usize> = pieces
                .iter()
                .map(|ps| {
                    let k = c % ps.len();
                    c /= ps.len();
                    k
                })
                .collect();
            // slope_j i_j + offset_j + (M^T v)_j = (B_R u)_j
            // slope_k v_k + offset_k - (M i)_k = (B_G u)_k
            let mut a = DMatrix::zeros(p + q, p + q);
            let mut rhs = DVector::zeros(p + q);
            for j in 0..p + q {
                let (slope, offset, _, _) = pieces[j][pick[j]];
                a[(j, j)] = slope;
                if j < p {
                    for k in 0..q {
                        a[(j, p + k)] = ic.m_tilde[(k, j)];
                    }
                    rhs[j] = (ic.b_r.row(j) * &us)[0] - offset;
                } else {
                    for i in 0..p {
                        a[(j, i)] = -ic.m_tilde[(j - p, i)];
                    }
                    rhs[j] = (ic.b_g.row(j - p) * &us)[0] - offset;
                }
            }
            let Some(x) = a.lu().solve(&rhs) else { continue };
            let inside = (0..p + q).all(|j| {
                let (_, _, lo, hi) = pieces[j][pick[j]];
                x[j] >= lo - 1e-12 && x[j] <= hi + 1e-12
            });
            if inside {
                found = Some((x, pick));
                break;
            }
        }
        let (x, pick) = found.expect("no consistent piece combination");
        for j in 0..p + q {
            let (slope, offset, _, _) = pieces[j][pick[j]];
            prev_in[j] = x[j];
            prev_out[j] = slope * x[j] + offset;
        }
        if step + n > total {
            for r in 0..m {
                let mut acc = (ic.d.row(r) * &us)[0];
                for j in 0..p {
                    acc -= ic.b_r[(j, r)] * x[j];
                }
                for k in 0..q {
                    acc -= ic.b_g[(k, r)] * x[p + k];
                }
                y[r][s] = acc;
            }
        }
    }
    y
}
