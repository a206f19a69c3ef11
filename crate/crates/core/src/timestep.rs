//! Backward-Euler time marching, used as an independent check on the
//! periodic solver.
//!
//! Starting from a zero state, each time step freezes the history of the
//! dynamic elements, turning every law into a static one, and solves the
//! resulting one-sample inclusion with the same primal-dual kernel. After
//! `periods` full periods the last one is returned.

use log::debug;

use crate::elements::{DiagonalOperator, ElementLaw, PwlCurve};
use crate::error::{Error, Result};
use crate::signal::SignalBundle;
use crate::solver::{default_step_sizes, run_kernel, Iterate, KernelLimits, Problem};
use crate::structure::{mat_apply, output_into};


/// Default smoothing for [`smooth_diodes`].
pub const DEFAULT_EPS: f64 = 1e-6;

/// Ideal diodes replaced by piecewise-linear resistors with on-resistance
/// `eps` and off-conductance `eps`.
pub fn smooth_diodes(problem: &Problem, eps: f64) -> Result<Problem> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Config(format!("smoothing must be positive, got {eps}")));
    }
    let smooth = |op: &DiagonalOperator| -> Result<DiagonalOperator> {
        let entries = op
            .laws()
            .iter()
            .zip(op.forms())
            .map(|(law, form)| {
                let law = match law {
                    ElementLaw::DiodeImpedance => ElementLaw::PwlResistor(PwlCurve::new(vec![
                        (-1.0, -1.0 / eps),
                        (0.0, 0.0),
                        (1.0, eps),
                    ])?),
                    ElementLaw::DiodeAdmittance => ElementLaw::PwlResistor(PwlCurve::new(vec![
                        (-1.0, -eps),
                        (0.0, 0.0),
                        (1.0, 1.0 / eps),
                    ])?),
                    other => other.clone(),
                };
                Ok((law, *form))
            })
            .collect::<Result<Vec<_>>>()?;
        DiagonalOperator::new(entries)
    };
    Problem::with_labels(
        problem.ic.clone(),
        smooth(&problem.r_block)?,
        smooth(&problem.g_block)?,
        problem.u.clone(),
        problem.i_labels.clone(),
        problem.v_labels.clone(),
        problem.y_labels.clone(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchConfig {
    pub periods: usize,
    /// Fixed kernel steps. When both are unset each time step searches for
    /// a step ratio, see [`march`].
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    /// Per-step fixed-point tolerance.
    pub tol: f64,
    /// Per-step iteration budget (per trial when searching).
    pub max_iters: usize,
    pub check_every: usize,
}

impl MarchConfig {
    pub fn new(periods: usize) -> Self {
        MarchConfig {
            periods,
            tau: None,
            sigma: None,
            tol: 1e-9,
            max_iters: 100_000,
            check_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchResult {
    /// The last marched period, sample `k` at `t = k * dt`.
    pub i: SignalBundle,
    pub v: SignalBundle,
    pub y: SignalBundle,
    pub steps: usize,
    pub total_iterations: usize,
    pub max_step_iterations: usize,
}

/// A law frozen at one time step.
#[derive(Debug, Clone)]
enum StaticLaw {
    /// `out = slope * x + offset`.
    Affine { slope: f64, offset: f64 },
    PositivePart,
    NegativePart,
    Pwl(PwlCurve),
}

impl StaticLaw {
    fn resolvent(&self, alpha: f64, s: f64) -> f64 {
        match self {
            StaticLaw::Affine { slope, offset } => (s - alpha * offset) / (1.0 + alpha * slope),
            StaticLaw::PositivePart => s.max(0.0),
            StaticLaw::NegativePart => s.min(0.0),
            StaticLaw::Pwl(c) => c.resolvent(alpha, s),
        }
    }
}

/// Element history: the previous input (current for `Z`, voltage for `Y`)
/// and, for the parallel RC, the previous voltage.
#[derive(Debug, Clone, Copy, Default)]
struct History {
    input: f64,
    output: f64,
}

fn freeze(law: &ElementLaw, h: History, dt: f64) -> StaticLaw {
    match law {
        ElementLaw::DiodeImpedance => StaticLaw::PositivePart,
        ElementLaw::DiodeAdmittance => StaticLaw::NegativePart,
        ElementLaw::ResistorImpedance { ohms: g } | ElementLaw::ResistorAdmittance { siemens: g } => {
            StaticLaw::Affine { slope: *g, offset: 0.0 }
        }
        // i = C (v - v_prev) / dt and v = L (i - i_prev) / dt.
        ElementLaw::CapacitorAdmittance { farads: k } | ElementLaw::InductorImpedance { henries: k } => {
            StaticLaw::Affine {
                slope: k / dt,
                offset: -k / dt * h.input,
            }
        }
        // i = v / R + C (v - v_prev) / dt, solved for v.
        ElementLaw::ParallelRcImpedance { ohms, farads } => {
            if *ohms == 0.0 {
                StaticLaw::Affine { slope: 0.0, offset: 0.0 }
            } else {
                let a = ohms * farads / dt;
                StaticLaw::Affine {
                    slope: ohms / (1.0 + a),
                    offset: a * h.output / (1.0 + a),
                }
            }
        }
        ElementLaw::PwlResistor(c) => StaticLaw::Pwl(c.clone()),
    }
}

fn output_of(law: &StaticLaw, x: f64) -> f64 {
    match law {
        StaticLaw::Affine { slope, offset } => slope * x + offset,
        // Only dynamic elements need their output remembered.
        _ => 0.0,
    }
}

/// Step ratios tried, relative to the last one that worked.
const LADDER: [f64; 7] = [1.0, 10.0, 0.1, 100.0, 0.01, 1000.0, 0.001];

/// Marches `cfg.periods` periods of `problem` with backward Euler.
///
/// Unless steps are fixed in `cfg`, each time step runs the kernel with
/// `tau = g s`, `sigma = s / g`, `s = 0.99 / |M|`, trying the ratios in
/// `LADDER` around the last successful `g` from the same warm start. Stiff
/// smoothed diodes make a single fixed ratio unreliable.
pub fn march(problem: &Problem, cfg: &MarchConfig) -> Result<MarchResult> {
    let ic = &problem.ic;
    let grid = problem.grid;
    let n = grid.samples();
    let dt = grid.dt();
    let (base, _) = default_step_sizes(&ic.m_tilde);
    let fixed = match (cfg.tau, cfg.sigma) {
        (None, None) => None,
        (t, s) => Some((t.unwrap_or(base), s.unwrap_or(base))),
    };
    let positive = fixed.is_none_or(|(t, s)| t > 0.0 && s > 0.0);
    if !(positive && cfg.tol > 0.0 && cfg.max_iters > 0 && cfg.check_every > 0) {
        return Err(Error::Config("march steps, tolerance and budgets must be positive".into()));
    }
    for law in problem.r_block.laws().iter().chain(problem.g_block.laws()) {
        law.validate()?;
    }

    let u = problem.u.rows();
    let mut r_off_all = vec![vec![0.0; n]; ic.p];
    let mut g_off_all = vec![vec![0.0; n]; ic.q];
    mat_apply(&ic.b_r, &u, &mut r_off_all);
    mat_apply(&ic.b_g, &u, &mut g_off_all);

    let mut hist_r = vec![History::default(); ic.p];
    let mut hist_g = vec![History::default(); ic.q];
    let mut state = Iterate::zeros(ic.p, ic.q, 1);
    let mut out_i = vec![vec![0.0; n]; ic.p];
    let mut out_v = vec![vec![0.0; n]; ic.q];
    let steps = cfg.periods * n;
    let mut total = 0;
    let mut worst = 0;
    let mut ratio = 1.0;
    let limits = KernelLimits {
        max_iters: cfg.max_iters,
        tol: cfg.tol,
        check_every: cfg.check_every,
        dt,
    };

    for step in 1..=steps {
        let s = step % n;
        let laws_r: Vec<StaticLaw> = problem
            .r_block
            .laws()
            .iter()
            .zip(&hist_r)
            .map(|(l, h)| freeze(l, *h, dt))
            .collect();
        let laws_g: Vec<StaticLaw> = problem
            .g_block
            .laws()
            .iter()
            .zip(&hist_g)
            .map(|(l, h)| freeze(l, *h, dt))
            .collect();
        let r_off: Vec<Vec<f64>> = r_off_all.iter().map(|c| vec![c[s]]).collect();
        let g_off: Vec<Vec<f64>> = g_off_all.iter().map(|c| vec![c[s]]).collect();

        let trials: Vec<(f64, f64, f64)> = match fixed {
            Some((t, sg)) => vec![(t, sg, ratio)],
            None => LADDER
                .iter()
                .map(|k| {
                    let g = ratio * k;
                    (base * g, base / g, g)
                })
                .collect(),
        };
        let start = state.clone();
        let mut used = 0;
        let mut solved = false;
        for (tau, sigma, g) in trials {
            state.clone_from(&start);
            let resolve_r = |x: &mut [Vec<f64>]| {
                for (c, law) in x.iter_mut().zip(&laws_r) {
                    c[0] = law.resolvent(tau, c[0]);
                }
            };
            let resolve_g = |x: &mut [Vec<f64>]| {
                for (c, law) in x.iter_mut().zip(&laws_g) {
                    c[0] = law.resolvent(sigma, c[0]);
                }
            };
            let outcome = run_kernel(
                &ic.m_tilde,
                &vec![tau; ic.p],
                &vec![sigma; ic.q],
                &r_off,
                &g_off,
                &resolve_r,
                &resolve_g,
                &mut state,
                limits,
                &mut |_, _| {},
            )?;
            used += outcome.iterations;
            if outcome.converged {
                ratio = g;
                solved = true;
                break;
            }
        }
        if !solved {
            return Err(Error::StepNotConverged { step });
        }
        total += used;
        worst = worst.max(used);

        for ((h, law), c) in hist_r.iter_mut().zip(&laws_r).zip(&state.i) {
            *h = History {
                input: c[0],
                output: output_of(law, c[0]),
            };
        }
        for ((h, law), c) in hist_g.iter_mut().zip(&laws_g).zip(&state.v) {
            *h = History {
                input: c[0],
                output: output_of(law, c[0]),
            };
        }
        if step + n > steps {
            for (dst, c) in out_i.iter_mut().zip(&state.i) {
                dst[s] = c[0];
            }
            for (dst, c) in out_v.iter_mut().zip(&state.v) {
                dst[s] = c[0];
            }
        }
    }
    debug!("march: {steps} steps, {total} iterations, worst step {worst}, final ratio {ratio}");

    let mut y = vec![vec![0.0; n]; ic.m];
    if steps > 0 {
        output_into(ic, &out_i, &out_v, &u, &mut y);
    }
    Ok(MarchResult {
        i: SignalBundle::from_rows_unchecked(grid, out_i, problem.i_labels.clone()),
        v: SignalBundle::from_rows_unchecked(grid, out_v, problem.v_labels.clone()),
        y: SignalBundle::from_rows_unchecked(grid, y, problem.y_labels.clone()),
        steps,
        total_iterations: total,
        max_step_iterations: worst,
    })
}
