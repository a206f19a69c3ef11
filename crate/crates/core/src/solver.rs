//! Condat–Vũ primal-dual iteration for the monotone+skew inclusion
//!
//! ```text
//! 0 in (R(i); G(v)) + (M^T v; -M i) - (B_R u; B_G u)
//! ```
//!
//! over periodic trajectories, followed by the output map for `y`.

use std::io::Write;

use log::{debug, warn};
use nalgebra::DMatrix;

use crate::elements::{forward_eval, DiagonalOperator, Form};
use crate::error::{Error, Result};
use crate::signal::{dot, Grid, SignalBundle};
use crate::structure::{
    mat_apply, mat_apply_transpose, operator_norm, output_into, Interconnection,
};

/// Everything needed for one periodic steady-state solve.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub ic: Interconnection,
    /// `p` impedance-form laws.
    pub r_block: DiagonalOperator,
    /// `q` admittance-form laws.
    pub g_block: DiagonalOperator,
    /// `m` excitations, labelled.
    pub u: SignalBundle,
    pub i_labels: Vec<String>,
    pub v_labels: Vec<String>,
    pub y_labels: Vec<String>,
}

impl Problem {
    pub fn new(
        ic: Interconnection,
        r_block: DiagonalOperator,
        g_block: DiagonalOperator,
        u: SignalBundle,
    ) -> Result<Self> {
        let i_labels = (0..ic.p).map(|k| format!("i{k}")).collect();
        let v_labels = (0..ic.q).map(|k| format!("v{k}")).collect();
        let y_labels = (0..ic.m).map(|k| format!("y{k}")).collect();
        Problem::with_labels(ic, r_block, g_block, u, i_labels, v_labels, y_labels)
    }

    pub fn with_labels(
        ic: Interconnection,
        r_block: DiagonalOperator,
        g_block: DiagonalOperator,
        u: SignalBundle,
        i_labels: Vec<String>,
        v_labels: Vec<String>,
        y_labels: Vec<String>,
    ) -> Result<Self> {
        let violations = crate::structure::validate_interconnection(&ic);
        if !violations.is_empty() {
            return Err(Error::Dimension(violations.join("; ")));
        }
        if r_block.len() != ic.p || g_block.len() != ic.q {
            return Err(Error::Dimension(format!(
                "interconnection has (p, q) = ({}, {}) but blocks hold ({}, {}) laws",
                ic.p,
                ic.q,
                r_block.len(),
                g_block.len()
            )));
        }
        if !r_block.all_in(Form::Impedance) || !g_block.all_in(Form::Admittance) {
            return Err(Error::Law(
                "R block must hold impedances and G block admittances".into(),
            ));
        }
        if u.len() != ic.m {
            return Err(Error::Dimension(format!(
                "{} excitations for {} ports",
                u.len(),
                ic.m
            )));
        }
        if i_labels.len() != ic.p || v_labels.len() != ic.q || y_labels.len() != ic.m {
            return Err(Error::Dimension("label counts do not match (p, q, m)".into()));
        }
        Ok(Problem {
            grid: u.grid(),
            ic,
            r_block,
            g_block,
            u,
            i_labels,
            v_labels,
            y_labels,
        })
    }

    pub fn u_labels(&self) -> &[String] {
        self.u.labels()
    }
}

/// Step sizes and stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub sigma: f64,
    pub max_iters: usize,
    /// Threshold on [`fixed_point_residual`].
    pub tol: f64,
    /// Residual evaluation cadence, in iterations.
    pub check_every: usize,
    /// Run even when `tau * sigma * |M|^2 >= 1`.
    pub force_steps: bool,
}

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 500_000;
pub const DEFAULT_CHECK_EVERY: usize = 10;

impl SolverConfig {
    pub fn new(tau: f64, sigma: f64) -> Self {
        SolverConfig {
            tau,
            sigma,
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            check_every: DEFAULT_CHECK_EVERY,
            force_steps: false,
        }
    }

    /// Defaults with [`default_step_sizes`] for this problem.
    pub fn for_problem(prob: &Problem) -> Self {
        let (tau, sigma) = default_step_sizes(&prob.ic.m_tilde);
        SolverConfig::new(tau, sigma)
    }

    fn check(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos("tau", self.tau)?;
        pos("sigma", self.sigma)?;
        pos("tol", self.tol)?;
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::Config("max_iters and check_every must be positive".into()));
        }
        Ok(())
    }
}

/// `tau = sigma = 0.99 / |M|`, or `(1, 1)` when `M` vanishes.
pub fn default_step_sizes(m_tilde: &DMatrix<f64>) -> (f64, f64) {
    let norm = operator_norm(m_tilde);
    if norm == 0.0 {
        (1.0, 1.0)
    } else {
        (0.99 / norm, 0.99 / norm)
    }
}

/// `tau * sigma * |M|^2`; must stay below 1.
pub fn step_product(m_tilde: &DMatrix<f64>, tau: f64, sigma: f64) -> f64 {
    let n = operator_norm(m_tilde);
    tau * sigma * n * n
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub i: SignalBundle,
    pub v: SignalBundle,
    pub y: SignalBundle,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, residual)` at the check cadence.
    pub residual_history: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
}

impl SolverResult {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().map(|&(_, r)| r)
    }

    /// Writes `iteration,residual` lines with 17 significant digits.
    pub fn write_residual_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,residual")?;
        for (k, r) in &self.residual_history {
            writeln!(out, "{k},{r:.16e}")?;
        }
        Ok(())
    }
}

/// `(|di| + |dv|) / max(1, |i_next| + |v_next|)` with discrete L2 norms.
pub fn fixed_point_residual(
    prev_i: &SignalBundle,
    prev_v: &SignalBundle,
    next_i: &SignalBundle,
    next_v: &SignalBundle,
) -> Result<f64> {
    if prev_i.len() != next_i.len() || prev_v.len() != next_v.len() {
        return Err(Error::Dimension("iterate shapes differ".into()));
    }
    let dt = prev_i.grid().dt();
    for b in [prev_v, next_i, next_v] {
        prev_i.grid().check_same(&b.grid())?;
    }
    Ok(residual_raw(
        &prev_i.rows(),
        &prev_v.rows(),
        &next_i.rows(),
        &next_v.rows(),
        dt,
    ))
}

fn residual_raw(pi: &[Vec<f64>], pv: &[Vec<f64>], ni: &[Vec<f64>], nv: &[Vec<f64>], dt: f64) -> f64 {
    let diff_norm = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            for (p, q) in x.iter().zip(y) {
                acc += (p - q) * (p - q);
            }
        }
        (acc * dt).sqrt()
    };
    let norm = |a: &[Vec<f64>]| a.iter().map(|c| dot(c, c, dt)).sum::<f64>().sqrt();
    let num = diff_norm(pi, ni) + diff_norm(pv, nv);
    num / (norm(ni) + norm(nv)).max(1.0)
}

/// Primal-dual iterate on raw channels (`p` rows of `i`, `q` rows of `v`).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Iterate {
    pub i: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Iterate {
    pub(crate) fn zeros(p: usize, q: usize, samples: usize) -> Self {
        Iterate {
            i: vec![vec![0.0; samples]; p],
            v: vec![vec![0.0; samples]; q],
        }
    }
}

#[derive(Debug)]
pub(crate) struct KernelOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<(usize, f64)>,
}

/// Stopping parameters for [`run_kernel`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelLimits {
    pub max_iters: usize,
    pub tol: f64,
    pub check_every: usize,
    pub dt: f64,
}

/// The iteration itself, shared by the periodic solver and the
/// time-stepping oracle:
///
/// ```text
/// i+ = J_tauR(i - tau M^T v + tau B_R u)
/// v+ = J_sigmaG(v + sigma M (2 i+ - i) + sigma B_G u)
/// ```
///
/// `r_offset` and `g_offset` hold `B_R u` and `B_G u`. Steps are given per
/// channel (diagonal `tau`, `sigma`); the resolvent closures are already
/// bound to them.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_kernel(
    m: &DMatrix<f64>,
    tau: &[f64],
    sigma: &[f64],
    r_offset: &[Vec<f64>],
    g_offset: &[Vec<f64>],
    resolve_r: &dyn Fn(&mut [Vec<f64>]),
    resolve_g: &dyn Fn(&mut [Vec<f64>]),
    state: &mut Iterate,
    limits: KernelLimits,
    observer: &mut dyn FnMut(usize, &Iterate),
) -> Result<KernelOutcome> {
    let p = state.i.len();
    let q = state.v.len();
    let samples = state.i.first().or(state.v.first()).map_or(0, |c| c.len());
    let mut mt_v = vec![vec![0.0; samples]; p];
    let mut m_bar = vec![vec![0.0; samples]; q];
    let mut bar = vec![vec![0.0; samples]; p];
    let mut next = Iterate::zeros(p, q, samples);
    let mut history = Vec::new();

    for iter in 1..=limits.max_iters {
        mat_apply_transpose(m, &state.v, &mut mt_v);
        for r in 0..p {
            let (src, dst, mv, off) = (&state.i[r], &mut next.i[r], &mt_v[r], &r_offset[r]);
            let tau = tau[r];
            for k in 0..samples {
                dst[k] = src[k] - tau * mv[k] + tau * off[k];
            }
        }
        resolve_r(&mut next.i);

        for r in 0..p {
            for k in 0..samples {
                bar[r][k] = 2.0 * next.i[r][k] - state.i[r][k];
            }
        }
        mat_apply(m, &bar, &mut m_bar);
        for r in 0..q {
            let (src, dst, mb, off) = (&state.v[r], &mut next.v[r], &m_bar[r], &g_offset[r]);
            let sigma = sigma[r];
            for k in 0..samples {
                dst[k] = src[k] + sigma * mb[k] + sigma * off[k];
            }
        }
        resolve_g(&mut next.v);

        let finite = next
            .i
            .iter()
            .chain(&next.v)
            .all(|c| c.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Divergence { iteration: iter });
        }

        let check = iter % limits.check_every == 0 || iter == limits.max_iters;
        let residual = check.then(|| residual_raw(&state.i, &state.v, &next.i, &next.v, limits.dt));
        std::mem::swap(state, &mut next);
        if let Some(r) = residual {
            history.push((iter, r));
            observer(iter, state);
            if r <= limits.tol {
                return Ok(KernelOutcome {
                    iterations: iter,
                    converged: true,
                    history,
                });
            }
        }
    }
    Ok(KernelOutcome {
        iterations: limits.max_iters,
        converged: false,
        history,
    })
}

/// Solves from `i = v = 0`. Non-convergence (including problems with no
/// periodic solution) is reported through `converged = false`.
pub fn condat_vu_solve(prob: &Problem, cfg: &SolverConfig) -> Result<SolverResult> {
    condat_vu_solve_observed(prob, cfg, |_, _, _| {})
}

/// As [`condat_vu_solve`], calling `observer(iteration, i, v)` at every
/// residual check.
pub fn condat_vu_solve_observed(
    prob: &Problem,
    cfg: &SolverConfig,
    mut observer: impl FnMut(usize, &[Vec<f64>], &[Vec<f64>]),
) -> Result<SolverResult> {
    cfg.check()?;
    let ic = &prob.ic;
    let mut warnings = Vec::new();
    let product = step_product(&ic.m_tilde, cfg.tau, cfg.sigma);
    if product >= 1.0 {
        let msg = format!(
            "tau*sigma*|M|^2 = {product} >= 1; convergence is not guaranteed"
        );
        warn!("{msg}");
        warnings.push(msg);
        if !cfg.force_steps {
            return Err(Error::StepCondition { product });
        }
    }

    let grid = prob.grid;
    let n = grid.samples();
    let u = prob.u.rows();
    let mut r_offset = vec![vec![0.0; n]; ic.p];
    let mut g_offset = vec![vec![0.0; n]; ic.q];
    mat_apply(&ic.b_r, &u, &mut r_offset);
    mat_apply(&ic.b_g, &u, &mut g_offset);

    let r_plan = prob.r_block.plan(cfg.tau, grid)?;
    let g_plan = prob.g_block.plan(cfg.sigma, grid)?;
    let mut state = Iterate::zeros(ic.p, ic.q, n);
    let outcome = run_kernel(
        &ic.m_tilde,
        &vec![cfg.tau; ic.p],
        &vec![cfg.sigma; ic.q],
        &r_offset,
        &g_offset,
        &|x| r_plan.apply(x),
        &|x| g_plan.apply(x),
        &mut state,
        KernelLimits {
            max_iters: cfg.max_iters,
            tol: cfg.tol,
            check_every: cfg.check_every,
            dt: grid.dt(),
        },
        &mut |k, s| observer(k, &s.i, &s.v),
    )?;
    debug!(
        "condat-vu: {} iterations, converged = {}, residual = {:?}",
        outcome.iterations,
        outcome.converged,
        outcome.history.last()
    );

    let mut y = vec![vec![0.0; n]; ic.m];
    output_into(ic, &state.i, &state.v, &u, &mut y);
    Ok(SolverResult {
        i: SignalBundle::from_rows_unchecked(grid, state.i, prob.i_labels.clone()),
        v: SignalBundle::from_rows_unchecked(grid, state.v, prob.v_labels.clone()),
        y: SignalBundle::from_rows_unchecked(grid, y, prob.y_labels.clone()),
        iterations: outcome.iterations,
        converged: outcome.converged,
        residual_history: outcome.history,
        warnings,
    })
}

/// L2 norm of the left-hand side of the inclusion with the laws evaluated
/// forward; `None` when some law is multivalued at the given point.
pub fn inclusion_residual(prob: &Problem, i: &SignalBundle, v: &SignalBundle) -> Result<Option<f64>> {
    let ic = &prob.ic;
    if i.len() != ic.p || v.len() != ic.q {
        return Err(Error::Dimension("iterate does not match (p, q)".into()));
    }
    let grid = prob.grid;
    let n = grid.samples();
    let (ir, vr, u) = (i.rows(), v.rows(), prob.u.rows());
    let mut mt_v = vec![vec![0.0; n]; ic.p];
    let mut m_i = vec![vec![0.0; n]; ic.q];
    let mut bru = vec![vec![0.0; n]; ic.p];
    let mut bgu = vec![vec![0.0; n]; ic.q];
    mat_apply_transpose(&ic.m_tilde, &vr, &mut mt_v);
    mat_apply(&ic.m_tilde, &ir, &mut m_i);
    mat_apply(&ic.b_r, &u, &mut bru);
    mat_apply(&ic.b_g, &u, &mut bgu);

    let mut acc = 0.0;
    let blocks = [
        (&prob.r_block, i, &mt_v, 1.0, &bru),
        (&prob.g_block, v, &m_i, -1.0, &bgu),
    ];
    for (block, x, coupling, sign, offset) in blocks {
        for (k, law) in block.laws().iter().enumerate() {
            let Some(out) = forward_eval(law, x.channel(k)) else {
                return Ok(None);
            };
            let lhs: Vec<f64> = (0..n)
                .map(|s| out.values()[s] + sign * coupling[k][s] - offset[k][s])
                .collect();
            acc += dot(&lhs, &lhs, grid.dt());
        }
    }
    Ok(Some(acc.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::ElementLaw;
    use crate::signal::{make_waveform, Waveform};

    fn resistor_problem(ohms: f64) -> Problem {
        let grid = Grid::new(200, 1e-4).unwrap();
        let ic = Interconnection::new(
            DMatrix::zeros(0, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(0, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let u = make_waveform(
            &Waveform::Sine {
                amplitude: 1.0,
                frequency_hz: 50.0,
                phase_rad: 0.0,
            },
            grid,
        )
        .unwrap();
        Problem::new(
            ic,
            DiagonalOperator::impedances(vec![ElementLaw::ResistorImpedance { ohms }]).unwrap(),
            DiagonalOperator::empty(),
            SignalBundle::new(grid, vec![u], vec!["v_p".into()]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn linear_resistor_closed_form() {
        let prob = resistor_problem(100.0);
        let cfg = SolverConfig::for_problem(&prob);
        assert_eq!((cfg.tau, cfg.sigma), (1.0, 1.0));
        let res = condat_vu_solve(&prob, &cfg).unwrap();
        assert!(res.converged);
        let u = prob.u.channel(0);
        let expected = u.scale(1.0 / 100.0);
        let err = res.i.channel(0).lincomb(1.0, &expected, -1.0).unwrap().norm();
        assert!(err <= 1e-4 * expected.norm(), "err {err}");
        let r = inclusion_residual(&prob, &res.i, &res.v).unwrap().unwrap();
        assert!(r <= 1e-3 * u.norm());
        // Exact closed-form point.
        let exact = SignalBundle::new(prob.grid, vec![expected], vec!["i".into()]).unwrap();
        let r = inclusion_residual(&prob, &exact, &res.v).unwrap().unwrap();
        assert!(r <= 1e-8);
    }

    #[test]
    fn zero_problem_stops_at_first_check() {
        let mut prob = resistor_problem(10.0);
        prob.u = SignalBundle::zeros(prob.grid, vec!["v_p".into()]);
        let res = condat_vu_solve(&prob, &SolverConfig::for_problem(&prob)).unwrap();
        assert!(res.converged);
        assert_eq!(res.residual_history.len(), 1);
        assert_eq!(res.iterations, DEFAULT_CHECK_EVERY);
        assert_eq!(res.i.max_abs(), 0.0);
        assert_eq!(res.y.max_abs(), 0.0);
        assert_eq!(inclusion_residual(&prob, &res.i, &res.v).unwrap(), Some(0.0));
    }

    #[test]
    fn residual_formula() {
        let g = Grid::new(4, 0.25).unwrap();
        let z = SignalBundle::zeros(g, vec!["a".into()]);
        let e = SignalBundle::zeros(g, vec![]);
        assert_eq!(fixed_point_residual(&z, &e, &z, &e).unwrap(), 0.0);
        // |next| = 1 with dt = 0.25 and four samples of 1.
        let one = SignalBundle::from_rows(g, vec![vec![1.0; 4]], vec!["a".into()]).unwrap();
        assert!((fixed_point_residual(&z, &e, &one, &e).unwrap() - 1.0).abs() < 1e-15);
        let a = SignalBundle::from_rows(g, vec![vec![3.0, 1.0, 2.0, 5.0]], vec!["a".into()]).unwrap();
        let b = SignalBundle::from_rows(g, vec![vec![4.0, 1.5, 2.0, 6.0]], vec!["a".into()]).unwrap();
        let r1 = fixed_point_residual(&a, &e, &b, &e).unwrap();
        let r2 = fixed_point_residual(&a.lincomb(3.0, &a, 0.0).unwrap(), &e, &b.lincomb(3.0, &b, 0.0).unwrap(), &e)
            .unwrap();
        assert!((r1 - r2).abs() < 1e-14);
    }

    #[test]
    fn step_condition_gate() {
        let mut prob = resistor_problem(10.0);
        prob.ic = Interconnection::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        prob.g_block = DiagonalOperator::admittances(vec![ElementLaw::ResistorAdmittance { siemens: 1.0 }]).unwrap();
        prob.v_labels = vec!["v0".into()];
        let cfg = SolverConfig::new(2.0, 2.0);
        assert!(matches!(condat_vu_solve(&prob, &cfg), Err(Error::StepCondition { .. })));
        let forced = SolverConfig {
            force_steps: true,
            max_iters: 20,
            ..cfg
        };
        match condat_vu_solve(&prob, &forced) {
            Ok(res) => assert_eq!(res.warnings.len(), 1),
            Err(Error::Divergence { .. }) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn config_validation() {
        let prob = resistor_problem(1.0);
        let bad = SolverConfig::new(-1.0, 1.0);
        assert!(matches!(condat_vu_solve(&prob, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn residual_log_format() {
        let prob = resistor_problem(100.0);
        let res = condat_vu_solve(&prob, &SolverConfig::for_problem(&prob)).unwrap();
        let mut buf = Vec::new();
        res.write_residual_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iteration,residual"));
        let (k, r) = lines.next().unwrap().split_once(',').unwrap();
        assert_eq!(k, "10");
        assert_eq!(r.parse::<f64>().unwrap(), res.residual_history[0].1);
    }
}
