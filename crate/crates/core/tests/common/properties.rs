//! Randomized suites shared by the per-module property tests and the
//! acceptance run. Each returns `Err` with the minimal failing case.

use nalgebra::DMatrix;
use pmono::elements::forward_eval;
use pmono::signal::{backward_difference, inner_product};
use pmono::structure::{apply_m, apply_mt, apply_skew};
use pmono::{ElementLaw, Grid, Interconnection, PeriodicSignal, PwlCurve, SignalBundle};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestRunner};

pub const SEED: u64 = 0x5eed_0f_9a7e;
pub const CASES: u32 = 1_000;

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        rng_seed: RngSeed::Fixed(SEED),
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn magnitude(lo: f64, hi: f64) -> impl Strategy<Value = f64> + Clone {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

pub fn grid() -> impl Strategy<Value = Grid> + Clone {
    (2usize..=48, magnitude(1e-5, 1.0)).prop_map(|(n, dt)| Grid::new(n, dt).unwrap())
}

pub fn signal(grid: Grid) -> impl Strategy<Value = PeriodicSignal> {
    proptest::collection::vec(-100.0f64..100.0, grid.samples())
        .prop_map(move |v| PeriodicSignal::new(grid, v).unwrap())
}

/// A grid with two signals on it.
pub fn signal_pair() -> impl Strategy<Value = (PeriodicSignal, PeriodicSignal)> {
    grid().prop_flat_map(|g| (signal(g), signal(g)))
}

/// Nondecreasing curves mixing sloped, vertical and horizontal pieces.
pub fn pwl_curve() -> impl Strategy<Value = PwlCurve> {
    (
        -5.0f64..5.0,
        -5.0f64..5.0,
        proptest::collection::vec((0u8..3, 0.0f64..3.0, 0.0f64..3.0), 1..6),
    )
        .prop_map(|(x0, y0, steps)| {
            let mut pts = vec![(x0, y0)];
            for (kind, a, b) in steps {
                let (x, y) = *pts.last().unwrap();
                pts.push(match kind {
                    0 => (x + a + 0.01, y + b + 0.01),
                    1 => (x, y + b + 0.01),
                    _ => (x + a + 0.01, y),
                });
            }
            PwlCurve::new(pts).unwrap()
        })
}

/// Every law kind, parameters spanning several decades (zero included).
pub fn law() -> impl Strategy<Value = ElementLaw> {
    let k = || prop_oneof![1 => Just(0.0), 9 => magnitude(1e-6, 1e3)];
    prop_oneof![
        Just(ElementLaw::DiodeImpedance),
        Just(ElementLaw::DiodeAdmittance),
        k().prop_map(|ohms| ElementLaw::ResistorImpedance { ohms }),
        k().prop_map(|siemens| ElementLaw::ResistorAdmittance { siemens }),
        k().prop_map(|farads| ElementLaw::CapacitorAdmittance { farads }),
        k().prop_map(|henries| ElementLaw::InductorImpedance { henries }),
        (k(), k()).prop_map(|(ohms, farads)| ElementLaw::ParallelRcImpedance { ohms, farads }),
        pwl_curve().prop_map(ElementLaw::PwlResistor),
    ]
}

fn diff(a: &PeriodicSignal, b: &PeriodicSignal) -> PeriodicSignal {
    a.lincomb(1.0, b, -1.0).unwrap()
}

/// `|Jx - Jy|^2 <= <x - y, Jx - Jy> + 1e-9 |x - y|^2` for every law and
/// step in `(0, 10]`.
pub fn firm_nonexpansiveness(cases: u32) -> Result<(), String> {
    let s = (law(), 1e-6f64..=10.0, signal_pair());
    check(cases, s, |(law, alpha, (x, y))| {
        let jx = law.resolvent(alpha, &x).unwrap();
        let jy = law.resolvent(alpha, &y).unwrap();
        let (dj, dx) = (diff(&jx, &jy), diff(&x, &y));
        let lhs = inner_product(&dj, &dj).unwrap();
        let rhs = inner_product(&dx, &dj).unwrap() + 1e-9 * inner_product(&dx, &dx).unwrap();
        prop_assert!(lhs <= rhs, "{lhs} > {rhs}");
        Ok(())
    })
}

/// `<u1 - u2, A u1 - A u2> >= -1e-9 |u1 - u2|^2` for laws that are
/// single-valued at both inputs.
pub fn monotonicity(cases: u32) -> Result<(), String> {
    check(cases, (law(), signal_pair()), |(law, (a, b))| {
        let (Some(fa), Some(fb)) = (forward_eval(&law, &a), forward_eval(&law, &b)) else {
            // Ideal diodes away from their single-valued region.
            return Ok(());
        };
        let da = diff(&a, &b);
        let lhs = inner_product(&da, &diff(&fa, &fb)).unwrap();
        let floor = -1e-9 * inner_product(&da, &da).unwrap();
        prop_assert!(lhs >= floor, "{lhs} < {floor}");
        Ok(())
    })
}

pub fn interconnection() -> impl Strategy<Value = Interconnection> {
    (0usize..=5, 0usize..=5).prop_flat_map(|(p, q)| {
        proptest::collection::vec(-3.0f64..3.0, p * q).prop_map(move |m| {
            Interconnection::new(
                DMatrix::from_row_slice(q, p, &m),
                DMatrix::zeros(p, 0),
                DMatrix::zeros(q, 0),
                DMatrix::zeros(0, 0),
            )
            .unwrap()
        })
    })
}

pub fn bundle(grid: Grid, channels: usize) -> impl Strategy<Value = SignalBundle> {
    proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, grid.samples()), channels)
        .prop_map(move |rows| {
            let labels = (0..rows.len()).map(|k| format!("x{k}")).collect();
            SignalBundle::from_rows(grid, rows, labels).unwrap()
        })
}

/// An interconnection with a current bundle of width `p` and a voltage
/// bundle of width `q` on a shared grid.
pub fn skew_case() -> impl Strategy<Value = (Interconnection, SignalBundle, SignalBundle)> {
    (interconnection(), grid()).prop_flat_map(|(ic, g)| {
        let (p, q) = (ic.p, ic.q);
        (Just(ic), bundle(g, p), bundle(g, q))
    })
}

/// `<z, S z> = 0` to 1e-12 relative.
pub fn skewness(cases: u32) -> Result<(), String> {
    check(cases, skew_case(), |(ic, i, v)| {
        let (top, bottom) = apply_skew(&ic, &i, &v).unwrap();
        let form = i.inner(&top).unwrap() + v.inner(&bottom).unwrap();
        let z = (i.norm().powi(2) + v.norm().powi(2)).sqrt();
        let sz = (top.norm().powi(2) + bottom.norm().powi(2)).sqrt();
        prop_assert!(form.abs() <= 1e-12 * z * sz, "<z, Sz> = {form}");
        Ok(())
    })
}

/// `<grad u, u> >= -1e-12 |u|^2`.
pub fn difference_monotonicity(cases: u32) -> Result<(), String> {
    check(cases, grid().prop_flat_map(signal), |u| {
        let lhs = inner_product(&backward_difference(&u), &u).unwrap();
        let floor = -1e-12 * inner_product(&u, &u).unwrap();
        prop_assert!(lhs >= floor, "{lhs} < {floor}");
        Ok(())
    })
}

/// `<M i, v> = <i, M^T v>` to 1e-12 relative.
pub fn adjoint_identity(cases: u32) -> Result<(), String> {
    check(cases, skew_case(), |(ic, i, v)| {
        let (mi, mtv) = (apply_m(&ic, &i).unwrap(), apply_mt(&ic, &v).unwrap());
        let (a, b) = (mi.inner(&v).unwrap(), i.inner(&mtv).unwrap());
        let scale = mi.norm() * v.norm() + i.norm() * mtv.norm();
        prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
        Ok(())
    })
}
