//! Maximal monotone one-port device laws and their resolvents.
//!
//! Each law maps its block's input to its output: impedances take a current
//! and return a voltage, admittances the reverse. Resolvents
//! `(Id + step * A)^-1` are evaluated elementwise across a
//! [`DiagonalOperator`], with LTI laws handled exactly in the DFT basis.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_traits::One;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circulant::CirculantFilter;
use crate::error::{Error, Result};
use crate::signal::{backward_difference_into, Grid, PeriodicSignal, SignalBundle};

/// Which block an element sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Form {
    /// Current in, voltage out; the element's current is an unknown in `i`.
    #[serde(rename = "Z")]
    Impedance,
    /// Voltage in, current out; the element's voltage is an unknown in `v`.
    #[serde(rename = "Y")]
    Admittance,
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Form::Impedance => "Z",
            Form::Admittance => "Y",
        })
    }
}

/// A nondecreasing, connected piecewise-linear graph in the plane.
///
/// The first and last segments are extended to rays, so the graph has no
/// endpoints. Vertical and horizontal pieces are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlCurve {
    points: Vec<(f64, f64)>,
}

impl PwlCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Law(format!(
                "piecewise-linear curve needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Law("piecewise-linear curve has non-finite points".into()));
        }
        for (k, w) in points.windows(2).enumerate() {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            if dx < 0.0 || dy < 0.0 {
                return Err(Error::Law(format!(
                    "piecewise-linear curve decreases between points {k} and {}",
                    k + 1
                )));
            }
            if dx == 0.0 && dy == 0.0 {
                return Err(Error::Law(format!(
                    "piecewise-linear curve repeats point {}",
                    k + 1
                )));
            }
        }
        Ok(PwlCurve { points })
    }

    /// Flat `x0 y0 x1 y1 ...` form.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() % 2 != 0 {
            return Err(Error::Law(format!(
                "piecewise-linear curve needs coordinate pairs, got {} numbers",
                values.len()
            )));
        }
        PwlCurve::new(values.chunks(2).map(|c| (c[0], c[1])).collect())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|&(x, y)| [x, y]).collect()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// The relational inverse (coordinates swapped).
    pub fn swapped(&self) -> PwlCurve {
        PwlCurve {
            points: self.points.iter().map(|&(x, y)| (y, x)).collect(),
        }
    }

    /// Single-valued evaluation; `None` on a vertical piece or outside the
    /// domain.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let pts = &self.points;
        let n = pts.len();
        let (x0, y0) = pts[0];
        let (x1, y1) = pts[1];
        let (xa, ya) = pts[n - 2];
        let (xb, yb) = pts[n - 1];
        let first_vertical = x1 == x0;
        let last_vertical = xb == xa;
        if x < x0 {
            return (!first_vertical).then(|| y0 + (x - x0) * (y1 - y0) / (x1 - x0));
        }
        if x > xb {
            return (!last_vertical).then(|| yb + (x - xb) * (yb - ya) / (xb - xa));
        }
        if (x == x0 && first_vertical) || (x == xb && last_vertical) {
            return None;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in pts.windows(2) {
            let ((sx, sy), (ex, ey)) = (w[0], w[1]);
            if x < sx || x > ex {
                continue;
            }
            let y = if sx == ex {
                lo = lo.min(sy);
                hi = hi.max(ey);
                continue;
            } else if x == sx {
                sy
            } else if x == ex {
                ey
            } else {
                sy + (x - sx) * (ey - sy) / (ex - sx)
            };
            lo = lo.min(y);
            hi = hi.max(y);
        }
        (hi <= lo).then_some(lo)
    }

    /// The unique `x` with `s in x + alpha * f(x)`, by exact segment
    /// arithmetic on the strictly increasing map `x + alpha f(x)`.
    pub fn resolvent(&self, alpha: f64, s: f64) -> f64 {
        let pts = &self.points;
        let n = pts.len();
        let level = |k: usize| pts[k].0 + alpha * pts[k].1;
        let along = |from: usize, to: usize, anchor: usize| {
            let (dx, dy) = (pts[to].0 - pts[from].0, pts[to].1 - pts[from].1);
            let t = (s - level(anchor)) / (dx + alpha * dy);
            pts[anchor].0 + t * dx
        };
        if s <= level(0) {
            return along(0, 1, 0);
        }
        if s >= level(n - 1) {
            return along(n - 2, n - 1, n - 1);
        }
        // First k with level(k + 1) >= s; levels are strictly increasing.
        let k = (0..n - 1).find(|&k| level(k + 1) >= s).unwrap_or(n - 2);
        let (sa, sb) = (level(k), level(k + 1));
        let (xa, xb) = (pts[k].0, pts[k + 1].0);
        if xa == xb {
            return xa;
        }
        xa + (s - sa) / (sb - sa) * (xb - xa)
    }
}

/// Device law of a single element in the direction of its block.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementLaw {
    /// Ideal diode, current to voltage: `v = 0` for `i > 0`, `v <= 0` at `i = 0`.
    DiodeImpedance,
    /// Ideal diode, voltage to current: the relational inverse of the above.
    DiodeAdmittance,
    ResistorImpedance { ohms: f64 },
    ResistorAdmittance { siemens: f64 },
    /// `i = C dv/dt`.
    CapacitorAdmittance { farads: f64 },
    /// `v = L di/dt`.
    InductorImpedance { henries: f64 },
    /// `v = R (RC d/dt + 1)^-1 i`.
    ParallelRcImpedance { ohms: f64, farads: f64 },
    /// Static nonlinear resistor, input on the x axis.
    PwlResistor(PwlCurve),
}

impl ElementLaw {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Law(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        match self {
            ElementLaw::DiodeImpedance | ElementLaw::DiodeAdmittance => Ok(()),
            ElementLaw::ResistorImpedance { ohms } => nonneg("resistance", *ohms),
            ElementLaw::ResistorAdmittance { siemens } => nonneg("conductance", *siemens),
            ElementLaw::CapacitorAdmittance { farads } => nonneg("capacitance", *farads),
            ElementLaw::InductorImpedance { henries } => nonneg("inductance", *henries),
            ElementLaw::ParallelRcImpedance { ohms, farads } => {
                nonneg("resistance", *ohms)?;
                nonneg("capacitance", *farads)
            }
            // Validated at construction.
            ElementLaw::PwlResistor(_) => Ok(()),
        }
    }

    /// The block this law belongs in, or `None` when it fits either.
    pub fn natural_form(&self) -> Option<Form> {
        match self {
            ElementLaw::DiodeImpedance
            | ElementLaw::ResistorImpedance { .. }
            | ElementLaw::InductorImpedance { .. }
            | ElementLaw::ParallelRcImpedance { .. } => Some(Form::Impedance),
            ElementLaw::DiodeAdmittance
            | ElementLaw::ResistorAdmittance { .. }
            | ElementLaw::CapacitorAdmittance { .. } => Some(Form::Admittance),
            ElementLaw::PwlResistor(_) => None,
        }
    }

    pub fn fits(&self, form: Form) -> bool {
        self.natural_form().is_none_or(|f| f == form)
    }

    /// Laws whose output depends on the time derivative of the input.
    pub fn is_dynamic(&self) -> bool {
        matches!(
            self,
            ElementLaw::CapacitorAdmittance { .. }
                | ElementLaw::InductorImpedance { .. }
                | ElementLaw::ParallelRcImpedance { .. }
        )
    }

    /// Whether the origin lies on the law's graph.
    pub fn passes_through_origin(&self) -> bool {
        match self {
            ElementLaw::PwlResistor(c) => c.resolvent(1.0, 0.0) == 0.0,
            _ => true,
        }
    }

    pub(crate) fn prepare(&self, step: f64, grid: Grid) -> Result<PreparedResolvent> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!("resolvent step must be positive, got {step}")));
        }
        let n = grid.samples();
        let dt = grid.dt();
        let one = Complex64::one();
        Ok(match self {
            ElementLaw::DiodeImpedance => PreparedResolvent::PositivePart,
            ElementLaw::DiodeAdmittance => PreparedResolvent::NegativePart,
            ElementLaw::ResistorImpedance { ohms: g } | ElementLaw::ResistorAdmittance { siemens: g } => {
                PreparedResolvent::Scale(1.0 / (1.0 + step * g))
            }
            ElementLaw::CapacitorAdmittance { farads: c } | ElementLaw::InductorImpedance { henries: c } => {
                if *c == 0.0 {
                    PreparedResolvent::Identity
                } else {
                    let k = step * c;
                    PreparedResolvent::Filter(Arc::new(CirculantFilter::new(
                        n,
                        dt,
                        |_| one,
                        |l| one + l * k,
                    )?))
                }
            }
            ElementLaw::ParallelRcImpedance { ohms, farads } => {
                if *ohms == 0.0 {
                    PreparedResolvent::Identity
                } else if *farads == 0.0 {
                    PreparedResolvent::Scale(1.0 / (1.0 + step * ohms))
                } else {
                    let rc = ohms * farads;
                    let tr = step * ohms;
                    PreparedResolvent::Filter(Arc::new(CirculantFilter::new(
                        n,
                        dt,
                        |l| l * rc + one,
                        |l| l * rc + one + tr,
                    )?))
                }
            }
            ElementLaw::PwlResistor(c) => PreparedResolvent::Pwl {
                curve: c.clone(),
                alpha: step,
            },
        })
    }

    /// `(Id + step * A)^-1 x`.
    pub fn resolvent(&self, step: f64, x: &PeriodicSignal) -> Result<PeriodicSignal> {
        let prepared = self.prepare(step, x.grid())?;
        let mut out = x.values().to_vec();
        prepared.apply(&mut out);
        Ok(PeriodicSignal::from_parts(x.grid(), out))
    }
}

/// A resolvent bound to one step size and grid.
#[derive(Debug, Clone)]
pub(crate) enum PreparedResolvent {
    Identity,
    PositivePart,
    NegativePart,
    Scale(f64),
    Pwl { curve: PwlCurve, alpha: f64 },
    Filter(Arc<CirculantFilter>),
}

impl PreparedResolvent {
    pub(crate) fn apply(&self, x: &mut [f64]) {
        match self {
            PreparedResolvent::Identity => {}
            PreparedResolvent::PositivePart => x.iter_mut().for_each(|v| *v = v.max(0.0)),
            PreparedResolvent::NegativePart => x.iter_mut().for_each(|v| *v = v.min(0.0)),
            PreparedResolvent::Scale(s) => x.iter_mut().for_each(|v| *v *= s),
            PreparedResolvent::Pwl { curve, alpha } => {
                x.iter_mut().for_each(|v| *v = curve.resolvent(*alpha, *v))
            }
            PreparedResolvent::Filter(f) => f.apply(x),
        }
    }
}

/// ReLU; the step does not enter.
pub fn resolvent_diode_impedance(tau: f64, i: &PeriodicSignal) -> Result<PeriodicSignal> {
    ElementLaw::DiodeImpedance.resolvent(tau, i)
}

/// `-ReLU(-v)`; the step does not enter.
pub fn resolvent_diode_admittance(sigma: f64, v: &PeriodicSignal) -> Result<PeriodicSignal> {
    ElementLaw::DiodeAdmittance.resolvent(sigma, v)
}

pub fn resolvent_pwl(curve: &PwlCurve, alpha: f64, s: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("resolvent step must be positive, got {alpha}")));
    }
    Ok(curve.resolvent(alpha, s))
}

pub fn resolvent_parallel_rc(
    ohms: f64,
    farads: f64,
    tau: f64,
    i: &PeriodicSignal,
) -> Result<PeriodicSignal> {
    let law = ElementLaw::ParallelRcImpedance { ohms, farads };
    law.validate()?;
    law.resolvent(tau, i)
}

pub fn resolvent_capacitor_admittance(
    farads: f64,
    sigma: f64,
    v: &PeriodicSignal,
) -> Result<PeriodicSignal> {
    let law = ElementLaw::CapacitorAdmittance { farads };
    law.validate()?;
    law.resolvent(sigma, v)
}

pub fn resolvent_inductor_impedance(
    henries: f64,
    tau: f64,
    i: &PeriodicSignal,
) -> Result<PeriodicSignal> {
    let law = ElementLaw::InductorImpedance { henries };
    law.validate()?;
    law.resolvent(tau, i)
}

/// Applies the law to a signal. `None` when the law is multivalued (or
/// undefined) at some sample, as for an ideal diode at zero current.
pub fn forward_eval(law: &ElementLaw, input: &PeriodicSignal) -> Option<PeriodicSignal> {
    let grid = input.grid();
    let x = input.values();
    let values = match law {
        ElementLaw::DiodeImpedance => {
            if x.iter().all(|&v| v > 0.0) {
                vec![0.0; x.len()]
            } else {
                return None;
            }
        }
        ElementLaw::DiodeAdmittance => {
            if x.iter().all(|&v| v < 0.0) {
                vec![0.0; x.len()]
            } else {
                return None;
            }
        }
        ElementLaw::ResistorImpedance { ohms: g } | ElementLaw::ResistorAdmittance { siemens: g } => {
            x.iter().map(|v| g * v).collect()
        }
        ElementLaw::CapacitorAdmittance { farads: c } | ElementLaw::InductorImpedance { henries: c } => {
            let mut d = vec![0.0; x.len()];
            backward_difference_into(x, grid.dt(), &mut d);
            d.iter().map(|v| c * v).collect()
        }
        ElementLaw::ParallelRcImpedance { ohms, farads } => {
            let rc = ohms * farads;
            let r = *ohms;
            let one = Complex64::one();
            let filter =
                CirculantFilter::new(grid.samples(), grid.dt(), |_| one * r, |l| l * rc + one).ok()?;
            let mut out = x.to_vec();
            filter.apply(&mut out);
            out
        }
        ElementLaw::PwlResistor(c) => x.iter().map(|&v| c.eval(v)).collect::<Option<Vec<_>>>()?,
    };
    Some(PeriodicSignal::from_parts(grid, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PlanKey {
    step: u64,
    samples: usize,
    dt: u64,
}

/// Per-law resolvents for one step size and grid.
#[derive(Debug)]
pub(crate) struct ResolventPlan {
    entries: Vec<PreparedResolvent>,
}

impl ResolventPlan {
    pub(crate) fn apply(&self, channels: &mut [Vec<f64>]) {
        debug_assert_eq!(channels.len(), self.entries.len());
        for (x, r) in channels.iter_mut().zip(&self.entries) {
            r.apply(x);
        }
    }
}

/// Diagonal concatenation of element laws, each tagged with its form.
///
/// Resolvent plans are built on first use for a given `(step, grid)` and
/// cached; cached plans are immutable, so concurrent callers see the same
/// results as sequential ones.
pub struct DiagonalOperator {
    laws: Vec<ElementLaw>,
    forms: Vec<Form>,
    cache: Mutex<HashMap<PlanKey, Arc<ResolventPlan>>>,
}

impl fmt::Debug for DiagonalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiagonalOperator")
            .field("laws", &self.laws)
            .field("forms", &self.forms)
            .finish()
    }
}

impl Clone for DiagonalOperator {
    fn clone(&self) -> Self {
        DiagonalOperator {
            laws: self.laws.clone(),
            forms: self.forms.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl PartialEq for DiagonalOperator {
    fn eq(&self, other: &Self) -> bool {
        self.laws == other.laws && self.forms == other.forms
    }
}

impl DiagonalOperator {
    pub fn new(entries: Vec<(ElementLaw, Form)>) -> Result<Self> {
        for (k, (law, form)) in entries.iter().enumerate() {
            law.validate()?;
            if !law.fits(*form) {
                return Err(Error::Law(format!(
                    "law {k} ({law:?}) cannot be used in {form} form"
                )));
            }
        }
        let (laws, forms) = entries.into_iter().unzip();
        Ok(DiagonalOperator {
            laws,
            forms,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Each law in its natural form; fails for laws that fit both.
    pub fn from_laws(laws: Vec<ElementLaw>) -> Result<Self> {
        let entries = laws
            .into_iter()
            .map(|l| match l.natural_form() {
                Some(f) => Ok((l, f)),
                None => Err(Error::Law(format!("law {l:?} needs an explicit form"))),
            })
            .collect::<Result<Vec<_>>>()?;
        DiagonalOperator::new(entries)
    }

    pub fn impedances(laws: Vec<ElementLaw>) -> Result<Self> {
        DiagonalOperator::new(laws.into_iter().map(|l| (l, Form::Impedance)).collect())
    }

    pub fn admittances(laws: Vec<ElementLaw>) -> Result<Self> {
        DiagonalOperator::new(laws.into_iter().map(|l| (l, Form::Admittance)).collect())
    }

    pub fn empty() -> Self {
        DiagonalOperator {
            laws: Vec::new(),
            forms: Vec::new(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn laws(&self) -> &[ElementLaw] {
        &self.laws
    }

    pub fn forms(&self) -> &[Form] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn all_in(&self, form: Form) -> bool {
        self.forms.iter().all(|&f| f == form)
    }

    pub(crate) fn plan(&self, step: f64, grid: Grid) -> Result<Arc<ResolventPlan>> {
        let key = PlanKey {
            step: step.to_bits(),
            samples: grid.samples(),
            dt: grid.dt().to_bits(),
        };
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(plan) = cache.get(&key) {
            return Ok(Arc::clone(plan));
        }
        let entries = self
            .laws
            .iter()
            .map(|l| l.prepare(step, grid))
            .collect::<Result<Vec<_>>>()?;
        let plan = Arc::new(ResolventPlan { entries });
        cache.insert(key, Arc::clone(&plan));
        Ok(plan)
    }

    fn check_bundle(&self, z: &SignalBundle) -> Result<()> {
        if z.len() != self.laws.len() {
            return Err(Error::Dimension(format!(
                "{} channels for {} element laws",
                z.len(),
                self.laws.len()
            )));
        }
        Ok(())
    }
}

/// Channelwise resolvent of the diagonal operator.
pub fn diagonal_resolvent(op: &DiagonalOperator, step: f64, z: &SignalBundle) -> Result<SignalBundle> {
    op.check_bundle(z)?;
    let plan = op.plan(step, z.grid())?;
    let mut rows = z.rows();
    plan.apply(&mut rows);
    Ok(SignalBundle::from_rows_unchecked(z.grid(), rows, z.labels().to_vec()))
}

/// Resolvent of `A(.) - offset`, i.e. `diagonal_resolvent(z + step * offset)`.
pub fn offset_resolvent(
    op: &DiagonalOperator,
    step: f64,
    z: &SignalBundle,
    offset: &SignalBundle,
) -> Result<SignalBundle> {
    op.check_bundle(z)?;
    let shifted = z.lincomb(1.0, offset, step)?;
    diagonal_resolvent(op, step, &shifted)
}
