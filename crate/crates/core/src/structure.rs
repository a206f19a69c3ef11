//! The lossless interconnection: skew coupling `M`, input maps `B_R`, `B_G`
//! and feedthrough `D`, all acting samplewise (`X = X~ (x) Id`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::signal::{Grid, PeriodicSignal, SignalBundle};

/// Matrices of the monotone+skew form for `m` ports, `p` impedance-form and
/// `q` admittance-form elements.
#[derive(Debug, Clone, PartialEq)]
pub struct Interconnection {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// `q x p`.
    pub m_tilde: DMatrix<f64>,
    /// `p x m`.
    pub b_r: DMatrix<f64>,
    /// `q x m`.
    pub b_g: DMatrix<f64>,
    /// `m x m`.
    pub d: DMatrix<f64>,
}

impl Interconnection {
    /// Builds and validates.
    pub fn new(
        m_tilde: DMatrix<f64>,
        b_r: DMatrix<f64>,
        b_g: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let ic = Interconnection {
            m: d.nrows(),
            p: b_r.nrows(),
            q: b_g.nrows(),
            m_tilde,
            b_r,
            b_g,
            d,
        };
        let violations = validate_interconnection(&ic);
        if violations.is_empty() {
            Ok(ic)
        } else {
            Err(Error::Dimension(violations.join("; ")))
        }
    }

    /// Element count `p + q`.
    pub fn n(&self) -> usize {
        self.p + self.q
    }

    /// The full `(m + n) x (m + n)` hybrid matrix this interconnection
    /// corresponds to, `[[D, -B^T], [B, H22]]`.
    pub fn hybrid(&self) -> HybridMatrix {
        let (m, p, q) = (self.m, self.p, self.q);
        let size = m + p + q;
        let mut h = DMatrix::zeros(size, size);
        h.view_mut((0, 0), (m, m)).copy_from(&self.d);
        for r in 0..p {
            for c in 0..m {
                h[(m + r, c)] = self.b_r[(r, c)];
                h[(c, m + r)] = -self.b_r[(r, c)];
            }
        }
        for r in 0..q {
            for c in 0..m {
                h[(m + p + r, c)] = self.b_g[(r, c)];
                h[(c, m + p + r)] = -self.b_g[(r, c)];
            }
            for c in 0..p {
                h[(m + p + r, m + c)] = self.m_tilde[(r, c)];
                h[(m + c, m + p + r)] = -self.m_tilde[(r, c)];
            }
        }
        HybridMatrix { h, m, p, q }
    }
}

/// Dimension and finiteness problems, empty when the interconnection is
/// usable. Never fails.
pub fn validate_interconnection(ic: &Interconnection) -> Vec<String> {
    let mut out = Vec::new();
    let mut shape = |name: &str, a: &DMatrix<f64>, rows: usize, cols: usize| {
        if a.shape() != (rows, cols) {
            out.push(format!(
                "{name} is {}x{}, expected {rows}x{cols}",
                a.nrows(),
                a.ncols()
            ));
        }
        if a.iter().any(|v| !v.is_finite()) {
            out.push(format!("{name} has non-finite entries"));
        }
    };
    shape("M", &ic.m_tilde, ic.q, ic.p);
    shape("B_R", &ic.b_r, ic.p, ic.m);
    shape("B_G", &ic.b_g, ic.q, ic.m);
    shape("D", &ic.d, ic.m, ic.m);
    out
}

/// Hybrid representation of the wires-and-transformers box, ordered as
/// `(u, i, v)` on the input side and `(y, v_dual, i_dual)` on the output side.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridMatrix {
    pub h: DMatrix<f64>,
    pub m: usize,
    pub p: usize,
    pub q: usize,
}

impl HybridMatrix {
    pub fn skew_defect(&self) -> f64 {
        (&self.h + self.h.transpose()).amax()
    }

    /// Largest entry of the two diagonal sub-blocks of `H22`, which the
    /// `(i, v)` partition forces to zero.
    pub fn diagonal_block_defect(&self) -> f64 {
        let (m, p, q) = (self.m, self.p, self.q);
        let a = self.h.view((m, m), (p, p)).amax();
        let b = self.h.view((m + p, m + p), (q, q)).amax();
        a.max(b)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let size = self.m + self.p + self.q;
        if self.h.shape() != (size, size) {
            return Err(Error::Dimension(format!(
                "hybrid matrix is {}x{}, expected {size}x{size}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        let skew = self.skew_defect();
        if !(skew <= tol) {
            return Err(Error::InternalConsistency(format!(
                "hybrid matrix is not skew-symmetric (max |H + H^T| = {skew:e})"
            )));
        }
        let diag = self.diagonal_block_defect();
        if !(diag <= tol) {
            return Err(Error::InternalConsistency(format!(
                "hybrid matrix couples like variables (max diagonal-block entry {diag:e})"
            )));
        }
        Ok(())
    }

    /// `D = H11`, `B = H21`, `M~` from the lower-left block of `H22`.
    pub fn to_interconnection(&self) -> Result<Interconnection> {
        let (m, p, q) = (self.m, self.p, self.q);
        Interconnection::new(
            self.h.view((m + p, m), (q, p)).into_owned(),
            self.h.view((m, 0), (p, m)).into_owned(),
            self.h.view((m + p, 0), (q, m)).into_owned(),
            self.h.view((0, 0), (m, m)).into_owned(),
        )
    }
}

/// `out_r = sum_c a[r, c] in_c`, per sample.
pub(crate) fn mat_apply(a: &DMatrix<f64>, input: &[Vec<f64>], out: &mut [Vec<f64>]) {
    for (r, o) in out.iter_mut().enumerate() {
        o.iter_mut().for_each(|x| *x = 0.0);
        for (c, x) in input.iter().enumerate() {
            let w = a[(r, c)];
            if w != 0.0 {
                for (ok, xk) in o.iter_mut().zip(x) {
                    *ok += w * xk;
                }
            }
        }
    }
}

/// `out_c = sum_r a[r, c] in_r`, per sample.
pub(crate) fn mat_apply_transpose(a: &DMatrix<f64>, input: &[Vec<f64>], out: &mut [Vec<f64>]) {
    for (c, o) in out.iter_mut().enumerate() {
        o.iter_mut().for_each(|x| *x = 0.0);
        for (r, x) in input.iter().enumerate() {
            let w = a[(r, c)];
            if w != 0.0 {
                for (ok, xk) in o.iter_mut().zip(x) {
                    *ok += w * xk;
                }
            }
        }
    }
}

fn apply_matrix(
    a: &DMatrix<f64>,
    transpose: bool,
    input: &SignalBundle,
    labels: Vec<String>,
) -> Result<SignalBundle> {
    let (rows, cols) = if transpose {
        (a.ncols(), a.nrows())
    } else {
        (a.nrows(), a.ncols())
    };
    if input.len() != cols {
        return Err(Error::Dimension(format!(
            "matrix expects {cols} channels, bundle has {}",
            input.len()
        )));
    }
    if labels.len() != rows {
        return Err(Error::Dimension(format!(
            "{} labels for {rows} output channels",
            labels.len()
        )));
    }
    let grid = input.grid();
    let mut out = vec![vec![0.0; grid.samples()]; rows];
    if transpose {
        mat_apply_transpose(a, &input.rows(), &mut out);
    } else {
        mat_apply(a, &input.rows(), &mut out);
    }
    Ok(SignalBundle::from_rows_unchecked(grid, out, labels))
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|k| format!("{prefix}{k}")).collect()
}

/// `M i` (`p` channels in, `q` out).
pub fn apply_m(ic: &Interconnection, i: &SignalBundle) -> Result<SignalBundle> {
    apply_matrix(&ic.m_tilde, false, i, default_labels("Mi", ic.q))
}

/// `M^T v` (`q` channels in, `p` out).
pub fn apply_mt(ic: &Interconnection, v: &SignalBundle) -> Result<SignalBundle> {
    apply_matrix(&ic.m_tilde, true, v, default_labels("Mtv", ic.p))
}

/// The skew block `S (i, v) = (M^T v, -M i)`.
pub fn apply_skew(
    ic: &Interconnection,
    i: &SignalBundle,
    v: &SignalBundle,
) -> Result<(SignalBundle, SignalBundle)> {
    let top = apply_mt(ic, v)?;
    let bottom = apply_m(ic, i)?;
    let neg = bottom.lincomb(-1.0, &bottom, 0.0)?;
    Ok((top, neg))
}

/// Responses `y = -(B_R^T i + B_G^T v) + D u`.
pub fn apply_output(
    ic: &Interconnection,
    i: &SignalBundle,
    v: &SignalBundle,
    u: &SignalBundle,
    labels: Vec<String>,
) -> Result<SignalBundle> {
    if i.len() != ic.p || v.len() != ic.q || u.len() != ic.m {
        return Err(Error::Dimension(format!(
            "output map expects (p, q, m) = ({}, {}, {}) channels, got ({}, {}, {})",
            ic.p,
            ic.q,
            ic.m,
            i.len(),
            v.len(),
            u.len()
        )));
    }
    let grid = i.grid();
    grid.check_same(&v.grid())?;
    grid.check_same(&u.grid())?;
    let mut y = vec![vec![0.0; grid.samples()]; ic.m];
    output_into(ic, &i.rows(), &v.rows(), &u.rows(), &mut y);
    let labels = if labels.is_empty() {
        default_labels("y", ic.m)
    } else {
        labels
    };
    if labels.len() != ic.m {
        return Err(Error::Dimension(format!("{} labels for {} outputs", labels.len(), ic.m)));
    }
    Ok(SignalBundle::from_rows_unchecked(grid, y, labels))
}

pub(crate) fn output_into(
    ic: &Interconnection,
    i: &[Vec<f64>],
    v: &[Vec<f64>],
    u: &[Vec<f64>],
    y: &mut [Vec<f64>],
) {
    let samples = y.first().map_or(0, |c| c.len());
    let mut a = vec![vec![0.0; samples]; ic.m];
    let mut b = vec![vec![0.0; samples]; ic.m];
    let mut c = vec![vec![0.0; samples]; ic.m];
    mat_apply_transpose(&ic.b_r, i, &mut a);
    mat_apply_transpose(&ic.b_g, v, &mut b);
    mat_apply(&ic.d, u, &mut c);
    for r in 0..ic.m {
        for k in 0..samples {
            y[r][k] = c[r][k] - (a[r][k] + b[r][k]);
        }
    }
}

/// Dual variables fixed by the interconnection, `z~ = B u + H22 z`: the
/// element voltages for `i` and element currents for `v`.
pub fn dual_variables(
    ic: &Interconnection,
    i: &SignalBundle,
    v: &SignalBundle,
    u: &SignalBundle,
) -> Result<(SignalBundle, SignalBundle)> {
    let (mtv, mi) = (apply_mt(ic, v)?, apply_m(ic, i)?);
    let bru = apply_matrix(&ic.b_r, false, u, default_labels("v", ic.p))?;
    let bgu = apply_matrix(&ic.b_g, false, u, default_labels("i", ic.q))?;
    Ok((bru.lincomb(1.0, &mtv, -1.0)?, bgu.lincomb(1.0, &mi, 1.0)?))
}

/// Per-sample `u(k)^T y(k) + z(k)^T z~(k)`; identically zero for signals
/// related by a skew hybrid matrix.
pub fn power_balance(
    u: &SignalBundle,
    y: &SignalBundle,
    z: &SignalBundle,
    z_dual: &SignalBundle,
) -> Result<PeriodicSignal> {
    if u.len() != y.len() || z.len() != z_dual.len() {
        return Err(Error::Dimension(format!(
            "power balance pairs {} with {} and {} with {} channels",
            u.len(),
            y.len(),
            z.len(),
            z_dual.len()
        )));
    }
    let grid: Grid = u.grid();
    for b in [y, z, z_dual] {
        grid.check_same(&b.grid())?;
    }
    let mut acc = vec![0.0; grid.samples()];
    for (a, b) in u.channels().iter().zip(y.channels()).chain(z.channels().iter().zip(z_dual.channels())) {
        for (s, (x, w)) in acc.iter_mut().zip(a.values().iter().zip(b.values())) {
            *s += x * w;
        }
    }
    Ok(PeriodicSignal::from_parts(grid, acc))
}

const POWER_ITERATION_TOL: f64 = 1e-14;
const POWER_ITERATION_MAX: usize = 10_000;

/// Spectral norm (largest singular value). Exact SVD when the smaller
/// dimension is at most 3, otherwise power iteration on `M^T M`.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    let small = m.nrows().min(m.ncols());
    if small == 0 {
        return 0.0;
    }
    if small <= 3 {
        return m.clone().singular_values().max();
    }
    power_iteration_norm(m)
}

pub(crate) fn power_iteration_norm(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    // Fixed, non-constant start: the all-ones vector is in the kernel of any
    // matrix whose rows sum to zero, which incidence-like couplings often do.
    let mut x = nalgebra::DVector::from_fn(gram.nrows(), |k, _| {
        0.5 + ((k as f64 + 1.0) * 0.754_877_666_246_692_7).fract()
    });
    x /= x.norm();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATION_MAX {
        let y = &gram * &x;
        let next = x.dot(&y);
        let ny = y.norm();
        if ny == 0.0 {
            return 0.0;
        }
        x = y / ny;
        if (next - lambda).abs() <= POWER_ITERATION_TOL * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0).sqrt()
}
