//! Exact elimination of Kirchhoff and transformer constraints.
//!
//! Unknowns are every branch current and voltage plus one potential per
//! non-reference node. Rows are KVL per branch, KCL per non-reference node
//! and `k` constraints per `k`-winding transformer, so the system is square
//! in the dependent variables once the inputs are chosen. Arithmetic is
//! rational, which makes ratios like `1/24` come out exactly.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::elements::Form;
use crate::error::{Error, Result};
use crate::structure::{HybridMatrix, Interconnection};

use super::{BranchKind, Excitation, Netlist, Partition};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Variable {
    Current(String),
    Voltage(String),
}

impl Variable {
    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn name(&self) -> &str {
        match self {
            Variable::Current(n) | Variable::Voltage(n) => n,
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variable::Current(n) => write!(f, "i_{n}"),
            Variable::Voltage(n) => write!(f, "v_{n}"),
        }
    }
}

/// Result of [`derive_hybrid`].
#[derive(Debug, Clone)]
pub struct DerivedHybrid {
    pub partition: Partition,
    pub hybrid: HybridMatrix,
    pub interconnection: Interconnection,
    /// `(u, i, v)`: port inputs, impedance-form currents, admittance-form
    /// voltages.
    pub inputs: Vec<Variable>,
    /// `(y, v_dual, i_dual)`, matching `inputs` row for column.
    pub outputs: Vec<Variable>,
    /// Impedance-form element names, in netlist order.
    pub impedance_elements: Vec<String>,
    /// Admittance-form element names, in netlist order.
    pub admittance_elements: Vec<String>,
    /// The hybrid matrix before rounding.
    pub exact: Vec<Vec<BigRational>>,
}

fn rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Config(format!("non-finite coefficient {x}")))
}

/// Reference node per galvanic component; the declared ground wins inside its
/// own component.
fn reference_nodes(netlist: &Netlist) -> Vec<bool> {
    let n = netlist.nodes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for b in &netlist.branches {
        let (a, c) = (find(&mut parent, b.pos), find(&mut parent, b.neg));
        if a != c {
            parent[a.max(c)] = a.min(c);
        }
    }
    let mut chosen: Vec<Option<usize>> = vec![None; n];
    if let Some(g) = netlist.ground {
        let r = find(&mut parent, g);
        chosen[r] = Some(g);
    }
    for k in 0..n {
        let r = find(&mut parent, k);
        if chosen[r].is_none() {
            chosen[r] = Some(k);
        }
    }
    let mut is_ref = vec![false; n];
    for c in chosen.into_iter().flatten() {
        is_ref[c] = true;
    }
    is_ref
}

struct System {
    rows: Vec<Vec<BigRational>>,
    cols: usize,
}

impl System {
    fn row(&mut self) -> &mut Vec<BigRational> {
        self.rows.push(vec![BigRational::zero(); self.cols]);
        self.rows.last_mut().expect("just pushed")
    }
}

/// Exact hybrid matrix for `partition`. Fails with
/// [`Error::NoRepresentation`] when the chosen inputs do not determine the
/// rest of the box.
pub fn derive_hybrid(netlist: &Netlist, partition: &Partition) -> Result<DerivedHybrid> {
    partition.check(netlist)?;
    let nb = netlist.branches.len();
    let is_ref = reference_nodes(netlist);
    let mut node_col = vec![usize::MAX; netlist.nodes.len()];
    let mut next = 2 * nb;
    for (k, r) in is_ref.iter().enumerate() {
        if !r {
            node_col[k] = next;
            next += 1;
        }
    }
    let cols = next;
    let icol = |b: usize| b;
    let vcol = |b: usize| nb + b;

    let mut sys = System { rows: Vec::new(), cols };
    let one = BigRational::one();

    // KVL: v_b = e(n+) - e(n-).
    for (b, br) in netlist.branches.iter().enumerate() {
        let r = sys.row();
        r[vcol(b)] = one.clone();
        if !is_ref[br.pos] {
            r[node_col[br.pos]] -= &one;
        }
        if !is_ref[br.neg] {
            r[node_col[br.neg]] += &one;
        }
    }
    // KCL: branch currents leaving each node sum to zero.
    for node in 0..netlist.nodes.len() {
        if is_ref[node] {
            continue;
        }
        let r = sys.row();
        for (b, br) in netlist.branches.iter().enumerate() {
            if br.pos == node {
                r[icol(b)] -= &one;
            }
            if br.neg == node {
                r[icol(b)] += &one;
            }
        }
    }
    // Ideal transformers: v_k / n_k equal across the group, sum n_k i_k = 0.
    let mut groups: Vec<(&str, Vec<(usize, BigRational)>)> = Vec::new();
    for (b, br) in netlist.branches.iter().enumerate() {
        if let BranchKind::Winding { group, turns } = &br.kind {
            let t = rational(*turns)?;
            match groups.iter_mut().find(|(g, _)| g == group) {
                Some((_, members)) => members.push((b, t)),
                None => groups.push((group.as_str(), vec![(b, t)])),
            }
        }
    }
    for (_, members) in &groups {
        let (b1, n1) = &members[0];
        for (bk, nk) in &members[1..] {
            let r = sys.row();
            r[vcol(*bk)] = n1.clone();
            r[vcol(*b1)] = -nk.clone();
        }
        let r = sys.row();
        for (bk, nk) in members {
            r[icol(*bk)] = nk.clone();
        }
    }

    // Inputs and the outputs paired with them.
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut input_cols = Vec::new();
    let mut output_cols = Vec::new();
    let ports: Vec<usize> = (0..nb)
        .filter(|&b| matches!(netlist.branches[b].kind, BranchKind::Port))
        .collect();
    for (&b, exc) in ports.iter().zip(&partition.port_excitations) {
        let name = netlist.branches[b].name.clone();
        match exc {
            Excitation::Voltage => {
                inputs.push(Variable::Voltage(name.clone()));
                input_cols.push(vcol(b));
                outputs.push(Variable::Current(name));
                output_cols.push(icol(b));
            }
            Excitation::Current => {
                inputs.push(Variable::Current(name.clone()));
                input_cols.push(icol(b));
                outputs.push(Variable::Voltage(name));
                output_cols.push(vcol(b));
            }
        }
    }
    let elements: Vec<usize> = (0..nb)
        .filter(|&b| matches!(netlist.branches[b].kind, BranchKind::Element(_)))
        .collect();
    let mut impedance_elements = Vec::new();
    let mut admittance_elements = Vec::new();
    for want in [Form::Impedance, Form::Admittance] {
        for (&b, form) in elements.iter().zip(&partition.element_forms) {
            if *form != want {
                continue;
            }
            let name = netlist.branches[b].name.clone();
            if want == Form::Impedance {
                inputs.push(Variable::Current(name.clone()));
                input_cols.push(icol(b));
                outputs.push(Variable::Voltage(name.clone()));
                output_cols.push(vcol(b));
                impedance_elements.push(name);
            } else {
                inputs.push(Variable::Voltage(name.clone()));
                input_cols.push(vcol(b));
                outputs.push(Variable::Current(name.clone()));
                output_cols.push(icol(b));
                admittance_elements.push(name);
            }
        }
    }

    let mut is_input = vec![false; cols];
    for &c in &input_cols {
        is_input[c] = true;
    }
    let dep_cols: Vec<usize> = (0..cols).filter(|&c| !is_input[c]).collect();
    let singular = || Error::NoRepresentation {
        attempted: vec![partition.describe(netlist)],
    };
    if dep_cols.len() != sys.rows.len() {
        return Err(Error::InternalConsistency(format!(
            "{} equations for {} dependent unknowns",
            sys.rows.len(),
            dep_cols.len()
        )));
    }

    // Gauss-Jordan on the dependent columns.
    let rows = &mut sys.rows;
    let mut pivot_row_of = vec![usize::MAX; cols];
    let mut used = vec![false; rows.len()];
    for &c in &dep_cols {
        let Some(pr) = (0..rows.len()).find(|&r| !used[r] && !rows[r][c].is_zero()) else {
            return Err(singular());
        };
        used[pr] = true;
        pivot_row_of[c] = pr;
        let inv = rows[pr][c].recip();
        for x in rows[pr].iter_mut() {
            if !x.is_zero() {
                *x *= &inv;
            }
        }
        let pivot = rows[pr].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == pr || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
    }

    // Each dependent variable is minus its row over the input columns.
    let size = inputs.len();
    let mut exact = vec![vec![BigRational::zero(); size]; size];
    for (r, &oc) in output_cols.iter().enumerate() {
        let pr = pivot_row_of[oc];
        if pr == usize::MAX {
            return Err(Error::InternalConsistency(format!(
                "output {} is also an input",
                outputs[r]
            )));
        }
        for (c, &ic) in input_cols.iter().enumerate() {
            exact[r][c] = -rows[pr][ic].clone();
        }
    }

    let (m, p, q) = (ports.len(), impedance_elements.len(), admittance_elements.len());
    for r in 0..size {
        for c in 0..size {
            if !(&exact[r][c] + &exact[c][r]).is_zero() {
                return Err(Error::InternalConsistency(format!(
                    "derived hybrid matrix is not skew at ({r}, {c})"
                )));
            }
        }
    }
    let mut h = DMatrix::zeros(size, size);
    for r in 0..size {
        for c in 0..size {
            h[(r, c)] = to_f64(&exact[r][c]);
        }
    }
    let hybrid = HybridMatrix { h, m, p, q };
    hybrid.validate(0.0)?;
    let interconnection = hybrid.to_interconnection()?;
    Ok(DerivedHybrid {
        partition: partition.clone(),
        hybrid,
        interconnection,
        inputs,
        outputs,
        impedance_elements,
        admittance_elements,
        exact,
    })
}

/// Nearest double to an exact ratio.
pub(crate) fn to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.denom().is_one() {
        return x.numer().to_f64().unwrap_or(f64::NAN);
    }
    // Small operands convert exactly, so one division rounds once.
    let small = |b: &BigInt| b.abs() < BigInt::from(1u64 << 53);
    if small(x.numer()) && small(x.denom()) {
        let n = x.numer().to_f64().expect("small integer");
        let d = x.denom().to_f64().expect("small integer");
        return n / d;
    }
    x.to_f64().unwrap_or(f64::NAN)
}
