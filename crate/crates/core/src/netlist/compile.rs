//! Netlist + partition + excitations to a solver [`Problem`].

use crate::elements::{DiagonalOperator, ElementLaw, Form};
use crate::error::{Error, Result};
use crate::signal::{make_waveform, Grid, SignalBundle, Waveform};
use crate::solver::Problem;

use super::{derive_hybrid, DerivedHybrid, ElementKind, Netlist, Partition};

/// Law for `kind` in the block given by `form`.
pub fn element_law(kind: &ElementKind, form: Form) -> Result<ElementLaw> {
    if !kind.admits(form) {
        return Err(Error::Config(format!(
            "{} cannot take {form} form",
            kind.keyword()
        )));
    }
    Ok(match (kind, form) {
        (ElementKind::Resistor { ohms }, Form::Impedance) => ElementLaw::ResistorImpedance { ohms: *ohms },
        (ElementKind::Resistor { ohms }, Form::Admittance) => ElementLaw::ResistorAdmittance {
            siemens: 1.0 / ohms,
        },
        (ElementKind::Capacitor { farads }, _) => ElementLaw::CapacitorAdmittance { farads: *farads },
        (ElementKind::Inductor { henries }, _) => ElementLaw::InductorImpedance { henries: *henries },
        (ElementKind::ParallelRc { ohms, farads }, _) => ElementLaw::ParallelRcImpedance {
            ohms: *ohms,
            farads: *farads,
        },
        (ElementKind::Diode, Form::Impedance) => ElementLaw::DiodeImpedance,
        (ElementKind::Diode, Form::Admittance) => ElementLaw::DiodeAdmittance,
        (ElementKind::Pwl(c), Form::Impedance) => ElementLaw::PwlResistor(c.clone()),
        (ElementKind::Pwl(c), Form::Admittance) => ElementLaw::PwlResistor(c.swapped()),
    })
}

/// Derives the hybrid matrix for `partition` and assembles the problem.
/// `excitations` names every port exactly once.
pub fn compile(
    netlist: &Netlist,
    partition: &Partition,
    grid: Grid,
    excitations: &[(String, Waveform)],
) -> Result<Problem> {
    let derived = derive_hybrid(netlist, partition)?;
    problem_from_derived(netlist, &derived, grid, excitations)
}

pub(crate) fn problem_from_derived(
    netlist: &Netlist,
    derived: &DerivedHybrid,
    grid: Grid,
    excitations: &[(String, Waveform)],
) -> Result<Problem> {
    for (name, _) in excitations {
        if !netlist.ports().any(|b| &b.name == name) {
            return Err(Error::Config(format!("excitation for unknown port '{name}'")));
        }
        if excitations.iter().filter(|(n, _)| n == name).count() > 1 {
            return Err(Error::Config(format!("port '{name}' is excited twice")));
        }
    }
    let mut channels = Vec::new();
    for port in netlist.ports() {
        let (_, w) = excitations
            .iter()
            .find(|(n, _)| *n == port.name)
            .ok_or_else(|| Error::Config(format!("no excitation for port '{}'", port.name)))?;
        channels.push(
            make_waveform(w, grid)
                .map_err(|e| Error::Config(format!("port '{}': {e}", port.name)))?,
        );
    }
    let m = channels.len();
    let u_labels = derived.inputs[..m].iter().map(|v| v.label()).collect();
    let y_labels = derived.outputs[..m].iter().map(|v| v.label()).collect();
    let u = SignalBundle::new(grid, channels, u_labels)?;

    let law_of = |name: &str, form: Form| -> Result<ElementLaw> {
        let (_, kind) = netlist
            .elements()
            .find(|(b, _)| b.name == name)
            .expect("derived names come from the netlist");
        element_law(kind, form)
    };
    let r_block = DiagonalOperator::new(
        derived
            .impedance_elements
            .iter()
            .map(|n| Ok((law_of(n, Form::Impedance)?, Form::Impedance)))
            .collect::<Result<_>>()?,
    )?;
    let g_block = DiagonalOperator::new(
        derived
            .admittance_elements
            .iter()
            .map(|n| Ok((law_of(n, Form::Admittance)?, Form::Admittance)))
            .collect::<Result<_>>()?,
    )?;
    let i_labels = derived.impedance_elements.iter().map(|n| format!("i_{n}")).collect();
    let v_labels = derived.admittance_elements.iter().map(|n| format!("v_{n}")).collect();
    Problem::with_labels(
        derived.interconnection.clone(),
        r_block,
        g_block,
        u,
        i_labels,
        v_labels,
        y_labels,
    )
}

impl DerivedHybrid {
    /// Assembles the problem for this representation.
    pub fn problem(&self, netlist: &Netlist, grid: Grid, excitations: &[(String, Waveform)]) -> Result<Problem> {
        problem_from_derived(netlist, self, grid, excitations)
    }
}
