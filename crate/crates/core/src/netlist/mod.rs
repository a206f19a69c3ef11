//! Circuit descriptions and the derivation of their monotone+skew form.
//!
//! A netlist is a box of wires and ideal transformer windings with two kinds
//! of terminal pairs drawn out of it: external ports and elements. Every
//! branch uses the same orientation: its current enters at `n+`, passes
//! through the branch and leaves at `n-`, so `i * v` is the power drawn out
//! of the box at that branch.
//!
//! [`derive_hybrid`] eliminates the wiring constraints for a chosen
//! [`Partition`] and returns the skew hybrid matrix together with the
//! [`Interconnection`](crate::structure::Interconnection) read off its blocks.

mod compile;
mod hybrid;
mod parse;
mod partition;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::elements::{ElementLaw, Form, PwlCurve};
use crate::error::{Error, Result};

pub use compile::{compile, element_law};
pub use hybrid::{derive_hybrid, DerivedHybrid, Variable};
pub use parse::{parse_netlist, parse_number};
pub use partition::{partition_search, FixedChoices, MAX_PARTITION_ATTEMPTS};

/// Device attached to an element branch.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Resistor { ohms: f64 },
    Capacitor { farads: f64 },
    Inductor { henries: f64 },
    Diode,
    ParallelRc { ohms: f64, farads: f64 },
    /// Current-to-voltage curve.
    Pwl(PwlCurve),
}

impl ElementKind {
    /// The forms this element may take, in search order.
    pub fn admissible_forms(&self) -> &'static [Form] {
        match self {
            ElementKind::Capacitor { .. } => &[Form::Admittance],
            ElementKind::Inductor { .. } | ElementKind::ParallelRc { .. } => &[Form::Impedance],
            // A short has no admittance.
            ElementKind::Resistor { ohms } if *ohms == 0.0 => &[Form::Impedance],
            ElementKind::Resistor { .. } | ElementKind::Diode | ElementKind::Pwl(_) => {
                &[Form::Impedance, Form::Admittance]
            }
        }
    }

    pub fn admits(&self, form: Form) -> bool {
        self.admissible_forms().contains(&form)
    }

    /// Keyword used in netlists and problem documents.
    pub fn keyword(&self) -> &'static str {
        match self {
            ElementKind::Resistor { .. } => "resistor",
            ElementKind::Capacitor { .. } => "capacitor",
            ElementKind::Inductor { .. } => "inductor",
            ElementKind::Diode => "diode",
            ElementKind::ParallelRc { .. } => "parallel_rc",
            ElementKind::Pwl(_) => "pwl",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            ElementKind::Resistor { ohms } => vec![*ohms],
            ElementKind::Capacitor { farads } => vec![*farads],
            ElementKind::Inductor { henries } => vec![*henries],
            ElementKind::Diode => vec![],
            ElementKind::ParallelRc { ohms, farads } => vec![*ohms, *farads],
            ElementKind::Pwl(c) => c.to_flat(),
        }
    }

    pub fn from_keyword(keyword: &str, params: &[f64]) -> Result<Self> {
        let want = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Law(format!(
                    "{keyword} takes {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::Law(format!("{name} must be finite and nonnegative, got {v}")))
            }
        };
        Ok(match keyword {
            "resistor" => {
                want(1)?;
                ElementKind::Resistor {
                    ohms: nonneg("resistance", params[0])?,
                }
            }
            "capacitor" => {
                want(1)?;
                ElementKind::Capacitor {
                    farads: nonneg("capacitance", params[0])?,
                }
            }
            "inductor" => {
                want(1)?;
                ElementKind::Inductor {
                    henries: nonneg("inductance", params[0])?,
                }
            }
            "diode" => {
                want(0)?;
                ElementKind::Diode
            }
            "parallel_rc" => {
                want(2)?;
                ElementKind::ParallelRc {
                    ohms: nonneg("resistance", params[0])?,
                    farads: nonneg("capacitance", params[1])?,
                }
            }
            "pwl" => ElementKind::Pwl(PwlCurve::from_flat(params)?),
            other => return Err(Error::Law(format!("unknown element law '{other}'"))),
        })
    }

    /// The law in the requested block.
    pub fn law(&self, form: Form) -> Result<ElementLaw> {
        element_law(self, form)
    }
}

/// Which port variable is imposed from outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Excitation {
    #[serde(rename = "V")]
    Voltage,
    #[serde(rename = "I")]
    Current,
}

impl fmt::Display for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Excitation::Voltage => "V",
            Excitation::Current => "I",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchKind {
    Port,
    Element(ElementKind),
    /// One winding of an ideal transformer; windings sharing `group` are
    /// coupled.
    Winding { group: String, turns: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    pub kind: BranchKind,
    /// Node indices into [`Netlist::nodes`].
    pub pos: usize,
    pub neg: usize,
    /// 1-based source line.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub nodes: Vec<String>,
    pub branches: Vec<Branch>,
    pub ground: Option<usize>,
    /// `FORM` directives, by element name.
    pub form_pins: Vec<(String, Form)>,
    /// `EXCITE` directives, by port name.
    pub excite_pins: Vec<(String, Excitation)>,
}

impl Netlist {
    pub fn ports(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| matches!(b.kind, BranchKind::Port))
    }

    /// Element branches with their kinds, in netlist order.
    pub fn elements(&self) -> impl Iterator<Item = (&Branch, &ElementKind)> {
        self.branches.iter().filter_map(|b| match &b.kind {
            BranchKind::Element(k) => Some((b, k)),
            _ => None,
        })
    }

    pub fn windings(&self) -> impl Iterator<Item = &Branch> {
        self.branches
            .iter()
            .filter(|b| matches!(b.kind, BranchKind::Winding { .. }))
    }

    pub fn port_count(&self) -> usize {
        self.ports().count()
    }

    pub fn element_count(&self) -> usize {
        self.elements().count()
    }

    pub fn branch(&self, name: &str) -> Option<&Branch> {
        self.branches.iter().find(|b| b.name == name)
    }

    /// The pins declared in the netlist itself.
    pub fn pinned_choices(&self) -> FixedChoices {
        FixedChoices {
            forms: self.form_pins.iter().cloned().collect(),
            excitations: self.excite_pins.iter().cloned().collect(),
        }
    }
}

/// One form per element (netlist order) and one excitation kind per port
/// (netlist order).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub element_forms: Vec<Form>,
    pub port_excitations: Vec<Excitation>,
}

impl Partition {
    pub fn describe(&self, netlist: &Netlist) -> String {
        let mut parts: Vec<String> = netlist
            .elements()
            .zip(&self.element_forms)
            .map(|((b, _), f)| format!("{}={f}", b.name))
            .collect();
        parts.extend(
            netlist
                .ports()
                .zip(&self.port_excitations)
                .map(|(b, e)| format!("{}={e}", b.name)),
        );
        parts.join(",")
    }

    pub(crate) fn check(&self, netlist: &Netlist) -> Result<()> {
        if self.element_forms.len() != netlist.element_count()
            || self.port_excitations.len() != netlist.port_count()
        {
            return Err(Error::Config(format!(
                "partition covers {} elements and {} ports; netlist has {} and {}",
                self.element_forms.len(),
                self.port_excitations.len(),
                netlist.element_count(),
                netlist.port_count()
            )));
        }
        for ((b, kind), form) in netlist.elements().zip(&self.element_forms) {
            if !kind.admits(*form) {
                return Err(Error::Config(format!(
                    "element '{}' ({}) cannot take {form} form",
                    b.name,
                    kind.keyword()
                )));
            }
        }
        Ok(())
    }
}
