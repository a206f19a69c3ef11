//! Depth-first search for an (impedance, admittance) split that admits a
//! hybrid representation.

use std::collections::HashMap;

use log::debug;

use crate::elements::Form;
use crate::error::{Error, Result};

use super::{derive_hybrid, DerivedHybrid, Excitation, Netlist, Partition};

/// Upper bound on candidate partitions tried before giving up.
pub const MAX_PARTITION_ATTEMPTS: usize = 1 << 16;

/// Choices the search must respect.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedChoices {
    pub forms: HashMap<String, Form>,
    pub excitations: HashMap<String, Excitation>,
}

impl FixedChoices {
    /// Netlist pins overridden by `self` where both speak.
    pub fn over(&self, netlist: &Netlist) -> FixedChoices {
        let mut out = netlist.pinned_choices();
        out.forms.extend(self.forms.iter().map(|(k, v)| (k.clone(), *v)));
        out.excitations
            .extend(self.excitations.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }
}

enum Slot {
    Form(Vec<Form>),
    Excite(Vec<Excitation>),
}

impl Slot {
    fn len(&self) -> usize {
        match self {
            Slot::Form(v) => v.len(),
            Slot::Excite(v) => v.len(),
        }
    }
}

/// Tries partitions in order: elements in netlist order then ports in
/// netlist order, impedance before admittance and voltage before current.
/// The first one with a representation wins.
pub fn partition_search(netlist: &Netlist, fixed: &FixedChoices) -> Result<DerivedHybrid> {
    for name in fixed.forms.keys() {
        if !netlist.elements().any(|(b, _)| &b.name == name) {
            return Err(Error::Config(format!("unknown element '{name}' in partition")));
        }
    }
    for name in fixed.excitations.keys() {
        if !netlist.ports().any(|b| &b.name == name) {
            return Err(Error::Config(format!("unknown port '{name}' in partition")));
        }
    }

    let mut slots = Vec::new();
    for (b, kind) in netlist.elements() {
        match fixed.forms.get(&b.name) {
            Some(f) if !kind.admits(*f) => {
                return Err(Error::Config(format!(
                    "element '{}' ({}) cannot take {f} form",
                    b.name,
                    kind.keyword()
                )))
            }
            Some(f) => slots.push(Slot::Form(vec![*f])),
            None => slots.push(Slot::Form(kind.admissible_forms().to_vec())),
        }
    }
    for b in netlist.ports() {
        match fixed.excitations.get(&b.name) {
            Some(e) => slots.push(Slot::Excite(vec![*e])),
            None => slots.push(Slot::Excite(vec![Excitation::Voltage, Excitation::Current])),
        }
    }

    let mut choice = vec![0usize; slots.len()];
    let mut attempted = Vec::new();
    loop {
        let mut part = Partition {
            element_forms: Vec::new(),
            port_excitations: Vec::new(),
        };
        for (slot, &k) in slots.iter().zip(&choice) {
            match slot {
                Slot::Form(v) => part.element_forms.push(v[k]),
                Slot::Excite(v) => part.port_excitations.push(v[k]),
            }
        }
        match derive_hybrid(netlist, &part) {
            Ok(d) => {
                debug!(
                    "partition {} accepted after {} rejection(s)",
                    part.describe(netlist),
                    attempted.len()
                );
                return Ok(d);
            }
            Err(Error::NoRepresentation { .. }) => attempted.push(part.describe(netlist)),
            Err(e) => return Err(e),
        }
        if attempted.len() >= MAX_PARTITION_ATTEMPTS {
            break;
        }
        // Advance the last slot first, carrying leftwards.
        let mut pos = slots.len();
        loop {
            if pos == 0 {
                return Err(Error::NoRepresentation { attempted });
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < slots[pos].len() {
                break;
            }
            choice[pos] = 0;
        }
    }
    Err(Error::NoRepresentation { attempted })
}
