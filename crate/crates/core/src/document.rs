//! JSON problem documents: everything needed to rebuild a [`Problem`]
//! without the netlist.
//!
//! ```json
//! {
//!   "grid": { "samples": 200, "dt": 1e-4 },
//!   "structure": { "m": 1, "p": 1, "q": 0,
//!                  "M": [], "B_R": [[1.0]], "B_G": [], "D": [[0.0]] },
//!   "elements": [ { "name": "r", "law": "resistor", "params": [1000.0], "form": "Z" } ],
//!   "excitations": [ { "port": "p", "kind": "V",
//!                      "waveform": { "type": "sine", "amplitude": 1.0, "frequency_hz": 50.0 } } ],
//!   "labels": { "u": ["v_p"], "y": ["i_p"] }
//! }
//! ```
//!
//! Impedance-form elements fill the `R` block and admittance-form ones the
//! `G` block, each in list order.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::elements::{DiagonalOperator, Form};
use crate::error::{Error, ParseError, Result};
use crate::netlist::{DerivedHybrid, ElementKind, Excitation, Netlist};
use crate::signal::{make_waveform, Grid, SignalBundle, Waveform};
use crate::solver::Problem;
use crate::structure::Interconnection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub samples: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// `q x p`, row-major.
    #[serde(rename = "M")]
    pub m_tilde: Vec<Vec<f64>>,
    #[serde(rename = "B_R")]
    pub b_r: Vec<Vec<f64>>,
    #[serde(rename = "B_G")]
    pub b_g: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub name: String,
    pub law: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub form: Form,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExcitationSpec {
    pub port: String,
    pub kind: Excitation,
    pub waveform: Waveform,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub structure: StructureSpec,
    pub elements: Vec<ElementSpec>,
    #[serde(default)]
    pub excitations: Vec<ExcitationSpec>,
    #[serde(default)]
    pub labels: LabelSpec,
}

fn matrix_rows(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect())
        .collect()
}

fn matrix_from(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.is_empty() && nrows * ncols == 0 {
        return Ok(DMatrix::zeros(nrows, ncols));
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        let got = rows.iter().map(|r| r.len().to_string()).collect::<Vec<_>>().join(", ");
        return Err(Error::Document(format!(
            "{name} must be {nrows}x{ncols}; got {} row(s) of length [{got}]",
            rows.len()
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Document(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

impl ProblemDocument {
    /// Document for a derived netlist; `excitations` may be empty.
    pub fn from_derived(
        netlist: &Netlist,
        derived: &DerivedHybrid,
        grid: Option<Grid>,
        excitations: &[(String, Waveform)],
    ) -> Result<Self> {
        let ic = &derived.interconnection;
        let mut elements = Vec::new();
        for (names, form) in [
            (&derived.impedance_elements, Form::Impedance),
            (&derived.admittance_elements, Form::Admittance),
        ] {
            for name in names {
                let (_, kind) = netlist
                    .elements()
                    .find(|(b, _)| &b.name == name)
                    .ok_or_else(|| Error::Document(format!("element '{name}' not in netlist")))?;
                elements.push(ElementSpec {
                    name: name.clone(),
                    law: kind.keyword().to_string(),
                    params: kind.params(),
                    form,
                });
            }
        }
        let mut exc = Vec::new();
        if !excitations.is_empty() {
            for (port, kind) in netlist.ports().zip(&derived.partition.port_excitations) {
                let (_, w) = excitations
                    .iter()
                    .find(|(n, _)| *n == port.name)
                    .ok_or_else(|| Error::Config(format!("no excitation for port '{}'", port.name)))?;
                exc.push(ExcitationSpec {
                    port: port.name.clone(),
                    kind: *kind,
                    waveform: w.clone(),
                });
            }
            if let Some((n, _)) = excitations.iter().find(|(n, _)| netlist.ports().all(|p| &p.name != n)) {
                return Err(Error::Config(format!("excitation for unknown port '{n}'")));
            }
        }
        let m = ic.m;
        Ok(ProblemDocument {
            grid: grid.map(|g| GridSpec {
                samples: g.samples(),
                dt: g.dt(),
            }),
            structure: StructureSpec {
                m: ic.m,
                p: ic.p,
                q: ic.q,
                m_tilde: matrix_rows(&ic.m_tilde),
                b_r: matrix_rows(&ic.b_r),
                b_g: matrix_rows(&ic.b_g),
                d: matrix_rows(&ic.d),
            },
            elements,
            excitations: exc,
            labels: LabelSpec {
                u: derived.inputs[..m].iter().map(|v| v.label()).collect(),
                y: derived.outputs[..m].iter().map(|v| v.label()).collect(),
            },
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            if e.line() == 0 {
                Error::Document(e.to_string())
            } else {
                ParseError::new(e.line(), e.column().max(1), e.to_string()).into()
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ProblemDocument::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = self
            .grid
            .ok_or_else(|| Error::Document("document has no grid".into()))?;
        Grid::new(g.samples, g.dt)
    }

    pub fn interconnection(&self) -> Result<Interconnection> {
        let s = &self.structure;
        Interconnection::new(
            matrix_from("M", &s.m_tilde, s.q, s.p)?,
            matrix_from("B_R", &s.b_r, s.p, s.m)?,
            matrix_from("B_G", &s.b_g, s.q, s.m)?,
            matrix_from("D", &s.d, s.m, s.m)?,
        )
    }

    /// Laws of the `R` and `G` blocks with their labels.
    fn blocks(&self) -> Result<(DiagonalOperator, DiagonalOperator, Vec<String>, Vec<String>)> {
        let mut r = Vec::new();
        let mut g = Vec::new();
        let mut i_labels = Vec::new();
        let mut v_labels = Vec::new();
        for e in &self.elements {
            let kind = ElementKind::from_keyword(&e.law, &e.params)
                .map_err(|err| Error::Document(format!("element '{}': {err}", e.name)))?;
            let law = kind
                .law(e.form)
                .map_err(|err| Error::Document(format!("element '{}': {err}", e.name)))?;
            match e.form {
                Form::Impedance => {
                    r.push((law, e.form));
                    i_labels.push(format!("i_{}", e.name));
                }
                Form::Admittance => {
                    g.push((law, e.form));
                    v_labels.push(format!("v_{}", e.name));
                }
            }
        }
        let s = &self.structure;
        if r.len() != s.p || g.len() != s.q {
            return Err(Error::Document(format!(
                "structure has (p, q) = ({}, {}) but elements give ({}, {})",
                s.p,
                s.q,
                r.len(),
                g.len()
            )));
        }
        Ok((DiagonalOperator::new(r)?, DiagonalOperator::new(g)?, i_labels, v_labels))
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let grid = self.grid()?;
        let ic = self.interconnection()?;
        let (r_block, g_block, i_labels, v_labels) = self.blocks()?;
        if self.excitations.len() != ic.m {
            return Err(Error::Document(format!(
                "{} excitation(s) for {} port(s)",
                self.excitations.len(),
                ic.m
            )));
        }
        let mut channels = Vec::new();
        for e in &self.excitations {
            channels.push(
                make_waveform(&e.waveform, grid)
                    .map_err(|err| Error::Document(format!("port '{}': {err}", e.port)))?,
            );
        }
        let default_u = self
            .excitations
            .iter()
            .map(|e| match e.kind {
                Excitation::Voltage => format!("v_{}", e.port),
                Excitation::Current => format!("i_{}", e.port),
            })
            .collect::<Vec<_>>();
        let default_y = self
            .excitations
            .iter()
            .map(|e| match e.kind {
                Excitation::Voltage => format!("i_{}", e.port),
                Excitation::Current => format!("v_{}", e.port),
            })
            .collect::<Vec<_>>();
        let pick = |given: &Vec<String>, default: Vec<String>, what: &str| {
            if given.is_empty() {
                Ok(default)
            } else if given.len() == ic.m {
                Ok(given.clone())
            } else {
                Err(Error::Document(format!(
                    "{} {what} label(s) for {} port(s)",
                    given.len(),
                    ic.m
                )))
            }
        };
        let u_labels = pick(&self.labels.u, default_u, "input")?;
        let y_labels = pick(&self.labels.y, default_y, "output")?;
        let u = SignalBundle::new(grid, channels, u_labels)?;
        Problem::with_labels(ic, r_block, g_block, u, i_labels, v_labels, y_labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, partition_search};

    const DOC: &str = r#"{
      "grid": { "samples": 8, "dt": 0.125 },
      "structure": { "m": 1, "p": 1, "q": 0, "M": [], "B_R": [[1.0]], "B_G": [], "D": [[0.0]] },
      "elements": [ { "name": "r", "law": "resistor", "params": [2.0], "form": "Z" } ],
      "excitations": [ { "port": "p", "kind": "V",
                         "waveform": { "type": "sine", "amplitude": 1.0, "frequency_hz": 1.0 } } ]
    }"#;

    #[test]
    fn loads_resistor_document() {
        let doc = ProblemDocument::from_json(DOC).unwrap();
        let prob = doc.to_problem().unwrap();
        assert_eq!(prob.u_labels(), ["v_p"]);
        assert_eq!(prob.y_labels, ["i_p"]);
        assert_eq!(prob.i_labels, ["i_r"]);
        assert_eq!(prob.ic.b_r[(0, 0)], 1.0);
    }

    #[test]
    fn round_trip() {
        let doc = ProblemDocument::from_json(DOC).unwrap();
        let again = ProblemDocument::from_json(&doc.to_json()).unwrap();
        assert_eq!(doc, again);
    }

    #[test]
    fn derived_document_matches_netlist() {
        let n = parse_netlist("PORT p a b\nR r a b 1000\n").unwrap();
        let d = partition_search(&n, &n.pinned_choices()).unwrap();
        let doc = ProblemDocument::from_derived(&n, &d, None, &[]).unwrap();
        assert_eq!(doc.structure.m_tilde, Vec::<Vec<f64>>::new());
        assert_eq!(doc.structure.b_r, vec![vec![1.0]]);
        assert!(doc.excitations.is_empty());
        assert!(doc.grid.is_none());
        assert!(doc.to_problem().is_err());
    }

    #[test]
    fn errors() {
        let e = ProblemDocument::from_json("{ \"grid\": ").unwrap_err();
        assert!(matches!(e, Error::Parse(_)), "{e:?}");
        let bad = DOC.replace("\"B_R\": [[1.0]]", "\"B_R\": [[1.0, 2.0]]");
        let e = ProblemDocument::from_json(&bad).unwrap().to_problem().unwrap_err();
        assert!(matches!(e, Error::Document(_)), "{e:?}");
        let bad = DOC.replace("\"resistor\"", "\"memristor\"");
        assert!(ProblemDocument::from_json(&bad).unwrap().to_problem().is_err());
        let bad = DOC.replace("\"form\": \"Z\"", "\"form\": \"Y\"");
        assert!(ProblemDocument::from_json(&bad).unwrap().to_problem().is_err());
        let bad = DOC.replace("\"samples\": 8", "\"samples\": 8, \"extra\": 1");
        assert!(ProblemDocument::from_json(&bad).is_err());
    }
}
