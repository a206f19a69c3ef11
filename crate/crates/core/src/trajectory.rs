//! CSV trajectories: header `t,<labels>`, one row per sample, values with
//! 17 significant digits so that a write/read cycle is bit-exact.
//!
//! A run that did not converge ends with the comment line
//! `# converged=false`.

use std::io::{Read, Write};

use crate::error::{Error, ParseError, Result};
use crate::signal::{Grid, SignalBundle};
use crate::solver::{Problem, SolverResult};

pub const NOT_CONVERGED_MARK: &str = "# converged=false";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// One vector per label, each `times.len()` long.
    pub columns: Vec<Vec<f64>>,
    pub converged: bool,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, labels: Vec<String>, columns: Vec<Vec<f64>>, converged: bool) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != times.len()) {
            return Err(Error::Dimension(format!(
                "column of length {} for {} samples",
                c.len(),
                times.len()
            )));
        }
        Ok(Trajectory {
            times,
            labels,
            columns,
            converged,
        })
    }

    /// Channels of all bundles side by side on `grid`.
    pub fn from_bundles(grid: Grid, bundles: &[&SignalBundle], converged: bool) -> Result<Self> {
        let mut labels = Vec::new();
        let mut columns = Vec::new();
        for b in bundles {
            if b.grid() != grid {
                return Err(Error::Dimension("bundle on a different grid".into()));
            }
            labels.extend(b.labels().iter().cloned());
            columns.extend(b.rows());
        }
        Trajectory::new(grid.times().collect(), labels, columns, converged)
    }

    /// Excitations, port responses, then the element unknowns.
    pub fn from_solution(prob: &Problem, result: &SolverResult) -> Result<Self> {
        Trajectory::from_bundles(
            prob.grid,
            &[&prob.u, &result.y, &result.i, &result.v],
            result.converged,
        )
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(header.len());
        for (k, t) in self.times.iter().enumerate() {
            row.clear();
            row.push(format!("{t:.16e}"));
            for c in &self.columns {
                row.push(format!("{:.16e}", c[k]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        if !self.converged {
            writeln!(out, "{NOT_CONVERGED_MARK}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        Trajectory::parse(&text)
    }

    /// Parses CSV text; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let converged = !text.lines().any(|l| l.trim() == NOT_CONVERGED_MARK);
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = r.records();
        let header = match records.next() {
            None => return Err(ParseError::new(1, 1, "empty CSV").into()),
            Some(h) => h?,
        };
        let line_of = |rec: &csv::StringRecord| rec.position().map_or(1, |p| p.line() as usize);
        if header.get(0).map(str::trim) != Some("t") {
            return Err(ParseError::new(line_of(&header), 1, "first column must be 't'").into());
        }
        let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        if let Some(k) = labels.iter().position(|l| l.is_empty()) {
            return Err(ParseError::new(line_of(&header), k + 2, "empty column label").into());
        }
        let mut times = Vec::new();
        let mut columns = vec![Vec::new(); labels.len()];
        for rec in records {
            let rec = rec?;
            let line = line_of(&rec);
            let mut column = 1;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    ParseError::new(line, column, format!("malformed number '{field}'"))
                })?;
                if k == 0 {
                    times.push(v);
                } else {
                    columns[k - 1].push(v);
                }
                column += field.chars().count() + 1;
            }
        }
        if times.is_empty() {
            return Err(ParseError::new(line_of(&header), 1, "CSV has a header but no rows").into());
        }
        Trajectory::new(times, labels, columns, converged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Trajectory::new(
            vec![0.0, 1e-4, 2e-4],
            vec!["v_p".into(), "i_q".into()],
            vec![vec![0.1, -1.0 / 3.0, f64::MIN_POSITIVE], vec![1e300, -0.0, 2.0_f64.sqrt()]],
            true,
        )
        .unwrap();
        let s = t.to_csv_string().unwrap();
        assert!(s.starts_with("t,v_p,i_q\n"));
        let back = Trajectory::parse(&s).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.columns.iter().flatten().zip(t.columns.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn not_converged_marker() {
        let t = Trajectory::new(vec![0.0], vec!["x".into()], vec![vec![1.0]], false).unwrap();
        let s = t.to_csv_string().unwrap();
        assert!(s.ends_with("# converged=false\n"), "{s}");
        assert!(!Trajectory::parse(&s).unwrap().converged);
    }

    #[test]
    fn seventeen_digits() {
        let t = Trajectory::new(vec![0.0], vec!["x".into()], vec![vec![0.1]], true).unwrap();
        let s = t.to_csv_string().unwrap();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
    }

    #[test]
    fn bad_inputs() {
        assert!(Trajectory::parse("").is_err());
        assert!(Trajectory::parse("t,x\n").is_err());
        assert!(Trajectory::parse("x,y\n1,2\n").is_err());
        match Trajectory::parse("t,x\n0,1\n1,zz\n") {
            Err(Error::Parse(p)) => assert_eq!((p.line, p.column), (3, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Trajectory::parse("t,x\n0,1,2\n"), Err(Error::Csv(_))));
    }
}
