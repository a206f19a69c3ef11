//! Sampled periodic trajectories on `[0, T)`.
//!
//! A [`PeriodicSignal`] holds one period of a real trajectory sampled at
//! `t = k * dt`, `k = 0..N`. The inner product uses the left-endpoint rule,
//! which pairs with the periodic backward difference so that the discrete
//! derivative stays a monotone operator.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of one period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    samples: usize,
    dt: f64,
}

impl Grid {
    pub fn new(samples: usize, dt: f64) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 samples, got {samples}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got {dt}")));
        }
        Ok(Grid { samples, dt })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn period(&self) -> f64 {
        self.samples as f64 * self.dt
    }

    /// Sample instants `k * dt`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples).map(move |k| k as f64 * self.dt)
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "grid mismatch: ({} samples, dt {}) vs ({} samples, dt {})",
                self.samples, self.dt, other.samples, other.dt
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSignal {
    grid: Grid,
    values: Vec<f64>,
}

impl PeriodicSignal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.samples {
            return Err(Error::Dimension(format!(
                "signal has {} values but grid has {} samples",
                values.len(),
                grid.samples
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite sample at index {k}")));
        }
        Ok(PeriodicSignal { grid, values })
    }

    /// Caller guarantees the length; used on paths that produce values from
    /// already validated signals.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.samples);
        PeriodicSignal { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        PeriodicSignal::from_parts(grid, vec![0.0; grid.samples])
    }

    pub fn constant(grid: Grid, level: f64) -> Self {
        PeriodicSignal::from_parts(grid, vec![level; grid.samples])
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete L2 norm, `sqrt(<u, u>)`.
    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values, self.grid.dt).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PeriodicSignal {
        PeriodicSignal::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: f64, other: &PeriodicSignal, b: f64) -> Result<PeriodicSignal> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(PeriodicSignal::from_parts(self.grid, values))
    }

    pub fn scale(&self, a: f64) -> PeriodicSignal {
        self.map(|v| a * v)
    }
}

/// Left-endpoint rule in ascending index order.
pub(crate) fn dot(a: &[f64], b: &[f64], dt: f64) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc * dt
}

/// `<u, y> = sum_k u(k) y(k) dt`.
pub fn inner_product(u: &PeriodicSignal, y: &PeriodicSignal) -> Result<f64> {
    u.grid.check_same(&y.grid)?;
    Ok(dot(&u.values, &y.values, u.grid.dt))
}

/// Periodic backward difference, `(u(k) - u(k-1 mod N)) / dt`.
pub fn backward_difference(u: &PeriodicSignal) -> PeriodicSignal {
    let mut out = vec![0.0; u.values.len()];
    backward_difference_into(&u.values, u.grid.dt, &mut out);
    PeriodicSignal::from_parts(u.grid, out)
}

pub(crate) fn backward_difference_into(u: &[f64], dt: f64, out: &mut [f64]) {
    let n = u.len();
    for k in 0..n {
        let prev = if k == 0 { u[n - 1] } else { u[k - 1] };
        out[k] = (u[k] - prev) / dt;
    }
}

/// Excitation descriptors accepted by [`make_waveform`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Waveform {
    Sine {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Constant {
        level: f64,
    },
    Tabulated {
        values: Vec<f64>,
    },
}

/// Samples `descriptor` at `t = k * dt`.
///
/// A sine must complete a whole number of cycles over the period; anything
/// else would alias at the wraparound and is rejected.
pub fn make_waveform(descriptor: &Waveform, grid: Grid) -> Result<PeriodicSignal> {
    match descriptor {
        Waveform::Sine {
            amplitude,
            frequency_hz,
            phase_rad,
        } => {
            let cycles = frequency_hz * grid.period();
            let whole = cycles.round();
            if !cycles.is_finite()
                || whole < 1.0
                || (cycles - whole).abs() > 1e-9 * whole.max(1.0)
            {
                return Err(Error::Config(format!(
                    "sine at {frequency_hz} Hz completes {cycles} cycles over the {} s period; \
                     a positive whole number is required",
                    grid.period()
                )));
            }
            let n = grid.samples as f64;
            let values = (0..grid.samples)
                .map(|k| amplitude * (2.0 * PI * whole * k as f64 / n + phase_rad).sin())
                .collect();
            PeriodicSignal::new(grid, values)
        }
        Waveform::Constant { level } => PeriodicSignal::new(grid, vec![*level; grid.samples]),
        Waveform::Tabulated { values } => PeriodicSignal::new(grid, values.clone()),
    }
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Waveform::Sine {
                amplitude,
                frequency_hz,
                phase_rad,
            } => write!(f, "sine:{amplitude}:{frequency_hz}:{phase_rad}"),
            Waveform::Constant { level } => write!(f, "const:{level}"),
            Waveform::Tabulated { values } => {
                write!(f, "table:")?;
                for (k, v) in values.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Short command-line form: `sine:AMP:FREQ[:PHASE]`, `const:LEVEL`,
/// `table:V0,V1,...`.
impl FromStr for Waveform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("waveform '{s}' has no ':'-separated kind")))?;
        let number = |t: &str| -> Result<f64> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number '{t}' in waveform '{s}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("non-finite number '{t}' in waveform '{s}'")))
            }
        };
        match kind.trim().to_ascii_lowercase().as_str() {
            "sine" | "sin" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if !(2..=3).contains(&parts.len()) {
                    return Err(Error::Config(format!(
                        "sine waveform expects AMP:FREQ[:PHASE], got '{rest}'"
                    )));
                }
                Ok(Waveform::Sine {
                    amplitude: number(parts[0])?,
                    frequency_hz: number(parts[1])?,
                    phase_rad: parts.get(2).map(|p| number(p)).transpose()?.unwrap_or(0.0),
                })
            }
            "const" | "constant" | "dc" => Ok(Waveform::Constant {
                level: number(rest)?,
            }),
            "table" | "tabulated" => Ok(Waveform::Tabulated {
                values: rest.split(',').map(number).collect::<Result<_>>()?,
            }),
            other => Err(Error::Config(format!("unknown waveform kind '{other}'"))),
        }
    }
}

/// Named channels on one grid (`u`, `y`, `i`, `v`, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBundle {
    grid: Grid,
    channels: Vec<PeriodicSignal>,
    labels: Vec<String>,
}

impl SignalBundle {
    pub fn new(grid: Grid, channels: Vec<PeriodicSignal>, labels: Vec<String>) -> Result<Self> {
        if channels.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} channels but {} labels",
                channels.len(),
                labels.len()
            )));
        }
        for c in &channels {
            grid.check_same(&c.grid)?;
        }
        Ok(SignalBundle {
            grid,
            channels,
            labels,
        })
    }

    /// Channels named `ch0, ch1, ...`.
    pub fn unlabeled(grid: Grid, channels: Vec<PeriodicSignal>) -> Result<Self> {
        let labels = (0..channels.len()).map(|k| format!("ch{k}")).collect();
        SignalBundle::new(grid, channels, labels)
    }

    pub fn zeros(grid: Grid, labels: Vec<String>) -> Self {
        let channels = labels.iter().map(|_| PeriodicSignal::zeros(grid)).collect();
        SignalBundle {
            grid,
            channels,
            labels,
        }
    }

    /// Builds from raw rows; every row must have `grid.samples()` entries.
    pub fn from_rows(grid: Grid, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let channels = rows
            .into_iter()
            .map(|r| PeriodicSignal::new(grid, r))
            .collect::<Result<Vec<_>>>()?;
        SignalBundle::new(grid, channels, labels)
    }

    pub(crate) fn from_rows_unchecked(grid: Grid, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Self {
        let channels = rows
            .into_iter()
            .map(|r| PeriodicSignal::from_parts(grid, r))
            .collect();
        SignalBundle {
            grid,
            channels,
            labels,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn channels(&self) -> &[PeriodicSignal] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &PeriodicSignal {
        &self.channels[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Channel by label.
    pub fn get(&self, label: &str) -> Option<&PeriodicSignal> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| &self.channels[k])
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.channels.iter().map(|c| c.values.clone()).collect()
    }

    /// Sum of channel inner products.
    pub fn inner(&self, other: &SignalBundle) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "bundles have {} and {} channels",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(a, b)| dot(&a.values, &b.values, self.grid.dt))
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| dot(&c.values, &c.values, self.grid.dt))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.channels.iter().fold(0.0, |acc, c| acc.max(c.max_abs()))
    }

    /// `a * self + b * other`, channelwise; labels from `self`.
    pub fn lincomb(&self, a: f64, other: &SignalBundle, b: f64) -> Result<SignalBundle> {
        if self.len() != other.len() {
            return Err(Error::Dimension(format!(
                "bundles have {} and {} channels",
                self.len(),
                other.len()
            )));
        }
        let channels = self
            .channels
            .iter()
            .zip(&other.channels)
            .map(|(x, y)| x.lincomb(a, y, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SignalBundle {
            grid: self.grid,
            channels,
            labels: self.labels.clone(),
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.channels.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} channels",
                labels.len(),
                self.channels.len()
            )));
        }
        self.labels = labels;
        Ok(self)
    }
}
