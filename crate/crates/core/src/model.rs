//! Domain types shared by every pricing route.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when matching times against grid nodes.
const GRID_EPS: f64 = 1e-9;

/// A sampled, strictly positive firm-value trajectory on a uniform grid.
///
/// Covers `[t0, t0 + (n-1)*dt]`. Houses both the initial process (the
/// observed past of the firm) and simulated extensions of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryPath {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
}

impl HistoryPath {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::invalid("t0", "must be finite"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("values", "must be non-empty"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("must be strictly positive and finite, got {v}"),
            ));
        }
        Ok(HistoryPath { t0, dt, values })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one sample
    }

    /// End of the covered interval, `t0 + (n-1)*dt`.
    pub fn end_time(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.dt
    }

    /// Whether `[a, b]` lies inside the covered interval (with grid slack).
    pub fn covers(&self, a: f64, b: f64) -> bool {
        let eps = GRID_EPS * self.dt;
        a >= self.t0 - eps && b <= self.end_time() + eps
    }

    /// Value at time `t` by linear interpolation; exact at grid nodes.
    ///
    /// Errors when `t` falls outside the covered interval, naming it.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let eps = GRID_EPS * self.dt;
        let end = self.end_time();
        if t < self.t0 - eps || t > end + eps {
            return Err(Error::OutOfRange {
                t,
                start: self.t0,
                end,
            });
        }
        let pos = (t - self.t0) / self.dt;
        let i = (pos.floor() as usize).min(self.values.len() - 1);
        let frac = pos - i as f64;
        if frac <= GRID_EPS || i + 1 == self.values.len() {
            return Ok(self.values[i]);
        }
        if frac >= 1.0 - GRID_EPS {
            return Ok(self.values[i + 1]);
        }
        Ok(self.values[i] * (1.0 - frac) + self.values[i + 1] * frac)
    }

    /// Writes the path as `t,V` CSV rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,V")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.t0 + i as f64 * self.dt, v)?;
        }
        Ok(())
    }

    /// Reads a `t,V` CSV (uniform grid required) written by [`write_csv`].
    ///
    /// [`write_csv`]: HistoryPath::write_csv
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::invalid("history csv", e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let mut fields = line.split(',');
            let (t, v) = match (fields.next(), fields.next()) {
                (Some(t), Some(v)) => (t.trim(), v.trim()),
                _ => {
                    return Err(Error::invalid(
                        "history csv",
                        format!("line {}: expected `t,V`", lineno + 1),
                    ))
                }
            };
            let parse = |s: &str, what: &str| {
                s.parse::<f64>().map_err(|_| {
                    Error::invalid(
                        "history csv",
                        format!("line {}: cannot parse {what} `{s}`", lineno + 1),
                    )
                })
            };
            times.push(parse(t, "time")?);
            values.push(parse(v, "value")?);
        }
        if times.len() < 2 {
            return Err(Error::invalid("history csv", "need at least two samples"));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::invalid("history csv", "times must be increasing"));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > GRID_EPS * dt.max(1.0) {
                return Err(Error::invalid(
                    "history csv",
                    format!("non-uniform spacing between t={} and t={}", w[0], w[1]),
                ));
            }
        }
        HistoryPath::new(times[0], dt, values)
    }
}

/// Volatility function family. Evaluation never falls below the floor, so
/// the measure-change kernel denominator is always positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VolSpec {
    /// g(v) = sigma for every v.
    Constant { sigma: f64 },
    /// g(v) = max(floor, a + b*v).
    AffineClamped { a: f64, b: f64, floor: f64 },
    /// Piecewise-linear in v through (v_points, g_values), clamped to the
    /// end values outside the table, then floored.
    Table {
        v_points: Vec<f64>,
        g_values: Vec<f64>,
        floor: f64,
    },
}

impl VolSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            VolSpec::Constant { sigma } => {
                if !(sigma > &0.0) || !sigma.is_finite() {
                    return Err(Error::invalid("vol.sigma", "must be positive"));
                }
            }
            VolSpec::AffineClamped { a, b, floor } => {
                if !(floor > &0.0) || !floor.is_finite() {
                    return Err(Error::invalid("vol.floor", "must be positive"));
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::invalid("vol.params", "must be finite"));
                }
            }
            VolSpec::Table {
                v_points,
                g_values,
                floor,
            } => {
                if !(floor > &0.0) || !floor.is_finite() {
                    return Err(Error::invalid("vol.floor", "must be positive"));
                }
                if v_points.is_empty() || v_points.len() != g_values.len() {
                    return Err(Error::invalid(
                        "vol.table",
                        "v_points and g_values must be non-empty and equal length",
                    ));
                }
                if v_points.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid(
                        "vol.v_points",
                        "must be strictly increasing",
                    ));
                }
                if g_values.iter().any(|g| !g.is_finite()) {
                    return Err(Error::invalid("vol.g_values", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// The guaranteed lower bound of [`eval`](VolSpec::eval).
    pub fn floor(&self) -> f64 {
        match self {
            VolSpec::Constant { sigma } => *sigma,
            VolSpec::AffineClamped { floor, .. } | VolSpec::Table { floor, .. } => *floor,
        }
    }

    /// Volatility at firm value `v` (per sqrt-year). `v` must be positive.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(
                "v",
                format!("firm value must be positive, got {v}"),
            ));
        }
        Ok(match self {
            VolSpec::Constant { sigma } => *sigma,
            VolSpec::AffineClamped { a, b, floor } => (a + b * v).max(*floor),
            VolSpec::Table {
                v_points,
                g_values,
                floor,
            } => {
                if v_points.is_empty() || v_points.len() != g_values.len() {
                    return Err(Error::invalid("vol.table", "not validated"));
                }
                let raw = if v <= v_points[0] {
                    g_values[0]
                } else if v >= *v_points.last().unwrap() {
                    *g_values.last().unwrap()
                } else {
                    let i = v_points.partition_point(|p| *p <= v) - 1;
                    let w = (v - v_points[i]) / (v_points[i + 1] - v_points[i]);
                    g_values[i] * (1.0 - w) + g_values[i + 1] * w
                };
                raw.max(*floor)
            }
        })
    }
}

/// Firm-value dynamics: drift coefficient, payout rate, the two delays,
/// and the volatility function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmModel {
    /// Drift coefficient multiplying V(t) * V(t - l1).
    pub alpha: f64,
    /// Payout rate C (currency per year). Closed-form pricers require 0.
    pub payout_c: f64,
    /// Drift delay, years.
    pub l1: f64,
    /// Volatility delay, years.
    pub l2: f64,
    pub vol: VolSpec,
}

impl FirmModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0) || !self.l1.is_finite() {
            return Err(Error::invalid("l1", "delay must be positive"));
        }
        if !(self.l2 > 0.0) || !self.l2.is_finite() {
            return Err(Error::invalid("l2", "delay must be positive"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        if !self.payout_c.is_finite() {
            return Err(Error::invalid("payout_c", "must be finite"));
        }
        self.vol.validate()
    }

    /// The past length L = max(l1, l2).
    pub fn max_delay(&self) -> f64 {
        self.l1.max(self.l2)
    }
}

/// Single homogeneous debt class: promised payment `face` at `maturity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebtContract {
    pub face: f64,
    pub maturity: f64,
}

impl DebtContract {
    pub fn validate(&self) -> Result<()> {
        if !(self.face > 0.0) || !self.face.is_finite() {
            return Err(Error::invalid("face", "must be positive"));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(Error::invalid("maturity", "must be positive"));
        }
        Ok(())
    }
}

/// Market environment: the continuously compounded riskless rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub r: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::invalid("r", "must be non-negative"));
        }
        Ok(())
    }
}

/// Which corporate claim is being priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClaimKind {
    /// Residual claim, max(V - B, 0) at maturity.
    Equity,
    /// Risky debt, min(V, B) at maturity.
    Debt,
    /// Third-party shortfall cover, max(B - V, 0) at maturity.
    Guarantee,
}

impl ClaimKind {
    pub fn payoff(self, v: f64, face: f64) -> f64 {
        match self {
            ClaimKind::Equity => (v - face).max(0.0),
            ClaimKind::Debt => v.min(face),
            ClaimKind::Guarantee => (face - v).max(0.0),
        }
    }
}

impl std::fmt::Display for ClaimKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClaimKind::Equity => "equity",
            ClaimKind::Debt => "debt",
            ClaimKind::Guarantee => "guarantee",
        })
    }
}

/// Valuation route that produced a [`PricingResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Pde,
    Mc,
    HeatKernel,
}

/// A claim value plus metadata about how it was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub value: f64,
    pub method: Method,
    /// Realized volatility integral over the pricing window, when the
    /// route is driven by one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol_integral: Option<f64>,
    /// Monte Carlo standard error, when applicable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}
