//! Risk-premium term structures and the additional-debt comparison.

use serde::{Deserialize, Serialize};

use crate::closedform::{default_probability, risk_premium, ClosedFormTerms};
use crate::error::{Error, Result};
use crate::model::{FirmModel, HistoryPath, MarketParams};
use crate::sdde::vol_integral;

/// Grids for a premium-curve evaluation. The volatility integral per
/// maturity comes from the supplied history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRequest {
    /// Quasi-debt ratios, ascending.
    pub d_values: Vec<f64>,
    /// Maturities (tau1 = T - t), ascending, each intended to fit the
    /// closed-form window.
    pub tau_values: Vec<f64>,
}

impl CurveRequest {
    fn validate(&self) -> Result<()> {
        let check = |name: &'static str, xs: &[f64]| -> Result<()> {
            if xs.is_empty() {
                return Err(Error::invalid(name, "must be non-empty"));
            }
            if xs.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
            if xs.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(name, "must be strictly ascending"));
            }
            Ok(())
        };
        check("d_values", &self.d_values)?;
        check("tau_values", &self.tau_values)
    }
}

/// One premium-curve cell. `premium` is `None` when the cell's maturity
/// violated the closed-form window (invalid, not silently dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau1: f64,
    pub d: f64,
    pub premium: Option<f64>,
}

/// Risk-premium table over (tau1, d), sorted by (tau1, d).
///
/// Each valid cell is the closed-form spread R(tau1) - r evaluated with the
/// volatility integral realized from `history` over `[t, t + tau1]`.
pub fn premium_curve(
    req: &CurveRequest,
    history: &HistoryPath,
    model: &FirmModel,
    t: f64,
) -> Result<Vec<CurvePoint>> {
    req.validate()?;
    model.validate()?;
    let mut out = Vec::with_capacity(req.tau_values.len() * req.d_values.len());
    for &tau in &req.tau_values {
        let window_ok = tau <= model.l2 * (1.0 + 1e-12)
            && history.covers(t - model.l2, t + tau - model.l2);
        let vol_int = if window_ok {
            Some(vol_integral(history, &model.vol, model.l2, t, t + tau)?)
        } else {
            None
        };
        for &d in &req.d_values {
            let premium = match vol_int {
                Some(i) => Some(risk_premium(&ClosedFormTerms::from_leverage(d, tau, i)?)?),
                None => None,
            };
            out.push(CurvePoint {
                tau1: tau,
                d,
                premium,
            });
        }
    }
    Ok(out)
}

/// Writes a premium table as `tau1,d,premium` CSV; invalid cells emit an
/// empty premium field.
pub fn write_premium_csv<W: std::io::Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tau1,d,premium")?;
    for p in points {
        match p.premium {
            Some(s) => writeln!(out, "{},{},{}", p.tau1, p.d, s)?,
            None => writeln!(out, "{},{},", p.tau1, p.d)?,
        }
    }
    Ok(())
}

/// Default probabilities before and after raising additional debt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebtImpact {
    pub p_before: f64,
    pub p_after: f64,
    /// Whether the additional debt increased the default probability.
    pub widened: bool,
}

/// Compares P(V(T) < B) against P(V'(T) < B + B') where the issue proceeds
/// are added to the firm, V' = v + B'. Both probabilities use the same
/// realized volatility integral: the volatility path is held fixed across
/// the comparison.
pub fn additional_debt_impact(
    v: f64,
    face: f64,
    additional_face: f64,
    mkt: &MarketParams,
    t: f64,
    maturity: f64,
    vol_int: f64,
) -> Result<DebtImpact> {
    mkt.validate()?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid("v", "must be positive"));
    }
    if !(face > 0.0) || !face.is_finite() {
        return Err(Error::invalid("face", "must be positive"));
    }
    if !(additional_face > 0.0) || !additional_face.is_finite() {
        return Err(Error::invalid("b_prime", "must be positive"));
    }
    let tau = maturity - t;
    if !(tau > 0.0) {
        return Err(Error::invalid("t", "must precede maturity"));
    }
    let disc = (-mkt.r * tau).exp();
    let d_before = face * disc / v;
    let d_after = (face + additional_face) * disc / (v + additional_face);
    let p_before = default_probability(&ClosedFormTerms::from_leverage(d_before, tau, vol_int)?);
    let p_after = default_probability(&ClosedFormTerms::from_leverage(d_after, tau, vol_int)?);
    Ok(DebtImpact {
        p_before,
        p_after,
        widened: p_after > p_before,
    })
}

/// Writes one impact record as `v,B,Bprime,p_before,p_after` CSV.
pub fn write_impact_csv<W: std::io::Write>(
    v: f64,
    face: f64,
    additional_face: f64,
    impact: &DebtImpact,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "v,B,Bprime,p_before,p_after")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        v, face, additional_face, impact.p_before, impact.p_after
    )
}
