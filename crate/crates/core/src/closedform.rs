//! Closed-form valuation of equity, risky debt, loan guarantees, the risk
//! premium, and the default probability.
//!
//! The formulas take the realized volatility integral
//! I = ∫_t^T g²(V(s - l2)) ds as an input. I is a known, deterministic
//! number only while `T - t <= l2` (every integrand argument then lies in
//! observed history); [`check_closed_form_window`] guards that condition and
//! the `*_from_history` wrappers enforce it. Longer horizons belong to the
//! Monte Carlo route.

use crate::error::{Error, Result};
use crate::model::{
    ClaimKind, DebtContract, FirmModel, HistoryPath, MarketParams, Method, PricingResult,
};
use crate::normal::phi;
use crate::sdde::vol_integral;

/// The quantities every closed form is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormTerms {
    pub x1: f64,
    pub x2: f64,
    /// Quasi-debt ratio d = B e^{-r tau1} / v.
    pub d: f64,
    /// Realized volatility integral I over the pricing window.
    pub vol_integral: f64,
    /// Time to maturity tau1 = T - t.
    pub tau1: f64,
}

/// Builds the valuation terms from spot inputs.
///
/// x1 = [ln(v/B) + r tau1 + I/2] / sqrt(I), x2 = x1 - sqrt(I).
pub fn terms(
    v: f64,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
    vol_int: f64,
) -> Result<ClosedFormTerms> {
    contract.validate()?;
    mkt.validate()?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid("v", format!("must be positive, got {v}")));
    }
    if !(vol_int > 0.0) || !vol_int.is_finite() {
        return Err(Error::invalid(
            "vol_integral",
            format!("must be positive, got {vol_int}"),
        ));
    }
    let tau1 = contract.maturity - t;
    if !(tau1 > 0.0) {
        return Err(Error::invalid(
            "t",
            format!("must precede maturity {}, got {t}", contract.maturity),
        ));
    }
    let sqrt_i = vol_int.sqrt();
    let x1 = ((v / contract.face).ln() + mkt.r * tau1 + 0.5 * vol_int) / sqrt_i;
    let d = contract.face * (-mkt.r * tau1).exp() / v;
    Ok(ClosedFormTerms {
        x1,
        x2: x1 - sqrt_i,
        d,
        vol_integral: vol_int,
        tau1,
    })
}

impl ClosedFormTerms {
    /// Terms from the quasi-debt ratio alone. Since
    /// ln(v/B) + r tau1 = -ln d, the formulas only need (d, tau1, I);
    /// the risk-structure module works directly on leverage grids.
    pub fn from_leverage(d: f64, tau1: f64, vol_int: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::invalid("d", format!("must be positive, got {d}")));
        }
        if !(tau1 > 0.0) || !tau1.is_finite() {
            return Err(Error::invalid("tau1", "must be positive"));
        }
        if !(vol_int > 0.0) || !vol_int.is_finite() {
            return Err(Error::invalid("vol_integral", "must be positive"));
        }
        let sqrt_i = vol_int.sqrt();
        let x1 = (-d.ln() + 0.5 * vol_int) / sqrt_i;
        Ok(ClosedFormTerms {
            x1,
            x2: x1 - sqrt_i,
            d,
            vol_integral: vol_int,
            tau1,
        })
    }
}

fn result(value: f64, vol_int: f64) -> PricingResult {
    PricingResult {
        value,
        method: Method::ClosedForm,
        vol_integral: Some(vol_int),
        stderr: None,
    }
}

/// Equity value f = v Φ(x1) - B e^{-r tau1} Φ(x2): a call on the firm
/// struck at the promised payment, with total variance I.
pub fn equity_value(
    v: f64,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
    vol_int: f64,
) -> Result<PricingResult> {
    let tm = terms(v, contract, mkt, t, vol_int)?;
    let value = v * phi(tm.x1) - contract.face * (-mkt.r * tm.tau1).exp() * phi(tm.x2);
    Ok(result(value, vol_int))
}

/// Risky-debt value F = B e^{-r tau1} [Φ(x2) + Φ(-x1)/d].
pub fn debt_value(
    v: f64,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
    vol_int: f64,
) -> Result<PricingResult> {
    let tm = terms(v, contract, mkt, t, vol_int)?;
    let discounted_face = contract.face * (-mkt.r * tm.tau1).exp();
    let value = discounted_face * (phi(tm.x2) + phi(-tm.x1) / tm.d);
    Ok(result(value, vol_int))
}

/// Loan-guarantee value G = B e^{-r tau1} Φ(-x2) - v Φ(-x1): the put that
/// tops risky debt up to the riskless bond, so G + F = B e^{-r tau1}.
pub fn guarantee_value(
    v: f64,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
    vol_int: f64,
) -> Result<PricingResult> {
    let tm = terms(v, contract, mkt, t, vol_int)?;
    let discounted_face = contract.face * (-mkt.r * tm.tau1).exp();
    let value = discounted_face * phi(-tm.x2) - v * phi(-tm.x1);
    Ok(result(value, vol_int))
}

/// Yield spread of risky debt over the riskless rate:
/// R(tau1) - r = -ln(Φ(x2) + Φ(-x1)/d) / tau1.
pub fn risk_premium(terms: &ClosedFormTerms) -> Result<f64> {
    let arg = phi(terms.x2) + phi(-terms.x1) / terms.d;
    if !(arg > 0.0) {
        return Err(Error::Numerical(format!(
            "risk premium log argument {arg} not positive"
        )));
    }
    // arg <= 1 mathematically; negative dust from rounding is clamped.
    Ok((-arg.ln() / terms.tau1).max(0.0))
}

/// Default probability P(V(T) < B) = Φ((ln d + I/2) / sqrt(I)), the
/// measure-changed lognormal tail. Equals Φ(-x2) in this sign convention.
pub fn default_probability(terms: &ClosedFormTerms) -> f64 {
    phi((terms.d.ln() + 0.5 * terms.vol_integral) / terms.vol_integral.sqrt())
}

/// True when the closed forms are applicable: the horizon fits inside the
/// volatility delay and the history actually covers the lookback interval.
pub fn check_closed_form_window(
    history: &HistoryPath,
    model: &FirmModel,
    t: f64,
    maturity: f64,
) -> bool {
    let tau = maturity - t;
    tau > 0.0 && tau <= model.l2 * (1.0 + 1e-12) && history.covers(t - model.l2, maturity - model.l2)
}

/// Closed-form price computed from a history: guards the validity window,
/// evaluates the volatility integral, and dispatches on the claim kind.
pub fn price_from_history(
    kind: ClaimKind,
    history: &HistoryPath,
    model: &FirmModel,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
) -> Result<PricingResult> {
    model.validate()?;
    contract.validate()?;
    if model.payout_c != 0.0 {
        return Err(Error::Unsupported(
            "closed forms require payout_c = 0".into(),
        ));
    }
    let tau = contract.maturity - t;
    if !(tau > 0.0 && tau <= model.l2 * (1.0 + 1e-12)) {
        return Err(Error::WindowViolation {
            tau,
            l2: model.l2,
        });
    }
    let vol_int = vol_integral(history, &model.vol, model.l2, t, contract.maturity)?;
    let v = history.value_at(t)?;
    match kind {
        ClaimKind::Equity => equity_value(v, contract, mkt, t, vol_int),
        ClaimKind::Debt => debt_value(v, contract, mkt, t, vol_int),
        ClaimKind::Guarantee => guarantee_value(v, contract, mkt, t, vol_int),
    }
}

/// Default probability computed from a history, window-guarded.
pub fn default_probability_from_history(
    history: &HistoryPath,
    model: &FirmModel,
    contract: &DebtContract,
    mkt: &MarketParams,
    t: f64,
) -> Result<f64> {
    let tau = contract.maturity - t;
    if !(tau > 0.0 && tau <= model.l2 * (1.0 + 1e-12)) {
        return Err(Error::WindowViolation {
            tau,
            l2: model.l2,
        });
    }
    let vol_int = vol_integral(history, &model.vol, model.l2, t, contract.maturity)?;
    let v = history.value_at(t)?;
    let tm = terms(v, contract, mkt, t, vol_int)?;
    Ok(default_probability(&tm))
}
