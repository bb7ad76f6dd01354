//! Risk-neutral Monte Carlo valuation of equity, debt, and guarantees.
//!
//! The only route available once the horizon outgrows the volatility delay.
//! All three payoffs are evaluated on shared paths so the financial
//! identities min(V,B) + max(V-B,0) = V and max(B-V,0) + min(V,B) = B hold
//! pathwise at machine precision, not just in expectation. Paths use
//! per-path ChaCha substreams derived from (seed, path index) and results
//! are accumulated by pairwise summation, so estimates are bit-identical
//! regardless of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClaimKind, DebtContract, FirmModel, HistoryPath, MarketParams, Method, PricingResult};
use crate::sdde::{risk_neutral_terminal, BrownianIncrements};

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Upper bound on the time step; shrunk to divide the horizon evenly.
    pub step: f64,
    pub seed: u64,
    /// Antithetic pairs share a substream with negated increments.
    pub antithetic: bool,
}

impl McConfig {
    fn validate(&self, model: &FirmModel) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::invalid("n_paths", "must be at least 100"));
        }
        let bound = model.l1.min(model.l2);
        if !(self.step > 0.0) || self.step > bound * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "step",
                format!("must satisfy 0 < step <= min(l1, l2) = {bound}"),
            ));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::invalid(
                "n_paths",
                "must be even when antithetic variates are enabled",
            ));
        }
        Ok(())
    }
}

/// All three claim values priced on the same paths.
#[derive(Debug, Clone, PartialEq)]
pub struct McBundle {
    pub equity: PricingResult,
    pub debt: PricingResult,
    pub guarantee: PricingResult,
    /// Discounted sample mean of V(T); equals equity + debt up to
    /// summation rounding.
    pub discounted_terminal_mean: f64,
    pub n_paths: usize,
    /// Effective step actually used.
    pub h: f64,
}

/// Serializable record for one Monte Carlo pricing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResultRecord {
    pub kind: ClaimKind,
    pub method: Method,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub h: f64,
}

impl McBundle {
    pub fn claim(&self, kind: ClaimKind) -> &PricingResult {
        match kind {
            ClaimKind::Equity => &self.equity,
            ClaimKind::Debt => &self.debt,
            ClaimKind::Guarantee => &self.guarantee,
        }
    }

    pub fn record(&self, kind: ClaimKind, seed: u64) -> McResultRecord {
        let claim = self.claim(kind);
        McResultRecord {
            kind,
            method: Method::Mc,
            value: claim.value,
            stderr: claim.stderr.unwrap_or(0.0),
            n_paths: self.n_paths,
            seed,
            h: self.h,
        }
    }
}

/// Simulated terminal firm values V(T) under the risk-neutral measure,
/// one per path, in path-index order.
pub fn terminal_firm_values(
    model: &FirmModel,
    history: &HistoryPath,
    contract: &DebtContract,
    mkt: &MarketParams,
    cfg: &McConfig,
) -> Result<Vec<f64>> {
    model.validate()?;
    contract.validate()?;
    mkt.validate()?;
    cfg.validate(model)?;
    if model.payout_c != 0.0 {
        return Err(Error::Unsupported(
            "Monte Carlo pricing requires payout_c = 0".into(),
        ));
    }
    let t = history.end_time();
    if t - history.t0() < model.max_delay() * (1.0 - 1e-9) {
        return Err(Error::CoverageViolation {
            need_start: t - model.max_delay(),
            need_end: t,
            start: history.t0(),
            end: t,
        });
    }
    let duration = contract.maturity - t;
    if !(duration > 0.0) {
        return Err(Error::invalid(
            "maturity",
            format!("must lie beyond the history end {t}"),
        ));
    }
    let n_steps = (duration / cfg.step - 1e-9).ceil().max(1.0) as usize;
    let h = duration / n_steps as f64;

    let terminal =
        |increments: &BrownianIncrements| risk_neutral_terminal(model, history, mkt.r, increments);

    if cfg.antithetic {
        let pairs = cfg.n_paths / 2;
        let halves: Vec<(f64, f64)> = (0..pairs)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let dw = BrownianIncrements::substream(cfg.seed, i as u64, h, n_steps)?;
                Ok((terminal(&dw)?, terminal(&dw.negated())?))
            })
            .collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(cfg.n_paths);
        for (a, b) in halves {
            out.push(a);
            out.push(b);
        }
        Ok(out)
    } else {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let dw = BrownianIncrements::substream(cfg.seed, i as u64, h, n_steps)?;
                terminal(&dw)
            })
            .collect()
    }
}

fn effective_step(history: &HistoryPath, contract: &DebtContract, cfg: &McConfig) -> f64 {
    let duration = contract.maturity - history.end_time();
    let n_steps = (duration / cfg.step - 1e-9).ceil().max(1.0) as usize;
    duration / n_steps as f64
}

/// Pairwise (tree) summation: deterministic and accurate for large n.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Discounted mean and standard error of a payoff sample. With antithetic
/// sampling the statistics are computed on pair averages.
fn discounted_stats(payoffs: &[f64], discount: f64, antithetic: bool) -> (f64, f64) {
    let averaged: Vec<f64>;
    let xs: &[f64] = if antithetic {
        averaged = payoffs
            .chunks_exact(2)
            .map(|p| 0.5 * (p[0] + p[1]))
            .collect();
        &averaged
    } else {
        payoffs
    };
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (discount * mean, discount * (var / n).sqrt())
}

/// Prices all three claims on shared risk-neutral paths.
pub fn price_claims_mc(
    model: &FirmModel,
    history: &HistoryPath,
    contract: &DebtContract,
    mkt: &MarketParams,
    cfg: &McConfig,
) -> Result<McBundle> {
    let terminals = terminal_firm_values(model, history, contract, mkt, cfg)?;
    let duration = contract.maturity - history.end_time();
    let discount = (-mkt.r * duration).exp();

    // debt payoff by min; equity and guarantee derived so the pathwise
    // identities are exact in floating point
    let debt_pay: Vec<f64> = terminals.iter().map(|v| v.min(contract.face)).collect();
    let equity_pay: Vec<f64> = terminals
        .iter()
        .zip(&debt_pay)
        .map(|(v, d)| v - d)
        .collect();
    let guarantee_pay: Vec<f64> = debt_pay.iter().map(|d| contract.face - d).collect();

    let (equity, equity_se) = discounted_stats(&equity_pay, discount, cfg.antithetic);
    let (debt, debt_se) = discounted_stats(&debt_pay, discount, cfg.antithetic);
    let (guarantee, guarantee_se) = discounted_stats(&guarantee_pay, discount, cfg.antithetic);
    let terminal_mean = discount * pairwise_sum(&terminals) / terminals.len() as f64;

    let wrap = |value: f64, se: f64| PricingResult {
        value,
        method: Method::Mc,
        vol_integral: None,
        stderr: Some(se),
    };
    Ok(McBundle {
        equity: wrap(equity, equity_se),
        debt: wrap(debt, debt_se),
        guarantee: wrap(guarantee, guarantee_se),
        discounted_terminal_mean: terminal_mean,
        n_paths: cfg.n_paths,
        h: effective_step(history, contract, cfg),
    })
}

/// Prices one claim kind (all three are computed on shared paths anyway).
pub fn price_claim_mc(
    kind: ClaimKind,
    model: &FirmModel,
    history: &HistoryPath,
    contract: &DebtContract,
    mkt: &MarketParams,
    cfg: &McConfig,
) -> Result<PricingResult> {
    Ok(price_claims_mc(model, history, contract, mkt, cfg)?
        .claim(kind)
        .clone())
}

/// Empirical default probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultFrequency {
    pub probability: f64,
    pub stderr: f64,
}

/// Fraction of simulated paths with V(T) < B.
pub fn default_frequency_mc(
    model: &FirmModel,
    history: &HistoryPath,
    contract: &DebtContract,
    mkt: &MarketParams,
    cfg: &McConfig,
) -> Result<DefaultFrequency> {
    let terminals = terminal_firm_values(model, history, contract, mkt, cfg)?;
    let defaults = terminals.iter().filter(|v| **v < contract.face).count();
    let n = terminals.len() as f64;
    let p = defaults as f64 / n;
    Ok(DefaultFrequency {
        probability: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
    })
}
