//! Pricing engine for corporate claims (equity, risky debt, loan
//! guarantees) under a firm-value model whose drift and volatility depend
//! on delayed values of the firm.
//!
//! Three valuation routes are provided and cross-checked:
//!
//! * closed-form formulas, valid while the horizon fits inside the
//!   volatility delay so the realized volatility integral is known
//!   ([`closedform`]);
//! * a finite-difference solver for the pricing PDE with the realized
//!   time-dependent volatility coefficient, plus a heat-kernel quadrature
//!   oracle ([`pde`]);
//! * risk-neutral Monte Carlo for arbitrary horizons ([`mc`]).
//!
//! [`sdde`] simulates the firm value itself and supplies the volatility
//! integral used everywhere; [`riskstructure`] builds risk-premium term
//! structures and leverage comparisons on top of the closed forms.

// `!(x > 0.0)` is used throughout instead of `x <= 0.0`: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod mc;
pub mod model;
pub mod normal;
pub mod pde;
pub mod riskstructure;
pub mod sdde;

pub use error::{Error, Result};
pub use model::{
    ClaimKind, DebtContract, FirmModel, HistoryPath, MarketParams, Method, PricingResult, VolSpec,
};
