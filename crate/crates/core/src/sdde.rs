//! Simulation of the firm-value dynamics under the physical and
//! risk-neutral measures.
//!
//! The firm value follows
//!
//! ```text
//! dV(t) = (alpha * V(t) * V(t - l1) - C) dt + g(V(t - l2)) * V(t) dW(t)
//! ```
//!
//! started from an observed history on `[-L, 0]`, `L = max(l1, l2)`. Because
//! the step never exceeds the smaller delay, every delayed lookup lands on
//! already-computed path segments and the equation integrates forward window
//! by window (method of steps).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{FirmModel, HistoryPath, MarketParams};

/// Relative slack for grid/step commensurability checks.
const GRID_EPS: f64 = 1e-9;

/// Time-stepping scheme for [`simulate_em`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Explicit Euler-Maruyama on V. Can step to a nonpositive value, which
    /// is reported as a simulation failure.
    Euler,
    /// Euler-Maruyama on ln V; positive by construction. Requires C = 0.
    LogEuler,
    /// The explicit exponential solution representation, evaluated by the
    /// method of steps. Requires C = 0.
    ExactRepresentation,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::LogEuler
    }
}

/// Simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Time step in years. Must satisfy 0 < step <= min(l1, l2).
    pub step: f64,
    /// Absolute end time of the simulation (years). The run starts at the
    /// end of the supplied history.
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    fn validate(&self, model: &FirmModel, t_start: f64) -> Result<()> {
        let min_delay = self.step_bound(model);
        if !(self.step > 0.0) || self.step > min_delay * (1.0 + GRID_EPS) {
            return Err(Error::invalid(
                "step",
                format!(
                    "must satisfy 0 < step <= min(l1, l2) = {min_delay}, got {}",
                    self.step
                ),
            ));
        }
        if !(self.horizon > t_start) {
            return Err(Error::invalid(
                "horizon",
                format!(
                    "must lie beyond the history end {t_start}, got {}",
                    self.horizon
                ),
            ));
        }
        Ok(())
    }

    fn step_bound(&self, model: &FirmModel) -> f64 {
        model.l1.min(model.l2)
    }
}

/// Brownian increments on a uniform grid, dW_k ~ N(0, step).
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    step: f64,
    increments: Vec<f64>,
}

impl BrownianIncrements {
    /// Draws `count` increments from the canonical generator for `seed`.
    pub fn generate(seed: u64, step: f64, count: usize) -> Result<Self> {
        Self::substream(seed, 0, step, count)
    }

    /// Draws from the substream `(seed, stream)`. Streams are independent,
    /// which makes parallel Monte Carlo reproducible regardless of worker
    /// scheduling.
    pub fn substream(seed: u64, stream: u64, step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::invalid("step", "must be positive"));
        }
        if count == 0 {
            return Err(Error::invalid("count", "must be positive"));
        }
        let mut rng = substream_rng(seed, stream);
        let sqrt_h = step.sqrt();
        let increments = (0..count)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sqrt_h
            })
            .collect();
        Ok(BrownianIncrements { step, increments })
    }

    /// Sign-flipped copy, for antithetic pairs.
    pub fn negated(&self) -> Self {
        BrownianIncrements {
            step: self.step,
            increments: self.increments.iter().map(|d| -d).collect(),
        }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn count(&self) -> usize {
        self.increments.len()
    }
}

pub(crate) fn substream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Growing simulation state: history for t <= t_start, simulated nodes after.
struct PathState<'a> {
    history: &'a HistoryPath,
    t_start: f64,
    h: f64,
    sim: Vec<f64>,
}

impl<'a> PathState<'a> {
    fn new(history: &'a HistoryPath, h: f64, capacity: usize) -> Self {
        let t_start = history.end_time();
        let mut sim = Vec::with_capacity(capacity + 1);
        sim.push(history.values()[history.len() - 1]);
        PathState {
            history,
            t_start,
            h,
            sim,
        }
    }

    /// Delayed lookup. Guaranteed in-range when the caller checked history
    /// coverage and step <= min delay.
    fn lookup(&self, t: f64) -> Result<f64> {
        let pos = (t - self.t_start) / self.h;
        if pos <= GRID_EPS {
            return self.history.value_at(t);
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        debug_assert!(i + 1 < self.sim.len() || frac <= GRID_EPS);
        if frac <= GRID_EPS {
            return Ok(self.sim[i]);
        }
        Ok(self.sim[i] * (1.0 - frac) + self.sim[i + 1] * frac)
    }

    fn time_at_step(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.h
    }

    /// Concatenates resampled history and simulated values on the step grid.
    fn into_path(self) -> Result<HistoryPath> {
        let m = ((self.t_start - self.history.t0()) / self.h + GRID_EPS).floor() as usize;
        let mut values = Vec::with_capacity(m + self.sim.len());
        for j in (1..=m).rev() {
            // clamp guards the earliest node against rounding past t0
            let t = (self.t_start - j as f64 * self.h).max(self.history.t0());
            values.push(self.history.value_at(t)?);
        }
        values.extend_from_slice(&self.sim);
        HistoryPath::new(self.t_start - m as f64 * self.h, self.h, values)
    }
}

fn check_history_coverage(model: &FirmModel, history: &HistoryPath) -> Result<()> {
    let t_start = history.end_time();
    let need = model.max_delay();
    if t_start - history.t0() < need * (1.0 - GRID_EPS) {
        return Err(Error::CoverageViolation {
            need_start: t_start - need,
            need_end: t_start,
            start: history.t0(),
            end: t_start,
        });
    }
    Ok(())
}

/// Splits `[t_start, horizon]` into whole steps no longer than `step`.
fn step_layout(t_start: f64, horizon: f64, step: f64) -> (usize, f64) {
    let duration = horizon - t_start;
    let n = (duration / step - GRID_EPS).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

/// Simulates the firm-value equation under the physical measure.
///
/// Returns the concatenated path (history resampled onto the step grid,
/// then the simulated segment) ending at `cfg.horizon`. The effective step
/// is shrunk slightly when the horizon is not a whole number of steps.
pub fn simulate_em(model: &FirmModel, history: &HistoryPath, cfg: &SimConfig) -> Result<HistoryPath> {
    model.validate()?;
    check_history_coverage(model, history)?;
    let t_start = history.end_time();
    cfg.validate(model, t_start)?;
    let (n, h) = step_layout(t_start, cfg.horizon, cfg.step);
    let dw = BrownianIncrements::substream(cfg.seed, 0, h, n)?;
    match cfg.scheme {
        Scheme::Euler => euler_path(model, history, &dw),
        Scheme::LogEuler => log_euler_path(model, history, &dw, PhysicalDrift),
        Scheme::ExactRepresentation => exact_representation(model, history, &dw),
    }
}

/// Evaluates the explicit exponential solution representation forward by
/// the method of steps, driven by the supplied increments. Left-point
/// quadrature on the increment grid; strictly positive by construction.
/// Only defined for C = 0.
pub fn exact_representation(
    model: &FirmModel,
    history: &HistoryPath,
    increments: &BrownianIncrements,
) -> Result<HistoryPath> {
    model.validate()?;
    require_zero_payout(model, "exact-representation")?;
    check_history_coverage(model, history)?;
    check_step_bound(model, increments.step)?;

    let h = increments.step;
    let mut state = PathState::new(history, h, increments.count());
    let v0 = state.sim[0];
    let mut exponent = 0.0;
    for (k, dw) in increments.increments.iter().enumerate() {
        let t_k = state.time_at_step(k);
        let v_d1 = state.lookup(t_k - model.l1)?;
        let v_d2 = state.lookup(t_k - model.l2)?;
        let g = model.vol.eval(v_d2)?;
        exponent += (model.alpha * v_d1 - 0.5 * g * g) * h + g * dw;
        let value = v0 * exponent.exp();
        if !(value > 0.0) || !value.is_finite() {
            // drift blew the exponent past representability
            return Err(Error::SimulationFailure { step: k });
        }
        state.sim.push(value);
    }
    state.into_path()
}

/// Simulates discounted-martingale dynamics: drift r, delayed volatility.
/// Log-Euler stepping, so the output is strictly positive. Requires C = 0.
pub fn risk_neutral_simulate(
    model: &FirmModel,
    history: &HistoryPath,
    mkt: &MarketParams,
    cfg: &SimConfig,
) -> Result<HistoryPath> {
    model.validate()?;
    mkt.validate()?;
    require_zero_payout(model, "risk-neutral simulation")?;
    check_history_coverage(model, history)?;
    let t_start = history.end_time();
    cfg.validate(model, t_start)?;
    let (n, h) = step_layout(t_start, cfg.horizon, cfg.step);
    let dw = BrownianIncrements::substream(cfg.seed, 0, h, n)?;
    log_euler_path(model, history, &dw, RiskNeutralDrift { r: mkt.r })
}

/// Increment-driven log-Euler path under the physical measure (C = 0).
/// Exposed so oracle tests can feed the same noise to several schemes.
pub fn log_euler_driven(
    model: &FirmModel,
    history: &HistoryPath,
    increments: &BrownianIncrements,
) -> Result<HistoryPath> {
    model.validate()?;
    check_history_coverage(model, history)?;
    check_step_bound(model, increments.step)?;
    log_euler_path(model, history, increments, PhysicalDrift)
}

/// Increment-driven explicit Euler path under the physical measure.
pub fn euler_driven(
    model: &FirmModel,
    history: &HistoryPath,
    increments: &BrownianIncrements,
) -> Result<HistoryPath> {
    model.validate()?;
    check_history_coverage(model, history)?;
    check_step_bound(model, increments.step)?;
    euler_path(model, history, increments)
}

/// Increment-driven risk-neutral terminal value, skipping the output-path
/// assembly; the Monte Carlo hot loop needs nothing else.
pub(crate) fn risk_neutral_terminal(
    model: &FirmModel,
    history: &HistoryPath,
    r: f64,
    increments: &BrownianIncrements,
) -> Result<f64> {
    let state = log_euler_core(model, history, increments, RiskNeutralDrift { r })?;
    Ok(*state.sim.last().unwrap())
}

fn require_zero_payout(model: &FirmModel, what: &str) -> Result<()> {
    if model.payout_c != 0.0 {
        return Err(Error::Unsupported(format!(
            "{what} requires payout_c = 0, got {}",
            model.payout_c
        )));
    }
    Ok(())
}

fn check_step_bound(model: &FirmModel, h: f64) -> Result<()> {
    let bound = model.l1.min(model.l2);
    if h > bound * (1.0 + GRID_EPS) {
        return Err(Error::invalid(
            "step",
            format!("must not exceed min(l1, l2) = {bound}, got {h}"),
        ));
    }
    Ok(())
}

/// Log-drift at one step: returns the dt coefficient for d(ln V).
trait LogDrift {
    fn log_drift(&self, model: &FirmModel, v_d1: f64, g: f64) -> f64;
    /// Whether the drift reads V(t - l1); lets risk-neutral paths skip
    /// a lookup per step.
    fn needs_delayed_drift(&self) -> bool {
        true
    }
}

struct PhysicalDrift;
impl LogDrift for PhysicalDrift {
    fn log_drift(&self, model: &FirmModel, v_d1: f64, g: f64) -> f64 {
        model.alpha * v_d1 - 0.5 * g * g
    }
}

struct RiskNeutralDrift {
    r: f64,
}
impl LogDrift for RiskNeutralDrift {
    fn log_drift(&self, _model: &FirmModel, _v_d1: f64, g: f64) -> f64 {
        self.r - 0.5 * g * g
    }
    fn needs_delayed_drift(&self) -> bool {
        false
    }
}

fn log_euler_path(
    model: &FirmModel,
    history: &HistoryPath,
    increments: &BrownianIncrements,
    drift: impl LogDrift,
) -> Result<HistoryPath> {
    log_euler_core(model, history, increments, drift)?.into_path()
}

fn log_euler_core<'a>(
    model: &FirmModel,
    history: &'a HistoryPath,
    increments: &BrownianIncrements,
    drift: impl LogDrift,
) -> Result<PathState<'a>> {
    require_zero_payout(model, "log-euler scheme")?;
    let h = increments.step;
    let mut state = PathState::new(history, h, increments.count());
    let mut x = state.sim[0].ln();
    for (k, dw) in increments.increments.iter().enumerate() {
        let t_k = state.time_at_step(k);
        let v_d1 = if drift.needs_delayed_drift() {
            state.lookup(t_k - model.l1)?
        } else {
            0.0
        };
        let v_d2 = state.lookup(t_k - model.l2)?;
        let g = model.vol.eval(v_d2)?;
        x += drift.log_drift(model, v_d1, g) * h + g * dw;
        let value = x.exp();
        if !(value > 0.0) || !value.is_finite() {
            // drift blew the log-state past representability
            return Err(Error::SimulationFailure { step: k });
        }
        state.sim.push(value);
    }
    Ok(state)
}

fn euler_path(
    model: &FirmModel,
    history: &HistoryPath,
    increments: &BrownianIncrements,
) -> Result<HistoryPath> {
    let h = increments.step;
    let mut state = PathState::new(history, h, increments.count());
    for (k, dw) in increments.increments.iter().enumerate() {
        let t_k = state.time_at_step(k);
        let v = state.sim[k];
        let v_d1 = state.lookup(t_k - model.l1)?;
        let v_d2 = state.lookup(t_k - model.l2)?;
        let g = model.vol.eval(v_d2)?;
        let next = v + (model.alpha * v * v_d1 - model.payout_c) * h + g * v * dw;
        if !(next > 0.0) || !next.is_finite() {
            return Err(Error::SimulationFailure { step: k });
        }
        state.sim.push(next);
    }
    state.into_path()
}

/// Integrand of the drift adjustment that turns W into the risk-neutral
/// Brownian motion: (alpha * V(t - l1) - r) / g(V(t - l2)).
///
/// Finite for any covered `t` because the volatility has a positive floor.
pub fn girsanov_kernel(
    model: &FirmModel,
    path: &HistoryPath,
    mkt: &MarketParams,
    t: f64,
) -> Result<f64> {
    let v_d1 = path.value_at(t - model.l1)?;
    let v_d2 = path.value_at(t - model.l2)?;
    let g = model.vol.eval(v_d2)?;
    Ok((model.alpha * v_d1 - mkt.r) / g)
}

/// Realized volatility integral I = ∫_t^T g²(V(s - l2)) ds.
///
/// Composite trapezoidal rule on the path grid restricted to
/// `[t - l2, T - l2]`, with interpolated endpoint values. Within the
/// validity window this is a deterministic functional of the observed
/// history, which is what makes the closed forms computable.
pub fn vol_integral(
    path: &HistoryPath,
    vol: &crate::model::VolSpec,
    l2: f64,
    t: f64,
    end: f64,
) -> Result<f64> {
    if !(t < end) {
        return Err(Error::invalid(
            "t",
            format!("integration needs t < T, got t = {t}, T = {end}"),
        ));
    }
    let a = t - l2;
    let b = end - l2;
    if !path.covers(a, b) {
        return Err(Error::CoverageViolation {
            need_start: a,
            need_end: b,
            start: path.t0(),
            end: path.end_time(),
        });
    }
    let dt = path.dt();
    let eps = GRID_EPS * dt;
    let g_sq = |u: f64| -> Result<f64> {
        let g = vol.eval(path.value_at(u)?)?;
        Ok(g * g)
    };

    let mut total = 0.0;
    let mut prev_u = a;
    let mut prev_f = g_sq(a)?;
    // First grid node strictly after a.
    let mut i = ((a - path.t0()) / dt + GRID_EPS).floor() as usize + 1;
    loop {
        let u = path.t0() + i as f64 * dt;
        if u >= b - eps {
            break;
        }
        let f = g_sq(u)?;
        total += (u - prev_u) * 0.5 * (prev_f + f);
        prev_u = u;
        prev_f = f;
        i += 1;
    }
    let f_b = g_sq(b)?;
    total += (b - prev_u) * 0.5 * (prev_f + f_b);
    Ok(total)
}
