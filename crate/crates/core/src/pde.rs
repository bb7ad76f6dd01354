//! Finite-difference solution of the claim pricing equation
//!
//! ```text
//! F_t + 1/2 sigma^2(t) v^2 F_vv + r v F_v - r F = 0,   F(v, T) = payoff(v)
//! ```
//!
//! where `sigma^2(t) = g^2(V(t - l2))` is the realized, time-dependent
//! volatility coefficient read off an observed history (valid while
//! `T - t0 <= l2`). Backward theta-scheme on a truncated uniform grid with
//! Dirichlet boundaries, plus an independent heat-kernel quadrature route
//! through the log-space change of variables.

use crate::error::{Error, Result};
use crate::model::{ClaimKind, DebtContract, FirmModel, HistoryPath, MarketParams};
use crate::normal::std_normal_pdf;

/// Space/time mesh, truncation bound, scheme weight, and the sampled
/// volatility coefficient on the time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeGrid {
    /// Truncation bound; boundary conditions are imposed at v = 0 and v_max.
    pub v_max: f64,
    /// Interior node count (grid has n_space + 2 nodes including boundaries).
    pub n_space: usize,
    /// Number of time steps.
    pub n_time: usize,
    /// Time weight: 0.5 = Crank-Nicolson, 1 = fully implicit.
    pub theta: f64,
    /// Left end of the solve window; the right end is the contract maturity.
    pub t0: f64,
    /// sigma^2 at the n_time + 1 mesh times.
    pub sigma_sq: Vec<f64>,
}

impl PdeGrid {
    pub fn new(
        v_max: f64,
        n_space: usize,
        n_time: usize,
        theta: f64,
        t0: f64,
        sigma_sq: Vec<f64>,
    ) -> Result<Self> {
        if !(v_max > 0.0) || !v_max.is_finite() {
            return Err(Error::invalid("v_max", "must be positive"));
        }
        if n_space < 16 {
            return Err(Error::invalid("n_space", "must be at least 16"));
        }
        if n_time < 8 {
            return Err(Error::invalid("n_time", "must be at least 8"));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid("theta", "must lie in [0, 1]"));
        }
        if sigma_sq.len() != n_time + 1 {
            return Err(Error::invalid(
                "sigma_sq",
                format!("need {} samples, got {}", n_time + 1, sigma_sq.len()),
            ));
        }
        if sigma_sq.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("sigma_sq", "must be strictly positive"));
        }
        Ok(PdeGrid {
            v_max,
            n_space,
            n_time,
            theta,
            t0,
            sigma_sq,
        })
    }

    /// Grid with a constant volatility coefficient.
    pub fn with_constant_sigma(
        v_max: f64,
        n_space: usize,
        n_time: usize,
        theta: f64,
        t0: f64,
        sigma: f64,
    ) -> Result<Self> {
        Self::new(
            v_max,
            n_space,
            n_time,
            theta,
            t0,
            vec![sigma * sigma; n_time + 1],
        )
    }

    /// Grid whose coefficient is realized from an observed history.
    #[allow(clippy::too_many_arguments)]
    pub fn from_history(
        history: &HistoryPath,
        model: &FirmModel,
        t0: f64,
        maturity: f64,
        v_max: f64,
        n_space: usize,
        n_time: usize,
        theta: f64,
    ) -> Result<Self> {
        let sigma_sq = realized_sigma(history, model, t0, maturity, n_time)?;
        Self::new(v_max, n_space, n_time, theta, t0, sigma_sq)
    }
}

/// Samples sigma^2(s) = g^2(V(s - l2)) on the `n_time + 1` mesh times of
/// `[t0, maturity]`. Requires the validity window, like the closed forms.
pub fn realized_sigma(
    history: &HistoryPath,
    model: &FirmModel,
    t0: f64,
    maturity: f64,
    n_time: usize,
) -> Result<Vec<f64>> {
    let tau = maturity - t0;
    if !(tau > 0.0 && tau <= model.l2 * (1.0 + 1e-12)) {
        return Err(Error::WindowViolation { tau, l2: model.l2 });
    }
    if !history.covers(t0 - model.l2, maturity - model.l2) {
        return Err(Error::CoverageViolation {
            need_start: t0 - model.l2,
            need_end: maturity - model.l2,
            start: history.t0(),
            end: history.end_time(),
        });
    }
    let dt = tau / n_time as f64;
    (0..=n_time)
        .map(|j| {
            let s = t0 + j as f64 * dt;
            let g = model.vol.eval(history.value_at(s - model.l2)?)?;
            Ok(g * g)
        })
        .collect()
}

/// Claim values on the full space/time mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    v_max: f64,
    n_space: usize,
    n_time: usize,
    t0: f64,
    t_end: f64,
    /// Row-major, rows are time levels (row 0 at t0), columns are v-nodes.
    values: Vec<f64>,
}

impl ValueSurface {
    pub fn dv(&self) -> f64 {
        self.v_max / (self.n_space + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t0) / self.n_time as f64
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    /// Value at mesh node (time level `j`, space index `i`).
    pub fn node_value(&self, j: usize, i: usize) -> f64 {
        self.values[j * (self.n_space + 2) + i]
    }

    fn row(&self, j: usize) -> &[f64] {
        let w = self.n_space + 2;
        &self.values[j * w..(j + 1) * w]
    }

    /// Value at `(v, t)`: cubic interpolation in v, linear in t.
    pub fn value_at(&self, v: f64, t: f64) -> Result<f64> {
        if !(0.0..=self.v_max * (1.0 + 1e-12)).contains(&v) {
            return Err(Error::invalid(
                "v",
                format!("outside [0, {}], got {v}", self.v_max),
            ));
        }
        let dt = self.dt();
        let eps = 1e-9 * dt;
        if t < self.t0 - eps || t > self.t_end + eps {
            return Err(Error::OutOfRange {
                t,
                start: self.t0,
                end: self.t_end,
            });
        }
        let pos = ((t - self.t0) / dt).clamp(0.0, self.n_time as f64);
        let j = (pos.floor() as usize).min(self.n_time - 1);
        let w = pos - j as f64;
        let a = interp_cubic(self.row(j), self.dv(), self.n_space, v);
        if w <= 1e-9 {
            return Ok(a);
        }
        let b = interp_cubic(self.row(j + 1), self.dv(), self.n_space, v);
        Ok(a * (1.0 - w) + b * w)
    }

    /// Writes `v,t,value` triples with a header.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "v,t,value")?;
        let dv = self.dv();
        let dt = self.dt();
        for j in 0..=self.n_time {
            let t = self.t0 + j as f64 * dt;
            for i in 0..self.n_space + 2 {
                writeln!(out, "{},{},{}", i as f64 * dv, t, self.node_value(j, i))?;
            }
        }
        Ok(())
    }
}

fn interp_cubic(row: &[f64], dv: f64, n_space: usize, v: f64) -> f64 {
    let pos = v / dv;
    let i = (pos.floor() as isize).clamp(1, n_space as isize - 1) as usize;
    let x = pos - i as f64;
    let (f0, f1, f2, f3) = (row[i - 1], row[i], row[i + 1], row[i + 2]);
    let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
    let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
    let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
    let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
    l0 * f0 + l1 * f1 + l2 * f2 + l3 * f3
}

/// Dirichlet rows: value at v = 0 and v = v_max with `tau_rem` to maturity.
/// At v = 0 equity and debt are worthless while the guarantee pays the full
/// discounted face; at v_max the claims take their asymptotic forms.
fn boundary_values(kind: ClaimKind, face: f64, r: f64, tau_rem: f64, v_max: f64) -> (f64, f64) {
    let disc_face = face * (-r * tau_rem).exp();
    match kind {
        ClaimKind::Equity => (0.0, v_max - disc_face),
        ClaimKind::Debt => (0.0, disc_face),
        ClaimKind::Guarantee => (disc_face, 0.0),
    }
}

/// Thomas algorithm for a tridiagonal system. Errors when a pivot
/// degenerates, which for the theta-scheme signals a step/weight problem.
pub(crate) fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
    out: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
) -> Result<()> {
    let n = diag.len();
    debug_assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    out.clear();
    out.resize(n, 0.0);
    scratch.clear();
    scratch.resize(n, 0.0);

    let mut pivot = diag[0];
    if pivot.abs() < 1e-300 {
        return Err(instability());
    }
    scratch[0] = sup[0] / pivot;
    out[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * scratch[i - 1];
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return Err(instability());
        }
        scratch[i] = sup[i] / pivot;
        out[i] = (rhs[i] - sub[i] * out[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        out[i] -= scratch[i] * out[i + 1];
    }
    Ok(())
}

fn instability() -> Error {
    Error::Numerical(
        "tridiagonal solve lost diagonal dominance; reduce the time step or use theta = 1".into(),
    )
}

/// Solves the claim equation backward from the terminal payoff.
///
/// Central differences in v, theta-weighted stepping in time with two fully
/// implicit startup steps to damp the payoff kink, tridiagonal solve per
/// step. Boundary rows are imposed exactly.
pub fn solve_claim_pde(
    kind: ClaimKind,
    grid: &PdeGrid,
    contract: &DebtContract,
    mkt: &MarketParams,
) -> Result<ValueSurface> {
    contract.validate()?;
    mkt.validate()?;
    if grid.v_max < 5.0 * contract.face {
        return Err(Error::invalid(
            "v_max",
            format!(
                "truncation bound must be at least 5x the face value {}, got {}",
                contract.face, grid.v_max
            ),
        ));
    }
    if !(contract.maturity > grid.t0) {
        return Err(Error::invalid(
            "t0",
            format!("must precede maturity {}, got {}", contract.maturity, grid.t0),
        ));
    }

    let n = grid.n_space;
    let m = grid.n_time;
    let width = n + 2;
    let dv = grid.v_max / (n + 1) as f64;
    let dt = (contract.maturity - grid.t0) / m as f64;
    let r = mkt.r;

    let mut values = vec![0.0; (m + 1) * width];
    // terminal row
    for i in 0..width {
        values[m * width + i] = kind.payoff(i as f64 * dv, contract.face);
    }

    // The march starts from the cell-averaged payoff: averaging the one
    // cell containing the kink removes the grid-offset error term and
    // restores a clean second-order constant. The stored terminal row
    // stays the exact payoff.
    let mut march = values[m * width..(m + 1) * width].to_vec();
    let kink_cell = (contract.face / dv).round() as usize;
    if kink_cell >= 1 && kink_cell <= n {
        let a = (kink_cell as f64 - 0.5) * dv;
        let b = (kink_cell as f64 + 0.5) * dv;
        if a < contract.face && contract.face < b {
            // exact average of the piecewise-linear payoff over [a, b]
            let f = |v: f64| kind.payoff(v, contract.face);
            let left = 0.5 * (contract.face - a) * (f(a) + f(contract.face));
            let right = 0.5 * (b - contract.face) * (f(contract.face) + f(b));
            march[kink_cell] = (left + right) / dv;
        }
    }

    // spatial operator coefficients at interior node i for a given sigma^2
    let coeff = |sig_sq: f64, i: usize| -> (f64, f64, f64) {
        let v = i as f64 * dv;
        let diffusion = 0.5 * sig_sq * v * v / (dv * dv);
        let convection = 0.5 * r * v / dv;
        (
            diffusion - convection,        // sub (i-1)
            -2.0 * diffusion - r,          // diag
            diffusion + convection,        // sup (i+1)
        )
    };

    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut solution = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n);

    for j in (0..m).rev() {
        // two fully implicit startup steps stabilize the kinked payoff
        let theta = if grid.theta < 1.0 && j + 2 >= m {
            1.0
        } else {
            grid.theta
        };
        let t_new = grid.t0 + j as f64 * dt;
        let t_old = t_new + dt;
        let sig_new = grid.sigma_sq[j];
        let sig_old = grid.sigma_sq[j + 1];
        let tau_new = contract.maturity - t_new;
        let tau_old = contract.maturity - t_old;
        let (lo_new, hi_new) = boundary_values(kind, contract.face, r, tau_new, grid.v_max);
        let (lo_old, hi_old) = boundary_values(kind, contract.face, r, tau_old, grid.v_max);

        let old: &[f64] = if j + 1 == m {
            &march
        } else {
            &values[(j + 1) * width..(j + 2) * width]
        };
        for i in 1..=n {
            let (s_new, d_new, p_new) = coeff(sig_new, i);
            let (s_old, d_old, p_old) = coeff(sig_old, i);
            sub[i - 1] = -dt * theta * s_new;
            diag[i - 1] = 1.0 - dt * theta * d_new;
            sup[i - 1] = -dt * theta * p_new;
            let u_lo = if i == 1 { lo_old } else { old[i - 1] };
            let u_hi = if i == n { hi_old } else { old[i + 1] };
            let explicit = s_old * u_lo + d_old * old[i] + p_old * u_hi;
            rhs[i - 1] = old[i] + dt * (1.0 - theta) * explicit;
        }
        // Dirichlet values at the new level enter the first and last rows
        let (s1, _, _) = coeff(sig_new, 1);
        let (_, _, pn) = coeff(sig_new, n);
        rhs[0] += dt * theta * s1 * lo_new;
        rhs[n - 1] += dt * theta * pn * hi_new;

        solve_tridiagonal(&sub, &diag, &sup, &rhs, &mut solution, &mut scratch)?;

        let row = &mut values[j * width..(j + 1) * width];
        row[0] = lo_new;
        row[1..=n].copy_from_slice(&solution);
        row[n + 1] = hi_new;
    }

    Ok(ValueSurface {
        v_max: grid.v_max,
        n_space: n,
        n_time: m,
        t0: grid.t0,
        t_end: contract.maturity,
        values,
    })
}

/// Adaptive Simpson quadrature with cached endpoints.
pub(crate) fn adaptive_simpson<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> f64 {
    #[allow(clippy::too_many_arguments)] // recursion carries cached endpoint values
    fn rec<F: FnMut(f64) -> f64>(
        f: &mut F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

/// Heat-kernel time coordinate tau(t) = 1/2 ∫_t^T sigma^2(s) ds, trapezoid
/// on the sampled coefficient with a partial first cell.
fn tau_at(grid: &PdeGrid, maturity: f64, t: f64) -> f64 {
    let m = grid.n_time;
    let dt = (maturity - grid.t0) / m as f64;
    let pos = ((t - grid.t0) / dt).clamp(0.0, m as f64);
    let j = (pos.floor() as usize).min(m);
    let frac = pos - j as f64;
    let mut integral = 0.0;
    if frac > 0.0 && j < m {
        let s_t = grid.sigma_sq[j] * (1.0 - frac) + grid.sigma_sq[j + 1] * frac;
        integral += (1.0 - frac) * dt * 0.5 * (s_t + grid.sigma_sq[j + 1]);
    }
    let start = if frac > 0.0 { j + 1 } else { j };
    for k in start..m {
        integral += dt * 0.5 * (grid.sigma_sq[k] + grid.sigma_sq[k + 1]);
    }
    0.5 * integral
}

/// Claim value by the heat-kernel route at a single point.
///
/// Maps (v, t) to log-space, convolves the transformed terminal payoff with
/// the Gaussian kernel by adaptive quadrature over ten standard deviations,
/// and discounts back. Independent of the finite-difference solver.
pub fn heat_value(
    kind: ClaimKind,
    v: f64,
    t: f64,
    grid: &PdeGrid,
    contract: &DebtContract,
    mkt: &MarketParams,
) -> Result<f64> {
    contract.validate()?;
    mkt.validate()?;
    if !(v > 0.0) {
        return Err(Error::invalid("v", "heat route needs v > 0"));
    }
    let tau_rem = contract.maturity - t;
    if tau_rem < 0.0 {
        return Err(Error::invalid("t", "beyond maturity"));
    }
    let tau = tau_at(grid, contract.maturity, t);
    if tau < 0.0 {
        return Err(Error::invalid("tau", "heat time must be non-negative"));
    }
    if tau == 0.0 {
        return Ok(kind.payoff(v, contract.face));
    }
    Ok(heat_value_inner(kind, v, tau, tau_rem, contract.face, mkt.r))
}

fn heat_value_inner(kind: ClaimKind, v: f64, tau: f64, tau_rem: f64, face: f64, r: f64) -> f64 {
    // Drift-adjusted log coordinate: the payoff convolution runs against a
    // standard Gaussian in z, eta = y + sqrt(2 tau) z.
    let y = (v / face).ln() + r * tau_rem - tau;
    let s = (2.0 * tau).sqrt();
    let mut integrand = |z: f64| std_normal_pdf(z) * kind.payoff(face * (y + s * z).exp(), face);
    let z_lo = -10.0;
    let z_hi = 10.0;
    let kink = -y / s; // payoff kink at eta = 0, i.e. v = face
    // Breakpoints stop the adaptive rule from terminating early on the
    // fast-decaying Gaussian tails; the kink separates the smooth pieces.
    let mut cuts = vec![z_lo, -5.0, -2.0, 0.0, 2.0, 5.0, z_hi];
    if kink > z_lo && kink < z_hi {
        cuts.push(kink);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let tol = 1e-12 * (v + face);
    let integral: f64 = cuts
        .windows(2)
        .map(|w| adaptive_simpson(&mut integrand, w[0], w[1], tol, 48))
        .sum();
    (-r * tau_rem).exp() * integral
}

/// Full surface by the heat-kernel route, mesh-point by mesh-point. Meant
/// for modest meshes; each node costs one adaptive quadrature. Boundary
/// rows are imposed exactly, like the finite-difference surface.
pub fn solve_via_heat_transform(
    kind: ClaimKind,
    grid: &PdeGrid,
    contract: &DebtContract,
    mkt: &MarketParams,
) -> Result<ValueSurface> {
    contract.validate()?;
    mkt.validate()?;
    if !(contract.maturity > grid.t0) {
        return Err(Error::invalid("t0", "must precede maturity"));
    }
    let n = grid.n_space;
    let m = grid.n_time;
    let width = n + 2;
    let dv = grid.v_max / (n + 1) as f64;
    let dt = (contract.maturity - grid.t0) / m as f64;
    let mut values = vec![0.0; (m + 1) * width];
    for j in 0..=m {
        let t = grid.t0 + j as f64 * dt;
        let tau_rem = contract.maturity - t;
        let tau = tau_at(grid, contract.maturity, t);
        let (lo, hi) = boundary_values(kind, contract.face, mkt.r, tau_rem, grid.v_max);
        let row = &mut values[j * width..(j + 1) * width];
        row[0] = lo;
        row[n + 1] = hi;
        for i in 1..=n {
            let v = i as f64 * dv;
            row[i] = if tau == 0.0 {
                kind.payoff(v, contract.face)
            } else {
                heat_value_inner(kind, v, tau, tau_rem, contract.face, mkt.r)
            };
        }
    }
    Ok(ValueSurface {
        v_max: grid.v_max,
        n_space: n,
        n_time: m,
        t0: grid.t0,
        t_end: contract.maturity,
        values,
    })
}

/// One refinement level of [`convergence_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_space: usize,
    pub n_time: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares order of max_rel_error against n_space.
    pub spatial_order: f64,
}

impl ConvergenceReport {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n_space,n_time,max_rel_error")?;
        for row in &self.rows {
            writeln!(out, "{},{},{}", row.n_space, row.n_time, row.max_rel_error)?;
        }
        Ok(())
    }
}

/// Least-squares slope of -ln(err) against ln(n): the empirical order.
pub fn empirical_order(ns: &[f64], errs: &[f64]) -> f64 {
    let k = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -cov / var
}

/// Solves the same problem on a ladder of grids and reports the maximum
/// relative error against the closed form at a set of spot probes.
pub fn convergence_report(
    kind: ClaimKind,
    contract: &DebtContract,
    mkt: &MarketParams,
    t0: f64,
    sigma_sq_of_t: &dyn Fn(f64) -> f64,
    ladder: &[(usize, usize)],
    theta: f64,
) -> Result<ConvergenceReport> {
    if ladder.is_empty() {
        return Err(Error::invalid("ladder", "must be non-empty"));
    }
    let v_max = 8.0 * contract.face;
    // Reference volatility integral by fine trapezoid of the coefficient.
    let fine = 1 << 15;
    let h = (contract.maturity - t0) / fine as f64;
    let mut vol_int = 0.0;
    for k in 0..fine {
        let a = t0 + k as f64 * h;
        vol_int += 0.5 * h * (sigma_sq_of_t(a) + sigma_sq_of_t(a + h));
    }
    // Probes avoid the deep out-of-the-money region where tiny reference
    // values make relative error meaningless.
    let probes: Vec<f64> = [0.8, 1.0, 1.25, 2.0]
        .iter()
        .map(|m| m * contract.face)
        .collect();
    let reference: Vec<f64> = probes
        .iter()
        .map(|v| {
            Ok(match kind {
                ClaimKind::Equity => {
                    crate::closedform::equity_value(*v, contract, mkt, t0, vol_int)?.value
                }
                ClaimKind::Debt => {
                    crate::closedform::debt_value(*v, contract, mkt, t0, vol_int)?.value
                }
                ClaimKind::Guarantee => {
                    crate::closedform::guarantee_value(*v, contract, mkt, t0, vol_int)?.value
                }
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(ladder.len());
    for &(n_space, n_time) in ladder {
        let dt = (contract.maturity - t0) / n_time as f64;
        let sigma_sq = (0..=n_time)
            .map(|j| sigma_sq_of_t(t0 + j as f64 * dt))
            .collect();
        let grid = PdeGrid::new(v_max, n_space, n_time, theta, t0, sigma_sq)?;
        let surface = solve_claim_pde(kind, &grid, contract, mkt)?;
        let mut worst = 0.0f64;
        for (v, want) in probes.iter().zip(&reference) {
            let got = surface.value_at(*v, t0)?;
            worst = worst.max((got - want).abs() / want.abs().max(1e-12));
        }
        rows.push(ConvergenceRow {
            n_space,
            n_time,
            max_rel_error: worst,
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n_space as f64).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.max_rel_error.max(1e-300)).collect();
    let spatial_order = if rows.len() >= 2 {
        empirical_order(&ns, &errs)
    } else {
        f64::NAN
    };
    Ok(ConvergenceReport {
        rows,
        spatial_order,
    })
}
