//! Test functions and blow-up functionals: the spatial decay weight
//! `phi_R`, temporal cutoff `zeta_R`, space-time cutoffs `psi_R` and
//! `psi*_R`, the weak-form identity residual, the I_R and Y_p functionals,
//! and the two fractional-Laplacian decay/scaling checks.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nonlinear::TrajectoryRecord;
use crate::spectral::{forward, fractional_laplacian, inverse, Field, TorusGrid};
use crate::util::{ols, Jet3};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Scales and exponents of the test-function family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TestFunctionParams {
    /// Scale R > 0.
    pub r_scale: f64,
    /// Spatial dilation K >= 1 (1 for subcritical checks).
    pub k_dilation: f64,
    /// Smoothness exponent of the space-time cutoff; must exceed 2 sigma,
    /// and additionally n + 2 sigma/3 for the critical functional.
    pub m: f64,
    /// Fractional decay regulator in (0, 1), and below sigma - [sigma] for
    /// non-integer sigma.
    pub s_sigma: f64,
    /// Spatial decay exponent q = n + 2 s_sigma of the weight.
    pub q: f64,
}

impl TestFunctionParams {
    /// Defaults: `m = ceil(max(2 sigma, n + 2 sigma/3)) + 1`, `K = 1`,
    /// `s_sigma` at the midpoint of its admissible interval.
    pub fn new(params: &ModelParams, r_scale: f64) -> Result<Self> {
        if !(r_scale > 0.0) {
            return Err(Error::ParamDomain(format!("R must be > 0, got {r_scale}")));
        }
        let sigma = params.sigma;
        let frac = sigma - sigma.floor();
        let s_sigma = if frac == 0.0 { 0.5 } else { 0.5 * frac };
        let m = (2.0 * sigma).max(params.n + 2.0 * sigma / 3.0).ceil() + 1.0;
        Ok(TestFunctionParams {
            r_scale,
            k_dilation: 1.0,
            m,
            s_sigma,
            q: params.n + 2.0 * s_sigma,
        })
    }

    pub fn with_dilation(mut self, k: f64) -> Result<Self> {
        if !(k >= 1.0) {
            return Err(Error::ParamDomain(format!("K must be >= 1, got {k}")));
        }
        self.k_dilation = k;
        Ok(self)
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.m > 2.0 * params.sigma) {
            return Err(Error::ParamDomain(format!(
                "m = {} must exceed 2 sigma = {}",
                self.m,
                2.0 * params.sigma
            )));
        }
        let frac = params.sigma - params.sigma.floor();
        if frac > 0.0 && !(self.s_sigma > 0.0 && self.s_sigma < frac) {
            return Err(Error::ParamDomain(format!(
                "s_sigma = {} must lie in (0, sigma - [sigma]) = (0, {frac})",
                self.s_sigma
            )));
        }
        if frac == 0.0 && !(self.s_sigma > 0.0 && self.s_sigma < 1.0) {
            return Err(Error::ParamDomain("s_sigma must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Smooth non-increasing step: 1 on [0, 1/2], 0 on [1, inf), glued with
/// `exp(-1/x)`. Value and first three derivatives by forward-mode jets,
/// never finite differences.
pub fn smooth_step_jet(tau: Jet3) -> Jet3 {
    if tau.v <= 0.5 {
        return Jet3::constant(1.0);
    }
    if tau.v >= 1.0 {
        return Jet3::constant(0.0);
    }
    // theta = 2 (1 - tau) in (0, 1); step = g(theta) / (g(theta) + g(1 - theta))
    let theta = Jet3::constant(2.0).sub(tau.scale(2.0));
    let g = |x: Jet3| x.recip().scale(-1.0).exp();
    let a = g(theta);
    let b = g(Jet3::constant(1.0).sub(theta));
    a.div(a.add(b))
}

pub fn smooth_step(tau: f64) -> f64 {
    smooth_step_jet(Jet3::constant(tau)).v
}

/// `chi*`: agrees with the step for tau >= 1/2 and vanishes below.
pub fn smooth_step_star(tau: f64) -> f64 {
    if tau < 0.5 {
        0.0
    } else {
        smooth_step(tau)
    }
}

/// Spatial weight `phi_R(x) = <x/(R K)>^{-n - 2 s_sigma}`.
pub fn phi_r(x_norm: f64, tp: &TestFunctionParams) -> f64 {
    let y = x_norm / (tp.r_scale * tp.k_dilation);
    (1.0 + y * y).powf(-0.5 * tp.q)
}

/// Temporal cutoff `zeta_R(t) = zeta(R^{-2 sigma/3} t)` and its first three
/// t-derivatives.
pub fn zeta_r_jet(t: f64, tp: &TestFunctionParams, sigma: f64) -> Jet3 {
    let scale = tp.r_scale.powf(-2.0 * sigma / 3.0);
    let tau = Jet3 { v: scale * t, d1: scale, d2: 0.0, d3: 0.0 };
    smooth_step_jet(tau)
}

pub fn zeta_r(t: f64, tp: &TestFunctionParams, sigma: f64) -> f64 {
    zeta_r_jet(t, tp, sigma).v
}

/// Space-time cutoff `psi_R(t, x) = [chi((t + |x|^{2 sigma/3}) / R)]^m`.
pub fn psi_r(t: f64, x_norm: f64, tp: &TestFunctionParams, sigma: f64) -> f64 {
    let tau = (t + x_norm.powf(2.0 * sigma / 3.0)) / tp.r_scale;
    smooth_step(tau).powf(tp.m)
}

/// `psi*_R`: the same power of `chi*` (supported in R/2 < t + |x|^{2s/3} < R).
pub fn psi_star_r(t: f64, x_norm: f64, tp: &TestFunctionParams, sigma: f64) -> f64 {
    let tau = (t + x_norm.powf(2.0 * sigma / 3.0)) / tp.r_scale;
    let s = smooth_step_star(tau);
    if s == 0.0 {
        0.0
    } else {
        s.powf(tp.m)
    }
}

/// Time-derivative jet of `psi_R` at fixed x.
pub fn psi_r_time_jet(t: f64, x_norm: f64, tp: &TestFunctionParams, sigma: f64) -> Jet3 {
    let shift = x_norm.powf(2.0 * sigma / 3.0);
    let inv_r = 1.0 / tp.r_scale;
    let tau = Jet3 { v: (t + shift) * inv_r, d1: inv_r, d2: 0.0, d3: 0.0 };
    let chi = smooth_step_jet(tau);
    if chi.v <= 0.0 {
        Jet3::constant(0.0)
    } else {
        chi.powf(tp.m)
    }
}

/// Verify the dilation identity of the fractional Laplacian on the weight:
/// `(-Delta)^gamma (phi(./R))(x) = R^{-2 gamma} ((-Delta)^gamma phi)(x/R)`.
///
/// Both sides are evaluated spectrally with matched periodization: the left
/// on the (L, N) torus, the right on the (L/R, N) torus whose points are
/// exactly `x/R`. Returns the max deviation over the inner half of the grid,
/// relative to the max magnitude there.
pub fn frac_lap_scaling_check(
    gamma: f64,
    r_dilation: f64,
    q: f64,
    grid: &Arc<TorusGrid>,
) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::ParamDomain(format!("gamma must be >= 0, got {gamma}")));
    }
    if !(r_dilation > 0.0) {
        return Err(Error::ParamDomain("R must be > 0".into()));
    }
    if grid.dim() != 1 {
        return Err(Error::ParamDomain("scaling check implemented on 1-d grids".into()));
    }
    let l = grid.length();
    let n = grid.modes_per_axis();
    let phi = |x: f64| (1.0 + x * x).powf(-0.5 * q);
    // tail guard: the L2 mass of the dilated weight that falls outside the
    // box (what periodization wraps around), relative to the boxed mass
    let big = Field::from_fn_1d(grid, |x| phi(x / r_dilation))?;
    let boxed: f64 = big.data().iter().map(|v| v * v).sum::<f64>() * grid.dx();
    let mut f = |x: f64| {
        let v = phi(x / r_dilation);
        2.0 * v * v // both tails
    };
    let mut beyond = 0.0;
    let mut lo = 0.5 * l;
    for _ in 0..40 {
        let hi = 2.0 * lo;
        let r = crate::quad::adaptive(&mut f, lo, hi, &crate::quad::QuadOpts::default())?;
        beyond += r.value;
        if r.value < 1e-3 * beyond {
            break;
        }
        lo = hi;
    }
    let tail_mass = beyond / (boxed + 1e-300);
    if tail_mass > 1e-8 {
        return Err(Error::DomainTooSmall(format!(
            "dilated weight carries relative L2 tail mass {tail_mass:.3e} > 1e-8 beyond the box"
        )));
    }
    let small_grid = TorusGrid::new_1d(n, l / r_dilation)?;
    let small = Field::from_fn_1d(&small_grid, phi)?;
    let lhs = inverse(&fractional_laplacian(&forward(&big), gamma)?);
    let rhs = inverse(&fractional_laplacian(&forward(&small), gamma)?);
    let scale = r_dilation.powf(-2.0 * gamma);
    let mut dev = 0.0f64;
    let mut mag = 0.0f64;
    for j in 0..n {
        if grid.coord(j).abs() <= 0.25 * l {
            dev = dev.max((lhs.data()[j] - scale * rhs.data()[j]).abs());
            mag = mag.max(lhs.data()[j].abs());
        }
    }
    Ok(dev / mag.max(1e-300))
}

/// Fit the spatial decay exponent of `(-Delta)^sigma <x>^{-q}` on a large
/// torus and compare against the predicted exponent
/// `q_sigma = q + 2 sigma` (integer sigma) or `n + 2 (sigma - [sigma])`.
/// Passes when the fitted exponent is at least `q_sigma - 0.2`.
pub fn weight_decay_exponent_check(sigma: f64, q: f64, grid: &Arc<TorusGrid>) -> Result<(f64, bool)> {
    let n_dim = grid.dim() as f64;
    if !(q > n_dim) {
        return Err(Error::ParamDomain(format!("requires q > n, got q = {q}, n = {n_dim}")));
    }
    if grid.dim() != 1 {
        return Err(Error::ParamDomain("decay check implemented on 1-d grids".into()));
    }
    let l = grid.length();
    let phi = Field::from_fn_1d(grid, |x| (1.0 + x * x).powf(-0.5 * q))?;
    let g = inverse(&fractional_laplacian(&forward(&phi), sigma)?);
    // envelope fit over 1 << |x| << L/4
    let (x_lo, x_hi) = (4.0, 0.20 * l);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in 0..grid.total_points() {
        let x = grid.coord(j).abs();
        if x >= x_lo && x <= x_hi {
            let v = g.data()[j].abs();
            if v > 1e-300 {
                xs.push(x.ln());
                ys.push(v.ln());
            }
        }
    }
    if xs.len() < 16 {
        return Err(Error::DomainTooSmall("too few points in the envelope window".into()));
    }
    let (_, slope, _) = ols(&xs, &ys);
    let fitted = -slope;
    let frac = sigma - sigma.floor();
    let q_sigma = if frac == 0.0 { q + 2.0 * sigma } else { n_dim + 2.0 * frac };
    Ok((fitted, fitted >= q_sigma - 0.2))
}

/// Values of the blow-up functionals for one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub i_r: f64,
    pub weak_residual: f64,
    pub y_p: f64,
    /// `R^{(3n + 2 sigma)/(3 p') - 2 sigma} I_R^{1/p}` (unit constant).
    pub rhs_bound: f64,
}

/// `I_R = \int\int |u|^p phi_R zeta_R dx dt` by trapezoid in t over the
/// snapshots and the grid sum in x. The trajectory must cover the support
/// `[0, R^{2 sigma/3}]` of `zeta_R`.
pub fn i_r_functional(
    traj: &TrajectoryRecord,
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<f64> {
    let support_end = tp.r_scale.powf(2.0 * params.sigma / 3.0);
    require_coverage(traj, support_end)?;
    let grid = traj.fields[0].grid().clone();
    let weights = phi_weights(&grid, tp);
    let dv = grid.dx().powi(grid.dim() as i32);
    let mut integrand = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        let z = zeta_r(t, tp, params.sigma);
        if z == 0.0 {
            integrand.push(0.0);
            continue;
        }
        let f = &traj.fields[i];
        let s: f64 =
            f.data().iter().zip(&weights).map(|(&u, &w)| u.abs().powf(params.p) * w).sum();
        integrand.push(z * s * dv);
    }
    Ok(trapezoid(&traj.times, &integrand, support_end))
}

/// `Y_p(R) = \int_0^R y_p(r) r^{-1} dr` on a geometric r-grid, with
/// `y_p(r) = \int\int |u|^p [psi*_r]^{p - 2 sigma p / m} dx dt`.
pub fn y_p_functional(
    r_scale: f64,
    traj: &TrajectoryRecord,
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<f64> {
    if traj.fields.is_empty() {
        return Err(Error::InsufficientData("Y_p needs stored fields".into()));
    }
    let octaves = 12usize;
    let per_octave = 4usize;
    let count = octaves * per_octave + 1;
    let r_min = r_scale / 2f64.powi(octaves as i32);
    // trapezoid in log r of y_p(r)
    let mut total = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..count {
        let r = r_min * (r_scale / r_min).powf(i as f64 / (count - 1) as f64);
        let tpr = TestFunctionParams { r_scale: r, ..*tp };
        let y = y_p_inner(traj, &tpr, params)?;
        if let Some((lr_prev, y_prev)) = prev {
            total += 0.5 * (y + y_prev) * (r.ln() - lr_prev);
        }
        prev = Some((r.ln(), y));
    }
    Ok(total)
}

fn y_p_inner(
    traj: &TrajectoryRecord,
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<f64> {
    let grid = traj.fields[0].grid().clone();
    let dv = grid.dx().powi(grid.dim() as i32);
    let expo = params.p * (1.0 - 2.0 * params.sigma / tp.m);
    let mut integrand = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        let f = &traj.fields[i];
        let mut s = 0.0;
        for (j, &u) in f.data().iter().enumerate() {
            let x = coord_norm(&grid, j);
            let w = psi_star_r(t, x, tp, params.sigma);
            if w > 0.0 {
                s += u.abs().powf(params.p) * w.powf(expo);
            }
        }
        integrand.push(s * dv);
    }
    let end = *traj.times.last().unwrap();
    Ok(trapezoid(&traj.times, &integrand, end))
}

/// Residual of the weak-form identity with the separable test function
/// `phi_R(x) zeta_R(t)`:
/// data terms + nonlinearity = `\int\int u (-d_t^3 + A + eta A^{1/3} d_t^2
/// - eta A^{2/3} d_t)(phi zeta)`, normalized by the largest term.
pub fn weak_form_residual(
    traj: &TrajectoryRecord,
    data: (&Field, &Field, &Field),
    tp: &TestFunctionParams,
    params: &ModelParams,
    include_nonlinearity: bool,
) -> Result<f64> {
    let support_end = tp.r_scale.powf(2.0 * params.sigma / 3.0);
    require_coverage(traj, support_end)?;
    let grid = traj.fields[0].grid().clone();
    let dv = grid.dx().powi(grid.dim() as i32);

    // spatial multipliers applied to phi_R (spectral, exact on the torus)
    let phi = field_phi(&grid, tp)?;
    let phi_hat = forward(&phi);
    let a_phi = inverse(&fractional_laplacian(&phi_hat, params.sigma)?);
    let a13_phi = inverse(&fractional_laplacian(&phi_hat, params.sigma / 3.0)?);
    let a23_phi = inverse(&fractional_laplacian(&phi_hat, 2.0 * params.sigma / 3.0)?);

    let dot = |f: &Field, g: &Field| -> f64 {
        f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>() * dv
    };

    // data terms (the trajectory data already carries the epsilon scaling)
    let eps = params.epsilon;
    let term_data = eps
        * (params.eta * dot(data.0, &a23_phi)
            + params.eta * dot(data.1, &a13_phi)
            + dot(data.2, &phi));

    // time quadrature of the right-hand side and the nonlinearity
    let mut rhs_vals = Vec::with_capacity(traj.times.len());
    let mut nl_vals = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        let z = zeta_r_jet(t, tp, params.sigma);
        let f = &traj.fields[i];
        if z.v == 0.0 && z.d1 == 0.0 && z.d2 == 0.0 && z.d3 == 0.0 {
            rhs_vals.push(0.0);
            nl_vals.push(0.0);
            continue;
        }
        let rhs = -z.d3 * dot(f, &phi) + z.v * dot(f, &a_phi)
            + params.eta * z.d2 * dot(f, &a13_phi)
            - params.eta * z.d1 * dot(f, &a23_phi);
        rhs_vals.push(rhs);
        if include_nonlinearity {
            let s: f64 = f
                .data()
                .iter()
                .zip(phi.data())
                .map(|(&u, &w)| u.abs().powf(params.p) * w)
                .sum();
            nl_vals.push(z.v * s * dv);
        } else {
            nl_vals.push(0.0);
        }
    }
    let term_rhs = trapezoid(&traj.times, &rhs_vals, support_end);
    let term_nl = trapezoid(&traj.times, &nl_vals, support_end);

    let lhs = term_data + term_nl;
    let scale = term_data.abs().max(term_nl.abs()).max(term_rhs.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - term_rhs).abs() / scale)
}

/// `\int\int |u|^p psi_R dx dt` over the trajectory (the space-time-cutoff
/// companion of the auxiliary functional).
pub fn psi_weighted_power_integral(
    traj: &TrajectoryRecord,
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<f64> {
    if traj.fields.is_empty() {
        return Err(Error::InsufficientData("needs stored fields".into()));
    }
    let grid = traj.fields[0].grid().clone();
    let dv = grid.dx().powi(grid.dim() as i32);
    let mut integrand = Vec::with_capacity(traj.times.len());
    for (i, &t) in traj.times.iter().enumerate() {
        let f = &traj.fields[i];
        let mut s = 0.0;
        for (j, &u) in f.data().iter().enumerate() {
            let w = psi_r(t, coord_norm(&grid, j), tp, params.sigma);
            if w > 0.0 {
                s += u.abs().powf(params.p) * w;
            }
        }
        integrand.push(s * dv);
    }
    let end = *traj.times.last().unwrap();
    Ok(trapezoid(&traj.times, &integrand, end))
}

/// The weighted data term of the weak identity:
/// `eps \int (eta u0 A^{2/3} phi_R + eta u1 A^{1/3} phi_R + u2 phi_R) dx`.
pub fn weak_data_term(
    data: (&Field, &Field, &Field),
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<f64> {
    let grid = data.0.grid().clone();
    let dv = grid.dx().powi(grid.dim() as i32);
    let phi = field_phi(&grid, tp)?;
    let phi_hat = forward(&phi);
    let a13_phi = inverse(&fractional_laplacian(&phi_hat, params.sigma / 3.0)?);
    let a23_phi = inverse(&fractional_laplacian(&phi_hat, 2.0 * params.sigma / 3.0)?);
    let dot = |f: &Field, g: &Field| -> f64 {
        f.data().iter().zip(g.data()).map(|(a, b)| a * b).sum::<f64>() * dv
    };
    Ok(params.epsilon
        * (params.eta * dot(data.0, &a23_phi)
            + params.eta * dot(data.1, &a13_phi)
            + dot(data.2, &phi)))
}

/// Combined functional evaluation for reports.
pub fn functional_values(
    traj: &TrajectoryRecord,
    data: (&Field, &Field, &Field),
    tp: &TestFunctionParams,
    params: &ModelParams,
) -> Result<FunctionalValues> {
    let i_r = i_r_functional(traj, tp, params)?;
    let y_p = y_p_functional(tp.r_scale, traj, tp, params)?;
    let weak = weak_form_residual(traj, data, tp, params, true)?;
    let p_conj = params.p / (params.p - 1.0);
    let expo = (3.0 * params.n + 2.0 * params.sigma) / (3.0 * p_conj) - 2.0 * params.sigma;
    Ok(FunctionalValues {
        i_r,
        weak_residual: weak,
        y_p,
        rhs_bound: tp.r_scale.powf(expo) * i_r.powf(1.0 / params.p),
    })
}

fn require_coverage(traj: &TrajectoryRecord, t_end: f64) -> Result<()> {
    if traj.fields.is_empty() {
        return Err(Error::InsufficientData(
            "functional evaluation needs a trajectory with stored fields".into(),
        ));
    }
    if traj.fields.len() != traj.times.len() {
        return Err(Error::ShapeMismatch("stored fields do not match snapshot times".into()));
    }
    let last = *traj.times.last().unwrap();
    if last < t_end {
        return Err(Error::InsufficientData(format!(
            "trajectory covers [0, {last:.3}] but the functional needs [0, {t_end:.3}]"
        )));
    }
    // dense enough for the trapezoid in t
    let max_gap = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
    if max_gap > t_end / 16.0 {
        return Err(Error::InsufficientData(format!(
            "snapshot spacing {max_gap:.4} too coarse for the time quadrature over [0, {t_end:.3}]"
        )));
    }
    Ok(())
}

fn coord_norm(grid: &TorusGrid, flat: usize) -> f64 {
    match grid.dim() {
        1 => grid.coord(flat).abs(),
        2 => {
            let n = grid.modes_per_axis();
            let x = grid.coord(flat / n);
            let y = grid.coord(flat % n);
            (x * x + y * y).sqrt()
        }
        _ => unreachable!(),
    }
}

fn phi_weights(grid: &Arc<TorusGrid>, tp: &TestFunctionParams) -> Vec<f64> {
    (0..grid.total_points()).map(|j| phi_r(coord_norm(grid, j), tp)).collect()
}

fn field_phi(grid: &Arc<TorusGrid>, tp: &TestFunctionParams) -> Result<Field> {
    let tp = *tp;
    match grid.dim() {
        1 => Field::from_fn_1d(grid, move |x| phi_r(x.abs(), &tp)),
        _ => Field::from_fn_2d(grid, move |x, y| phi_r((x * x + y * y).sqrt(), &tp)),
    }
}

/// Trapezoid rule over the snapshot times, truncated at `t_end`.
fn trapezoid(times: &[f64], values: &[f64], t_end: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..times.len() {
        let (t0, t1) = (times[i - 1], times[i]);
        if t0 >= t_end {
            break;
        }
        let hi = t1.min(t_end);
        // linear interpolation at the truncation point
        let v1 = if t1 <= t_end {
            values[i]
        } else {
            let w = (hi - t0) / (t1 - t0);
            values[i - 1] * (1.0 - w) + values[i] * w
        };
        acc += 0.5 * (values[i - 1] + v1) * (hi - t0);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{integrate, MildSolverConfig, SnapshotSchedule};

    fn params_sigma(sigma: f64) -> ModelParams {
        ModelParams::new(1.0, sigma, 2.0, 2.0, 0.1).unwrap()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(0.0), 1.0);
        assert_eq!(smooth_step(0.5), 1.0);
        assert_eq!(smooth_step(1.0), 0.0);
        assert_eq!(smooth_step(5.0), 0.0);
        let mut prev = 1.0;
        for i in 1..40 {
            let v = smooth_step(0.5 + 0.5 * i as f64 / 40.0);
            assert!(v <= prev + 1e-12, "must be non-increasing");
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        // jets match central differences in the glue region
        let j = smooth_step_jet(Jet3::variable(0.73));
        let h = 1e-5;
        let d1 = (smooth_step(0.73 + h) - smooth_step(0.73 - h)) / (2.0 * h);
        assert!((j.d1 - d1).abs() < 1e-7, "{} vs {}", j.d1, d1);
        let d2 =
            (smooth_step(0.73 + h) - 2.0 * smooth_step(0.73) + smooth_step(0.73 - h)) / (h * h);
        assert!((j.d2 - d2).abs() < 1e-4 * d2.abs().max(1.0));
    }

    #[test]
    fn phi_and_zeta_examples() {
        let p = params_sigma(1.0);
        let tp = TestFunctionParams::new(&p, 4.0).unwrap();
        assert_eq!(phi_r(0.0, &tp), 1.0);
        // at |x| = R K the weight is 2^{-(n + 2 s_sigma)/2}
        let at_rk = phi_r(tp.r_scale * tp.k_dilation, &tp);
        assert!((at_rk - 2f64.powf(-0.5 * tp.q)).abs() < 1e-14);
        // zeta = 1 until R^{2 sigma/3}/2
        let half_support = 0.5 * tp.r_scale.powf(2.0 / 3.0);
        assert_eq!(zeta_r(0.99 * half_support, &tp, p.sigma), 1.0);
        assert_eq!(zeta_r(2.0 * half_support + 0.1, &tp, p.sigma), 0.0);
    }

    #[test]
    fn psi_support() {
        let p = params_sigma(1.5);
        let tp = TestFunctionParams::new(&p, 8.0).unwrap();
        assert_eq!(psi_r(0.0, 0.0, &tp, p.sigma), 1.0);
        assert_eq!(psi_star_r(0.0, 0.0, &tp, p.sigma), 0.0);
        // psi vanishes once t >= R
        assert_eq!(psi_r(tp.r_scale, 0.0, &tp, p.sigma), 0.0);
        // psi* lives on R/2 < t + |x|^{2 sigma/3} < R
        let sigma = p.sigma;
        assert_eq!(psi_star_r(0.2 * tp.r_scale, 0.0, &tp, sigma), 0.0);
        assert!(psi_star_r(0.6 * tp.r_scale, 0.0, &tp, sigma) > 0.0);
        assert_eq!(psi_star_r(1.1 * tp.r_scale, 0.0, &tp, sigma), 0.0);
        // psi and psi* agree wherever tau >= 1/2
        for &frac in &[0.55, 0.7, 0.9] {
            let t = frac * tp.r_scale;
            assert!((psi_r(t, 0.0, &tp, sigma) - psi_star_r(t, 0.0, &tp, sigma)).abs() < 1e-15);
        }
        // time jets of psi match central differences
        let t0 = 0.7 * tp.r_scale;
        let j = psi_r_time_jet(t0, 1.0, &tp, sigma);
        let h = 1e-4 * tp.r_scale;
        let f = |t: f64| psi_r(t, 1.0, &tp, sigma);
        let d1 = (f(t0 + h) - f(t0 - h)) / (2.0 * h);
        assert!((j.d1 - d1).abs() < 1e-5 * d1.abs().max(1e-3), "{} vs {}", j.d1, d1);
    }

    #[test]
    fn scaling_identity_spectral() {
        let grid = TorusGrid::new_1d(1 << 14, 400.0).unwrap();
        // R = 1 is the identity up to roundoff
        let d = frac_lap_scaling_check(1.0, 1.0, 3.0, &grid).unwrap();
        assert!(d < 1e-12, "R=1 deviation {d}");
        for &gamma in &[0.5, 1.0, 1.5] {
            for &r in &[2.0, 4.0] {
                let d = frac_lap_scaling_check(gamma, r, 3.0, &grid).unwrap();
                assert!(d < 1e-6, "gamma={gamma} R={r}: deviation {d}");
            }
        }
    }

    #[test]
    fn scaling_check_domain_guard() {
        // a wide weight on a small box trips the tail guard
        let grid = TorusGrid::new_1d(256, 20.0).unwrap();
        let e = frac_lap_scaling_check(1.0, 4.0, 1.2, &grid);
        assert!(matches!(e, Err(Error::DomainTooSmall(_))), "{e:?}");
    }

    #[test]
    fn weight_decay_exponents() {
        let grid = TorusGrid::new_1d(1 << 14, 400.0).unwrap();
        // integer sigma: exponent q + 2 sigma = 5
        let (fit, pass) = weight_decay_exponent_check(1.0, 3.0, &grid).unwrap();
        assert!(pass, "fitted {fit}");
        assert!((fit - 5.0).abs() < 0.2, "fitted {fit} vs 5");
        // fractional sigma: exponent n + 2 (sigma - [sigma]) = 2
        let (fit, pass) = weight_decay_exponent_check(0.5, 3.0, &grid).unwrap();
        assert!(pass, "fitted {fit}");
        assert!((fit - 2.0).abs() < 0.2, "fitted {fit} vs 2");
        // q <= n rejected
        assert!(weight_decay_exponent_check(1.0, 0.5, &grid).is_err());
    }

    fn smooth_semilinear_run(
        sigma: f64,
        p_exp: f64,
        eps: f64,
        t_end: f64,
        n_grid: usize,
        l: f64,
    ) -> (ModelParams, TrajectoryRecord, Field, Field, Field) {
        let grid = TorusGrid::new_1d(n_grid, l).unwrap();
        let g = Field::gaussian(&grid, 1.0, 1.0);
        let z = Field::zeros(&grid);
        let params = ModelParams::new(1.0, sigma, 2.0, p_exp, eps).unwrap();
        let cfg = MildSolverConfig {
            dt: t_end / 400.0,
            max_time: t_end,
            store_fields: true,
            snapshots: SnapshotSchedule::Uniform { dt_out: t_end / 200.0 },
            max_snapshots: 260,
            ..Default::default()
        };
        let (traj, rep) = integrate(&params, (&z, &z, &g), &cfg).unwrap();
        assert!(!rep.blew_up);
        (params, traj, z.clone(), z, g)
    }

    #[test]
    fn weak_identity_on_linear_run() {
        // nonlinearity off, |u|^p term dropped: residual < 1e-3
        let grid = TorusGrid::new_1d(1024, 100.0).unwrap();
        let g = Field::gaussian(&grid, 1.0, 1.0);
        let z = Field::zeros(&grid);
        let params = ModelParams::new(1.0, 1.0, 2.0, 3.0, 0.1).unwrap();
        let t_end = 4.2;
        let cfg = MildSolverConfig {
            dt: 0.01,
            max_time: t_end,
            nonlin_coeff: 0.0,
            store_fields: true,
            snapshots: SnapshotSchedule::Uniform { dt_out: 0.02 },
            max_snapshots: 300,
            ..Default::default()
        };
        let (traj, _) = integrate(&params, (&z, &z, &g), &cfg).unwrap();
        let tp = TestFunctionParams::new(&params, 8.0).unwrap(); // support [0, 4]
        let res = weak_form_residual(&traj, (&z, &z, &g), &tp, &params, false).unwrap();
        assert!(res < 1e-3, "linear weak-form residual {res}");
    }

    #[test]
    fn weak_identity_on_semilinear_run() {
        // sigma = 3, n = 1, eta = 2, p = 3, small eps
        let (params, traj, u0, u1, u2) = smooth_semilinear_run(3.0, 3.0, 0.05, 4.2, 2048, 200.0);
        let tp = TestFunctionParams::new(&params, 2.0).unwrap(); // support [0, R^2] = [0, 4]
        let res = weak_form_residual(&traj, (&u0, &u1, &u2), &tp, &params, true).unwrap();
        assert!(res < 1e-3, "semilinear weak-form residual {res}");
    }

    #[test]
    fn i_r_separable_oracle() {
        // frozen u = 1, p = 2: I_R = (int phi_R dx)(int zeta_R dt)
        let grid = TorusGrid::new_1d(2048, 400.0).unwrap();
        let params = ModelParams::new(1.0, 1.0, 2.0, 2.0, 1.0).unwrap();
        let tp = TestFunctionParams::new(&params, 3.0).unwrap();
        let support = tp.r_scale.powf(2.0 / 3.0);
        let times: Vec<f64> = (0..=300).map(|i| support * 1.02 * i as f64 / 300.0).collect();
        let one = Field::from_fn_1d(&grid, |_| 1.0).unwrap();
        let traj = TrajectoryRecord {
            times: times.clone(),
            fields: times.iter().map(|_| one.clone()).collect(),
            ..Default::default()
        };
        let got = i_r_functional(&traj, &tp, &params).unwrap();
        // separable product, each factor by fine quadrature
        let nx = 200_000;
        let ix: f64 = (0..nx)
            .map(|i| phi_r((-200.0 + 400.0 * (i as f64 + 0.5) / nx as f64).abs(), &tp))
            .sum::<f64>()
            * (400.0 / nx as f64);
        let nt = 200_000;
        let it: f64 = (0..nt)
            .map(|i| zeta_r(support * (i as f64 + 0.5) / nt as f64, &tp, params.sigma))
            .sum::<f64>()
            * (support / nt as f64);
        let want = ix * it;
        assert!((got - want).abs() < 1e-6 * want, "{got} vs {want}");
    }

    #[test]
    fn y_p_monotone_in_r() {
        let (params, traj, ..) = smooth_semilinear_run(1.0, 2.0, 0.3, 4.0, 256, 60.0);
        let tp = TestFunctionParams::new(&params, 2.0).unwrap();
        let y1 = y_p_functional(1.0, &traj, &tp, &params).unwrap();
        let y2 = y_p_functional(2.0, &traj, &tp, &params).unwrap();
        let y3 = y_p_functional(4.0, &traj, &tp, &params).unwrap();
        assert!(y1 >= 0.0);
        assert!(y2 >= y1 - 1e-15, "{y2} < {y1}");
        assert!(y3 >= y2 - 1e-15, "{y3} < {y2}");
    }

    #[test]
    fn zero_solution_zero_functionals() {
        let grid = TorusGrid::new_1d(128, 50.0).unwrap();
        let z = Field::zeros(&grid);
        let params = ModelParams::new(1.0, 1.0, 2.0, 2.0, 0.1).unwrap();
        let tp = TestFunctionParams::new(&params, 2.0).unwrap();
        let support = tp.r_scale.powf(2.0 / 3.0);
        let times: Vec<f64> = (0..=64).map(|i| support * 1.05 * i as f64 / 64.0).collect();
        let traj = TrajectoryRecord {
            times: times.clone(),
            fields: times.iter().map(|_| z.clone()).collect(),
            ..Default::default()
        };
        assert_eq!(i_r_functional(&traj, &tp, &params).unwrap(), 0.0);
        assert_eq!(y_p_functional(2.0, &traj, &tp, &params).unwrap(), 0.0);
        let res = weak_form_residual(&traj, (&z, &z, &z), &tp, &params, true).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn blowup_chain_constant_and_y_p_bound() {
        // subcritical blow-up trajectory (n = 1, sigma = 1, eta = 2, p = 2)
        let grid = TorusGrid::new_1d(256, 100.0).unwrap();
        let g = Field::gaussian(&grid, 1.0, 1.0);
        let z = Field::zeros(&grid);
        let params = ModelParams::new(1.0, 1.0, 2.0, 2.0, 0.5).unwrap();
        let cfg = crate::nonlinear::MildSolverConfig {
            dt: 0.02,
            max_time: 60.0,
            store_fields: true,
            snapshots: crate::nonlinear::SnapshotSchedule::Uniform { dt_out: 0.05 },
            max_snapshots: 2048,
            check_resolution: false,
            ..Default::default()
        };
        let (traj, rep) = crate::nonlinear::integrate(&params, (&z, &z, &g), &cfg).unwrap();
        assert!(rep.blew_up);
        let lifespan = rep.lifespan_estimate.unwrap();

        // chain constant (data term + I_R) / (R^{(3n+2s)/(3p') - 2s} I_R^{1/p})
        // is stable across R-doubling while R stays below the lifespan scale
        let chain = |r_scale: f64| {
            let tp = TestFunctionParams::new(&params, r_scale).unwrap();
            let i_r = i_r_functional(&traj, &tp, &params).unwrap();
            let data = weak_data_term((&z, &z, &g), &tp, &params).unwrap();
            let p_conj = params.p / (params.p - 1.0);
            let expo =
                (3.0 * params.n + 2.0 * params.sigma) / (3.0 * p_conj) - 2.0 * params.sigma;
            (data + i_r) / (r_scale.powf(expo) * i_r.powf(1.0 / params.p))
        };
        // the constant is stable while R stays below the lifespan^{2 sigma/3}
        // scale; beyond it I_R saturates the inequality and C grows
        let r1 = 0.5 * lifespan.powf(2.0 * params.sigma / 3.0);
        let (c1, c2) = (chain(r1), chain(2.0 * r1));
        let ratio = c2 / c1;
        assert!(
            (1.0 / 1.5..=1.5).contains(&ratio),
            "chain constant moved too much across R doubling: {c1} -> {c2}"
        );

        // Y_p(R) <= ln 2 * int int |u|^p psi_R (constant independent of R)
        let tp = TestFunctionParams::new(&params, r1).unwrap();
        for &r in &[r1, 2.0 * r1] {
            let y = y_p_functional(r, &traj, &tp, &params).unwrap();
            let tpr = TestFunctionParams { r_scale: r, ..tp };
            let psi_int = psi_weighted_power_integral(&traj, &tpr, &params).unwrap();
            let c = y / psi_int.max(1e-300);
            assert!(c <= std::f64::consts::LN_2 * 1.05, "R = {r}: Y_p/psi-integral = {c}");
        }
    }

    #[test]
    fn coverage_errors() {
        let grid = TorusGrid::new_1d(64, 50.0).unwrap();
        let z = Field::zeros(&grid);
        let params = ModelParams::new(1.0, 1.0, 2.0, 2.0, 0.1).unwrap();
        let tp = TestFunctionParams::new(&params, 100.0).unwrap();
        let traj = TrajectoryRecord {
            times: vec![0.0, 1.0],
            fields: vec![z.clone(), z.clone()],
            ..Default::default()
        };
        assert!(matches!(i_r_functional(&traj, &tp, &params), Err(Error::InsufficientData(_))));
    }
}

