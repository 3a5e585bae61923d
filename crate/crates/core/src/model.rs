//! Problem parameters, eta-regime classification and the closed-form
//! exponent formulas.
//!
//! Everything here is a pure function of the parameter tuple
//! `(n, sigma, eta, p, epsilon)`; no grids, no quadrature.

use crate::error::{Error, Result};
use crate::rational::{ExtendedRational, Rational};
use serde::{Deserialize, Serialize};

/// Relative tolerance used by the threshold comparisons at `eta = 1`,
/// `eta = 3` and `n = 8 sigma / 3`.
///
/// The trichotomies are exact, but `8/3` is not representable in binary, so
/// literal `==` can never fire for inputs like `n = 8.0/3.0, sigma = 1`. The
/// default is a pure roundoff allowance; sweeps that want coarse snapping opt
/// in through the `*_with_tol` variants.
pub const THRESHOLD_EPS: f64 = 16.0 * f64::EPSILON;

fn close_rel(a: f64, b: f64, tol_rel: f64) -> bool {
    (a - b).abs() <= tol_rel * a.abs().max(b.abs()).max(1.0)
}

/// Extended positive real: finite or the `+infinity` produced by the
/// convention `1/(x)_+ = infinity` for `x <= 0`. A dedicated variant, never a
/// sentinel float, so sweeps cannot silently produce NaNs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Extended {
    Finite(f64),
    Unbounded,
}

impl Extended {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(*v),
            Extended::Unbounded => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Extended::Finite(v) => *v,
            Extended::Unbounded => f64::INFINITY,
        }
    }

    /// `value < self`, with `Unbounded` larger than every finite value.
    pub fn greater_than(&self, value: f64) -> bool {
        match self {
            Extended::Finite(v) => value < *v,
            Extended::Unbounded => true,
        }
    }
}

/// The parameter tuple of the Cauchy problem.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    /// Spatial dimension. Positive real in quadrature mode; 1 or 2 in torus mode.
    pub n: f64,
    /// Fractional order sigma > 0 of the dissipation operator.
    pub sigma: f64,
    /// Damping parameter eta > 0.
    pub eta: f64,
    /// Nonlinearity exponent p > 1.
    pub p: f64,
    /// Initial-data size epsilon > 0.
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(n: f64, sigma: f64, eta: f64, p: f64, epsilon: f64) -> Result<Self> {
        if !(n > 0.0) {
            return Err(Error::ParamDomain(format!("n must be > 0, got {n}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::ParamDomain(format!("sigma must be > 0, got {sigma}")));
        }
        if !(eta > 0.0) {
            return Err(Error::ParamDomain(format!("eta must be > 0, got {eta}")));
        }
        if !(p > 1.0) {
            return Err(Error::ParamDomain(format!("p must be > 1, got {p}")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::ParamDomain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(ModelParams { n, sigma, eta, p, epsilon })
    }

    /// Torus runs are restricted to n in {1, 2}.
    pub fn require_torus_mode(&self) -> Result<usize> {
        if self.n == 1.0 {
            Ok(1)
        } else if self.n == 2.0 {
            Ok(2)
        } else {
            Err(Error::ParamDomain(format!("torus mode requires n in {{1, 2}}, got {}", self.n)))
        }
    }

    /// Exponent `a = r^{2 sigma / 3}` scale helper.
    pub fn freq_power(&self) -> f64 {
        2.0 * self.sigma / 3.0
    }

    pub fn regime_info(&self) -> RegimeInfo {
        let mut info = classify_eta(self.eta).expect("eta > 0 validated at construction");
        info.dimension_window_ok = Some(dimension_window_check(self.n, self.sigma, self.eta));
        info
    }

    /// Exponent table at this parameter point; `lifespan_exp_subcrit` is
    /// filled only when `1 < p < p_crit`.
    pub fn exponent_table(&self) -> Result<ExponentTable> {
        let mut table = decay_rates(self.n, self.sigma, self.eta)?;
        if table.p_crit.greater_than(self.p) {
            table.lifespan_exp_subcrit = lifespan_exponent(self.n, self.sigma, self.p).ok();
        }
        Ok(table)
    }

    /// Which global-existence window the point (n, sigma) falls in.
    pub fn existence_window(&self) -> ExistenceWindow {
        existence_window(self.n, self.sigma)
    }
}

/// Sobolev-stability class of the linearized problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    /// eta < 1: Sobolev data is unstable (well-posed only with
    /// Gevrey-Sobolev data).
    IllPosedSobolev,
    /// eta = 1: bounded oscillation, no smoothing.
    MarginallyStable,
    /// eta > 1: exponential high-frequency decay (Gevrey smoothing).
    GevreySmoothing,
}

/// Shape of the large-time asymptotic profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// eta < 3: oscillatory (diffusion-waves) profile with singular prefactor.
    DiffusionWaves,
    /// eta = 3: confluent roots, polynomial-in-t profile without singularity.
    DegenerateDiffusion,
    /// eta > 3: pure diffusion profile with singular prefactor.
    PureDiffusion,
}

/// Result of the dimension-window check, carrying the violated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCheck {
    pub ok: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeInfo {
    pub stability: Stability,
    pub profile: Profile,
    /// None when classification was done from eta alone.
    pub dimension_window_ok: Option<WindowCheck>,
}

/// Where (n, sigma) sits relative to the small-data global-existence
/// window of the supercritical theory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExistenceWindow {
    /// 4 sigma / 3 < n <= 10 sigma / 3: the window this laboratory verifies.
    GlobalExistence,
    /// 10 sigma / 3 < n <= 16 sigma / 3: reported as an unverified regime.
    Unverified,
    /// Everything else.
    Outside,
}

pub fn existence_window(n: f64, sigma: f64) -> ExistenceWindow {
    if n > 4.0 * sigma / 3.0 && n <= 10.0 * sigma / 3.0 {
        ExistenceWindow::GlobalExistence
    } else if n > 10.0 * sigma / 3.0 && n <= 16.0 * sigma / 3.0 {
        ExistenceWindow::Unverified
    } else {
        ExistenceWindow::Outside
    }
}

/// Stability/profile classification with the default (roundoff-only)
/// threshold tolerance.
pub fn classify_eta(eta: f64) -> Result<RegimeInfo> {
    classify_eta_with_tol(eta, THRESHOLD_EPS)
}

/// Classification with an explicit relative snapping tolerance at the
/// thresholds 1 and 3.
pub fn classify_eta_with_tol(eta: f64, tol_rel: f64) -> Result<RegimeInfo> {
    if !(eta > 0.0) {
        return Err(Error::ParamDomain(format!("eta must be > 0, got {eta}")));
    }
    let stability = if close_rel(eta, 1.0, tol_rel) {
        Stability::MarginallyStable
    } else if eta < 1.0 {
        Stability::IllPosedSobolev
    } else {
        Stability::GevreySmoothing
    };
    let profile = if close_rel(eta, 3.0, tol_rel) {
        Profile::DegenerateDiffusion
    } else if eta < 3.0 {
        Profile::DiffusionWaves
    } else {
        Profile::PureDiffusion
    };
    Ok(RegimeInfo { stability, profile, dimension_window_ok: None })
}

/// Critical exponent `p_crit(n, sigma) = 1 + 6 sigma / (3n - 4 sigma)_+`,
/// with `1/(x)_+ = infinity` for `x <= 0`.
pub fn critical_exponent(n: f64, sigma: f64) -> Result<Extended> {
    if !(n > 0.0 && sigma > 0.0) {
        return Err(Error::ParamDomain(format!("need n > 0 and sigma > 0, got ({n}, {sigma})")));
    }
    let denom = 3.0 * n - 4.0 * sigma;
    if denom <= 0.0 {
        Ok(Extended::Unbounded)
    } else {
        Ok(Extended::Finite(1.0 + 6.0 * sigma / denom))
    }
}

/// Exact-rational critical exponent.
pub fn critical_exponent_exact(n: Rational, sigma: Rational) -> ExtendedRational {
    assert!(n.is_positive() && sigma.is_positive());
    let denom = Rational::integer(3).mul(n).sub(Rational::integer(4).mul(sigma));
    if denom.is_positive() {
        ExtendedRational::Finite(
            Rational::integer(1).add(Rational::integer(6).mul(sigma).div(denom)),
        )
    } else {
        ExtendedRational::Unbounded
    }
}

/// Subcritical lifespan exponent: `T_eps ~ eps^gamma` with
/// `gamma = -2 sigma / (6 sigma p' - (3n + 2 sigma))`, `p' = p/(p-1)`.
pub fn lifespan_exponent(n: f64, sigma: f64, p: f64) -> Result<f64> {
    if !(n > 0.0 && sigma > 0.0 && p > 1.0) {
        return Err(Error::ParamDomain(format!(
            "need n > 0, sigma > 0, p > 1, got ({n}, {sigma}, {p})"
        )));
    }
    let pc = critical_exponent(n, sigma)?;
    if !pc.greater_than(p) {
        return Err(Error::Regime(format!(
            "lifespan power law requires p < p_crit = {}, got p = {p}",
            pc.to_f64()
        )));
    }
    let p_conj = p / (p - 1.0);
    let denom = 6.0 * sigma * p_conj - (3.0 * n + 2.0 * sigma);
    if denom == 0.0 {
        return Err(Error::Regime("degenerate exponent: 6 sigma p' = 3n + 2 sigma".into()));
    }
    Ok(-2.0 * sigma / denom)
}

/// Exact-rational lifespan exponent (same preconditions).
pub fn lifespan_exponent_exact(n: Rational, sigma: Rational, p: Rational) -> Result<Rational> {
    let one = Rational::integer(1);
    if !p.sub(one).is_positive() {
        return Err(Error::ParamDomain("p must be > 1".into()));
    }
    match critical_exponent_exact(n, sigma) {
        ExtendedRational::Finite(pc) if !(p < pc) => {
            return Err(Error::Regime(format!("requires p < p_crit = {pc}")));
        }
        _ => {}
    }
    let p_conj = p.div(p.sub(one));
    let denom = Rational::integer(6)
        .mul(sigma)
        .mul(p_conj)
        .sub(Rational::integer(3).mul(n).add(Rational::integer(2).mul(sigma)));
    if denom.is_zero() {
        return Err(Error::Regime("degenerate exponent: 6 sigma p' = 3n + 2 sigma".into()));
    }
    Ok(Rational::integer(-2).mul(sigma).div(denom))
}

/// Dimension-window restriction for the sharp linear estimates:
/// `n > 4 sigma/3` for eta in (1,3); any `n > 0` for eta = 3;
/// `n > 4 sigma/3` and `n != 8 sigma/3` for eta in (3, infinity).
pub fn dimension_window_check(n: f64, sigma: f64, eta: f64) -> WindowCheck {
    dimension_window_check_with_tol(n, sigma, eta, THRESHOLD_EPS)
}

pub fn dimension_window_check_with_tol(n: f64, sigma: f64, eta: f64, tol_rel: f64) -> WindowCheck {
    let lower = 4.0 * sigma / 3.0;
    let at3 = close_rel(eta, 3.0, tol_rel);
    if at3 {
        return WindowCheck { ok: n > 0.0, reason: String::new() };
    }
    if eta <= 1.0 || close_rel(eta, 1.0, tol_rel) {
        return WindowCheck {
            ok: false,
            reason: format!("window defined for eta > 1, got eta = {eta}"),
        };
    }
    if !(n > lower) {
        return WindowCheck {
            ok: false,
            reason: format!("n = {n} violates n > 4 sigma/3 = {lower}"),
        };
    }
    if eta > 3.0 && close_rel(3.0 * n, 8.0 * sigma, tol_rel) {
        return WindowCheck { ok: false, reason: "n = 8 sigma/3 excluded".into() };
    }
    WindowCheck { ok: true, reason: String::new() }
}

/// The closed-form decay/exponent table at (n, sigma, eta).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentTable {
    pub p_crit: Extended,
    /// Filled by [`ModelParams::exponent_table`] when `1 < p < p_crit`.
    pub lifespan_exp_subcrit: Option<f64>,
    /// `(3n - 8 sigma)/(4 sigma)`; the L2 norm behaves like `(1+t)^{-l2_rate}`.
    pub l2_rate: f64,
    /// `3n / (4 sigma)`; rate of the homogeneous `H^{4 sigma/3}` norm.
    pub hs_rate: f64,
    /// Rate gain from subtracting the asymptotic profile (one full power).
    pub refined_gain: f64,
    /// True in the borderline case `n = 8 sigma/3` with `eta > 3`, where the
    /// L2 estimate picks up a `ln(e + t)` loss.
    pub log_loss_flag: bool,
}

/// Decay rates of the sharp linear estimates; errors outside the dimension
/// window unless the logarithmic borderline case applies.
pub fn decay_rates(n: f64, sigma: f64, eta: f64) -> Result<ExponentTable> {
    if !(n > 0.0 && sigma > 0.0 && eta > 0.0) {
        return Err(Error::ParamDomain(format!(
            "need positive (n, sigma, eta), got ({n}, {sigma}, {eta})"
        )));
    }
    let window = dimension_window_check(n, sigma, eta);
    let log_loss =
        close_rel(3.0 * n, 8.0 * sigma, THRESHOLD_EPS) && eta > 3.0 && !close_rel(eta, 3.0, THRESHOLD_EPS);
    if !window.ok && !log_loss {
        return Err(Error::Window(window.reason));
    }
    Ok(ExponentTable {
        p_crit: critical_exponent(n, sigma)?,
        lifespan_exp_subcrit: None,
        l2_rate: (3.0 * n - 8.0 * sigma) / (4.0 * sigma),
        hs_rate: 3.0 * n / (4.0 * sigma),
        refined_gain: 1.0,
        log_loss_flag: log_loss,
    })
}

/// Closed interval of exponents admissible for the nonlinearity estimates:
/// `[2, 3n/(3n - 8 sigma)_+]`, upper endpoint unbounded when `3n <= 8 sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PInterval {
    pub lo: f64,
    pub hi: Extended,
}

pub fn gn_admissible_p(n: f64, sigma: f64) -> Result<PInterval> {
    if !(n >= 1.0 && n <= 16.0 * sigma / 3.0) {
        return Err(Error::ParamDomain(format!(
            "admissible-exponent interval needs 1 <= n <= 16 sigma/3, got (n, sigma) = ({n}, {sigma})"
        )));
    }
    let denom = 3.0 * n - 8.0 * sigma;
    let hi = if denom <= 0.0 { Extended::Unbounded } else { Extended::Finite(3.0 * n / denom) };
    if let Extended::Finite(h) = hi {
        if h < 2.0 {
            return Err(Error::Regime(format!("empty admissible interval: upper endpoint {h} < 2")));
        }
    }
    Ok(PInterval { lo: 2.0, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    #[test]
    fn classify_examples() {
        let r = classify_eta(0.5).unwrap();
        assert_eq!(r.stability, Stability::IllPosedSobolev);
        assert_eq!(r.profile, Profile::DiffusionWaves);

        let r = classify_eta(3.0).unwrap();
        assert_eq!(r.stability, Stability::GevreySmoothing);
        assert_eq!(r.profile, Profile::DegenerateDiffusion);

        let r = classify_eta(1.0).unwrap();
        assert_eq!(r.stability, Stability::MarginallyStable);
        assert_eq!(r.profile, Profile::DiffusionWaves);

        assert!(classify_eta(0.0).is_err());
        assert!(classify_eta(-2.0).is_err());
    }

    #[test]
    fn classify_is_piecewise_constant_with_breakpoints_1_and_3() {
        let d = 1e-9;
        assert_eq!(classify_eta(1.0 - d).unwrap().stability, Stability::IllPosedSobolev);
        assert_eq!(classify_eta(1.0 + d).unwrap().stability, Stability::GevreySmoothing);
        assert_eq!(classify_eta(3.0 - d).unwrap().profile, Profile::DiffusionWaves);
        assert_eq!(classify_eta(3.0 + d).unwrap().profile, Profile::PureDiffusion);
        // interior points share the class of their interval
        for eta in [0.1, 0.5, 0.99] {
            assert_eq!(classify_eta(eta).unwrap().stability, Stability::IllPosedSobolev);
        }
        for eta in [1.1, 2.0, 2.9, 3.5, 10.0] {
            assert_eq!(classify_eta(eta).unwrap().stability, Stability::GevreySmoothing);
        }
    }

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(5.0, 3.0).unwrap(), Extended::Finite(7.0));
        assert_eq!(critical_exponent(10.0, 3.0).unwrap(), Extended::Finite(2.0));
        assert_eq!(critical_exponent(1.0, 1.0).unwrap(), Extended::Unbounded);
    }

    #[test]
    fn critical_exponent_sigma3_row_exact() {
        // p_crit(n, 3) = 1 + 6/(n-4)_+ for n = 1..10
        let sigma = Rational::integer(3);
        for n in 1..=10i128 {
            let got = critical_exponent_exact(Rational::integer(n), sigma);
            if n <= 4 {
                assert_eq!(got, crate::rational::ExtendedRational::Unbounded);
            } else {
                let want = Rational::integer(1).add(Rational::new(6, n - 4));
                assert_eq!(got, crate::rational::ExtendedRational::Finite(want));
            }
        }
    }

    #[test]
    fn lifespan_exponent_examples() {
        // (1, 1, 2): p' = 2, 6 sigma p' = 12, 3n + 2 sigma = 5 -> -2/7
        let v = lifespan_exponent(1.0, 1.0, 2.0).unwrap();
        assert!((v - (-2.0 / 7.0)).abs() < 1e-15);
        // (5, 3, 2): 36 - 21 = 15 -> -6/15 = -2/5
        let v = lifespan_exponent(5.0, 3.0, 2.0).unwrap();
        assert!((v - (-0.4)).abs() < 1e-15);
        let e = lifespan_exponent_exact(
            Rational::integer(5),
            Rational::integer(3),
            Rational::integer(2),
        )
        .unwrap();
        assert_eq!(e, Rational::new(-2, 5));
        // supercritical p rejected
        assert!(lifespan_exponent(5.0, 3.0, 8.0).is_err());
    }

    #[test]
    fn lifespan_exponent_diverges_at_critical() {
        // p -> p_crit from below: exponent -> -infinity monotonically
        let (n, sigma) = (5.0, 3.0);
        let pc = critical_exponent(n, sigma).unwrap().finite().unwrap();
        let mut last = 0.0f64;
        for k in 1..8 {
            let p = pc - 10f64.powi(-k);
            let v = lifespan_exponent(n, sigma, p).unwrap();
            assert!(v < 0.0);
            assert!(v < last, "exponent must decrease toward -inf");
            last = v;
        }
        assert!(last < -1e3);
    }

    #[test]
    fn decay_rate_examples() {
        let t = decay_rates(1.0, 0.25, 2.0).unwrap();
        assert!((t.l2_rate - 1.0).abs() < 1e-15);
        assert!((t.hs_rate - 3.0).abs() < 1e-15);
        assert!(!t.log_loss_flag);

        let t = decay_rates(8.0 / 3.0, 1.0, 4.0).unwrap();
        assert!(t.log_loss_flag);
        assert!(t.l2_rate.abs() < 1e-14);

        // n = 8 sigma/3 zeroes the numerator
        let t = decay_rates(8.0 * 0.75 / 3.0, 0.75, 2.0).unwrap();
        assert!(t.l2_rate.abs() < 1e-14);
    }

    #[test]
    fn rate_gap_is_two() {
        for &(n, sigma) in
            &[(1.0, 0.25), (1.0, 0.5), (2.0, 1.0), (3.0, 1.0), (5.0, 3.0), (2.7, 0.9)]
        {
            if let Ok(t) = decay_rates(n, sigma, 2.0) {
                assert!((t.hs_rate - t.l2_rate - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn window_examples() {
        assert!(!dimension_window_check(1.0, 1.0, 2.0).ok); // 1 < 4/3
        assert!(dimension_window_check(1.0, 0.5, 2.0).ok); // 1 > 2/3
        let w = dimension_window_check(8.0 / 3.0, 1.0, 4.0);
        assert!(!w.ok);
        assert!(w.reason.contains("8 sigma/3"));
        assert!(dimension_window_check(0.4, 7.0, 3.0).ok); // eta = 3 admits any n > 0
    }

    #[test]
    fn admissible_interval_examples() {
        let i = gn_admissible_p(3.0, 1.0).unwrap();
        assert_eq!(i.lo, 2.0);
        assert!((i.hi.finite().unwrap() - 9.0).abs() < 1e-12);

        let i = gn_admissible_p(1.0, 1.0).unwrap();
        assert_eq!(i.hi, Extended::Unbounded);

        let i = gn_admissible_p(10.0 / 3.0, 1.0).unwrap();
        assert!((i.hi.finite().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_of_critical_exponent() {
        // strictly decreasing in n, strictly increasing in sigma (3n > 4 sigma)
        let sigma = 1.0;
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let n = 1.5 + 0.3 * k as f64;
            let v = critical_exponent(n, sigma).unwrap().finite().unwrap();
            assert!(v < prev);
            prev = v;
        }
        let n = 5.0;
        let mut prev = 0.0;
        for k in 0..20 {
            let sigma = 0.5 + 0.15 * k as f64;
            let v = critical_exponent(n, sigma).unwrap().finite().unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1.0, 1.0, 2.0, 2.0, 0.1).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 2.0, 2.0, 0.1).is_err());
        assert!(ModelParams::new(1.0, 1.0, 2.0, 1.0, 0.1).is_err());
        let p = ModelParams::new(1.5, 1.0, 2.0, 2.0, 0.1).unwrap();
        assert!(p.require_torus_mode().is_err());
    }

    #[test]
    fn existence_window_classification() {
        assert_eq!(existence_window(1.0, 0.5), ExistenceWindow::GlobalExistence); // 2/3 < 1 <= 5/3
        assert_eq!(existence_window(4.0, 1.0), ExistenceWindow::Unverified); // 10/3 < 4 <= 16/3
        assert_eq!(existence_window(8.0, 1.0), ExistenceWindow::Outside);
        assert_eq!(existence_window(1.0, 1.0), ExistenceWindow::Outside); // n <= 4 sigma/3
    }
}
