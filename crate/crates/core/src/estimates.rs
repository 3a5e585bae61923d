//! Quadrature oracles for the decay lemmas, two-sided sharpness checks and
//! the log-log rate-fitting utility shared by all experiments.

use crate::error::{Error, Result};
use crate::quad::{integrate_radial, RadialOpts};
use crate::util::ols;
use serde::{Deserialize, Serialize};

/// A norm-versus-time series produced by quadrature or torus evolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Sobolev order of the norm.
    pub order: f64,
    pub method: SeriesMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesMethod {
    Torus,
    RadialQuadrature,
    Synthetic,
}

impl NormSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, order: f64, method: SeriesMethod) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::ShapeMismatch("times/values length mismatch".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::ParamDomain("series times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::ParamDomain("series values must be nonnegative".into()));
        }
        Ok(NormSeries { times, values, order, method })
    }

    /// Geometric sampling times with at least `per_decade` points per decade.
    pub fn sample_times(t_min: f64, t_max: f64, per_decade: usize) -> Vec<f64> {
        assert!(t_max > t_min && t_min > 0.0);
        let decades = (t_max / t_min).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(2);
        (0..=n)
            .map(|i| t_min * (t_max / t_min).powf(i as f64 / n as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitWindow {
    pub t_min: f64,
    pub t_max: f64,
}

/// Fitted log-log slope with diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub window: FitWindow,
    pub samples: usize,
    /// Quadratic coefficient of a curvature probe in log-log space; a
    /// non-power-law series (for example `log(e + t)`) shows a clearly
    /// nonzero value.
    pub curvature: f64,
}

impl DecayFit {
    /// Curved residual pattern beyond what a power law allows.
    pub fn non_power_law(&self) -> bool {
        self.curvature.abs() > 5e-3
    }
}

/// Ordinary least squares of `log(value)` against `log(t)` within the window.
pub fn fit_rate(series: &NormSeries, window: FitWindow) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t >= window.t_min && t <= window.t_max {
            if !(v > 0.0) {
                return Err(Error::ParamDomain(format!(
                    "nonpositive value {v} at t = {t} in fit window"
                )));
            }
            xs.push(t.ln());
            ys.push(v.ln());
        }
    }
    if xs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs >= 4 samples in window, got {}",
            xs.len()
        )));
    }
    let (intercept, slope, rms) = ols(&xs, &ys);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let xc: Vec<f64> = xs.iter().map(|x| x - mx).collect();
    let s2 = xc.iter().map(|x| x * x).sum::<f64>();
    let s3 = xc.iter().map(|x| x * x * x).sum::<f64>();
    let s4 = xc.iter().map(|x| x * x * x * x).sum::<f64>();
    let sy: f64 = ys.iter().sum();
    let sxy: f64 = xc.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let sx2y: f64 = xc.iter().zip(&ys).map(|(x, y)| x * x * y).sum();
    let curvature = solve_quadratic_coef(n, s2, s3, s4, sy, sxy, sx2y);
    Ok(DecayFit { slope, intercept, rms_residual: rms, window, samples: xs.len(), curvature })
}

/// Quadratic coefficient of the least-squares parabola through centered data.
fn solve_quadratic_coef(n: f64, s2: f64, s3: f64, s4: f64, sy: f64, sxy: f64, sx2y: f64) -> f64 {
    // normal equations:
    // [ n   0   s2 ] [a]   [ sy  ]
    // [ 0   s2  s3 ] [b] = [ sxy ]
    // [ s2  s3  s4 ] [c]   [ sx2y]
    let m = [[n, 0.0, s2], [0.0, s2, s3], [s2, s3, s4]];
    let rhs = [sy, sxy, sx2y];
    let det3 = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(&m);
    if d.abs() < 1e-30 {
        return 0.0;
    }
    let mut mc = m;
    for i in 0..3 {
        mc[i][2] = rhs[i];
    }
    det3(&mc) / d
}

/// Report of one lemma/identity check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaCheckReport {
    pub lemma: String,
    pub theoretical_rate: f64,
    pub fitted_rate: Option<f64>,
    /// Two-sided constants of `value(t) * t^{-theoretical_rate}` over the window.
    pub c_lower: f64,
    pub c_upper: f64,
    /// Relative drift of the compensated ratio across the last decade.
    pub drift: f64,
    pub pass: bool,
}

/// Low-frequency decay integral
/// `( \int_0^{eps0} r^{2s + n - 1} e^{-2 c r^{2 sigma/3} t} dr )^{1/2}`,
/// evaluated with the graded quadrature in the variable `u = r^{2 sigma/3}`.
///
/// Requires `n > -2s` (otherwise the endpoint is non-integrable) and decays
/// like `t^{-3(2s+n)/(4 sigma)}`.
pub fn low_frequency_decay_integral(s: f64, n: f64, sigma: f64, c: f64, t: f64, eps0: f64) -> Result<f64> {
    if !(n > -2.0 * s) {
        return Err(Error::ParamDomain(format!("hypothesis n > -2s violated: n = {n}, s = {s}")));
    }
    if !(c > 0.0 && t >= 0.0 && eps0 > 0.0 && sigma > 0.0) {
        return Err(Error::ParamDomain("need c > 0, t >= 0, eps0 > 0, sigma > 0".into()));
    }
    // u = r^{2 sigma/3}: r^{2s+n-1} dr = (3/(2 sigma)) u^{alpha - 1} du,
    // alpha = 3 (2s + n) / (2 sigma)
    let alpha = 3.0 * (2.0 * s + n) / (2.0 * sigma);
    let jac = 3.0 / (2.0 * sigma);
    let upper = eps0.powf(2.0 * sigma / 3.0);
    let r = integrate_radial(
        &|u: f64| jac * (-2.0 * c * u * t).exp(),
        &RadialOpts { alpha, upper: Some(upper), rel_tol: 1e-11, ..RadialOpts::default() },
    )?;
    Ok(r.value.max(0.0).sqrt())
}

/// The two oscillatory low-frequency integrals of the diffusion-waves lemma
/// (eta in (1,3)): the sizes over `[0, eps0]` of
/// `r^{-4 sigma/3} (e^{-r^{2 sigma/3} t} - cos(C_eta r^{2 sigma/3} t) e^{-(eta-1)/2 r^{2 sigma/3} t})`
/// and
/// `r^{-4 sigma/3} sin(C_eta r^{2 sigma/3} t) e^{-(eta-1)/2 r^{2 sigma/3} t}`
/// in the radial L2 sense `( \int_0^{eps0} r^{n-1} |m(r)|^2 dr )^{1/2}`.
/// Both decay at the rate `-(3n - 8 sigma)/(4 sigma)`.
pub fn oscillatory_multiplier_integrals(t: f64, eta: f64, n: f64, sigma: f64, eps0: f64) -> Result<(f64, f64)> {
    if !(eta > 1.0 && eta < 3.0) {
        return Err(Error::ParamDomain(format!("requires eta in (1, 3), got {eta}")));
    }
    if !(n > 4.0 * sigma / 3.0) {
        return Err(Error::ParamDomain(format!(
            "hypothesis n > 4 sigma/3 violated: n = {n}, sigma = {sigma}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::ParamDomain("t must be >= 0".into()));
    }
    let c_eta = 0.5 * (3.0 + 2.0 * eta - eta * eta).sqrt();
    let half = 0.5 * (eta - 1.0);
    // in u = r^{2 sigma/3}: measure r^{n-1} dr = (3/(2 sigma)) u^{3n/(2 sigma)-1} du
    // and the multiplier contributes u^{-4}. Both brackets vanish linearly at
    // u = 0, so two powers move into the bounded part and the effective
    // measure exponent is alpha = 3n/(2 sigma) - 2 > 0 exactly in the lemma
    // window n > 4 sigma/3.
    let alpha = 3.0 * n / (2.0 * sigma) - 2.0;
    let jac = 3.0 / (2.0 * sigma);
    let upper = eps0.powf(2.0 * sigma / 3.0);
    // (e^{-x} - cos(C x) e^{-h x}) / x, series-protected near x = 0
    let bracket1 = move |x: f64| {
        if x < 1e-4 {
            0.5 * (eta - 3.0) + 0.5 * (1.0 - half * half + c_eta * c_eta) * x
        } else {
            ((-x).exp() - (c_eta * x).cos() * (-half * x).exp()) / x
        }
    };
    let bracket2 = move |x: f64| {
        if x == 0.0 {
            c_eta
        } else {
            (c_eta * x).sin() * (-half * x).exp() / x
        }
    };
    let g1 = move |u: f64| {
        let b = bracket1(u * t) * t;
        jac * b * b
    };
    let g2 = move |u: f64| {
        let b = bracket2(u * t) * t;
        jac * b * b
    };
    let opts = RadialOpts {
        alpha,
        upper: Some(upper),
        osc_freq: if t > 0.0 { Some(2.0 * c_eta * t) } else { None },
        rel_tol: 1e-10,
        ..RadialOpts::default()
    };
    let a1 = integrate_radial(&g1, &opts)?;
    let a2 = integrate_radial(&g2, &opts)?;
    Ok((a1.value.max(0.0).sqrt(), a2.value.max(0.0).sqrt()))
}

/// Two-sided sharpness check: compensate the series by the theoretical rate
/// and require (a) bounded max/min ratio over the window and (b) small
/// relative drift across the last decade.
pub fn sharpness_check(
    series: &NormSeries,
    theoretical_rate: f64,
    window: FitWindow,
    lemma: &str,
) -> Result<LemmaCheckReport> {
    let mut ts = Vec::new();
    let mut ratios = Vec::new();
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t >= window.t_min && t <= window.t_max {
            ts.push(t);
            ratios.push(v * t.powf(-theoretical_rate));
        }
    }
    if ts.len() < 4 {
        return Err(Error::InsufficientData("sharpness window has < 4 samples".into()));
    }
    let c_lower = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_upper = ratios.iter().cloned().fold(0.0f64, f64::max);
    let t_max = *ts.last().unwrap();
    let decade_start = t_max / 10.0;
    let first_in_decade = ts
        .iter()
        .position(|&t| t >= decade_start)
        .ok_or_else(|| Error::InsufficientData("no samples in last decade".into()))?;
    let drift = (ratios.last().unwrap() / ratios[first_in_decade] - 1.0).abs();
    let fitted = fit_rate(series, window).ok().map(|f| f.slope);
    let pass = c_upper / c_lower < 10.0 && drift < 0.05 && c_lower > 0.0;
    Ok(LemmaCheckReport {
        lemma: lemma.to_string(),
        theoretical_rate,
        fitted_rate: fitted,
        c_lower,
        c_upper,
        drift,
        pass,
    })
}

/// Build a series by sampling a function of t (used by the lemma oracles).
pub fn series_of(
    f: impl Fn(f64) -> Result<f64>,
    times: &[f64],
    order: f64,
    method: SeriesMethod,
) -> Result<NormSeries> {
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        values.push(f(t)?);
    }
    NormSeries::new(times.to_vec(), values, order, method)
}
