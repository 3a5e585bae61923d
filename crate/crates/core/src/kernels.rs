//! Characteristic roots and the three Fourier-space fundamental kernels.
//!
//! At frequency radius `r` the Fourier symbol of the equation is the cubic
//! `lambda^3 + eta a lambda^2 + eta a^2 lambda + a^3` with `a = r^{2 sigma/3}`,
//! which factors as `(lambda + a)(lambda^2 + (eta - 1) a lambda + a^2)`.
//! The fundamental system `K_0, K_1, K_2` (identity initial-condition
//! matrix at t = 0) is evaluated by one of four paths:
//!
//! * an oscillatory closed form for eta < 3,
//! * a pure-exponential closed form for eta > 3,
//! * the confluent polynomial form at eta = 3,
//! * a divided-difference path (scaled Taylor of the exponential of the
//!   Opitz bidiagonal matrix) whenever the roots nearly collide or
//!   `a t` is small, where the closed forms lose digits to cancellation.
//!
//! All three kernels are real for every eta > 0; complex arithmetic only
//! appears inside the divided-difference path and is checked against a
//! realness budget.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use num_complex::Complex64;

/// Regime of the characteristic roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootRegime {
    /// eta < 3: complex-conjugate pair.
    Oscillatory,
    /// eta = 3: triple root -a.
    Degenerate,
    /// eta > 3: three distinct real roots.
    RealDistinct,
}

/// The three characteristic roots at one frequency radius.
#[derive(Debug, Clone, Copy)]
pub struct CharRoots {
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    pub lambda3: Complex64,
    pub regime: RootRegime,
    /// Real part of lambda_{2,3}: `(1 - eta)/2 * a`.
    pub mu_r: f64,
    /// Imaginary part of lambda_2 for eta < 3 (zero otherwise).
    pub mu_i: f64,
    /// Root half-gap `sqrt(eta^2 - 2 eta - 3)/2` for eta > 3 (zero otherwise).
    pub d_eta: f64,
    /// Oscillation constant `sqrt(3 + 2 eta - eta^2)/2` for eta < 3 (zero otherwise).
    pub c_eta: f64,
    /// `a = r^{2 sigma / 3}`.
    pub a: f64,
}

impl CharRoots {
    /// Max relative defect of the three Vieta identities
    /// (`sum = -eta a`, `pairwise = eta a^2`, `product = -a^3`).
    pub fn vieta_residual(&self, eta: f64) -> f64 {
        if self.a == 0.0 {
            return 0.0; // all roots exactly zero
        }
        let a = Complex64::new(self.a, 0.0);
        let (l1, l2, l3) = (self.lambda1, self.lambda2, self.lambda3);
        let s1 = (l1 + l2 + l3 + eta * a).norm() / (eta * self.a);
        let s2 = (l1 * l2 + l1 * l3 + l2 * l3 - eta * a * a).norm() / (eta * self.a * self.a);
        let s3 = (l1 * l2 * l3 + a * a * a).norm() / self.a.powi(3);
        s1.max(s2).max(s3)
    }
}

pub fn freq_scale(r: f64, sigma: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r.powf(2.0 * sigma / 3.0)
    }
}

pub fn char_roots(eta: f64, r: f64, sigma: f64) -> CharRoots {
    let a = freq_scale(r, sigma);
    let disc = eta * eta - 2.0 * eta - 3.0; // (eta - 3)(eta + 1)
    let h = 0.5 * (1.0 - eta);
    if disc < 0.0 {
        let c_eta = 0.5 * (-disc).sqrt();
        CharRoots {
            lambda1: Complex64::new(-a, 0.0),
            lambda2: Complex64::new(h * a, c_eta * a),
            lambda3: Complex64::new(h * a, -c_eta * a),
            regime: RootRegime::Oscillatory,
            mu_r: h * a,
            mu_i: c_eta * a,
            d_eta: 0.0,
            c_eta,
            a,
        }
    } else if disc == 0.0 {
        CharRoots {
            lambda1: Complex64::new(-a, 0.0),
            lambda2: Complex64::new(-a, 0.0),
            lambda3: Complex64::new(-a, 0.0),
            regime: RootRegime::Degenerate,
            mu_r: -a,
            mu_i: 0.0,
            d_eta: 0.0,
            c_eta: 0.0,
            a,
        }
    } else {
        let d_eta = 0.5 * disc.sqrt();
        CharRoots {
            lambda1: Complex64::new(-a, 0.0),
            lambda2: Complex64::new((h + d_eta) * a, 0.0),
            lambda3: Complex64::new((h - d_eta) * a, 0.0),
            regime: RootRegime::RealDistinct,
            mu_r: h * a,
            mu_i: 0.0,
            d_eta,
            c_eta: 0.0,
            a,
        }
    }
}

/// Numerical switches of the kernel evaluator.
#[derive(Debug, Clone, Copy)]
pub struct KernelTuning {
    /// Near-degeneracy threshold: divided differences take over when the
    /// minimum pairwise root gap is below `theta * max |lambda|`, or when
    /// `a t < theta`. The closed forms lose about six digits below this.
    pub theta: f64,
    /// Taylor truncation for the scaled-exponential divided differences.
    pub taylor_tol: f64,
}

impl Default for KernelTuning {
    fn default() -> Self {
        KernelTuning { theta: 1e-3, taylor_tol: 1e-18 }
    }
}

/// Which evaluation path produced a kernel value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Oscillatory,
    RealDistinct,
    DegenerateClosedForm,
    DividedDifference,
}

/// Kernel values and time derivatives at one (t, r).
#[derive(Debug, Clone, Copy)]
pub struct KernelValues {
    /// `k[j] = K_j(t, r)`.
    pub k: [f64; 3],
    pub dk: [f64; 3],
    pub ddk: [f64; 3],
    /// Third derivatives, reconstructed from the representation itself
    /// (not from the differential equation).
    pub dddk: [f64; 3],
    /// Largest imaginary residue relative to magnitude (zero on the real
    /// closed-form paths).
    pub max_imag_ratio: f64,
    pub path: EvalPath,
}

impl KernelValues {
    /// Rows `[d^i/dt^i K_j]` for i = 0, 1, 2 (the state-advance matrix).
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [self.k, self.dk, self.ddk]
    }
}

pub fn kernel_values(t: f64, r: f64, params: &ModelParams) -> Result<KernelValues> {
    kernel_values_raw(t, r, params.eta, params.sigma, &KernelTuning::default())
}

pub fn kernel_values_raw(
    t: f64,
    r: f64,
    eta: f64,
    sigma: f64,
    tuning: &KernelTuning,
) -> Result<KernelValues> {
    if !(t >= 0.0) {
        return Err(Error::ParamDomain(format!("kernel time must be >= 0, got {t}")));
    }
    if !(r >= 0.0) {
        return Err(Error::ParamDomain(format!("frequency radius must be >= 0, got {r}")));
    }
    if !(eta > 0.0 && sigma > 0.0) {
        return Err(Error::ParamDomain(format!("need eta, sigma > 0, got ({eta}, {sigma})")));
    }
    let roots = char_roots(eta, r, sigma);
    Ok(eval_rows(t, &roots, eta, tuning))
}

fn min_gap(roots: &CharRoots) -> f64 {
    let g12 = (roots.lambda1 - roots.lambda2).norm();
    let g13 = (roots.lambda1 - roots.lambda3).norm();
    let g23 = (roots.lambda2 - roots.lambda3).norm();
    g12.min(g13).min(g23)
}

fn max_mod(roots: &CharRoots) -> f64 {
    roots.lambda1.norm().max(roots.lambda2.norm()).max(roots.lambda3.norm())
}

fn use_divided_difference(t: f64, roots: &CharRoots, tuning: &KernelTuning) -> bool {
    if roots.a * t < tuning.theta {
        return true;
    }
    min_gap(roots) < tuning.theta * max_mod(roots)
}

fn eval_rows(t: f64, roots: &CharRoots, eta: f64, tuning: &KernelTuning) -> KernelValues {
    if roots.regime == RootRegime::Degenerate && roots.a * t >= tuning.theta {
        return eval_degenerate(t, roots.a);
    }
    if use_divided_difference(t, roots, tuning) {
        return eval_divided_difference(t, roots, tuning);
    }
    match roots.regime {
        RootRegime::Oscillatory => eval_oscillatory(t, roots, eta),
        RootRegime::RealDistinct => eval_real_distinct(t, roots, eta),
        RootRegime::Degenerate => eval_degenerate(t, roots.a),
    }
}

/// eta < 3 closed form: each kernel is
/// `c e^{-a t} + e^{mu_r t} (A cos(mu_i t) + B sin(mu_i t))`.
fn eval_oscillatory(t: f64, roots: &CharRoots, eta: f64) -> KernelValues {
    let a = roots.a;
    let (mu, om) = (roots.mu_r, roots.mu_i);
    let ce = roots.c_eta;
    let em3 = eta - 3.0;
    // (c, A, B) per kernel
    let coeffs = [
        (-1.0 / em3, (eta - 2.0) / em3, eta / (2.0 * ce)),
        (-(eta - 1.0) / (em3 * a), (eta - 1.0) / (em3 * a), (eta + 1.0) / (2.0 * ce * a)),
        (-1.0 / (em3 * a * a), 1.0 / (em3 * a * a), 1.0 / (2.0 * ce * a * a)),
    ];
    let e1 = (-a * t).exp();
    let eg = (mu * t).exp();
    let (cw, sw) = ((om * t).cos(), (om * t).sin());
    let mut out = [[0.0; 3]; 4];
    for (j, &(c0, a0, b0)) in coeffs.iter().enumerate() {
        let (mut c, mut aa, mut bb) = (c0, a0, b0);
        for row in &mut out {
            row[j] = c * e1 + eg * (aa * cw + bb * sw);
            let (na, nb) = (mu * aa + om * bb, mu * bb - om * aa);
            c *= -a;
            aa = na;
            bb = nb;
        }
    }
    KernelValues {
        k: out[0],
        dk: out[1],
        ddk: out[2],
        dddk: out[3],
        max_imag_ratio: 0.0,
        path: EvalPath::Oscillatory,
    }
}

/// eta > 3 closed form: three real exponentials.
fn eval_real_distinct(t: f64, roots: &CharRoots, eta: f64) -> KernelValues {
    let a = roots.a;
    let d = roots.d_eta;
    let tm = 3.0 - eta;
    let l = [roots.lambda1.re, roots.lambda2.re, roots.lambda3.re];
    let coeffs = [
        [
            1.0 / tm,
            (2.0 * d - 1.0 + eta) / (2.0 * d * (tm + 2.0 * d)),
            (2.0 * d + 1.0 - eta) / (2.0 * d * (tm - 2.0 * d)),
        ],
        [
            (eta - 1.0) / (tm * a),
            (2.0 * d + 1.0 + eta) / (2.0 * d * (tm + 2.0 * d) * a),
            (2.0 * d - 1.0 - eta) / (2.0 * d * (tm - 2.0 * d) * a),
        ],
        [
            1.0 / (tm * a * a),
            1.0 / (d * (tm + 2.0 * d) * a * a),
            -1.0 / (d * (tm - 2.0 * d) * a * a),
        ],
    ];
    let e = [(l[0] * t).exp(), (l[1] * t).exp(), (l[2] * t).exp()];
    let mut out = [[0.0; 3]; 4];
    for (j, cj) in coeffs.iter().enumerate() {
        let mut c = *cj;
        for row in &mut out {
            row[j] = c[0] * e[0] + c[1] * e[1] + c[2] * e[2];
            for (ck, lk) in c.iter_mut().zip(&l) {
                *ck *= lk;
            }
        }
    }
    KernelValues {
        k: out[0],
        dk: out[1],
        ddk: out[2],
        dddk: out[3],
        max_imag_ratio: 0.0,
        path: EvalPath::RealDistinct,
    }
}

/// eta = 3 confluent form: `K_j = p_j(t) e^{-a t}` with
/// `p_0 = 1 + a t + a^2 t^2/2`, `p_1 = t + a t^2`, `p_2 = t^2/2`.
fn eval_degenerate(t: f64, a: f64) -> KernelValues {
    // polynomial coefficients in t (degree <= 2; derivatives keep the degree)
    let polys = [[1.0, a, 0.5 * a * a], [0.0, 1.0, a], [0.0, 0.0, 0.5]];
    let e = (-a * t).exp();
    let mut out = [[0.0; 3]; 4];
    for (j, pj) in polys.iter().enumerate() {
        let mut p = *pj;
        for row in &mut out {
            row[j] = (p[0] + t * (p[1] + t * p[2])) * e;
            // d/dt (p e^{-a t}) = (p' - a p) e^{-a t}
            p = [p[1] - a * p[0], 2.0 * p[2] - a * p[1], -a * p[2]];
        }
    }
    KernelValues {
        k: out[0],
        dk: out[1],
        ddk: out[2],
        dddk: out[3],
        max_imag_ratio: 0.0,
        path: EvalPath::DegenerateClosedForm,
    }
}

/// exp(t J) for the upper-bidiagonal Opitz matrix J = diag(nodes) + superdiag(1),
/// by scaling-and-squaring with a Taylor series truncated at `tol` times the
/// partial sum. Entry `[i][j]` is the divided difference of `e^{t s}` over
/// nodes i..=j; unconditionally stable under confluence.
fn expm_opitz(nodes: &[Complex64], t: f64, tol: f64) -> Vec<Complex64> {
    let n = nodes.len();
    let mut aa = vec![Complex64::default(); n * n]; // t * J
    let mut norm = 0.0f64;
    for i in 0..n {
        aa[i * n + i] = nodes[i] * t;
        norm = norm.max(nodes[i].norm() * t.abs() + t.abs());
        if i + 1 < n {
            aa[i * n + i + 1] = Complex64::new(t, 0.0);
        }
    }
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(s as i32);
    for v in &mut aa {
        *v *= scale;
    }
    // Taylor
    let mut sum = vec![Complex64::default(); n * n];
    let mut term = vec![Complex64::default(); n * n];
    for i in 0..n {
        sum[i * n + i] = Complex64::new(1.0, 0.0);
        term[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let mut next = vec![Complex64::default(); n * n];
    for k in 1..200 {
        // term = term * aa / k (upper triangular product)
        for v in &mut next {
            *v = Complex64::default();
        }
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::default();
                for m in i..=j {
                    acc += term[i * n + m] * aa[m * n + j];
                }
                next[i * n + j] = acc / k as f64;
            }
        }
        std::mem::swap(&mut term, &mut next);
        let mut tmax = 0.0f64;
        let mut smax = 0.0f64;
        for i in 0..n * n {
            sum[i] += term[i];
            tmax = tmax.max(term[i].norm());
            smax = smax.max(sum[i].norm());
        }
        if tmax <= tol * smax.max(1e-300) {
            break;
        }
    }
    // square s times
    for _ in 0..s {
        for v in &mut next {
            *v = Complex64::default();
        }
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::default();
                for m in i..=j {
                    acc += sum[i * n + m] * sum[m * n + j];
                }
                next[i * n + j] = acc;
            }
        }
        std::mem::swap(&mut sum, &mut next);
    }
    sum
}

fn eval_divided_difference(t: f64, roots: &CharRoots, tuning: &KernelTuning) -> KernelValues {
    let nodes = [roots.lambda1, roots.lambda2, roots.lambda3];
    let m = expm_opitz(&nodes, t, tuning.taylor_tol);
    // last column: E1 = e^{l3 t}, E2 = e_t[l2, l3], E3 = e_t[l1, l2, l3]
    let e1 = m[2 * 3 + 2];
    let e2 = m[3 + 2];
    let e3 = m[2];
    rows_from_divided_differences(t, roots, e1, e2, e3)
}

/// Assemble kernel rows from the divided differences of `e^{t s}` over the
/// roots, using the Leibniz recurrences
/// `E1' = l3 E1`, `E2' = l2 E2 + E1`, `E3' = l1 E3 + E2`.
fn rows_from_divided_differences(
    _t: f64,
    roots: &CharRoots,
    e1: Complex64,
    e2: Complex64,
    e3: Complex64,
) -> KernelValues {
    let (l1, l2, l3) = (roots.lambda1, roots.lambda2, roots.lambda3);
    let mut e = [e1, e2, e3];
    let mut out = [[0.0; 3]; 4];
    let mut max_ratio = 0.0f64;
    for row in &mut out {
        // K2 = E3, K1 = E2 - (l2 + l3) E3, K0 = E1 - l3 E2 + l2 l3 E3
        let k2 = e[2];
        let k1 = e[1] - (l2 + l3) * e[2];
        let k0 = e[0] - l3 * e[1] + l2 * l3 * e[2];
        let vals = [k0, k1, k2];
        // realness measured against the row scale: individual entries may be
        // genuinely zero while carrying roundoff-level imaginary residue
        let row_scale = vals.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        for (j, v) in vals.into_iter().enumerate() {
            row[j] = v.re;
            if row_scale > 1e-280 {
                max_ratio = max_ratio.max(v.im.abs() / row_scale);
            }
        }
        e = [l3 * e[0], l2 * e[1] + e[0], l1 * e[2] + e[1]];
    }
    KernelValues {
        k: out[0],
        dk: out[1],
        ddk: out[2],
        dddk: out[3],
        max_imag_ratio: max_ratio,
        path: EvalPath::DividedDifference,
    }
}

/// Duhamel quadrature weights `W_i(h) = \int_0^h d^i/dt^i K_2(s) ds`:
/// `W_1 = K_2(h)`, `W_2 = K_2'(h)`, and `W_0` is the divided difference of
/// `e^{h s}` over the nodes `(0, l1, l2, l3)` (the antiderivative picks up a
/// zero node). The divided-difference route is used whenever `a h < 1`,
/// where the closed-form antiderivative cancels.
pub fn duhamel_weights(
    h: f64,
    r: f64,
    eta: f64,
    sigma: f64,
    tuning: &KernelTuning,
) -> Result<[f64; 3]> {
    if !(h >= 0.0) {
        return Err(Error::ParamDomain(format!("step must be >= 0, got {h}")));
    }
    let roots = char_roots(eta, r, sigma);
    let rows = eval_rows(h, &roots, eta, tuning);
    let a = roots.a;
    let w0 = if a * h < 1.0 || use_divided_difference(h, &roots, tuning) {
        let nodes =
            [Complex64::default(), roots.lambda1, roots.lambda2, roots.lambda3];
        expm_opitz(&nodes, h, tuning.taylor_tol)[3].re
    } else {
        match roots.regime {
            RootRegime::Oscillatory => {
                let (mu, om) = (roots.mu_r, roots.mu_i);
                let em3 = eta - 3.0;
                let (c, aa, bb) =
                    (-1.0 / (em3 * a * a), 1.0 / (em3 * a * a), 1.0 / (2.0 * roots.c_eta * a * a));
                let ie = c * (-a * h).exp_m1() / (-a);
                let den = mu * mu + om * om;
                let eg = (mu * h).exp();
                let (cw, sw) = ((om * h).cos(), (om * h).sin());
                let ic = (eg * (mu * cw + om * sw) - mu) / den;
                let is = (eg * (mu * sw - om * cw) + om) / den;
                ie + aa * ic + bb * is
            }
            RootRegime::RealDistinct => {
                let d = roots.d_eta;
                let tm = 3.0 - eta;
                let c = [
                    1.0 / (tm * a * a),
                    1.0 / (d * (tm + 2.0 * d) * a * a),
                    -1.0 / (d * (tm - 2.0 * d) * a * a),
                ];
                let l = [roots.lambda1.re, roots.lambda2.re, roots.lambda3.re];
                c.iter().zip(&l).map(|(ck, lk)| ck * (lk * h).exp_m1() / lk).sum()
            }
            RootRegime::Degenerate => {
                // int_0^h (s^2/2) e^{-a s} ds
                let e = (-a * h).exp();
                (2.0 / (a * a * a) - e * (h * h / a + 2.0 * h / (a * a) + 2.0 / (a * a * a))) / 2.0
            }
        }
    };
    Ok([w0, rows.k[2], rows.dk[2]])
}

/// Relative residual of the Fourier-side equation
/// `K''' + eta a K'' + eta a^2 K' + a^3 K = 0`, maximized over the three
/// kernels, with third derivatives taken from the representation.
pub fn kernel_ode_residual(t: f64, r: f64, eta: f64, sigma: f64) -> Result<f64> {
    let rows = kernel_values_raw(t, r, eta, sigma, &KernelTuning::default())?;
    let a = freq_scale(r, sigma);
    Ok(residual_of_rows(&rows, a, eta))
}

/// Residual of explicit kernel rows against the Fourier-side equation;
/// exposed so that verification tests can feed deliberately corrupted rows.
pub fn residual_of_rows(rows: &KernelValues, a: f64, eta: f64) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..3 {
        let terms = [
            rows.dddk[j],
            eta * a * rows.ddk[j],
            eta * a * a * rows.dk[j],
            a * a * a * rows.k[j],
        ];
        let num = terms.iter().sum::<f64>().abs();
        let scale = terms.iter().map(|v| v.abs()).sum::<f64>();
        if scale > 0.0 {
            worst = worst.max(num / scale);
        }
    }
    worst
}

/// Regime-appropriate pointwise bound on the kernels.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeBound {
    /// `kernel_bounds[j] >= |K_j(t, r)|` with the documented safety factor.
    pub kernel_bounds: [f64; 3],
    /// Signed exponential rate `d/dt log(envelope)`: the exact dominant rate
    /// `mu_r` in the growing regime, zero at eta = 1, and half the slowest
    /// root decay for eta > 1 (the factor two absorbs polynomial prefactors).
    pub exp_rate: f64,
    pub safety: f64,
}

pub fn pointwise_envelope(t: f64, r: f64, eta: f64, sigma: f64) -> EnvelopeBound {
    let a = freq_scale(r, sigma);
    let safety = 4.0;
    let rate = envelope_rate(eta) * a;
    let g = (rate * t).exp();
    let tcap = if a > 0.0 { t.min(1.0 / a) } else { t };
    let kernel_bounds = [safety * g, safety * tcap * g, safety * tcap * tcap * g];
    EnvelopeBound { kernel_bounds, exp_rate: rate, safety }
}

/// Envelope rate per unit `a t`; see [`pointwise_envelope`].
pub fn envelope_rate(eta: f64) -> f64 {
    if eta < 1.0 {
        0.5 * (1.0 - eta)
    } else if eta == 1.0 {
        0.0
    } else if eta <= 3.0 {
        -0.5 * (0.5 * (eta - 1.0)).min(1.0)
    } else {
        let d = 0.5 * (eta * eta - 2.0 * eta - 3.0).sqrt();
        -0.5 * (0.5 * (eta - 1.0) - d)
    }
}

/// Slowest decay / fastest growth rate of the root system per unit `a`
/// (signed: positive means growth).
pub fn dominant_rate(eta: f64) -> f64 {
    if eta < 3.0 {
        // roots -a and mu_r = (1-eta)/2 a; for eta < 1 growth wins
        let mu = 0.5 * (1.0 - eta);
        if mu >= -1.0 {
            mu
        } else {
            -1.0
        }
    } else {
        let d = 0.5 * (eta * eta - 2.0 * eta - 3.0).sqrt();
        0.5 * (1.0 - eta) + d
    }
}
