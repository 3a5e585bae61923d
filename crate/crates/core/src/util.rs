//! Small numeric utilities: special functions, order-3 jets, float formatting.

/// Natural log of the Gamma function for x > 0 (Lanczos, g = 7, n = 9).
///
/// Accurate to ~1e-13 relative over the range used here.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Surface area of the unit sphere in dimension n (continued to real n > 0):
/// `2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: f64) -> f64 {
    assert!(n > 0.0);
    2.0 * (0.5 * n * std::f64::consts::PI.ln() - ln_gamma(0.5 * n)).exp()
}

/// Angular constant `c_n = sphere_area(n) / (2 pi)^n` so that
/// `||v||_{L^2}^2 = c_n \int_0^\infty r^{n-1} |v_hat(r)|^2 dr` for radial data
/// with the non-unitary transform convention.
pub fn angular_constant(n: f64) -> f64 {
    sphere_area(n) / (2.0 * std::f64::consts::PI).powf(n)
}

/// Value plus derivatives up to order 3, propagated by forward-mode chain rule.
///
/// Used for the analytic time derivatives of the smooth cutoffs; never
/// finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl Jet3 {
    pub const fn constant(v: f64) -> Self {
        Jet3 { v, d1: 0.0, d2: 0.0, d3: 0.0 }
    }

    /// The identity jet at t: value t, unit first derivative.
    pub const fn variable(t: f64) -> Self {
        Jet3 { v: t, d1: 1.0, d2: 0.0, d3: 0.0 }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet3 { v: c * self.v, d1: c * self.d1, d2: c * self.d2, d3: c * self.d3 }
    }

    pub fn add(self, o: Self) -> Self {
        Jet3 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2, d3: self.d3 + o.d3 }
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.scale(-1.0))
    }

    pub fn mul(self, o: Self) -> Self {
        Jet3 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
            d3: self.d3 * o.v + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.v * o.d3,
        }
    }

    pub fn recip(self) -> Self {
        let w = 1.0 / self.v;
        let w2 = w * w;
        let d1 = -self.d1 * w2;
        let d2 = (2.0 * self.d1 * self.d1 * w - self.d2) * w2;
        let d3 = (6.0 * self.d1 * self.d2 * w - 6.0 * self.d1.powi(3) * w2 - self.d3) * w2;
        Jet3 { v: w, d1, d2, d3 }
    }

    pub fn div(self, o: Self) -> Self {
        self.mul(o.recip())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        let (u1, u2, u3) = (self.d1, self.d2, self.d3);
        Jet3 {
            v: e,
            d1: e * u1,
            d2: e * (u2 + u1 * u1),
            d3: e * (u3 + 3.0 * u1 * u2 + u1 * u1 * u1),
        }
    }

    /// Real power of a positive-valued jet.
    pub fn powf(self, a: f64) -> Self {
        // x^a = exp(a ln x)
        let x = self.v;
        assert!(x > 0.0, "Jet3::powf requires positive value");
        let lnj = Jet3 {
            v: x.ln(),
            d1: self.d1 / x,
            d2: (self.d2 * x - self.d1 * self.d1) / (x * x),
            d3: (self.d3 * x * x - 3.0 * self.d1 * self.d2 * x + 2.0 * self.d1.powi(3))
                / (x * x * x),
        };
        lnj.scale(a).exp()
    }
}

/// Format a float with 17 significant digits (shortest that round-trips any
/// f64) for CSV/JSON report files.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    format!("{:.16e}", x)
}

/// Deterministic FNV-1a 64-bit hash, used to fingerprint plans.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Ordinary least squares fit y = a + b x; returns (intercept, slope, rms residual).
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let mut ss = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - a - b * x;
        ss += r * r;
    }
    (a, b, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(2.0)).abs() < 1e-12);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
        // Gamma(5) = 24
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas_match_integer_dimensions() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area(1.0) - 2.0).abs() < 1e-12);
        assert!((sphere_area(2.0) - 2.0 * pi).abs() < 1e-11);
        assert!((sphere_area(3.0) - 4.0 * pi).abs() < 1e-11);
    }

    #[test]
    fn jet_matches_hand_derivatives() {
        // f(t) = exp(-1/t) at t = 0.7
        let t = Jet3::variable(0.7);
        let f = t.recip().scale(-1.0).exp();
        let g = |t: f64| (-1.0 / t).exp();
        let h = 1e-5;
        let d1 = (g(0.7 + h) - g(0.7 - h)) / (2.0 * h);
        let d2 = (g(0.7 + h) - 2.0 * g(0.7) + g(0.7 - h)) / (h * h);
        assert!((f.v - g(0.7)).abs() < 1e-14);
        assert!((f.d1 - d1).abs() < 1e-8);
        assert!((f.d2 - d2).abs() < 1e-5 * f.d2.abs().max(1.0));
    }

    #[test]
    fn jet_powf_matches_polynomial() {
        // (1 + t^2)^{-1.5} has known derivatives; check against mul-built version
        let t = Jet3::variable(0.4);
        let base = t.mul(t).add(Jet3::constant(1.0));
        let a = base.powf(-3.0);
        let b = base.recip().mul(base.recip()).mul(base.recip());
        assert!((a.v - b.v).abs() < 1e-13);
        assert!((a.d1 - b.d1).abs() < 1e-11);
        assert!((a.d2 - b.d2).abs() < 1e-10);
        assert!((a.d3 - b.d3).abs() < 1e-9);
    }

    #[test]
    fn ols_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 3.0 * x).collect();
        let (a, b, r) = ols(&xs, &ys);
        assert!((a - 2.5).abs() < 1e-12);
        assert!((b + 3.0).abs() < 1e-12);
        assert!(r < 1e-12);
    }
}
