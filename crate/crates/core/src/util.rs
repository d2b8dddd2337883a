//! Small numeric helpers shared across modules.

/// Euclidean distance between equal-length slices.
/// Length agreement is the caller's responsibility.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// FNV-1a over raw f64 bit patterns. Used to fingerprint grids so that a
/// measure built on one grid cannot be paired with a matrix built on another.
pub struct Fnv64(u64);

impl Fnv64 {
    pub fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Wilson score interval halfwidth at 95% for `successes` out of `n`.
pub fn wilson_halfwidth(successes: usize, n: usize) -> f64 {
    debug_assert!(n > 0);
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf)
}


/// Least-squares line fit. Returns (slope, intercept, r_squared).
/// When the responses have no variance the fit is the constant line and
/// r_squared is reported as 1.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return (0.0, my, 1.0);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if syy < 1e-30 {
        return (slope, intercept, 1.0);
    }
    let ss_res = syy - slope * sxy;
    (slope, intercept, 1.0 - (ss_res / syy).max(0.0))
}

/// Gauss-Legendre nodes and weights on [a, b], computed by Newton iteration
/// on the Legendre recurrence. Accurate to machine precision for n <= 64.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) via the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn_prev = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn_prev) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// Log-gamma via the Lanczos approximation (g = 7, 9 coefficients).
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
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Bessel J_nu for the half-integer and small integer orders that appear in
/// radial Fourier inversion in dimensions 1..=6 (nu = d/2 - 1).
///
/// `two_nu` is 2*nu, so the supported values are -1, 0, 1, 2, 3, 4.
pub fn bessel_j(two_nu: i32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    match two_nu {
        -1 => {
            // J_{-1/2}(x) = sqrt(2/(pi x)) cos x
            if x == 0.0 {
                f64::INFINITY
            } else {
                (2.0 / (std::f64::consts::PI * x)).sqrt() * x.cos()
            }
        }
        1 => {
            // J_{1/2}(x) = sqrt(2/(pi x)) sin x
            if x == 0.0 {
                0.0
            } else {
                (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin()
            }
        }
        3 => {
            // J_{3/2}(x) = sqrt(2/(pi x)) (sin x / x - cos x)
            if x == 0.0 {
                return 0.0;
            }
            let osc = if x < 0.1 {
                // Series for sin x / x - cos x; avoids cancellation.
                let x2 = x * x;
                x2 / 3.0 * (1.0 - x2 / 10.0 * (1.0 - x2 / 28.0))
            } else {
                x.sin() / x - x.cos()
            };
            (2.0 / (std::f64::consts::PI * x)).sqrt() * osc
        }
        0 => bessel_j_int(0, x),
        2 => bessel_j_int(1, x),
        4 => bessel_j_int(2, x),
        other => panic!("unsupported Bessel order 2nu = {other}"),
    }
}

/// Integer-order J_n: ascending series for moderate arguments, Hankel
/// asymptotic expansion beyond. Both pieces are good to ~1e-10 near the
/// crossover at x = 14.
fn bessel_j_int(n: usize, x: f64) -> f64 {
    if x < 12.0 {
        // sum_k (-1)^k (x/2)^{n+2k} / (k! (n+k)!)
        let half = 0.5 * x;
        let mut term = 1.0;
        for k in 1..=n {
            term *= half / k as f64;
        }
        let mut sum = term;
        let h2 = half * half;
        for k in 1..60 {
            term *= -h2 / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-30) {
                break;
            }
        }
        sum
    } else {
        // Hankel expansion: J_n(x) ~ sqrt(2/(pi x)) [P cos chi - Q sin chi]
        // with chi = x - (2n+1) pi/4 and mu = 4n^2. The terms obey
        // a_k = a_{k-1} (mu - (2k-1)^2) / (8kx); truncating after a_7 leaves
        // an error under 1e-8 at the x = 12 crossover for n <= 2.
        let mu = 4.0 * (n as f64) * (n as f64);
        let mut a = [0.0_f64; 8];
        a[0] = 1.0;
        for k in 1..8 {
            let m = 2.0 * k as f64 - 1.0;
            a[k] = a[k - 1] * (mu - m * m) / (8.0 * k as f64 * x);
        }
        let p = a[0] - a[2] + a[4] - a[6];
        let q = a[1] - a[3] + a[5] - a[7];
        let chi = x - (2.0 * n as f64 + 1.0) * std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Shortest-roundtrip float formatting; the single formatter used for all CSV
/// output so reruns are byte-identical.
pub fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // 8 nodes integrate degree <= 15 exactly.
        let (xs, ws) = gauss_legendre(8, 0.0, 2.0);
        let integral: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * (x.powi(7) - 3.0 * x.powi(2) + 1.0))
            .sum();
        // int_0^2 x^7 - 3x^2 + 1 dx = 32 - 8 + 2 = 26
        assert!((integral - 26.0).abs() < 1e-12, "got {integral}");
    }

    #[test]
    fn gauss_legendre_32_matches_smooth_integral() {
        let (xs, ws) = gauss_legendre(32, 0.0, 1.0);
        let integral: f64 = xs.iter().zip(&ws).map(|(x, w)| w * (-x).exp()).sum();
        assert!((integral - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-12);
        assert!((ln_gamma(2.0)).abs() < 1e-12);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-11);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-11);
    }

    #[test]
    fn bessel_half_orders_match_closed_forms() {
        for &x in &[0.3, 1.7, 9.0, 40.0] {
            let j = bessel_j(1, x);
            let exact = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sin();
            assert!((j - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn bessel_j0_reference_values() {
        // Reference: J_0(1) = 0.7651976865579666, J_0(5) = -0.17759677131433830,
        // J_0(20) = 0.16702466434058316 (A&S tables).
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-9);
        assert!((bessel_j(0, 5.0) + 0.177_596_771_314_338_3).abs() < 1e-9);
        assert!((bessel_j(0, 20.0) - 0.167_024_664_340_583_16).abs() < 1e-7);
    }

    #[test]
    fn bessel_j1_reference_values() {
        // J_1(1) = 0.4400505857449335, J_1(5) = -0.3275791375914652,
        // J_1(20) = 0.06683312417584991.
        assert!((bessel_j(2, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-9);
        assert!((bessel_j(2, 5.0) + 0.327_579_137_591_465_2).abs() < 1e-9);
        assert!((bessel_j(2, 20.0) - 0.066_833_124_175_849_91).abs() < 1e-7);
    }

    #[test]
    fn bessel_branches_match_reference_near_crossover() {
        // Reference values from a high-precision series evaluation. The points
        // at 11.999 exercise the power series, the rest the Hankel branch.
        let cases = [
            (0usize, 11.999, 0.047465830573456547),
            (0, 12.001, 0.047912724710314618),
            (0, 25.0, 0.096266783275958116),
            (1, 11.999, -0.22351330619483207),
            (1, 12.001, -0.223380686416877),
            (1, 25.0, -0.1253502495802899),
            (2, 11.999, -0.08472115288278767),
            (2, 12.001, -0.085139736862114802),
            (2, 25.0, -0.10629480324238131),
        ];
        for (n, x, want) in cases {
            let got = bessel_j_int(n, x);
            assert!(
                (got - want).abs() < 1e-7,
                "J_{n}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn wilson_halfwidth_shrinks_with_n() {
        let w1 = wilson_halfwidth(50, 100);
        let w2 = wilson_halfwidth(200, 400);
        assert!(w2 < w1);
        // Quadrupling n should halve the width to within 20%.
        assert!((w1 / w2 - 2.0).abs() < 0.4);
    }

    #[test]
    fn linear_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (slope, intercept, r2) = linear_fit(&xs, &ys);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((intercept - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
