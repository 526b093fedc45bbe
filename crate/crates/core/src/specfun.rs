//! Cylinder functions of real argument.
//!
//! Orders 0 and 1 of `J` and `Y` are evaluated with the fdlibm algorithms
//! shipped in the `libm` crate (rational approximations on short intervals,
//! Hankel asymptotics beyond x = 2). Higher orders, needed only by the
//! separation-of-variables solution for the disc, come from recurrences:
//! Miller's backward recurrence for `J_n` and forward recurrence for `Y_n`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn check_order(order: u32) -> Result<()> {
    if order > 1 {
        return Err(Error::domain(format!(
            "order {order} not supported (use the *_orders functions for n > 1)"
        )));
    }
    Ok(())
}

/// Bessel function of the first kind `J_order(x)` for `order` in {0, 1}, `x >= 0`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "bessel_j needs finite x >= 0, got {x}"
        )));
    }
    Ok(if order == 0 { libm::j0(x) } else { libm::j1(x) })
}

/// Bessel function of the second kind `Y_order(x)` for `order` in {0, 1}, `x > 0`.
pub fn bessel_y(order: u32, x: f64) -> Result<f64> {
    check_order(order)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "bessel_y needs finite x > 0, got {x}"
        )));
    }
    Ok(if order == 0 { libm::y0(x) } else { libm::y1(x) })
}

/// Hankel function of the first kind, `J_order(x) + i Y_order(x)`.
pub fn hankel1(order: u32, x: f64) -> Result<Complex64> {
    Ok(Complex64::new(bessel_j(order, x)?, bessel_y(order, x)?))
}

/// `H0(x)` and `H1(x)` together, skipping the argument checks.
///
/// Callers guarantee `x > 0` and finite. Used in the kernel assembly loops.
#[inline]
pub(crate) fn hankel01_unchecked(x: f64) -> (Complex64, Complex64) {
    (
        Complex64::new(libm::j0(x), libm::y0(x)),
        Complex64::new(libm::j1(x), libm::y1(x)),
    )
}

/// `J_0(x), ..., J_nmax(x)` for `x >= 0`.
///
/// Uses upward recurrence while the order stays below the argument and
/// Miller's normalized backward recurrence otherwise.
pub fn bessel_j_orders(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::domain(format!(
            "bessel_j needs finite x >= 0, got {x}"
        )));
    }
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    if (nmax as f64) <= x {
        out[0] = libm::j0(x);
        if nmax >= 1 {
            out[1] = libm::j1(x);
        }
        for n in 1..nmax {
            out[n + 1] = (2.0 * n as f64 / x) * out[n] - out[n - 1];
        }
        return Ok(out);
    }

    // Backward recurrence from well above both nmax and x.
    let top = nmax.max(x.ceil() as usize) + 40 + (8.0 * x.cbrt()).ceil() as usize;
    let top = top + top % 2;
    let mut next = 0.0_f64; // J_{n+1}
    let mut cur = 1e-300_f64; // J_n
    let mut norm = 0.0_f64;
    for n in (1..=top).rev() {
        let prev = (2.0 * n as f64 / x) * cur - next;
        next = cur;
        cur = prev;
        // `cur` now holds J_{n-1}
        let order = n - 1;
        if order <= nmax {
            out[order] = cur;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    Ok(out)
}

/// `Y_0(x), ..., Y_nmax(x)` for `x > 0` by forward recurrence (stable for Y).
pub fn bessel_y_orders(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "bessel_y needs finite x > 0, got {x}"
        )));
    }
    let mut out = vec![0.0; nmax + 1];
    out[0] = libm::y0(x);
    if nmax >= 1 {
        out[1] = libm::y1(x);
    }
    for n in 1..nmax {
        out[n + 1] = (2.0 * n as f64 / x) * out[n] - out[n - 1];
    }
    Ok(out)
}

/// `H_n^(1)(x)` for `n = 0..=nmax`.
pub fn hankel1_orders(nmax: usize, x: f64) -> Result<Vec<Complex64>> {
    let j = bessel_j_orders(nmax, x)?;
    let y = bessel_y_orders(nmax, x)?;
    Ok(j.into_iter()
        .zip(y)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Maclaurin series for J_n, summed in f64. Accurate for small x only.
    fn j_series(n: u32, x: f64, terms: usize) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..terms {
            term *= -half * half / (k as f64 * (k as f64 + n as f64));
            sum += term;
        }
        sum
    }

    /// Y0 from its ascending series:
    /// Y0 = (2/pi)(ln(x/2)+gamma) J0 + (2/pi) sum_{k>=1} (-1)^{k+1} H_k (x^2/4)^k/(k!)^2
    fn y0_series(x: f64) -> f64 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut harmonic = 0.0;
        let mut sum = 0.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -q / (kf * kf);
            harmonic += 1.0 / kf;
            sum -= term * harmonic;
        }
        2.0 / PI * ((x / 2.0).ln() + EULER_GAMMA) * j_series(0, x, 60) + 2.0 / PI * sum
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0).unwrap(), 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn j0_at_one_matches_series() {
        let oracle = j_series(0, 1.0, 30);
        assert!((oracle - 0.765197686557967).abs() < 1e-15);
        let v = bessel_j(0, 1.0).unwrap();
        assert!((v - oracle).abs() <= 1e-12 * oracle.abs());
    }

    #[test]
    fn y0_at_one_matches_series() {
        let oracle = y0_series(1.0);
        assert!((oracle - 0.088256964215677).abs() < 1e-14);
        let v = bessel_y(0, 1.0).unwrap();
        assert!((v - oracle).abs() <= 1e-10 * oracle.abs());
    }

    #[test]
    fn y0_log_singularity() {
        assert!(bessel_y(0, 1e-8).unwrap() < -10.0);
    }

    #[test]
    fn wronskian_at_two() {
        let w = bessel_j(1, 2.0).unwrap() * bessel_y(0, 2.0).unwrap()
            - bessel_j(0, 2.0).unwrap() * bessel_y(1, 2.0).unwrap();
        assert!((w - 2.0 / (PI * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn hankel_is_componentwise() {
        for &x in &[0.3, 1.0, 2.0, 7.5, 50.0] {
            for order in 0..=1 {
                let h = hankel1(order, x).unwrap();
                assert_eq!(h.re, bessel_j(order, x).unwrap());
                assert_eq!(h.im, bessel_y(order, x).unwrap());
            }
        }
        let h = hankel1(0, 1.0).unwrap();
        assert!((h.re - 0.765197686557967).abs() < 1e-14);
        assert!((h.im - 0.088256964215677).abs() < 1e-14);
    }

    #[test]
    fn hankel1_order_one_at_two() {
        let h = hankel1(1, 2.0).unwrap();
        assert!((h.re - j_series(1, 2.0, 40)).abs() < 1e-14);
    }

    #[test]
    fn hankel_large_argument_magnitude() {
        let x = 50.0;
        let mag = hankel1(0, x).unwrap().norm();
        let lead = (2.0 / (PI * x)).sqrt();
        assert!((mag - lead).abs() < 0.01 * lead);
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j(0, f64::NAN).is_err());
        assert!(bessel_j(0, f64::INFINITY).is_err());
        assert!(bessel_y(0, 0.0).is_err());
        assert!(bessel_y(1, -1.0).is_err());
        assert!(hankel1(0, 0.0).is_err());
        assert!(bessel_j(2, 1.0).is_err());
    }

    #[test]
    fn wronskian_on_log_grid() {
        let n = 1000;
        let (a, b) = (0.1_f64.ln(), 100.0_f64.ln());
        for i in 0..n {
            let x = (a + (b - a) * i as f64 / (n - 1) as f64).exp();
            let w = libm::j1(x) * libm::y0(x) - libm::j0(x) * libm::y1(x);
            let exact = 2.0 / (PI * x);
            assert!((w - exact).abs() <= 1e-10 * exact, "x = {x}");
        }
    }

    #[test]
    fn j0_derivative_is_minus_j1() {
        let h = 1e-6;
        let mut x = 0.5;
        while x <= 20.0 {
            let fd = (libm::j0(x + h) - libm::j0(x - h)) / (2.0 * h);
            assert!((fd + libm::j1(x)).abs() <= 1e-6, "x = {x}");
            x += 0.25;
        }
    }

    /// J_n(x) = (1/2pi) int_0^{2pi} cos(n t - x sin t) dt, trapezoidal on a
    /// periodic integrand converges geometrically once the node count exceeds x.
    fn j_integral(n: u32, x: f64) -> f64 {
        let nodes = 512;
        let h = 2.0 * PI / nodes as f64;
        (0..nodes)
            .map(|i| {
                let t = i as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / nodes as f64
    }

    #[test]
    fn j_matches_integral_oracle_up_to_100() {
        let mut x = 0.0;
        while x <= 100.0 {
            for order in 0..=1 {
                let v = bessel_j(order, x).unwrap();
                let o = j_integral(order, x);
                // the absolute floor covers points next to a zero of J
                assert!((v - o).abs() <= 1e-12 * o.abs() + 1e-15, "J{order}({x})");
            }
            x += 0.37;
        }
    }

    #[test]
    fn higher_orders_match_series() {
        for &x in &[0.5, 3.0, 6.0] {
            let js = bessel_j_orders(40, x).unwrap();
            for (n, &v) in js.iter().enumerate().take(25) {
                let s = j_series(n as u32, x, 80);
                assert!((v - s).abs() <= 1e-14 + 1e-12 * s.abs(), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn higher_orders_satisfy_wronskian() {
        // J_{n+1} Y_n - J_n Y_{n+1} = 2/(pi x)
        for &x in &[1.0, 6.0, 30.0] {
            let j = bessel_j_orders(50, x).unwrap();
            let y = bessel_y_orders(50, x).unwrap();
            let exact = 2.0 / (PI * x);
            for n in 0..50 {
                let w = j[n + 1] * y[n] - j[n] * y[n + 1];
                assert!((w - exact).abs() <= 1e-10 * exact, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn forward_branch_agrees_with_backward() {
        // nmax below x uses upward recurrence; compare with the Miller branch.
        let x = 25.0;
        let up = bessel_j_orders(20, x).unwrap();
        let miller = bessel_j_orders(60, x).unwrap();
        for n in 0..=20 {
            assert!((up[n] - miller[n]).abs() < 1e-13, "n={n}");
        }
    }
}
