use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Above this argument (and when the order is small relative to it) the
/// large-argument expansion is used instead of the power series.
const ASYMPTOTIC_THRESHOLD: f64 = 30.0;

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEFFS[0];
    let t = x + 7.5;
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `log I_order(kappa)`, the log of the modified Bessel function of the
/// first kind.
///
/// Power series (all terms positive, summed with rescaling) for moderate
/// arguments and the large-argument expansion `e^κ / sqrt(2πκ) Σ (-1)^k a_k / κ^k`
/// otherwise. `kappa = 0` gives `0` for order 0 and `-inf` for positive orders.
pub fn log_bessel_i(order: f64, kappa: f64) -> Result<f64> {
    if !(order >= 0.0) || !order.is_finite() {
        return Err(Error::Domain(format!("bessel order must be finite and >= 0, got {order}")));
    }
    if !kappa.is_finite() {
        return Err(Error::Domain(format!("bessel argument must be finite, got {kappa}")));
    }
    if kappa < 0.0 {
        return Err(Error::Domain(format!("bessel argument must be >= 0, got {kappa}")));
    }
    if kappa == 0.0 {
        return Ok(if order == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if kappa > ASYMPTOTIC_THRESHOLD && kappa > 2.0 * order * order {
        Ok(log_bessel_asymptotic(order, kappa))
    } else {
        Ok(log_bessel_series(order, kappa))
    }
}

fn log_bessel_series(order: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut log_scale = 0.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + order));
        sum += term;
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            log_scale += 250.0 * std::f64::consts::LN_10;
        }
        if term < sum * 1e-17 && k > q.sqrt() {
            break;
        }
        if k > 10_000.0 {
            break;
        }
    }
    order * (0.5 * x).ln() - ln_gamma(order + 1.0) + sum.ln() + log_scale
}

fn log_bessel_asymptotic(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() || k > 200.0 {
            break;
        }
        k += 1.0;
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// `I_{order+1}(κ) / I_order(κ)`; this is also `-d/dκ log C_D(κ)` of the
/// von Mises-Fisher normaliser when `order = D/2 - 1`.
pub fn bessel_i_ratio(order: f64, kappa: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Ok(0.0);
    }
    if kappa < 1e-6 {
        // leading term of the series ratio
        return Ok(kappa / (2.0 * (order + 1.0)));
    }
    Ok((log_bessel_i(order + 1.0, kappa)? - log_bessel_i(order, kappa)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an arbitrary-precision evaluation (40 digits).
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 1e-8, 2.500000000000000089e-17),
        (0.0, 0.5, 0.061549719185481303941),
        (0.0, 1.0, 0.23591435850717864869),
        (0.0, 25.0, 22.476728004999243759),
        (0.0, 29.9, 27.28638531055509432),
        (0.0, 30.1, 27.483023208951183233),
        (0.0, 499.9, 495.87410772821835322),
        (0.5, 1e-8, -9.4361317246209101413),
        (0.5, 0.001, -3.6796688254691348369),
        (0.5, 5.0, 3.2762971096179065817),
        (0.5, 100.0, 96.778476373801281574),
        (1.0, 1e-8, -19.113827924512310748),
        (1.0, 1.0, -0.57064798749083128142),
        (1.0, 5.0, 3.1919420305456754634),
        (1.0, 29.9, 27.269374273074856652),
        (1.0, 30.1, 27.466127168532580552),
        (1.0, 50.0, 47.117473616587126523),
        (1.0, 499.9, 495.87310652593876873),
        (1.5, 0.5, -2.3392130423923242719),
        (1.5, 100.0, 96.768426037947780133),
        (2.0, 0.001, -15.894952016310777525),
        (2.0, 25.0, 22.395102118790491189),
        (2.0, 499.9, 495.87010292312655009),
    ];

    #[test]
    fn matches_reference_values() {
        for &(order, kappa, expected) in REFERENCE {
            let got = log_bessel_i(order, kappa).unwrap();
            assert!(
                (got - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                "order {order} kappa {kappa}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn half_integer_closed_form() {
        // I_{1/2}(κ) = sqrt(2/(πκ)) sinh κ
        for &k in &[1e-8f64, 1e-3, 0.3, 1.0, 7.0, 29.0, 31.0, 120.0, 500.0] {
            let closed = 0.5 * (2.0 / (PI * k)).ln() + k + (-(-2.0 * k).exp_m1()).ln() - 2f64.ln();
            let got = log_bessel_i(0.5, k).unwrap();
            assert!((got - closed).abs() < 1e-10 * closed.abs().max(1.0), "κ={k}: {got} vs {closed}");
        }
        assert!((log_bessel_i(0.5, 1.0).unwrap() - 0.937_674_888_245_488_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn edge_cases() {
        assert_eq!(log_bessel_i(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(log_bessel_i(1.0, 0.0).unwrap(), f64::NEG_INFINITY);
        assert!(log_bessel_i(1.0, 1e-300).unwrap() < -600.0);
        assert!(matches!(log_bessel_i(0.0, -1.0), Err(Error::Domain(_))));
        assert!(log_bessel_i(0.0, f64::NAN).is_err());
    }

    #[test]
    fn monotone_in_kappa() {
        for &order in &[0.5, 1.0, 2.5] {
            let mut prev = f64::NEG_INFINITY;
            let mut k = 1e-8;
            while k < 500.0 {
                let v = log_bessel_i(order, k).unwrap();
                assert!(v > prev, "order {order} not increasing at κ={k}");
                prev = v;
                k *= 1.13;
            }
        }
    }

    #[test]
    fn ratio_matches_closed_form_for_s2() {
        // I_{3/2}/I_{1/2} = coth κ - 1/κ
        for &k in &[1e-7f64, 0.01, 0.5, 3.0, 40.0, 400.0] {
            let expected = if k < 1e-3 { k / 3.0 - k.powi(3) / 45.0 } else { 1.0 / k.tanh() - 1.0 / k };
            let got = bessel_i_ratio(0.5, k).unwrap();
            assert!((got - expected).abs() < 1e-9 * expected.max(1e-6), "κ={k}: {got} vs {expected}");
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-14);
        assert!((ln_gamma(1.5) - (0.5 * PI.sqrt()).ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }
}
