//! Airy functions of non-negative real argument in log-magnitude form.
//!
//! `Ai` is taken from its Maclaurin series while `ζ = (2/3) s^{3/2} < 2`
//! and from the modified Bessel functions `K_{1/3}`, `K_{2/3}` (Steed's
//! continued fraction, exponentially scaled) beyond that, which avoids the
//! cancellation the Maclaurin series suffers as `Ai` decays. `Bi` has an
//! all-positive Maclaurin series and is summed directly up to `s = 10`,
//! switching to its asymptotic expansion above.

#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `Ai(0) = 3^{-2/3} / Γ(2/3)`.
const AI0: f64 = 0.355_028_053_887_817_24;
/// `-Ai'(0) = 3^{-1/3} / Γ(1/3)`.
const MINUS_DAI0: f64 = 0.258_819_403_792_806_8;
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Above this `ζ` the Bessel route is used for `Ai`.
const AI_BESSEL_ZETA: f64 = 2.0;
/// Above this argument the asymptotic expansion is used for `Bi`.
const BI_ASYMPTOTIC_S: f64 = 10.0;

/// A real number stored as `sign * exp(ln_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    pub ln_abs: f64,
    pub sign: f64,
}

impl LogValue {
    pub fn from_f64(v: f64) -> Self {
        LogValue {
            ln_abs: v.abs().ln(),
            sign: if v < 0.0 { -1.0 } else { 1.0 },
        }
    }

    /// Value with a scaling exponent already applied: `sign * exp(ln_abs + shift)`.
    pub fn scaled(&self, shift: f64) -> f64 {
        self.sign * (self.ln_abs + shift).exp()
    }

    pub fn value(&self) -> f64 {
        self.scaled(0.0)
    }

    /// Multiplication by a positive constant.
    pub fn times_positive(&self, ln_factor: f64) -> Self {
        LogValue {
            ln_abs: self.ln_abs + ln_factor,
            sign: self.sign,
        }
    }
}

/// `Ai(s)`, `Bi(s)`, `Ai'(s)`, `Bi'(s)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValues {
    pub ai: LogValue,
    pub bi: LogValue,
    pub dai: LogValue,
    pub dbi: LogValue,
    /// `ζ = (2/3) s^{3/2}`, the natural scaling exponent.
    pub zeta: f64,
}

/// Evaluates the four Airy values at `s >= 0`.
pub fn eval_airy(s: f64) -> Result<AiryValues> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::domain(
            "s",
            format!("Airy argument must be finite and >= 0, got {s}"),
        ));
    }
    let zeta = 2.0 / 3.0 * s * s.sqrt();

    let maclaurin = if zeta < AI_BESSEL_ZETA || s <= BI_ASYMPTOTIC_S {
        Some(maclaurin(s))
    } else {
        None
    };

    let (ai, dai) = if zeta < AI_BESSEL_ZETA {
        let m = maclaurin.expect("computed above");
        (
            LogValue::from_f64(AI0 * m.f - MINUS_DAI0 * m.g),
            LogValue::from_f64(AI0 * m.df - MINUS_DAI0 * m.dg),
        )
    } else {
        let (k13, k23) = bessel_k_third_scaled(zeta);
        // Ai = sqrt(s/3) K_{1/3}(ζ) / π, Ai' = -s K_{2/3}(ζ) / (π √3)
        let ai = LogValue {
            ln_abs: ((s / 3.0).sqrt() * k13 / PI).ln() - zeta,
            sign: 1.0,
        };
        let dai = LogValue {
            ln_abs: (s * k23 / (PI * SQRT3)).ln() - zeta,
            sign: -1.0,
        };
        (ai, dai)
    };

    let (bi, dbi) = if s <= BI_ASYMPTOTIC_S {
        let m = maclaurin.expect("computed above");
        (
            LogValue::from_f64(SQRT3 * (AI0 * m.f + MINUS_DAI0 * m.g)),
            LogValue::from_f64(SQRT3 * (AI0 * m.df + MINUS_DAI0 * m.dg)),
        )
    } else {
        bi_asymptotic(s, zeta)
    };

    Ok(AiryValues {
        ai,
        bi,
        dai,
        dbi,
        zeta,
    })
}

#[derive(Clone, Copy)]
struct Maclaurin {
    f: f64,
    g: f64,
    df: f64,
    dg: f64,
}

/// The even/odd auxiliary series `f`, `g` and their derivatives.
fn maclaurin(s: f64) -> Maclaurin {
    let s3 = s * s * s;
    let mut tf = 1.0;
    let mut tg = s;
    let mut tdf = s * s / 2.0;
    let mut tdg = 1.0;
    let mut out = Maclaurin {
        f: 1.0,
        g: s,
        df: tdf,
        dg: 1.0,
    };
    for k in 1..400 {
        let k3 = 3.0 * k as f64;
        tf *= s3 / ((k3 - 1.0) * k3);
        tg *= s3 / (k3 * (k3 + 1.0));
        tdf *= s3 / (k3 * (k3 + 2.0));
        tdg *= s3 / ((k3 - 2.0) * k3);
        out.f += tf;
        out.g += tg;
        out.df += tdf;
        out.dg += tdg;
        let eps = 1e-17;
        if tf <= eps * out.f && tg <= eps * out.g && tdf <= eps * out.df && tdg <= eps * out.dg {
            break;
        }
    }
    out
}

/// `exp(x) K_{1/3}(x)` and `exp(x) K_{2/3}(x)` for `x >= 2`.
///
/// Steed's continued fraction (Temme's CF2) at order `mu = -1/3` yields
/// `K_{-1/3} = K_{1/3}` and `K_{2/3}` together.
fn bessel_k_third_scaled(x: f64) -> (f64, f64) {
    let mu = -1.0 / 3.0;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k_mu = (PI / (2.0 * x)).sqrt() / s;
    let k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    (k_mu, k_mu1)
}

/// Large-argument expansions of `Bi` and `Bi'`.
fn bi_asymptotic(s: f64, zeta: f64) -> (LogValue, LogValue) {
    let mut u = 1.0;
    let mut sum_u = 1.0;
    let mut sum_v = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let fk = k as f64;
        u *= (6.0 * fk - 5.0) * (6.0 * fk - 3.0) * (6.0 * fk - 1.0)
            / ((2.0 * fk - 1.0) * 216.0 * fk);
        let v = -(6.0 * fk + 1.0) / (6.0 * fk - 1.0) * u;
        let tu = u / zeta.powi(k);
        let tv = v / zeta.powi(k);
        if tu.abs() > prev {
            break;
        }
        prev = tu.abs();
        sum_u += tu;
        sum_v += tv;
        if tu.abs() < 1e-17 * sum_u.abs() && tv.abs() < 1e-17 * sum_v.abs() {
            break;
        }
    }
    let quarter = s.powf(0.25);
    let sqrt_pi = PI.sqrt();
    (
        LogValue {
            ln_abs: (sum_u / (sqrt_pi * quarter)).ln() + zeta,
            sign: 1.0,
        },
        LogValue {
            ln_abs: (sum_v * quarter / sqrt_pi).ln() + zeta,
            sign: 1.0,
        },
    )
}
