//! Arbitrary-precision evaluation of the sphere heat-kernel spectral sum.
//!
//! Far from the diagonal the kernel is `O(e^{−d²/4t})` while individual terms
//! are `O(t^{−n/2})`, so at `t ≈ 0.01` the sum cancels a few hundred bits.

use astro_float::{BigFloat, Consts, RoundingMode, Sign, WORD_BIT_SIZE};

use super::SphereSpectrum;
use crate::error::{Error, Result};

const RM: RoundingMode = RoundingMode::ToEven;
const GUARD_BITS: usize = 96;
const MAX_BITS: usize = 8192;

pub(crate) fn to_f64(x: &BigFloat) -> f64 {
    let Some((words, _, sign, exponent, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    if x.is_zero() {
        return 0.0;
    }
    let base = 2f64.powi(-(WORD_BIT_SIZE as i32));
    let mut scale = 1.0;
    let mut acc = 0.0;
    for w in words.iter().rev().take(128 / WORD_BIT_SIZE + 1) {
        scale *= base;
        acc += *w as f64 * scale;
    }
    let e = exponent as i32;
    // split the power so neither factor overflows on its own
    let value = acc * 2f64.powi(e / 2) * 2f64.powi(e - e / 2);
    if sign == Sign::Neg {
        -value
    } else {
        value
    }
}

/// `log₂(Σ_l |term_l|)` estimated in `f64`, using `|P̂_l| ≤ 1`.
fn log2_term_mass(spec: &SphereSpectrum, t: f64) -> f64 {
    let vol = spec.volume();
    let logs: Vec<f64> = (0..=spec.max_degree)
        .map(|l| (spec.multiplicities[l] / vol).ln() - spec.eigenvalues[l] * t)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top + logs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()) / std::f64::consts::LN_2
}

fn sum_at_precision(spec: &SphereSpectrum, theta: f64, t: f64, p: usize, cc: &mut Consts) -> BigFloat {
    let lambda = (spec.n as f64 - 1.0) / 2.0;
    let x = BigFloat::from_f64(theta, p).cos(p, RM, cc);
    let two = BigFloat::from_f64(2.0, p);
    let mut prev = BigFloat::from_f64(1.0, p);
    let mut cur = x.clone();
    let mut sum = BigFloat::from_f64(0.0, p);
    // rounding the exponents to f64 would already cost more than the result
    let radius = BigFloat::from_f64(spec.radius, p);
    let scale = BigFloat::from_f64(t, p).div(&radius.mul(&radius, p, RM), p, RM);
    for l in 0..=spec.max_degree {
        let zonal = if l == 0 { prev.clone() } else { cur.clone() };
        let degree = (l * (l + spec.n - 1)) as f64;
        let decay = BigFloat::from_f64(0.0, p)
            .sub(&BigFloat::from_f64(degree, p).mul(&scale, p, RM), p, RM)
            .exp(p, RM, cc);
        let mult = BigFloat::from_f64(spec.multiplicities[l], p);
        sum = sum.add(&decay.mul(&mult, p, RM).mul(&zonal, p, RM), p, RM);
        if l >= 1 {
            // P̂_{l+1} = [2(l+λ) x P̂_l − l P̂_{l−1}] / (l + 2λ)
            let lf = l as f64;
            let a = BigFloat::from_f64(lf + lambda, p);
            let b = BigFloat::from_f64(lf, p);
            let c = BigFloat::from_f64(lf + 2.0 * lambda, p);
            let next = two
                .mul(&a, p, RM)
                .mul(&x, p, RM)
                .mul(&cur, p, RM)
                .sub(&b.mul(&prev, p, RM), p, RM)
                .div(&c, p, RM);
            prev = cur;
            cur = next;
        }
    }
    sum.div(&BigFloat::from_f64(spec.volume(), p), p, RM)
}

/// The spectral sum of [`SphereSpectrum`] at angle `theta`, evaluated with
/// enough bits that cancellation leaves at least 64 correct ones. `log2_hint`
/// is a rough guess of `log₂|result|` used to size the first attempt.
pub fn spectral_sum_precise(spec: &SphereSpectrum, theta: f64, t: f64, log2_hint: f64) -> Result<f64> {
    let mass = log2_term_mass(spec, t);
    let mut cc = Consts::new().map_err(|e| Error::Integration(format!("{e:?}")))?;
    let mut guess = log2_hint.min(mass);
    loop {
        let bits = ((mass - guess).max(0.0) as usize + 64 + GUARD_BITS).next_multiple_of(64);
        if bits > MAX_BITS {
            return Err(Error::PrecisionLoss {
                digits: (mass - guess) * std::f64::consts::LOG10_2,
            });
        }
        let value = to_f64(&sum_at_precision(spec, theta, t, bits, &mut cc));
        if value == 0.0 || !value.is_finite() {
            guess -= 256.0;
            continue;
        }
        let lost = mass - value.abs().log2();
        if lost + 64.0 + 32.0 <= bits as f64 {
            return Ok(value);
        }
        guess = value.abs().log2();
    }
}
