//! Short-time heat-kernel limits predicted from Jacobi determinants, and a
//! spectral-sum heat kernel on round spheres to check them against.
//!
//! For a point pair joined by a unique nondegenerate minimizer,
//! `p_t(x, y)/e_t(d) → J(x, y)^{−1/2}`. For antipodal points on `Sⁿ_R` the
//! minimizers form an `(n−1)`-sphere and `(4πt)^{(n−1)/2} p_t/e_t` converges to
//! `2 π^{3n/2−1} R^{n−1} / Γ(n/2)`.

mod precise;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{ensure_finite, Error, Result};
use crate::gelfand_yaglom::{solve_jacobi_ode, DEFAULT_STEPS};
use crate::model_geometry::{jacobi_endomorphism, GeodesicData, ModelManifold};
use crate::series::richardson_tableau;

pub use precise::spectral_sum_precise;

/// Omitted spectral mass must stay below this fraction of the kernel value.
pub const TRUNCATION_TOL: f64 = 1e-14;
/// Double-precision sums that cancel more than this many digits are rejected.
pub const MAX_CANCELLATION_DIGITS: f64 = 12.0;

/// `(4πt)^{−n/2} exp(−d²/4t)`.
pub fn euclidean_heat_kernel(d: f64, n: usize, t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("d", d)?;
    if t <= 0.0 {
        return Err(Error::Domain(format!("heat time must be positive, got {t}")));
    }
    if d < 0.0 {
        return Err(Error::Domain(format!("distance must be non-negative, got {d}")));
    }
    Ok((4.0 * PI * t).powf(-(n as f64) / 2.0) * (-d * d / (4.0 * t)).exp())
}

/// `vol(Sᵐ)` for the unit sphere, from `vol(Sᵐ) = 2π/(m−1) · vol(Sᵐ⁻²)`.
pub fn unit_sphere_volume(m: usize) -> f64 {
    match m {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 1.0) * unit_sphere_volume(m - 2),
    }
}

/// Laplace spectrum of `Sⁿ_R` up to degree `L`, with zonal data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpectrum {
    pub n: usize,
    pub radius: f64,
    pub max_degree: usize,
    /// `l(l + n − 1)/R²`.
    pub eigenvalues: Vec<f64>,
    /// Dimension of the degree-`l` harmonics.
    pub multiplicities: Vec<f64>,
}

fn binomial(top: i64, bottom: i64) -> f64 {
    if top < bottom || bottom < 0 || top < 0 {
        return 0.0;
    }
    (0..bottom).fold(1.0, |acc, i| acc * (top - i) as f64 / (i + 1) as f64)
}

impl SphereSpectrum {
    pub fn new(n: usize, radius: f64, max_degree: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sphere dimension must be at least 1".into()));
        }
        ensure_finite("radius", radius)?;
        if radius <= 0.0 {
            return Err(Error::Domain("radius must be positive".into()));
        }
        let nn = n as i64;
        let eigenvalues = (0..=max_degree)
            .map(|l| (l * (l + n - 1)) as f64 / (radius * radius))
            .collect();
        let multiplicities = (0..=max_degree as i64)
            .map(|l| binomial(l + nn - 1, nn - 1) + binomial(l + nn - 2, nn - 1))
            .collect();
        Ok(Self {
            n,
            radius,
            max_degree,
            eigenvalues,
            multiplicities,
        })
    }

    /// Smallest degree whose omitted tail at time `t` is below
    /// `TRUNCATION_TOL · 1e-3 · magnitude`.
    pub fn for_time(n: usize, radius: f64, t: f64, magnitude: f64) -> Result<Self> {
        let target = TRUNCATION_TOL * 1e-3 * magnitude;
        let mut degree = 8;
        loop {
            let spec = Self::new(n, radius, degree)?;
            if spec.tail_bound(t) < target {
                return Ok(spec);
            }
            if degree > 1 << 20 {
                return Err(Error::InsufficientDegree {
                    degree,
                    tail: spec.tail_bound(t),
                    allowed: target,
                });
            }
            degree = degree * 5 / 4 + 1;
        }
    }

    pub fn volume(&self) -> f64 {
        unit_sphere_volume(self.n) * self.radius.powi(self.n as i32)
    }

    /// `Σ_{l > L} mult_l e^{−λ_l t} / vol`, bounded by a geometric series once
    /// the terms decrease.
    pub fn tail_bound(&self, t: f64) -> f64 {
        let term = |l: usize| {
            let nn = self.n as i64;
            let li = l as i64;
            let mult = binomial(li + nn - 1, nn - 1) + binomial(li + nn - 2, nn - 1);
            let lambda = (l * (l + self.n - 1)) as f64 / (self.radius * self.radius);
            mult * (-lambda * t).exp() / self.volume()
        };
        let first = term(self.max_degree + 1);
        let q = term(self.max_degree + 2) / first;
        if first == 0.0 {
            0.0
        } else if q < 1.0 {
            first / (1.0 - q)
        } else {
            f64::INFINITY
        }
    }

    /// `P̂_l(cos θ)` for `l = 0..=L`, normalized Gegenbauer polynomials with
    /// `P̂_l(1) = 1` (Chebyshev polynomials when `n = 1`).
    pub fn zonal_profiles(&self, theta: f64) -> Vec<f64> {
        let x = theta.cos();
        let lambda = (self.n as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.max_degree + 1);
        out.push(1.0);
        if self.max_degree >= 1 {
            out.push(x);
        }
        for l in 1..self.max_degree {
            let lf = l as f64;
            let next = (2.0 * (lf + lambda) * x * out[l] - lf * out[l - 1]) / (lf + 2.0 * lambda);
            out.push(next);
        }
        out
    }

    /// Degree-`l` zonal kernels `Z_l(θ) = mult_l P̂_l(cos θ)/vol`.
    pub fn zonal_values(&self, theta: f64) -> Vec<f64> {
        let vol = self.volume();
        self.zonal_profiles(theta)
            .into_iter()
            .zip(&self.multiplicities)
            .map(|(p, m)| m * p / vol)
            .collect()
    }
}

/// `p_t(θ) = Σ_{l ≤ L} e^{−λ_l t} Z_l(θ)` in double precision.
pub fn sphere_heat_kernel(spec: &SphereSpectrum, theta: f64, t: f64) -> Result<f64> {
    ensure_finite("t", t)?;
    ensure_finite("theta", theta)?;
    if t <= 0.0 {
        return Err(Error::Domain(format!("heat time must be positive, got {t}")));
    }
    let terms: Vec<f64> = spec
        .zonal_values(theta)
        .into_iter()
        .zip(&spec.eigenvalues)
        .map(|(z, lambda)| (-lambda * t).exp() * z)
        .collect();
    let sum: f64 = terms.iter().rev().sum();
    let mass: f64 = terms.iter().rev().map(|x| x.abs()).sum();
    let digits = (mass / sum.abs()).log10();
    if !(digits <= MAX_CANCELLATION_DIGITS) {
        return Err(Error::PrecisionLoss { digits });
    }
    check_truncation(spec, t, sum)?;
    Ok(sum)
}

fn check_truncation(spec: &SphereSpectrum, t: f64, sum: f64) -> Result<()> {
    let tail = spec.tail_bound(t);
    let allowed = TRUNCATION_TOL * sum.abs();
    if tail >= allowed {
        return Err(Error::InsufficientDegree {
            degree: spec.max_degree,
            tail,
            allowed,
        });
    }
    Ok(())
}

/// Heat kernel of `Sⁿ_R` at geodesic distance `d`, with the degree chosen
/// adaptively and extended precision used when the sum cancels.
pub fn sphere_heat_kernel_at_distance(n: usize, radius: f64, d: f64, t: f64) -> Result<f64> {
    let theta = d / radius;
    let euclid = euclidean_heat_kernel(d, n, t)?;
    // the kernel is within a modest factor of e_t times a power of t; 1e-6 is a safe floor
    let magnitude = euclid * 1e-6 * (4.0 * PI * t).powf(-(n as f64) / 2.0).min(1.0);
    let spec = SphereSpectrum::for_time(n, radius, t, magnitude)?;
    match sphere_heat_kernel(&spec, theta, t) {
        Err(Error::PrecisionLoss { .. }) => {
            let value = spectral_sum_precise(&spec, theta, t, magnitude.log2())?;
            check_truncation(&spec, t, value)?;
            Ok(value)
        }
        other => other,
    }
}

/// `J(x, y)^{−1/2}` from the Jacobi equation along the minimizer of length `d`.
pub fn nondegenerate_limit_prediction(m: &ModelManifold, d: f64) -> Result<f64> {
    let ModelManifold::ConstantCurvature { .. } = m else {
        return Err(Error::OutOfScope("limit predictions need a constant-curvature manifold".into()));
    };
    if let Some(limit) = m.conjugate_distance() {
        if d >= limit {
            return Err(Error::DegenerateRoute(format!(
                "d = {d} reaches the conjugate distance {limit}; minimizers are not isolated"
            )));
        }
    }
    let g = GeodesicData::new(m.clone(), d)?;
    let prop = solve_jacobi_ode(&jacobi_endomorphism(&g)?, DEFAULT_STEPS)?;
    Ok(prop.det_j_end().powf(-0.5))
}

fn check_antipodal(n: usize, radius: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfScope(
            "antipodal points on S^1 are joined by two isolated geodesics".into(),
        ));
    }
    ensure_finite("radius", radius)?;
    if radius <= 0.0 {
        return Err(Error::Domain("radius must be positive".into()));
    }
    Ok(())
}

/// `2 π^{3n/2−1} R^{n−1} / Γ(n/2)`.
pub fn antipodal_sphere_limit_closed_form(n: usize, radius: f64) -> Result<f64> {
    check_antipodal(n, radius)?;
    let nf = n as f64;
    Ok(2.0 * PI.powf(1.5 * nf - 1.0) * radius.powi(n as i32 - 1) / gamma(nf / 2.0))
}

/// `∫_{S_xy} |det J'(1)|^{1/2} dv` over the sphere of initial velocities of
/// length `πR`, with `J'(1)` from the Jacobi equation.
pub fn antipodal_limit_via_sxy(n: usize, radius: f64) -> Result<f64> {
    check_antipodal(n, radius)?;
    let m = ModelManifold::sphere(n, radius)?;
    let g = GeodesicData::new(m, PI * radius)?;
    let prop = solve_jacobi_ode(&jacobi_endomorphism(&g)?, DEFAULT_STEPS)?;
    let density = prop.jprime_end().determinant().abs().sqrt();
    Ok(density * unit_sphere_volume(n - 1) * (PI * radius).powi(n as i32 - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatCase {
    Nondegenerate { distance: f64 },
    Antipodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatLimitReport {
    pub n: usize,
    pub radius: f64,
    pub case: HeatCase,
    /// Dimension of the family of minimizers.
    pub k: usize,
    pub predicted: f64,
    /// `(t, (4πt)^{k/2} p_t / e_t)`.
    pub oracle_values: Vec<(f64, f64)>,
    /// Richardson tableau over the oracle values; row `m` removes `t, …, tᵐ`.
    pub richardson: Vec<Vec<f64>>,
    pub extrapolated_oracle: f64,
    pub rel_deviation: f64,
}

impl HeatLimitReport {
    /// Rows `t,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "ratio"]).map_err(io)?;
        for (t, r) in &self.oracle_values {
            w.write_record([format!("{t:.17e}"), format!("{r:.17e}")]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Default time grid `t = 0.2 · 2^{−j}`, `j = 0..=4`.
pub fn default_time_grid() -> Vec<f64> {
    (0..5).map(|j| 0.2 / 2f64.powi(j)).collect()
}

/// Number of Richardson eliminations used for the extrapolated value.
pub const RICHARDSON_LEVELS: usize = 2;

pub fn heat_limit_validation(n: usize, radius: f64, case: HeatCase) -> Result<HeatLimitReport> {
    heat_limit_validation_on(n, radius, case, &default_time_grid())
}

/// Scaled ratios on a geometric time grid (ratio 2, decreasing), extrapolated
/// to `t → 0` and compared with the determinant prediction.
pub fn heat_limit_validation_on(n: usize, radius: f64, case: HeatCase, times: &[f64]) -> Result<HeatLimitReport> {
    if times.is_empty() {
        return Err(Error::EmptyRequest("empty time grid".into()));
    }
    let (d, k, predicted) = match case {
        HeatCase::Nondegenerate { distance } => {
            ensure_finite("distance", distance)?;
            if !(0.0..PI * radius).contains(&distance) {
                return Err(Error::Domain(format!(
                    "nondegenerate case needs 0 <= d < pi R = {}, got {distance}",
                    PI * radius
                )));
            }
            let m = ModelManifold::sphere(n, radius)?;
            (distance, 0, nondegenerate_limit_prediction(&m, distance)?)
        }
        HeatCase::Antipodal => (PI * radius, n - 1, antipodal_sphere_limit_closed_form(n, radius)?),
    };
    let mut oracle_values = Vec::with_capacity(times.len());
    for &t in times {
        let p = sphere_heat_kernel_at_distance(n, radius, d, t)?;
        let e = euclidean_heat_kernel(d, n, t)?;
        let ratio = (4.0 * PI * t).powf(k as f64 / 2.0) * p / e;
        oracle_values.push((t, ratio));
    }
    let values: Vec<f64> = oracle_values.iter().map(|(_, r)| *r).collect();
    let richardson = richardson_tableau(&values, 2.0);
    let row = RICHARDSON_LEVELS.min(richardson.len() - 1);
    let extrapolated_oracle = *richardson[row].last().unwrap();
    Ok(HeatLimitReport {
        n,
        radius,
        case,
        k,
        predicted,
        oracle_values,
        richardson,
        extrapolated_oracle,
        rel_deviation: (predicted - extrapolated_oracle).abs() / predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_examples() {
        assert_relative_eq!(euclidean_heat_kernel(0.0, 3, 0.5).unwrap(), (2.0 * PI).powf(-1.5));
        assert!(euclidean_heat_kernel(1.0, 2, 0.0).is_err());
        let (c, d, t): (f64, f64, f64) = (2.5, 0.7, 0.3);
        assert_relative_eq!(
            euclidean_heat_kernel(c.sqrt() * d, 3, c * t).unwrap(),
            c.powf(-1.5) * euclidean_heat_kernel(d, 3, t).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn sphere_volumes() {
        assert_relative_eq!(unit_sphere_volume(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_volume(3), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_volume(4), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn multiplicities_and_zonal_at_zero() {
        let s2 = SphereSpectrum::new(2, 1.0, 4).unwrap();
        assert_eq!(s2.multiplicities, vec![1.0, 3.0, 5.0, 7.0, 9.0]);
        let s3 = SphereSpectrum::new(3, 1.0, 3).unwrap();
        assert_eq!(s3.multiplicities, vec![1.0, 4.0, 9.0, 16.0]);
        let s1 = SphereSpectrum::new(1, 1.0, 3).unwrap();
        assert_eq!(s1.multiplicities, vec![1.0, 2.0, 2.0, 2.0]);
        for (z, m) in s3.zonal_values(0.0).iter().zip(&s3.multiplicities) {
            assert_relative_eq!(*z, m / s3.volume(), max_relative = 1e-14);
        }
        assert!(s2.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn legendre_profiles() {
        let s2 = SphereSpectrum::new(2, 1.0, 3).unwrap();
        let x: f64 = 0.3;
        let p = s2.zonal_profiles(x.acos());
        assert_relative_eq!(p[2], 0.5 * (3.0 * x * x - 1.0), epsilon = 1e-15);
        assert_relative_eq!(p[3], 0.5 * (5.0 * x.powi(3) - 3.0 * x), epsilon = 1e-15);
    }

    #[test]
    fn circle_matches_wrapped_gaussian() {
        let t = 0.05;
        let spec = SphereSpectrum::for_time(1, 1.0, t, 1.0).unwrap();
        let p = sphere_heat_kernel(&spec, 0.0, t).unwrap();
        let wrapped: f64 = (-5i32..=5)
            .map(|m| euclidean_heat_kernel(2.0 * PI * (m as f64).abs(), 1, t).unwrap())
            .sum();
        assert!((p - wrapped).abs() < 1e-10);
    }

    #[test]
    fn insufficient_degree_reported() {
        let spec = SphereSpectrum::new(2, 1.0, 3).unwrap();
        assert!(matches!(sphere_heat_kernel(&spec, 0.4, 0.05), Err(Error::InsufficientDegree { .. })));
    }

    #[test]
    fn cancellation_reported() {
        let spec = SphereSpectrum::for_time(2, 1.0, 0.0125, 1e-90).unwrap();
        assert!(matches!(sphere_heat_kernel(&spec, PI, 0.0125), Err(Error::PrecisionLoss { .. })));
    }

    #[test]
    fn precise_matches_double_where_both_work() {
        let t = 0.1;
        let spec = SphereSpectrum::for_time(3, 1.0, t, 1e-3).unwrap();
        let a = sphere_heat_kernel(&spec, 1.0, t).unwrap();
        let b = spectral_sum_precise(&spec, 1.0, t, a.log2()).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_limits() {
        assert_relative_eq!(antipodal_sphere_limit_closed_form(2, 1.0).unwrap(), 2.0 * PI * PI, max_relative = 1e-14);
        assert_relative_eq!(antipodal_sphere_limit_closed_form(3, 1.0).unwrap(), 4.0 * PI.powi(3), max_relative = 1e-14);
        assert_relative_eq!(antipodal_sphere_limit_closed_form(2, 2.0).unwrap(), 4.0 * PI * PI, max_relative = 1e-14);
        assert!(matches!(antipodal_sphere_limit_closed_form(1, 1.0), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn sxy_route() {
        assert_relative_eq!(antipodal_limit_via_sxy(2, 1.0).unwrap(), 2.0 * PI * PI, max_relative = 1e-8);
        assert_relative_eq!(antipodal_limit_via_sxy(3, 1.0).unwrap(), 4.0 * PI.powi(3), max_relative = 1e-8);
    }

    #[test]
    fn predictions() {
        let flat = ModelManifold::constant_curvature(3, 0.0).unwrap();
        assert_relative_eq!(nondegenerate_limit_prediction(&flat, 2.0).unwrap(), 1.0, epsilon = 1e-14);
        let s3 = ModelManifold::constant_curvature(3, 1.0).unwrap();
        assert_relative_eq!(nondegenerate_limit_prediction(&s3, PI / 2.0).unwrap(), PI / 2.0, max_relative = 1e-10);
        let h2 = ModelManifold::constant_curvature(2, -1.0).unwrap();
        assert_relative_eq!(
            nondegenerate_limit_prediction(&h2, 1.0).unwrap(),
            1f64.sinh().powf(-0.5),
            max_relative = 1e-10
        );
        assert!(matches!(nondegenerate_limit_prediction(&s3, PI), Err(Error::DegenerateRoute(_))));
    }
}
