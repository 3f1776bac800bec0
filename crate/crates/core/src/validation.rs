//! End-to-end checks of the determinant identities, run by `geodet validate`.

use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fredholm_galerkin::{
    bernoulli_series, evaluation_map_jacobian, fredholm_det, fredholm_det_deflated, fredholm_det_piecewise,
    hessian_trace, Partition, DEFAULT_KERNEL_TOL,
};
use crate::gelfand_yaglom::{
    gy_degenerate_ratio, gy_ratio, solve_jacobi_ode, zeta_det_dirichlet_laplacian, zeta_det_dirichlet_power,
    zeta_det_jacobi,
};
use crate::heat_asymptotics::{antipodal_limit_via_sxy, heat_limit_validation, HeatCase, SphereSpectrum};
use crate::model_geometry::{jacobi_endomorphism, GeodesicData, JacobiSystem, ModelManifold};
use crate::report::{run, Command, Format, RunConfig};
use crate::series::fitted_slope;

/// Mode schedule used for Fourier determinants throughout the suite.
pub const MODE_SCHEDULE: [usize; 4] = [64, 128, 256, 512];
/// Segment counts paired with [`MODE_SCHEDULE`] for the piecewise route.
pub const SEGMENT_SCHEDULE: [usize; 4] = [32, 64, 128, 256];
pub const KAPPA_GRID: [f64; 4] = [-1.0, -0.3, 0.3, 1.0];
pub const R_GRID: [f64; 3] = [0.1, 0.5, 1.0];
pub const N_GRID: [usize; 2] = [2, 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub check_name: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    /// Error name when the computation itself failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ValidationRecord {
    pub fn new(check_name: impl Into<String>, expected: f64, computed: f64, tolerance: f64) -> Self {
        Self {
            check_name: check_name.into(),
            expected,
            computed,
            tolerance,
            passed: within(expected, computed, tolerance),
            runtime_ms: None,
            note: None,
        }
    }

    fn failed(check_name: String, expected: f64, tolerance: f64, err: &Error) -> Self {
        Self {
            note: Some(format!("{}: {err}", err.name())),
            ..Self::new(check_name, expected, f64::NAN, tolerance)
        }
    }
}

/// `|expected − computed| ≤ tolerance · max(1, |expected|)`.
pub fn within(expected: f64, computed: f64, tolerance: f64) -> bool {
    (expected - computed).abs() <= tolerance * expected.abs().max(1.0)
}

/// Formats a grid value for a record name: integers without a decimal point.
fn label(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{}", x as i64)
    } else {
        format!("{x:?}")
    }
}

pub fn curvature_system(kappa: f64, r: f64, n: usize) -> Result<JacobiSystem> {
    let m = ModelManifold::constant_curvature(n, kappa)?;
    jacobi_endomorphism(&GeodesicData::new(m, r)?)
}

struct Suite {
    records: Vec<ValidationRecord>,
    timings: bool,
}

impl Suite {
    fn check<F>(&mut self, name: String, expected: f64, tolerance: f64, f: F)
    where
        F: FnOnce() -> Result<f64>,
    {
        let start = self.timings.then(Instant::now);
        let mut record = match f() {
            Ok(v) => ValidationRecord::new(name, expected, v, tolerance),
            Err(e) => ValidationRecord::failed(name, expected, tolerance, &e),
        };
        record.runtime_ms = start.map(|s| s.elapsed().as_secs_f64() * 1e3);
        self.records.push(record);
    }
}

fn fredholm_value(kappa: f64, r: f64, n: usize) -> Result<f64> {
    Ok(fredholm_det(&curvature_system(kappa, r, n)?, &MODE_SCHEDULE)?.extrapolated)
}

/// Largest gap between the Fourier and piecewise routes at each paired level,
/// finest last.
pub fn filtration_gaps(kappa: f64, r: f64, n: usize) -> Result<Vec<f64>> {
    let sys = curvature_system(kappa, r, n)?;
    let fourier = fredholm_det(&sys, &MODE_SCHEDULE)?;
    let partitions = SEGMENT_SCHEDULE
        .iter()
        .map(|&m| Partition::uniform(m))
        .collect::<Result<Vec<_>>>()?;
    let piecewise = fredholm_det_piecewise(&sys, &partitions)?;
    Ok(fourier
        .levels
        .iter()
        .zip(&piecewise.levels)
        .map(|(a, b)| (a.corrected - b.corrected).abs())
        .collect())
}

/// Deviations `|det d ev_τ| ∏Δ^{−n/2} − 1` on uniform partitions.
pub fn evaluation_jacobian_deviations(kappa: f64, r: f64, n: usize, segments: &[usize]) -> Result<Vec<f64>> {
    let g = GeodesicData::new(ModelManifold::constant_curvature(n, kappa)?, r)?;
    segments
        .iter()
        .map(|&m| Ok(evaluation_map_jacobian(&g, &Partition::uniform(m)?)? - 1.0))
        .collect()
}

/// Log-log slope of `|deviation|` against the mesh `1/N`.
pub fn evaluation_jacobian_order(kappa: f64, r: f64, n: usize, segments: &[usize]) -> Result<f64> {
    let dev = evaluation_jacobian_deviations(kappa, r, n, segments)?;
    let x: Vec<f64> = segments.iter().map(|&m| (1.0 / m as f64).ln()).collect();
    let y: Vec<f64> = dev.iter().map(|d| d.abs().ln()).collect();
    Ok(fitted_slope(&x, &y))
}

/// `∏_{k=2}^{K} (1 − 1/k²)`, accumulated in logs.
pub fn telescoping_product(modes: usize) -> f64 {
    (2..=modes)
        .map(|k| (-1.0 / (k as f64 * k as f64)).ln_1p())
        .sum::<f64>()
        .exp()
}

/// Largest `|∫ p_s(x, z) p_u(z, y) dz − p_{s+u}(x, y)|` over a few angles on
/// the unit circle, using the trapezoid rule (spectrally accurate for
/// periodic integrands).
pub fn chapman_kolmogorov_circle(s: f64, u: f64, nodes: usize) -> Result<f64> {
    let kernel = |t: f64, theta: f64| -> Result<f64> {
        let spec = SphereSpectrum::for_time(1, 1.0, t, 1e-3)?;
        crate::heat_asymptotics::sphere_heat_kernel(&spec, theta, t)
    };
    let h = 2.0 * PI / nodes as f64;
    let mut worst: f64 = 0.0;
    for theta in [0.0, 0.7, 2.0, PI] {
        let mut integral = 0.0;
        for j in 0..nodes {
            let z = j as f64 * h;
            integral += kernel(s, z)? * kernel(u, theta - z)? * h;
        }
        worst = worst.max((integral - kernel(s + u, theta)?).abs());
    }
    Ok(worst)
}

/// Ratio of consecutive RK4 errors for `J'' = −c J` when the step is halved.
pub fn rk4_halving_factor(c: f64, steps: usize) -> Result<f64> {
    let sys = JacobiSystem::scalar(1, -c, 1.0)?;
    let exact = c.sqrt().sin() / c.sqrt();
    let coarse = solve_jacobi_ode(&sys, steps)?.det_j_end() - exact;
    let fine = solve_jacobi_ode(&sys, 2 * steps)?.det_j_end() - exact;
    Ok(coarse / fine)
}

fn report_bytes(config: &RunConfig) -> Result<String> {
    crate::report::render(&run(config), config.format)
}

/// Runs every check. Records are sorted by name.
pub fn run_suite(timings: bool) -> Vec<ValidationRecord> {
    let mut suite = Suite {
        records: Vec::new(),
        timings,
    };

    suite.check("fredholm-kappa1-r1.5708-n3".into(), (2.0 / PI).powi(2), 1e-6, || {
        fredholm_value(1.0, PI / 2.0, 3)
    });
    suite.check("fredholm-kappa-1-r1-n2".into(), 1f64.sinh(), 1e-6, || {
        fredholm_value(-1.0, 1.0, 2)
    });

    for &kappa in &KAPPA_GRID {
        for &r in &R_GRID {
            for &n in &N_GRID {
                let tag = format!("kappa{}-r{r:?}-n{n}", label(kappa));
                let galerkin = fredholm_value(kappa, r, n);
                let Ok(galerkin) = galerkin else {
                    let err = galerkin.unwrap_err();
                    suite.check(format!("identity-chain-{tag}"), f64::NAN, 1e-5, || Err(err.clone()));
                    suite.check(format!("zeta-chain-{tag}"), f64::NAN, 1e-5, || Err(err));
                    continue;
                };
                suite.check(format!("identity-chain-{tag}"), galerkin, 1e-5, || {
                    gy_ratio(&JacobiSystem::free(n, 1.0)?, &curvature_system(kappa, r, n)?)
                });
                suite.check(format!("zeta-chain-{tag}"), galerkin, 1e-5, || {
                    Ok(zeta_det_jacobi(&curvature_system(kappa, r, n)?)?.value / 2f64.powi(n as i32))
                });
                suite.check(format!("trace-{tag}"), -((n - 1) as f64) * kappa * r * r / 6.0, 1e-8, || {
                    hessian_trace(&curvature_system(kappa, r, n)?)
                });
            }
        }
    }

    suite.check("zeta-closed-form-t1-n3".into(), 8.0, 0.0, || {
        Ok(zeta_det_dirichlet_laplacian(1.0, 3)?.value)
    });
    suite.check("zeta-power-rule-t1.5-n2-m2".into(), 3f64.powi(4), 1e-12, || {
        zeta_det_dirichlet_power(1.5, 2, 2)
    });
    for s in [0.1, 0.3, 0.7] {
        suite.check(format!("bernoulli-s{s:?}"), s * s - s + 1.0 / 6.0, 1e-6, || {
            Ok(bernoulli_series(s, 100_000))
        });
    }

    for n in [2usize, 3] {
        let sys = curvature_system(1.0, PI, n);
        let deflated = sys.and_then(|s| fredholm_det_deflated(&s, DEFAULT_KERNEL_TOL, &MODE_SCHEDULE));
        let (value, dim) = match &deflated {
            Ok((est, k)) => (Ok(est.extrapolated), Ok(*k as f64)),
            Err(e) => (Err(e.clone()), Err(e.clone())),
        };
        suite.check(format!("antipodal-deflated-n{n}"), 2f64.powi(1 - n as i32), 1e-4, || value);
        suite.check(format!("antipodal-kernel-dim-n{n}"), (n - 1) as f64, 0.0, || dim);
    }

    // det′(P − π²)/det(P) as the truncated product (1/π²) ∏_{k=2}^{K} (1 − 1/k²),
    // whose tail factor (K+1)/K is removed exactly
    let modes = 1_000_000;
    let oracle = telescoping_product(modes) / PI.powi(2) * modes as f64 / (modes as f64 + 1.0);
    suite.check("degenerate-gy-scalar".into(), oracle, 1e-8, || {
        gy_degenerate_ratio(&JacobiSystem::scalar(1, -PI * PI, 1.0)?, &JacobiSystem::free(1, 1.0)?)
    });

    for n in [2usize, 3, 4] {
        for radius in [0.5f64, 1.0, 2.0] {
            let nf = n as f64;
            let closed = 2.0 * PI.powf(1.5 * nf - 1.0) * radius.powi(n as i32 - 1) / gamma(nf / 2.0);
            suite.check(format!("sxy-n{n}-R{radius:?}"), closed, 1e-8, || {
                antipodal_limit_via_sxy(n, radius)
            });
        }
    }

    suite.check("antipodal-S2-coefficient".into(), 2.0 * PI * PI, 1e-2, || {
        Ok(heat_limit_validation(2, 1.0, HeatCase::Antipodal)?.extrapolated_oracle)
    });
    suite.check("nondegenerate-S3-half-pi".into(), PI / 2.0, 5e-3, || {
        Ok(heat_limit_validation(3, 1.0, HeatCase::Nondegenerate { distance: PI / 2.0 })?.extrapolated_oracle)
    });

    let segments = [4, 8, 16, 32, 64];
    suite.check("eval-jacobian-flat".into(), 0.0, 0.0, || {
        Ok(evaluation_jacobian_deviations(0.0, PI / 2.0, 2, &segments)?
            .into_iter()
            .fold(0.0, |a: f64, d| a.max(d.abs())))
    });
    suite.check("eval-jacobian-order-kappa1-n2".into(), 2.0, 0.1, || {
        evaluation_jacobian_order(1.0, PI / 2.0, 2, &segments)
    });

    for (kappa, r, n) in [(1.0, PI / 2.0, 3), (-1.0, 1.0, 2), (0.3, 1.0, 3)] {
        let tag = format!("kappa{}-r{}-n{n}", label(kappa), label((r * 1e4f64).round() / 1e4));
        let gaps = filtration_gaps(kappa, r, n);
        let (finest, monotone) = match &gaps {
            Ok(g) => (
                Ok(*g.last().unwrap()),
                Ok(if g.windows(2).all(|w| w[1] < w[0]) { 1.0 } else { 0.0 }),
            ),
            Err(e) => (Err(e.clone()), Err(e.clone())),
        };
        suite.check(format!("filtration-gap-{tag}"), 0.0, 1e-3, || finest);
        suite.check(format!("filtration-monotone-{tag}"), 1.0, 0.0, || monotone);
    }

    suite.check("wronskian-drift".into(), 0.0, 1e-9, || {
        let sys = JacobiSystem::from_fn(2, 1.0, |s| {
            nalgebra::DMatrix::from_row_slice(2, 2, &[-3.0 * s, 0.5 * s.cos(), 0.5 * s.cos(), 1.0 + s * s])
        })?;
        Ok(solve_jacobi_ode(&sys, 1024)?.wronskian_drift())
    });
    suite.check("rk4-halving-factor".into(), 16.0, 0.25, || rk4_halving_factor(4.0, 16));
    suite.check("chapman-kolmogorov-S1".into(), 0.0, 1e-8, || {
        chapman_kolmogorov_circle(0.1, 0.25, 256)
    });
    for k in [10usize, 100, 1000] {
        suite.check(format!("telescoping-product-K{k}"), 0.5, 1.0 / k as f64, || {
            Ok(telescoping_product(k))
        });
    }
    suite.check("determinism-det-fredholm".into(), 1.0, 0.0, || {
        let mut config = RunConfig::new(Command::DetFredholm);
        config.format = Format::Json;
        for (k, v) in [("kappa", "1"), ("r", "1.0"), ("n", "3")] {
            config.set(k, v);
        }
        let a = report_bytes(&config)?;
        let b = report_bytes(&config)?;
        Ok(if a == b { 1.0 } else { 0.0 })
    });

    let mut records = suite.records;
    records.sort_by(|a, b| a.check_name.cmp(&b.check_name));
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_rule() {
        assert!(within(100.0, 100.5, 1e-2));
        assert!(!within(100.0, 102.0, 1e-2));
        assert!(within(0.0, 5e-3, 1e-2));
        assert!(!within(1.0, f64::NAN, 1.0));
    }

    #[test]
    fn labels() {
        assert_eq!(label(1.0), "1");
        assert_eq!(label(-0.3), "-0.3");
        assert_eq!(format!("{:?}", 1.0f64), "1.0");
    }

    #[test]
    fn telescoping_partial_products() {
        for k in [2usize, 7, 50] {
            let exact = (k + 1) as f64 / (2 * k) as f64;
            assert!((telescoping_product(k) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn failed_records_carry_error_name() {
        let r = ValidationRecord::failed("x".into(), 1.0, 0.1, &Error::OutOfScope("y".into()));
        assert!(!r.passed);
        assert!(r.note.unwrap().starts_with("OutOfScope"));
    }
}
