//! Fredholm determinants of `id + P⁻¹ℛ` on `H¹₀` through nested Galerkin
//! truncations.
//!
//! The Fourier filtration uses the `H¹₀`-orthonormal sine fields `F_ik`; the
//! piecewise-linear filtration ([`piecewise`]) uses hat fields on a partition
//! and is orthonormalized against its own `H¹` Gram matrix.

mod piecewise;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval_spectrum::{basis_amplitude, BasisKind};
use crate::linalg::{block_log_det, block_symmetric_eigenvalues};
use crate::model_geometry::JacobiSystem;
use crate::quadrature::CompositeGauss;
use crate::series::{inverse_square_partial, inverse_square_tail};

pub use piecewise::{
    assemble_hessian_piecewise, evaluation_map_jacobian, fredholm_det_piecewise, phi0_chain, Partition,
};

/// Pivots below this magnitude make a truncated determinant count as vanishing.
pub const SINGULAR_PIVOT: f64 = 1e-8;
/// Default threshold for the numerical kernel in [`fredholm_det_deflated`].
pub const DEFAULT_KERNEL_TOL: f64 = 1e-8;
/// Maximal disagreement tolerated between the two trace routes.
pub const TRACE_TOLERANCE: f64 = 1e-8;

const FOURIER_PANEL_ORDER: usize = 12;
const TRACE_MODES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Filtration {
    Fourier { modes: usize },
    PiecewiseLinear { partition: Partition },
}

/// Matrix of `id + P⁻¹ℛ` in an `H¹₀`-orthonormal basis of a finite subspace.
#[derive(Debug, Clone)]
pub struct GalerkinMatrix {
    pub dimension: usize,
    pub entries: DMatrix<f64>,
    pub filtration: Filtration,
    pub n: usize,
}

/// One truncation level of a determinant sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Number of modes `K` or of segments `N`.
    pub refinement: usize,
    /// Dimension of the truncated space.
    pub size: usize,
    pub value: f64,
    pub tail_correction: f64,
    pub corrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantEstimate {
    pub levels: Vec<Level>,
    /// Multiplicative correction applied at the finest level.
    pub tail_correction: f64,
    pub extrapolated: f64,
    pub error_estimate: f64,
}

impl DeterminantEstimate {
    fn from_levels(levels: Vec<Level>) -> Self {
        let last = levels.last().expect("at least one level");
        let extrapolated = last.corrected;
        let error_estimate = match levels.len() {
            1 => (last.corrected - last.value).abs(),
            len => (last.corrected - levels[len - 2].corrected).abs(),
        };
        Self {
            tail_correction: last.tail_correction,
            extrapolated,
            error_estimate,
            levels,
        }
    }

    /// Rows `level,value,tail_correction,extrapolated`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["level", "value", "tail_correction", "extrapolated"]).map_err(io)?;
        for l in &self.levels {
            w.write_record([
                l.refinement.to_string(),
                format!("{:.17e}", l.value),
                format!("{:.17e}", l.tail_correction),
                format!("{:.17e}", l.corrected),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_schedule(schedule: &[usize]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::EmptyRequest("empty truncation schedule".into()));
    }
    if schedule[0] == 0 {
        return Err(Error::EmptyRequest("truncation level K = 0".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("truncation schedule must be strictly increasing".into()));
    }
    Ok(())
}

/// `(ℛ F_ik, F_jl)_{L²}` added to the identity, k-major ordering.
pub fn assemble_hessian_fourier(sys: &JacobiSystem, modes: usize) -> Result<GalerkinMatrix> {
    if modes == 0 {
        return Err(Error::EmptyRequest("Fourier truncation needs K >= 1".into()));
    }
    let entries = match sys.constant_matrix() {
        Some(v) => fourier_constant(v, sys.length(), modes),
        None => fourier_by_quadrature(sys, modes, FOURIER_PANEL_ORDER),
    };
    Ok(GalerkinMatrix {
        dimension: entries.nrows(),
        entries,
        filtration: Filtration::Fourier { modes },
        n: sys.n(),
    })
}

fn fourier_constant(v: &DMatrix<f64>, t: f64, modes: usize) -> DMatrix<f64> {
    let n = v.nrows();
    let mut m = DMatrix::identity(n * modes, n * modes);
    for k in 1..=modes {
        // (F_k, F_k)_{L²} = 1/λ_k and distinct frequencies are L²-orthogonal
        let inv_lambda = (t / (PI * k as f64)).powi(2);
        let off = (k - 1) * n;
        for a in 0..n {
            for b in 0..n {
                m[(off + a, off + b)] += v[(a, b)] * inv_lambda;
            }
        }
    }
    m
}

/// Fourier assembly with composite Gauss panels of the given order, one panel
/// per wavelength of the highest mode.
pub fn fourier_by_quadrature(sys: &JacobiSystem, modes: usize, panel_order: usize) -> DMatrix<f64> {
    let n = sys.n();
    let grid = sys.grid();
    let rule = CompositeGauss::new(panel_order, modes.max(8));
    let points = rule.points(0.0, sys.length());
    let q = points.len();
    let phi = DMatrix::from_fn(q, modes, |i, k| basis_amplitude(k + 1, &grid, BasisKind::H1, points[i].0));
    let samples: Vec<DMatrix<f64>> = points.iter().map(|&(s, _)| sys.at(s)).collect();
    let mut m = DMatrix::identity(n * modes, n * modes);
    for a in 0..n {
        for b in a..n {
            let weighted = DMatrix::from_fn(q, modes, |i, k| phi[(i, k)] * points[i].1 * samples[i][(a, b)]);
            let block = phi.transpose() * weighted;
            for k in 0..modes {
                for l in 0..modes {
                    let x = block[(k, l)];
                    m[(k * n + a, l * n + b)] += x;
                    if a != b {
                        m[(k * n + b, l * n + a)] += x;
                    }
                }
            }
        }
    }
    m
}

/// `∫₀ᵗ tr V(s) ds`, exact for constant potentials.
fn trace_integral(sys: &JacobiSystem) -> f64 {
    match sys.constant_matrix() {
        Some(v) => v.trace() * sys.length(),
        None => CompositeGauss::new(16, 32).integrate(0.0, sys.length(), |s| sys.trace_at(s)),
    }
}

/// `Σ_{k>K} tr(P⁻¹ℛ)_k`, using the mean value of `sin²` beyond the truncation.
fn tail_trace(sys: &JacobiSystem, trace_integral: f64, modes: usize) -> f64 {
    sys.length() / (PI * PI) * trace_integral * inverse_square_tail(modes)
}

fn leading(m: &DMatrix<f64>, size: usize) -> DMatrix<f64> {
    m.view((0, 0), (size, size)).into_owned()
}

/// Galerkin determinants on the Fourier filtration with the analytic tail
/// correction `exp(Σ_{k>K} tr(P⁻¹ℛ)_k)`.
pub fn fredholm_det(sys: &JacobiSystem, schedule: &[usize]) -> Result<DeterminantEstimate> {
    check_schedule(schedule)?;
    let finest = *schedule.last().unwrap();
    let full = assemble_hessian_fourier(sys, finest)?.entries;
    let n = sys.n();
    let tr = trace_integral(sys);
    let mut levels = Vec::with_capacity(schedule.len());
    for &k in schedule {
        let size = n * k;
        let ld = block_log_det(&leading(&full, size));
        if k == finest && ld.min_pivot < SINGULAR_PIVOT {
            return Err(Error::DegenerateOperator { pivot: ld.min_pivot });
        }
        let tail_correction = tail_trace(sys, tr, k).exp();
        let value = ld.value();
        levels.push(Level {
            refinement: k,
            size,
            value,
            tail_correction,
            corrected: value * tail_correction,
        });
    }
    Ok(DeterminantEstimate::from_levels(levels))
}

/// Determinant restricted to the orthogonal complement of the numerical
/// kernel, with the kernel dimension detected at the finest level.
pub fn fredholm_det_deflated(
    sys: &JacobiSystem,
    kernel_tol: f64,
    schedule: &[usize],
) -> Result<(DeterminantEstimate, usize)> {
    if !(kernel_tol > 0.0 && kernel_tol.is_finite()) {
        return Err(Error::Domain(format!("kernel_tol must be positive, got {kernel_tol}")));
    }
    check_schedule(schedule)?;
    let finest = *schedule.last().unwrap();
    let full = assemble_hessian_fourier(sys, finest)?.entries;
    let n = sys.n();
    let finest_eigs = block_symmetric_eigenvalues(&full);
    if let Some(&bad) = finest_eigs
        .iter()
        .find(|e| (kernel_tol / 10.0..=kernel_tol * 10.0).contains(&e.abs()))
    {
        return Err(Error::IllSeparatedKernel {
            eigenvalue: bad,
            kernel_tol,
        });
    }
    let kernel_dim = finest_eigs.iter().filter(|e| e.abs() < kernel_tol).count();
    let tr = trace_integral(sys);
    let mut levels = Vec::with_capacity(schedule.len());
    for &k in schedule {
        let size = n * k;
        let mut eigs = block_symmetric_eigenvalues(&leading(&full, size));
        eigs.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).expect("finite eigenvalues"));
        let kept = &eigs[kernel_dim.min(eigs.len())..];
        let sign = kept.iter().filter(|e| **e < 0.0).count() % 2;
        let log_abs: f64 = kept.iter().map(|e| e.abs().ln()).sum();
        let value = if sign == 1 { -log_abs.exp() } else { log_abs.exp() };
        let tail_correction = tail_trace(sys, tr, k).exp();
        levels.push(Level {
            refinement: k,
            size: size - kernel_dim.min(size),
            value,
            tail_correction,
            corrected: value * tail_correction,
        });
    }
    Ok((DeterminantEstimate::from_levels(levels), kernel_dim))
}

/// `det(Qᵀ M Q)` for `Q` an orthonormal basis of the complement of the span of
/// the columns of `kernel_basis`.
pub fn restricted_determinant(matrix: &DMatrix<f64>, kernel_basis: &DMatrix<f64>) -> f64 {
    let dim = matrix.nrows();
    let u = kernel_basis.clone().qr().q();
    let projector = DMatrix::identity(dim, dim) - &u * u.transpose();
    let eig = SymmetricEigen::new(projector);
    let cols: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let q = eig.eigenvectors.select_columns(&cols);
    (q.transpose() * matrix * &q).determinant()
}

/// The two routes to `Tr(∇²S − id)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRoutes {
    /// `Σ_ik (ℛF_ik, F_ik)_{L²}` with its analytic tail.
    pub spectral: f64,
    /// `∫ tr ℛ(s) s(t − s)/t ds`, which on the unit interval is `−∫ ric s(1−s) ds`.
    pub curvature: f64,
}

pub fn hessian_trace_routes(sys: &JacobiSystem) -> TraceRoutes {
    let t = sys.length();
    let curvature = CompositeGauss::new(16, 32).integrate(0.0, t, |s| sys.trace_at(s) * s * (t - s) / t);
    let spectral = match sys.constant_matrix() {
        Some(v) => {
            v.trace() * t * t / (PI * PI)
                * (inverse_square_partial(TRACE_MODES) + inverse_square_tail(TRACE_MODES))
        }
        None => {
            let grid = sys.grid();
            let rule = CompositeGauss::new(FOURIER_PANEL_ORDER, TRACE_MODES);
            let points = rule.points(0.0, t);
            let traces: Vec<f64> = points.iter().map(|&(s, w)| w * sys.trace_at(s)).collect();
            let partial: f64 = (1..=TRACE_MODES)
                .rev()
                .map(|k| {
                    points
                        .iter()
                        .zip(&traces)
                        .map(|(&(s, _), wt)| wt * basis_amplitude(k, &grid, BasisKind::H1, s).powi(2))
                        .sum::<f64>()
                })
                .sum();
            partial + tail_trace(sys, trace_integral(sys), TRACE_MODES)
        }
    };
    TraceRoutes { spectral, curvature }
}

/// `Tr(∇²S − id)`, checked against the curvature integral.
pub fn hessian_trace(sys: &JacobiSystem) -> Result<f64> {
    let r = hessian_trace_routes(sys);
    if (r.spectral - r.curvature).abs() > TRACE_TOLERANCE {
        return Err(Error::TraceMismatch {
            spectral: r.spectral,
            curvature: r.curvature,
        });
    }
    Ok(r.spectral)
}

/// `Σ_{k≤K} cos(2πks)/(π²k²)`, which converges to `s² − s + 1/6` on `[0, 1]`.
pub fn bernoulli_series(s: f64, modes: usize) -> f64 {
    (1..=modes)
        .rev()
        .map(|k| {
            let k = k as f64;
            (2.0 * PI * k * s).cos() / (PI * PI * k * k)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn sphere_system(kappa: f64, r: f64, n: usize) -> JacobiSystem {
        let mut v = DMatrix::zeros(n, n);
        for i in 1..n {
            v[(i, i)] = -kappa * r * r;
        }
        JacobiSystem::constant(v, 1.0).unwrap()
    }

    #[test]
    fn zero_potential_is_identity() {
        let m = assemble_hessian_fourier(&JacobiSystem::free(2, 1.0).unwrap(), 5).unwrap();
        assert_eq!(m.entries, DMatrix::identity(10, 10));
        assert_eq!(m.dimension, 10);
    }

    #[test]
    fn constant_curvature_diagonal() {
        let m = assemble_hessian_fourier(&sphere_system(1.0, PI / 2.0, 3), 4).unwrap();
        for k in 1..=4 {
            let expect = 1.0 - (PI / 2.0).powi(2) / (PI * PI * (k * k) as f64);
            assert_relative_eq!(m.entries[((k - 1) * 3 + 1, (k - 1) * 3 + 1)], expect, epsilon = 1e-15);
            assert_eq!(m.entries[((k - 1) * 3, (k - 1) * 3)], 1.0);
        }
    }

    #[test]
    fn quadrature_assembly_matches_closed_form_for_constant() {
        let sys = sphere_system(0.7, 1.3, 2);
        let exact = fourier_constant(sys.constant_matrix().unwrap(), 1.0, 12);
        let quad = fourier_by_quadrature(&sys, 12, FOURIER_PANEL_ORDER);
        assert!((exact - quad).amax() < 1e-13);
    }

    #[test]
    fn empty_schedule_rejected() {
        let sys = sphere_system(1.0, 1.0, 2);
        assert!(matches!(fredholm_det(&sys, &[]), Err(Error::EmptyRequest(_))));
        assert!(matches!(fredholm_det(&sys, &[8, 4]), Err(Error::Domain(_))));
        assert!(assemble_hessian_fourier(&sys, 0).is_err());
    }

    #[test]
    fn flat_is_one_at_every_level() {
        let est = fredholm_det(&sphere_system(0.0, 2.0, 3), &[4, 8, 16]).unwrap();
        for l in &est.levels {
            assert_eq!(l.value, 1.0);
            assert_eq!(l.corrected, 1.0);
        }
        assert_eq!(est.extrapolated, 1.0);
    }

    #[test]
    fn tail_corrected_level_matches_product() {
        // ∏(1 - a/k²) = sin(π√a)/(π√a)
        let a: f64 = 0.37;
        let sys = JacobiSystem::scalar(1, -a * PI * PI, 1.0).unwrap();
        let est = fredholm_det(&sys, &[512]).unwrap();
        let x = PI * a.sqrt();
        assert!((est.extrapolated - x.sin() / x).abs() < 1e-8);
    }

    #[test]
    fn singular_truncation_is_reported() {
        let e = fredholm_det(&sphere_system(1.0, PI, 2), &[4, 8]);
        assert!(matches!(e, Err(Error::DegenerateOperator { .. })));
    }

    #[test]
    fn deflated_nondegenerate_equals_plain() {
        let sys = sphere_system(1.0, 1.0, 3);
        let plain = fredholm_det(&sys, &[8, 16]).unwrap();
        let (defl, dim) = fredholm_det_deflated(&sys, DEFAULT_KERNEL_TOL, &[8, 16]).unwrap();
        assert_eq!(dim, 0);
        assert_relative_eq!(plain.extrapolated, defl.extrapolated, max_relative = 1e-12);
    }

    #[test]
    fn deflated_antipodal() {
        let (est, dim) = fredholm_det_deflated(&sphere_system(1.0, PI, 2), DEFAULT_KERNEL_TOL, &[32, 64]).unwrap();
        assert_eq!(dim, 1);
        assert!((est.extrapolated - 0.5).abs() < 1e-6);
    }

    #[test]
    fn ill_separated_kernel() {
        // eigenvalue 1 - a on the k = 1 mode, placed right at the threshold
        let a = 1.0 - 2e-8;
        let sys = JacobiSystem::scalar(1, -a * PI * PI, 1.0).unwrap();
        let e = fredholm_det_deflated(&sys, 1e-8, &[4]);
        assert!(matches!(e, Err(Error::IllSeparatedKernel { .. })));
    }

    #[test]
    fn restricted_determinant_ignores_kernel_basis_choice() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 2.0, 3.0]));
        let u1 = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let c = 0.6f64;
        let s = 0.8f64;
        let u2 = DMatrix::from_row_slice(4, 2, &[c, -s, s, c, 0.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(restricted_determinant(&m, &u1), 6.0, epsilon = 1e-12);
        assert_relative_eq!(restricted_determinant(&m, &u2), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_routes_constant() {
        let r = hessian_trace_routes(&sphere_system(1.0, PI / 2.0, 3));
        assert!((r.spectral + PI * PI / 12.0).abs() < 1e-12);
        assert!((r.curvature + PI * PI / 12.0).abs() < 1e-12);
        assert_eq!(hessian_trace(&sphere_system(0.0, 1.0, 3)).unwrap(), 0.0);
    }

    #[test]
    fn trace_routes_nonconstant() {
        let sys = JacobiSystem::from_fn(2, 1.0, |s| {
            DMatrix::from_row_slice(2, 2, &[s, 0.2, 0.2, (3.0 * s).cos()])
        })
        .unwrap();
        let r = hessian_trace_routes(&sys);
        assert!((r.spectral - r.curvature).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn bernoulli_identity() {
        for s in [0.1, 0.3, 0.7] {
            assert!((bernoulli_series(s, 1_000_000) - (s * s - s + 1.0 / 6.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn csv_rows() {
        let est = fredholm_det(&sphere_system(1.0, 1.0, 2), &[2, 4]).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("level,value,tail_correction,extrapolated\n2,"));
        assert_eq!(text.lines().count(), 3);
    }
}
