//! Piecewise-linear filtration, the evaluation-map Jacobian of piecewise
//! geodesics and the product of `Φ₀` factors along a partition.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DeterminantEstimate, Filtration, GalerkinMatrix, Level};
use crate::error::{ensure_finite, Error, Result};
use crate::linalg::{block_log_det, tridiagonal_spd_log_det};
use crate::model_geometry::{exp_jacobian_closed_form, GeodesicData, JacobiSystem, ModelManifold};
use crate::quadrature::CompositeGauss;

/// `0 = τ₀ < τ₁ < … < τ_N = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Domain("a partition needs at least the endpoints 0 and 1".into()));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(Error::Domain("a partition must start at 0 and end at 1".into()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("partition times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn uniform(segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::EmptyRequest("a partition needs at least one segment".into()));
        }
        let mut times: Vec<f64> = (0..=segments).map(|j| j as f64 / segments as f64).collect();
        times[segments] = 1.0;
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    /// `Δ_j τ = τ_j − τ_{j−1}`.
    pub fn deltas(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `|τ| = max_j Δ_j τ`.
    pub fn mesh(&self) -> f64 {
        self.deltas().into_iter().fold(0.0, f64::max)
    }
}

const SEGMENT_RULE_ORDER: usize = 8;

/// Stiffness `D` (tridiagonal, per fiber slot) and `H = D ⊗ I + ∫ V φ φ` on the
/// hat fields of the partition scaled to `[0, t]`.
struct HatSystem {
    diag: Vec<f64>,
    off: Vec<f64>,
    h: DMatrix<f64>,
}

fn hat_system(sys: &JacobiSystem, tau: &Partition) -> HatSystem {
    let n = sys.n();
    let t = sys.length();
    let nodes: Vec<f64> = tau.times().iter().map(|x| x * t).collect();
    let deltas: Vec<f64> = nodes.windows(2).map(|w| w[1] - w[0]).collect();
    let interior = tau.segments() - 1;
    let diag: Vec<f64> = (0..interior).map(|j| 1.0 / deltas[j] + 1.0 / deltas[j + 1]).collect();
    let off: Vec<f64> = (1..interior).map(|j| -1.0 / deltas[j]).collect();

    let dim = n * interior;
    let mut h = DMatrix::zeros(dim, dim);
    for j in 0..interior {
        for a in 0..n {
            h[(j * n + a, j * n + a)] += diag[j];
        }
    }
    for (j, o) in off.iter().enumerate() {
        for a in 0..n {
            h[(j * n + a, (j + 1) * n + a)] += o;
            h[((j + 1) * n + a, j * n + a)] += o;
        }
    }

    // segment `seg` carries the falling half of hat `seg - 1` and the rising
    // half of hat `seg` (interior hats are numbered from 0)
    let mut add_block = |p: usize, q: usize, block: &DMatrix<f64>| {
        for a in 0..n {
            for b in 0..n {
                h[(p * n + a, q * n + b)] += block[(a, b)];
            }
        }
    };
    let rule = CompositeGauss::new(SEGMENT_RULE_ORDER, 1);
    for (seg, &delta) in deltas.iter().enumerate() {
        let left = seg.checked_sub(1);
        let right = (seg < interior).then_some(seg);
        // ∫ V φ_p φ_q over the segment, for (falling, falling), (falling, rising), (rising, rising)
        let (ff, fr, rr) = match sys.constant_matrix() {
            Some(v) => (v * (delta / 3.0), v * (delta / 6.0), v * (delta / 3.0)),
            None => {
                let mut ff = DMatrix::zeros(n, n);
                let mut fr = DMatrix::zeros(n, n);
                let mut rr = DMatrix::zeros(n, n);
                for (s, w) in rule.points(nodes[seg], nodes[seg + 1]) {
                    let rise = (s - nodes[seg]) / delta;
                    let fall = 1.0 - rise;
                    let v = sys.at(s);
                    ff += &v * (w * fall * fall);
                    fr += &v * (w * fall * rise);
                    rr += &v * (w * rise * rise);
                }
                (ff, fr, rr)
            }
        };
        if let Some(p) = left {
            add_block(p, p, &ff);
        }
        if let Some(q) = right {
            add_block(q, q, &rr);
        }
        if let (Some(p), Some(q)) = (left, right) {
            add_block(p, q, &fr);
            add_block(q, p, &fr);
        }
    }
    HatSystem { diag, off, h }
}

/// `∫ tr V(s) g_τ(s) ds` with `g_τ(s) = (s − s_{j−1})(s_j − s)/Δ_j`, the part of
/// the Green's function diagonal `s(t − s)/t` not captured by the hat fields.
fn complement_trace(sys: &JacobiSystem, tau: &Partition) -> f64 {
    let t = sys.length();
    match sys.constant_matrix() {
        Some(v) => v.trace() * tau.deltas().iter().map(|d| (d * t).powi(2)).sum::<f64>() / 6.0,
        None => {
            let rule = CompositeGauss::new(SEGMENT_RULE_ORDER, 1);
            tau.times()
                .windows(2)
                .map(|w| {
                    let (lo, hi) = (w[0] * t, w[1] * t);
                    rule.integrate(lo, hi, |s| sys.trace_at(s) * (s - lo) * (hi - s) / (hi - lo))
                })
                .sum()
        }
    }
}

/// `id + P⁻¹ℛ` on the hat-field space, in an `H¹`-orthonormal basis.
pub fn assemble_hessian_piecewise(sys: &JacobiSystem, tau: &Partition) -> Result<GalerkinMatrix> {
    if tau.segments() < 2 {
        return Err(Error::Domain("the piecewise filtration needs N >= 2 segments".into()));
    }
    let n = sys.n();
    let hs = hat_system(sys, tau);
    let dim = hs.h.nrows();
    let mut d = DMatrix::zeros(dim, dim);
    for (j, v) in hs.diag.iter().enumerate() {
        for a in 0..n {
            d[(j * n + a, j * n + a)] = *v;
        }
    }
    for (j, v) in hs.off.iter().enumerate() {
        for a in 0..n {
            d[(j * n + a, (j + 1) * n + a)] = *v;
            d[((j + 1) * n + a, j * n + a)] = *v;
        }
    }
    let chol = d.cholesky().expect("stiffness matrix is positive definite");
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&hs.h)
        .expect("nonsingular Cholesky factor");
    let mut m = l
        .solve_lower_triangular(&x.transpose())
        .expect("nonsingular Cholesky factor");
    m = (&m + m.transpose()) * 0.5;
    Ok(GalerkinMatrix {
        dimension: dim,
        entries: m,
        filtration: Filtration::PiecewiseLinear {
            partition: tau.clone(),
        },
        n,
    })
}

/// Galerkin determinants on a sequence of partitions, each multiplied by
/// `exp(∫ tr V g_τ)` to account for the trace outside the hat-field space.
pub fn fredholm_det_piecewise(sys: &JacobiSystem, partitions: &[Partition]) -> Result<DeterminantEstimate> {
    if partitions.is_empty() {
        return Err(Error::EmptyRequest("no partitions given".into()));
    }
    let n = sys.n();
    let mut levels = Vec::with_capacity(partitions.len());
    for tau in partitions {
        if tau.segments() < 2 {
            return Err(Error::Domain("the piecewise filtration needs N >= 2 segments".into()));
        }
        let hs = hat_system(sys, tau);
        let log_d = n as f64 * tridiagonal_spd_log_det(&hs.diag, &hs.off).expect("stiffness is SPD");
        let ld = block_log_det(&hs.h);
        let value = ld.sign * (ld.log_abs - log_d).exp();
        ensure_finite("piecewise determinant", value)?;
        let tail_correction = complement_trace(sys, tau).exp();
        levels.push(Level {
            refinement: tau.segments(),
            size: n * (tau.segments() - 1),
            value,
            tail_correction,
            corrected: value * tail_correction,
        });
    }
    Ok(DeterminantEstimate::from_levels(levels))
}

/// `H¹` Gram entries `(A_uu, A_uw)` of the Jacobi fields on one segment of
/// parameter length `delta`, for `X'' = −κ r² X`.
fn segment_gram(kappa: f64, r: f64, delta: f64, segment: usize) -> Result<(f64, f64)> {
    let w = kappa.abs().sqrt() * r;
    let x = w * delta;
    if kappa == 0.0 || x == 0.0 {
        return Ok((1.0 / delta, -1.0 / delta));
    }
    if kappa > 0.0 {
        if x >= PI {
            return Err(Error::DegenerateSegment { segment });
        }
        let s = x.sin();
        let c = w * w / (s * s);
        Ok((
            c * (delta / 2.0 + (2.0 * x).sin() / (4.0 * w)),
            -c * (delta * x.cos() / 2.0 + s / (2.0 * w)),
        ))
    } else {
        let s = x.sinh();
        let c = w * w / (s * s);
        Ok((
            c * (delta / 2.0 + (2.0 * x).sinh() / (4.0 * w)),
            -c * (delta * x.cosh() / 2.0 + s / (2.0 * w)),
        ))
    }
}

fn gram_log_det(kappa: f64, r: f64, deltas: &[f64]) -> Result<f64> {
    let grams = deltas
        .iter()
        .enumerate()
        .map(|(j, d)| segment_gram(kappa, r, *d, j + 1))
        .collect::<Result<Vec<_>>>()?;
    let interior = deltas.len() - 1;
    let diag: Vec<f64> = (0..interior).map(|j| grams[j].0 + grams[j + 1].0).collect();
    let off: Vec<f64> = (1..interior).map(|j| grams[j].1).collect();
    tridiagonal_spd_log_det(&diag, &off).ok_or(Error::DegenerateSegment { segment: 0 })
}

/// `|det d ev_τ| ∏ Δ_j^{−n/2}` for the evaluation map of piecewise geodesics
/// near a constant-curvature geodesic.
pub fn evaluation_map_jacobian(g: &GeodesicData, tau: &Partition) -> Result<f64> {
    let ModelManifold::ConstantCurvature { n, kappa } = g.manifold else {
        return Err(Error::OutOfScope(
            "the evaluation-map Jacobian is only provided for constant curvature".into(),
        ));
    };
    if tau.segments() < 2 || n < 2 {
        return Ok(1.0);
    }
    let deltas = tau.deltas();
    let flat = gram_log_det(0.0, g.speed, &deltas)?;
    let curved = gram_log_det(kappa, g.speed, &deltas)?;
    // the tangent direction always reproduces the flat Gram matrix
    Ok((-0.5 * (n - 1) as f64 * (curved - flat)).exp())
}

/// `∏_j J(γ(τ_{j−1}), γ(τ_j))^{−1/2}` along a geodesic of length `r`.
pub fn phi0_chain(m: &ModelManifold, r: f64, tau: &Partition) -> Result<f64> {
    let ModelManifold::ConstantCurvature { .. } = m else {
        return Err(Error::OutOfScope("phi0_chain needs a constant-curvature manifold".into()));
    };
    ensure_finite("r", r)?;
    if r < 0.0 {
        return Err(Error::Domain(format!("distance must be non-negative, got {r}")));
    }
    let mut log = 0.0;
    for (j, delta) in tau.deltas().into_iter().enumerate() {
        let length = delta * r;
        if let Some(limit) = m.conjugate_distance() {
            if length >= limit {
                return Err(Error::CutLocus {
                    segment: j + 1,
                    length,
                    limit,
                });
            }
        }
        log += -0.5 * exp_jacobian_closed_form(m, length)?.ln();
    }
    Ok(log.exp())
}
