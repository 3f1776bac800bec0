//! Model manifolds, geodesics and the Jacobi endomorphism in a parallel frame.
//!
//! Geodesics are parametrized on `[0, 1]` with constant speed `r = d(x, y)`.
//! For constant curvature `κ` the Jacobi endomorphism in the frame
//! `e₁ = γ̇/r, e₂, …, eₙ` is `-κ r² (I - e₁e₁ᵀ)`, so the orthogonal block of
//! the Jacobi operator has eigenvalues `π²k² - κr²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, Error, Result};
use crate::interval_spectrum::IntervalGrid;
use crate::ode::rk4_integrate;

/// Symmetric matrix-valued potential `V(s)`.
#[derive(Clone)]
pub enum Potential {
    Constant(DMatrix<f64>),
    Function(Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Potential::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Potential {
    pub fn at(&self, s: f64) -> DMatrix<f64> {
        match self {
            Potential::Constant(m) => m.clone(),
            Potential::Function(f) => f(s),
        }
    }
}

/// The data of `-d²/ds² + V` with Dirichlet conditions on `[0, t]`.
#[derive(Debug, Clone)]
pub struct JacobiSystem {
    n: usize,
    length: f64,
    potential: Potential,
}

const SYMMETRY_SAMPLES: usize = 33;

impl JacobiSystem {
    pub fn new(n: usize, length: f64, potential: Potential) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("fiber dimension must be at least 1".into()));
        }
        ensure_finite("interval length", length)?;
        if length <= 0.0 {
            return Err(Error::Domain(format!("interval length must be positive, got {length}")));
        }
        let sys = Self {
            n,
            length,
            potential,
        };
        for j in 0..SYMMETRY_SAMPLES {
            let s = length * j as f64 / (SYMMETRY_SAMPLES - 1) as f64;
            let v = sys.potential.at(s);
            if v.nrows() != n || v.ncols() != n {
                return Err(Error::Domain(format!(
                    "potential at s = {s} is {}x{}, expected {n}x{n}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain(format!("potential is not finite at s = {s}")));
            }
            if crate::linalg::asymmetry(&v) >= 1e-12 {
                return Err(Error::Domain(format!("potential is not symmetric at s = {s}")));
            }
        }
        Ok(sys)
    }

    pub fn constant(matrix: DMatrix<f64>, length: f64) -> Result<Self> {
        let n = matrix.nrows();
        Self::new(n, length, Potential::Constant(matrix))
    }

    /// `V ≡ 0`, the free operator `-d²/ds²`.
    pub fn free(n: usize, length: f64) -> Result<Self> {
        Self::constant(DMatrix::zeros(n, n), length)
    }

    /// `V ≡ c·I`.
    pub fn scalar(n: usize, c: f64, length: f64) -> Result<Self> {
        Self::constant(DMatrix::identity(n, n) * c, length)
    }

    pub fn from_fn<F>(n: usize, length: f64, f: F) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::new(n, length, Potential::Function(Arc::new(f)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn grid(&self) -> IntervalGrid {
        IntervalGrid::from_length(self.length).expect("length validated positive")
    }

    pub fn at(&self, s: f64) -> DMatrix<f64> {
        self.potential.at(s)
    }

    pub fn trace_at(&self, s: f64) -> f64 {
        self.at(s).trace()
    }

    pub fn constant_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.potential {
            Potential::Constant(m) => Some(m),
            Potential::Function(_) => None,
        }
    }

    /// `V(t - s)`.
    pub fn reversed(&self) -> Self {
        match &self.potential {
            Potential::Constant(_) => self.clone(),
            Potential::Function(f) => {
                let f = Arc::clone(f);
                let t = self.length;
                Self {
                    n: self.n,
                    length: t,
                    potential: Potential::Function(Arc::new(move |s| f(t - s))),
                }
            }
        }
    }

    /// The same operator after the substitution `s ↦ s·t'/t`: on `[0, t']` the
    /// potential becomes `(t/t')² V(s t/t')`.
    pub fn rescaled(&self, new_length: f64) -> Result<Self> {
        ensure_finite("new length", new_length)?;
        if new_length <= 0.0 {
            return Err(Error::Domain("rescaled length must be positive".into()));
        }
        let c = self.length / new_length;
        let potential = match &self.potential {
            Potential::Constant(m) => Potential::Constant(m * (c * c)),
            Potential::Function(f) => {
                let f = Arc::clone(f);
                Potential::Function(Arc::new(move |s| f(s * c) * (c * c)))
            }
        };
        Ok(Self {
            n: self.n,
            length: new_length,
            potential,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ModelManifold {
    /// Simply connected space form of dimension `n` and sectional curvature `kappa`.
    ConstantCurvature { n: usize, kappa: f64 },
    /// `ℝ × ℝⁿ` with `g_ss = 1 + V_ij(s) x^i x^j` near the segment `[0, t] × {0}`;
    /// only the potential block along that segment is modelled.
    SyntheticPotential { system: JacobiSystem },
}

impl ModelManifold {
    pub fn constant_curvature(n: usize, kappa: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        ensure_finite("kappa", kappa)?;
        Ok(Self::ConstantCurvature { n, kappa })
    }

    /// Round sphere of radius `radius`, `κ = 1/R²`.
    pub fn sphere(n: usize, radius: f64) -> Result<Self> {
        ensure_finite("radius", radius)?;
        if radius <= 0.0 {
            return Err(Error::Domain("radius must be positive".into()));
        }
        Self::constant_curvature(n, 1.0 / (radius * radius))
    }

    pub fn synthetic(system: JacobiSystem) -> Self {
        Self::SyntheticPotential { system }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ModelManifold::ConstantCurvature { n, .. } => *n,
            ModelManifold::SyntheticPotential { system } => system.n() + 1,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self {
            ModelManifold::ConstantCurvature { kappa, .. } => Some(*kappa),
            ModelManifold::SyntheticPotential { .. } => None,
        }
    }

    /// `π/√κ` for positive curvature.
    pub fn conjugate_distance(&self) -> Option<f64> {
        match self.kappa() {
            Some(k) if k > 0.0 => Some(PI / k.sqrt()),
            _ => None,
        }
    }
}

/// A geodesic on `[0, 1]` with constant speed `r`.
#[derive(Debug, Clone)]
pub struct GeodesicData {
    pub manifold: ModelManifold,
    pub speed: f64,
    pub interval: IntervalGrid,
}

impl GeodesicData {
    pub fn new(manifold: ModelManifold, speed: f64) -> Result<Self> {
        ensure_finite("speed", speed)?;
        if speed < 0.0 {
            return Err(Error::Domain(format!("geodesic speed must be non-negative, got {speed}")));
        }
        Ok(Self {
            manifold,
            speed,
            interval: IntervalGrid::unit(),
        })
    }

    /// The segment `s ↦ (st, 0, …, 0)` of a synthetic manifold, speed `t`.
    pub fn synthetic(system: JacobiSystem) -> Self {
        let t = system.length();
        Self {
            manifold: ModelManifold::synthetic(system),
            speed: t,
            interval: IntervalGrid::unit(),
        }
    }

    /// `S(γ) = r²/2`.
    pub fn action(&self) -> f64 {
        0.5 * self.speed * self.speed
    }

    /// Whether the constant-curvature geodesic stays within `r ≤ π/√κ`.
    pub fn is_minimizing(&self) -> bool {
        self.manifold
            .conjugate_distance()
            .is_none_or(|limit| self.speed <= limit)
    }
}

/// `ℛ_γ(s) = R(γ̇, ·)γ̇` in a parallel orthonormal frame with `e₁ = γ̇/r`.
pub fn jacobi_endomorphism(g: &GeodesicData) -> Result<JacobiSystem> {
    ensure_finite("speed", g.speed)?;
    if g.speed < 0.0 {
        return Err(Error::Domain(format!("geodesic speed must be non-negative, got {}", g.speed)));
    }
    match &g.manifold {
        ModelManifold::ConstantCurvature { n, kappa } => {
            let mut m = DMatrix::zeros(*n, *n);
            let shift = -kappa * g.speed * g.speed;
            for i in 1..*n {
                m[(i, i)] = shift;
            }
            JacobiSystem::constant(m, 1.0)
        }
        ModelManifold::SyntheticPotential { system } => {
            let n = system.n();
            let t = system.length();
            let inner = system.clone();
            // the tangent block vanishes: R(γ̇, γ̇)γ̇ = 0
            JacobiSystem::from_fn(n + 1, 1.0, move |s| {
                let mut m = DMatrix::zeros(n + 1, n + 1);
                m.view_mut((1, 1), (n, n)).copy_from(&(inner.at(s * t) * (t * t)));
                m
            })
        }
    }
}

fn sinc_like(kappa: f64, d: f64) -> f64 {
    let x = kappa.abs().sqrt() * d;
    if x < 1e-6 {
        let x2 = x * x;
        return if kappa >= 0.0 { 1.0 - x2 / 6.0 } else { 1.0 + x2 / 6.0 };
    }
    if kappa > 0.0 {
        x.sin() / x
    } else {
        x.sinh() / x
    }
}

/// `J(x, y) = (sin(√κ d)/(√κ d))^{n-1}`, with `sinh` for `κ < 0`.
pub fn exp_jacobian_closed_form(m: &ModelManifold, d: f64) -> Result<f64> {
    let ModelManifold::ConstantCurvature { n, kappa } = m else {
        return Err(Error::OutOfScope(
            "closed-form Jacobian needs a constant-curvature manifold".into(),
        ));
    };
    ensure_finite("distance", d)?;
    if d < 0.0 {
        return Err(Error::Domain(format!("distance must be non-negative, got {d}")));
    }
    if let Some(limit) = m.conjugate_distance() {
        if d >= limit {
            return Err(Error::ConjugatePoint { distance: d, limit });
        }
    }
    Ok(sinc_like(*kappa, d).powi(*n as i32 - 1))
}

/// `ric(γ̇, γ̇) = (n - 1) κ r²`.
pub fn ricci_along(g: &GeodesicData) -> Result<f64> {
    match g.manifold {
        ModelManifold::ConstantCurvature { n, kappa } => Ok((n as f64 - 1.0) * kappa * g.speed * g.speed),
        ModelManifold::SyntheticPotential { .. } => Err(Error::OutOfScope(
            "Ricci contraction is only provided for constant curvature".into(),
        )),
    }
}

/// Result of integrating the geodesic and parallel-transport equations of a
/// round sphere in its ambient embedding.
#[derive(Debug, Clone)]
pub struct TransportCheck {
    pub point: DVector<f64>,
    pub frame: Vec<DVector<f64>>,
    pub closed_form_point: DVector<f64>,
    pub point_error: f64,
    pub orthonormality_error: f64,
    pub tangency_error: f64,
    pub step_halving_error: f64,
}

const TRANSPORT_STEPS: usize = 1024;

/// Transports an orthonormal frame of `T_x Sⁿ_R` (starting with `v/|v|`) along
/// `s ↦ exp_x(s v)` and compares with the great-circle formula.
pub fn sphere_parallel_transport_check(x: &[f64], v: &[f64], s: f64) -> Result<TransportCheck> {
    let dim = x.len();
    if dim < 2 || v.len() != dim {
        return Err(Error::Domain("x and v must live in the same R^(n+1), n >= 1".into()));
    }
    ensure_finite("s", s)?;
    let x = DVector::from_column_slice(x);
    let v = DVector::from_column_slice(v);
    if x.iter().chain(v.iter()).any(|c| !c.is_finite()) {
        return Err(Error::Domain("x and v must be finite".into()));
    }
    let radius = x.norm();
    if radius == 0.0 {
        return Err(Error::Domain("x must be a point on a sphere of positive radius".into()));
    }
    let speed = v.norm();
    if x.dot(&v).abs() > 1e-10 * radius * speed.max(1.0) {
        return Err(Error::Domain("v is not tangent to the sphere at x".into()));
    }

    let n = dim - 1;
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(n);
    if speed > 0.0 {
        frame.push(&v / speed);
    }
    let normal = &x / radius;
    for j in 0..dim {
        if frame.len() == n {
            break;
        }
        let mut c = DVector::zeros(dim);
        c[j] = 1.0;
        c -= &normal * normal.dot(&c);
        for e in &frame {
            c -= e * e.dot(&c);
        }
        let len = c.norm();
        if len > 1e-8 {
            frame.push(c / len);
        }
    }

    let mut y0 = DVector::zeros(dim * (2 + n));
    y0.rows_mut(0, dim).copy_from(&x);
    y0.rows_mut(dim, dim).copy_from(&v);
    for (j, e) in frame.iter().enumerate() {
        y0.rows_mut(dim * (2 + j), dim).copy_from(e);
    }
    let r2 = radius * radius;
    let rhs = |_s: f64, y: &DVector<f64>| {
        let p = y.rows(0, dim);
        let dp = y.rows(dim, dim);
        let mut out = DVector::zeros(y.len());
        out.rows_mut(0, dim).copy_from(&dp);
        let accel = p * (-dp.norm_squared() / r2);
        out.rows_mut(dim, dim).copy_from(&accel);
        for j in 0..n {
            let e = y.rows(dim * (2 + j), dim);
            let de = p * (-e.dot(&dp) / r2);
            out.rows_mut(dim * (2 + j), dim).copy_from(&de);
        }
        out
    };
    let fine = rk4_integrate(&rhs, 0.0, s, &y0, TRANSPORT_STEPS);
    let coarse = rk4_integrate(&rhs, 0.0, s, &y0, TRANSPORT_STEPS / 2);
    let step_halving_error = (&fine - &coarse).amax();

    let point: DVector<f64> = fine.rows(0, dim).into_owned();
    let out_frame: Vec<DVector<f64>> = (0..n).map(|j| fine.rows(dim * (2 + j), dim).into_owned()).collect();

    let closed_form_point = if speed > 0.0 {
        let w = speed * s / radius;
        &x * w.cos() + &v * (w.sin() * radius / speed)
    } else {
        x.clone()
    };
    let point_error = (&point - &closed_form_point).amax();
    let mut orthonormality_error: f64 = 0.0;
    let mut tangency_error: f64 = 0.0;
    for (i, a) in out_frame.iter().enumerate() {
        tangency_error = tangency_error.max(a.dot(&point).abs() / radius);
        for (j, b) in out_frame.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            orthonormality_error = orthonormality_error.max((a.dot(b) - target).abs());
        }
    }
    Ok(TransportCheck {
        point,
        frame: out_frame,
        closed_form_point,
        point_error,
        orthonormality_error,
        tangency_error,
        step_halving_error,
    })
}
