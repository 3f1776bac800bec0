//! Spectral data of the Dirichlet operator `P = -d²/ds²` on `[a, b]` acting on
//! `n`-component fields, its Sobolev scale and the orthonormal sine bases.
//!
//! Modes are indexed by `(i, k)` with fiber slot `i ∈ 1..=n` and frequency
//! `k ≥ 1`; flat storage is k-major (`(k - 1) * n + (i - 1)`), so truncating by
//! frequency keeps subspaces nested.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    a: f64,
    b: f64,
    quadrature_order: usize,
}

impl IntervalGrid {
    pub fn new(a: f64, b: f64, quadrature_order: usize) -> Result<Self> {
        ensure_finite("a", a)?;
        ensure_finite("b", b)?;
        if a >= b {
            return Err(Error::Domain(format!("interval needs a < b, got [{a}, {b}]")));
        }
        if quadrature_order < 2 {
            return Err(Error::Domain("quadrature_order must be at least 2".into()));
        }
        Ok(Self {
            a,
            b,
            quadrature_order,
        })
    }

    /// `[0, 1]` with a 16-point panel rule.
    pub fn unit() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            quadrature_order: 16,
        }
    }

    /// `[0, t]` with a 16-point panel rule.
    pub fn from_length(t: f64) -> Result<Self> {
        Self::new(0.0, t, 16)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.a && s <= self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub i: usize,
    pub k: usize,
}

impl ModeIndex {
    pub fn new(i: usize, k: usize) -> Result<Self> {
        if i == 0 || k == 0 {
            return Err(Error::Domain(format!("mode indices start at 1, got ({i}, {k})")));
        }
        Ok(Self { i, k })
    }

    /// Position in k-major flat storage for fiber dimension `n`.
    pub fn flat(&self, n: usize) -> usize {
        (self.k - 1) * n + (self.i - 1)
    }

    pub fn from_flat(index: usize, n: usize) -> Self {
        Self {
            i: index % n + 1,
            k: index / n + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisKind {
    /// `E_ik`, orthonormal in `L²`.
    L2,
    /// `F_ik = E_ik / sqrt(λ_k)`, orthonormal in `H¹₀`.
    H1,
}

/// `λ_k = π² k² / (b - a)²`.
pub fn dirichlet_eigenvalue(grid: &IntervalGrid, k: usize) -> f64 {
    let w = PI * k as f64 / grid.length();
    w * w
}

/// The first `count` distinct eigenvalues, each with multiplicity `n`.
pub fn dirichlet_eigenvalues(grid: &IntervalGrid, n: usize, count: usize) -> Result<Vec<(f64, usize)>> {
    if count == 0 {
        return Err(Error::EmptyRequest("no eigenvalues requested (K = 0)".into()));
    }
    if n == 0 {
        return Err(Error::Domain("fiber dimension must be at least 1".into()));
    }
    Ok((1..=count).map(|k| (dirichlet_eigenvalue(grid, k), n)).collect())
}

/// Scalar profile of the basis field of frequency `k` at `s`.
pub fn basis_amplitude(k: usize, grid: &IntervalGrid, which: BasisKind, s: f64) -> f64 {
    let len = grid.length();
    let phase = (PI * k as f64 * (s - grid.a) / len).sin();
    match which {
        BasisKind::L2 => (2.0 / len).sqrt() * phase,
        BasisKind::H1 => (2.0 * len).sqrt() / (PI * k as f64) * phase,
    }
}

/// Derivative of [`basis_amplitude`] with respect to `s`.
pub fn basis_amplitude_derivative(k: usize, grid: &IntervalGrid, which: BasisKind, s: f64) -> f64 {
    let len = grid.length();
    let w = PI * k as f64 / len;
    let c = (w * (s - grid.a)).cos();
    match which {
        BasisKind::L2 => (2.0 / len).sqrt() * w * c,
        BasisKind::H1 => (2.0 / len).sqrt() * c,
    }
}

/// `E_ik(s)` or `F_ik(s)` as an `n`-vector.
pub fn basis_function(
    mode: ModeIndex,
    n: usize,
    grid: &IntervalGrid,
    which: BasisKind,
    s: f64,
) -> Result<DVector<f64>> {
    if mode.i > n {
        return Err(Error::Domain(format!("fiber index {} exceeds n = {n}", mode.i)));
    }
    if !grid.contains(s) {
        return Err(Error::Domain(format!(
            "s = {s} outside [{}, {}]",
            grid.a, grid.b
        )));
    }
    let mut v = DVector::zeros(n);
    v[mode.i - 1] = basis_amplitude(mode.k, grid, which, s);
    Ok(v)
}

/// Coefficients of a field in the `E_ik` basis, measured in the `H^m` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCoefficients {
    pub n: usize,
    pub grid: IntervalGrid,
    /// k-major flat storage; entries past the end are zero.
    pub coefficients: Vec<f64>,
    pub sobolev_order: f64,
}

impl SpectralCoefficients {
    pub fn zeros(n: usize, grid: IntervalGrid, modes: usize, sobolev_order: f64) -> Self {
        Self {
            n,
            grid,
            coefficients: vec![0.0; n * modes],
            sobolev_order,
        }
    }

    pub fn set(&mut self, mode: ModeIndex, value: f64) {
        let idx = mode.flat(self.n);
        if idx >= self.coefficients.len() {
            self.coefficients.resize(idx + 1, 0.0);
        }
        self.coefficients[idx] = value;
    }

    pub fn with_order(&self, m: f64) -> Self {
        Self {
            sobolev_order: m,
            ..self.clone()
        }
    }
}

/// `(Σ λ_k^m |x_ik|²)^{1/2}`.
pub fn sobolev_norm(x: &SpectralCoefficients) -> f64 {
    x.coefficients
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let k = ModeIndex::from_flat(idx, x.n).k;
            dirichlet_eigenvalue(&x.grid, k).powf(x.sobolev_order) * c * c
        })
        .sum::<f64>()
        .sqrt()
}
