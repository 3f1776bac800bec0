//! Determinants from the matrix Jacobi equation `J'' = V J`, `J(0) = 0`,
//! `J'(0) = I`: Gel'fand–Yaglom ratios and zeta-regularized determinants.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_geometry::JacobiSystem;
use crate::quadrature::simpson;

/// Step count used by the ratio and zeta routes.
pub const DEFAULT_STEPS: usize = 2048;
/// `|det J(t)| < DEGENERACY_TOL · tⁿ` counts as a zero mode.
pub const DEGENERACY_TOL: f64 = 1e-6;
const MIN_STEPS: usize = 16;

/// Samples of `J` and `J'` on an equally spaced grid of `[0, t]`.
#[derive(Debug, Clone)]
pub struct JacobiPropagation {
    pub t_grid: Vec<f64>,
    pub j: Vec<DMatrix<f64>>,
    pub jprime: Vec<DMatrix<f64>>,
    pub step_size: f64,
    /// Max-norm change of `(J(t), J'(t))` against a run with half the steps, divided by 15.
    pub error_estimate: f64,
}

impl JacobiPropagation {
    pub fn n(&self) -> usize {
        self.j[0].nrows()
    }

    pub fn length(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }

    pub fn j_end(&self) -> &DMatrix<f64> {
        self.j.last().unwrap()
    }

    pub fn jprime_end(&self) -> &DMatrix<f64> {
        self.jprime.last().unwrap()
    }

    pub fn det_j_end(&self) -> f64 {
        self.j_end().determinant()
    }

    /// `max_s ‖J'ᵀJ − JᵀJ'‖`.
    pub fn wronskian_drift(&self) -> f64 {
        self.j
            .iter()
            .zip(&self.jprime)
            .map(|(j, p)| (p.transpose() * j - j.transpose() * p).amax())
            .fold(0.0, f64::max)
    }

    /// Checks `det J(s) > 0` on `(0, t)` and at `t` unless the end is a zero mode.
    fn first_nonpositive(&self, include_end: bool) -> Option<f64> {
        let last = self.t_grid.len() - 1;
        (1..=last)
            .filter(|&i| include_end || i < last)
            .find(|&i| self.j[i].determinant() <= 0.0)
            .map(|i| self.t_grid[i])
    }

    fn is_degenerate(&self) -> bool {
        self.det_j_end().abs() < DEGENERACY_TOL * self.length().powi(self.n() as i32)
    }

    /// `∫₀ᵗ J(s)ᵀ J(s) ds` by composite Simpson on the stored grid.
    pub fn gram_integral(&self) -> DMatrix<f64> {
        let n = self.n();
        let products: Vec<DMatrix<f64>> = self.j.iter().map(|j| j.transpose() * j).collect();
        DMatrix::from_fn(n, n, |a, b| {
            let samples: Vec<f64> = products.iter().map(|m| m[(a, b)]).collect();
            simpson(&samples, self.step_size)
        })
    }

    /// Rows `s, J_11, J_12, …, J'_11, …` (row-major entries).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.n();
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["s".to_string()];
        for name in ["J", "Jp"] {
            for a in 1..=n {
                for b in 1..=n {
                    header.push(format!("{name}_{a}{b}"));
                }
            }
        }
        w.write_record(&header).map_err(io)?;
        for ((s, j), p) in self.t_grid.iter().zip(&self.j).zip(&self.jprime) {
            let mut row = vec![format!("{s:.17e}")];
            for m in [j, p] {
                for a in 0..n {
                    for b in 0..n {
                        row.push(format!("{:.17e}", m[(a, b)]));
                    }
                }
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn sample(sys: &JacobiSystem, s: f64) -> Result<DMatrix<f64>> {
    let v = sys.at(s);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Integration(format!("potential is not finite at s = {s}")));
    }
    Ok(v)
}

/// One RK4 step of `(J, J')' = (J', V J)`.
fn step(
    sys: &JacobiSystem,
    s: f64,
    h: f64,
    j: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let v0 = sample(sys, s)?;
    let vm = sample(sys, s + 0.5 * h)?;
    let v1 = sample(sys, s + h)?;
    let k1j = p.clone();
    let k1p = &v0 * j;
    let j2 = j + &k1j * (0.5 * h);
    let k2j = p + &k1p * (0.5 * h);
    let k2p = &vm * &j2;
    let j3 = j + &k2j * (0.5 * h);
    let k3j = p + &k2p * (0.5 * h);
    let k3p = &vm * &j3;
    let j4 = j + &k3j * h;
    let k4j = p + &k3p * h;
    let k4p = &v1 * &j4;
    let jn = j + (k1j + k2j * 2.0 + k3j * 2.0 + k4j) * (h / 6.0);
    let pn = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
    Ok((jn, pn))
}

/// Propagates `(J, J')` from `s0` to `s1` in `steps` equal steps, keeping every sample.
pub fn propagate(
    sys: &JacobiSystem,
    s0: f64,
    s1: f64,
    j0: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    steps: usize,
) -> Result<(Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let h = (s1 - s0) / steps as f64;
    let mut grid = Vec::with_capacity(steps + 1);
    let mut js = Vec::with_capacity(steps + 1);
    let mut ps = Vec::with_capacity(steps + 1);
    grid.push(s0);
    js.push(j0.clone());
    ps.push(p0.clone());
    for i in 0..steps {
        let s = s0 + h * i as f64;
        let (j, p) = step(sys, s, h, &js[i], &ps[i])?;
        grid.push(if i + 1 == steps { s1 } else { s + h });
        js.push(j);
        ps.push(p);
    }
    Ok((grid, js, ps))
}

/// The `2n × 2n` matrix sending `(J(s0), J'(s0))` to `(J(s1), J'(s1))`.
pub fn transfer_matrix(sys: &JacobiSystem, s0: f64, s1: f64, steps: usize) -> Result<DMatrix<f64>> {
    let n = sys.n();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    let id = DMatrix::identity(n, n);
    let zero = DMatrix::zeros(n, n);
    for (col, (j0, p0)) in [(&id, &zero), (&zero, &id)].into_iter().enumerate() {
        let (_, js, ps) = propagate(sys, s0, s1, j0, p0, steps)?;
        out.view_mut((0, col * n), (n, n)).copy_from(js.last().unwrap());
        out.view_mut((n, col * n), (n, n)).copy_from(ps.last().unwrap());
    }
    Ok(out)
}

/// Solves `J'' = V J` on `[0, t]` with `J(0) = 0`, `J'(0) = I`.
pub fn solve_jacobi_ode(sys: &JacobiSystem, steps: usize) -> Result<JacobiPropagation> {
    if steps < MIN_STEPS {
        return Err(Error::Domain(format!("at least {MIN_STEPS} steps are required, got {steps}")));
    }
    let n = sys.n();
    let t = sys.length();
    let j0 = DMatrix::zeros(n, n);
    let p0 = DMatrix::identity(n, n);
    let (grid, js, ps) = propagate(sys, 0.0, t, &j0, &p0, steps)?;
    let (_, cj, cp) = propagate(sys, 0.0, t, &j0, &p0, steps / 2)?;
    let error_estimate = ((js.last().unwrap() - cj.last().unwrap()).amax())
        .max((ps.last().unwrap() - cp.last().unwrap()).amax())
        / 15.0;
    Ok(JacobiPropagation {
        t_grid: grid,
        j: js,
        jprime: ps,
        step_size: t / steps as f64,
        error_estimate,
    })
}

fn check_compatible(a: &JacobiSystem, b: &JacobiSystem) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::Domain(format!("fiber dimensions differ: {} vs {}", a.n(), b.n())));
    }
    if (a.length() - b.length()).abs() > 1e-12 * a.length() {
        return Err(Error::Domain(format!(
            "interval lengths differ: {} vs {}",
            a.length(),
            b.length()
        )));
    }
    Ok(())
}

fn positive_propagation(sys: &JacobiSystem) -> Result<JacobiPropagation> {
    let prop = solve_jacobi_ode(sys, DEFAULT_STEPS)?;
    if let Some(at) = prop.first_nonpositive(false) {
        return Err(Error::NonPositiveOperator { at });
    }
    if prop.is_degenerate() {
        return Err(Error::DegenerateRoute(format!(
            "det J(t) = {:e} vanishes; the operator has a zero mode",
            prop.det_j_end()
        )));
    }
    if let Some(at) = prop.first_nonpositive(true) {
        return Err(Error::NonPositiveOperator { at });
    }
    Ok(prop)
}

/// `det J₂(t) / det J₁(t) = det_ζ(P₂)/det_ζ(P₁)` for positive operators.
pub fn gy_ratio(sys1: &JacobiSystem, sys2: &JacobiSystem) -> Result<f64> {
    check_compatible(sys1, sys2)?;
    let p1 = positive_propagation(sys1)?;
    let p2 = positive_propagation(sys2)?;
    Ok(p2.det_j_end() / p1.det_j_end())
}

/// Kernel of `J(t)` (right singular vectors with `σ < DEGENERACY_TOL · t`) and
/// its orthogonal complement, as column bases.
fn kernel_split(j_end: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = j_end.nrows();
    let svd = SVD::new(j_end.clone(), false, true);
    let vt = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let dim = order
        .iter()
        .filter(|&&i| svd.singular_values[i] < DEGENERACY_TOL * t)
        .count()
        .max(1);
    let kernel: Vec<_> = order[..dim].iter().map(|&i| vt.row(i).transpose()).collect();
    let rest: Vec<_> = order[dim..].iter().map(|&i| vt.row(i).transpose()).collect();
    let u = DMatrix::from_columns(&kernel);
    let w = if rest.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&rest)
    };
    (u, w)
}

/// `det′_ζ(P)/det_ζ(P_ref)` for `P` with zero modes, together with the number
/// of zero modes.
///
/// With `U` spanning `ker J(t)` and `W` its complement the value is
/// `|det[J(t)W, J'(t)U]| · det(Uᵀ G U) / (det(Uᵀ J'ᵀJ' U) · |det J_ref(t)|)`,
/// `G = ∫ JᵀJ`. When the kernel is everything this is
/// `det G / (|det J'(t)| · det J_ref(t))`.
pub fn gy_degenerate_ratio_with_kernel(sys_deg: &JacobiSystem, sys_ref: &JacobiSystem) -> Result<(f64, usize)> {
    check_compatible(sys_deg, sys_ref)?;
    let mut steps = DEFAULT_STEPS;
    if steps % 2 == 1 {
        steps += 1;
    }
    let prop = solve_jacobi_ode(sys_deg, steps)?;
    if !prop.is_degenerate() {
        return Err(Error::WrongRoute(format!(
            "det J(t) = {:e} does not vanish; use the nondegenerate ratio",
            prop.det_j_end()
        )));
    }
    let reference = positive_propagation(sys_ref)?;
    let t = sys_deg.length();
    let (u, w) = kernel_split(prop.j_end(), t);
    let k = u.ncols();
    let n = prop.n();
    let mut mixed = DMatrix::zeros(n, n);
    mixed.columns_mut(0, n - k).copy_from(&(prop.j_end() * &w));
    mixed.columns_mut(n - k, k).copy_from(&(prop.jprime_end() * &u));
    let gram = prop.gram_integral();
    let jpu = prop.jprime_end() * &u;
    let numerator = mixed.determinant().abs() * (u.transpose() * gram * &u).determinant();
    let denominator = (jpu.transpose() * jpu).determinant() * reference.det_j_end().abs();
    Ok((numerator / denominator, k))
}

pub fn gy_degenerate_ratio(sys_deg: &JacobiSystem, sys_ref: &JacobiSystem) -> Result<f64> {
    gy_degenerate_ratio_with_kernel(sys_deg, sys_ref).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaRoute {
    ClosedForm,
    GyRatio,
    Deflated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaDetValue {
    pub value: f64,
    pub route: ZetaRoute,
    pub excluded_zero_modes: usize,
}

/// `det_ζ(−d²/ds²)` on `[0, t]` with Dirichlet conditions and `n` components: `(2t)ⁿ`.
pub fn zeta_det_dirichlet_laplacian(t: f64, n: usize) -> Result<ZetaDetValue> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("interval length must be positive, got {t}")));
    }
    if n == 0 {
        return Err(Error::Domain("fiber dimension must be at least 1".into()));
    }
    Ok(ZetaDetValue {
        value: (2.0 * t).powi(n as i32),
        route: ZetaRoute::ClosedForm,
        excluded_zero_modes: 0,
    })
}

/// `det_ζ(Pᵐ)` from `ζ_{Pᵐ}(z) = n (π/t)^{−2mz} ζ_R(2mz)`, using
/// `ζ_R(0) = −1/2` and `ζ_R'(0) = −ln(2π)/2`.
pub fn zeta_det_dirichlet_power(t: f64, n: usize, m: u32) -> Result<f64> {
    zeta_det_dirichlet_laplacian(t, n)?;
    let (zeta0, dzeta0) = (-0.5, -(2.0 * PI).ln() / 2.0);
    let m = m as f64;
    let derivative = n as f64 * (-2.0 * m * (PI / t).ln() * zeta0 + 2.0 * m * dzeta0);
    Ok((-derivative).exp())
}

/// `det_ζ(P + ℛ) = (2t)ⁿ det J(t)/tⁿ`, or `det′_ζ` with zero modes excluded.
pub fn zeta_det_jacobi(sys: &JacobiSystem) -> Result<ZetaDetValue> {
    let n = sys.n();
    let t = sys.length();
    let base = zeta_det_dirichlet_laplacian(t, n)?.value;
    let prop = solve_jacobi_ode(sys, DEFAULT_STEPS)?;
    if prop.is_degenerate() {
        let free = JacobiSystem::free(n, t)?;
        let (ratio, k) = gy_degenerate_ratio_with_kernel(sys, &free)?;
        return Ok(ZetaDetValue {
            value: base * ratio,
            route: ZetaRoute::Deflated,
            excluded_zero_modes: k,
        });
    }
    if let Some(at) = prop.first_nonpositive(true) {
        return Err(Error::NonPositiveOperator { at });
    }
    Ok(ZetaDetValue {
        value: base * prop.det_j_end() / t.powi(n as i32),
        route: ZetaRoute::GyRatio,
        excluded_zero_modes: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_solution() {
        let p = solve_jacobi_ode(&JacobiSystem::free(2, 1.0).unwrap(), 64).unwrap();
        assert!((p.j_end() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        assert!((p.jprime_end() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        assert!((p.j[32][(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn too_few_steps() {
        assert!(solve_jacobi_ode(&JacobiSystem::free(1, 1.0).unwrap(), 8).is_err());
    }

    #[test]
    fn sinh_solution() {
        let p = solve_jacobi_ode(&JacobiSystem::scalar(1, 1.0, 1.0).unwrap(), 2048).unwrap();
        assert!((p.j_end()[(0, 0)] - 1f64.sinh()).abs() < 1e-10);
        assert!(p.error_estimate < 1e-10);
    }

    #[test]
    fn zero_mode_solution() {
        let p = solve_jacobi_ode(&JacobiSystem::scalar(1, -PI * PI, 1.0).unwrap(), 2048).unwrap();
        assert!(p.j_end()[(0, 0)].abs() < 1e-8);
        assert!((p.jprime_end()[(0, 0)] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn nonfinite_potential_is_integration_error() {
        // finite on the symmetry-check samples, infinite at a midpoint of the RK grid
        let sys = JacobiSystem::from_fn(1, 1.0, |s| {
            let bad = ((s * 64.0) - 1.0).abs() < 1e-12;
            DMatrix::from_element(1, 1, if bad { f64::NAN } else { 0.0 })
        })
        .unwrap();
        assert!(matches!(solve_jacobi_ode(&sys, 32), Err(Error::Integration(_))));
    }

    #[test]
    fn ratio_examples() {
        let free = JacobiSystem::free(2, 1.0).unwrap();
        let c = JacobiSystem::scalar(2, 1.0, 1.0).unwrap();
        assert_eq!(gy_ratio(&c, &c).unwrap(), 1.0);
        assert_relative_eq!(gy_ratio(&free, &c).unwrap(), 1f64.sinh().powi(2), max_relative = 1e-10);
    }

    #[test]
    fn ratio_rejects_nonpositive() {
        let free = JacobiSystem::free(1, 1.0).unwrap();
        let neg = JacobiSystem::scalar(1, -4.0 * PI * PI * 0.6, 1.0).unwrap();
        assert!(matches!(gy_ratio(&free, &neg), Err(Error::NonPositiveOperator { .. })));
        let zero = JacobiSystem::scalar(1, -PI * PI, 1.0).unwrap();
        assert!(matches!(gy_ratio(&free, &zero), Err(Error::DegenerateRoute(_))));
        let other = JacobiSystem::free(2, 1.0).unwrap();
        assert!(matches!(gy_ratio(&free, &other), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_scalar() {
        let deg = JacobiSystem::scalar(1, -PI * PI, 1.0).unwrap();
        let free = JacobiSystem::free(1, 1.0).unwrap();
        let v = gy_degenerate_ratio(&deg, &free).unwrap();
        assert!((v - 1.0 / (2.0 * PI * PI)).abs() < 1e-10);
        assert!(matches!(gy_degenerate_ratio(&free, &free), Err(Error::WrongRoute(_))));
    }

    #[test]
    fn degenerate_block() {
        let v = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, -PI * PI]));
        let deg = JacobiSystem::constant(v, 1.0).unwrap();
        let free = JacobiSystem::free(2, 1.0).unwrap();
        let (r, k) = gy_degenerate_ratio_with_kernel(&deg, &free).unwrap();
        assert_eq!(k, 1);
        assert!((r - 1.0 / (2.0 * PI * PI)).abs() < 1e-10);

        let (c, s) = (0.6f64, 0.8f64);
        let q = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let rotated = JacobiSystem::constant(&q * deg.at(0.0) * q.transpose(), 1.0).unwrap();
        let (r2, k2) = gy_degenerate_ratio_with_kernel(&rotated, &free).unwrap();
        assert_eq!(k2, 1);
        assert!((r2 - r).abs() < 1e-10);
    }

    #[test]
    fn zeta_closed_forms() {
        assert_eq!(zeta_det_dirichlet_laplacian(1.0, 3).unwrap().value, 8.0);
        assert_eq!(zeta_det_dirichlet_laplacian(0.5, 1).unwrap().value, 1.0);
        assert!(zeta_det_dirichlet_laplacian(0.0, 1).is_err());
        for (t, n) in [(1.0, 3), (0.5, 1), (2.7, 2)] {
            let base = zeta_det_dirichlet_laplacian(t, n).unwrap().value;
            assert_relative_eq!(zeta_det_dirichlet_power(t, n, 1).unwrap(), base, max_relative = 1e-14);
            assert_relative_eq!(zeta_det_dirichlet_power(t, n, 2).unwrap(), base * base, max_relative = 1e-14);
        }
    }

    #[test]
    fn zeta_jacobi() {
        let z = zeta_det_jacobi(&JacobiSystem::free(2, 1.0).unwrap()).unwrap();
        assert_relative_eq!(z.value, 4.0, max_relative = 1e-14);
        assert_eq!(z.route, ZetaRoute::GyRatio);
        let c = zeta_det_jacobi(&JacobiSystem::scalar(1, 1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(c.value, 2.0 * 1f64.sinh(), max_relative = 1e-10);
        let d = zeta_det_jacobi(&JacobiSystem::scalar(1, -PI * PI, 1.0).unwrap()).unwrap();
        assert_eq!(d.excluded_zero_modes, 1);
        assert_eq!(d.route, ZetaRoute::Deflated);
    }

    #[test]
    fn csv_trace() {
        let p = solve_jacobi_ode(&JacobiSystem::free(2, 1.0).unwrap(), 16).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,J_11,J_12,J_21,J_22,Jp_11"));
        assert_eq!(text.lines().count(), 18);
    }
}
