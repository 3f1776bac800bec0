//! Infinite-dimensional determinants of Jacobi operators along geodesics.
//!
//! Three independent routes compute the same numbers:
//!
//! * Galerkin truncation of `id + P⁻¹R` on `H¹₀` in a Fourier filtration or a
//!   piecewise-linear filtration ([`fredholm_galerkin`]),
//! * the matrix Jacobi ODE and Gel'fand–Yaglom ratios ([`gelfand_yaglom`]),
//! * closed-form products on constant-curvature spaces ([`model_geometry`]).
//!
//! [`heat_asymptotics`] turns determinants into short-time heat-kernel limits
//! and checks them against a spectral-sum heat kernel on round spheres.
//! [`report`] and [`validation`] drive the command-line tool.

pub mod error;
pub mod fredholm_galerkin;
pub mod gelfand_yaglom;
pub mod heat_asymptotics;
pub mod interval_spectrum;
pub mod linalg;
pub mod model_geometry;
pub mod ode;
pub mod quadrature;
pub mod report;
pub mod series;
pub mod validation;

pub use error::{Error, Result};
pub use fredholm_galerkin::{
    assemble_hessian_fourier, assemble_hessian_piecewise, evaluation_map_jacobian, fredholm_det,
    fredholm_det_deflated, fredholm_det_piecewise, hessian_trace, phi0_chain, DeterminantEstimate,
    GalerkinMatrix, Partition,
};
pub use gelfand_yaglom::{
    gy_degenerate_ratio, gy_ratio, solve_jacobi_ode, zeta_det_dirichlet_laplacian,
    zeta_det_jacobi, JacobiPropagation, ZetaDetValue,
};
pub use heat_asymptotics::{
    antipodal_limit_via_sxy, antipodal_sphere_limit_closed_form, euclidean_heat_kernel,
    heat_limit_validation, nondegenerate_limit_prediction, sphere_heat_kernel, HeatCase,
    HeatLimitReport, SphereSpectrum,
};
pub use interval_spectrum::{IntervalGrid, ModeIndex};
pub use model_geometry::{GeodesicData, JacobiSystem, ModelManifold, Potential};
