//! Browser bindings: determinants along a constant-curvature geodesic, Jacobi
//! field profiles, and the sphere heat-kernel limit. Every export returns a
//! JSON string; the `*_json` functions are the same operations without the
//! wasm-bindgen boundary.

use std::f64::consts::PI;

use geodet::fredholm_galerkin::fredholm_det;
use geodet::gelfand_yaglom::{gy_ratio, solve_jacobi_ode};
use geodet::heat_asymptotics::{heat_limit_validation, HeatCase};
use geodet::model_geometry::{exp_jacobian_closed_form, jacobi_endomorphism, GeodesicData, JacobiSystem, ModelManifold};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const DEMO_MODES: [usize; 3] = [32, 64, 128];
const PROFILE_STEPS: usize = 512;

#[derive(Serialize)]
struct Determinants {
    fourier: f64,
    fourier_error: f64,
    gelfand_yaglom: f64,
    closed_form: f64,
}

#[derive(Serialize)]
struct Profile {
    s: Vec<f64>,
    det_j: Vec<f64>,
    conjugate_distance: Option<f64>,
}

#[derive(Serialize)]
struct HeatSummary {
    predicted: f64,
    extrapolated: f64,
    relative_deviation: f64,
    k: usize,
    t: Vec<f64>,
    ratio: Vec<f64>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn geodesic(kappa: f64, r: f64, n: usize) -> geodet::Result<GeodesicData> {
    GeodesicData::new(ModelManifold::constant_curvature(n, kappa)?, r)
}

pub fn determinants_json(kappa: f64, r: f64, n: usize) -> Result<String, String> {
    let inner = || -> geodet::Result<Determinants> {
        let g = geodesic(kappa, r, n)?;
        let sys = jacobi_endomorphism(&g)?;
        let est = fredholm_det(&sys, &DEMO_MODES)?;
        Ok(Determinants {
            fourier: est.extrapolated,
            fourier_error: est.error_estimate,
            gelfand_yaglom: gy_ratio(&JacobiSystem::free(n, 1.0)?, &sys)?,
            closed_form: exp_jacobian_closed_form(&g.manifold, r)?,
        })
    };
    to_json(&inner().map_err(|e| e.to_string())?)
}

pub fn jacobi_profile_json(kappa: f64, r: f64, n: usize, samples: usize) -> Result<String, String> {
    let inner = || -> geodet::Result<Profile> {
        let g = geodesic(kappa, r, n)?;
        let prop = solve_jacobi_ode(&jacobi_endomorphism(&g)?, PROFILE_STEPS)?;
        let stride = (PROFILE_STEPS / samples.clamp(2, PROFILE_STEPS)).max(1);
        let picks: Vec<usize> = (0..=PROFILE_STEPS).step_by(stride).collect();
        Ok(Profile {
            s: picks.iter().map(|&i| prop.t_grid[i] * r).collect(),
            det_j: picks.iter().map(|&i| prop.j[i].determinant()).collect(),
            conjugate_distance: g.manifold.conjugate_distance(),
        })
    };
    to_json(&inner().map_err(|e| e.to_string())?)
}

pub fn heat_limit_json(n: usize, radius: f64, antipodal: bool, distance: f64) -> Result<String, String> {
    let case = if antipodal {
        HeatCase::Antipodal
    } else {
        HeatCase::Nondegenerate { distance }
    };
    let rep = heat_limit_validation(n, radius, case).map_err(|e| e.to_string())?;
    to_json(&HeatSummary {
        predicted: rep.predicted,
        extrapolated: rep.extrapolated_oracle,
        relative_deviation: rep.rel_deviation,
        k: rep.k,
        t: rep.oracle_values.iter().map(|p| p.0).collect(),
        ratio: rep.oracle_values.iter().map(|p| p.1).collect(),
    })
}

#[wasm_bindgen]
pub fn determinants(kappa: f64, r: f64, n: usize) -> Result<String, JsError> {
    determinants_json(kappa, r, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn jacobi_profile(kappa: f64, r: f64, n: usize, samples: usize) -> Result<String, JsError> {
    jacobi_profile_json(kappa, r, n, samples).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn heat_limit(n: usize, radius: f64, antipodal: bool, distance: f64) -> Result<String, JsError> {
    heat_limit_json(n, radius, antipodal, distance).map_err(|e| JsError::new(&e))
}

/// `πR`, handy for the page's distance slider.
#[wasm_bindgen]
pub fn antipodal_distance(radius: f64) -> f64 {
    PI * radius
}
