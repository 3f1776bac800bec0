//! Classical fixed-step fourth-order Runge–Kutta.

use nalgebra::DVector;

/// One RK4 step of `y' = f(s, y)`.
pub fn rk4_step<F>(f: &F, s: f64, y: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let k1 = f(s, y);
    let k2 = f(s + 0.5 * h, &(y + &k1 * (0.5 * h)));
    let k3 = f(s + 0.5 * h, &(y + &k2 * (0.5 * h)));
    let k4 = f(s + h, &(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Integrate from `s0` to `s1` in `steps` equal steps, returning the end state.
pub fn rk4_integrate<F>(f: &F, s0: f64, s1: f64, y0: &DVector<f64>, steps: usize) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = (s1 - s0) / steps as f64;
    let mut y = y0.clone();
    for i in 0..steps {
        y = rk4_step(f, s0 + h * i as f64, &y, h);
    }
    y
}
