//! Globally adaptive Gauss-Kronrod (7/15) quadrature for scalar and vector integrands.

use super::Vector;
use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-12 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vector,
    error: f64,
}

fn kronrod<F: Fn(f64) -> Vector>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = &fc * WGK[7];
    let mut g = &fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let sum = f(c - x) + f(c + x);
        k += &sum * WGK[i];
        if i % 2 == 1 {
            g += &sum * WG[i / 2];
        }
    }
    let value = k * h;
    let error = (&value - g * h).amax();
    Panel { a, b, value, error }
}

/// Integrates a vector-valued function over [a, b].
pub fn integrate_vec<F: Fn(f64) -> Vector>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Vector> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration limits must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(Vector::zeros(f(a).len()));
    }
    let mut panels = vec![kronrod(&f, a, b)];
    loop {
        let total: Vector = panels.iter().fold(Vector::zeros(panels[0].value.len()), |acc, p| acc + &p.value);
        let err: f64 = panels.iter().map(|p| p.error).sum();
        if !total.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("quadrature integrand"));
        }
        if err <= tol.abs.max(tol.rel * total.amax()) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(Error::Numerical(format!(
                "quadrature did not converge: error estimate {err:e} after {MAX_INTERVALS} panels"
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("non-empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            return Err(Error::Numerical("quadrature panel underflow".into()));
        }
        panels.push(kronrod(&f, p.a, mid));
        panels.push(kronrod(&f, mid, p.b));
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    integrate_vec(|x| Vector::from_element(1, f(x)), a, b, tol).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_exponential() {
        let tol = Tolerance::default();
        let v = integrate(|x| x * x, 0.0, 3.0, tol).unwrap();
        assert!((v - 9.0).abs() < 1e-12);
        let v = integrate(|x| (-x).exp(), 0.0, 40.0, tol).unwrap();
        assert!((v - (1.0 - (-40.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x: f64| x.powf(-0.4), 0.0, 1.0, Tolerance { abs: 1e-10, rel: 1e-10 }).unwrap();
        assert!((v - 1.0 / 0.6).abs() < 1e-9);
    }
}
