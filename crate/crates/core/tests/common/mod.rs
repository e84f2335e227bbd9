#![allow(dead_code)]

use mlglm::model::{ActivationSpec, LayerSpec, ModelSpec, PriorSpec};

/// Composite Simpson rule for `E f(G)`, `G ~ N(0, 1)`, on `[-12, 12]`.
pub fn simpson_gauss(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / intervals as f64;
    let density = |g: f64| (-0.5 * g * g).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = 0.0;
    for i in 0..=intervals {
        let g = a + i as f64 * h;
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * density(g) * f(g);
    }
    acc * h / 3.0
}

/// `log cosh(a)` without overflow.
pub fn log_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn tanh_model(alphas: &[f64], beta: f64) -> ModelSpec {
    let layers = alphas
        .iter()
        .map(|&alpha| LayerSpec { alpha, activation: ActivationSpec::tanh(1.0) })
        .collect();
    ModelSpec::new(PriorSpec::rademacher(), layers, beta).unwrap()
}
