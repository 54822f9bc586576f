//! Browser bindings: each export returns a JSON string for the demo page.

use serde::Serialize;
use tat_core::exact::{attention_matrix, grad_exact};
use tat_core::hardness::{derivative_bound, f_lambda, f_prime, make_hard_instance};
use tat_core::{build_f_factors, grad_fast, AttnInstance, Limits, Matrix};
use wasm_bindgen::prelude::*;

/// Largest `n` the page will draw; the heatmap is `n x n²`.
pub const MAX_HEATMAP_N: usize = 16;
pub const MAX_GRADIENT_N: usize = 64;
pub const MAX_PROBE_N: usize = 16;

#[derive(Serialize)]
struct Grid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl From<&Matrix> for Grid {
    fn from(m: &Matrix) -> Self {
        Grid {
            rows: m.rows(),
            cols: m.cols(),
            values: m.data().to_vec(),
        }
    }
}

#[derive(Serialize)]
struct Heatmap {
    exact: Grid,
    lowrank: Grid,
    degree: usize,
    rank: usize,
    max_error: f64,
}

#[derive(Serialize)]
struct GradientComparison {
    exact: Grid,
    fast: Grid,
    max_error: f64,
    eps_target: f64,
    degree: usize,
    ranks: [usize; 5],
}

#[derive(Serialize)]
struct ProbeCurve {
    lambda: Vec<f64>,
    f: Vec<f64>,
    f_prime: Vec<f64>,
    derivative_bound: f64,
}

fn check_n(n: usize, cap: usize) -> Result<(), String> {
    if n > cap {
        Err(format!("n = {n} is above the demo limit {cap}"))
    } else {
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn heatmap_json(n: usize, d: usize, bound: f64, seed: u64, eps: f64) -> Result<String, String> {
    check_n(n, MAX_HEATMAP_N)?;
    let limits = Limits::default();
    let inst = AttnInstance::random(n, d, bound, seed).map_err(|e| e.to_string())?;
    let (exact, _) = attention_matrix(&inst, &inst.x(), &limits).map_err(|e| e.to_string())?;
    let ff = build_f_factors(&inst, eps, &limits).map_err(|e| e.to_string())?;
    let lowrank = ff
        .factors
        .materialize(MAX_HEATMAP_N)
        .map_err(|e| e.to_string())?;
    let max_error = lowrank.max_abs_diff(&exact).map_err(|e| e.to_string())?;
    to_json(&Heatmap {
        exact: (&exact).into(),
        lowrank: (&lowrank).into(),
        degree: ff.degree(),
        rank: ff.rank(),
        max_error,
    })
}

pub fn gradient_json(
    n: usize,
    d: usize,
    bound: f64,
    seed: u64,
    eps: f64,
) -> Result<String, String> {
    check_n(n, MAX_GRADIENT_N)?;
    let limits = Limits::default();
    let inst = AttnInstance::random(n, d, bound, seed).map_err(|e| e.to_string())?;
    let exact = grad_exact(&inst, &limits).map_err(|e| e.to_string())?;
    let rep = grad_fast(&inst, eps, &limits).map_err(|e| e.to_string())?;
    let max_error = rep
        .g_tilde
        .max_abs_diff(&exact)
        .map_err(|e| e.to_string())?;
    to_json(&GradientComparison {
        exact: (&exact).into(),
        fast: (&rep.g_tilde).into(),
        max_error,
        eps_target: rep.eps_target,
        degree: rep.degree,
        ranks: [rep.k1, rep.k2, rep.k3, rep.k4, rep.k5],
    })
}

pub fn probe_json(n: usize, d: usize, ba: f64, seed: u64, points: usize) -> Result<String, String> {
    check_n(n, MAX_PROBE_N)?;
    if points < 2 {
        return Err("need at least two points".into());
    }
    let hi = make_hard_instance(n, d, ba, seed).map_err(|e| e.to_string())?;
    let lambda: Vec<f64> = (0..points)
        .map(|k| k as f64 / (points - 1) as f64)
        .collect();
    let f = lambda
        .iter()
        .map(|&l| f_lambda(&hi, l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let f_prime = lambda
        .iter()
        .map(|&l| f_prime(&hi, l))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    to_json(&ProbeCurve {
        lambda,
        f,
        f_prime,
        derivative_bound: derivative_bound(&hi),
    })
}

/// Exact attention matrix next to its low-rank approximation.
#[wasm_bindgen]
pub fn attention_heatmap(
    n: usize,
    d: usize,
    bound: f64,
    seed: u32,
    eps: f64,
) -> Result<String, JsError> {
    heatmap_json(n, d, bound, seed.into(), eps).map_err(|e| JsError::new(&e))
}

/// Exact and fast gradients for the same random instance.
#[wasm_bindgen]
pub fn compare_gradients(
    n: usize,
    d: usize,
    bound: f64,
    seed: u32,
    eps: f64,
) -> Result<String, JsError> {
    gradient_json(n, d, bound, seed.into(), eps).map_err(|e| JsError::new(&e))
}

/// `f(λ)` and `f'(λ)` on an even grid of `[0, 1]` for a random hard instance.
#[wasm_bindgen]
pub fn probe_curve(
    n: usize,
    d: usize,
    ba: f64,
    seed: u32,
    points: usize,
) -> Result<String, JsError> {
    probe_json(n, d, ba, seed.into(), points).map_err(|e| JsError::new(&e))
}
