//! The `f(λ)` probe used to recover forward values from gradient calls.
//!
//! For scores `H` (`n x n²`) and a 0/1 value matrix `V` (`n² x d`),
//! `f(λ) = ‖diag(M 1)⁻¹ M V‖²_F` with `M = exp(λ H)`. Per row `i` this is
//! `g(λ, i) / h(λ, i)` where `s_ℓ = Σ_{j : V[j,ℓ] = 1} e^{λ H[i,j]}`,
//! `g = Σ_ℓ s_ℓ²`, `t = Σ_j e^{λ H[i,j]}` and `h = t²`.
//!
//! Internally every exponent is shifted by `-λ Ba`. The ratio `g / h` and its
//! derivative are unchanged by the shift, and nothing overflows.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{numerical, validation, Result};
use crate::exact::MAX_EXP_ARG;
use crate::matrix::Matrix;
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance {
    pub n: usize,
    pub d: usize,
    pub ba: f64,
    /// Scores, `n x n²`, entries in `[1, Ba]`, at least half of each row equal to `Ba`.
    pub h: Matrix,
    /// Values, `n² x d`, entries in `{0, 1}`.
    pub v: Matrix,
}

/// Entries per row that must equal `Ba`: `⌈n²/2⌉`.
pub fn majority(n: usize) -> usize {
    (n * n).div_ceil(2)
}

impl HardInstance {
    /// Wrap explicit matrices after checking the structural requirements.
    pub fn new(n: usize, d: usize, ba: f64, h: Matrix, v: Matrix) -> Result<Self> {
        if n == 0 || d == 0 {
            return validation(format!("n and d must be positive, got n = {n}, d = {d}"));
        }
        if !(ba.is_finite() && ba >= 1.0) {
            return validation(format!("Ba must be a finite value >= 1, got {ba}"));
        }
        if h.shape() != (n, n * n) || v.shape() != (n * n, d) {
            return validation(format!(
                "expected H {}x{} and V {}x{}, got {:?} and {:?}",
                n,
                n * n,
                n * n,
                d,
                h.shape(),
                v.shape()
            ));
        }
        if let Some(x) = h.data().iter().find(|&&x| !(1.0..=ba).contains(&x)) {
            return validation(format!("H entry {x} outside [1, {ba}]"));
        }
        for i in 0..n {
            let top = h.row(i).iter().filter(|&&x| x == ba).count();
            if top < majority(n) {
                return validation(format!(
                    "row {i} of H has {top} entries equal to Ba, needs {}",
                    majority(n)
                ));
            }
        }
        if let Some(x) = v.data().iter().find(|&&x| x != 0.0 && x != 1.0) {
            return validation(format!("V entry {x} is not 0 or 1"));
        }
        Ok(Self { n, d, ba, h, v })
    }

    /// Same scores with a different value matrix.
    pub fn with_values(&self, v: Matrix) -> Result<Self> {
        Self::new(self.n, self.d, self.ba, self.h.clone(), v)
    }
}

/// Random instance: in each row of `H`, a uniformly chosen set of `⌈n²/2⌉`
/// positions equals `Ba` and the rest are uniform in `[1, Ba]`; `V` entries
/// are fair coin flips.
pub fn make_hard_instance(n: usize, d: usize, ba: f64, seed: u64) -> Result<HardInstance> {
    if !(ba.is_finite() && ba >= 1.0) {
        return validation(format!("Ba must be a finite value >= 1, got {ba}"));
    }
    if n == 0 || d == 0 {
        return validation(format!("n and d must be positive, got n = {n}, d = {d}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = n * n;
    let mut h = Matrix::zeros(n, cols);
    for i in 0..n {
        for j in 0..cols {
            h.set(i, j, rng.random_range(1.0..=ba));
        }
        for j in sample(&mut rng, cols, majority(n)) {
            h.set(i, j, ba);
        }
    }
    let mut v = Matrix::zeros(cols, d);
    for x in v.data_mut() {
        *x = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    }
    HardInstance::new(n, d, ba, h, v)
}

fn check_lambda(hi: &HardInstance, lambda: f64) -> Result<()> {
    if !lambda.is_finite() || lambda.abs() * hi.ba > MAX_EXP_ARG {
        return numerical(format!(
            "|λ| · Ba = {} exceeds the overflow guard {MAX_EXP_ARG}",
            lambda.abs() * hi.ba
        ));
    }
    Ok(())
}

/// Shifted row sums for row `i`: `(s, s', t, t')` with exponent `λ (H - Ba)`
/// and derivatives taken with the shifted scores.
fn row_sums(hi: &HardInstance, lambda: f64, i: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let mut s = vec![0.0; hi.d];
    let mut ds = vec![0.0; hi.d];
    let (mut t, mut dt) = (0.0, 0.0);
    for (j, &x) in hi.h.row(i).iter().enumerate() {
        let shifted = x - hi.ba;
        let e = (lambda * shifted).exp();
        t += e;
        dt += shifted * e;
        for (l, &vl) in hi.v.row(j).iter().enumerate() {
            if vl != 0.0 {
                s[l] += e;
                ds[l] += shifted * e;
            }
        }
    }
    (s, ds, t, dt)
}

/// `f(λ)` by forming each softmax row and multiplying by `V`.
pub fn f_lambda(hi: &HardInstance, lambda: f64) -> Result<f64> {
    check_lambda(hi, lambda)?;
    let rows = par::map_indices(hi.n, |i| {
        let m: Vec<f64> =
            hi.h.row(i)
                .iter()
                .map(|&x| (lambda * (x - hi.ba)).exp())
                .collect();
        let total: f64 = m.iter().sum();
        let mut out = vec![0.0; hi.d];
        for (j, &mj) in m.iter().enumerate() {
            for (o, &vl) in out.iter_mut().zip(hi.v.row(j)) {
                *o += mj * vl;
            }
        }
        out.iter().map(|o| (o / total) * (o / total)).sum::<f64>()
    });
    Ok(rows.iter().sum())
}

/// `f(λ) = Σ_i g(λ, i) / h(λ, i)`.
pub fn f_via_gh(hi: &HardInstance, lambda: f64) -> Result<f64> {
    check_lambda(hi, lambda)?;
    let rows = par::map_indices(hi.n, |i| {
        let (s, _, t, _) = row_sums(hi, lambda, i);
        s.iter().map(|x| x * x).sum::<f64>() / (t * t)
    });
    Ok(rows.iter().sum())
}

/// Unshifted `(g(λ, i), h(λ, i))`. Errors when either is not finite.
pub fn gh_terms(hi: &HardInstance, lambda: f64, i: usize) -> Result<(f64, f64)> {
    check_lambda(hi, lambda)?;
    if i >= hi.n {
        return validation(format!("row {i} out of range for n = {}", hi.n));
    }
    let (s, _, t, _) = row_sums(hi, lambda, i);
    let scale = (lambda * hi.ba).exp();
    let g: f64 = s.iter().map(|x| (x * scale) * (x * scale)).sum();
    let h = (t * scale) * (t * scale);
    if !(g.is_finite() && h.is_finite()) {
        return numerical(format!("g or h overflows at λ = {lambda}"));
    }
    Ok((g, h))
}

/// `f'(λ) = Σ_i (g' h - g h') / h²`, evaluated as `Σ_i (g'/h - g h'/h²)`.
pub fn f_prime(hi: &HardInstance, lambda: f64) -> Result<f64> {
    check_lambda(hi, lambda)?;
    let rows = par::map_indices(hi.n, |i| {
        let (s, ds, t, dt) = row_sums(hi, lambda, i);
        let g: f64 = s.iter().map(|x| x * x).sum();
        let dg: f64 = s.iter().zip(&ds).map(|(x, dx)| 2.0 * x * dx).sum();
        let h = t * t;
        let dh = 2.0 * t * dt;
        dg / h - g * dh / (h * h)
    });
    Ok(rows.iter().sum())
}

/// Left Riemann sum `s_t = Σ_{i<t} f'(i/t) / t`, an estimate of `f(1) - f(0)`.
pub fn avg_estimate(hi: &HardInstance, t: usize) -> Result<f64> {
    if t == 0 {
        return validation("t must be at least 1");
    }
    let mut acc = 0.0;
    for i in 0..t {
        acc += f_prime(hi, i as f64 / t as f64)?;
    }
    Ok(acc / t as f64)
}

/// Step used for the central difference of `f'`.
pub const SECOND_DERIVATIVE_STEP: f64 = 1e-5;

/// Largest `|f''|` over 101 equally spaced points of `[0, 1]`, with `f''` from
/// central differences of the analytic `f'`.
pub fn b_emp(hi: &HardInstance) -> Result<f64> {
    let step = SECOND_DERIVATIVE_STEP;
    let mut best = 0.0f64;
    for k in 0..=100 {
        let lambda = k as f64 / 100.0;
        let second = (f_prime(hi, lambda + step)? - f_prime(hi, lambda - step)?) / (2.0 * step);
        best = best.max(second.abs());
    }
    Ok(best)
}

/// `8 · Ba · n · d`.
pub fn derivative_bound(hi: &HardInstance) -> f64 {
    8.0 * hi.ba * (hi.n * hi.d) as f64
}
