//! Low-rank factorization of the tensor attention matrix.
//!
//! `exp` is replaced by its degree-`g` Taylor polynomial. Expanding
//! `⟨q, k1 ∘ k2⟩^j` over monomials turns every attention entry into an inner
//! product of explicit feature vectors, so the `n x n²` matrix
//! `D⁻¹ exp(Q (K1 ⊘ K2)ᵀ / d)` becomes `U1 (V1 ⊘ W1)ᵀ` with three `n x k1`
//! factors, `k1 = C(d + g, g)`.
//!
//! Series coefficients and multinomial weights all sit on the query side.
//! The key-side factors hold raw monomials, so a row of `V1 ⊘ W1` is exactly
//! the raw monomial vector of `k1_j ∘ k2_l`.

use crate::error::{numerical, validation, Result};
use crate::instance::AttnInstance;
use crate::kron::odot3_matricized;
use crate::limits::Limits;
use crate::matrix::Matrix;

/// Truncated Taylor series of `exp` on `[-range, range]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyExpApprox {
    degree: usize,
    range: f64,
    coeffs: Vec<f64>,
}

impl PolyExpApprox {
    pub fn new(degree: usize, range: f64) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        let mut c = 1.0;
        for j in 0..=degree {
            if j > 0 {
                c /= j as f64;
            }
            coeffs.push(c);
        }
        Self {
            degree,
            range,
            coeffs,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// `c_j = 1/j!`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Lagrange bound `e^R R^(g+1) / (g+1)!` on `|p(x) - e^x|` over `[-R, R]`.
    ///
    /// Divided by `e^x` it also bounds the relative error, since
    /// `e^x >= e^-R` there.
    pub fn remainder_bound(&self) -> f64 {
        remainder_bound(self.range, self.degree)
    }
}

fn ln_factorial(m: usize) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

/// `e^R R^(g+1) / (g+1)!`, evaluated in log space.
pub fn remainder_bound(range: f64, degree: usize) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    let m = degree + 1;
    (range + m as f64 * range.ln() - ln_factorial(m)).exp()
}

/// Smallest degree whose remainder bound is at most `eps` and strictly below
/// `e^-R`. The second condition keeps the polynomial positive on the range.
pub fn choose_degree(range: f64, eps: f64) -> Result<usize> {
    if !(range.is_finite() && range >= 0.0) {
        return validation(format!(
            "range must be finite and non-negative, got {range}"
        ));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return validation(format!("eps must lie in (0, 1), got {eps}"));
    }
    let floor = (-range).exp();
    let mut g = 0;
    loop {
        let b = remainder_bound(range, g);
        if b <= eps && b < floor {
            return Ok(g);
        }
        g += 1;
    }
}

/// One monomial `x^α` with its multinomial weight `|α|! / (α_1! ... α_d!)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<usize>,
    pub degree: usize,
    pub multinomial: f64,
}

/// All monomials in `d` variables of total degree at most `g`, in graded
/// lexicographic order (by degree, then by descending exponent of `x1`, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    d: usize,
    degree: usize,
    entries: Vec<Monomial>,
}

/// `C(d + g, g)`, or `None` on overflow.
pub fn basis_size(d: usize, g: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for i in 1..=g as u128 {
        acc = acc.checked_mul(d as u128 + i)? / i;
    }
    Some(acc)
}

/// Enumerate the monomial basis; errors when `C(d+g, g)` exceeds `rank_cap`.
pub fn build_basis(d: usize, g: usize, rank_cap: usize) -> Result<MonomialBasis> {
    if d == 0 {
        return validation("monomial basis needs at least one variable");
    }
    match basis_size(d, g) {
        Some(k) if k <= rank_cap as u128 => {}
        size => {
            let shown = size.map_or_else(|| "overflow".to_string(), |k| k.to_string());
            return validation(format!(
                "degree {g} over {d} variables needs rank k1 = {shown}, above the rank cap {rank_cap}"
            ));
        }
    }
    let mut entries = Vec::new();
    let mut current = vec![0; d];
    for j in 0..=g {
        push_compositions(&mut current, 0, j, j, &mut entries);
    }
    Ok(MonomialBasis {
        d,
        degree: g,
        entries,
    })
}

fn push_compositions(
    current: &mut [usize],
    var: usize,
    remaining: usize,
    total: usize,
    out: &mut Vec<Monomial>,
) {
    if var + 1 == current.len() {
        current[var] = remaining;
        let mut multinomial = 1.0;
        let mut partial = 0;
        for &e in current.iter() {
            partial += e;
            multinomial *= binomial(partial, e);
        }
        out.push(Monomial {
            exponents: current.to_vec(),
            degree: total,
            multinomial,
        });
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e;
        push_compositions(current, var + 1, remaining - e, total, out);
    }
    current[var] = 0;
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64)
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vars(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }
}

/// Per-monomial scaling applied by [`feature_map`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureWeighting {
    /// `c_{|α|} · m(α)`: series coefficient times multinomial weight.
    Full,
    /// Raw monomials.
    None,
}

/// Row `i`, column `α` is `w(α) · Π_t M[i,t]^α_t`.
pub fn feature_map(
    m: &Matrix,
    basis: &MonomialBasis,
    weighting: FeatureWeighting,
) -> Result<Matrix> {
    if m.cols() != basis.d {
        return validation(format!(
            "feature map over {} variables applied to a matrix with {} columns",
            basis.d,
            m.cols()
        ));
    }
    let poly = PolyExpApprox::new(basis.degree, 0.0);
    let weights: Vec<f64> = basis
        .entries
        .iter()
        .map(|mono| match weighting {
            FeatureWeighting::Full => poly.coeffs()[mono.degree] * mono.multinomial,
            FeatureWeighting::None => 1.0,
        })
        .collect();
    let g = basis.degree;
    let d = basis.d;
    Ok(Matrix::from_row_fn(m.rows(), basis.len(), |i, out| {
        let row = m.row(i);
        // powers[t * (g+1) + e] = row[t]^e
        let mut powers = vec![1.0; d * (g + 1)];
        for t in 0..d {
            for e in 1..=g {
                powers[t * (g + 1) + e] = powers[t * (g + 1) + e - 1] * row[t];
            }
        }
        for ((o, mono), &w) in out.iter_mut().zip(&basis.entries).zip(&weights) {
            *o = mono
                .exponents
                .iter()
                .enumerate()
                .fold(w, |acc, (t, &e)| acc * powers[t * (g + 1) + e]);
        }
    }))
}

/// Implicit `n x n²` matrix `U (V ⊘ W)ᵀ` held as three `n x k` factors.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankTriple {
    pub u: Matrix,
    pub v: Matrix,
    pub w: Matrix,
}

impl LowRankTriple {
    pub fn new(u: Matrix, v: Matrix, w: Matrix) -> Result<Self> {
        if u.cols() != v.cols() || u.cols() != w.cols() {
            return validation(format!(
                "factor ranks differ: {}, {}, {}",
                u.cols(),
                v.cols(),
                w.cols()
            ));
        }
        if u.rows() != v.rows() || u.rows() != w.rows() {
            return validation(format!(
                "factor row counts differ: {}, {}, {}",
                u.rows(),
                v.rows(),
                w.rows()
            ));
        }
        Ok(Self { u, v, w })
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    /// Dense `U (V ⊘ W)ᵀ`; only for `n <= cap`.
    pub fn materialize(&self, cap: usize) -> Result<Matrix> {
        if self.rows() > cap {
            return validation(format!(
                "materializing an n x n² matrix is oracle-only: n = {} exceeds the oracle cap {cap}",
                self.rows()
            ));
        }
        odot3_matricized(&self.u, &self.v, &self.w)
    }
}

/// Low-rank approximation of the normalized attention matrix `F`.
#[derive(Clone, Debug)]
pub struct ForwardFactors {
    /// `U1` (already divided by the normalizer), `V1`, `W1`.
    pub factors: LowRankTriple,
    /// Approximate softmax normalizers `D̃`.
    pub normalizer: Vec<f64>,
    pub poly: PolyExpApprox,
    /// `τ` with `|F̃ - F| <= τ F` entrywise.
    pub rel_error: f64,
}

impl ForwardFactors {
    /// `k1`.
    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }
}

/// Build `U1, V1, W1` with `|U1 (V1 ⊘ W1)ᵀ - F| <= eps · F` entrywise.
///
/// Every softmax argument lies in `[-R, R]` with `R` from
/// [`AttnInstance::exp_arg_bound`], so `e^x >= e^-R` and an absolute series
/// error `ρ` is a relative error of at most `δ = ρ e^R` per entry.
/// Normalizing turns that into `τ = 2δ / (1 - δ)`. The degree is the
/// [`choose_degree`] answer for `eps e^-R / 3`, which gives `τ <= eps`.
/// Cost is `O(n · k1 · d)`.
pub fn build_f_factors(inst: &AttnInstance, eps: f64, limits: &Limits) -> Result<ForwardFactors> {
    inst.validate()?;
    build_f_factors_with_range(inst, eps, inst.exp_arg_bound(), limits)
}

/// [`build_f_factors`] with a caller-chosen argument bound `range`, which
/// must be at least the instance's own. A shared bound keeps the degree (and
/// so every rank) fixed across a batch of instances.
pub fn build_f_factors_with_range(
    inst: &AttnInstance,
    eps: f64,
    range: f64,
    limits: &Limits,
) -> Result<ForwardFactors> {
    inst.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return validation(format!("eps must lie in (0, 1), got {eps}"));
    }
    let own = inst.exp_arg_bound();
    if !own.is_finite() {
        return numerical("softmax argument bound is not finite");
    }
    if !(range >= own && range.is_finite()) {
        return validation(format!(
            "argument bound {range} is below the instance bound {own}"
        ));
    }
    let g = choose_degree(range, eps * (-range).exp() / 3.0)?;
    let basis = build_basis(inst.d, g, limits.rank_cap)?;

    let q = inst.q().scale(1.0 / inst.d as f64);
    let u_raw = feature_map(&q, &basis, FeatureWeighting::Full)?;
    let v1 = feature_map(&inst.k1(), &basis, FeatureWeighting::None)?;
    let w1 = feature_map(&inst.k2(), &basis, FeatureWeighting::None)?;

    // Row sums of U (V ⊘ W)ᵀ: (V ⊘ W)ᵀ 1 = (Vᵀ1) ∘ (Wᵀ1).
    let key_mass: Vec<f64> = v1
        .col_sums()
        .iter()
        .zip(w1.col_sums())
        .map(|(a, b)| a * b)
        .collect();
    let normalizer: Vec<f64> = (0..inst.n)
        .map(|j| crate::exact::dot(u_raw.row(j), &key_mass))
        .collect();
    if let Some((j, &s)) = normalizer
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.is_finite() && **s > 0.0))
    {
        return numerical(format!(
            "approximate softmax normalizer of row {j} is {s:e}; eps too coarse for positivity"
        ));
    }
    let inv: Vec<f64> = normalizer.iter().map(|s| 1.0 / s).collect();
    let u1 = u_raw.scale_rows(&inv)?;
    let delta = remainder_bound(range, g) * range.exp();
    Ok(ForwardFactors {
        factors: LowRankTriple::new(u1, v1, w1)?,
        normalizer,
        poly: PolyExpApprox::new(g, range),
        rel_error: 2.0 * delta / (1.0 - delta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_selection_examples() {
        assert_eq!(choose_degree(0.0, 0.5).unwrap(), 0);
        assert_eq!(choose_degree(0.0, 1e-12).unwrap(), 0);
        assert_eq!(choose_degree(1.0, 1e-6).unwrap(), 9);
        assert_eq!(choose_degree(0.5, 1e-8).unwrap(), 8);
        assert!(choose_degree(1.0, 1.0).is_err());
        assert!(choose_degree(-1.0, 0.1).is_err());
    }

    #[test]
    fn positivity_guard_can_dominate() {
        // With a loose eps, the e^-R floor sets the degree.
        let r = 3.0;
        let g = choose_degree(r, 0.9).unwrap();
        assert!(remainder_bound(r, g) < (-r).exp());
        assert!(remainder_bound(r, g - 1) >= (-r).exp());
    }

    #[test]
    fn basis_examples() {
        let b = build_basis(2, 2, 100_000).unwrap();
        let exps: Vec<Vec<usize>> = b.entries().iter().map(|m| m.exponents.clone()).collect();
        assert_eq!(
            exps,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
        let weights: Vec<f64> = b.entries().iter().map(|m| m.multinomial).collect();
        assert_eq!(weights, vec![1.0, 1.0, 1.0, 1.0, 2.0, 1.0]);

        let one = build_basis(1, 3, 100_000).unwrap();
        assert_eq!(one.len(), 4);
        assert!(one.entries().iter().all(|m| m.multinomial == 1.0));

        assert_eq!(build_basis(2, 9, 100_000).unwrap().len(), 55);
    }

    #[test]
    fn basis_rank_cap() {
        let err = build_basis(3, 9, 200).unwrap_err();
        assert!(err.to_string().contains("k1 = 220"), "{err}");
        assert_eq!(basis_size(2, 9), Some(55));
        assert!(basis_size(64, 200).is_none());
        let err = build_basis(64, 200, 100_000).unwrap_err();
        assert!(err.to_string().contains("overflow"), "{err}");
    }

    #[test]
    fn feature_map_examples() {
        let b = build_basis(1, 2, 100).unwrap();
        let f = feature_map(&Matrix::from_rows(&[[2.0]]), &b, FeatureWeighting::None).unwrap();
        assert_eq!(f, Matrix::from_rows(&[[1.0, 2.0, 4.0]]));

        let b = build_basis(2, 3, 100).unwrap();
        let z = feature_map(&Matrix::zeros(3, 2), &b, FeatureWeighting::Full).unwrap();
        for i in 0..3 {
            assert_eq!(z.get(i, 0), 1.0);
            assert!(z.row(i)[1..].iter().all(|&x| x == 0.0));
        }
        assert!(feature_map(&Matrix::zeros(3, 3), &b, FeatureWeighting::Full).is_err());
    }

    #[test]
    fn poly_matches_exp_within_bound() {
        let p = PolyExpApprox::new(9, 1.0);
        let bound = p.remainder_bound();
        for i in 0..=1000 {
            let x = -1.0 + 2.0 * i as f64 / 1000.0;
            assert!((p.eval(x) - x.exp()).abs() <= bound);
        }
    }

    #[test]
    fn triple_rejects_mismatch_and_caps_materialization() {
        assert!(
            LowRankTriple::new(Matrix::ones(2, 2), Matrix::ones(2, 1), Matrix::ones(2, 2)).is_err()
        );
        let t =
            LowRankTriple::new(Matrix::ones(3, 1), Matrix::ones(3, 1), Matrix::ones(3, 1)).unwrap();
        assert!(t.materialize(2).is_err());
        assert_eq!(t.materialize(3).unwrap(), Matrix::ones(3, 9));
    }
}
