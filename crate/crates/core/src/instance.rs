//! The attention training problem: inputs `A1..A5`, target `E`, and the
//! factored weights `X1, X2, X3, Y1, Y2`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{validation, Result};
use crate::kron::col_kron;
use crate::matrix::Matrix;

/// Block labels in file and generation order.
pub const BLOCK_LABELS: [&str; 11] = [
    "A1", "A2", "A3", "A4", "A5", "E", "X1", "X2", "X3", "Y1", "Y2",
];

/// One problem instance.
///
/// `A1..A5` and `E` are `n x d`; `X1..X3`, `Y1`, `Y2` are `d x d`. The
/// composite weights are `X = X1 (X2 ⊘ X3)ᵀ` (`d x d²`) and
/// `Y = Y1 ⊘ Y2` (`d² x d`).
#[derive(Clone, Debug, PartialEq)]
pub struct AttnInstance {
    pub n: usize,
    pub d: usize,
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub a4: Matrix,
    pub a5: Matrix,
    pub e: Matrix,
    pub x1: Matrix,
    pub x2: Matrix,
    pub x3: Matrix,
    pub y1: Matrix,
    pub y2: Matrix,
}

impl AttnInstance {
    /// Assemble from the eleven blocks in [`BLOCK_LABELS`] order.
    pub fn from_blocks(n: usize, d: usize, blocks: Vec<Matrix>) -> Result<Self> {
        if blocks.len() != BLOCK_LABELS.len() {
            return validation(format!(
                "expected {} blocks, got {}",
                BLOCK_LABELS.len(),
                blocks.len()
            ));
        }
        let mut it = blocks.into_iter();
        let mut next = || it.next().expect("length checked");
        let inst = Self {
            n,
            d,
            a1: next(),
            a2: next(),
            a3: next(),
            a4: next(),
            a5: next(),
            e: next(),
            x1: next(),
            x2: next(),
            x3: next(),
            y1: next(),
            y2: next(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn blocks(&self) -> [&Matrix; 11] {
        [
            &self.a1, &self.a2, &self.a3, &self.a4, &self.a5, &self.e, &self.x1, &self.x2,
            &self.x3, &self.y1, &self.y2,
        ]
    }

    /// Check every block shape against `(n, d)` and that all entries are finite.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return validation(format!(
                "n and d must be positive, got n = {}, d = {}",
                self.n, self.d
            ));
        }
        for (i, (label, m)) in BLOCK_LABELS.iter().zip(self.blocks()).enumerate() {
            let want = if i < 6 {
                (self.n, self.d)
            } else {
                (self.d, self.d)
            };
            if m.shape() != want {
                return validation(format!(
                    "block {label} has shape {:?}, expected {:?}",
                    m.shape(),
                    want
                ));
            }
            if !m.is_finite() {
                return validation(format!("block {label} contains non-finite entries"));
            }
        }
        Ok(())
    }

    /// Draw every entry i.i.d. uniform in `[-bound, bound]`.
    ///
    /// Block `b` (in [`BLOCK_LABELS`] order) reads ChaCha8 stream `b` seeded
    /// with `seed`; each entry consumes one `u64`, mapped through its top 53
    /// bits to `u ∈ [0, 1)` and then to `bound * (2u - 1)`. Entries are
    /// drawn row-major. Because blocks use separate streams, the `d x d`
    /// weights depend only on `(seed, d)` and the `n x d` inputs for a larger
    /// `n` extend those for a smaller one.
    pub fn random(n: usize, d: usize, bound: f64, seed: u64) -> Result<Self> {
        if !(bound.is_finite() && bound >= 0.0) {
            return validation(format!(
                "bound must be finite and non-negative, got {bound}"
            ));
        }
        if n == 0 || d == 0 {
            return validation(format!("n and d must be positive, got n = {n}, d = {d}"));
        }
        let blocks = (0..BLOCK_LABELS.len())
            .map(|b| {
                let rows = if b < 6 { n } else { d };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b as u64);
                let data = (0..rows * d)
                    .map(|_| bound * (2.0 * unit(&mut rng) - 1.0))
                    .collect();
                Matrix::new(rows, d, data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_blocks(n, d, blocks)
    }

    /// Same instance with a different target `E`.
    pub fn with_target(&self, e: Matrix) -> Result<Self> {
        let inst = Self { e, ..self.clone() };
        inst.validate()?;
        Ok(inst)
    }

    /// `X = X1 (X2 ⊘ X3)ᵀ`, equivalently `X1 (X2ᵀ ⊖ X3ᵀ)`.
    pub fn x(&self) -> Matrix {
        let k = col_kron(&self.x2, &self.x3).expect("d x d blocks");
        self.x1.matmul(&k.transpose()).expect("d x d blocks")
    }

    /// `Y = Y1 ⊘ Y2`.
    pub fn y(&self) -> Matrix {
        col_kron(&self.y1, &self.y2).expect("d x d blocks")
    }

    /// Query `A1 X1`.
    pub fn q(&self) -> Matrix {
        self.a1.matmul(&self.x1).expect("validated shapes")
    }

    /// First key `A2 X2`.
    pub fn k1(&self) -> Matrix {
        self.a2.matmul(&self.x2).expect("validated shapes")
    }

    /// Second key `A3 X3`.
    pub fn k2(&self) -> Matrix {
        self.a3.matmul(&self.x3).expect("validated shapes")
    }

    /// First value `A4 Y1`.
    pub fn v1(&self) -> Matrix {
        self.a4.matmul(&self.y1).expect("validated shapes")
    }

    /// Second value `A5 Y2`.
    pub fn v2(&self) -> Matrix {
        self.a5.matmul(&self.y2).expect("validated shapes")
    }

    /// Entry bound `max(‖A1X1‖∞, ‖A2X2‖∞, ‖A3X3‖∞, ‖A4Y1‖∞, ‖A5Y2‖∞)`.
    pub fn b_eff(&self) -> f64 {
        [self.q(), self.k1(), self.k2(), self.v1(), self.v2()]
            .iter()
            .map(Matrix::max_abs)
            .fold(0.0, f64::max)
    }

    /// Bound on every softmax argument: `‖A1X1‖∞ · ‖A2X2‖∞ · ‖A3X3‖∞`.
    ///
    /// Each argument is `Σ_a q_a k1_a k2_a / d`, a mean of `d` terms.
    pub fn exp_arg_bound(&self) -> f64 {
        self.q().max_abs() * self.k1().max_abs() * self.k2().max_abs()
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_is_deterministic_and_bounded() {
        let a = AttnInstance::random(5, 3, 0.8, 7).unwrap();
        let b = AttnInstance::random(5, 3, 0.8, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.blocks().iter().all(|m| m.max_abs() <= 0.8));
        let c = AttnInstance::random(5, 3, 0.8, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn weights_do_not_depend_on_n() {
        let small = AttnInstance::random(4, 2, 1.0, 3).unwrap();
        let big = AttnInstance::random(9, 2, 1.0, 3).unwrap();
        assert_eq!(small.x1, big.x1);
        assert_eq!(small.y2, big.y2);
        assert_eq!(small.a3.row(3), big.a3.row(3));
    }

    #[test]
    fn composite_shapes() {
        let inst = AttnInstance::random(3, 2, 1.0, 1).unwrap();
        assert_eq!(inst.x().shape(), (2, 4));
        assert_eq!(inst.y().shape(), (4, 2));
        assert!(inst.b_eff() > 0.0);
    }

    #[test]
    fn rejects_bad_blocks() {
        let inst = AttnInstance::random(3, 2, 1.0, 1).unwrap();
        assert!(inst.with_target(Matrix::zeros(2, 2)).is_err());
        let mut blocks: Vec<Matrix> = inst.blocks().iter().map(|m| (*m).clone()).collect();
        blocks[7] = Matrix::filled(2, 2, f64::NAN);
        assert!(AttnInstance::from_blocks(3, 2, blocks).is_err());
    }
}
