//! Finite-dimensional tracial *-algebras.
//!
//! Every finite-dimensional von Neumann algebra with a faithful tracial state is a
//! direct sum of full matrix blocks `M_{d_1} ⊕ … ⊕ M_{d_r}` with a state of the form
//! `τ(x) = Σ_i w_i · tr(x_i) / d_i`, `w_i > 0`, `Σ w_i = 1`. [`TracialAlgebra`] stores the
//! `(d_i, w_i)` list and [`Operator`] stores one complex matrix per block.

mod json;
mod operator;
pub mod random;
mod spectrum;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use json::{AlgebraJson, OperatorJson};
pub use operator::{hilbert_inner, lp_norm, real_matrix, trace, Operator};
pub use spectrum::{
    apply_function, herm_spectrum, mu, mu_of_atoms, projection_meet, spectral_indicator, BlockSpectrum,
    Endpoint, Interval, Spectrum, WeightedEigenvalue,
};

pub type C64 = nalgebra::Complex<f64>;
pub type CMat = nalgebra::DMatrix<C64>;

/// `‖x − x*‖_∞ ≤ SELF_ADJOINT_TOL · max(1, ‖x‖_∞)` counts as self-adjoint.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;
/// Relative rank cut used for kernels, spans and meets.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues this close to an interval endpoint are snapped to the closed side.
pub const CUT_SNAP: f64 = 1e-12;
/// Imaginary parts of self-adjoint traces below this are dropped.
pub const TRACE_IMAG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dim: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracialAlgebra {
    blocks: Vec<Block>,
}

impl TracialAlgebra {
    pub fn new(blocks: Vec<Block>) -> Result<Arc<Self>> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("no blocks".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(Error::InvalidAlgebra(format!("block {i} has dimension 0")));
            }
            if !(b.weight > 0.0 && b.weight.is_finite()) {
                return Err(Error::InvalidAlgebra(format!(
                    "block {i} has non-positive weight {}",
                    b.weight
                )));
            }
        }
        let total: f64 = blocks.iter().map(|b| b.weight).sum();
        if (total - 1.0).abs() > 1e-12 * blocks.len() as f64 {
            return Err(Error::InvalidAlgebra(format!("weights sum to {total}, not 1")));
        }
        Ok(Arc::new(Self { blocks }))
    }

    /// The full matrix algebra `M_d` with its normalised trace.
    pub fn matrix(dim: usize) -> Arc<Self> {
        assert!(dim > 0, "matrix algebra of dimension 0");
        Arc::new(Self {
            blocks: vec![Block { dim, weight: 1.0 }],
        })
    }

    pub fn scalars() -> Arc<Self> {
        Self::matrix(1)
    }

    /// `ℓ∞(n)` with atom weights `weights`.
    pub fn diagonal(weights: &[f64]) -> Result<Arc<Self>> {
        Self::new(weights.iter().map(|&weight| Block { dim: 1, weight }).collect())
    }

    pub fn uniform_diagonal(n: usize) -> Arc<Self> {
        assert!(n > 0, "diagonal algebra with no atoms");
        let w = 1.0 / n as f64;
        Arc::new(Self {
            blocks: vec![Block { dim: 1, weight: w }; n],
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Size of the block-diagonal matrix realisation.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Dimension as a complex vector space.
    pub fn linear_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|b| b.dim == 1)
    }

    /// Trace weight carried by a single eigenvalue of block `i`.
    pub fn eigen_weight(&self, i: usize) -> f64 {
        self.blocks[i].weight / self.blocks[i].dim as f64
    }

    /// Tensor product with the product trace. Block `(i, j)` sits at index
    /// `i · other.num_blocks() + j` and acts on `H_i ⊗ H_j` in Kronecker order.
    pub fn tensor(&self, other: &Self) -> Arc<Self> {
        let mut blocks = Vec::with_capacity(self.blocks.len() * other.blocks.len());
        for a in &self.blocks {
            for b in &other.blocks {
                blocks.push(Block {
                    dim: a.dim * b.dim,
                    weight: a.weight * b.weight,
                });
            }
        }
        Arc::new(Self { blocks })
    }

    /// `M_m ⊗ A`, realised block-wise as `m × m` arrays of blocks of `A`.
    pub fn amplify(&self, m: usize) -> Arc<Self> {
        assert!(m > 0);
        Arc::new(Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block {
                    dim: b.dim * m,
                    weight: b.weight,
                })
                .collect(),
        })
    }

    /// Same block dimensions, weights equal up to rounding (tensor products built
    /// with a different bracketing differ in the last bits).
    pub fn same(a: &Arc<Self>, b: &Arc<Self>) -> bool {
        Arc::ptr_eq(a, b)
            || (a.blocks.len() == b.blocks.len()
                && a.blocks.iter().zip(&b.blocks).all(|(x, y)| {
                    x.dim == y.dim && (x.weight - y.weight).abs() <= 1e-13 * x.weight.max(y.weight)
                }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights() {
        assert!(TracialAlgebra::diagonal(&[0.5, 0.6]).is_err());
        assert!(TracialAlgebra::diagonal(&[1.0, 0.0]).is_err());
        assert!(TracialAlgebra::new(vec![]).is_err());
        assert!(TracialAlgebra::new(vec![Block { dim: 0, weight: 1.0 }]).is_err());
    }

    #[test]
    fn tensor_blocks_are_products() {
        let a = TracialAlgebra::diagonal(&[0.25, 0.75]).unwrap();
        let b = TracialAlgebra::matrix(3);
        let t = a.tensor(&b);
        assert_eq!(t.num_blocks(), 2);
        assert_eq!(t.blocks()[1], Block { dim: 3, weight: 0.75 });
        assert_eq!(t.total_dim(), 6);
        assert_eq!(t.linear_dim(), 18);
    }
}
