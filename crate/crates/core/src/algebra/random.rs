//! Random operators for tests and experiments.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{CMat, Operator, TracialAlgebra, C64};
use crate::rng::Rng;

fn ginibre(n: usize, rng: &mut Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Complex Gaussian entries with `E|x_ij|² = 1`.
pub fn random_operator(alg: &Arc<TracialAlgebra>, rng: &mut Rng) -> Operator {
    let blocks = alg.blocks().iter().map(|b| ginibre(b.dim, rng)).collect();
    Operator::from_blocks_unchecked(alg, blocks)
}

pub fn random_hermitian(alg: &Arc<TracialAlgebra>, rng: &mut Rng) -> Operator {
    random_operator(alg, rng).hermitian_part()
}

/// `g* g` for a Gaussian `g`.
pub fn random_positive(alg: &Arc<TracialAlgebra>, rng: &mut Rng) -> Operator {
    let g = random_operator(alg, rng);
    (&g.adjoint() * &g).hermitian_part()
}

/// Haar-distributed unitary in each block (QR with phase correction).
pub fn random_unitary(alg: &Arc<TracialAlgebra>, rng: &mut Rng) -> Operator {
    let blocks = alg
        .blocks()
        .iter()
        .map(|b| {
            let qr = ginibre(b.dim, rng).qr();
            let (mut q, r) = qr.unpack();
            for j in 0..b.dim {
                let d = r[(j, j)];
                let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
                q.column_mut(j).scale_mut_c(phase);
            }
            q
        })
        .collect();
    Operator::from_blocks_unchecked(alg, blocks)
}

/// Random projection of rank `min(rank, dim)` in every block.
pub fn random_projection(alg: &Arc<TracialAlgebra>, rank: usize, rng: &mut Rng) -> Operator {
    let u = random_unitary(alg, rng);
    let blocks = u
        .blocks()
        .iter()
        .map(|q| {
            let n = q.nrows();
            let k = rank.min(n);
            let sub = q.columns(0, k).into_owned();
            let p = &sub * sub.adjoint();
            (&p + p.adjoint()) * C64::new(0.5, 0.0)
        })
        .collect();
    Operator::from_blocks_unchecked(alg, blocks)
}

trait ScaleC {
    fn scale_mut_c(&mut self, c: C64);
}

impl<S> ScaleC for nalgebra::Matrix<C64, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C64, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, c: C64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}
