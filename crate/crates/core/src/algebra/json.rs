use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Block, CMat, Operator, TracialAlgebra, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraJson {
    pub blocks: Vec<Block>,
}

/// Each block is a row-major list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub blocks: Vec<Vec<[f64; 2]>>,
}

impl AlgebraJson {
    pub fn from_algebra(alg: &TracialAlgebra) -> Self {
        Self {
            blocks: alg.blocks().to_vec(),
        }
    }

    pub fn to_algebra(&self) -> Result<Arc<TracialAlgebra>> {
        TracialAlgebra::new(self.blocks.clone())
    }
}

impl OperatorJson {
    pub fn from_operator(x: &Operator) -> Self {
        let blocks = x
            .blocks()
            .iter()
            .map(|m| {
                let n = m.nrows();
                let mut v = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let z = m[(i, j)];
                        v.push([z.re, z.im]);
                    }
                }
                v
            })
            .collect();
        Self { blocks }
    }

    pub fn to_operator(&self, alg: &Arc<TracialAlgebra>) -> Result<Operator> {
        if self.blocks.len() != alg.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks in JSON, algebra has {}",
                self.blocks.len(),
                alg.num_blocks()
            )));
        }
        let mut mats = Vec::with_capacity(self.blocks.len());
        for (i, (entries, b)) in self.blocks.iter().zip(alg.blocks()).enumerate() {
            if entries.len() != b.dim * b.dim {
                return Err(Error::ShapeMismatch(format!(
                    "block {i} has {} entries, expected {}",
                    entries.len(),
                    b.dim * b.dim
                )));
            }
            let n = b.dim;
            mats.push(CMat::from_fn(n, n, |r, c| {
                let [re, im] = entries[r * n + c];
                C64::new(re, im)
            }));
        }
        Operator::from_blocks(alg, mats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random::random_operator;
    use crate::rng;

    #[test]
    fn round_trip() {
        let alg = TracialAlgebra::new(vec![Block { dim: 2, weight: 0.25 }, Block { dim: 1, weight: 0.75 }])
            .unwrap();
        let x = random_operator(&alg, &mut rng::stream(5, 0));
        let aj = serde_json::to_string(&AlgebraJson::from_algebra(&alg)).unwrap();
        let oj = serde_json::to_string(&OperatorJson::from_operator(&x)).unwrap();
        let alg2 = serde_json::from_str::<AlgebraJson>(&aj).unwrap().to_algebra().unwrap();
        let y = serde_json::from_str::<OperatorJson>(&oj)
            .unwrap()
            .to_operator(&alg2)
            .unwrap();
        assert_eq!(y.dist(&x.rehome(&alg2).unwrap()), 0.0);
    }

    #[test]
    fn schema_shape() {
        let v: AlgebraJson = serde_json::from_str(r#"{"blocks":[{"dim":2,"weight":1.0}]}"#).unwrap();
        let alg = v.to_algebra().unwrap();
        let op: OperatorJson =
            serde_json::from_str(r#"{"blocks":[[[1,0],[0,0],[0,0],[3,0]]]}"#).unwrap();
        let x = op.to_operator(&alg).unwrap();
        assert_eq!(x.trace_re().unwrap(), 2.0);
        let bad: OperatorJson = serde_json::from_str(r#"{"blocks":[[[1,0]]]}"#).unwrap();
        assert!(bad.to_operator(&alg).is_err());
    }
}
