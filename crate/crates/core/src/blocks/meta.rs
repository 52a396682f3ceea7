use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{join, Activation, DenseCache, DenseLayer, Parameterized, Tensor};

/// Two ReLU dense layers: `feature_dim → feature_dim → n_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaBlock {
    pub layer1: DenseLayer,
    pub layer2: DenseLayer,
}

#[derive(Debug, Clone)]
pub struct MetaCache {
    layer1: DenseCache,
    layer2: DenseCache,
}

impl MetaBlock {
    pub fn init<R: Rng + ?Sized>(feature_dim: usize, n_classes: usize, rng: &mut R) -> Self {
        MetaBlock {
            layer1: DenseLayer::init(feature_dim, feature_dim, Activation::Relu, rng),
            layer2: DenseLayer::init(feature_dim, n_classes, Activation::Relu, rng),
        }
    }

    pub fn new(layer1: DenseLayer, layer2: DenseLayer) -> Result<Self> {
        if layer1.in_dim() != layer1.out_dim() || layer2.in_dim() != layer1.out_dim() {
            return Err(Error::shape(
                "MetaBlock",
                "square first layer feeding the second",
                format!(
                    "{}x{} then {}x{}",
                    layer1.out_dim(),
                    layer1.in_dim(),
                    layer2.out_dim(),
                    layer2.in_dim()
                ),
            ));
        }
        Ok(MetaBlock { layer1, layer2 })
    }

    pub fn feature_dim(&self) -> usize {
        self.layer1.in_dim()
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.feature_dim() {
            return Err(Error::shape("meta_block_forward", self.feature_dim(), v.len()));
        }
        let h = self.layer1.forward(v)?;
        self.layer2.forward(&h)
    }

    pub fn forward_cached(&self, v: &[f64]) -> Result<(Vec<f64>, MetaCache)> {
        if v.len() != self.feature_dim() {
            return Err(Error::shape("meta_block_forward", self.feature_dim(), v.len()));
        }
        let (h, layer1) = self.layer1.forward_seq(&Tensor::row_vector(v.to_vec()))?;
        let (out, layer2) = self.layer2.forward_seq(&h)?;
        Ok((out.into_vec(), MetaCache { layer1, layer2 }))
    }

    pub fn backward(&self, cache: &MetaCache, dout: &[f64], grads: &mut MetaBlock) -> Vec<f64> {
        let dh = self
            .layer2
            .backward_seq(&cache.layer2, &Tensor::row_vector(dout.to_vec()), &mut grads.layer2);
        self.layer1
            .backward_seq(&cache.layer1, &dh, &mut grads.layer1)
            .into_vec()
    }
}

impl Parameterized for MetaBlock {
    fn visit_params<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.layer1.visit_params(&join(prefix, "layer1"), f);
        self.layer2.visit_params(&join(prefix, "layer2"), f);
    }

    fn visit_params_mut(&mut self, prefix: &str, f: &mut dyn FnMut(String, &mut Tensor)) {
        self.layer1.visit_params_mut(&join(prefix, "layer1"), f);
        self.layer2.visit_params_mut(&join(prefix, "layer2"), f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init::seeded_rng;

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let block = MetaBlock::init(6, 3, &mut seeded_rng(1));
        assert_eq!(block.forward(&[0.0; 6]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_path_selects_coordinate() {
        let l1 = DenseLayer::new(Tensor::identity(3), vec![0.0; 3], Activation::Relu).unwrap();
        // output 0 reads coordinate 1, output 1 reads coordinate 2
        let w2 = Tensor::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let l2 = DenseLayer::new(w2, vec![0.0; 2], Activation::Relu).unwrap();
        let block = MetaBlock::new(l1, l2).unwrap();
        assert_eq!(block.forward(&[5.0, 2.5, -4.0]).unwrap(), vec![2.5, 0.0]);
    }

    #[test]
    fn matches_hand_matmul() {
        let block = MetaBlock::init(5, 3, &mut seeded_rng(2));
        let v = [0.3, -1.0, 0.8, 0.0, 2.0];
        let relu = |x: f64| x.max(0.0);
        let h: Vec<f64> = (0..5)
            .map(|o| relu((0..5).map(|i| block.layer1.weights.get(o, i) * v[i]).sum::<f64>()))
            .collect();
        let want: Vec<f64> = (0..3)
            .map(|o| relu((0..5).map(|i| block.layer2.weights.get(o, i) * h[i]).sum::<f64>()))
            .collect();
        for (a, b) in block.forward(&v).unwrap().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_dimension() {
        let block = MetaBlock::init(4, 2, &mut seeded_rng(3));
        assert!(block.forward(&[1.0; 5]).is_err());
        let l1 = DenseLayer::init(4, 3, Activation::Relu, &mut seeded_rng(4));
        let l2 = DenseLayer::init(3, 2, Activation::Relu, &mut seeded_rng(4));
        assert!(MetaBlock::new(l1, l2).is_err());
    }
}
