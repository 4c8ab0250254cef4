//! Neural network building blocks implemented from scratch: tensors, LSTM
//! layers with analytic BPTT gradients, dense heads and Adam.

mod adam;
mod lstm;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use lstm::{
    lstm_cell_forward, lstm_layer_backward, lstm_layer_forward, CellCache, LayerCache, LayerInput,
    LstmLayerParams, FORGET_BIAS_INIT,
};
pub use tensor::{gemm, Tensor2};

use crate::prng::Rng;

/// Affine map `y = x W + b` applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `in x out`
    pub w: Tensor2,
    /// `1 x out`
    pub b: Tensor2,
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            w: Tensor2::zeros(input_dim, output_dim),
            b: Tensor2::zeros(1, output_dim),
        }
    }

    pub fn init(input_dim: usize, output_dim: usize, rng: &mut Rng) -> Self {
        let mut d = Self::zeros(input_dim, output_dim);
        lstm::fill_uniform(&mut d.w, 1.0 / (input_dim as f64).sqrt(), rng);
        d
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    /// `x` is `n x in`, result `n x out`.
    pub fn forward(&self, x: &[f64], n: usize) -> Tensor2 {
        let out = self.output_dim();
        let mut y = Tensor2::from_fn(n, out, |_, j| self.b.get(0, j));
        gemm(
            n,
            self.input_dim(),
            out,
            x,
            false,
            self.w.data(),
            false,
            y.data_mut(),
            1.0,
        );
        y
    }

    /// Returns parameter gradients and `dx` (`n x in`).
    pub fn backward(&self, x: &[f64], dy: &Tensor2) -> (Dense, Tensor2) {
        let (n, out) = dy.shape();
        let ind = self.input_dim();
        let mut g = Dense::zeros(ind, out);
        gemm(ind, n, out, x, true, dy.data(), false, g.w.data_mut(), 0.0);
        for row in dy.data().chunks(out) {
            for (acc, v) in g.b.data_mut().iter_mut().zip(row) {
                *acc += v;
            }
        }
        let mut dx = Tensor2::zeros(n, ind);
        gemm(
            n,
            out,
            ind,
            dy.data(),
            false,
            self.w.data(),
            true,
            dx.data_mut(),
            0.0,
        );
        (g, dx)
    }
}
