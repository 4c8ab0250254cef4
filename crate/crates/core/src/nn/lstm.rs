//! LSTM layer without peepholes, batched over windows, with hand-derived BPTT.
//!
//! Gate blocks are laid out along the columns of every weight matrix in the
//! order `i, f, g, o`:
//!
//! ```text
//! pre = x W + h_prev U + b          (B x 4H)
//! i, f, o = sigmoid(pre_i), sigmoid(pre_f), sigmoid(pre_o)
//! g = tanh(pre_g)
//! c = f * c_prev + i * g
//! h = o * tanh(c)
//! ```
//!
//! Sequences are stored time-major: row `t * B + b` holds timestep `t` of
//! batch element `b`.

use super::tensor::{gemm, Tensor2};
use crate::error::{Error, Result};
use crate::prng::Rng;

/// Forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    /// Input-to-hidden weights, `input_dim x 4H`.
    pub w: Tensor2,
    /// Hidden-to-hidden weights, `H x 4H`.
    pub u: Tensor2,
    /// Biases, `1 x 4H`.
    pub b: Tensor2,
}

impl LstmLayerParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w: Tensor2::zeros(input_dim, 4 * hidden_dim),
            u: Tensor2::zeros(hidden_dim, 4 * hidden_dim),
            b: Tensor2::zeros(1, 4 * hidden_dim),
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget bias 1, other biases 0.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        fill_uniform(&mut p.w, 1.0 / (input_dim as f64).sqrt(), rng);
        fill_uniform(&mut p.u, 1.0 / (hidden_dim as f64).sqrt(), rng);
        for j in hidden_dim..2 * hidden_dim {
            p.b.set(0, j, FORGET_BIAS_INIT);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.u.rows()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.u.cols() != 4 * h || self.w.cols() != 4 * h || self.b.shape() != (1, 4 * h) {
            return Err(Error::Shape(format!(
                "inconsistent LSTM layer: w {:?}, u {:?}, b {:?}",
                self.w.shape(),
                self.u.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

pub(crate) fn fill_uniform(t: &mut Tensor2, bound: f64, rng: &mut Rng) {
    for v in t.data_mut() {
        *v = rng.uniform_range(-bound, bound);
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Applies the gate nonlinearities in place on `gates` (B x 4H) and writes
/// the new cell state, `tanh(c)` and hidden state.
fn activate(
    gates: &mut [f64],
    c_prev: Option<&[f64]>,
    c: &mut [f64],
    tanh_c: &mut [f64],
    h: &mut [f64],
    hidden: usize,
) {
    let batch = c.len() / hidden;
    for b in 0..batch {
        let g = &mut gates[b * 4 * hidden..(b + 1) * 4 * hidden];
        for j in 0..hidden {
            let i_t = sigmoid(g[j]);
            let f_t = sigmoid(g[hidden + j]);
            let g_t = g[2 * hidden + j].tanh();
            let o_t = sigmoid(g[3 * hidden + j]);
            g[j] = i_t;
            g[hidden + j] = f_t;
            g[2 * hidden + j] = g_t;
            g[3 * hidden + j] = o_t;
            let k = b * hidden + j;
            let cp = c_prev.map_or(0.0, |cp| cp[k]);
            c[k] = f_t * cp + i_t * g_t;
            tanh_c[k] = c[k].tanh();
            h[k] = o_t * tanh_c[k];
        }
    }
}

/// Values retained by a single cell step.
#[derive(Debug, Clone)]
pub struct CellCache {
    /// Post-activation gates `i, f, g, o`, B x 4H.
    pub gates: Tensor2,
    pub c_prev: Tensor2,
    pub tanh_c: Tensor2,
}

/// One LSTM step over a batch: `x` is B x input_dim, states are B x H.
pub fn lstm_cell_forward(
    x: &Tensor2,
    h_prev: &Tensor2,
    c_prev: &Tensor2,
    params: &LstmLayerParams,
) -> Result<(Tensor2, Tensor2, CellCache)> {
    params.check()?;
    let hd = params.hidden_dim();
    let batch = x.rows();
    if x.cols() != params.input_dim()
        || h_prev.shape() != (batch, hd)
        || c_prev.shape() != (batch, hd)
    {
        return Err(Error::Shape(format!(
            "cell inputs x {:?}, h {:?}, c {:?} for layer {}->{}",
            x.shape(),
            h_prev.shape(),
            c_prev.shape(),
            params.input_dim(),
            hd
        )));
    }
    let mut gates = Tensor2::from_fn(batch, 4 * hd, |_, j| params.b.get(0, j));
    gemm(
        batch,
        x.cols(),
        4 * hd,
        x.data(),
        false,
        params.w.data(),
        false,
        gates.data_mut(),
        1.0,
    );
    gemm(
        batch,
        hd,
        4 * hd,
        h_prev.data(),
        false,
        params.u.data(),
        false,
        gates.data_mut(),
        1.0,
    );
    let mut c = Tensor2::zeros(batch, hd);
    let mut tanh_c = Tensor2::zeros(batch, hd);
    let mut h = Tensor2::zeros(batch, hd);
    activate(
        gates.data_mut(),
        Some(c_prev.data()),
        c.data_mut(),
        tanh_c.data_mut(),
        h.data_mut(),
        hd,
    );
    h.ensure_finite("lstm h")?;
    c.ensure_finite("lstm c")?;
    let cache = CellCache {
        gates,
        c_prev: c_prev.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Input fed to a layer.
#[derive(Debug, Clone, Copy)]
pub enum LayerInput<'a> {
    /// Time-major `(T*B) x input_dim` sequence.
    Sequence(&'a Tensor2),
    /// One `B x input_dim` vector presented at every timestep.
    Repeated(&'a Tensor2),
}

impl LayerInput<'_> {
    fn cols(&self) -> usize {
        match self {
            LayerInput::Sequence(t) | LayerInput::Repeated(t) => t.cols(),
        }
    }
}

/// Forward activations of a whole layer, kept for BPTT.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub steps: usize,
    pub batch: usize,
    /// `(T*B) x 4H` post-activation gates.
    pub gates: Tensor2,
    /// `(T*B) x H` cell states.
    pub c: Tensor2,
    pub tanh_c: Tensor2,
    /// `(T*B) x H` hidden states, the layer output.
    pub h: Tensor2,
}

impl LayerCache {
    /// Hidden state at timestep `t`, B x H.
    pub fn hidden_at(&self, t: usize) -> Tensor2 {
        let hd = self.h.cols();
        Tensor2::from_vec(
            self.batch,
            hd,
            self.h.rows_slice(t * self.batch, self.batch).to_vec(),
        )
        .expect("slice shape")
    }
}

/// Unrolled forward pass from zero initial states.
pub fn lstm_layer_forward(
    input: LayerInput<'_>,
    steps: usize,
    batch: usize,
    params: &LstmLayerParams,
) -> Result<LayerCache> {
    params.check()?;
    if steps == 0 || batch == 0 {
        return Err(Error::Shape("LSTM layer needs T >= 1 and B >= 1".into()));
    }
    let hd = params.hidden_dim();
    let g4 = 4 * hd;
    if input.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "layer expects input dim {}, got {}",
            params.input_dim(),
            input.cols()
        )));
    }
    let n = steps * batch;
    let mut gates = Tensor2::zeros(n, g4);
    match input {
        LayerInput::Sequence(x) => {
            if x.rows() != n {
                return Err(Error::Shape(format!(
                    "sequence has {} rows, expected {n}",
                    x.rows()
                )));
            }
            gemm(
                n,
                x.cols(),
                g4,
                x.data(),
                false,
                params.w.data(),
                false,
                gates.data_mut(),
                0.0,
            );
            add_bias(gates.data_mut(), params.b.data());
        }
        LayerInput::Repeated(z) => {
            if z.rows() != batch {
                return Err(Error::Shape(format!(
                    "repeated input has {} rows, expected {batch}",
                    z.rows()
                )));
            }
            let mut proj = vec![0.0; batch * g4];
            gemm(
                batch,
                z.cols(),
                g4,
                z.data(),
                false,
                params.w.data(),
                false,
                &mut proj,
                0.0,
            );
            add_bias(&mut proj, params.b.data());
            for t in 0..steps {
                gates
                    .rows_slice_mut(t * batch, batch)
                    .copy_from_slice(&proj);
            }
        }
    }
    let mut c = Tensor2::zeros(n, hd);
    let mut tanh_c = Tensor2::zeros(n, hd);
    let mut h = Tensor2::zeros(n, hd);
    for t in 0..steps {
        let (h_done, h_rest) = h.data_mut().split_at_mut(t * batch * hd);
        let g_t = gates.rows_slice_mut(t * batch, batch);
        if t > 0 {
            let h_prev = &h_done[(t - 1) * batch * hd..];
            gemm(
                batch,
                hd,
                g4,
                h_prev,
                false,
                params.u.data(),
                false,
                g_t,
                1.0,
            );
        }
        let (c_done, c_rest) = c.data_mut().split_at_mut(t * batch * hd);
        let c_prev = (t > 0).then(|| &c_done[(t - 1) * batch * hd..]);
        activate(
            g_t,
            c_prev,
            &mut c_rest[..batch * hd],
            tanh_c.rows_slice_mut(t * batch, batch),
            &mut h_rest[..batch * hd],
            hd,
        );
    }
    h.ensure_finite("lstm layer h")?;
    Ok(LayerCache {
        steps,
        batch,
        gates,
        c,
        tanh_c,
        h,
    })
}

fn add_bias(rows: &mut [f64], bias: &[f64]) {
    for row in rows.chunks_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// BPTT through one layer.
///
/// `dh_out` is the `(T*B) x H` gradient of the loss with respect to every
/// hidden output. Returns parameter gradients (same shapes as the params)
/// and the gradient with respect to the layer input (`(T*B) x in` for a
/// sequence, `B x in` for a repeated input).
pub fn lstm_layer_backward(
    input: LayerInput<'_>,
    cache: &LayerCache,
    params: &LstmLayerParams,
    dh_out: &Tensor2,
) -> Result<(LstmLayerParams, Tensor2)> {
    let hd = params.hidden_dim();
    let g4 = 4 * hd;
    let (steps, batch) = (cache.steps, cache.batch);
    let n = steps * batch;
    if dh_out.shape() != (n, hd) || cache.h.shape() != (n, hd) {
        return Err(Error::Shape(format!(
            "backward: dh {:?}, cache {:?}, expected ({n}, {hd})",
            dh_out.shape(),
            cache.h.shape()
        )));
    }
    let mut dpre = Tensor2::zeros(n, g4);
    let mut dh_next = vec![0.0; batch * hd];
    let mut dc_next = vec![0.0; batch * hd];
    for t in (0..steps).rev() {
        let base = t * batch;
        let gates = cache.gates.rows_slice(base, batch);
        let tanh_c = cache.tanh_c.rows_slice(base, batch);
        let c_prev = (t > 0).then(|| cache.c.rows_slice(base - batch, batch));
        let dh_t = dh_out.rows_slice(base, batch);
        let dp = dpre.rows_slice_mut(base, batch);
        for b in 0..batch {
            let g = &gates[b * g4..(b + 1) * g4];
            let d = &mut dp[b * g4..(b + 1) * g4];
            for j in 0..hd {
                let k = b * hd + j;
                let (i_t, f_t, g_t, o_t) = (g[j], g[hd + j], g[2 * hd + j], g[3 * hd + j]);
                let dh = dh_t[k] + dh_next[k];
                let tc = tanh_c[k];
                let dc = dc_next[k] + dh * o_t * (1.0 - tc * tc);
                let cp = c_prev.map_or(0.0, |c| c[k]);
                d[j] = dc * g_t * i_t * (1.0 - i_t);
                d[hd + j] = dc * cp * f_t * (1.0 - f_t);
                d[2 * hd + j] = dc * i_t * (1.0 - g_t * g_t);
                d[3 * hd + j] = dh * tc * o_t * (1.0 - o_t);
                dc_next[k] = dc * f_t;
            }
        }
        if t > 0 {
            // dh_prev = dpre_t U^T
            gemm(
                batch,
                g4,
                hd,
                dp,
                false,
                params.u.data(),
                true,
                &mut dh_next,
                0.0,
            );
        }
    }

    let mut grads = LstmLayerParams::zeros(params.input_dim(), hd);
    if steps > 1 {
        // dU = sum_t h_{t-1}^T dpre_t
        gemm(
            hd,
            (steps - 1) * batch,
            g4,
            cache.h.rows_slice(0, (steps - 1) * batch),
            true,
            dpre.rows_slice(batch, (steps - 1) * batch),
            false,
            grads.u.data_mut(),
            0.0,
        );
    }
    let db = grads.b.data_mut();
    for row in dpre.data().chunks(g4) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let in_dim = params.input_dim();
    let dinput = match input {
        LayerInput::Sequence(x) => {
            gemm(
                in_dim,
                n,
                g4,
                x.data(),
                true,
                dpre.data(),
                false,
                grads.w.data_mut(),
                0.0,
            );
            let mut dx = Tensor2::zeros(n, in_dim);
            gemm(
                n,
                g4,
                in_dim,
                dpre.data(),
                false,
                params.w.data(),
                true,
                dx.data_mut(),
                0.0,
            );
            dx
        }
        LayerInput::Repeated(z) => {
            let mut dsum = vec![0.0; batch * g4];
            for t in 0..steps {
                for (acc, v) in dsum.iter_mut().zip(dpre.rows_slice(t * batch, batch)) {
                    *acc += v;
                }
            }
            gemm(
                in_dim,
                batch,
                g4,
                z.data(),
                true,
                &dsum,
                false,
                grads.w.data_mut(),
                0.0,
            );
            let mut dz = Tensor2::zeros(batch, in_dim);
            gemm(
                batch,
                g4,
                in_dim,
                &dsum,
                false,
                params.w.data(),
                true,
                dz.data_mut(),
                0.0,
            );
            dz
        }
    };
    Ok((grads, dinput))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_t(v: &[f64]) -> Tensor2 {
        Tensor2::from_vec(1, v.len(), v.to_vec()).unwrap()
    }

    #[test]
    fn zero_params_give_zero_hidden() {
        let p = LstmLayerParams::zeros(3, 4);
        let (h, c, _) = lstm_cell_forward(
            &vec_t(&[0.0; 3]),
            &Tensor2::zeros(1, 4),
            &Tensor2::zeros(1, 4),
            &p,
        )
        .unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut rng = Rng::new(3);
        let mut p = LstmLayerParams::init(2, 3, &mut rng);
        for j in 3..6 {
            p.b.set(0, j, 30.0);
        }
        let x = vec_t(&[0.3, -0.7]);
        let h_prev = vec_t(&[0.1, -0.2, 0.05]);
        let c_prev = vec_t(&[0.5, -1.5, 2.0]);
        let (_, c, cache) = lstm_cell_forward(&x, &h_prev, &c_prev, &p).unwrap();
        for j in 0..3 {
            let i = cache.gates.get(0, j);
            let g = cache.gates.get(0, 6 + j);
            let limit = c_prev.get(0, j) + i * g;
            assert!((c.get(0, j) - limit).abs() < 1e-9);
        }
    }

    #[test]
    fn scalar_hand_evaluation() {
        // b_i = b_o = 40 saturate the input and output gates; b_g = 1 gives g = tanh(1).
        let mut p = LstmLayerParams::zeros(1, 1);
        p.b.set(0, 0, 40.0);
        p.b.set(0, 2, 1.0);
        p.b.set(0, 3, 40.0);
        let (h, c, _) = lstm_cell_forward(
            &vec_t(&[0.0]),
            &Tensor2::zeros(1, 1),
            &Tensor2::zeros(1, 1),
            &p,
        )
        .unwrap();
        let expected = 1.0f64.tanh().tanh();
        assert!((c.get(0, 0) - 1.0f64.tanh()).abs() < 1e-12);
        assert!((h.get(0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_step_layer_equals_cell() {
        let mut rng = Rng::new(11);
        let p = LstmLayerParams::init(2, 5, &mut rng);
        let x = Tensor2::from_fn(3, 2, |i, j| (i as f64 - j as f64) * 0.4);
        let cache = lstm_layer_forward(LayerInput::Sequence(&x), 1, 3, &p).unwrap();
        let (h, _, _) =
            lstm_cell_forward(&x, &Tensor2::zeros(3, 5), &Tensor2::zeros(3, 5), &p).unwrap();
        for (a, b) in cache.h.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn layer_is_order_sensitive() {
        let mut rng = Rng::new(12);
        let p = LstmLayerParams::init(1, 4, &mut rng);
        let seq = [0.5, -1.0, 2.0, 0.1];
        let rev: Vec<f64> = seq.iter().rev().copied().collect();
        let a = Tensor2::from_vec(4, 1, seq.to_vec()).unwrap();
        let b = Tensor2::from_vec(4, 1, rev).unwrap();
        let ha = lstm_layer_forward(LayerInput::Sequence(&a), 4, 1, &p).unwrap();
        let hb = lstm_layer_forward(LayerInput::Sequence(&b), 4, 1, &p).unwrap();
        assert_ne!(ha.hidden_at(3), hb.hidden_at(3));
    }

    #[test]
    fn zero_input_zero_params_zero_states() {
        let p = LstmLayerParams::zeros(1, 3);
        let x = Tensor2::zeros(5, 1);
        let cache = lstm_layer_forward(LayerInput::Sequence(&x), 5, 1, &p).unwrap();
        assert!(cache.h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repeated_input_matches_explicit_sequence() {
        let mut rng = Rng::new(13);
        let p = LstmLayerParams::init(3, 4, &mut rng);
        let z = Tensor2::from_fn(2, 3, |i, j| 0.3 * i as f64 - 0.2 * j as f64 + 0.1);
        let steps = 4;
        let seq = Tensor2::from_fn(steps * 2, 3, |r, j| z.get(r % 2, j));
        let a = lstm_layer_forward(LayerInput::Repeated(&z), steps, 2, &p).unwrap();
        let b = lstm_layer_forward(LayerInput::Sequence(&seq), steps, 2, &p).unwrap();
        for (x, y) in a.h.data().iter().zip(b.h.data()) {
            assert!((x - y).abs() < 1e-13);
        }
        let dh = Tensor2::from_fn(steps * 2, 4, |r, j| ((r * 4 + j) as f64 * 0.37).sin());
        let (ga, dza) = lstm_layer_backward(LayerInput::Repeated(&z), &a, &p, &dh).unwrap();
        let (gb, dxb) = lstm_layer_backward(LayerInput::Sequence(&seq), &b, &p, &dh).unwrap();
        for (x, y) in ga.w.data().iter().zip(gb.w.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        for b in 0..2 {
            for j in 0..3 {
                let summed: f64 = (0..steps).map(|t| dxb.get(t * 2 + b, j)).sum();
                assert!((dza.get(b, j) - summed).abs() < 1e-12);
            }
        }
    }

    /// Finite-difference check of a scalar loss `sum(h * r)` for a fixed
    /// random projection `r`.
    #[test]
    fn layer_backward_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let (steps, batch, ind, hd) = (5, 2, 3, 4);
        let p = LstmLayerParams::init(ind, hd, &mut rng);
        let x = Tensor2::from_fn(steps * batch, ind, |_, _| rng.next_gaussian());
        let r = Tensor2::from_fn(steps * batch, hd, |_, _| rng.next_gaussian());
        let loss = |p: &LstmLayerParams, x: &Tensor2| -> f64 {
            let c = lstm_layer_forward(LayerInput::Sequence(x), steps, batch, p).unwrap();
            c.h.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
        };
        let cache = lstm_layer_forward(LayerInput::Sequence(&x), steps, batch, &p).unwrap();
        let (g, dx) = lstm_layer_backward(LayerInput::Sequence(&x), &cache, &p, &r).unwrap();
        let h = 1e-5;
        let check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-6, "analytic {analytic} numeric {numeric}");
        };
        for which in 0..3 {
            let n = [&p.w, &p.u, &p.b][which].data().len();
            for k in 0..n {
                let mut pp = p.clone();
                let mut pm = p.clone();
                [&mut pp.w, &mut pp.u, &mut pp.b][which].data_mut()[k] += h;
                [&mut pm.w, &mut pm.u, &mut pm.b][which].data_mut()[k] -= h;
                let analytic = [&g.w, &g.u, &g.b][which].data()[k];
                check(analytic, loss(&pp, &x), loss(&pm, &x));
            }
        }
        for k in 0..x.data().len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[k] += h;
            xm.data_mut()[k] -= h;
            check(dx.data()[k], loss(&p, &xp), loss(&p, &xm));
        }
    }
}
