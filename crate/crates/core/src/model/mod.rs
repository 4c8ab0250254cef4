//! LSTM (V)AE: a stacked LSTM encoder whose final hidden state feeds the
//! latent heads, and a stacked LSTM decoder that receives the latent vector
//! at every one of the W timesteps, followed by a per-timestep linear output.

mod deploy;
mod train;

pub use deploy::{
    aggregate_window_errors, reconstruct_record, reconstruct_record_with, reconstruct_windows,
    LatentMode,
};
pub use train::{train, EpochLoss, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::nn::{
    lstm_layer_backward, lstm_layer_forward, Dense, LayerCache, LayerInput, LstmLayerParams,
    Tensor2,
};
use crate::prng::Rng;

pub const DEFAULT_HIDDEN_DIM: usize = 64;
pub const DEFAULT_LATENT_DIM: usize = 12;
pub const DEFAULT_NUM_LAYERS: usize = 2;

/// PRNG substream ids derived from the run seed.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SHUFFLE: u64 = 2;
pub(crate) const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Ae,
    Vae,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Ae => "AE",
            Mode::Vae => "VAE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AE" => Some(Mode::Ae),
            "VAE" => Some(Mode::Vae),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub window_len: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub num_layers: usize,
    pub mode: Mode,
    /// KL weight; ignored in AE mode.
    pub beta: f64,
}

impl Architecture {
    pub fn new(window_len: usize, mode: Mode, beta: f64) -> Self {
        Self {
            window_len,
            input_dim: 1,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            latent_dim: DEFAULT_LATENT_DIM,
            num_layers: DEFAULT_NUM_LAYERS,
            mode,
            beta: if mode == Mode::Ae { 0.0 } else { beta },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0
            || self.hidden_dim == 0
            || self.latent_dim == 0
            || self.num_layers == 0
        {
            return Err(Error::Config(format!("degenerate architecture {self:?}")));
        }
        if self.input_dim != 1 {
            return Err(Error::Config("only univariate input is supported".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Every weight of the encoder (phi) and decoder (theta).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub seed: u64,
    pub encoder: Vec<LstmLayerParams>,
    pub enc_mu: Dense,
    /// Present in VAE mode only.
    pub enc_logvar: Option<Dense>,
    pub decoder: Vec<LstmLayerParams>,
    pub out: Dense,
}

impl ModelParams {
    pub fn zeros(arch: Architecture) -> Self {
        let h = arch.hidden_dim;
        let layers = |first_in: usize| {
            (0..arch.num_layers)
                .map(|l| LstmLayerParams::zeros(if l == 0 { first_in } else { h }, h))
                .collect()
        };
        Self {
            arch,
            seed: 0,
            encoder: layers(arch.input_dim),
            enc_mu: Dense::zeros(h, arch.latent_dim),
            enc_logvar: (arch.mode == Mode::Vae).then(|| Dense::zeros(h, arch.latent_dim)),
            decoder: layers(arch.latent_dim),
            out: Dense::zeros(h, arch.input_dim),
        }
    }

    /// Seeded initialization; draws are taken in the order encoder layers,
    /// latent heads, decoder layers, output head.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = Rng::new(seed).derive(STREAM_INIT);
        let h = arch.hidden_dim;
        let encoder = (0..arch.num_layers)
            .map(|l| LstmLayerParams::init(if l == 0 { arch.input_dim } else { h }, h, &mut rng))
            .collect();
        let enc_mu = Dense::init(h, arch.latent_dim, &mut rng);
        let enc_logvar =
            (arch.mode == Mode::Vae).then(|| Dense::init(h, arch.latent_dim, &mut rng));
        let decoder = (0..arch.num_layers)
            .map(|l| LstmLayerParams::init(if l == 0 { arch.latent_dim } else { h }, h, &mut rng))
            .collect();
        let out = Dense::init(h, arch.input_dim, &mut rng);
        Ok(Self {
            arch,
            seed,
            encoder,
            enc_mu,
            enc_logvar,
            decoder,
            out,
        })
    }

    /// All tensors with their stable names, sorted lexicographically by name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v: Vec<(String, &Tensor2)> = Vec::new();
        for (prefix, layers) in [("enc", &self.encoder), ("dec", &self.decoder)] {
            for (l, p) in layers.iter().enumerate() {
                v.push((format!("{prefix}.l{l}.w"), &p.w));
                v.push((format!("{prefix}.l{l}.u"), &p.u));
                v.push((format!("{prefix}.l{l}.b"), &p.b));
            }
        }
        v.push(("enc.mu.w".into(), &self.enc_mu.w));
        v.push(("enc.mu.b".into(), &self.enc_mu.b));
        if let Some(lv) = &self.enc_logvar {
            v.push(("enc.logvar.w".into(), &lv.w));
            v.push(("enc.logvar.b".into(), &lv.b));
        }
        v.push(("dec.out.w".into(), &self.out.w));
        v.push(("dec.out.b".into(), &self.out.b));
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Mutable counterpart of [`named_tensors`](Self::named_tensors), same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut v: Vec<(String, &mut Tensor2)> = Vec::new();
        for (prefix, layers) in [("enc", &mut self.encoder), ("dec", &mut self.decoder)] {
            for (l, p) in layers.iter_mut().enumerate() {
                v.push((format!("{prefix}.l{l}.w"), &mut p.w));
                v.push((format!("{prefix}.l{l}.u"), &mut p.u));
                v.push((format!("{prefix}.l{l}.b"), &mut p.b));
            }
        }
        v.push(("enc.mu.w".into(), &mut self.enc_mu.w));
        v.push(("enc.mu.b".into(), &mut self.enc_mu.b));
        if let Some(lv) = &mut self.enc_logvar {
            v.push(("enc.logvar.w".into(), &mut lv.w));
            v.push(("enc.logvar.b".into(), &mut lv.b));
        }
        v.push(("dec.out.w".into(), &mut self.out.w));
        v.push(("dec.out.b".into(), &mut self.out.b));
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.data().len())
            .sum()
    }
}

/// Encoder output for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: Vec<f64>,
    /// Zeros in AE mode.
    pub logvar: Vec<f64>,
    pub z: Vec<f64>,
    /// The standard-normal draw used for `z`, if any.
    pub eps: Option<Vec<f64>>,
}

/// `z = mu + exp(logvar / 2) * eps`.
pub fn reparameterize(latent: &LatentSample, eps: &[f64]) -> Result<Vec<f64>> {
    if eps.len() != latent.mu.len() || latent.logvar.len() != latent.mu.len() {
        return Err(Error::Shape(format!(
            "latent dim {} vs noise {}",
            latent.mu.len(),
            eps.len()
        )));
    }
    Ok(latent
        .mu
        .iter()
        .zip(&latent.logvar)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// Closed-form `KL(N(mu, exp(logvar)) || N(0, I))`.
pub fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Negative single-sample ELBO for one window: `mean_t (x - x')^2 + beta * KL`.
/// In AE mode the KL term is reported as 0.
pub fn elbo_loss(
    x: &[f64],
    recon: &[f64],
    latent: &LatentSample,
    beta: f64,
    mode: Mode,
) -> Result<LossParts> {
    if x.len() != recon.len() || x.is_empty() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            actual: recon.len(),
        });
    }
    let r = x
        .iter()
        .zip(recon)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    let kl = match mode {
        Mode::Ae => 0.0,
        Mode::Vae => kl_divergence(&latent.mu, &latent.logvar),
    };
    Ok(LossParts {
        recon: r,
        kl,
        total: r + beta * kl,
    })
}

/// Everything a batched forward pass keeps for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub batch: usize,
    /// Time-major `(W*B) x 1` inputs.
    pub x: Tensor2,
    pub enc: Vec<LayerCache>,
    pub h_last: Tensor2,
    pub mu: Tensor2,
    pub logvar: Option<Tensor2>,
    pub eps: Option<Tensor2>,
    pub z: Tensor2,
    pub dec: Vec<LayerCache>,
    /// Time-major `(W*B) x 1` reconstruction.
    pub recon: Tensor2,
}

impl ForwardPass {
    /// Reconstruction of window `b`.
    pub fn recon_window(&self, b: usize) -> Vec<f64> {
        let w = self.x.rows() / self.batch;
        (0..w)
            .map(|t| self.recon.get(t * self.batch + b, 0))
            .collect()
    }

    pub fn latent(&self, b: usize) -> LatentSample {
        let mu = self.mu.row(b).to_vec();
        let logvar = self
            .logvar
            .as_ref()
            .map_or_else(|| vec![0.0; mu.len()], |lv| lv.row(b).to_vec());
        LatentSample {
            z: self.z.row(b).to_vec(),
            eps: self.eps.as_ref().map(|e| e.row(b).to_vec()),
            mu,
            logvar,
        }
    }
}

fn time_major(windows: &[&[f64]], w: usize) -> Result<Tensor2> {
    let b = windows.len();
    if let Some(bad) = windows.iter().find(|x| x.len() != w) {
        return Err(Error::Shape(format!(
            "window of length {} for W = {w}",
            bad.len()
        )));
    }
    Ok(Tensor2::from_fn(w * b, 1, |r, _| windows[r % b][r / b]))
}

fn stack_forward(
    layers: &[LstmLayerParams],
    first: LayerInput<'_>,
    steps: usize,
    batch: usize,
) -> Result<Vec<LayerCache>> {
    let mut caches: Vec<LayerCache> = Vec::with_capacity(layers.len());
    for (l, p) in layers.iter().enumerate() {
        let cache = match caches.last() {
            None => lstm_layer_forward(first, steps, batch, p)?,
            Some(prev) => lstm_layer_forward(LayerInput::Sequence(&prev.h), steps, batch, p)?,
        };
        debug_assert_eq!(l, caches.len());
        caches.push(cache);
    }
    Ok(caches)
}

/// Batched forward pass. With `eps = Some(noise)` (VAE only) the latent is
/// sampled by reparameterization; otherwise `z = mu`.
pub fn forward(
    params: &ModelParams,
    windows: &[&[f64]],
    eps: Option<&Tensor2>,
) -> Result<ForwardPass> {
    let arch = &params.arch;
    let w = arch.window_len;
    let batch = windows.len();
    if batch == 0 {
        return Err(Error::Empty("forward pass on zero windows".into()));
    }
    let x = time_major(windows, w)?;
    let enc = stack_forward(&params.encoder, LayerInput::Sequence(&x), w, batch)?;
    let top = enc.last().expect("num_layers >= 1");
    let h_last = top.hidden_at(w - 1);
    let mu = params.enc_mu.forward(h_last.data(), batch);
    let logvar = params
        .enc_logvar
        .as_ref()
        .map(|d| d.forward(h_last.data(), batch));
    let (z, eps) = match (eps, &logvar) {
        (Some(e), Some(lv)) => {
            if e.shape() != mu.shape() {
                return Err(Error::Shape(format!(
                    "noise {:?} vs latent {:?}",
                    e.shape(),
                    mu.shape()
                )));
            }
            let mut z = mu.clone();
            for ((zi, lvi), ei) in z.data_mut().iter_mut().zip(lv.data()).zip(e.data()) {
                *zi += (0.5 * lvi).exp() * ei;
            }
            (z, Some(e.clone()))
        }
        (Some(_), None) => return Err(Error::Protocol("latent noise supplied to an AE".into())),
        (None, _) => (mu.clone(), None),
    };
    z.ensure_finite("latent z")?;
    let dec = stack_forward(&params.decoder, LayerInput::Repeated(&z), w, batch)?;
    let top = dec.last().expect("num_layers >= 1");
    let recon = params.out.forward(top.h.data(), w * batch);
    recon.ensure_finite("reconstruction")?;
    Ok(ForwardPass {
        batch,
        x,
        enc,
        h_last,
        mu,
        logvar,
        eps,
        z,
        dec,
        recon,
    })
}

/// Batch loss: mean over windows of the per-window [`elbo_loss`].
pub fn batch_loss(params: &ModelParams, pass: &ForwardPass) -> LossParts {
    let n = pass.x.rows() as f64;
    let b = pass.batch as f64;
    let recon = pass
        .x
        .data()
        .iter()
        .zip(pass.recon.data())
        .map(|(a, r)| (a - r) * (a - r))
        .sum::<f64>()
        / n;
    let kl = match &pass.logvar {
        Some(lv) if params.arch.mode == Mode::Vae => kl_divergence(pass.mu.data(), lv.data()) / b,
        _ => 0.0,
    };
    LossParts {
        recon,
        kl,
        total: recon + params.arch.beta * kl,
    }
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter, by
/// backpropagation through the output head, the decoder stack, the
/// reparameterization (with the recorded noise), the latent heads and the
/// encoder stack.
pub fn backward(params: &ModelParams, pass: &ForwardPass) -> Result<(ModelParams, LossParts)> {
    let loss = batch_loss(params, pass);
    if !loss.total.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss:?}")));
    }
    let arch = &params.arch;
    let (w, batch) = (arch.window_len, pass.batch);
    let n = w * batch;
    let mut grads = ModelParams::zeros(*arch);
    grads.seed = params.seed;

    let scale = 2.0 / n as f64;
    let dy = Tensor2::from_fn(n, 1, |r, _| {
        scale * (pass.recon.get(r, 0) - pass.x.get(r, 0))
    });
    let dec_top = pass.dec.last().expect("layers");
    let (g_out, mut dh) = params.out.backward(dec_top.h.data(), &dy);
    grads.out = g_out;

    let mut dz = None;
    for l in (0..arch.num_layers).rev() {
        let input = if l == 0 {
            LayerInput::Repeated(&pass.z)
        } else {
            LayerInput::Sequence(&pass.dec[l - 1].h)
        };
        let (g, dinput) = lstm_layer_backward(input, &pass.dec[l], &params.decoder[l], &dh)?;
        grads.decoder[l] = g;
        if l == 0 {
            dz = Some(dinput);
        } else {
            dh = dinput;
        }
    }
    let dz = dz.expect("decoder has layers");

    let beta = arch.beta;
    let inv_b = 1.0 / batch as f64;
    let mut dmu = dz.clone();
    let mut dh_last = Tensor2::zeros(batch, arch.hidden_dim);
    if let (Some(lv), Some(head)) = (&pass.logvar, &params.enc_logvar) {
        let mut dlv = Tensor2::zeros(batch, arch.latent_dim);
        for k in 0..dmu.data().len() {
            let m = pass.mu.data()[k];
            let l = lv.data()[k];
            dmu.data_mut()[k] += beta * m * inv_b;
            let from_z = pass
                .eps
                .as_ref()
                .map_or(0.0, |e| dz.data()[k] * e.data()[k] * 0.5 * (0.5 * l).exp());
            dlv.data_mut()[k] = from_z + beta * 0.5 * (l.exp() - 1.0) * inv_b;
        }
        let (g_lv, dh_lv) = head.backward(pass.h_last.data(), &dlv);
        grads.enc_logvar = Some(g_lv);
        dh_last.add_assign(&dh_lv);
    }
    let (g_mu, dh_mu) = params.enc_mu.backward(pass.h_last.data(), &dmu);
    grads.enc_mu = g_mu;
    dh_last.add_assign(&dh_mu);

    let mut dh = Tensor2::zeros(n, arch.hidden_dim);
    dh.rows_slice_mut((w - 1) * batch, batch)
        .copy_from_slice(dh_last.data());
    for l in (0..arch.num_layers).rev() {
        let input = if l == 0 {
            LayerInput::Sequence(&pass.x)
        } else {
            LayerInput::Sequence(&pass.enc[l - 1].h)
        };
        let (g, dinput) = lstm_layer_backward(input, &pass.enc[l], &params.encoder[l], &dh)?;
        grads.encoder[l] = g;
        dh = dinput;
    }
    for (name, t) in grads.named_tensors() {
        t.ensure_finite(&name)?;
    }
    Ok((grads, loss))
}

/// Deterministic encoding of one window.
pub fn encode(params: &ModelParams, window: &[f64]) -> Result<LatentSample> {
    Ok(forward(params, &[window], None)?.latent(0))
}

/// Decode one latent vector into a W-sample reconstruction.
pub fn decode(params: &ModelParams, z: &[f64]) -> Result<Vec<f64>> {
    let arch = &params.arch;
    if z.len() != arch.latent_dim {
        return Err(Error::Shape(format!(
            "latent of length {} for dim {}",
            z.len(),
            arch.latent_dim
        )));
    }
    let zt = Tensor2::from_vec(1, z.len(), z.to_vec())?;
    let dec = stack_forward(
        &params.decoder,
        LayerInput::Repeated(&zt),
        arch.window_len,
        1,
    )?;
    let recon = params
        .out
        .forward(dec.last().expect("layers").h.data(), arch.window_len);
    recon.ensure_finite("reconstruction")?;
    Ok(recon.into_vec())
}
