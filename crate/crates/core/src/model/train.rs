use super::{backward, forward, Architecture, Mode, ModelParams, STREAM_NOISE, STREAM_SHUFFLE};
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, Tensor2};
use crate::preprocess::WindowBatch;
use crate::prng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 1e-3,
            seed: 1,
        }
    }
}

/// Window-weighted mean losses observed while training one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub trace: Vec<EpochLoss>,
}

/// Minibatch Adam on the (V)AE loss. Fully determined by `(pool, arch, cfg)`:
/// initialization, per-epoch reshuffles and latent noise come from
/// substreams of `cfg.seed`.
pub fn train(pool: &WindowBatch, arch: Architecture, cfg: &TrainConfig) -> Result<TrainOutcome> {
    arch.validate()?;
    if pool.is_empty() {
        return Err(Error::Empty("training pool has no windows".into()));
    }
    if pool.window_len != arch.window_len {
        return Err(Error::Shape(format!(
            "pool windows have length {}, model expects {}",
            pool.window_len, arch.window_len
        )));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be >= 1".into()));
    }
    let mut params = ModelParams::init(arch, cfg.seed)?;
    let root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.derive(STREAM_SHUFFLE);
    let mut noise_rng = root.derive(STREAM_NOISE);
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.learning_rate,
            ..AdamConfig::default()
        },
        params.named_tensors().into_iter().map(|(_, t)| t),
    );

    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let (mut recon, mut kl, mut total) = (0.0, 0.0, 0.0);
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<&[f64]> = idx.iter().map(|&i| pool.window(i)).collect();
            let noise = (arch.mode == Mode::Vae).then(|| {
                Tensor2::from_fn(windows.len(), arch.latent_dim, |_, _| {
                    noise_rng.next_gaussian()
                })
            });
            let step = forward(&params, &windows, noise.as_ref())
                .and_then(|pass| backward(&params, &pass))
                .map_err(|e| match e {
                    Error::NonFinite(msg) => {
                        Error::NonFinite(format!("epoch {epoch} batch {bi}: {msg}"))
                    }
                    other => other,
                })?;
            let (grads, loss) = step;
            let w = windows.len() as f64;
            recon += loss.recon * w;
            kl += loss.kl * w;
            total += loss.total * w;
            let g: Vec<&Tensor2> = grads.named_tensors().into_iter().map(|(_, t)| t).collect();
            let mut p: Vec<&mut Tensor2> = params
                .named_tensors_mut()
                .into_iter()
                .map(|(_, t)| t)
                .collect();
            adam_step(&mut p, &g, &mut adam)?;
        }
        let n = pool.len() as f64;
        trace.push(EpochLoss {
            epoch,
            recon: recon / n,
            kl: kl / n,
            total: total / n,
        });
    }
    Ok(TrainOutcome { params, trace })
}
