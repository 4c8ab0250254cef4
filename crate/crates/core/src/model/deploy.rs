use super::{forward, Mode, ModelParams, STREAM_NOISE};
use crate::error::Result;
use crate::nn::Tensor2;
use crate::preprocess::{make_windows, WindowBatch};
use crate::prng::Rng;
use crate::signal::{DeltaTrace, Record};

const DEPLOY_CHUNK: usize = 256;

/// Latent used at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatentMode {
    /// `z = mu`.
    #[default]
    Mean,
    /// Reparameterized draw from the posterior (VAE only; ablation).
    Sampled { seed: u64 },
}

/// Reconstructions of every window, flattened N x W in batch order.
pub fn reconstruct_windows(
    params: &ModelParams,
    batch: &WindowBatch,
    mode: LatentMode,
) -> Result<Vec<f64>> {
    let w = params.arch.window_len;
    let mut out = Vec::with_capacity(batch.len() * w);
    let mut rng = match mode {
        LatentMode::Sampled { seed } if params.arch.mode == Mode::Vae => {
            Some(Rng::new(seed).derive(STREAM_NOISE))
        }
        _ => None,
    };
    let windows: Vec<&[f64]> = batch.iter().collect();
    for chunk in windows.chunks(DEPLOY_CHUNK) {
        let noise = rng.as_mut().map(|r| {
            Tensor2::from_fn(chunk.len(), params.arch.latent_dim, |_, _| {
                r.next_gaussian()
            })
        });
        let pass = forward(params, chunk, noise.as_ref())?;
        for b in 0..chunk.len() {
            out.extend(pass.recon_window(b));
        }
    }
    Ok(out)
}

/// Per-sample delta: mean over all step-1 covering windows of `|x - x'|`.
/// Samples covered by no MISSING-free window stay undefined.
pub fn reconstruct_record(record: &Record, params: &ModelParams) -> Result<DeltaTrace> {
    reconstruct_record_with(record, params, LatentMode::Mean)
}

pub fn reconstruct_record_with(
    record: &Record,
    params: &ModelParams,
    mode: LatentMode,
) -> Result<DeltaTrace> {
    let w = params.arch.window_len;
    let windows = make_windows(record, w, 1)?;
    if windows.is_empty() {
        return Ok(DeltaTrace::undefined(record.len()));
    }
    let recon = reconstruct_windows(params, &windows, mode)?;
    Ok(aggregate_window_errors(record.len(), &windows, &recon))
}

/// Mean absolute error per sample across the windows that cover it.
pub fn aggregate_window_errors(len: usize, windows: &WindowBatch, recon: &[f64]) -> DeltaTrace {
    let w = windows.window_len;
    let mut sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for (i, origin) in windows.origins.iter().enumerate() {
        let x = windows.window(i);
        let xr = &recon[i * w..(i + 1) * w];
        for k in 0..w {
            sum[origin.start + k] += (x[k] - xr[k]).abs();
            count[origin.start + k] += 1;
        }
    }
    DeltaTrace {
        values: sum
            .into_iter()
            .zip(count)
            .map(|(s, c)| (c > 0).then(|| s / c as f64))
            .collect(),
    }
}
