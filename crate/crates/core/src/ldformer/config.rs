use crate::autodiff::kernels::ConvGeom;
use crate::error::{Error, Result};
use crate::otfs::OtfsDims;

/// Architecture and training settings of the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LdformerConfig {
    pub dims: OtfsDims,
    /// History length `L` used for training.
    pub history_len: usize,
    /// Rows of the learnable positional table; sequences longer than this
    /// are rejected. At least `history_len`.
    pub max_positions: usize,
    /// Output channels of each downsampling block (`K = channels.len()`).
    pub channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Spatial side `R` of the compact feature map.
    pub latent_side: usize,
    pub trans_layers: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub leaky_slope: f64,
    pub layer_norm_eps: f64,
    /// Normalize each sublayer's input and leave the residual stream
    /// unnormalized; otherwise every residual sum is normalized.
    pub pre_norm: bool,
    /// Initial gain of the last normalization, whose output the decoder
    /// reads. Unit gain makes the first predictions far larger than
    /// normalized channel entries; matching their typical size lets the
    /// temporal path train instead of being switched off.
    pub output_norm_gain: f64,
    /// Add encoder features to decoder outputs of matching resolution.
    pub skips: bool,
    /// Apply the activation after the last decoder block too.
    pub output_activation: bool,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

/// Parameter counts per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamBreakdown {
    pub encoder: usize,
    pub positional: usize,
    pub transformer: usize,
    pub decoder: usize,
}

impl ParamBreakdown {
    pub fn total(&self) -> usize {
        self.encoder + self.positional + self.transformer + self.decoder
    }
}

impl LdformerConfig {
    /// Small model for `S = 64` (M = 16, N = 4) that trains on one CPU core.
    pub fn desk() -> Self {
        Self {
            dims: OtfsDims::new(16, 4).expect("nonzero"),
            history_len: 10,
            max_positions: 10,
            channels: vec![8, 8, 4],
            kernel: 4,
            stride: 2,
            padding: 1,
            latent_side: 8,
            trans_layers: 2,
            heads: 4,
            ffn_hidden: 512,
            leaky_slope: 0.01,
            layer_norm_eps: 1e-5,
            pre_norm: false,
            output_norm_gain: 0.03,
            skips: true,
            output_activation: false,
            lr: 1e-3,
            batch: 8,
            max_epochs: 30,
            patience: 10,
            seed: 0,
        }
    }

    /// `S = 512` (M = 64, N = 8) with four halvings down to `R = 32`.
    pub fn full_scale() -> Self {
        Self {
            dims: OtfsDims::new(64, 8).expect("nonzero"),
            channels: vec![16, 16, 8, 1],
            latent_side: 32,
            trans_layers: 3,
            heads: 8,
            ffn_hidden: 2048,
            max_epochs: 100,
            ..Self::desk()
        }
    }

    pub fn down_blocks(&self) -> usize {
        self.channels.len()
    }

    pub fn side(&self) -> usize {
        self.dims.side()
    }

    /// `D = C_K · R²`.
    pub fn token_dim(&self) -> usize {
        self.channels.last().copied().unwrap_or(2) * self.latent_side * self.latent_side
    }

    /// Channel count entering block `k` (`in_channels(0) == 2`).
    pub(crate) fn in_channels(&self, k: usize) -> usize {
        if k == 0 {
            2
        } else {
            self.channels[k - 1]
        }
    }

    /// Encoder geometries, one per block, with the spatial side each block
    /// consumes.
    pub(crate) fn encoder_geoms(&self) -> Result<Vec<ConvGeom>> {
        let mut side = self.side();
        let mut out = Vec::with_capacity(self.down_blocks());
        for k in 0..self.down_blocks() {
            let g = ConvGeom::new(self.in_channels(k), side, side, self.kernel, self.stride, self.padding)
                .ok_or_else(|| Error::InvalidArgument(format!("encoder block {k} has empty output")))?;
            side = g.out_h;
            out.push(g);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.channels.is_empty() || self.channels.contains(&0) {
            return bad(format!("channels {:?} must be nonempty and positive", self.channels));
        }
        if self.history_len == 0 || self.max_positions < self.history_len {
            return bad(format!(
                "history_len {} must be positive and at most max_positions {}",
                self.history_len, self.max_positions
            ));
        }
        if self.kernel == 0 || self.stride == 0 {
            return bad("kernel and stride must be positive".into());
        }
        let geoms = self.encoder_geoms()?;
        let reached = geoms.last().map_or(self.side(), |g| g.out_h);
        if reached != self.latent_side {
            return bad(format!(
                "side {} reduces to {reached} after {} blocks, configured latent side is {}",
                self.side(),
                self.down_blocks(),
                self.latent_side
            ));
        }
        for (k, g) in geoms.iter().enumerate() {
            let back = (g.out_h - 1) * self.stride + self.kernel;
            if back < 2 * self.padding || back - 2 * self.padding != g.height {
                return bad(format!(
                    "transposed block mirroring encoder block {k} yields side {}, expected {} \
                     (kernel {}, stride {}, padding {})",
                    back.saturating_sub(2 * self.padding),
                    g.height,
                    self.kernel,
                    self.stride,
                    self.padding
                ));
            }
        }
        let d = self.token_dim();
        if self.heads == 0 || !d.is_multiple_of(self.heads) {
            return bad(format!("token dim {d} not divisible by {} heads", self.heads));
        }
        if self.ffn_hidden == 0 {
            return bad("ffn_hidden must be positive".into());
        }
        if !(self.output_norm_gain.is_finite() && self.output_norm_gain > 0.0) {
            return bad(format!("output_norm_gain must be positive, got {}", self.output_norm_gain));
        }
        if !(self.leaky_slope.is_finite() && self.layer_norm_eps > 0.0) {
            return bad("leaky_slope must be finite and layer_norm_eps positive".into());
        }
        if !(self.lr > 0.0) || self.batch == 0 || self.max_epochs == 0 {
            return bad("lr, batch and max_epochs must be positive".into());
        }
        Ok(())
    }

    /// Element counts computed from the configuration alone.
    pub fn param_breakdown(&self) -> ParamBreakdown {
        let k2 = self.kernel * self.kernel;
        let conv = |k: usize| self.in_channels(k) * self.channels[k] * k2;
        let encoder = (0..self.down_blocks()).map(|k| conv(k) + self.channels[k]).sum();
        let decoder = (0..self.down_blocks()).map(|k| conv(k) + self.in_channels(k)).sum();
        let d = self.token_dim();
        let f = self.ffn_hidden;
        let layer = 4 * (d * d + d) + 2 * d * f + f + d + 4 * d;
        ParamBreakdown {
            encoder,
            positional: self.max_positions * d,
            transformer: self.trans_layers * layer,
            decoder,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.param_breakdown().total()
    }
}
