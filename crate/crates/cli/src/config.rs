//! Pipeline configuration: JSON file, flag overrides, seed resolution.
//!
//! The defaults reproduce the chosen operating point end to end: Canny
//! thresholds 100/200, a 16-block ×4 network and WBF with the
//! `min(T,N)/N` confidence rescale.

use std::path::Path;

use serde::{Deserialize, Serialize};

use esrpcb_core::edge::{CannyParams, EdgeMode};
use esrpcb_core::fusion::{ConfMode, SoftNmsMode};
use esrpcb_core::nn::{BlockKind, NetworkConfig};
use esrpcb_core::train::TrainerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    Nms,
    SoftNms,
    #[default]
    Wbf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub method: FusionMethod,
    pub iou: f32,
    pub conf_mode: ConfMode,
    pub soft_mode: SoftNmsMode,
    pub sigma: f32,
    pub score_floor: f32,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            method: FusionMethod::Wbf,
            iou: 0.55,
            conf_mode: ConfMode::AvgMin,
            soft_mode: SoftNmsMode::Gaussian,
            sigma: 0.5,
            score_floor: 0.001,
        }
    }
}

/// Network shape without the edge mode, which lives at the top level so
/// edge extraction and the network always agree on the channel count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkShape {
    pub n_blocks: usize,
    pub filters: usize,
    pub scale: usize,
    pub block_kind: BlockKind,
}

impl Default for NetworkShape {
    fn default() -> Self {
        NetworkShape {
            n_blocks: 16,
            filters: 64,
            scale: 4,
            block_kind: BlockKind::ResCat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    /// RNG seed; omitted means: use `ESRPCB_SEED` if set, else 0.
    pub seed: Option<u64>,
    pub edge_mode: EdgeMode,
    pub canny: CannyParams,
    pub network: NetworkShape,
    pub trainer: TrainerConfig,
    pub fusion: FusionConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(cfg)
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            n_blocks: self.network.n_blocks,
            filters: self.network.filters,
            scale: self.network.scale,
            edge_mode: self.edge_mode,
            block_kind: self.network.block_kind,
        }
    }

    /// Flag > config file > `ESRPCB_SEED` > 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed)
            .or_else(|| {
                std::env::var("ESRPCB_SEED")
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(0)
    }
}
