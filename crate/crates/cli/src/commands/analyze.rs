//! `param-count`, `macs` and `gradcheck`.

use anyhow::{bail, Result};
use clap::Args;

use esrpcb_core::nn::{finite_difference_check, GradCheckConfig, Network, NetworkConfig};

use crate::config::PipelineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum NetPreset {
    /// Canny-guided network (4 input channels).
    EsrpcbC,
    /// Sobel-guided network (5 input channels).
    EsrpcbS,
    /// Plain-RGB baseline with bias-less blocks and a post-body conv.
    Edsr,
}

fn resolve_network(preset: Option<NetPreset>, config: &PipelineConfig) -> NetworkConfig {
    match preset {
        Some(NetPreset::EsrpcbC) => NetworkConfig::esrpcb_c(),
        Some(NetPreset::EsrpcbS) => NetworkConfig::esrpcb_s(),
        Some(NetPreset::Edsr) => NetworkConfig::edsr_baseline(),
        None => config.network_config(),
    }
}

#[derive(Args)]
pub struct ParamCountArgs {
    /// Named configuration instead of the --config file.
    #[arg(long, value_enum)]
    preset: Option<NetPreset>,
}

pub fn run_param_count(args: ParamCountArgs, config: &PipelineConfig) -> Result<()> {
    let net = Network::zeroed(resolve_network(args.preset, config))?;
    println!("{}", net.count_params());
    Ok(())
}

#[derive(Args)]
pub struct MacsArgs {
    /// Named configuration instead of the --config file.
    #[arg(long, value_enum)]
    preset: Option<NetPreset>,
    /// Input (low-resolution) height in pixels.
    #[arg(long, default_value_t = 150)]
    height: usize,
    /// Input (low-resolution) width in pixels.
    #[arg(long, default_value_t = 150)]
    width: usize,
}

pub fn run_macs(args: MacsArgs, config: &PipelineConfig) -> Result<()> {
    if args.height == 0 || args.width == 0 {
        bail!("input resolution must be positive");
    }
    let net = Network::zeroed(resolve_network(args.preset, config))?;
    let macs = net.count_macs(args.height, args.width);
    println!("{macs} ({:.2} GMACs)", macs as f64 / 1e9);
    Ok(())
}

#[derive(Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 2)]
    blocks: usize,
    #[arg(long, default_value_t = 8)]
    filters: usize,
    /// Spatial size of the square test input.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Maximum admissible relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

pub fn run_gradcheck(args: GradcheckArgs, seed: u64) -> Result<()> {
    let report = finite_difference_check(GradCheckConfig {
        n_blocks: args.blocks,
        filters: args.filters,
        input_size: args.size,
        step: args.step,
        seed,
    })?;
    println!(
        "max relative error {:.3e} at {} ({} elements checked, {} kink samples excluded)",
        report.max_rel_error, report.worst, report.elements_checked, report.kink_skipped
    );
    if report.max_rel_error >= args.tolerance {
        bail!(
            "gradient check failed: {:.3e} >= tolerance {:.1e}",
            report.max_rel_error,
            args.tolerance
        );
    }
    println!("gradient check passed (tolerance {:.1e})", args.tolerance);
    Ok(())
}
