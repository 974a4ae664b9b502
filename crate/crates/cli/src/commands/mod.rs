mod analyze;
mod dataset;
mod evaluate;
mod fuse;
mod images;
mod sweep;
mod train;

pub use analyze::{run_gradcheck, run_macs, run_param_count, GradcheckArgs, MacsArgs, ParamCountArgs};
pub use dataset::{run_crop_dataset, CropDatasetArgs};
pub use evaluate::{run_evaluate, EvaluateArgs};
pub use fuse::{run_fuse, FuseArgs};
pub use images::{
    run_degrade, run_edges, run_psnr, run_sr, run_ssim, DegradeArgs, EdgesArgs, PsnrArgs, SrArgs,
    SsimArgs,
};
pub use sweep::{run_sweep, SweepArgs};
pub use train::{run_train, TrainArgs};

/// Edge mode selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum EdgeModeArg {
    None,
    Canny,
    Sobel,
}

impl From<EdgeModeArg> for esrpcb_core::edge::EdgeMode {
    fn from(v: EdgeModeArg) -> Self {
        match v {
            EdgeModeArg::None => esrpcb_core::edge::EdgeMode::None,
            EdgeModeArg::Canny => esrpcb_core::edge::EdgeMode::Canny,
            EdgeModeArg::Sobel => esrpcb_core::edge::EdgeMode::Sobel,
        }
    }
}
