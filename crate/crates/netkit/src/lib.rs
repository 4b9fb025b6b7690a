//! Forward-only volumetric segmentation networks (UNet3D, V-Net, MSA-VNet)
//! on `f64` tensors, with the soft Dice loss and a cosine learning-rate
//! schedule. Nothing here trains; the point is checkable structure and
//! numerics at desk scale.

pub mod builders;
pub mod error;
mod gemm;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod schedule;
pub mod tensor;

pub use builders::{build_msavnet, build_unet3d, build_vnet, Architecture, BuildConfig, MODALITIES};
pub use error::{Error, Result};
pub use graph::{Layer, LayerKind, LayerSpec, NetworkGraph, SkipEdge};
pub use layers::{conv3d_forward, transposed_conv3d_forward, Conv3d, TransposedConv3d};
pub use loss::{soft_dice_grad, soft_dice_loss};
pub use schedule::{cosine_lr, TrainingSchedule};
pub use tensor::Tensor5;
