//! Minimum hyperspherical energy (MHE) regularization for 1D convolutional
//! filter banks, with a small time-domain vocal separator to apply it to.

pub mod data;
pub mod energy;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod sdr;
pub mod thomson;
pub mod train;

pub use data::{Dataset, DatasetManifest, GenParams, Song, Split};
pub use energy::{
    layer_energy, mhe_penalty, normalized_layer_energy, Distance, EnergyError, EnergyResult,
    FilterBank, MheConfig, Space,
};
pub use net::{init_net, load_checkpoint, save_checkpoint, Growth, NetConfig, SepNet};
pub use sdr::{SdrReport, Source};
pub use thomson::{minimize_energy, reference_energy, MinimizeOptions, PointSet, Shape};
pub use train::{LambdaMode, RunConfig, TrainConfig, TrainLog};
