//! Tag data: frames, CSV ingestion, resampling, scaling, windowing and synthesis.

mod csv_io;
mod frame;
mod resample;
mod scale;
mod synth;
mod window;

pub use csv_io::{load_csv, write_csv, ColumnSchema};
pub(crate) use frame::runs_of;
pub use frame::{AttackInterval, TimeSeriesFrame};
pub use resample::resample_uniform;
pub use scale::{apply_scaler, fit_scaler, ScalingStats};
pub use synth::{
    synth_generate, synth_generate_split, Injection, Perturbation, SignalKind, SynthConfig,
    TagSignal,
};
pub use window::{make_windows, WindowDataset, WindowPair, WindowSpec};
