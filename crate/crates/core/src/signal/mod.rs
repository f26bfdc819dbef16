//! Recording data model, container I/O and filtering primitives.

pub mod filter;
pub mod io;
pub mod recording;

pub use filter::{lowpass, Butterworth};
pub use io::{import_csv, load_recording, read_markers_csv, save_recording, write_markers_csv};
pub use recording::{
    standard_montage, ChannelInfo, ChannelSelector, Marker, MarkerList, Modality, Recording,
    ACQUISITION_RATE_HZ, EEG_LABELS, MRI_FRAME_PERIOD_S, MRI_TR_S,
};

/// `select_channels` as a free function.
pub fn select_channels(rec: &Recording, selector: &ChannelSelector) -> crate::Result<Recording> {
    rec.select_channels(selector)
}
