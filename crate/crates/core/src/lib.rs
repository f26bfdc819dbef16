//! Artifact suppression for electrophysiology recorded inside a running
//! real-time MRI scanner.
//!
//! The correction chain runs in a fixed order:
//!
//! ```text
//! raw TRIO container
//!   ├─ gradient::detect_gradient_onsets      gradient-threshold onset markers
//!   ├─ gradient::subtract_gradient_artifact  sliding-window average subtraction
//!   ├─ pulse::detect_r_peaks                 15 Hz low-passed ECG, adaptive threshold
//!   ├─ pulse::subtract_pulse_artifact        cardiac-locked sliding-window subtraction
//!   └─ cca::{compute_cca, remove_components} EEG vs EMG+EOG canonical components, ρ > 0.4
//! ```
//!
//! [`synth`] generates sessions with every contamination retained as ground
//! truth, and [`evaluate`] holds the metrics used to check each stage.

pub mod cca;
pub mod error;
pub mod evaluate;
pub mod gradient;
pub mod pipeline;
pub mod pulse;
pub mod signal;
pub mod synth;
mod stats;
pub mod template;

pub use error::{Error, Result};
pub use signal::{ChannelInfo, ChannelSelector, Marker, MarkerList, Modality, Recording};
