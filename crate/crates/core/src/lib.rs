//! Spatial auditory BCI toolkit.
//!
//! * [`vbap`]: pairwise amplitude panning on a loudspeaker ring with depth control
//! * [`protocol`]: oddball stimulus plans and behavioural scoring
//! * [`filter`], [`epoch`]: Butterworth band-limiting and event-locked epochs
//! * [`memd`]: multivariate EMD and peak-to-peak IMF artifact rejection
//! * [`erp`], [`stats`]: grand averages, P300 window scores, rank tests
//! * [`synth`]: seeded synthetic EEG with retained ground truth
//! * [`io`], [`pipeline`]: file formats and the end-to-end batch pipeline

pub mod epoch;
pub mod erp;
pub mod error;
pub mod exec;
pub mod filter;
pub mod io;
pub mod memd;
pub mod pipeline;
pub mod protocol;
pub mod recording;
pub mod stats;
pub mod synth;
pub mod vbap;

pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use recording::MultichannelRecording;
