//! Path from the gNodeB waveform to the tag's digital core: channel
//! impairments, passive envelope detection and quantization.

mod channel;
mod envelope;
mod quantize;

pub use channel::{apply_channel, ChannelConfig, FrequencyOffset};
pub use envelope::{extract_envelope, Envelope};
pub use quantize::{quantize_adc, quantize_comparator, BitStream, ThresholdPolicy};
