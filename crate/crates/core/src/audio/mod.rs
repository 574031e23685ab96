//! WAV read/write and corpus manifest handling.

pub mod manifest;
pub mod wav;

pub use manifest::{Manifest, ManifestEntry};
pub use wav::{read_wav, write_wav, WavFormat};
