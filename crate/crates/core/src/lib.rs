pub mod analysis;
pub mod bench;
pub mod color;
pub mod cost;
pub mod distance;
pub mod error;
pub mod exact;
pub mod io;
pub mod measure;
pub mod multiscale;
pub mod network_simplex;
pub mod sinkhorn;
pub mod synth;

pub use error::{Result, TlpError};
