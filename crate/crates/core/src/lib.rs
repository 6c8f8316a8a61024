//! Cross-modal hashing with learned category proxy codes.
//!
//! A proxy network turns each category into a binary proxy code; image and
//! text networks are then trained so that every instance's code sits closer
//! to the mean of its categories' proxies than to any other proxy, by a
//! margin. Retrieval ranks binary codes by Hamming distance.

pub mod codespace;
pub mod data;
pub mod error;
pub mod network;
pub mod objectives;
pub mod pipeline;
pub mod retrieval;
pub mod trainer;

pub use codespace::{BinaryCode, ContinuousCode, ProxyCodebook};
pub use data::{Modality, PairedDataset};
pub use error::{Error, Result};
pub use network::{Mlp, SgdConfig};
pub use objectives::{Hyperparams, LabelSets};
pub use trainer::TrainConfig;
