pub mod bench;
pub mod binding;
pub mod codec;
pub mod consumer;
pub mod td;
pub mod transport;
pub mod uri;
