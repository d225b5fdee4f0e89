//! Operating-system Bluetooth stack.
//!
//! No platform backend is compiled into this build. Callers that ask for the
//! host transport get [`TransportError::Unavailable`] and should fall back to
//! a simulated network.

use std::sync::Arc;

use super::{GattTransport, TransportError};

pub fn open_host_transport() -> Result<Arc<dyn GattTransport>, TransportError> {
    Err(TransportError::Unavailable("no host Bluetooth backend in this build".into()))
}
