//! GATT central transport.
//!
//! [`GattTransport`] is the contract the consumer drives: discovery, connection
//! management and the four GATT methods. [`sim`] provides a deterministic
//! in-process peripheral network implementing it; [`host`] is the slot for an
//! operating-system Bluetooth stack.
//!
//! Read, write and subscribe require a prior successful `connect` to the
//! device named in the URI. Notification sinks run on a delivery thread, never
//! on the caller of `subscribe`.

mod clock;
pub mod config;
pub mod host;
pub mod sim;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::binding::GattMethod;
use crate::codec::Payload;
use crate::uri::{GattUri, MacAddress, Uuid128};

pub use clock::{Clock, RealClock, VirtualClock};
pub use config::{ClockMode, SimConfig};

use sim::SimNetwork;

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("device {0} was not found")]
    NotFound(MacAddress),
    #[error("device {0} already has a connection")]
    Busy(MacAddress),
    #[error("device {0} does not accept connections")]
    NotConnectable(MacAddress),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
    #[error("not connected to {0}")]
    NotConnected(MacAddress),
    #[error("no characteristic at {0}")]
    NoSuchAttribute(String),
    #[error("{method} is not permitted on {uri}")]
    MethodNotPermitted { method: GattMethod, uri: String },
    #[error("value of {len} octets exceeds the 512-octet ATT limit")]
    ValueTooLong { len: usize },
    #[error("unknown subscription {0}")]
    UnknownSubscription(u64),
    #[error("device {0} is defined twice")]
    DuplicateDevice(MacAddress),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("transport unavailable: {0}")]
    Unavailable(String),
}

/// An established connection to one peripheral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub device: MacAddress,
    pub established_at: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacteristicInfo {
    pub uuid: Uuid128,
    pub allowed: BTreeSet<GattMethod>,
}

/// Services and characteristics found on a connected peripheral.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GattTree {
    pub services: BTreeMap<Uuid128, Vec<CharacteristicInfo>>,
}

impl GattTree {
    pub fn characteristic(&self, service: &Uuid128, characteristic: &Uuid128) -> Option<&CharacteristicInfo> {
        self.services.get(service)?.iter().find(|c| c.uuid == *characteristic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriteAck {
    /// The server confirmed the write.
    Confirmed,
    /// Sent without waiting for a response.
    Sent,
}

/// Receives notification values on the transport's delivery thread.
pub type NotificationSink = Box<dyn FnMut(Payload) + Send + 'static>;

#[derive(Debug, PartialEq, Eq, Hash)]
pub struct SubscriptionHandle {
    pub id: u64,
    pub uri: GattUri,
}

pub trait GattTransport: Send + Sync {
    fn start_discovery(&self) -> Result<(), TransportError>;
    fn stop_discovery(&self) -> Result<(), TransportError>;
    /// Starts discovery on its own if no scan is running.
    fn connect(&self, device: MacAddress) -> Result<Session, TransportError>;
    fn disconnect(&self, device: MacAddress) -> Result<(), TransportError>;
    fn is_connected(&self, device: MacAddress) -> bool;
    fn discover_gatt(&self, device: MacAddress) -> Result<GattTree, TransportError>;
    fn read(&self, uri: &GattUri) -> Result<Payload, TransportError>;
    /// With `with_response` the call returns after the server's confirmation.
    fn write(&self, uri: &GattUri, value: &[u8], with_response: bool) -> Result<WriteAck, TransportError>;
    fn subscribe(&self, uri: &GattUri, sink: NotificationSink) -> Result<SubscriptionHandle, TransportError>;
    /// No value reaches the sink once this returns.
    fn unsubscribe(&self, handle: SubscriptionHandle) -> Result<(), TransportError>;
    fn clock(&self) -> Arc<dyn Clock>;
}

/// Where interactions go: `sim:<config.json>` or `host`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportSelection {
    Sim(PathBuf),
    Host,
}

impl FromStr for TransportSelection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("sim:") {
            Some("") => Err("sim: needs a config path".into()),
            Some(path) => Ok(TransportSelection::Sim(PathBuf::from(path))),
            None if s == "host" => Ok(TransportSelection::Host),
            None => Err(format!("expected sim:<config> or host, got {s:?}")),
        }
    }
}

impl fmt::Display for TransportSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportSelection::Sim(p) => write!(f, "sim:{}", p.display()),
            TransportSelection::Host => f.write_str("host"),
        }
    }
}

/// Overrides applied when opening a transport.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpenOptions {
    pub seed: Option<u64>,
    pub clock: Option<ClockMode>,
    pub connect_timeout: Option<Duration>,
}

pub struct OpenedTransport {
    pub transport: Arc<dyn GattTransport>,
    /// Set for simulated transports, for peripheral-side control.
    pub network: Option<SimNetwork>,
}

impl TransportSelection {
    pub fn open(&self, options: &OpenOptions) -> Result<OpenedTransport, TransportError> {
        match self {
            TransportSelection::Host => Ok(OpenedTransport { transport: host::open_host_transport()?, network: None }),
            TransportSelection::Sim(path) => {
                let mut config = SimConfig::load(path)?;
                if let Some(seed) = options.seed {
                    config.seed = seed;
                }
                let network = config.build(options.clock)?;
                let central = network.central_with_timeout(options.connect_timeout.unwrap_or(DEFAULT_CONNECT_TIMEOUT));
                Ok(OpenedTransport { transport: Arc::new(central), network: Some(network) })
            }
        }
    }
}
