//! Scripting-style access to a Bluetooth LE Thing.
//!
//! ```no_run
//! # use std::sync::Arc;
//! # use wot_gatt::consumer::{consume, ConnectionPolicy};
//! # use wot_gatt::transport::GattTransport;
//! # fn demo(td_text: &str, transport: Arc<dyn GattTransport>) -> Result<(), Box<dyn std::error::Error>> {
//! let td = wot_gatt::td::parse_td(td_text)?;
//! let thing = consume(td, transport, ConnectionPolicy::KeepConnected)?;
//! thing.connect()?;
//! let status = thing.read_property("power")?;
//! thing.disconnect()?;
//! # Ok(()) }
//! ```
//!
//! Event listeners run on the transport's delivery thread. Long work inside a
//! listener delays every later notification of the same subscription.

use std::collections::HashMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use indexmap::IndexMap;
use parking_lot::FairMutex;
use serde_json::Value;
use thiserror::Error;

use crate::binding::{resolve_form, BindingError, GattMethod, ResolvedRequest, WotOperation};
use crate::codec::{CodecError, CodecRegistry};
use crate::td::{validate_td, Affordance, AffordanceKind, Diagnostic, Severity, ThingDescription};
use crate::transport::{GattTransport, GattTree, SubscriptionHandle, TransportError};
use crate::uri::{parse_gatt_uri, MacAddress};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConnectionPolicy {
    /// Connect on first use and stay connected until [`ConsumedThing::disconnect`].
    #[default]
    KeepConnected,
    /// Every GATT operation gets its own connection.
    ReconnectPerOperation,
    /// Connect for the duration of one call (a multi-property call shares a
    /// single connection) and disconnect afterwards, unless the connection was
    /// opened explicitly.
    DisconnectAfter,
}

impl ConnectionPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ConnectionPolicy::KeepConnected => "keep_connected",
            ConnectionPolicy::ReconnectPerOperation => "reconnect_per_operation",
            ConnectionPolicy::DisconnectAfter => "disconnect_after",
        }
    }
}

impl std::str::FromStr for ConnectionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "keep_connected" => Ok(ConnectionPolicy::KeepConnected),
            "reconnect_per_operation" => Ok(ConnectionPolicy::ReconnectPerOperation),
            "disconnect_after" => Ok(ConnectionPolicy::DisconnectAfter),
            _ => Err(format!("unknown connection policy {s:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConsumerError {
    #[error("no {kind} named {name:?}")]
    UnknownAffordance { kind: AffordanceKind, name: String },
    #[error("thing description is not usable: {}", join(.0))]
    InvalidTd(Vec<Diagnostic>),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error(transparent)]
    Codec(CodecError),
    #[error(transparent)]
    Transport(TransportError),
    #[error("value of {len} octets exceeds the 512-octet ATT limit")]
    ValueTooLong { len: usize },
    #[error("forms address more than one device: {}", join(.0))]
    MixedDevices(Vec<MacAddress>),
    #[error("thing description has no gatt:// form")]
    NoDevice,
    #[error("{0} is not supported")]
    NotSupported(String),
    #[error("no value given for property {0:?}")]
    MissingValue(String),
    #[error(transparent)]
    PartialFailure(Box<PartialFailure>),
}

/// A multi-property call stopped at `name`.
#[derive(Debug, Error)]
#[error("{name}: {source} (completed: {})", .completed.join(", "))]
pub struct PartialFailure {
    pub name: String,
    pub completed: Vec<String>,
    /// Values read before the failure; empty for writes.
    pub values: IndexMap<String, Value>,
    pub source: ConsumerError,
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

impl From<CodecError> for ConsumerError {
    fn from(e: CodecError) -> Self {
        match e {
            CodecError::AttLengthExceeded { len } => ConsumerError::ValueTooLong { len },
            e => ConsumerError::Codec(e),
        }
    }
}

impl From<TransportError> for ConsumerError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::ValueTooLong { len } => ConsumerError::ValueTooLong { len },
            e => ConsumerError::Transport(e),
        }
    }
}

pub type Result<T, E = ConsumerError> = std::result::Result<T, E>;

/// Returned by [`ConsumedThing::subscribe_event`].
#[derive(Debug, PartialEq, Eq)]
pub struct EventSubscription {
    pub event: String,
    handle: SubscriptionHandle,
}

#[derive(Default)]
struct ThingState {
    subscriptions: HashMap<u64, String>,
    /// The connection was opened by `subscribe_event` and ends with the last
    /// subscription.
    held_for_events: bool,
    tree: Option<GattTree>,
}

#[derive(Clone, Copy)]
enum Scope {
    Call,
    Operation,
}

pub struct ConsumedThing {
    td: ThingDescription,
    transport: Arc<dyn GattTransport>,
    policy: ConnectionPolicy,
    codecs: CodecRegistry,
    devices: Vec<MacAddress>,
    /// Held for the whole of each interaction, which keeps them FIFO.
    state: FairMutex<ThingState>,
}

/// Wraps a TD for interaction. Fails with `InvalidTd` if validation reports
/// errors; no I/O happens here.
pub fn consume(
    td: ThingDescription,
    transport: Arc<dyn GattTransport>,
    policy: ConnectionPolicy,
) -> Result<ConsumedThing> {
    let errors: Vec<Diagnostic> = validate_td(&td).into_iter().filter(|d| d.severity() == Severity::Error).collect();
    if !errors.is_empty() {
        return Err(ConsumerError::InvalidTd(errors));
    }
    let mut devices: Vec<MacAddress> = td
        .affordances()
        .flat_map(|a| a.forms.iter())
        .filter_map(|f| parse_gatt_uri(&f.href).ok())
        .map(|u| u.device)
        .collect();
    devices.sort();
    devices.dedup();
    Ok(ConsumedThing {
        td,
        transport,
        policy,
        codecs: CodecRegistry::default(),
        devices,
        state: FairMutex::new(ThingState::default()),
    })
}

impl ConsumedThing {
    pub fn td(&self) -> &ThingDescription {
        &self.td
    }

    pub fn policy(&self) -> ConnectionPolicy {
        self.policy
    }

    /// Direct transport access for raw GATT work outside the TD.
    pub fn transport(&self) -> &Arc<dyn GattTransport> {
        &self.transport
    }

    pub fn codecs_mut(&mut self) -> &mut CodecRegistry {
        &mut self.codecs
    }

    pub fn device(&self) -> Result<MacAddress> {
        match self.devices.as_slice() {
            [] => Err(ConsumerError::NoDevice),
            [one] => Ok(*one),
            many => Err(ConsumerError::MixedDevices(many.to_vec())),
        }
    }

    pub fn is_connected(&self) -> bool {
        self.device().is_ok_and(|d| self.transport.is_connected(d))
    }

    /// Services found during the most recent connection.
    pub fn gatt_tree(&self) -> Option<GattTree> {
        self.state.lock().tree.clone()
    }

    /// Finds the device, connects and explores its services.
    pub fn connect(&self) -> Result<()> {
        let mut st = self.state.lock();
        self.open(&mut st)
    }

    /// Succeeds without doing anything when not connected. Active event
    /// subscriptions end with the connection.
    pub fn disconnect(&self) -> Result<()> {
        let device = self.device()?;
        let mut st = self.state.lock();
        if !self.transport.is_connected(device) {
            return Ok(());
        }
        self.transport.disconnect(device)?;
        st.subscriptions.clear();
        st.held_for_events = false;
        Ok(())
    }

    /// Resolves the form used for `op` on the named affordance.
    pub fn resolve(&self, kind: AffordanceKind, name: &str, op: WotOperation) -> Result<ResolvedRequest> {
        Ok(resolve_form(self.affordance(kind, name)?, op)?)
    }

    pub fn read_property(&self, name: &str) -> Result<Value> {
        let req = self.resolve(AffordanceKind::Property, name, WotOperation::ReadProperty)?;
        let mut st = self.state.lock();
        self.call(&mut st, |st| self.read_req(st, &req))
    }

    pub fn write_property(&self, name: &str, value: &Value) -> Result<()> {
        let req = self.resolve(AffordanceKind::Property, name, WotOperation::WriteProperty)?;
        let mut st = self.state.lock();
        self.call(&mut st, |st| self.write_req(st, &req, value))
    }

    pub fn invoke_action(&self, name: &str, input: &Value) -> Result<()> {
        let req = self.resolve(AffordanceKind::Action, name, WotOperation::InvokeAction)?;
        let mut st = self.state.lock();
        self.call(&mut st, |st| self.write_req(st, &req, input))
    }

    /// Every property with a read form, in declaration order.
    pub fn read_all_properties(&self) -> Result<IndexMap<String, Value>> {
        let names: Vec<String> = self
            .td
            .properties
            .values()
            .filter(|p| p.permits(WotOperation::ReadProperty))
            .map(|p| p.name.clone())
            .collect();
        self.read_in_order(names)
    }

    /// Reads in declaration order; unknown names fail after the known ones.
    pub fn read_multiple_properties(&self, names: &[&str]) -> Result<IndexMap<String, Value>> {
        self.read_in_order(self.declaration_order(names.iter().copied()))
    }

    /// Writes in declaration order; unknown names fail after the known ones.
    /// The first failure stops the sequence.
    pub fn write_multiple_properties(&self, values: &IndexMap<String, Value>) -> Result<()> {
        let order = self.declaration_order(values.keys().map(String::as_str));
        let mut st = self.state.lock();
        self.call(&mut st, |st| {
            let mut completed = Vec::new();
            for name in order {
                let step = self
                    .resolve(AffordanceKind::Property, &name, WotOperation::WriteProperty)
                    .and_then(|req| self.write_req(st, &req, &values[name.as_str()]));
                if let Err(e) = step {
                    return Err(partial(name, completed, IndexMap::new(), e));
                }
                completed.push(name);
            }
            Ok(())
        })
    }

    /// Like [`write_multiple_properties`](Self::write_multiple_properties) but
    /// every writable property must have a value.
    pub fn write_all_properties(&self, values: &IndexMap<String, Value>) -> Result<()> {
        let missing = self
            .td
            .properties
            .values()
            .find(|p| p.permits(WotOperation::WriteProperty) && !values.contains_key(&p.name));
        if let Some(p) = missing {
            return Err(ConsumerError::MissingValue(p.name.clone()));
        }
        self.write_multiple_properties(values)
    }

    /// `listener` receives each notification decoded through the event's
    /// binary description. Values that fail to decode are logged and dropped;
    /// a panicking listener does not end the subscription.
    pub fn subscribe_event<F>(&self, name: &str, listener: F) -> Result<EventSubscription>
    where
        F: FnMut(Value) + Send + 'static,
    {
        let req = self.resolve(AffordanceKind::Event, name, WotOperation::SubscribeEvent)?;
        let codec = self.codecs.lookup(&req.content_type)?;
        let spec = req.spec.clone();
        let event = name.to_string();
        let mut listener = listener;
        let sink =
            Box::new(move |payload: crate::codec::Payload| match codec.decode(payload.as_bytes(), spec.as_ref()) {
                Ok(value) => {
                    if catch_unwind(AssertUnwindSafe(|| listener(value))).is_err() {
                        log::warn!("listener for event {event:?} panicked");
                    }
                }
                Err(e) => log::warn!("dropping notification for {event:?}: {e}"),
            });
        let mut st = self.state.lock();
        let was_connected = self.transport.is_connected(req.uri.device);
        self.ensure_connected(&mut st)?;
        let handle = match self.transport.subscribe(&req.uri, sink) {
            Ok(h) => h,
            Err(e) => {
                if !was_connected && self.policy != ConnectionPolicy::KeepConnected {
                    let _ = self.transport.disconnect(req.uri.device);
                }
                return Err(e.into());
            }
        };
        if st.subscriptions.is_empty() && !was_connected {
            st.held_for_events = self.policy != ConnectionPolicy::KeepConnected;
        }
        st.subscriptions.insert(handle.id, name.to_string());
        Ok(EventSubscription { event: name.to_string(), handle })
    }

    /// No notification reaches the listener once this returns. Must not be
    /// called from inside the subscription's own listener.
    pub fn unsubscribe_event(&self, subscription: EventSubscription) -> Result<()> {
        let device = subscription.handle.uri.device;
        let id = subscription.handle.id;
        // the transport joins the delivery thread; don't hold the state lock
        // while a listener might be waiting on it
        let outcome = self.transport.unsubscribe(subscription.handle);
        let mut st = self.state.lock();
        st.subscriptions.remove(&id);
        match outcome {
            Ok(()) => {}
            // the connection, and with it the subscription, is already gone
            Err(TransportError::UnknownSubscription(_)) if !self.transport.is_connected(device) => {}
            Err(e) => return Err(e.into()),
        }
        if st.subscriptions.is_empty() && st.held_for_events {
            st.held_for_events = false;
            if self.transport.is_connected(device) {
                self.transport.disconnect(device)?;
            }
        }
        Ok(())
    }

    /// Hosting a Thing on this side would need a local GATT server.
    pub fn expose(&self) -> Result<()> {
        Err(ConsumerError::NotSupported("exposing a Thing over GATT".into()))
    }

    fn affordance(&self, kind: AffordanceKind, name: &str) -> Result<&Affordance> {
        self.td.affordance(kind, name).ok_or_else(|| ConsumerError::UnknownAffordance { kind, name: name.to_string() })
    }

    fn declaration_order<'a>(&self, names: impl Iterator<Item = &'a str>) -> Vec<String> {
        let mut names: Vec<&str> = names.collect();
        let mut order: Vec<String> = Vec::with_capacity(names.len());
        for declared in self.td.properties.keys() {
            if let Some(i) = names.iter().position(|n| n == declared) {
                names.remove(i);
                order.push(declared.clone());
            }
        }
        order.extend(names.into_iter().map(String::from));
        order
    }

    fn read_in_order(&self, names: Vec<String>) -> Result<IndexMap<String, Value>> {
        if names.is_empty() {
            return Ok(IndexMap::new());
        }
        let mut st = self.state.lock();
        self.call(&mut st, |st| {
            let mut values = IndexMap::new();
            for name in names {
                let step = self
                    .resolve(AffordanceKind::Property, &name, WotOperation::ReadProperty)
                    .and_then(|req| self.read_req(st, &req));
                match step {
                    Ok(v) => {
                        values.insert(name, v);
                    }
                    Err(e) => {
                        let completed = values.keys().cloned().collect();
                        return Err(partial(name, completed, values, e));
                    }
                }
            }
            Ok(values)
        })
    }

    fn read_req(&self, st: &mut ThingState, req: &ResolvedRequest) -> Result<Value> {
        let codec = self.codecs.lookup(&req.content_type)?;
        let payload = self.operation(st, |t| Ok(t.read(&req.uri)?))?;
        Ok(codec.decode(payload.as_bytes(), req.spec.as_ref())?)
    }

    fn write_req(&self, st: &mut ThingState, req: &ResolvedRequest, value: &Value) -> Result<()> {
        let codec = self.codecs.lookup(&req.content_type)?;
        let payload = codec.encode(value, req.spec.as_ref())?;
        let with_response = req.method == GattMethod::Write;
        self.operation(st, |t| {
            t.write(&req.uri, payload.as_bytes(), with_response)?;
            Ok(())
        })
    }

    fn open(&self, st: &mut ThingState) -> Result<()> {
        let device = self.device()?;
        self.transport.connect(device)?;
        match self.transport.discover_gatt(device) {
            Ok(tree) => {
                st.tree = Some(tree);
                Ok(())
            }
            Err(e) => {
                let _ = self.transport.disconnect(device);
                Err(e.into())
            }
        }
    }

    fn ensure_connected(&self, st: &mut ThingState) -> Result<()> {
        if self.transport.is_connected(self.device()?) {
            return Ok(());
        }
        self.open(st)
    }

    fn release(&self, st: &ThingState, scope: Scope, opened: bool) -> bool {
        if !st.subscriptions.is_empty() {
            return false;
        }
        match (self.policy, scope) {
            (ConnectionPolicy::KeepConnected, _) => false,
            (ConnectionPolicy::ReconnectPerOperation, Scope::Operation) => true,
            (ConnectionPolicy::DisconnectAfter, Scope::Call) => opened,
            _ => false,
        }
    }

    /// Brackets one public call.
    fn call<T>(&self, st: &mut ThingState, f: impl FnOnce(&mut ThingState) -> Result<T>) -> Result<T> {
        let device = self.device()?;
        let was_connected = self.transport.is_connected(device);
        let result = f(st);
        self.finish(st, Scope::Call, !was_connected, device, result)
    }

    /// Brackets one GATT operation.
    fn operation<T>(&self, st: &mut ThingState, f: impl FnOnce(&dyn GattTransport) -> Result<T>) -> Result<T> {
        let device = self.device()?;
        self.ensure_connected(st)?;
        let result = f(self.transport.as_ref());
        self.finish(st, Scope::Operation, true, device, result)
    }

    fn finish<T>(
        &self,
        st: &mut ThingState,
        scope: Scope,
        opened: bool,
        device: MacAddress,
        result: Result<T>,
    ) -> Result<T> {
        if self.release(st, scope, opened) && self.transport.is_connected(device) {
            let closed = self.transport.disconnect(device);
            if result.is_ok() {
                closed?;
            }
        }
        result
    }
}

fn partial(name: String, completed: Vec<String>, values: IndexMap<String, Value>, e: ConsumerError) -> ConsumerError {
    ConsumerError::PartialFailure(Box::new(PartialFailure { name, completed, values, source: e }))
}
