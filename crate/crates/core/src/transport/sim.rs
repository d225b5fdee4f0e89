//! Deterministic in-process GATT peripherals.
//!
//! A [`SimNetwork`] holds peripheral definitions and the radio environment;
//! each [`SimCentral`] obtained from it is an independent GATT client.
//!
//! Discovery follows a uniform phase model: a scanning central first observes
//! a peripheral after a delay drawn uniformly from `[0, advertising_interval]`
//! (seeded RNG), plus a fixed processing delay. The reference point is the
//! later of scan start and the moment the peripheral last became free to
//! advertise. Per-operation latencies are configured per peripheral.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use parking_lot::{FairMutex, Mutex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    CharacteristicInfo, Clock, GattTransport, GattTree, NotificationSink, RealClock, Session, SubscriptionHandle,
    TransportError, VirtualClock, WriteAck, DEFAULT_CONNECT_TIMEOUT,
};
use crate::binding::GattMethod;
use crate::codec::{Payload, MAX_ATT_VALUE_LEN};
use crate::uri::{GattUri, MacAddress, Uuid128};

/// Fixed service times of a simulated peripheral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimLatency {
    pub connect: Duration,
    pub disconnect: Duration,
    pub discover: Duration,
    pub read: Duration,
    /// Confirmation delay of writes with response.
    pub write: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimCharacteristic {
    pub value: Vec<u8>,
    pub allowed: BTreeSet<GattMethod>,
    /// Values emitted, in order, by [`SimNetwork::fire_notification`].
    pub notify_sequence: Vec<Vec<u8>>,
}

impl SimCharacteristic {
    pub fn new(value: impl Into<Vec<u8>>, allowed: impl IntoIterator<Item = GattMethod>) -> Self {
        SimCharacteristic { value: value.into(), allowed: allowed.into_iter().collect(), notify_sequence: Vec::new() }
    }

    pub fn with_notify_sequence(mut self, seq: impl IntoIterator<Item = Vec<u8>>) -> Self {
        self.notify_sequence = seq.into_iter().collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPeripheral {
    pub device_id: MacAddress,
    pub advertising_interval: Duration,
    pub connectable: bool,
    pub latency: SimLatency,
    pub services: BTreeMap<Uuid128, BTreeMap<Uuid128, SimCharacteristic>>,
}

impl SimPeripheral {
    pub fn new(device_id: MacAddress, advertising_interval: Duration) -> Self {
        SimPeripheral {
            device_id,
            advertising_interval,
            connectable: true,
            latency: SimLatency::default(),
            services: BTreeMap::new(),
        }
    }

    pub fn connectable(mut self, connectable: bool) -> Self {
        self.connectable = connectable;
        self
    }

    pub fn latency(mut self, latency: SimLatency) -> Self {
        self.latency = latency;
        self
    }

    pub fn characteristic(mut self, service: Uuid128, characteristic: Uuid128, c: SimCharacteristic) -> Self {
        self.services.entry(service).or_default().insert(characteristic, c);
        self
    }

    fn check(&self) -> Result<(), TransportError> {
        let invalid = |why: String| Err(TransportError::InvalidConfig(format!("{}: {why}", self.device_id)));
        if self.advertising_interval.is_zero() {
            return invalid("advertising interval must be positive".into());
        }
        for (svc, chars) in &self.services {
            for (uuid, c) in chars {
                let too_long = std::iter::once(&c.value).chain(&c.notify_sequence).any(|v| v.len() > MAX_ATT_VALUE_LEN);
                if too_long {
                    return invalid(format!("{svc}/{uuid} holds a value longer than {MAX_ATT_VALUE_LEN} octets"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub seed: u64,
    pub virtual_clock: bool,
    /// Added to every discovery delay.
    pub processing_delay: Duration,
}

impl SimOptions {
    pub fn virtual_time(seed: u64) -> Self {
        SimOptions { seed, virtual_clock: true, processing_delay: Duration::ZERO }
    }

    pub fn real_time(seed: u64) -> Self {
        SimOptions { seed, virtual_clock: false, processing_delay: Duration::ZERO }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteRecord {
    pub at: Duration,
    pub payload: Vec<u8>,
    pub with_response: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    StartDiscovery,
    StopDiscovery,
    Connect,
    Disconnect,
    DiscoverGatt,
    Read,
    Write,
    Subscribe,
    Unsubscribe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub at: Duration,
    pub central: u64,
    pub kind: TraceKind,
    pub device: Option<MacAddress>,
}

struct Subscriber {
    id: u64,
    tx: mpsc::Sender<Payload>,
}

struct CharState {
    value: Vec<u8>,
    allowed: BTreeSet<GattMethod>,
    write_log: Vec<WriteRecord>,
    script: VecDeque<Vec<u8>>,
    subscribers: Vec<Subscriber>,
}

impl CharState {
    fn deliver(&mut self, value: Vec<u8>) -> usize {
        let payload = Payload::new(value.clone()).expect("checked at definition");
        self.value = value;
        self.subscribers.iter().filter(|s| s.tx.send(payload.clone()).is_ok()).count()
    }
}

struct DeviceState {
    connected_to: Option<u64>,
    available_since: Duration,
    chars: BTreeMap<(Uuid128, Uuid128), CharState>,
}

struct Device {
    advertising_interval: Duration,
    connectable: bool,
    latency: SimLatency,
    /// Serializes operations on this device in arrival order.
    ops: FairMutex<()>,
    state: Mutex<DeviceState>,
}

struct Network {
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha8Rng>,
    processing_delay: Duration,
    devices: Mutex<BTreeMap<MacAddress, Arc<Device>>>,
    trace: Mutex<Vec<TraceEvent>>,
    next_id: AtomicU64,
}

impl Network {
    fn device(&self, mac: MacAddress) -> Option<Arc<Device>> {
        self.devices.lock().get(&mac).cloned()
    }

    fn lookup(&self, uri: &GattUri) -> Result<Arc<Device>, TransportError> {
        let device = self.device(uri.device).ok_or(TransportError::NotFound(uri.device))?;
        if !device.state.lock().chars.contains_key(&(uri.service, uri.characteristic)) {
            return Err(TransportError::NoSuchAttribute(uri.to_string()));
        }
        Ok(device)
    }

    fn next_id(&self) -> u64 {
        self.next_id.fetch_add(1, Ordering::SeqCst)
    }

    fn record(&self, central: u64, kind: TraceKind, device: Option<MacAddress>) {
        let at = self.clock.now();
        self.trace.lock().push(TraceEvent { at, central, kind, device });
    }

    fn phase_delay(&self, interval: Duration) -> Duration {
        let secs = self.rng.lock().gen_range(0.0..=interval.as_secs_f64());
        Duration::from_secs_f64(secs) + self.processing_delay
    }
}

/// Handle to a simulated radio environment. Clones share the same network.
#[derive(Clone)]
pub struct SimNetwork {
    inner: Arc<Network>,
}

impl SimNetwork {
    pub fn new(options: SimOptions) -> Self {
        let clock: Arc<dyn Clock> =
            if options.virtual_clock { Arc::new(VirtualClock::new()) } else { Arc::new(RealClock::new()) };
        SimNetwork {
            inner: Arc::new(Network {
                clock,
                rng: Mutex::new(ChaCha8Rng::seed_from_u64(options.seed)),
                processing_delay: options.processing_delay,
                devices: Mutex::new(BTreeMap::new()),
                trace: Mutex::new(Vec::new()),
                next_id: AtomicU64::new(1),
            }),
        }
    }

    /// Adds a peripheral; it starts advertising immediately.
    pub fn define(&self, peripheral: SimPeripheral) -> Result<(), TransportError> {
        peripheral.check()?;
        let mut devices = self.inner.devices.lock();
        if devices.contains_key(&peripheral.device_id) {
            return Err(TransportError::DuplicateDevice(peripheral.device_id));
        }
        let chars = peripheral
            .services
            .iter()
            .flat_map(|(svc, chars)| {
                chars.iter().map(move |(uuid, c)| {
                    let state = CharState {
                        value: c.value.clone(),
                        allowed: c.allowed.clone(),
                        write_log: Vec::new(),
                        script: c.notify_sequence.iter().cloned().collect(),
                        subscribers: Vec::new(),
                    };
                    ((*svc, *uuid), state)
                })
            })
            .collect();
        devices.insert(
            peripheral.device_id,
            Arc::new(Device {
                advertising_interval: peripheral.advertising_interval,
                connectable: peripheral.connectable,
                latency: peripheral.latency,
                ops: FairMutex::new(()),
                state: Mutex::new(DeviceState { connected_to: None, available_since: self.inner.clock.now(), chars }),
            }),
        );
        Ok(())
    }

    pub fn central(&self) -> SimCentral {
        self.central_with_timeout(DEFAULT_CONNECT_TIMEOUT)
    }

    pub fn central_with_timeout(&self, timeout: Duration) -> SimCentral {
        SimCentral {
            id: self.inner.next_id(),
            net: self.inner.clone(),
            timeout,
            state: Mutex::new(CentralState::default()),
        }
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        self.inner.clock.clone()
    }

    pub fn devices(&self) -> Vec<MacAddress> {
        self.inner.devices.lock().keys().copied().collect()
    }

    pub fn is_connected(&self, device: MacAddress) -> bool {
        self.inner.device(device).is_some_and(|d| d.state.lock().connected_to.is_some())
    }

    pub fn write_log(&self, uri: &GattUri) -> Result<Vec<WriteRecord>, TransportError> {
        self.with_char(uri, |c| c.write_log.clone())
    }

    pub fn value(&self, uri: &GattUri) -> Result<Vec<u8>, TransportError> {
        self.with_char(uri, |c| c.value.clone())
    }

    /// Changes a value from the peripheral side without notifying.
    pub fn set_value(&self, uri: &GattUri, value: Vec<u8>) -> Result<(), TransportError> {
        if value.len() > MAX_ATT_VALUE_LEN {
            return Err(TransportError::ValueTooLong { len: value.len() });
        }
        self.with_char(uri, |c| c.value = value)
    }

    /// Emits the next scripted notification value. Returns the number of
    /// subscribers it was queued for, or `None` once the script is exhausted.
    pub fn fire_notification(&self, uri: &GattUri) -> Result<Option<usize>, TransportError> {
        self.with_char(uri, |c| c.script.pop_front().map(|v| c.deliver(v)))
    }

    /// Emits every remaining scripted value; returns how many were emitted.
    pub fn fire_all(&self, uri: &GattUri) -> Result<usize, TransportError> {
        let mut fired = 0;
        while self.fire_notification(uri)?.is_some() {
            fired += 1;
        }
        Ok(fired)
    }

    /// Pushes an arbitrary value to subscribers, updating the stored value.
    pub fn notify(&self, uri: &GattUri, value: Vec<u8>) -> Result<usize, TransportError> {
        if value.len() > MAX_ATT_VALUE_LEN {
            return Err(TransportError::ValueTooLong { len: value.len() });
        }
        self.with_char(uri, |c| c.deliver(value))
    }

    pub fn trace(&self) -> Vec<TraceEvent> {
        self.inner.trace.lock().clone()
    }

    pub fn clear_trace(&self) {
        self.inner.trace.lock().clear();
    }

    fn with_char<T>(&self, uri: &GattUri, f: impl FnOnce(&mut CharState) -> T) -> Result<T, TransportError> {
        let device = self.inner.lookup(uri)?;
        let mut state = device.state.lock();
        let c = state
            .chars
            .get_mut(&(uri.service, uri.characteristic))
            .ok_or_else(|| TransportError::NoSuchAttribute(uri.to_string()))?;
        Ok(f(c))
    }
}

struct Worker {
    uri: GattUri,
    active: Arc<AtomicBool>,
    thread: JoinHandle<()>,
}

impl Worker {
    fn stop(self, id: u64, device: &Device) {
        if let Some(c) = device.state.lock().chars.get_mut(&(self.uri.service, self.uri.characteristic)) {
            c.subscribers.retain(|s| s.id != id);
        }
        self.active.store(false, Ordering::SeqCst);
        // unsubscribing from inside the sink: the loop exits once the sink returns
        if thread::current().id() != self.thread.thread().id() {
            let _ = self.thread.join();
        }
    }
}

#[derive(Default)]
struct CentralState {
    scan_started: Option<Duration>,
    observed: HashMap<MacAddress, Duration>,
    sessions: BTreeMap<MacAddress, Session>,
    workers: HashMap<u64, Worker>,
}

/// A GATT client attached to a [`SimNetwork`].
pub struct SimCentral {
    id: u64,
    net: Arc<Network>,
    timeout: Duration,
    state: Mutex<CentralState>,
}

impl SimCentral {
    pub fn id(&self) -> u64 {
        self.id
    }

    fn begin_scan(&self) -> bool {
        let mut st = self.state.lock();
        if st.scan_started.is_some() {
            return false;
        }
        st.scan_started = Some(self.net.clock.now());
        drop(st);
        self.net.record(self.id, TraceKind::StartDiscovery, None);
        true
    }

    fn end_scan(&self) {
        self.state.lock().scan_started = None;
        self.net.record(self.id, TraceKind::StopDiscovery, None);
    }

    fn establish(&self, mac: MacAddress) -> Result<Session, TransportError> {
        let clock = &self.net.clock;
        let Some(device) = self.net.device(mac) else {
            clock.sleep(self.timeout);
            return Err(TransportError::NotFound(mac));
        };
        let observed_at = {
            let mut st = self.state.lock();
            match st.observed.get(&mac) {
                Some(t) => *t,
                None => {
                    let since = device.state.lock().available_since;
                    let reference = st.scan_started.unwrap_or_default().max(since);
                    let t = reference + self.net.phase_delay(device.advertising_interval);
                    st.observed.insert(mac, t);
                    t
                }
            }
        };
        let wait = observed_at.saturating_sub(clock.now());
        if wait > self.timeout {
            clock.sleep(self.timeout);
            return Err(TransportError::Timeout(self.timeout));
        }
        clock.sleep(wait);
        if !device.connectable {
            return Err(TransportError::NotConnectable(mac));
        }
        let _op = device.ops.lock();
        {
            let mut ds = device.state.lock();
            match ds.connected_to {
                Some(c) if c != self.id => return Err(TransportError::Busy(mac)),
                _ => ds.connected_to = Some(self.id),
            }
        }
        clock.sleep(device.latency.connect);
        let session = Session { device: mac, established_at: clock.now() };
        self.state.lock().sessions.insert(mac, session);
        self.net.record(self.id, TraceKind::Connect, Some(mac));
        Ok(session)
    }

    fn require_session(&self, mac: MacAddress) -> Result<(), TransportError> {
        if self.state.lock().sessions.contains_key(&mac) {
            Ok(())
        } else {
            Err(TransportError::NotConnected(mac))
        }
    }

    /// Session, attribute and permission checks shared by the GATT methods.
    fn gate(&self, uri: &GattUri, method: GattMethod) -> Result<Arc<Device>, TransportError> {
        self.require_session(uri.device)?;
        let device = self.net.lookup(uri)?;
        let permitted = device.state.lock().chars[&(uri.service, uri.characteristic)].allowed.contains(&method);
        if !permitted {
            return Err(TransportError::MethodNotPermitted { method, uri: uri.to_string() });
        }
        Ok(device)
    }

    fn release(&self, mac: MacAddress, device: &Device) {
        let workers: Vec<(u64, Worker)> = {
            let mut st = self.state.lock();
            let ids: Vec<u64> = st.workers.iter().filter(|(_, w)| w.uri.device == mac).map(|(id, _)| *id).collect();
            ids.into_iter().filter_map(|id| st.workers.remove(&id).map(|w| (id, w))).collect()
        };
        for (id, w) in workers {
            w.stop(id, device);
        }
    }
}

impl GattTransport for SimCentral {
    fn start_discovery(&self) -> Result<(), TransportError> {
        self.begin_scan();
        Ok(())
    }

    fn stop_discovery(&self) -> Result<(), TransportError> {
        if self.state.lock().scan_started.is_some() {
            self.end_scan();
        }
        Ok(())
    }

    fn connect(&self, device: MacAddress) -> Result<Session, TransportError> {
        if let Some(s) = self.state.lock().sessions.get(&device) {
            return Ok(*s);
        }
        let auto_scan = self.begin_scan();
        let result = self.establish(device);
        if auto_scan {
            self.end_scan();
        }
        result
    }

    fn disconnect(&self, mac: MacAddress) -> Result<(), TransportError> {
        self.require_session(mac)?;
        let device = self.net.device(mac).ok_or(TransportError::NotFound(mac))?;
        self.release(mac, &device);
        {
            let _op = device.ops.lock();
            self.net.clock.sleep(device.latency.disconnect);
            let mut ds = device.state.lock();
            if ds.connected_to == Some(self.id) {
                ds.connected_to = None;
                ds.available_since = self.net.clock.now();
            }
        }
        let mut st = self.state.lock();
        st.sessions.remove(&mac);
        st.observed.remove(&mac);
        drop(st);
        self.net.record(self.id, TraceKind::Disconnect, Some(mac));
        Ok(())
    }

    fn is_connected(&self, device: MacAddress) -> bool {
        self.state.lock().sessions.contains_key(&device)
    }

    fn discover_gatt(&self, mac: MacAddress) -> Result<GattTree, TransportError> {
        self.require_session(mac)?;
        let device = self.net.device(mac).ok_or(TransportError::NotFound(mac))?;
        let _op = device.ops.lock();
        self.net.clock.sleep(device.latency.discover);
        let mut tree = GattTree::default();
        for ((svc, uuid), c) in &device.state.lock().chars {
            tree.services.entry(*svc).or_default().push(CharacteristicInfo { uuid: *uuid, allowed: c.allowed.clone() });
        }
        self.net.record(self.id, TraceKind::DiscoverGatt, Some(mac));
        Ok(tree)
    }

    fn read(&self, uri: &GattUri) -> Result<Payload, TransportError> {
        let device = self.gate(uri, GattMethod::Read)?;
        let _op = device.ops.lock();
        self.net.clock.sleep(device.latency.read);
        let value = device.state.lock().chars[&(uri.service, uri.characteristic)].value.clone();
        self.net.record(self.id, TraceKind::Read, Some(uri.device));
        Ok(Payload::new(value).expect("stored values respect the ATT limit"))
    }

    fn write(&self, uri: &GattUri, value: &[u8], with_response: bool) -> Result<WriteAck, TransportError> {
        let method = if with_response { GattMethod::Write } else { GattMethod::WriteWithoutResponse };
        let device = self.gate(uri, method)?;
        if value.len() > MAX_ATT_VALUE_LEN {
            return Err(TransportError::ValueTooLong { len: value.len() });
        }
        let _op = device.ops.lock();
        {
            let mut ds = device.state.lock();
            let c = ds.chars.get_mut(&(uri.service, uri.characteristic)).expect("gated");
            c.value = value.to_vec();
            c.write_log.push(WriteRecord { at: self.net.clock.now(), payload: value.to_vec(), with_response });
        }
        self.net.record(self.id, TraceKind::Write, Some(uri.device));
        if with_response {
            self.net.clock.sleep(device.latency.write);
            Ok(WriteAck::Confirmed)
        } else {
            Ok(WriteAck::Sent)
        }
    }

    fn subscribe(&self, uri: &GattUri, mut sink: NotificationSink) -> Result<SubscriptionHandle, TransportError> {
        let device = self.gate(uri, GattMethod::Notify)?;
        let id = self.net.next_id();
        let (tx, rx) = mpsc::channel::<Payload>();
        let active = Arc::new(AtomicBool::new(true));
        let flag = active.clone();
        let thread = thread::Builder::new()
            .name(format!("sim-notify-{id}"))
            .spawn(move || {
                for payload in rx {
                    if !flag.load(Ordering::SeqCst) {
                        break;
                    }
                    if catch_unwind(AssertUnwindSafe(|| sink(payload))).is_err() {
                        log::warn!("notification sink of subscription {id} panicked");
                    }
                }
            })
            .map_err(|e| TransportError::Unavailable(format!("cannot spawn delivery thread: {e}")))?;
        device
            .state
            .lock()
            .chars
            .get_mut(&(uri.service, uri.characteristic))
            .expect("gated")
            .subscribers
            .push(Subscriber { id, tx });
        self.state.lock().workers.insert(id, Worker { uri: *uri, active, thread });
        self.net.record(self.id, TraceKind::Subscribe, Some(uri.device));
        Ok(SubscriptionHandle { id, uri: *uri })
    }

    fn unsubscribe(&self, handle: SubscriptionHandle) -> Result<(), TransportError> {
        let worker =
            self.state.lock().workers.remove(&handle.id).ok_or(TransportError::UnknownSubscription(handle.id))?;
        if let Some(device) = self.net.device(handle.uri.device) {
            worker.stop(handle.id, &device);
        }
        self.net.record(self.id, TraceKind::Unsubscribe, Some(handle.uri.device));
        Ok(())
    }

    fn clock(&self) -> Arc<dyn Clock> {
        self.net.clock.clone()
    }
}

impl Drop for SimCentral {
    /// Frees every peripheral this central still holds.
    fn drop(&mut self) {
        let sessions: Vec<MacAddress> = self.state.lock().sessions.keys().copied().collect();
        for mac in sessions {
            if let Some(device) = self.net.device(mac) {
                self.release(mac, &device);
                let mut ds = device.state.lock();
                if ds.connected_to == Some(self.id) {
                    ds.connected_to = None;
                    ds.available_since = self.net.clock.now();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests;
