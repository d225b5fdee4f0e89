//! JSON description of a simulated network.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "clock": "virtual",
//!   "processingDelayMs": 0,
//!   "devices": [{
//!     "mac": "BE-58-30-00-CC-11",
//!     "advertisingIntervalMs": 100,
//!     "latencyMs": { "connect": 5, "read": 2 },
//!     "services": {
//!       "fff0": { "fff3": { "valueHex": "", "allowed": ["write"] } }
//!     }
//!   }]
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::sim::{SimCharacteristic, SimLatency, SimNetwork, SimOptions, SimPeripheral};
use super::TransportError;
use crate::binding::GattMethod;
use crate::uri::{MacAddress, Uuid128};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    #[default]
    Virtual,
    Real,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default)]
    pub processing_delay_ms: f64,
    pub devices: Vec<DeviceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DeviceConfig {
    pub mac: String,
    pub advertising_interval_ms: f64,
    #[serde(default = "yes")]
    pub connectable: bool,
    #[serde(default)]
    pub latency_ms: LatencyConfig,
    /// Service UUID → characteristic UUID → characteristic. Keys may be
    /// 4-digit short forms.
    #[serde(default)]
    pub services: BTreeMap<String, BTreeMap<String, CharacteristicConfig>>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyConfig {
    pub connect: f64,
    pub disconnect: f64,
    pub discover: f64,
    pub read: f64,
    pub write: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CharacteristicConfig {
    #[serde(default)]
    pub value_hex: String,
    pub allowed: Vec<String>,
    #[serde(default)]
    pub notify_sequence_hex: Vec<String>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, TransportError> {
        serde_json::from_str(text).map_err(|e| TransportError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TransportError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn options(&self) -> Result<SimOptions, TransportError> {
        Ok(SimOptions {
            seed: self.seed,
            virtual_clock: self.clock == ClockMode::Virtual,
            processing_delay: millis(self.processing_delay_ms, "processingDelayMs")?,
        })
    }

    pub fn peripherals(&self) -> Result<Vec<SimPeripheral>, TransportError> {
        self.devices.iter().map(DeviceConfig::peripheral).collect()
    }

    /// Builds the network, overriding the configured clock when `clock` is set.
    pub fn build(&self, clock: Option<ClockMode>) -> Result<SimNetwork, TransportError> {
        let mut options = self.options()?;
        if let Some(mode) = clock {
            options.virtual_clock = mode == ClockMode::Virtual;
        }
        let net = SimNetwork::new(options);
        for p in self.peripherals()? {
            net.define(p)?;
        }
        Ok(net)
    }
}

impl DeviceConfig {
    pub fn peripheral(&self) -> Result<SimPeripheral, TransportError> {
        let mac: MacAddress = self.mac.parse().map_err(invalid)?;
        let l = &self.latency_ms;
        let latency = SimLatency {
            connect: millis(l.connect, "latencyMs.connect")?,
            disconnect: millis(l.disconnect, "latencyMs.disconnect")?,
            discover: millis(l.discover, "latencyMs.discover")?,
            read: millis(l.read, "latencyMs.read")?,
            write: millis(l.write, "latencyMs.write")?,
        };
        let interval = millis(self.advertising_interval_ms, "advertisingIntervalMs")?;
        let mut p = SimPeripheral::new(mac, interval).connectable(self.connectable).latency(latency);
        for (svc, chars) in &self.services {
            let svc = Uuid128::parse_any(svc).map_err(invalid)?;
            for (uuid, c) in chars {
                let uuid = Uuid128::parse_any(uuid).map_err(invalid)?;
                let allowed = c
                    .allowed
                    .iter()
                    .map(|m| m.parse::<GattMethod>().map_err(invalid))
                    .collect::<Result<Vec<_>, _>>()?;
                let seq = c.notify_sequence_hex.iter().map(|h| hex_bytes(h)).collect::<Result<Vec<_>, _>>()?;
                let sim = SimCharacteristic::new(hex_bytes(&c.value_hex)?, allowed).with_notify_sequence(seq);
                p = p.characteristic(svc, uuid, sim);
            }
        }
        Ok(p)
    }
}

fn invalid(e: impl std::fmt::Display) -> TransportError {
    TransportError::InvalidConfig(e.to_string())
}

fn hex_bytes(s: &str) -> Result<Vec<u8>, TransportError> {
    hex::decode(s).map_err(|e| TransportError::InvalidConfig(format!("bad hex {s:?}: {e}")))
}

fn millis(ms: f64, field: &str) -> Result<Duration, TransportError> {
    if !ms.is_finite() || ms < 0.0 {
        return Err(TransportError::InvalidConfig(format!("{field} must be a non-negative number of milliseconds")));
    }
    Ok(Duration::from_secs_f64(ms / 1000.0))
}
