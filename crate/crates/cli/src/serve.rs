//! `sim serve`: one central on a simulated network, driven by JSON requests,
//! one per line. Every request gets exactly one response line.
//!
//! ```text
//! {"op":"connect","device":"BE-58-30-00-CC-11"}      → {"ok":true}
//! {"op":"read","uri":"gatt://BE-58-30-00-CC-11/fff0/fff1"} → {"ok":true,"valueHex":"01"}
//! {"op":"bogus"}                                       → {"ok":false,"error":"..."}
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use serde_json::{json, Value};

use wot_gatt::transport::sim::SimNetwork;
use wot_gatt::transport::{GattTransport, SubscriptionHandle};
use wot_gatt::uri::{GattUri, MacAddress};

#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase", deny_unknown_fields)]
enum Request {
    Devices,
    Connect {
        device: String,
    },
    Disconnect {
        device: String,
    },
    Discover {
        device: String,
    },
    Read {
        uri: String,
    },
    #[serde(rename_all = "camelCase")]
    Write {
        uri: String,
        value_hex: String,
        #[serde(default = "yes")]
        with_response: bool,
    },
    Subscribe {
        uri: String,
    },
    Unsubscribe {
        id: u64,
    },
    /// Notifications received since the last poll.
    Poll,
    /// Emits the next scripted notification of a characteristic.
    Fire {
        uri: String,
    },
    /// Peripheral-side view of a characteristic.
    Inspect {
        uri: String,
    },
}

fn yes() -> bool {
    true
}

type Inbox = Arc<Mutex<Vec<Value>>>;

pub(crate) fn serve(
    net: &SimNetwork,
    central: Arc<dyn GattTransport>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> anyhow::Result<()> {
    let inbox: Inbox = Arc::default();
    let mut subscriptions: HashMap<u64, SubscriptionHandle> = HashMap::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => handle(net, central.as_ref(), req, &inbox, &mut subscriptions)
                .unwrap_or_else(|e| json!({"ok": false, "error": e})),
            Err(e) => json!({"ok": false, "error": format!("bad request: {e}")}),
        };
        writeln!(out, "{response}")?;
        out.flush()?;
    }
    Ok(())
}

fn handle(
    net: &SimNetwork,
    central: &dyn GattTransport,
    req: Request,
    inbox: &Inbox,
    subscriptions: &mut HashMap<u64, SubscriptionHandle>,
) -> Result<Value, String> {
    let e = |e: wot_gatt::transport::TransportError| e.to_string();
    let mac = |s: &str| s.parse::<MacAddress>().map_err(|e| e.to_string());
    let gatt = |s: &str| s.parse::<GattUri>().map_err(|e| e.to_string());
    Ok(match req {
        Request::Devices => {
            let list: Vec<String> = net.devices().iter().map(|d| d.to_dashed()).collect();
            json!({"ok": true, "devices": list})
        }
        Request::Connect { device } => {
            central.connect(mac(&device)?).map_err(e)?;
            json!({"ok": true})
        }
        Request::Disconnect { device } => {
            let device = mac(&device)?;
            central.disconnect(device).map_err(e)?;
            subscriptions.retain(|_, h| h.uri.device != device);
            json!({"ok": true})
        }
        Request::Discover { device } => {
            let tree = central.discover_gatt(mac(&device)?).map_err(e)?;
            let services: serde_json::Map<String, Value> = tree
                .services
                .iter()
                .map(|(svc, chars)| {
                    let list: Vec<Value> = chars
                        .iter()
                        .map(|c| {
                            let allowed: Vec<&str> = c.allowed.iter().map(|m| m.as_str()).collect();
                            json!({"uuid": c.uuid.to_string(), "allowed": allowed})
                        })
                        .collect();
                    (svc.to_string(), Value::Array(list))
                })
                .collect();
            json!({"ok": true, "services": services})
        }
        Request::Read { uri } => {
            let uri = gatt(&uri)?;
            let value = central.read(&uri).map_err(e)?;
            json!({"ok": true, "valueHex": value.to_hex()})
        }
        Request::Write { uri, value_hex, with_response } => {
            let uri = gatt(&uri)?;
            let bytes = hex::decode(&value_hex).map_err(|err| format!("bad hex {value_hex:?}: {err}"))?;
            central.write(&uri, &bytes, with_response).map_err(e)?;
            json!({"ok": true})
        }
        Request::Subscribe { uri } => {
            let uri = gatt(&uri)?;
            let inbox = inbox.clone();
            let text = uri.to_string();
            let handle = central
                .subscribe(
                    &uri,
                    Box::new(move |p| {
                        inbox.lock().expect("inbox lock").push(json!({"uri": text, "valueHex": p.to_hex()}))
                    }),
                )
                .map_err(e)?;
            let id = handle.id;
            subscriptions.insert(id, handle);
            json!({"ok": true, "id": id})
        }
        Request::Unsubscribe { id } => {
            let handle = subscriptions.remove(&id).ok_or_else(|| format!("unknown subscription {id}"))?;
            central.unsubscribe(handle).map_err(e)?;
            json!({"ok": true})
        }
        Request::Poll => {
            let list = std::mem::take(&mut *inbox.lock().expect("inbox lock"));
            json!({"ok": true, "notifications": list})
        }
        Request::Fire { uri } => {
            let uri = gatt(&uri)?;
            let delivered = net.fire_notification(&uri).map_err(e)?;
            json!({"ok": true, "delivered": delivered})
        }
        Request::Inspect { uri } => {
            let uri = gatt(&uri)?;
            let value = net.value(&uri).map_err(e)?;
            let writes: Vec<Value> = net
                .write_log(&uri)
                .map_err(e)?
                .into_iter()
                .map(|w| {
                    json!({
                        "atMs": w.at.as_secs_f64() * 1000.0,
                        "valueHex": hex::encode(w.payload),
                        "withResponse": w.with_response,
                    })
                })
                .collect();
            json!({"ok": true, "valueHex": hex::encode(value), "writes": writes})
        }
    })
}
