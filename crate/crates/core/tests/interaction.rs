use std::sync::{mpsc, Arc};
use std::time::Duration;

use serde_json::json;

use wot_gatt::binding::GattMethod;
use wot_gatt::consumer::{consume, ConnectionPolicy, ConsumedThing, ConsumerError};
use wot_gatt::td::{parse_td, validate_td};
use wot_gatt::transport::sim::{SimCharacteristic, SimNetwork, SimOptions, SimPeripheral, TraceKind};
use wot_gatt::transport::{GattTransport, SimConfig};
use wot_gatt::uri::{GattUri, MacAddress, Uuid128};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn network() -> SimNetwork {
    SimConfig::load(format!("{FIXTURES}/net.json")).unwrap().build(None).unwrap()
}

fn thing(net: &SimNetwork, fixture: &str, policy: ConnectionPolicy) -> ConsumedThing {
    let text = std::fs::read_to_string(format!("{FIXTURES}/{fixture}")).unwrap();
    let td = parse_td(&text).unwrap();
    assert!(validate_td(&td).is_empty(), "{fixture}: {:?}", validate_td(&td));
    consume(td, Arc::new(net.central()), policy).unwrap()
}

#[test]
fn flower_care_values() {
    let net = network();
    let t = thing(&net, "flower-care.td.json", ConnectionPolicy::KeepConnected);
    let all = t.read_all_properties().unwrap();
    assert_eq!(all["temperature"], json!(25.5));
    assert_eq!(all["moisture"], json!(42));
    assert_eq!(all["firmware"], json!("3233372e31"));
    assert!(matches!(t.write_property("moisture", &json!(1)), Err(ConsumerError::Binding(_))));
}

#[test]
fn arduino_interactions() {
    let net = network();
    let t = thing(&net, "arduino.td.json", ConnectionPolicy::KeepConnected);
    assert_eq!(t.read_property("counter").unwrap(), json!(258));
    t.write_property("counter", &json!(0x1234)).unwrap();
    assert_eq!(t.read_property("counter").unwrap(), json!(0x1234));
    let svc = "19b10000-e8f2-537e-4f6c-d104768a1214";
    let counter: GattUri =
        format!("gatt://24-0A-C4-01-02-03/{svc}/19b10001-e8f2-537e-4f6c-d104768a1214").parse().unwrap();
    assert_eq!(net.value(&counter).unwrap(), vec![0x12, 0x34]);

    t.invoke_action("blink", &json!({"times": 3})).unwrap();
    let blink: GattUri =
        format!("gatt://24-0A-C4-01-02-03/{svc}/19b10002-e8f2-537e-4f6c-d104768a1214").parse().unwrap();
    let log = net.write_log(&blink).unwrap();
    assert_eq!(log[0].payload, vec![0xa5, 0x03, 0x5a]);
    assert!(!log[0].with_response);
    assert!(t.invoke_action("blink", &json!({"times": 11})).is_err());
    assert!(t.invoke_action("blink", &json!({})).is_err());

    let (tx, rx) = mpsc::channel();
    let sub = t.subscribe_event("temperature", move |v| tx.send(v).unwrap()).unwrap();
    let temp: GattUri = format!("gatt://24-0A-C4-01-02-03/{svc}/19b10004-e8f2-537e-4f6c-d104768a1214").parse().unwrap();
    assert_eq!(net.fire_all(&temp).unwrap(), 3);
    let got: Vec<_> = (0..3).map(|_| rx.recv_timeout(Duration::from_secs(2)).unwrap()).collect();
    assert_eq!(got, [json!(25.0), json!(1.0), json!(25.5)]);
    t.unsubscribe_event(sub).unwrap();
}

#[test]
fn lamp_from_config() {
    let net = network();
    let t = thing(&net, "lamp.td.json", ConnectionPolicy::DisconnectAfter);
    t.write_property("power", &json!({"on": 0})).unwrap();
    assert!(!t.is_connected());
    let uri: GattUri = "gatt://BE:58:30:00:CC:11/fff0/fff3".parse().unwrap();
    assert_eq!(hex::encode(&net.write_log(&uri).unwrap()[0].payload), "7e00040000000000ef");
}

#[test]
fn several_devices_on_one_central() {
    let net = network();
    let central: Arc<dyn GattTransport> = Arc::new(net.central());
    let mut things = Vec::new();
    for f in ["lamp.td.json", "flower-care.td.json", "arduino.td.json"] {
        let td = parse_td(&std::fs::read_to_string(format!("{FIXTURES}/{f}")).unwrap()).unwrap();
        let t = consume(td, central.clone(), ConnectionPolicy::KeepConnected).unwrap();
        t.connect().unwrap();
        things.push(t);
    }
    assert!(things.iter().all(|t| t.is_connected()));
    for t in &things {
        t.disconnect().unwrap();
    }
}

#[test]
fn policy_traces() {
    let net = network();
    let connects = |net: &SimNetwork| net.trace().iter().filter(|e| e.kind == TraceKind::Connect).count();
    let keep = thing(&net, "arduino.td.json", ConnectionPolicy::KeepConnected);
    keep.read_property("level").unwrap();
    keep.read_property("level").unwrap();
    assert_eq!(connects(&net), 1);
    keep.disconnect().unwrap();

    net.clear_trace();
    let again = thing(&net, "arduino.td.json", ConnectionPolicy::ReconnectPerOperation);
    again.read_property("level").unwrap();
    again.read_property("level").unwrap();
    let kinds: Vec<TraceKind> = net
        .trace()
        .iter()
        .map(|e| e.kind)
        .filter(|k| matches!(k, TraceKind::Connect | TraceKind::Disconnect))
        .collect();
    assert_eq!(kinds, [TraceKind::Connect, TraceKind::Disconnect, TraceKind::Connect, TraceKind::Disconnect]);
}

#[test]
fn discovery_delay_mean_is_half_the_interval() {
    let mac: MacAddress = "02:00:00:00:00:01".parse().unwrap();
    let net = SimNetwork::new(SimOptions::virtual_time(2024));
    net.define(SimPeripheral::new(mac, Duration::from_millis(2000)).characteristic(
        Uuid128::from_short(0x180f),
        Uuid128::from_short(0x2a19),
        SimCharacteristic::new(vec![1], [GattMethod::Read]),
    ))
    .unwrap();
    let c = net.central();
    let clock = net.clock();
    let mut total = 0.0;
    for _ in 0..1000 {
        let t0 = clock.now();
        c.connect(mac).unwrap();
        let ms = (clock.now() - t0).as_secs_f64() * 1000.0;
        assert!(ms <= 2000.0);
        total += ms;
        c.disconnect(mac).unwrap();
    }
    let mean = total / 1000.0;
    assert!((mean - 1000.0).abs() <= 100.0, "mean {mean}");
}

#[test]
fn concurrent_things_keep_device_order() {
    let net = network();
    let t = Arc::new(thing(&net, "arduino.td.json", ConnectionPolicy::KeepConnected));
    let handles: Vec<_> = (0..8u16)
        .map(|i| {
            let t = t.clone();
            std::thread::spawn(move || t.write_property("counter", &json!(i)).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    let uri: GattUri =
        "gatt://24-0A-C4-01-02-03/19b10000-e8f2-537e-4f6c-d104768a1214/19b10001-e8f2-537e-4f6c-d104768a1214"
            .parse()
            .unwrap();
    let log = net.write_log(&uri).unwrap();
    assert_eq!(log.len(), 8);
    assert!(log.windows(2).all(|w| w[0].at <= w[1].at));
}
