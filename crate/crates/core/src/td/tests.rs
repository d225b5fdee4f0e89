use super::*;
use serde_json::json;

const LAMP: &str = include_str!("../../fixtures/lamp.td.json");
const FLOWER: &str = include_str!("../../fixtures/flower-care.td.json");
const ARDUINO: &str = include_str!("../../fixtures/arduino.td.json");

fn doc(extra_root: Value, properties: Value) -> String {
    let mut root = json!({
        "@context": ["https://www.w3.org/2022/wot/td/v1", {"sbo": SBO_NS, "bdo": BDO_NS}],
        "title": "t",
        "properties": properties,
    });
    if let (Value::Object(r), Value::Object(extra)) = (&mut root, extra_root) {
        r.extend(extra);
    }
    root.to_string()
}

fn read_form(href: &str) -> Value {
    json!([{ "href": href, "op": "readproperty", "contentType": BINARY_DATA_STREAM }])
}

#[test]
fn lamp_fixture() {
    let td = parse_td(LAMP).unwrap();
    assert_eq!(td.title, "BLE RGB Controller");
    assert_eq!(td.metadata.gap_role, GapRole::Peripheral);
    assert!(td.metadata.is_connectable);
    assert!(td.metadata.has_gatt_layer);
    assert_eq!(td.metadata.advertising_interval, Some(50.0));

    let power = &td.properties["power"];
    assert_eq!(power.data_type, Some(DataType::String));
    assert_eq!(power.format.as_deref(), Some("hex"));
    let spec = power.bdo.as_ref().unwrap();
    assert_eq!(spec.pattern.as_deref(), Some("7e0004{on}00000000ef"));
    assert_eq!(spec.bytelength, 9);
    let on = &spec.variables["on"];
    assert_eq!(on.data_type, ValueKind::Integer);
    assert_eq!(on.bytelength, 1);
    assert_eq!(on.bounds, Some(Bounds::new(0.0, 1.0)));

    let form = &power.forms[0];
    assert_eq!(form.op, vec![WotOperation::WriteProperty]);
    assert_eq!(form.method_name, Some(GattMethod::Write));
    assert_eq!(form.content_type, "application/x.binary-data-stream");
    assert!(td.extensions.contains_key("securityDefinitions"));
    assert_eq!(validate_td(&td), vec![]);
}

#[test]
fn table_one_defaults() {
    let td = parse_td(&doc(
        json!({}),
        json!({"p": {"type": "integer", "bdo:bytelength": 2, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}}),
    ))
    .unwrap();
    let spec = td.properties["p"].bdo.as_ref().unwrap();
    assert_eq!(spec.bytelength, 2);
    assert!(!spec.signed);
    assert_eq!(spec.endianness, Endianness::Little);
    assert_eq!(spec.offset, 0);
    assert_eq!(spec.scale, 1.0);
    assert_eq!(*spec, BdoSpec::scalar(2));
}

#[test]
fn empty_affordance_maps() {
    let td = parse_td(r#"{"title": "empty", "properties": {}, "actions": {}, "events": {}}"#).unwrap();
    assert_eq!(td.affordances().count(), 0);
    assert_eq!(td.metadata, BleMetadata::default());
    assert!(validate_td(&td).is_empty());
}

#[test]
fn parse_errors() {
    assert!(matches!(parse_td("{not json"), Err(TdError::Malformed(_))));
    assert!(matches!(parse_td("[1, 2]"), Err(TdError::Malformed(_))));
    assert!(matches!(parse_td(&doc(json!({}), json!({"p": {"bdo:bytelength": 1}}))), Err(TdError::MissingRequired(_))));
    assert!(matches!(
        parse_td(&doc(json!({}), json!({"p": {"bdo:bytelength": 1, "forms": []}}))),
        Err(TdError::MissingRequired(_))
    ));
    let no_var = json!({"p": {"bdo:pattern": "aa{x}", "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}});
    assert!(matches!(parse_td(&doc(json!({}), no_var)), Err(TdError::MissingRequired(m)) if m.contains("\"x\"")));
    let wrong_var = json!({"p": {
        "bdo:pattern": "aa{x}",
        "bdo:variable": {"y": {"type": "integer", "bdo:bytelength": 1}},
        "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")
    }});
    assert!(matches!(parse_td(&doc(json!({}), wrong_var)), Err(TdError::MissingRequired(_))));
    assert_eq!(parse_td(&doc(json!({"foo:bar": 1}), json!({}))), Err(TdError::UnknownPrefix("foo:bar".into())));
    assert!(matches!(
        parse_td(&doc(
            json!({}),
            json!({"p": {"ex:thing": 1, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}})
        )),
        Err(TdError::UnknownPrefix(_))
    ));
    assert!(matches!(
        parse_td(&doc(
            json!({}),
            json!({"p": {"forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1", "op": "readproperty", "sbo:methodName": "sbo:teleport"}]}})
        )),
        Err(TdError::InvalidValue(_))
    ));
    assert!(matches!(
        parse_td(&doc(
            json!({}),
            json!({"p": {"bdo:bytelength": 1, "bdo:scale": 0, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}})
        )),
        Err(TdError::Bdo { .. })
    ));
    assert!(matches!(
        parse_td(&doc(
            json!({}),
            json!({"p": {"bdo:pattern": "7e0{x}", "bdo:variable": {"x": {"bdo:bytelength": 1}}, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}})
        )),
        Err(TdError::Bdo { source: CodecError::BadHexPattern(_), .. })
    ));
}

#[test]
fn advertising_interval_units() {
    let with = |interval: Value| {
        let mut extra = json!({"@context": [{"sbo": SBO_NS, "rdf": RDF_NS, "qudt": QUDT_NS}]});
        extra["sbo:hasAdvertisingInterval"] = interval;
        parse_td(&doc(extra, json!({}))).map(|td| td.metadata.advertising_interval)
    };
    assert_eq!(with(json!(50)), Ok(Some(50.0)));
    assert_eq!(with(json!({"rdf:value": 50, "qudt:unit": "qudt:MilliSEC"})), Ok(Some(50.0)));
    assert_eq!(with(json!({"rdf:value": 2, "qudt:unit": "qudt:SEC"})), Ok(Some(2000.0)));
    assert_eq!(with(json!({"rdf:value": 2, "qudt:unit": "qudt:MIN"})), Err(TdError::UnsupportedUnit("MIN".into())));
    assert!(matches!(with(json!(0)), Err(TdError::InvalidValue(_))));
    assert!(matches!(with(json!(-5)), Err(TdError::InvalidValue(_))));
    assert!(matches!(with(json!({"rdf:value": 2})), Err(TdError::MissingRequired(_))));
}

#[test]
fn unknown_terms_are_kept() {
    let td = parse_td(&doc(
        json!({"sbo:hasFancyFeature": true, "id": "urn:dev:1"}),
        json!({"p": {"bdo:bytelength": 1, "bdo:checksum": "crc8", "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}}),
    ))
    .unwrap();
    assert_eq!(td.extensions[&format!("{SBO_NS}hasFancyFeature")], json!(true));
    assert_eq!(td.extensions["id"], json!("urn:dev:1"));
    assert_eq!(td.properties["p"].extensions[&format!("{BDO_NS}checksum")], json!("crc8"));
}

#[test]
fn alternative_prefix_names_resolve() {
    let raw = json!({
        "@context": [{"ble": SBO_NS, "bin": BDO_NS}],
        "title": "t",
        "ble:isConnectable": false,
        "properties": {"p": {
            "bin:bytelength": 2,
            "bin:endianess": "bin:bigEndian",
            "forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1", "op": ["readproperty"], "ble:methodName": "ble:read"}]
        }}
    });
    let td = parse_td(&raw.to_string()).unwrap();
    assert!(!td.metadata.is_connectable);
    assert_eq!(td.properties["p"].bdo.as_ref().unwrap().endianness, Endianness::Big);
    assert_eq!(td.properties["p"].forms[0].method_name, Some(GattMethod::Read));
}

#[test]
fn default_ops_and_content_type() {
    let td = parse_td(&doc(
        json!({}),
        json!({"p": {"bdo:bytelength": 1, "forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1"}]}}),
    ))
    .unwrap();
    let form = &td.properties["p"].forms[0];
    assert_eq!(form.op, vec![WotOperation::ReadProperty, WotOperation::WriteProperty]);
    assert_eq!(form.content_type, BINARY_DATA_STREAM);
}

#[test]
fn hex_string_property() {
    let td = parse_td(FLOWER).unwrap();
    assert_eq!(td.metadata.advertising_interval, Some(2000.0));
    let fw = td.properties["firmware"].bdo.as_ref().unwrap();
    assert_eq!(fw.data_type, ValueKind::HexString);
    assert_eq!(fw.offset, 2);
    let temp = td.properties["temperature"].bdo.as_ref().unwrap();
    assert!(temp.signed);
    assert_eq!(temp.scale, 0.1);
    assert!(validate_td(&td).is_empty());

    let plain_string =
        json!({"p": {"type": "string", "bdo:bytelength": 1, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}});
    assert!(matches!(parse_td(&doc(json!({}), plain_string)), Err(TdError::InvalidValue(_))));
}

#[test]
fn serialization_round_trips_fixtures() {
    for text in [LAMP, FLOWER, ARDUINO] {
        let td = parse_td(text).unwrap();
        let again = parse_td(&td.to_json().to_string()).unwrap();
        assert_eq!(again, td);
    }
}

#[test]
fn arduino_fixture() {
    let td = parse_td(ARDUINO).unwrap();
    assert_eq!(td.metadata.advertising_interval, Some(200.0));
    assert_eq!(td.actions["blink"].forms[0].method_name, Some(GattMethod::WriteWithoutResponse));
    assert_eq!(td.events["temperature"].forms[0].method_name, Some(GattMethod::Notify));
    assert_eq!(td.properties["counter"].bdo.as_ref().unwrap().endianness, Endianness::Big);
    assert!(validate_td(&td).is_empty());
}

mod validation {
    use super::*;

    fn kinds(td: &ThingDescription) -> Vec<DiagnosticKind> {
        validate_td(td).into_iter().map(|d| d.kind).collect()
    }

    #[test]
    fn non_connectable_device() {
        let td = parse_td(&doc(
            json!({"sbo:isConnectable": false}),
            json!({"p": {"bdo:bytelength": 1, "forms": read_form("gatt://AA:BB:CC:DD:EE:FF/fff0/fff1")}}),
        ))
        .unwrap();
        assert_eq!(kinds(&td), vec![DiagnosticKind::ConnectabilityConflict]);
    }

    #[test]
    fn wrong_scheme() {
        let td =
            parse_td(&doc(json!({}), json!({"p": {"bdo:bytelength": 1, "forms": read_form("http://x")}}))).unwrap();
        assert_eq!(kinds(&td), vec![DiagnosticKind::BadUriScheme]);
        let td =
            parse_td(&doc(json!({}), json!({"p": {"bdo:bytelength": 1, "forms": read_form("gatt://x/1/2")}}))).unwrap();
        assert_eq!(kinds(&td), vec![DiagnosticKind::BadUri]);
    }

    #[test]
    fn write_without_encoding() {
        let td = parse_td(&doc(
            json!({}),
            json!({"p": {"forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1", "op": "writeproperty"}]}}),
        ))
        .unwrap();
        assert_eq!(kinds(&td), vec![DiagnosticKind::MissingEncoding]);
    }

    #[test]
    fn warnings_only() {
        let td = parse_td(&doc(
            json!({}),
            json!({
                "a": {"forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1", "op": ["readproperty", "observeproperty"], "contentType": "application/octet-stream"}]},
                "b": {"bdo:bytelength": 1, "forms": read_form("gatt://11:22:33:44:55:66/fff0/fff1")}
            }),
        ))
        .unwrap();
        let diags = validate_td(&td);
        assert_eq!(
            diags.iter().map(|d| d.kind).collect::<Vec<_>>(),
            vec![
                DiagnosticKind::UnsupportedOperation,
                DiagnosticKind::UnexpectedContentType,
                DiagnosticKind::MixedDevices
            ]
        );
        assert!(diags.iter().all(|d| d.severity() == Severity::Warning));
    }

    #[test]
    fn method_conflict() {
        let td = parse_td(&doc(
            json!({}),
            json!({"p": {"bdo:bytelength": 1, "forms": [{"href": "gatt://AA:BB:CC:DD:EE:FF/fff0/fff1", "op": "readproperty", "sbo:methodName": "sbo:write"}]}}),
        ))
        .unwrap();
        assert_eq!(kinds(&td), vec![DiagnosticKind::MethodOpConflict]);
    }
}
