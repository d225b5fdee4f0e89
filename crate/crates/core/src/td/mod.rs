//! Thing Descriptions annotated with the Simple Bluetooth Ontology (`sbo`) and
//! the Binary Data Ontology (`bdo`).
//!
//! Parsing resolves compact IRIs through the prefixes declared in `@context`
//! and builds a [`BdoSpec`] for every affordance carrying `bdo` terms. Terms
//! the model does not know are kept in per-object `extensions` maps.

mod context;
mod validate;

use std::fmt;

use indexmap::IndexMap;
use serde_json::{Map, Number, Value};
use thiserror::Error;

use crate::binding::{GattMethod, WotOperation};
use crate::codec::{
    compile_pattern, placeholder_names, BdoSpec, Bounds, CodecError, Endianness, ValueKind, VariableSpec,
    BINARY_DATA_STREAM,
};

pub use context::{Context, Term, Vocab, BDO_NS, QUDT_NS, RDF_NS, SBO_NS, TD_CONTEXT};
pub use validate::{validate_td, Diagnostic, DiagnosticKind, Severity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TdError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("missing required {0}")]
    MissingRequired(String),
    #[error("term {0:?} uses an undeclared prefix")]
    UnknownPrefix(String),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("unsupported unit {0:?}; expected MilliSEC or SEC")]
    UnsupportedUnit(String),
    #[error("binary data description of {affordance:?}: {source}")]
    Bdo { affordance: String, source: CodecError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GapRole {
    #[default]
    Peripheral,
    Central,
    Broadcaster,
    Observer,
}

impl GapRole {
    fn from_local(local: &str) -> Option<Self> {
        match local.to_ascii_lowercase().as_str() {
            "peripheral" => Some(GapRole::Peripheral),
            "central" => Some(GapRole::Central),
            "broadcaster" => Some(GapRole::Broadcaster),
            "observer" => Some(GapRole::Observer),
            _ => None,
        }
    }

    fn term(self) -> &'static str {
        match self {
            GapRole::Peripheral => "peripheral",
            GapRole::Central => "central",
            GapRole::Broadcaster => "broadcaster",
            GapRole::Observer => "observer",
        }
    }
}

/// Link-layer metadata of the device. Intervals are in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct BleMetadata {
    pub gap_role: GapRole,
    pub is_connectable: bool,
    pub has_gatt_layer: bool,
    pub advertising_interval: Option<f64>,
    pub scan_window: Option<f64>,
    pub scan_interval: Option<f64>,
}

impl Default for BleMetadata {
    fn default() -> Self {
        BleMetadata {
            gap_role: GapRole::Peripheral,
            is_connectable: true,
            has_gatt_layer: true,
            advertising_interval: None,
            scan_window: None,
            scan_interval: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AffordanceKind {
    Property,
    Action,
    Event,
}

impl fmt::Display for AffordanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AffordanceKind::Property => "property",
            AffordanceKind::Action => "action",
            AffordanceKind::Event => "event",
        })
    }
}

impl AffordanceKind {
    fn default_ops(self) -> Vec<WotOperation> {
        match self {
            AffordanceKind::Property => vec![WotOperation::ReadProperty, WotOperation::WriteProperty],
            AffordanceKind::Action => vec![WotOperation::InvokeAction],
            AffordanceKind::Event => vec![WotOperation::SubscribeEvent, WotOperation::UnsubscribeEvent],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    Integer,
    Number,
    String,
}

impl DataType {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "integer" => Some(DataType::Integer),
            "number" => Some(DataType::Number),
            "string" => Some(DataType::String),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            DataType::Integer => "integer",
            DataType::Number => "number",
            DataType::String => "string",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Form {
    /// Left unparsed so that non-GATT hrefs survive to validation.
    pub href: String,
    pub op: Vec<WotOperation>,
    /// Operation names outside the GATT binding, e.g. `observeproperty`.
    pub unsupported_ops: Vec<String>,
    pub method_name: Option<GattMethod>,
    pub content_type: String,
    pub extensions: IndexMap<String, Value>,
}

impl Form {
    pub fn new(href: impl Into<String>, op: Vec<WotOperation>) -> Self {
        Form {
            href: href.into(),
            op,
            unsupported_ops: Vec::new(),
            method_name: None,
            content_type: BINARY_DATA_STREAM.to_string(),
            extensions: IndexMap::new(),
        }
    }

    pub fn with_method(mut self, method: GattMethod) -> Self {
        self.method_name = Some(method);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Affordance {
    pub name: String,
    pub kind: AffordanceKind,
    pub data_type: Option<DataType>,
    pub format: Option<String>,
    pub bdo: Option<BdoSpec>,
    pub forms: Vec<Form>,
    pub bounds: Option<Bounds>,
    pub extensions: IndexMap<String, Value>,
}

impl Affordance {
    pub fn new(name: impl Into<String>, kind: AffordanceKind, forms: Vec<Form>) -> Self {
        Affordance {
            name: name.into(),
            kind,
            data_type: None,
            format: None,
            bdo: None,
            forms,
            bounds: None,
            extensions: IndexMap::new(),
        }
    }

    pub fn with_bdo(mut self, spec: BdoSpec) -> Self {
        self.bdo = Some(spec);
        self
    }

    pub fn permits(&self, op: WotOperation) -> bool {
        self.forms.iter().any(|f| f.op.contains(&op))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThingDescription {
    pub title: String,
    /// The `@context` value as written.
    pub context: Value,
    pub context_prefixes: IndexMap<String, String>,
    pub metadata: BleMetadata,
    pub properties: IndexMap<String, Affordance>,
    pub actions: IndexMap<String, Affordance>,
    pub events: IndexMap<String, Affordance>,
    pub extensions: IndexMap<String, Value>,
}

impl ThingDescription {
    pub fn affordances(&self) -> impl Iterator<Item = &Affordance> {
        self.properties.values().chain(self.actions.values()).chain(self.events.values())
    }

    pub fn affordance(&self, kind: AffordanceKind, name: &str) -> Option<&Affordance> {
        match kind {
            AffordanceKind::Property => self.properties.get(name),
            AffordanceKind::Action => self.actions.get(name),
            AffordanceKind::Event => self.events.get(name),
        }
    }

    fn context(&self) -> Context {
        // prefixes were validated at parse time
        Context::from_document(Some(&self.context)).unwrap_or_default()
    }

    /// Serializes back to a JSON document using the declared prefixes.
    pub fn to_json(&self) -> Value {
        let ctx = self.context();
        let mut root = Map::new();
        if !self.context.is_null() {
            root.insert("@context".into(), self.context.clone());
        }
        root.insert("title".into(), Value::String(self.title.clone()));
        let m = &self.metadata;
        let sbo = |local: &str| ctx.compact(Vocab::Sbo, local);
        root.insert(sbo("hasGAPRole"), Value::String(sbo(m.gap_role.term())));
        root.insert(sbo("isConnectable"), Value::Bool(m.is_connectable));
        root.insert(sbo("hasGATTLayer"), Value::Bool(m.has_gatt_layer));
        for (local, v) in [
            ("hasAdvertisingInterval", m.advertising_interval),
            ("hasScanWindow", m.scan_window),
            ("hasScanInterval", m.scan_interval),
        ] {
            if let Some(ms) = v {
                root.insert(sbo(local), number(ms));
            }
        }
        for (k, v) in &self.extensions {
            root.insert(k.clone(), v.clone());
        }
        for (key, map) in [("properties", &self.properties), ("actions", &self.actions), ("events", &self.events)] {
            let entries: Map<String, Value> =
                map.iter().map(|(name, a)| (name.clone(), affordance_to_json(a, &ctx))).collect();
            root.insert(key.into(), Value::Object(entries));
        }
        Value::Object(root)
    }
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
    }
}

fn insert_bounds(obj: &mut Map<String, Value>, bounds: Option<Bounds>) {
    if let Some(b) = bounds {
        if let Some(min) = b.minimum {
            obj.insert("minimum".into(), number(min));
        }
        if let Some(max) = b.maximum {
            obj.insert("maximum".into(), number(max));
        }
    }
}

fn affordance_to_json(a: &Affordance, ctx: &Context) -> Value {
    let bdo = |local: &str| ctx.compact(Vocab::Bdo, local);
    let mut obj = Map::new();
    if let Some(t) = a.data_type {
        obj.insert("type".into(), Value::String(t.as_str().into()));
    }
    if let Some(f) = &a.format {
        obj.insert("format".into(), Value::String(f.clone()));
    }
    insert_bounds(&mut obj, a.bounds);
    if let Some(spec) = &a.bdo {
        obj.insert(bdo("bytelength"), Value::from(spec.bytelength));
        obj.insert(bdo("signed"), Value::Bool(spec.signed));
        obj.insert(bdo("endianess"), Value::String(bdo(spec.endianness.term())));
        obj.insert(bdo("offset"), Value::from(spec.offset));
        obj.insert(bdo("scale"), number(spec.scale));
        if let Some(p) = &spec.pattern {
            obj.insert(bdo("pattern"), Value::String(p.clone()));
            let vars: Map<String, Value> = spec
                .variables
                .iter()
                .map(|(name, v)| {
                    let mut var = Map::new();
                    let t = match v.data_type {
                        ValueKind::Integer => "integer",
                        ValueKind::HexString => "string",
                    };
                    var.insert("type".into(), Value::String(t.into()));
                    if v.data_type == ValueKind::HexString {
                        var.insert("format".into(), Value::String("hex".into()));
                    }
                    insert_bounds(&mut var, v.bounds);
                    var.insert(bdo("bytelength"), Value::from(v.bytelength));
                    if let Some(s) = v.signed {
                        var.insert(bdo("signed"), Value::Bool(s));
                    }
                    if let Some(e) = v.endianness {
                        var.insert(bdo("endianess"), Value::String(bdo(e.term())));
                    }
                    (name.clone(), Value::Object(var))
                })
                .collect();
            obj.insert(bdo("variable"), Value::Object(vars));
        }
    }
    for (k, v) in &a.extensions {
        obj.insert(k.clone(), v.clone());
    }
    let forms: Vec<Value> = a
        .forms
        .iter()
        .map(|f| {
            let mut form = Map::new();
            form.insert("href".into(), Value::String(f.href.clone()));
            let ops: Vec<Value> =
                f.op.iter()
                    .map(|o| Value::String(o.as_str().into()))
                    .chain(f.unsupported_ops.iter().map(|o| Value::String(o.clone())))
                    .collect();
            form.insert("op".into(), Value::Array(ops));
            if let Some(m) = f.method_name {
                let local = match m {
                    GattMethod::WriteWithoutResponse => "write-without-response",
                    other => other.as_str(),
                };
                form.insert(ctx.compact(Vocab::Sbo, "methodName"), Value::String(ctx.compact(Vocab::Sbo, local)));
            }
            form.insert("contentType".into(), Value::String(f.content_type.clone()));
            for (k, v) in &f.extensions {
                form.insert(k.clone(), v.clone());
            }
            Value::Object(form)
        })
        .collect();
    obj.insert("forms".into(), Value::Array(forms));
    Value::Object(obj)
}

/// Parses a TD document.
pub fn parse_td(document: &str) -> Result<ThingDescription, TdError> {
    let root: Value = serde_json::from_str(document).map_err(|e| TdError::Malformed(e.to_string()))?;
    parse_td_value(&root)
}

pub fn parse_td_value(root: &Value) -> Result<ThingDescription, TdError> {
    let obj = root.as_object().ok_or_else(|| TdError::Malformed("a Thing Description must be a JSON object".into()))?;
    let raw_context = obj.get("@context").cloned().unwrap_or(Value::Null);
    let ctx = Context::from_document(obj.get("@context"))?;
    let parser = Parser { ctx: &ctx };

    let mut td = ThingDescription {
        title: String::new(),
        context: raw_context,
        context_prefixes: ctx.prefixes().clone(),
        metadata: BleMetadata::default(),
        properties: IndexMap::new(),
        actions: IndexMap::new(),
        events: IndexMap::new(),
        extensions: IndexMap::new(),
    };

    for (key, value) in obj {
        match key.as_str() {
            "@context" => {}
            "title" => {
                td.title =
                    value.as_str().ok_or_else(|| TdError::Malformed("title must be a string".into()))?.to_string();
            }
            "properties" => td.properties = parser.affordances(value, AffordanceKind::Property)?,
            "actions" => td.actions = parser.affordances(value, AffordanceKind::Action)?,
            "events" => td.events = parser.affordances(value, AffordanceKind::Event)?,
            _ => {
                let term = ctx.expand(key)?;
                if !parser.metadata_term(&term, value, &mut td.metadata)? {
                    td.extensions.insert(term.key().to_string(), value.clone());
                }
            }
        }
    }
    Ok(td)
}

struct Parser<'a> {
    ctx: &'a Context,
}

fn as_u32(value: &Value, what: &str) -> Result<u32, TdError> {
    value
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| TdError::InvalidValue(format!("{what} must be a non-negative integer, got {value}")))
}

fn as_bool(value: &Value, what: &str) -> Result<bool, TdError> {
    value.as_bool().ok_or_else(|| TdError::InvalidValue(format!("{what} must be a boolean, got {value}")))
}

fn as_f64(value: &Value, what: &str) -> Result<f64, TdError> {
    value.as_f64().ok_or_else(|| TdError::InvalidValue(format!("{what} must be a number, got {value}")))
}

fn as_str<'v>(value: &'v Value, what: &str) -> Result<&'v str, TdError> {
    value.as_str().ok_or_else(|| TdError::InvalidValue(format!("{what} must be a string, got {value}")))
}

/// Fields gathered from an affordance or variable object before the spec is assembled.
#[derive(Default)]
struct BdoTerms {
    seen: bool,
    bytelength: Option<u32>,
    signed: Option<bool>,
    endianness: Option<Endianness>,
    offset: Option<u32>,
    scale: Option<f64>,
    pattern: Option<String>,
    variables: Option<IndexMap<String, VariableSpec>>,
}

impl Parser<'_> {
    fn metadata_term(&self, term: &Term, value: &Value, meta: &mut BleMetadata) -> Result<bool, TdError> {
        let Some(local) = term.local_in(Vocab::Sbo) else {
            return Ok(false);
        };
        match local {
            "hasGAPRole" => {
                let role = self.ctx.resolve_value(as_str(value, "sbo:hasGAPRole")?, Vocab::Sbo)?;
                meta.gap_role = GapRole::from_local(&role)
                    .ok_or_else(|| TdError::InvalidValue(format!("unknown GAP role {role:?}")))?;
            }
            "isConnectable" => meta.is_connectable = as_bool(value, "sbo:isConnectable")?,
            "hasGATTLayer" => meta.has_gatt_layer = as_bool(value, "sbo:hasGATTLayer")?,
            "hasAdvertisingInterval" | "advertisingInterval" => {
                meta.advertising_interval = Some(self.duration_ms(value, local)?)
            }
            "hasScanWindow" | "scanWindow" => meta.scan_window = Some(self.duration_ms(value, local)?),
            "hasScanInterval" | "scanInterval" => meta.scan_interval = Some(self.duration_ms(value, local)?),
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Plain numbers are milliseconds; objects carry `rdf:value` and `qudt:unit`.
    fn duration_ms(&self, value: &Value, what: &str) -> Result<f64, TdError> {
        let ms = match value {
            Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
            Value::Object(obj) => {
                let mut magnitude = None;
                let mut unit = None;
                for (k, v) in obj {
                    let term = self.ctx.expand(k)?;
                    if term.local_in(Vocab::Rdf) == Some("value") {
                        magnitude = Some(as_f64(v, "rdf:value")?);
                    } else if term.local_in(Vocab::Qudt) == Some("unit") {
                        let u = self.ctx.expand(as_str(v, "qudt:unit")?)?;
                        unit = Some(context::local_name(u.key()).to_string());
                    }
                }
                let magnitude = magnitude.ok_or_else(|| TdError::MissingRequired(format!("rdf:value of {what}")))?;
                match unit.as_deref() {
                    Some("MilliSEC") => magnitude,
                    Some("SEC") => magnitude * 1000.0,
                    Some(other) => return Err(TdError::UnsupportedUnit(other.to_string())),
                    None => return Err(TdError::MissingRequired(format!("qudt:unit of {what}"))),
                }
            }
            other => return Err(TdError::InvalidValue(format!("{what} must be a number or quantity, got {other}"))),
        };
        if !(ms.is_finite() && ms > 0.0) {
            return Err(TdError::InvalidValue(format!("{what} must be positive, got {ms}")));
        }
        Ok(ms)
    }

    fn affordances(&self, value: &Value, kind: AffordanceKind) -> Result<IndexMap<String, Affordance>, TdError> {
        let obj = value.as_object().ok_or_else(|| TdError::Malformed(format!("{kind:?} map must be an object")))?;
        obj.iter().map(|(name, v)| Ok((name.clone(), self.affordance(name, kind, v)?))).collect()
    }

    /// Records a `bdo` term into `terms`; returns false for terms outside the vocabulary.
    fn bdo_term(&self, term: &Term, value: &Value, terms: &mut BdoTerms) -> Result<bool, TdError> {
        let Some(local) = term.local_in(Vocab::Bdo) else {
            return Ok(false);
        };
        match local {
            "bytelength" => terms.bytelength = Some(as_u32(value, "bdo:bytelength")?),
            "signed" => terms.signed = Some(as_bool(value, "bdo:signed")?),
            "endianess" | "endianness" => {
                let local = self.ctx.resolve_value(as_str(value, "bdo:endianess")?, Vocab::Bdo)?;
                terms.endianness = Some(
                    Endianness::from_term(&local)
                        .ok_or_else(|| TdError::InvalidValue(format!("unknown byte order {local:?}")))?,
                );
            }
            "offset" => terms.offset = Some(as_u32(value, "bdo:offset")?),
            "scale" => terms.scale = Some(as_f64(value, "bdo:scale")?),
            "pattern" => terms.pattern = Some(as_str(value, "bdo:pattern")?.to_string()),
            "variable" => terms.variables = Some(self.variables(value)?),
            _ => return Ok(false),
        }
        terms.seen = true;
        Ok(true)
    }

    fn variables(&self, value: &Value) -> Result<IndexMap<String, VariableSpec>, TdError> {
        let obj = value.as_object().ok_or_else(|| TdError::InvalidValue("bdo:variable must be an object".into()))?;
        let mut out = IndexMap::new();
        for (name, v) in obj {
            let fields = v
                .as_object()
                .ok_or_else(|| TdError::InvalidValue(format!("bdo:variable {name:?} must be an object")))?;
            let mut kind = ValueKind::Integer;
            let mut bounds = Bounds::default();
            let mut terms = BdoTerms::default();
            for (k, fv) in fields {
                let term = self.ctx.expand(k)?;
                match term {
                    Term::Plain(ref key) if key == "type" => {
                        kind = match as_str(fv, "type")? {
                            "integer" => ValueKind::Integer,
                            "string" => ValueKind::HexString,
                            other => {
                                return Err(TdError::InvalidValue(format!(
                                    "variable {name:?} has unsupported type {other:?}"
                                )))
                            }
                        }
                    }
                    Term::Plain(ref key) if key == "minimum" => bounds.minimum = Some(as_f64(fv, "minimum")?),
                    Term::Plain(ref key) if key == "maximum" => bounds.maximum = Some(as_f64(fv, "maximum")?),
                    _ => {
                        if !self.bdo_term(&term, fv, &mut terms)? {
                            log::debug!("ignoring term {k:?} of variable {name:?}");
                        }
                    }
                }
            }
            let bytelength = terms
                .bytelength
                .ok_or_else(|| TdError::MissingRequired(format!("bdo:bytelength of variable {name:?}")))?;
            let mut spec = VariableSpec::new(name.clone(), kind, bytelength);
            spec.signed = terms.signed;
            spec.endianness = terms.endianness;
            if bounds != Bounds::default() {
                spec.bounds = Some(bounds);
            }
            out.insert(name.clone(), spec);
        }
        Ok(out)
    }

    fn affordance(&self, name: &str, kind: AffordanceKind, value: &Value) -> Result<Affordance, TdError> {
        let obj =
            value.as_object().ok_or_else(|| TdError::Malformed(format!("affordance {name:?} must be an object")))?;
        let mut aff = Affordance::new(name, kind, Vec::new());
        let mut bounds = Bounds::default();
        let mut terms = BdoTerms::default();
        let mut forms = None;
        for (key, v) in obj {
            let term = self.ctx.expand(key)?;
            match term {
                Term::Plain(ref k) if k == "type" => match v.as_str().and_then(DataType::parse) {
                    Some(t) => aff.data_type = Some(t),
                    None => {
                        aff.extensions.insert(k.clone(), v.clone());
                    }
                },
                Term::Plain(ref k) if k == "format" => aff.format = Some(as_str(v, "format")?.to_string()),
                Term::Plain(ref k) if k == "minimum" => bounds.minimum = Some(as_f64(v, "minimum")?),
                Term::Plain(ref k) if k == "maximum" => bounds.maximum = Some(as_f64(v, "maximum")?),
                Term::Plain(ref k) if k == "forms" => forms = Some(self.forms(name, kind, v)?),
                _ => {
                    if !self.bdo_term(&term, v, &mut terms)? {
                        aff.extensions.insert(term.key().to_string(), v.clone());
                    }
                }
            }
        }
        aff.forms = forms.unwrap_or_default();
        if aff.forms.is_empty() {
            return Err(TdError::MissingRequired(format!("forms of affordance {name:?}")));
        }
        if bounds != Bounds::default() {
            aff.bounds = Some(bounds);
        }
        if terms.seen {
            aff.bdo = Some(self.assemble_spec(&aff, terms)?);
        }
        Ok(aff)
    }

    fn assemble_spec(&self, aff: &Affordance, terms: BdoTerms) -> Result<BdoSpec, TdError> {
        let name = &aff.name;
        let bdo_err = |source: CodecError| TdError::Bdo { affordance: name.clone(), source };
        let mut spec = match &terms.pattern {
            Some(pattern) => {
                let variables = terms.variables.unwrap_or_default();
                for placeholder in placeholder_names(pattern).map_err(bdo_err)? {
                    if !variables.contains_key(&placeholder) {
                        return Err(TdError::MissingRequired(format!(
                            "bdo:variable {placeholder:?} used by the pattern of {name:?}"
                        )));
                    }
                }
                if variables.is_empty() {
                    return Err(TdError::MissingRequired(format!("bdo:variable for the pattern of {name:?}")));
                }
                let layout = compile_pattern(pattern, &variables).map_err(bdo_err)?;
                if let Some(len) = terms.bytelength {
                    if len as usize != layout.len() {
                        return Err(TdError::InvalidValue(format!(
                            "bdo:bytelength {len} of {name:?} disagrees with its {}-octet pattern",
                            layout.len()
                        )));
                    }
                }
                let mut spec = BdoSpec::scalar(layout.len() as u32);
                spec.pattern = Some(pattern.clone());
                spec.variables = variables;
                spec
            }
            None => {
                let len =
                    terms.bytelength.ok_or_else(|| TdError::MissingRequired(format!("bdo:bytelength of {name:?}")))?;
                let kind = match (aff.data_type, aff.format.as_deref()) {
                    (Some(DataType::String), Some("hex")) => ValueKind::HexString,
                    (Some(DataType::String), _) => {
                        return Err(TdError::InvalidValue(format!(
                            "{name:?}: only hex-formatted strings can be encoded"
                        )))
                    }
                    _ => ValueKind::Integer,
                };
                let mut spec = BdoSpec::scalar(len).kind(kind);
                spec.bounds = aff.bounds;
                spec
            }
        };
        if let Some(s) = terms.signed {
            spec.signed = s;
        }
        if let Some(e) = terms.endianness {
            spec.endianness = e;
        }
        if let Some(o) = terms.offset {
            spec.offset = o;
        }
        if let Some(s) = terms.scale {
            spec.scale = s;
        }
        spec.validate().map_err(bdo_err)?;
        Ok(spec)
    }

    fn forms(&self, name: &str, kind: AffordanceKind, value: &Value) -> Result<Vec<Form>, TdError> {
        let entries =
            value.as_array().ok_or_else(|| TdError::Malformed(format!("forms of {name:?} must be an array")))?;
        entries
            .iter()
            .map(|entry| {
                let obj = entry
                    .as_object()
                    .ok_or_else(|| TdError::Malformed(format!("form of {name:?} must be an object")))?;
                let mut form = Form::new(String::new(), Vec::new());
                let mut href = None;
                let mut ops = None;
                for (key, v) in obj {
                    let term = self.ctx.expand(key)?;
                    match term {
                        Term::Plain(ref k) if k == "href" => href = Some(as_str(v, "href")?.to_string()),
                        Term::Plain(ref k) if k == "op" => ops = Some(op_names(v)?),
                        Term::Plain(ref k) if k == "contentType" => {
                            form.content_type = as_str(v, "contentType")?.to_string()
                        }
                        ref t if t.local_in(Vocab::Sbo) == Some("methodName") => {
                            let local = self.ctx.resolve_value(as_str(v, "sbo:methodName")?, Vocab::Sbo)?;
                            form.method_name = Some(
                                local
                                    .parse()
                                    .map_err(|_| TdError::InvalidValue(format!("unknown method {local:?}")))?,
                            );
                        }
                        _ => {
                            form.extensions.insert(term.key().to_string(), v.clone());
                        }
                    }
                }
                form.href = href.ok_or_else(|| TdError::MissingRequired(format!("href in a form of {name:?}")))?;
                match ops {
                    None => form.op = kind.default_ops(),
                    Some(names) => {
                        for n in names {
                            match n.parse::<WotOperation>() {
                                Ok(op) => form.op.push(op),
                                Err(_) => form.unsupported_ops.push(n),
                            }
                        }
                    }
                }
                if form.op.is_empty() && form.unsupported_ops.is_empty() {
                    return Err(TdError::MissingRequired(format!("op in a form of {name:?}")));
                }
                Ok(form)
            })
            .collect()
    }
}

fn op_names(value: &Value) -> Result<Vec<String>, TdError> {
    match value {
        Value::String(s) => Ok(vec![s.clone()]),
        Value::Array(items) => items.iter().map(|i| as_str(i, "op").map(str::to_string)).collect(),
        other => Err(TdError::InvalidValue(format!("op must be a string or array, got {other}"))),
    }
}

#[cfg(test)]
mod tests;
