//! The `application/x.binary-data-stream` codec.
//!
//! Values are described by a [`BdoSpec`] built from Binary Data Ontology terms:
//! an integer of `bytelength` octets at `offset`, optionally signed, in either
//! byte order, scaled by `scale`; or a hex byte pattern with `{name}`
//! placeholders whose octets come from per-variable descriptions.
//!
//! Signed values use two's complement. Encoding divides by `scale` and rounds
//! half to even; decoding multiplies.

mod pattern;
mod registry;

use std::fmt;

use indexmap::IndexMap;
use serde_json::{Map, Number, Value};
use thiserror::Error;

pub use pattern::{compile_pattern, placeholder_names, PatternLayout, Segment};
pub use registry::{BinaryDataStreamCodec, CodecRegistry, ContentCodec, OctetStreamCodec};

pub const BINARY_DATA_STREAM: &str = "application/x.binary-data-stream";
pub const OCTET_STREAM: &str = "application/octet-stream";

/// Largest attribute value ATT can carry.
pub const MAX_ATT_VALUE_LEN: usize = 512;

/// Widest integer field the codec handles.
pub const MAX_INTEGER_BYTES: u32 = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("value {value} out of range: {reason}")]
    OutOfRange { value: String, reason: String },
    #[error("no value supplied for pattern variable {0:?}")]
    MissingVariable(String),
    #[error("{0:?} is not a variable of this pattern")]
    UnknownVariable(String),
    #[error("payload of {len} octets exceeds the {MAX_ATT_VALUE_LEN}-octet ATT limit")]
    AttLengthExceeded { len: usize },
    #[error("malformed hex pattern {0}")]
    BadHexPattern(String),
    #[error("payload too short: need {needed} octets, got {actual}")]
    TooShort { needed: usize, actual: usize },
    #[error("payload does not match pattern at octet {offset}")]
    PatternMismatch { offset: usize },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("invalid binary data description: {0}")]
    InvalidSpec(String),
    #[error("content type requires a binary data description")]
    MissingSpec,
    #[error("unsupported content type {0:?}")]
    UnsupportedContentType(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Endianness {
    #[default]
    Little,
    Big,
}

impl Endianness {
    /// Local name in the Binary Data Ontology.
    pub fn term(self) -> &'static str {
        match self {
            Endianness::Little => "littleEndian",
            Endianness::Big => "bigEndian",
        }
    }

    pub fn from_term(local: &str) -> Option<Self> {
        match local {
            "littleEndian" => Some(Endianness::Little),
            "bigEndian" => Some(Endianness::Big),
            _ => None,
        }
    }
}

/// How application values map onto octets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValueKind {
    #[default]
    Integer,
    /// Even-length hex text copied octet for octet.
    HexString,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bounds {
    pub minimum: Option<f64>,
    pub maximum: Option<f64>,
}

impl Bounds {
    pub fn new(minimum: f64, maximum: f64) -> Self {
        Bounds { minimum: Some(minimum), maximum: Some(maximum) }
    }

    fn check(&self, v: f64, shown: &Value) -> Result<(), CodecError> {
        if let Some(min) = self.minimum {
            if v < min {
                return Err(out_of_range(shown, format!("below minimum {min}")));
            }
        }
        if let Some(max) = self.maximum {
            if v > max {
                return Err(out_of_range(shown, format!("above maximum {max}")));
            }
        }
        Ok(())
    }
}

/// A `bdo:variable` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableSpec {
    pub name: String,
    pub data_type: ValueKind,
    pub bytelength: u32,
    /// Falls back to the enclosing spec when unset.
    pub signed: Option<bool>,
    pub endianness: Option<Endianness>,
    pub bounds: Option<Bounds>,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, data_type: ValueKind, bytelength: u32) -> Self {
        VariableSpec { name: name.into(), data_type, bytelength, signed: None, endianness: None, bounds: None }
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }
}

/// Binary data description attached to an affordance.
#[derive(Debug, Clone, PartialEq)]
pub struct BdoSpec {
    /// For pattern specs this is the compiled pattern length.
    pub bytelength: u32,
    pub signed: bool,
    pub endianness: Endianness,
    pub offset: u32,
    pub scale: f64,
    pub data_type: ValueKind,
    pub bounds: Option<Bounds>,
    pub pattern: Option<String>,
    pub variables: IndexMap<String, VariableSpec>,
}

impl BdoSpec {
    /// An unsigned little-endian integer with no offset or scaling.
    pub fn scalar(bytelength: u32) -> Self {
        BdoSpec {
            bytelength,
            signed: false,
            endianness: Endianness::Little,
            offset: 0,
            scale: 1.0,
            data_type: ValueKind::Integer,
            bounds: None,
            pattern: None,
            variables: IndexMap::new(),
        }
    }

    pub fn with_pattern(
        pattern: impl Into<String>,
        variables: impl IntoIterator<Item = VariableSpec>,
    ) -> Result<Self, CodecError> {
        let pattern = pattern.into();
        let variables: IndexMap<String, VariableSpec> = variables.into_iter().map(|v| (v.name.clone(), v)).collect();
        let layout = compile_pattern(&pattern, &variables)?;
        let mut spec = BdoSpec::scalar(layout.len() as u32);
        spec.pattern = Some(pattern);
        spec.variables = variables;
        spec.validate()?;
        Ok(spec)
    }

    pub fn signed(mut self, signed: bool) -> Self {
        self.signed = signed;
        self
    }

    pub fn endianness(mut self, endianness: Endianness) -> Self {
        self.endianness = endianness;
        self
    }

    pub fn offset(mut self, offset: u32) -> Self {
        self.offset = offset;
        self
    }

    pub fn scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn kind(mut self, kind: ValueKind) -> Self {
        self.data_type = kind;
        self
    }

    pub fn bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn layout(&self) -> Result<Option<PatternLayout>, CodecError> {
        self.pattern.as_deref().map(|p| compile_pattern(p, &self.variables)).transpose()
    }

    /// Checks the structural invariants independent of any value.
    pub fn validate(&self) -> Result<(), CodecError> {
        if !self.scale.is_finite() || self.scale == 0.0 {
            return Err(CodecError::InvalidSpec(format!("scale must be finite and non-zero, got {}", self.scale)));
        }
        match &self.pattern {
            Some(pattern) => {
                if self.variables.is_empty() {
                    return Err(CodecError::InvalidSpec("pattern requires at least one variable".into()));
                }
                for var in self.variables.values() {
                    field_of_variable(var, self).check()?;
                }
                compile_pattern(pattern, &self.variables)?;
            }
            None => self.field().check()?,
        }
        Ok(())
    }

    fn field(&self) -> FieldFormat {
        FieldFormat {
            kind: self.data_type,
            bytelength: self.bytelength,
            signed: self.signed,
            endianness: self.endianness,
            scale: self.scale,
            bounds: self.bounds,
        }
    }
}

/// Octets of one characteristic value.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Payload(Vec<u8>);

impl Payload {
    pub fn new(octets: Vec<u8>) -> Result<Self, CodecError> {
        if octets.len() > MAX_ATT_VALUE_LEN {
            return Err(CodecError::AttLengthExceeded { len: octets.len() });
        }
        Ok(Payload(octets))
    }

    pub fn from_hex(text: &str) -> Result<Self, CodecError> {
        let octets = hex::decode(text).map_err(|e| CodecError::TypeMismatch(format!("{text:?} is not hex: {e}")))?;
        Payload::new(octets)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload({})", self.to_hex())
    }
}

impl AsRef<[u8]> for Payload {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Encoding parameters of one contiguous field.
#[derive(Debug, Clone, Copy)]
struct FieldFormat {
    kind: ValueKind,
    bytelength: u32,
    signed: bool,
    endianness: Endianness,
    scale: f64,
    bounds: Option<Bounds>,
}

fn field_of_variable(var: &VariableSpec, parent: &BdoSpec) -> FieldFormat {
    FieldFormat {
        kind: var.data_type,
        bytelength: var.bytelength,
        signed: var.signed.unwrap_or(parent.signed),
        endianness: var.endianness.unwrap_or(parent.endianness),
        scale: 1.0,
        bounds: var.bounds,
    }
}

impl FieldFormat {
    fn check(&self) -> Result<(), CodecError> {
        if self.bytelength == 0 {
            return Err(CodecError::InvalidSpec("bytelength must be at least 1".into()));
        }
        if self.kind == ValueKind::Integer && self.bytelength > MAX_INTEGER_BYTES {
            return Err(CodecError::InvalidSpec(format!(
                "integer fields are limited to {MAX_INTEGER_BYTES} octets, got {}",
                self.bytelength
            )));
        }
        Ok(())
    }

    /// Inclusive range of raw (pre-scale) integers representable in this field.
    fn raw_range(&self) -> (i128, i128) {
        let bits = 8 * self.bytelength;
        if self.signed {
            (-(1i128 << (bits - 1)), (1i128 << (bits - 1)) - 1)
        } else {
            (0, (1i128 << bits) - 1)
        }
    }

    fn encode(&self, value: &Value) -> Result<Vec<u8>, CodecError> {
        self.check()?;
        match self.kind {
            ValueKind::Integer => self.encode_integer(value),
            ValueKind::HexString => self.encode_hex(value),
        }
    }

    fn encode_integer(&self, value: &Value) -> Result<Vec<u8>, CodecError> {
        let number =
            value.as_number().ok_or_else(|| CodecError::TypeMismatch(format!("expected a number, got {value}")))?;
        let as_float = number.as_f64().unwrap_or(f64::NAN);
        if let Some(bounds) = &self.bounds {
            bounds.check(as_float, value)?;
        }
        let raw = match (self.scale == 1.0, number.as_i64(), number.as_u64()) {
            (true, Some(i), _) => i as i128,
            (true, None, Some(u)) => u as i128,
            _ => {
                let scaled = (as_float / self.scale).round_ties_even();
                if !scaled.is_finite() || scaled.abs() >= 1e30 {
                    return Err(out_of_range(value, "not representable".into()));
                }
                scaled as i128
            }
        };
        let (lo, hi) = self.raw_range();
        if raw < lo || raw > hi {
            return Err(out_of_range(
                value,
                format!("raw value {raw} outside [{lo}, {hi}] for {} octet field", self.bytelength),
            ));
        }
        let n = self.bytelength as usize;
        let mut octets = (raw as u128).to_le_bytes()[..n].to_vec();
        if self.endianness == Endianness::Big {
            octets.reverse();
        }
        Ok(octets)
    }

    fn encode_hex(&self, value: &Value) -> Result<Vec<u8>, CodecError> {
        let text = value.as_str().ok_or_else(|| CodecError::TypeMismatch(format!("expected hex text, got {value}")))?;
        let octets = hex::decode(text).map_err(|e| CodecError::TypeMismatch(format!("{text:?} is not hex: {e}")))?;
        if octets.len() != self.bytelength as usize {
            return Err(out_of_range(
                value,
                format!("expected {} octets of hex, got {}", self.bytelength, octets.len()),
            ));
        }
        Ok(octets)
    }

    fn decode(&self, octets: &[u8]) -> Result<Value, CodecError> {
        self.check()?;
        debug_assert_eq!(octets.len(), self.bytelength as usize);
        match self.kind {
            ValueKind::HexString => Ok(Value::String(hex::encode(octets))),
            ValueKind::Integer => {
                let mut le = octets.to_vec();
                if self.endianness == Endianness::Big {
                    le.reverse();
                }
                let mut buf = [0u8; 16];
                buf[..le.len()].copy_from_slice(&le);
                let mut raw = u128::from_le_bytes(buf) as i128;
                let bits = 8 * self.bytelength;
                if self.signed && raw >= 1i128 << (bits - 1) {
                    raw -= 1i128 << bits;
                }
                Ok(scaled_value(raw, self.scale))
            }
        }
    }
}

fn scaled_value(raw: i128, scale: f64) -> Value {
    if scale == 1.0 {
        if let Ok(i) = i64::try_from(raw) {
            return Value::from(i);
        }
        if let Ok(u) = u64::try_from(raw) {
            return Value::from(u);
        }
    }
    Number::from_f64(raw as f64 * scale).map(Value::Number).unwrap_or(Value::Null)
}

fn out_of_range(value: &Value, reason: String) -> CodecError {
    CodecError::OutOfRange { value: value.to_string(), reason }
}

/// Encodes an application value into a characteristic payload.
///
/// Pattern specs take a JSON object with one entry per variable; scalar specs
/// take a number (or hex text for [`ValueKind::HexString`]).
pub fn encode(value: &Value, spec: &BdoSpec) -> Result<Payload, CodecError> {
    spec.validate()?;
    match spec.layout()? {
        Some(layout) => encode_pattern(value, spec, &layout),
        None => {
            let offset = spec.offset as usize;
            let total = offset + spec.bytelength as usize;
            if total > MAX_ATT_VALUE_LEN {
                return Err(CodecError::AttLengthExceeded { len: total });
            }
            let mut octets = vec![0u8; offset];
            octets.extend(spec.field().encode(value)?);
            Payload::new(octets)
        }
    }
}

fn encode_pattern(value: &Value, spec: &BdoSpec, layout: &PatternLayout) -> Result<Payload, CodecError> {
    if layout.len() > MAX_ATT_VALUE_LEN {
        return Err(CodecError::AttLengthExceeded { len: layout.len() });
    }
    let inputs = value.as_object().ok_or_else(|| {
        CodecError::TypeMismatch(format!("pattern values must be an object of variables, got {value}"))
    })?;
    if let Some(extra) = inputs.keys().find(|k| !spec.variables.contains_key(k.as_str())) {
        return Err(CodecError::UnknownVariable(extra.clone()));
    }
    let mut encoded: IndexMap<&str, Vec<u8>> = IndexMap::new();
    for name in layout.variable_names() {
        let var = &spec.variables[name];
        let input = inputs.get(name).ok_or_else(|| CodecError::MissingVariable(name.to_string()))?;
        encoded.insert(name, field_of_variable(var, spec).encode(input)?);
    }
    let mut octets = Vec::with_capacity(layout.len());
    for seg in layout.segments() {
        match seg {
            Segment::Literal(lit) => octets.extend_from_slice(lit),
            Segment::Variable { name, .. } => octets.extend_from_slice(&encoded[name.as_str()]),
        }
    }
    Payload::new(octets)
}

/// Decodes a characteristic payload into an application value.
pub fn decode(payload: &[u8], spec: &BdoSpec) -> Result<Value, CodecError> {
    spec.validate()?;
    match spec.layout()? {
        Some(layout) => decode_pattern(payload, spec, &layout),
        None => {
            let start = spec.offset as usize;
            let end = start + spec.bytelength as usize;
            if payload.len() < end {
                return Err(CodecError::TooShort { needed: end, actual: payload.len() });
            }
            spec.field().decode(&payload[start..end])
        }
    }
}

fn decode_pattern(payload: &[u8], spec: &BdoSpec, layout: &PatternLayout) -> Result<Value, CodecError> {
    if payload.len() < layout.len() {
        return Err(CodecError::TooShort { needed: layout.len(), actual: payload.len() });
    }
    if payload.len() > layout.len() {
        return Err(CodecError::PatternMismatch { offset: layout.len() });
    }
    let mut spans: IndexMap<&str, &[u8]> = IndexMap::new();
    let mut pos = 0;
    for seg in layout.segments() {
        match seg {
            Segment::Literal(lit) => {
                let actual = &payload[pos..pos + lit.len()];
                if let Some(i) = lit.iter().zip(actual).position(|(a, b)| a != b) {
                    return Err(CodecError::PatternMismatch { offset: pos + i });
                }
                pos += lit.len();
            }
            Segment::Variable { name, offset, len } => {
                let span = &payload[*offset..offset + len];
                match spans.get(name.as_str()) {
                    Some(prev) if *prev != span => {
                        return Err(CodecError::PatternMismatch { offset: *offset });
                    }
                    _ => {
                        spans.insert(name, span);
                    }
                }
                pos += len;
            }
        }
    }
    let mut out = Map::new();
    for (name, span) in spans {
        let var = &spec.variables[name];
        out.insert(name.to_string(), field_of_variable(var, spec).decode(span)?);
    }
    Ok(Value::Object(out))
}
