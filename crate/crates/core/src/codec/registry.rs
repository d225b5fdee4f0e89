use std::collections::HashMap;
use std::sync::Arc;

use serde_json::Value;

use super::{decode, encode, BdoSpec, CodecError, Payload, BINARY_DATA_STREAM, OCTET_STREAM};

/// Converts between application values and payloads for one media type.
pub trait ContentCodec: Send + Sync {
    fn media_type(&self) -> &str;
    fn encode(&self, value: &Value, spec: Option<&BdoSpec>) -> Result<Payload, CodecError>;
    fn decode(&self, payload: &[u8], spec: Option<&BdoSpec>) -> Result<Value, CodecError>;
}

#[derive(Debug, Default)]
pub struct BinaryDataStreamCodec;

impl ContentCodec for BinaryDataStreamCodec {
    fn media_type(&self) -> &str {
        BINARY_DATA_STREAM
    }

    fn encode(&self, value: &Value, spec: Option<&BdoSpec>) -> Result<Payload, CodecError> {
        encode(value, spec.ok_or(CodecError::MissingSpec)?)
    }

    fn decode(&self, payload: &[u8], spec: Option<&BdoSpec>) -> Result<Value, CodecError> {
        decode(payload, spec.ok_or(CodecError::MissingSpec)?)
    }
}

/// Raw octets exchanged as lowercase hex text.
#[derive(Debug, Default)]
pub struct OctetStreamCodec;

impl ContentCodec for OctetStreamCodec {
    fn media_type(&self) -> &str {
        OCTET_STREAM
    }

    fn encode(&self, value: &Value, _spec: Option<&BdoSpec>) -> Result<Payload, CodecError> {
        let text = value.as_str().ok_or_else(|| CodecError::TypeMismatch(format!("expected hex text, got {value}")))?;
        Payload::from_hex(text)
    }

    fn decode(&self, payload: &[u8], _spec: Option<&BdoSpec>) -> Result<Value, CodecError> {
        Ok(Value::String(hex::encode(payload)))
    }
}

/// Maps content types to codecs. Unregistered `application/*` subtypes fall
/// back to the octet-stream codec.
#[derive(Clone)]
pub struct CodecRegistry {
    codecs: HashMap<String, Arc<dyn ContentCodec>>,
    fallback: Arc<dyn ContentCodec>,
}

impl Default for CodecRegistry {
    fn default() -> Self {
        let fallback: Arc<dyn ContentCodec> = Arc::new(OctetStreamCodec);
        let mut registry = CodecRegistry { codecs: HashMap::new(), fallback: fallback.clone() };
        registry.register(Arc::new(BinaryDataStreamCodec));
        registry.register(fallback);
        registry
    }
}

fn essence(content_type: &str) -> String {
    content_type.split(';').next().unwrap_or_default().trim().to_ascii_lowercase()
}

impl CodecRegistry {
    pub fn register(&mut self, codec: Arc<dyn ContentCodec>) {
        self.codecs.insert(essence(codec.media_type()), codec);
    }

    pub fn lookup(&self, content_type: &str) -> Result<Arc<dyn ContentCodec>, CodecError> {
        let key = essence(content_type);
        if let Some(codec) = self.codecs.get(&key) {
            return Ok(codec.clone());
        }
        match key.split_once('/') {
            Some(("application", sub)) if !sub.is_empty() => Ok(self.fallback.clone()),
            _ => Err(CodecError::UnsupportedContentType(content_type.to_string())),
        }
    }
}
