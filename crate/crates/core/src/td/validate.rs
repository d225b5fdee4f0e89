use std::collections::BTreeSet;
use std::fmt;

use crate::binding::{map_operation, OperationCategory};
use crate::codec::BINARY_DATA_STREAM;
use crate::uri::{parse_gatt_uri, UriError};

use super::ThingDescription;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticKind {
    /// The device does not accept connections but a form needs one.
    ConnectabilityConflict,
    /// A write form on an affordance without a binary data description.
    MissingEncoding,
    BadUriScheme,
    BadUri,
    MethodOpConflict,
    UnsupportedOperation,
    UnexpectedContentType,
    /// Forms address more than one device.
    MixedDevices,
}

impl DiagnosticKind {
    pub fn severity(self) -> Severity {
        match self {
            DiagnosticKind::UnsupportedOperation
            | DiagnosticKind::UnexpectedContentType
            | DiagnosticKind::MixedDevices => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub affordance: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn new(kind: DiagnosticKind, affordance: &str, message: String) -> Self {
        Diagnostic { kind, affordance: Some(affordance.to_string()), message }
    }

    pub fn severity(&self) -> Severity {
        self.kind.severity()
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity() {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.affordance {
            Some(a) => write!(f, "{level}: {a}: {:?}: {}", self.kind, self.message),
            None => write!(f, "{level}: {:?}: {}", self.kind, self.message),
        }
    }
}

/// Checks a parsed TD for problems that would make interactions fail. An
/// empty result means the TD is usable as-is.
pub fn validate_td(td: &ThingDescription) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut devices = BTreeSet::new();
    for aff in td.affordances() {
        let name = aff.name.as_str();
        for form in &aff.forms {
            for op in &form.unsupported_ops {
                out.push(Diagnostic::new(
                    DiagnosticKind::UnsupportedOperation,
                    name,
                    format!("operation {op:?} is not part of the GATT binding"),
                ));
            }
            let uri = match parse_gatt_uri(&form.href) {
                Ok(uri) => uri,
                Err(e @ UriError::BadScheme(_)) => {
                    out.push(Diagnostic::new(DiagnosticKind::BadUriScheme, name, e.to_string()));
                    continue;
                }
                Err(e) => {
                    out.push(Diagnostic::new(DiagnosticKind::BadUri, name, e.to_string()));
                    continue;
                }
            };
            devices.insert(uri.device);
            if !td.metadata.is_connectable && !form.op.is_empty() {
                out.push(Diagnostic::new(
                    DiagnosticKind::ConnectabilityConflict,
                    name,
                    format!("device is not connectable but {} require a GATT connection", join_ops(&form.op)),
                ));
            }
            for op in &form.op {
                if let Err(e) = map_operation(*op, form.method_name) {
                    out.push(Diagnostic::new(DiagnosticKind::MethodOpConflict, name, e.to_string()));
                }
            }
            let writes = form.op.iter().any(|op| op.category() == OperationCategory::Write);
            let binary = form.content_type.eq_ignore_ascii_case(BINARY_DATA_STREAM);
            if writes && binary && aff.bdo.is_none() {
                out.push(Diagnostic::new(
                    DiagnosticKind::MissingEncoding,
                    name,
                    "write form has no bdo description to encode values with".into(),
                ));
            }
            if !binary {
                out.push(Diagnostic::new(
                    DiagnosticKind::UnexpectedContentType,
                    name,
                    format!("content type {:?} is handled as raw octets", form.content_type),
                ));
            }
        }
    }
    if devices.len() > 1 {
        let list: Vec<String> = devices.iter().map(|d| d.to_string()).collect();
        out.push(Diagnostic {
            kind: DiagnosticKind::MixedDevices,
            affordance: None,
            message: format!("forms address several devices: {}", list.join(", ")),
        });
    }
    out
}

fn join_ops(ops: &[crate::binding::WotOperation]) -> String {
    ops.iter().map(|o| o.as_str()).collect::<Vec<_>>().join(", ")
}
