//! Mapping from abstract WoT operations to GATT methods.
//!
//! | WoT operation             | GATT method                     |
//! |---------------------------|---------------------------------|
//! | `readproperty`            | read                            |
//! | `writeproperty`           | write / write-without-response  |
//! | `invokeaction`            | write / write-without-response  |
//! | `readallproperties`       | read                            |
//! | `writeallproperties`      | write / write-without-response  |
//! | `readmultipleproperties`  | read                            |
//! | `writemultipleproperties` | write / write-without-response  |
//! | `subscribeevent`          | notify                          |
//! | `unsubscribeevent`        | notify                          |
//!
//! Write-category operations use `write` unless the form's `sbo:methodName`
//! asks for `write-without-response`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::codec::BdoSpec;
use crate::td::Affordance;
use crate::uri::{parse_gatt_uri, GattUri, UriError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BindingError {
    #[error("operation {op} cannot use GATT method {method}")]
    MethodOpConflict { op: WotOperation, method: GattMethod },
    #[error("operation {0:?} is not supported by the GATT binding")]
    UnsupportedOperation(String),
    #[error("unknown GATT method {0:?}")]
    UnknownMethod(String),
    #[error("no form of {affordance:?} permits {op}")]
    NoMatchingForm { affordance: String, op: WotOperation },
    #[error(transparent)]
    Uri(#[from] UriError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WotOperation {
    ReadProperty,
    WriteProperty,
    InvokeAction,
    ReadAllProperties,
    WriteAllProperties,
    ReadMultipleProperties,
    WriteMultipleProperties,
    SubscribeEvent,
    UnsubscribeEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperationCategory {
    Read,
    Write,
    Notify,
}

impl WotOperation {
    pub const ALL: [WotOperation; 9] = [
        WotOperation::ReadProperty,
        WotOperation::WriteProperty,
        WotOperation::InvokeAction,
        WotOperation::ReadAllProperties,
        WotOperation::WriteAllProperties,
        WotOperation::ReadMultipleProperties,
        WotOperation::WriteMultipleProperties,
        WotOperation::SubscribeEvent,
        WotOperation::UnsubscribeEvent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            WotOperation::ReadProperty => "readproperty",
            WotOperation::WriteProperty => "writeproperty",
            WotOperation::InvokeAction => "invokeaction",
            WotOperation::ReadAllProperties => "readallproperties",
            WotOperation::WriteAllProperties => "writeallproperties",
            WotOperation::ReadMultipleProperties => "readmultipleproperties",
            WotOperation::WriteMultipleProperties => "writemultipleproperties",
            WotOperation::SubscribeEvent => "subscribeevent",
            WotOperation::UnsubscribeEvent => "unsubscribeevent",
        }
    }

    pub fn category(self) -> OperationCategory {
        use WotOperation::*;
        match self {
            ReadProperty | ReadAllProperties | ReadMultipleProperties => OperationCategory::Read,
            WriteProperty | InvokeAction | WriteAllProperties | WriteMultipleProperties => OperationCategory::Write,
            SubscribeEvent | UnsubscribeEvent => OperationCategory::Notify,
        }
    }
}

impl fmt::Display for WotOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WotOperation {
    type Err = BindingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        WotOperation::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| BindingError::UnsupportedOperation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GattMethod {
    Read,
    Write,
    WriteWithoutResponse,
    Notify,
}

impl GattMethod {
    pub const ALL: [GattMethod; 4] =
        [GattMethod::Read, GattMethod::Write, GattMethod::WriteWithoutResponse, GattMethod::Notify];

    pub fn as_str(self) -> &'static str {
        match self {
            GattMethod::Read => "read",
            GattMethod::Write => "write",
            GattMethod::WriteWithoutResponse => "write-without-response",
            GattMethod::Notify => "notify",
        }
    }
}

impl fmt::Display for GattMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GattMethod {
    type Err = BindingError;

    /// Accepts the hyphenated, camel-case and underscore spellings of write-without-response.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "read" => Ok(GattMethod::Read),
            "write" => Ok(GattMethod::Write),
            "write-without-response" | "writeWithoutResponse" | "write_without_response" => {
                Ok(GattMethod::WriteWithoutResponse)
            }
            "notify" => Ok(GattMethod::Notify),
            other => Err(BindingError::UnknownMethod(other.to_string())),
        }
    }
}

pub fn map_operation(op: WotOperation, method_name: Option<GattMethod>) -> Result<GattMethod, BindingError> {
    let conflict = |method| BindingError::MethodOpConflict { op, method };
    match (op.category(), method_name) {
        (OperationCategory::Read, None | Some(GattMethod::Read)) => Ok(GattMethod::Read),
        (OperationCategory::Write, None) => Ok(GattMethod::Write),
        (OperationCategory::Write, Some(m @ (GattMethod::Write | GattMethod::WriteWithoutResponse))) => Ok(m),
        (OperationCategory::Notify, None | Some(GattMethod::Notify)) => Ok(GattMethod::Notify),
        (_, Some(m)) => Err(conflict(m)),
    }
}

/// A form resolved into everything needed to execute one GATT interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRequest {
    pub uri: GattUri,
    pub method: GattMethod,
    pub operation: WotOperation,
    pub spec: Option<BdoSpec>,
    pub content_type: String,
    /// False for `unsubscribeevent`, which maps to notify with notifications disabled.
    pub enable_notify: bool,
}

/// First form listing `op` wins.
pub fn resolve_form(affordance: &Affordance, op: WotOperation) -> Result<ResolvedRequest, BindingError> {
    let form = affordance
        .forms
        .iter()
        .find(|f| f.op.contains(&op))
        .ok_or_else(|| BindingError::NoMatchingForm { affordance: affordance.name.clone(), op })?;
    Ok(ResolvedRequest {
        uri: parse_gatt_uri(&form.href)?,
        method: map_operation(op, form.method_name)?,
        operation: op,
        spec: affordance.bdo.clone(),
        content_type: form.content_type.clone(),
        enable_notify: op != WotOperation::UnsubscribeEvent,
    })
}
