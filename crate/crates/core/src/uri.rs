//! The `gatt://<device>/<service>/<characteristic>` resource locator.
//!
//! A GATT URI names one characteristic on one device. The device segment is a
//! Bluetooth MAC address; service and characteristic are 128-bit UUIDs, with
//! 16-bit short forms expanded through the Bluetooth Base UUID.
//!
//! ```
//! use wot_gatt::uri::GattUri;
//!
//! let uri: GattUri = "gatt://AA:BB:CC:DD:EE:FF/fff0/fff3".parse().unwrap();
//! assert_eq!(
//!     uri.to_string(),
//!     "gatt://AA-BB-CC-DD-EE-FF/0000fff0-0000-1000-8000-00805f9b34fb/0000fff3-0000-1000-8000-00805f9b34fb"
//! );
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const SCHEME: &str = "gatt";

/// Bluetooth Base UUID with the 16-bit slot zeroed.
const BASE_UUID: [u8; 16] =
    [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80, 0x00, 0x00, 0x80, 0x5f, 0x9b, 0x34, 0xfb];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UriError {
    #[error("unsupported scheme in {0:?}, expected gatt://")]
    BadScheme(String),
    #[error("invalid device address {0:?}")]
    BadDeviceId(String),
    #[error("invalid UUID {0:?}")]
    BadUuid(String),
    #[error("expected gatt://<device>/<service>/<characteristic>, got {0:?}")]
    BadStructure(String),
}

/// A 48-bit Bluetooth device address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddress([u8; 6]);

impl MacAddress {
    pub const fn new(octets: [u8; 6]) -> Self {
        MacAddress(octets)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// Dash-separated form used inside URIs, where colons would be read as a port.
    pub fn to_dashed(&self) -> String {
        self.join('-')
    }

    fn join(&self, sep: char) -> String {
        let mut out = String::with_capacity(17);
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                out.push(sep);
            }
            out.push_str(&format!("{b:02X}"));
        }
        out
    }
}

/// Canonical form is uppercase and colon separated.
impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join(':'))
    }
}

impl FromStr for MacAddress {
    type Err = UriError;

    /// Accepts `AA:BB:CC:DD:EE:FF` or `AA-BB-CC-DD-EE-FF`, any case. Mixing
    /// separators is rejected.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UriError::BadDeviceId(s.to_string());
        let sep = if s.contains(':') { ':' } else { '-' };
        let parts: Vec<&str> = s.split(sep).collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let mut octets = [0u8; 6];
        for (slot, part) in octets.iter_mut().zip(&parts) {
            if part.len() != 2 || !part.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(bad());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| bad())?;
        }
        Ok(MacAddress(octets))
    }
}

/// A full 128-bit UUID.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Uuid128([u8; 16]);

impl Uuid128 {
    pub const fn from_bytes(bytes: [u8; 16]) -> Self {
        Uuid128(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    /// Expands a 16-bit SIG-assigned UUID into `0000XXXX-0000-1000-8000-00805f9b34fb`.
    pub fn from_short(short: u16) -> Self {
        let mut bytes = BASE_UUID;
        bytes[2..4].copy_from_slice(&short.to_be_bytes());
        Uuid128(bytes)
    }

    /// The 16-bit alias, if this UUID lies in the Bluetooth base range.
    pub fn as_short(&self) -> Option<u16> {
        let mut masked = self.0;
        masked[2] = 0;
        masked[3] = 0;
        (masked == BASE_UUID).then(|| u16::from_be_bytes([self.0[2], self.0[3]]))
    }

    /// Parses either the canonical 36-character form or a 4-hex-digit short UUID.
    pub fn parse_any(s: &str) -> Result<Self, UriError> {
        if s.len() == 4 && s.bytes().all(|c| c.is_ascii_hexdigit()) {
            let short = u16::from_str_radix(s, 16).map_err(|_| UriError::BadUuid(s.to_string()))?;
            return Ok(Uuid128::from_short(short));
        }
        s.parse()
    }
}

pub fn expand_uuid(short: u16) -> Uuid128 {
    Uuid128::from_short(short)
}

impl fmt::Display for Uuid128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.0.iter().enumerate() {
            if matches!(i, 4 | 6 | 8 | 10) {
                f.write_str("-")?;
            }
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl FromStr for Uuid128 {
    type Err = UriError;

    /// Strict canonical 8-4-4-4-12 form, case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || UriError::BadUuid(s.to_string());
        let raw = s.as_bytes();
        if raw.len() != 36 {
            return Err(bad());
        }
        let mut bytes = [0u8; 16];
        let mut nibbles = Vec::with_capacity(32);
        for (i, &c) in raw.iter().enumerate() {
            if matches!(i, 8 | 13 | 18 | 23) {
                if c != b'-' {
                    return Err(bad());
                }
                continue;
            }
            let v = (c as char).to_digit(16).ok_or_else(bad)?;
            nibbles.push(v as u8);
        }
        for (slot, pair) in bytes.iter_mut().zip(nibbles.chunks(2)) {
            *slot = (pair[0] << 4) | pair[1];
        }
        Ok(Uuid128(bytes))
    }
}

/// Identifies one characteristic of one service on one device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GattUri {
    pub device: MacAddress,
    pub service: Uuid128,
    pub characteristic: Uuid128,
}

impl GattUri {
    pub fn new(device: MacAddress, service: Uuid128, characteristic: Uuid128) -> Self {
        GattUri { device, service, characteristic }
    }
}

pub fn parse_gatt_uri(text: &str) -> Result<GattUri, UriError> {
    let (scheme, rest) = text.split_once("://").ok_or_else(|| UriError::BadStructure(text.to_string()))?;
    if !scheme.eq_ignore_ascii_case(SCHEME) {
        return Err(UriError::BadScheme(text.to_string()));
    }
    let segments: Vec<&str> = rest.split('/').collect();
    if segments.len() != 3 || segments.iter().any(|s| s.is_empty()) {
        return Err(UriError::BadStructure(text.to_string()));
    }
    Ok(GattUri {
        device: segments[0].parse()?,
        service: Uuid128::parse_any(segments[1])?,
        characteristic: Uuid128::parse_any(segments[2])?,
    })
}

pub fn format_gatt_uri(uri: &GattUri) -> String {
    format!("{SCHEME}://{}/{}/{}", uri.device.to_dashed(), uri.service, uri.characteristic)
}

impl fmt::Display for GattUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_gatt_uri(self))
    }
}

impl FromStr for GattUri {
    type Err = UriError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_gatt_uri(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMP: &str =
        "gatt://BE-58-30-00-CC-11/0000fff0-0000-1000-8000-00805f9b34fb/0000fff3-0000-1000-8000-00805f9b34fb";

    #[test]
    fn parses_lamp_href() {
        let uri = parse_gatt_uri(LAMP).unwrap();
        assert_eq!(uri.device.to_string(), "BE:58:30:00:CC:11");
        assert_eq!(uri.service.to_string(), "0000fff0-0000-1000-8000-00805f9b34fb");
        assert_eq!(uri.characteristic.to_string(), "0000fff3-0000-1000-8000-00805f9b34fb");
        assert_eq!(format_gatt_uri(&uri), LAMP);
    }

    #[test]
    fn short_uuids_expand() {
        let uri = parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff0/fff3").unwrap();
        assert_eq!(uri.service.to_string(), "0000fff0-0000-1000-8000-00805f9b34fb");
        assert_eq!(uri.characteristic.to_string(), "0000fff3-0000-1000-8000-00805f9b34fb");
        assert_eq!(uri.characteristic.as_short(), Some(0xfff3));
    }

    /// Builds the base-UUID expansion by string substitution, independent of the byte path.
    fn expand_by_text(short: u16) -> String {
        "0000XXXX-0000-1000-8000-00805f9b34fb".replace("XXXX", &format!("{short:04x}"))
    }

    #[test]
    fn expand_uuid_examples() {
        assert_eq!(expand_uuid(0xfff3).to_string(), "0000fff3-0000-1000-8000-00805f9b34fb");
        assert_eq!(expand_uuid(0x0000).to_string(), "00000000-0000-1000-8000-00805f9b34fb");
        assert_eq!(expand_uuid(0x180f).to_string(), "0000180f-0000-1000-8000-00805f9b34fb");
        for short in [0u16, 1, 0x2a19, 0x180f, 0xfff3, 0xffff] {
            assert_eq!(expand_uuid(short).to_string(), expand_by_text(short));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            parse_gatt_uri("http://AA:BB:CC:DD:EE:FF/fff0/fff3"),
            Err(UriError::BadScheme("http://AA:BB:CC:DD:EE:FF/fff0/fff3".into()))
        );
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE/fff0/fff3"), Err(UriError::BadDeviceId(_))));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE:GG/fff0/fff3"), Err(UriError::BadDeviceId(_))));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB-CC:DD:EE:FF/fff0/fff3"), Err(UriError::BadDeviceId(_))));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff/fff3"), Err(UriError::BadUuid(_))));
        // full UUID missing its last two octets
        assert!(matches!(
            parse_gatt_uri("gatt://BE-58-30-00-CC-11/0000fff0-0000-1000-8000-00805f9b/fff3"),
            Err(UriError::BadUuid(_))
        ));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff0"), Err(UriError::BadStructure(_))));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff0/fff3/x"), Err(UriError::BadStructure(_))));
        assert!(matches!(parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff0/"), Err(UriError::BadStructure(_))));
        assert!(matches!(parse_gatt_uri("AA:BB:CC:DD:EE:FF/fff0/fff3"), Err(UriError::BadStructure(_))));
    }

    #[test]
    fn uppercase_uuid_normalizes() {
        let upper = parse_gatt_uri("gatt://aa-bb-cc-dd-ee-ff/0000FFF0-0000-1000-8000-00805F9B34FB/FFF3").unwrap();
        let lower = parse_gatt_uri("gatt://AA:BB:CC:DD:EE:FF/fff0/fff3").unwrap();
        assert_eq!(upper, lower);
    }

    #[test]
    fn zero_mac_round_trips() {
        let uri = GattUri::new(MacAddress::new([0; 6]), expand_uuid(0), expand_uuid(1));
        let text = format_gatt_uri(&uri);
        assert!(text.starts_with("gatt://00-00-00-00-00-00/"));
        assert_eq!(parse_gatt_uri(&text).unwrap(), uri);
    }

    fn arb_uri() -> impl Strategy<Value = GattUri> {
        (any::<[u8; 6]>(), any::<[u8; 16]>(), any::<[u8; 16]>())
            .prop_map(|(m, s, c)| GattUri::new(MacAddress::new(m), Uuid128::from_bytes(s), Uuid128::from_bytes(c)))
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(uri in arb_uri()) {
            prop_assert_eq!(parse_gatt_uri(&format_gatt_uri(&uri)).unwrap(), uri);
        }

        #[test]
        fn colon_and_dash_spellings_agree(mac in any::<[u8; 6]>(), s in any::<u16>(), c in any::<u16>()) {
            let mac = MacAddress::new(mac);
            let colon = format!("gatt://{mac}/{s:04x}/{c:04X}");
            let dash = format!("gatt://{}/{}/{}", mac.to_dashed(), expand_uuid(s), expand_uuid(c));
            prop_assert_eq!(parse_gatt_uri(&colon).unwrap(), parse_gatt_uri(&dash).unwrap());
        }
    }
}
