//! Coordinator/worker wire protocol.
//!
//! Each frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! object whose `type` field names the frame. Payloads above
//! [`MAX_FRAME_LEN`] are refused before any buffer is allocated.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worker::Architecture;

pub const PROTOCOL_VERSION: &str = "1";
pub const MAX_FRAME_LEN: usize = 64 * 1024 * 1024;
const HEADER_LEN: usize = 4;

const FRAME_TYPES: [&str; 7] = [
    "HELLO",
    "TRANSLATE",
    "RESULT",
    "ERROR",
    "PING",
    "PONG",
    "SHUTDOWN",
];

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("frame of {0} bytes exceeds the {MAX_FRAME_LEN} byte limit")]
    Oversize(usize),
    #[error("framing error: {0}")]
    Framing(String),
    #[error("unknown frame type '{0}'")]
    UnknownType(String),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WireFrame {
    Hello {
        protocol_version: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        engine_kind: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        architecture: Option<Architecture>,
        /// Engine setup paid once at worker start (service architecture).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        setup_seconds: Option<f64>,
    },
    Translate {
        job_id: String,
        shard_id: u64,
        sentences: Vec<String>,
    },
    Result {
        job_id: String,
        shard_id: u64,
        translations: Vec<String>,
        cost_seconds: f64,
        /// Position of the request in the worker's arrival order.
        #[serde(default)]
        seq: u64,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shard_id: Option<u64>,
        message: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        retry_later: bool,
    },
    Ping,
    Pong,
    Shutdown,
}

impl WireFrame {
    pub fn hello() -> Self {
        WireFrame::Hello {
            protocol_version: PROTOCOL_VERSION.into(),
            engine_kind: None,
            architecture: None,
            setup_seconds: None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            WireFrame::Hello { .. } => "HELLO",
            WireFrame::Translate { .. } => "TRANSLATE",
            WireFrame::Result { .. } => "RESULT",
            WireFrame::Error { .. } => "ERROR",
            WireFrame::Ping => "PING",
            WireFrame::Pong => "PONG",
            WireFrame::Shutdown => "SHUTDOWN",
        }
    }

    fn check_encodable(&self) -> Result<(), ProtocolError> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ProtocolError::Malformed(format!("{what} must be finite")))
            }
        };
        match self {
            WireFrame::Result { cost_seconds, .. } => finite(*cost_seconds, "cost_seconds"),
            WireFrame::Hello {
                setup_seconds: Some(s),
                ..
            } => finite(*s, "setup_seconds"),
            _ => Ok(()),
        }
    }
}

pub fn encode_frame(frame: &WireFrame) -> Result<Vec<u8>, ProtocolError> {
    frame.check_encodable()?;
    let payload = serde_json::to_vec(frame).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    if payload.len() > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(payload.len()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

fn parse_payload(payload: &[u8]) -> Result<WireFrame, ProtocolError> {
    let value: serde_json::Value =
        serde_json::from_slice(payload).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    let ty = value
        .get("type")
        .and_then(|t| t.as_str())
        .ok_or_else(|| ProtocolError::Malformed("payload has no string 'type' field".into()))?;
    if !FRAME_TYPES.contains(&ty) {
        return Err(ProtocolError::UnknownType(ty.to_owned()));
    }
    serde_json::from_value(value).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

fn declared_len(header: [u8; HEADER_LEN]) -> Result<usize, ProtocolError> {
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(len));
    }
    Ok(len)
}

/// Decodes one frame from the front of `bytes`, returning it with the number
/// of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(WireFrame, usize), ProtocolError> {
    let header: [u8; HEADER_LEN] = bytes
        .get(..HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| {
            ProtocolError::Framing(format!(
                "need {HEADER_LEN} length bytes, have {}",
                bytes.len()
            ))
        })?;
    let len = declared_len(header)?;
    let payload = bytes.get(HEADER_LEN..HEADER_LEN + len).ok_or_else(|| {
        ProtocolError::Framing(format!(
            "truncated payload: declared {len} bytes, have {}",
            bytes.len() - HEADER_LEN
        ))
    })?;
    Ok((parse_payload(payload)?, HEADER_LEN + len))
}

/// Reads one frame. `Ok(None)` on clean end of stream before a header.
///
/// The payload buffer grows with the bytes actually received, so a peer that
/// declares a large frame and then stalls or disconnects costs nothing.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<WireFrame>, ProtocolError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(ProtocolError::Framing(
                    "stream ended inside a frame header".into(),
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = declared_len(header)?;
    let mut payload = Vec::new();
    reader.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len {
        return Err(ProtocolError::Framing(format!(
            "truncated payload: declared {len} bytes, received {}",
            payload.len()
        )));
    }
    parse_payload(&payload).map(Some)
}

pub fn write_frame<W: Write>(writer: &mut W, frame: &WireFrame) -> Result<(), ProtocolError> {
    let bytes = encode_frame(frame)?;
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ping_layout() {
        let bytes = encode_frame(&WireFrame::Ping).unwrap();
        let payload = br#"{"type":"PING"}"#;
        assert_eq!(&bytes[..4], &(payload.len() as u32).to_be_bytes());
        assert_eq!(&bytes[4..], payload);
        assert_eq!(
            decode_frame(&bytes).unwrap(),
            (WireFrame::Ping, bytes.len())
        );
    }

    #[test]
    fn oversize_declared_length_is_rejected() {
        let mut bytes = (1u32 << 31).to_be_bytes().to_vec();
        bytes.extend_from_slice(b"{}");
        assert!(matches!(decode_frame(&bytes), Err(ProtocolError::Oversize(n)) if n == 1 << 31));
        let mut reader = &bytes[..];
        assert!(matches!(
            read_frame(&mut reader),
            Err(ProtocolError::Oversize(_))
        ));
    }

    #[test]
    fn truncation_is_a_framing_error() {
        let bytes = encode_frame(&WireFrame::Shutdown).unwrap();
        for cut in 1..bytes.len() {
            assert!(
                matches!(decode_frame(&bytes[..cut]), Err(ProtocolError::Framing(_))),
                "cut {cut}"
            );
            let mut reader = &bytes[..cut];
            assert!(
                matches!(read_frame(&mut reader), Err(ProtocolError::Framing(_))),
                "cut {cut}"
            );
        }
        let mut empty: &[u8] = &[];
        assert!(read_frame(&mut empty).unwrap().is_none());
    }

    #[test]
    fn unknown_and_malformed_payloads() {
        let frame = |payload: &[u8]| {
            let mut b = (payload.len() as u32).to_be_bytes().to_vec();
            b.extend_from_slice(payload);
            b
        };
        assert!(matches!(
            decode_frame(&frame(br#"{"type":"FETCH"}"#)),
            Err(ProtocolError::UnknownType(t)) if t == "FETCH"
        ));
        assert!(matches!(
            decode_frame(&frame(b"not json")),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_frame(&frame(br#"{"kind":"PING"}"#)),
            Err(ProtocolError::Malformed(_))
        ));
        assert!(matches!(
            decode_frame(&frame(br#"{"type":"TRANSLATE","job_id":"j"}"#)),
            Err(ProtocolError::Malformed(_))
        ));
    }

    #[test]
    fn non_finite_cost_is_not_encodable() {
        let frame = WireFrame::Result {
            job_id: "j".into(),
            shard_id: 0,
            translations: vec![],
            cost_seconds: f64::NAN,
            seq: 0,
        };
        assert!(encode_frame(&frame).is_err());
    }

    #[test]
    fn frames_concatenate_on_a_stream() {
        let mut stream = Vec::new();
        write_frame(&mut stream, &WireFrame::hello()).unwrap();
        write_frame(&mut stream, &WireFrame::Pong).unwrap();
        let mut reader = &stream[..];
        assert_eq!(read_frame(&mut reader).unwrap(), Some(WireFrame::hello()));
        assert_eq!(read_frame(&mut reader).unwrap(), Some(WireFrame::Pong));
        assert_eq!(read_frame(&mut reader).unwrap(), None);
    }

    proptest! {
        #[test]
        fn translate_round_trip(
            job in "[a-z0-9-]{0,12}",
            shard in any::<u64>(),
            sentences in prop::collection::vec("\\PC{0,30}", 0..8),
        ) {
            let f = WireFrame::Translate { job_id: job, shard_id: shard, sentences };
            let bytes = encode_frame(&f).unwrap();
            prop_assert_eq!(decode_frame(&bytes).unwrap(), (f, bytes.len()));
        }
    }
}
