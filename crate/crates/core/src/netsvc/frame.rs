use std::io::{self, Read, Write};

use super::NetError;

pub const FRAME_MAGIC: &[u8; 4] = b"FHED";
pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
pub const DEFAULT_MAX_FRAME: u64 = 256 << 20;
pub const MAX_FRAME_ENV: &str = "FHED_MAX_FRAME";

/// Payload cap from `FHED_MAX_FRAME`, or 256 MiB when unset or unparsable.
pub fn max_frame_from_env() -> u64 {
    std::env::var(MAX_FRAME_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_FRAME)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: u8, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    /// `FHED`, version, type, little-endian u64 length, payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(FRAME_MAGIC);
        out.push(PROTOCOL_VERSION);
        out.push(self.msg_type);
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> Result<(), NetError> {
    w.write_all(&frame.to_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` means the peer closed the connection cleanly
/// between frames.
pub fn read_frame(r: &mut impl Read, max_payload: u64) -> Result<Option<Frame>, NetError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(NetError::Framing("connection closed inside a frame header".into())),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if &header[..4] != FRAME_MAGIC {
        return Err(NetError::Framing(format!("bad magic {:02x?}", &header[..4])));
    }
    if header[4] != PROTOCOL_VERSION {
        return Err(NetError::Framing(format!("unsupported protocol version {}", header[4])));
    }
    let len = u64::from_le_bytes(header[6..14].try_into().expect("8 bytes"));
    if len > max_payload {
        return Err(NetError::Framing(format!("payload of {len} bytes exceeds the {max_payload} byte cap")));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NetError::Framing("connection closed inside a frame payload".into()),
        _ => e.into(),
    })?;
    Ok(Some(Frame::new(header[5], payload)))
}
