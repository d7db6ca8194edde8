use super::frame::Frame;
use super::NetError;
use crate::slotvec::{BackendTag, HEParams, KeyBlob, KeyType};

pub const MSG_HELLO: u8 = 1;
pub const MSG_HELLO_ACK: u8 = 2;
pub const MSG_EVAL_KEYS: u8 = 3;
pub const MSG_INFER_REQ: u8 = 4;
pub const MSG_INFER_RESP: u8 = 5;
pub const MSG_ERROR: u8 = 6;

/// Codes carried by ERROR frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    ParamMismatch = 1,
    MissingEvalKeys = 2,
    DepthExceeded = 3,
    Malformed = 4,
    Internal = 5,
}

impl ErrorCode {
    pub fn from_u16(code: u16) -> Option<Self> {
        Some(match code {
            1 => ErrorCode::ParamMismatch,
            2 => ErrorCode::MissingEvalKeys,
            3 => ErrorCode::DepthExceeded,
            4 => ErrorCode::Malformed,
            5 => ErrorCode::Internal,
            _ => return None,
        })
    }
}

/// HELLO payload: the client's parameter set and backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelloParams {
    pub backend: BackendTag,
    pub log_slots: u32,
    pub log_scale: u32,
    pub log_modulus: u32,
}

impl HelloParams {
    pub fn new(params: &HEParams, backend: BackendTag) -> Self {
        Self {
            backend,
            log_slots: params.log_slots,
            log_scale: params.log_scale,
            log_modulus: params.log_modulus,
        }
    }

    pub fn matches(&self, params: &HEParams, backend: BackendTag) -> bool {
        *self == Self::new(params, backend)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(HelloParams),
    HelloAck {
        model_id: String,
        padded_size: u64,
        n_outputs: u64,
    },
    /// Serialized relinearization and rotation key blobs.
    EvalKeys(Vec<Vec<u8>>),
    InferReq {
        request_id: u64,
        ciphertext: Vec<u8>,
    },
    InferResp {
        request_id: u64,
        ciphertext: Vec<u8>,
    },
    Error {
        code: u16,
        message: String,
    },
}

impl Message {
    /// EVAL_KEYS message from key blobs. Refuses secret keys, so no code path
    /// can put secret material into a frame through this constructor.
    pub fn eval_keys(blobs: &[KeyBlob]) -> Result<Self, NetError> {
        if blobs.iter().any(KeyBlob::is_secret) {
            return Err(NetError::SecretKey);
        }
        Ok(Message::EvalKeys(blobs.iter().map(KeyBlob::to_bytes).collect()))
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Message::Error {
            code: code as u16,
            message: message.into(),
        }
    }

    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Hello(_) => MSG_HELLO,
            Message::HelloAck { .. } => MSG_HELLO_ACK,
            Message::EvalKeys(_) => MSG_EVAL_KEYS,
            Message::InferReq { .. } => MSG_INFER_REQ,
            Message::InferResp { .. } => MSG_INFER_RESP,
            Message::Error { .. } => MSG_ERROR,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let mut p = Vec::new();
        match self {
            Message::Hello(h) => {
                p.push(h.backend.to_byte());
                for v in [h.log_slots, h.log_scale, h.log_modulus] {
                    p.extend_from_slice(&v.to_le_bytes());
                }
            }
            Message::HelloAck {
                model_id,
                padded_size,
                n_outputs,
            } => {
                put_bytes(&mut p, model_id.as_bytes());
                p.extend_from_slice(&padded_size.to_le_bytes());
                p.extend_from_slice(&n_outputs.to_le_bytes());
            }
            Message::EvalKeys(blobs) => {
                p.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
                for b in blobs {
                    put_bytes(&mut p, b);
                }
            }
            Message::InferReq {
                request_id,
                ciphertext,
            }
            | Message::InferResp {
                request_id,
                ciphertext,
            } => {
                p.extend_from_slice(&request_id.to_le_bytes());
                p.extend_from_slice(ciphertext);
            }
            Message::Error { code, message } => {
                p.extend_from_slice(&code.to_le_bytes());
                p.extend_from_slice(message.as_bytes());
            }
        }
        Frame::new(self.msg_type(), p)
    }

    pub fn from_frame(frame: &Frame) -> Result<Self, NetError> {
        let mut r = Reader(&frame.payload);
        let msg = match frame.msg_type {
            MSG_HELLO => {
                let backend = BackendTag::from_byte(r.u8()?)
                    .map_err(|e| NetError::Malformed(e.to_string()))?;
                Message::Hello(HelloParams {
                    backend,
                    log_slots: r.u32()?,
                    log_scale: r.u32()?,
                    log_modulus: r.u32()?,
                })
            }
            MSG_HELLO_ACK => Message::HelloAck {
                model_id: String::from_utf8(r.bytes()?.to_vec())
                    .map_err(|_| NetError::Malformed("model id is not UTF-8".into()))?,
                padded_size: r.u64()?,
                n_outputs: r.u64()?,
            },
            MSG_EVAL_KEYS => {
                let count = r.u32()?;
                let mut blobs = Vec::new();
                for _ in 0..count {
                    let blob = r.bytes()?;
                    if KeyBlob::peek_type(blob).ok() == Some(KeyType::Secret) {
                        return Err(NetError::SecretKey);
                    }
                    blobs.push(blob.to_vec());
                }
                Message::EvalKeys(blobs)
            }
            MSG_INFER_REQ | MSG_INFER_RESP => {
                let request_id = r.u64()?;
                let ciphertext = r.rest().to_vec();
                if frame.msg_type == MSG_INFER_REQ {
                    Message::InferReq { request_id, ciphertext }
                } else {
                    Message::InferResp { request_id, ciphertext }
                }
            }
            MSG_ERROR => {
                let code = r.u16()?;
                Message::Error {
                    code,
                    message: String::from_utf8_lossy(r.rest()).into_owned(),
                }
            }
            other => return Err(NetError::UnknownType(other)),
        };
        if !r.0.is_empty() {
            return Err(NetError::Malformed(format!("{} trailing payload bytes", r.0.len())));
        }
        Ok(msg)
    }
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    out.extend_from_slice(&(b.len() as u64).to_le_bytes());
    out.extend_from_slice(b);
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.0.len() < n {
            return Err(NetError::Malformed("payload truncated".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bytes(&mut self) -> Result<&'a [u8], NetError> {
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| NetError::Malformed("length overflow".into()))?;
        self.take(len)
    }

    fn rest(&mut self) -> &'a [u8] {
        std::mem::take(&mut self.0)
    }
}
