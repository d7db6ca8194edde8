use std::io::BufReader;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::frame::{max_frame_from_env, read_frame, write_frame, Frame};
use super::messages::{HelloParams, Message};
use super::NetError;
use crate::model::{encode_symptoms, NetworkSpec, Prediction, SymptomResponse};
use crate::slotvec::{BackendTag, CipherHandle, EvalKeys, HEParams, KeySet, SlotVector};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

/// What the server reports about its model in HELLO_ACK.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerInfo {
    pub model_id: String,
    pub padded_size: usize,
    pub n_outputs: usize,
}

/// One connection to an evaluation server. Requests are sequential.
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    max_frame: u64,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self, NetError> {
        let mut last = None;
        for a in addr.to_socket_addrs()? {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout))?;
                    stream.set_write_timeout(Some(timeout))?;
                    stream.set_nodelay(true)?;
                    return Ok(Self {
                        reader: BufReader::new(stream.try_clone()?),
                        writer: stream,
                        max_frame: max_frame_from_env(),
                    });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.map_or_else(|| NetError::Protocol("address resolved to nothing".into()), NetError::Io))
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), NetError> {
        self.send_frame(&msg.to_frame())
    }

    pub fn send_frame(&mut self, frame: &Frame) -> Result<(), NetError> {
        write_frame(&mut self.writer, frame)
    }

    /// Next message from the server. ERROR frames become `NetError::Remote`.
    pub fn receive(&mut self) -> Result<Message, NetError> {
        let frame = read_frame(&mut self.reader, self.max_frame)?
            .ok_or_else(|| NetError::Protocol("server closed the connection".into()))?;
        match Message::from_frame(&frame)? {
            Message::Error { code, message } => Err(NetError::Remote { code, message }),
            m => Ok(m),
        }
    }

    pub fn hello(&mut self, params: &HEParams, backend: BackendTag) -> Result<ServerInfo, NetError> {
        self.send(&Message::Hello(HelloParams::new(params, backend)))?;
        match self.receive()? {
            Message::HelloAck {
                model_id,
                padded_size,
                n_outputs,
            } => Ok(ServerInfo {
                model_id,
                padded_size: padded_size as usize,
                n_outputs: n_outputs as usize,
            }),
            other => Err(unexpected(&other)),
        }
    }

    /// Uploads relinearization and rotation keys. The server answers only
    /// if it rejects them, so failures surface on the next request.
    pub fn send_eval_keys(&mut self, keys: &EvalKeys) -> Result<(), NetError> {
        self.send(&Message::eval_keys(&keys.to_blobs())?)
    }

    pub fn infer(&mut self, request_id: u64, ct: &CipherHandle) -> Result<CipherHandle, NetError> {
        self.send(&Message::InferReq {
            request_id,
            ciphertext: ct.to_bytes(),
        })?;
        match self.receive()? {
            Message::InferResp {
                request_id: echoed,
                ciphertext,
            } => {
                if echoed != request_id {
                    return Err(NetError::Protocol(format!(
                        "response for request {echoed}, expected {request_id}"
                    )));
                }
                CipherHandle::from_bytes(&ciphertext).map_err(|e| NetError::Malformed(e.to_string()))
            }
            other => Err(unexpected(&other)),
        }
    }
}

fn unexpected(m: &Message) -> NetError {
    NetError::Protocol(format!("unexpected message type {}", m.msg_type()))
}

#[derive(Debug, Clone)]
pub struct SubmitOptions {
    pub timeout: Duration,
    /// Fixes the encryption randomness and request id; otherwise both come
    /// from the OS.
    pub seed: Option<u64>,
}

impl Default for SubmitOptions {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            seed: None,
        }
    }
}

/// Encodes and encrypts a symptom response, has the server evaluate it
/// blind, and decrypts the result. The secret key stays in this process.
pub fn client_submit(
    addr: impl ToSocketAddrs,
    response: &SymptomResponse,
    keys: &KeySet,
    spec: &NetworkSpec,
    opts: &SubmitOptions,
) -> Result<Prediction, NetError> {
    let x = encode_symptoms(response, spec)?;
    let mut rng = match opts.seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    };
    let ct = keys.encryptor()?.encrypt(&SlotVector::from_real(&x)?, &mut rng)?;
    let decryptor = keys.decryptor()?;

    let mut client = Client::connect(addr, opts.timeout)?;
    let info = client.hello(keys.params(), keys.backend())?;
    if info.model_id != spec.model_id() || info.padded_size != spec.padded_size || info.n_outputs != spec.n_outputs() {
        return Err(NetError::Protocol(format!(
            "server model {} does not match local weights {}",
            info.model_id,
            spec.model_id()
        )));
    }
    client.send_eval_keys(keys.eval_keys())?;
    let request_id: u64 = rng.random();
    let out = client.infer(request_id, &ct)?;
    let logits = decryptor.decrypt(&out)?.real_parts()[..spec.n_outputs()].to_vec();
    Ok(Prediction::from_logits(logits, &spec.output_labels)?)
}
