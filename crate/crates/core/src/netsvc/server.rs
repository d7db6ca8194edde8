use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::frame::{max_frame_from_env, read_frame, write_frame};
use super::messages::{ErrorCode, HelloParams, Message};
use super::NetError;
use crate::ckks::CkksContext;
use crate::model::{encrypted_infer, ModelError, NetworkSpec};
use crate::slotvec::{BackendTag, CipherHandle, EvalKeys, Evaluator, HEParams, KeyBlob};
use crate::HeError;

/// Immutable state shared by every connection.
struct Shared {
    spec: NetworkSpec,
    params: HEParams,
    backend: BackendTag,
    ctx: Option<Arc<CkksContext>>,
    model_id: String,
    max_frame: u64,
}

/// Blind evaluation server. Holds the model and parameters, never a secret
/// key; clients upload evaluation keys per connection.
pub struct Server {
    shared: Arc<Shared>,
}

impl Server {
    /// Refuses parameter sets that cannot run the whole network.
    pub fn new(spec: NetworkSpec, params: HEParams, backend: BackendTag) -> Result<Self, NetError> {
        params.validate()?;
        if params.slot_count() != spec.padded_size {
            return Err(NetError::Protocol(format!(
                "parameters give {} slots but the network needs {}",
                params.slot_count(),
                spec.padded_size
            )));
        }
        let depth = spec.depth()?;
        let budget = params.depth_budget();
        if depth > budget {
            return Err(HeError::DepthExceeded {
                required: depth,
                available: budget,
                suggested_log_modulus: HEParams::for_depth(params.log_slots, params.log_scale, depth)?
                    .log_modulus,
            }
            .into());
        }
        let ctx = match backend {
            BackendTag::Clear => None,
            BackendTag::Ckks => Some(CkksContext::new(params)?),
        };
        Ok(Self {
            shared: Arc::new(Shared {
                model_id: spec.model_id(),
                spec,
                params,
                backend,
                ctx,
                max_frame: max_frame_from_env(),
            }),
        })
    }

    pub fn with_max_frame(mut self, max_frame: u64) -> Self {
        let shared = Arc::get_mut(&mut self.shared).expect("server not yet running");
        shared.max_frame = max_frame;
        self
    }

    pub fn bind(self, addr: impl ToSocketAddrs) -> Result<BoundServer, NetError> {
        let listener = TcpListener::bind(addr)?;
        Ok(BoundServer {
            listener,
            shared: self.shared,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }
}

pub struct BoundServer {
    listener: TcpListener,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
}

impl BoundServer {
    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.listener.local_addr()?)
    }

    /// Accepts connections until stopped, one thread per connection.
    pub fn run(self) -> Result<(), NetError> {
        for stream in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let shared = self.shared.clone();
            thread::spawn(move || handle_connection(&shared, stream));
        }
        Ok(())
    }

    /// Runs the accept loop on a background thread.
    pub fn spawn(self) -> Result<ServerHandle, NetError> {
        let addr = self.local_addr()?;
        let stop = self.stop.clone();
        let thread = thread::spawn(move || self.run());
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<(), NetError>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting new connections. Open connections finish on their own.
    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_inner();
        }
    }
}

#[derive(Default)]
struct Session {
    hello: bool,
    evaluator: Option<Arc<dyn Evaluator>>,
}

fn handle_connection(shared: &Shared, stream: TcpStream) {
    let _ = stream.set_nodelay(true);
    let Ok(read_half) = stream.try_clone() else { return };
    let mut reader = BufReader::new(read_half);
    let mut writer = stream;
    let mut session = Session::default();
    loop {
        let frame = match read_frame(&mut reader, shared.max_frame) {
            Ok(Some(f)) => f,
            Ok(None) => return,
            Err(e @ NetError::Framing(_)) => {
                let _ = write_frame(&mut writer, &Message::error(ErrorCode::Malformed, e.to_string()).to_frame());
                return;
            }
            Err(_) => return,
        };
        let reply = match Message::from_frame(&frame) {
            Ok(msg) => shared.respond(msg, &mut session),
            Err(e) => Some(Message::error(ErrorCode::Malformed, e.to_string())),
        };
        if let Some(reply) = reply {
            if write_frame(&mut writer, &reply.to_frame()).is_err() {
                return;
            }
        }
    }
}

impl Shared {
    /// Reply to one client message. EVAL_KEYS is answered only on failure.
    fn respond(&self, msg: Message, session: &mut Session) -> Option<Message> {
        match msg {
            Message::Hello(h) => Some(if h.matches(&self.params, self.backend) {
                session.hello = true;
                Message::HelloAck {
                    model_id: self.model_id.clone(),
                    padded_size: self.spec.padded_size as u64,
                    n_outputs: self.spec.n_outputs() as u64,
                }
            } else {
                Message::error(
                    ErrorCode::ParamMismatch,
                    format!("server runs {}, client sent {}", describe(&HelloParams::new(&self.params, self.backend)), describe(&h)),
                )
            }),
            Message::EvalKeys(blobs) => {
                if !session.hello {
                    return Some(Message::error(ErrorCode::ParamMismatch, "HELLO must precede EVAL_KEYS"));
                }
                if session.evaluator.is_some() {
                    return Some(Message::error(ErrorCode::Internal, "evaluation keys already received"));
                }
                match self.load_keys(&blobs) {
                    Ok(ev) => {
                        session.evaluator = Some(ev);
                        None
                    }
                    Err((code, why)) => Some(Message::error(code, why)),
                }
            }
            Message::InferReq { request_id, ciphertext } => {
                let Some(ev) = &session.evaluator else {
                    return Some(Message::error(ErrorCode::MissingEvalKeys, "send EVAL_KEYS before INFER_REQ"));
                };
                Some(match self.infer(&**ev, &ciphertext) {
                    Ok(out) => Message::InferResp { request_id, ciphertext: out },
                    Err((code, why)) => Message::error(code, format!("request {request_id}: {why}")),
                })
            }
            other => Some(Message::error(
                ErrorCode::Malformed,
                format!("unexpected message type {} from a client", other.msg_type()),
            )),
        }
    }

    fn load_keys(&self, blobs: &[Vec<u8>]) -> Result<Arc<dyn Evaluator>, (ErrorCode, String)> {
        let mut parsed = Vec::with_capacity(blobs.len());
        for bytes in blobs {
            let blob = KeyBlob::from_bytes(bytes).map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
            if blob.is_secret() {
                return Err((ErrorCode::Malformed, "secret key material refused".into()));
            }
            parsed.push(blob);
        }
        let keys = EvalKeys::from_blobs_with(self.params, self.backend, self.ctx.clone(), &parsed)
            .map_err(|e| (he_code(&e), e.to_string()))?;
        keys.evaluator().map_err(|e| (he_code(&e), e.to_string()))
    }

    fn infer(&self, ev: &dyn Evaluator, bytes: &[u8]) -> Result<Vec<u8>, (ErrorCode, String)> {
        let ct = CipherHandle::from_bytes(bytes).map_err(|e| (ErrorCode::Malformed, e.to_string()))?;
        if ct.backend() != self.backend {
            return Err((ErrorCode::Malformed, format!("{} ciphertext sent to a {} server", ct.backend().name(), self.backend.name())));
        }
        match encrypted_infer(&self.spec, &ct, ev) {
            Ok(out) => Ok(out.to_bytes()),
            Err(ModelError::He(e)) => Err((he_code(&e), e.to_string())),
            Err(e @ ModelError::Dimension(_)) => Err((ErrorCode::Malformed, e.to_string())),
            Err(e) => Err((ErrorCode::Internal, e.to_string())),
        }
    }
}

fn he_code(e: &HeError) -> ErrorCode {
    match e {
        HeError::DepthExceeded { .. } => ErrorCode::DepthExceeded,
        HeError::Key(_) => ErrorCode::MissingEvalKeys,
        HeError::Params(_) | HeError::Backend(_) => ErrorCode::ParamMismatch,
        HeError::Size(_) | HeError::Scale { .. } | HeError::Format(_) | HeError::EncodingOverflow { .. } => {
            ErrorCode::Malformed
        }
        HeError::Config(_) => ErrorCode::Internal,
    }
}

fn describe(h: &HelloParams) -> String {
    format!(
        "{} log_slots={} log_scale={} log_modulus={}",
        h.backend.name(),
        h.log_slots,
        h.log_scale,
        h.log_modulus
    )
}
