//! Client/server deployment over a framed TCP protocol, plus the command line.
//!
//! Frames are `FHED | version u8 | type u8 | length u64 LE | payload`. The
//! transport is plain TCP on purpose: confidentiality of the symptoms rests on
//! the homomorphic encryption, and the server only ever sees public and
//! evaluation keys.

pub mod cli;
mod client;
mod frame;
mod messages;
mod server;

use thiserror::Error;

pub use client::{client_submit, Client, ServerInfo, SubmitOptions, DEFAULT_TIMEOUT};
pub use frame::{
    max_frame_from_env, read_frame, write_frame, Frame, DEFAULT_MAX_FRAME, FRAME_MAGIC, HEADER_LEN,
    MAX_FRAME_ENV, PROTOCOL_VERSION,
};
pub use messages::{
    ErrorCode, HelloParams, Message, MSG_ERROR, MSG_EVAL_KEYS, MSG_HELLO, MSG_HELLO_ACK, MSG_INFER_REQ,
    MSG_INFER_RESP,
};
pub use server::{BoundServer, Server, ServerHandle};

use crate::model::ModelError;
use crate::HeError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// The byte stream is not a valid frame; the connection cannot continue.
    #[error("framing violation: {0}")]
    Framing(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("secret key material must never be sent")]
    SecretKey,
    #[error("server error {code}: {message}")]
    Remote { code: u16, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl NetError {
    /// The protocol error code this failure corresponds to, if any.
    pub fn code(&self) -> Option<u16> {
        match self {
            NetError::Remote { code, .. } => Some(*code),
            NetError::Framing(_) | NetError::Malformed(_) | NetError::UnknownType(_) | NetError::SecretKey => {
                Some(ErrorCode::Malformed as u16)
            }
            NetError::He(HeError::DepthExceeded { .. }) => Some(ErrorCode::DepthExceeded as u16),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::io::{Read, Write};
    use std::net::TcpStream;
    use std::time::Duration;

    use super::*;
    use crate::model::{Activation, Layer, NetworkSpec, SymptomResponse};
    use crate::slotvec::{BackendTag, HEParams, KeySet, SlotVector};

    fn identity_spec(n: usize) -> NetworkSpec {
        let rows = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
        let labels = |p: &str| (0..n).map(|i| format!("{p}{i}")).collect();
        NetworkSpec::new(labels("s"), labels("d"), vec![Layer::new(rows, vec![0.0; n], Activation::None).unwrap()]).unwrap()
    }

    fn start(spec: &NetworkSpec, params: HEParams) -> ServerHandle {
        Server::new(spec.clone(), params, BackendTag::Clear).unwrap().bind("127.0.0.1:0").unwrap().spawn().unwrap()
    }

    #[test]
    fn refuses_shallow_params_at_startup() {
        let spec = crate::model::synth_weights(1, &crate::model::SynthConfig::sized(16, 8, 4)).unwrap();
        let err = Server::new(spec, HEParams::new(4, 30, 200).unwrap(), BackendTag::Clear).err().unwrap();
        assert!(err.to_string().contains("raise log_modulus to at least 980"), "{err}");
    }

    #[test]
    fn contract_errors() {
        let spec = identity_spec(8);
        let params = HEParams::new(3, 30, 120).unwrap();
        let server = start(&spec, params);
        let mut c = Client::connect(server.addr(), Duration::from_secs(5)).unwrap();
        let wrong = HEParams::new(4, 30, 120).unwrap();
        assert!(matches!(c.hello(&wrong, BackendTag::Clear), Err(NetError::Remote { code: 1, .. })));
        c.hello(&params, BackendTag::Clear).unwrap();

        let keys = KeySet::generate(params, BackendTag::Clear, 0).unwrap();
        let ct = keys.encryptor().unwrap().encrypt(&SlotVector::zeros(8).unwrap(), &mut rand::rng()).unwrap();
        assert!(matches!(c.infer(1, &ct), Err(NetError::Remote { code: 2, .. })));

        c.send(&Message::InferReq { request_id: 3, ciphertext: vec![1, 2, 3] }).unwrap();
        assert!(matches!(c.receive(), Err(NetError::Remote { code: 2, .. })));
        c.send_eval_keys(keys.eval_keys()).unwrap();
        c.send(&Message::InferReq { request_id: 3, ciphertext: vec![1, 2, 3] }).unwrap();
        assert!(matches!(c.receive(), Err(NetError::Remote { code: 4, .. })));

        // Unknown types get an ERROR and the connection keeps working.
        c.send(&Message::Error { code: 0, message: String::new() }).unwrap();
        assert!(matches!(c.receive(), Err(NetError::Remote { code: 4, .. })));
        c.send_frame(&Frame::new(99, vec![])).unwrap();
        assert!(matches!(c.receive(), Err(NetError::Remote { code: 4, .. })));
        c.send(&Message::Hello(HelloParams::new(&params, BackendTag::Clear))).unwrap();
        assert!(matches!(c.receive().unwrap(), Message::HelloAck { .. }));
        assert_eq!(c.infer(7, &ct).unwrap().slot_count(), 8);
        c.send_eval_keys(keys.eval_keys()).unwrap();
        assert!(matches!(c.receive(), Err(NetError::Remote { code: 5, .. })));
    }

    #[test]
    fn framing_violation_closes_connection() {
        let spec = identity_spec(8);
        let server = start(&spec, HEParams::new(3, 30, 120).unwrap());
        let mut s = TcpStream::connect(server.addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        s.write_all(b"NOPE\x01\x01\x00\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let frame = read_frame(&mut s, 1 << 20).unwrap().unwrap();
        assert!(matches!(Message::from_frame(&frame).unwrap(), Message::Error { code: 4, .. }));
        let mut rest = Vec::new();
        assert_eq!(s.read_to_end(&mut rest).unwrap(), 0);
    }

    #[test]
    fn identity_round_trip_returns_input() {
        let spec = identity_spec(8);
        let params = HEParams::new(3, 30, 120).unwrap();
        let server = start(&spec, params);
        let keys = KeySet::generate(params, BackendTag::Clear, 0).unwrap();
        let yes = [1, 4, 6];
        let response = SymptomResponse::from_indices(&spec.input_labels, &yes);
        let p = client_submit(server.addr(), &response, &keys, &spec, &SubmitOptions::default()).unwrap();
        let expect: Vec<f64> = (0..8).map(|i| yes.contains(&i) as u8 as f64).collect();
        assert_eq!(p.logits, expect);
        assert_eq!(p.argmax_index, 1);
    }

    #[test]
    fn connection_refused_is_io_error() {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
        let err = Client::connect(port, Duration::from_secs(2)).err().unwrap();
        assert!(matches!(err, NetError::Io(_)));
    }
}
