use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use fhed::heops::{depth_estimate, rot_add, CompConfig, OpDescriptor};
use fhed::netsvc::{read_frame, write_frame, Client, Message, NetError};
use fhed::slotvec::{BackendTag, CipherHandle, HEParams, KeySet, SlotVector};

fn clear_keys(log_slots: u32) -> KeySet {
    KeySet::generate(HEParams::new(log_slots, 30, 120).unwrap(), BackendTag::Clear, 0).unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn op() -> impl Strategy<Value = OpDescriptor> {
    prop_oneof![
        Just(OpDescriptor::RotAdd),
        Just(OpDescriptor::FcLayer),
        Just(OpDescriptor::LeakyReluApprox),
        (1u32..=12).prop_map(|k| OpDescriptor::DftSum { size: 1 << k }),
        (1usize..=40).prop_map(|degree| OpDescriptor::PolyEval { degree }),
        (1u32..=4, 0u32..=3, 0u32..=3).prop_map(|(n, dg, df)| OpDescriptor::CompB(CompConfig::new(n, dg, df).unwrap())),
        (1u32..=4, 0u32..=3, 0u32..=3).prop_map(|(n, dg, df)| OpDescriptor::ReluApprox(CompConfig::new(n, dg, df).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clear_backend_is_a_homomorphism(a in values(16), b in values(16), k in -40i64..40, seed in any::<u64>()) {
        let keys = clear_keys(4);
        let (enc, ev, dec) = (keys.encryptor().unwrap(), keys.evaluator().unwrap(), keys.decryptor().unwrap());
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = enc.encrypt(&SlotVector::from_real(&a).unwrap(), &mut rng).unwrap();
        let cb = enc.encrypt(&SlotVector::from_real(&b).unwrap(), &mut rng).unwrap();

        let sum = dec.decrypt(&ev.add(&ca, &cb).unwrap()).unwrap().real_parts();
        let prod = dec.decrypt(&ev.mult(&ca, &cb).unwrap()).unwrap().real_parts();
        let rot = dec.decrypt(&ev.rotate(&ca, k).unwrap()).unwrap().real_parts();
        for i in 0..16 {
            prop_assert_eq!(sum[i], a[i] + b[i]);
            prop_assert_eq!(prod[i], a[i] * b[i]);
            prop_assert_eq!(rot[i], a[(i as i64 + k).rem_euclid(16) as usize]);
        }
    }

    #[test]
    fn rot_add_sums_the_leading_window(k in 1u32..=6, v in values(64), seed in any::<u64>()) {
        // Dyadic inputs keep every partial sum exact.
        let size = 1usize << k;
        let mut v: Vec<f64> = v.iter().map(|x| (x * 1024.0).round() / 1024.0).collect();
        v[size..].fill(0.0);
        let sum: f64 = v.iter().sum();
        let keys = clear_keys(6);
        let (enc, ev, dec) = (keys.encryptor().unwrap(), keys.evaluator().unwrap(), keys.decryptor().unwrap());
        let ct = enc.encrypt(&SlotVector::from_real(&v).unwrap(), &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let out = dec.decrypt(&rot_add(&*ev, &ct, size).unwrap()).unwrap().real_parts();
        prop_assert_eq!(out[0], sum);
        if size == 64 {
            prop_assert!(out.iter().all(|&x| x == sum));
        }
    }

    #[test]
    fn depth_estimate_is_additive(a in prop::collection::vec(op(), 0..6), b in prop::collection::vec(op(), 0..6)) {
        let joined: Vec<OpDescriptor> = a.iter().chain(&b).cloned().collect();
        prop_assert_eq!(
            depth_estimate(&joined).unwrap(),
            depth_estimate(&a).unwrap() + depth_estimate(&b).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ckks_round_trip_and_serialization(v in values(32), seed in any::<u64>()) {
        let params = HEParams::new(5, 40, 120).unwrap();
        let keys = KeySet::generate(params, BackendTag::Ckks, seed).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ct = keys.encryptor().unwrap().encrypt(&SlotVector::from_real(&v).unwrap(), &mut rng).unwrap();
        let back = CipherHandle::from_bytes(&ct.to_bytes()).unwrap();
        prop_assert_eq!(&back, &ct);
        let out = keys.decryptor().unwrap().decrypt(&back).unwrap().real_parts();
        let err = out.iter().zip(&v).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err <= 1e-6, "round trip error {}", err);
    }

    #[test]
    fn clear_ciphertext_serialization_round_trips(v in values(8), seed in any::<u64>()) {
        let keys = clear_keys(3);
        let ct = keys.encryptor().unwrap().encrypt(&SlotVector::from_real(&v).unwrap(), &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let ct = keys.evaluator().unwrap().mult(&ct, &ct).unwrap();
        prop_assert_eq!(CipherHandle::from_bytes(&ct.to_bytes()).unwrap(), ct);
    }
}

/// A server that answers HELLO, then replies to the first request with `reply`.
fn fake_server(reply: impl FnOnce(u64) -> Message + Send + 'static) -> std::net::SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut r = s.try_clone().unwrap();
        let mut reply = Some(reply);
        while let Ok(Some(frame)) = read_frame(&mut r, 1 << 24) {
            let answer = match Message::from_frame(&frame).unwrap() {
                Message::Hello(_) => Message::HelloAck { model_id: "fake".into(), padded_size: 8, n_outputs: 8 },
                Message::InferReq { request_id, .. } => match reply.take() {
                    Some(f) => f(request_id),
                    None => return,
                },
                _ => continue,
            };
            write_frame(&mut s, &answer.to_frame()).unwrap();
        }
    });
    addr
}

fn request_through(addr: std::net::SocketAddr) -> Result<CipherHandle, NetError> {
    let keys = clear_keys(3);
    let ct = keys.encryptor().unwrap().encrypt(&SlotVector::zeros(8).unwrap(), &mut rand::rng()).unwrap();
    let mut client = Client::connect(addr, Duration::from_secs(5))?;
    client.hello(keys.params(), BackendTag::Clear)?;
    client.send_eval_keys(keys.eval_keys())?;
    client.infer(42, &ct)
}

#[test]
fn tampered_response_is_malformed() {
    let addr = fake_server(|id| Message::InferResp { request_id: id, ciphertext: b"not a ciphertext".to_vec() });
    let err = request_through(addr).unwrap_err();
    assert!(matches!(err, NetError::Malformed(_)), "{err}");
    assert_eq!(err.code(), Some(4));
}

#[test]
fn response_for_another_request_is_rejected() {
    let keys = clear_keys(3);
    let other = keys.encryptor().unwrap().encrypt(&SlotVector::zeros(8).unwrap(), &mut rand::rng()).unwrap();
    let addr = fake_server(move |id| Message::InferResp { request_id: id + 1, ciphertext: other.to_bytes() });
    let err = request_through(addr).unwrap_err();
    assert!(matches!(err, NetError::Protocol(_)), "{err}");
}
