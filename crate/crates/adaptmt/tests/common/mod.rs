#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use adaptmt::checkpoint::save_model;
use adaptmt::files::{save_bpe, save_config};
use adaptmt_core::adaptation::ModelConfig;
use adaptmt_core::neuralmt::NmtModel;
use adaptmt_core::simulator::{generate, pretrain, CorpusSpec, PretrainSpec, SyntheticCorpus};
use adaptmt_core::textpipe::Pipeline;
use base64::Engine;
use serde_json::Value;

pub struct System {
    pub corpus: SyntheticCorpus,
    pub pipeline: Pipeline,
    pub model: NmtModel<f32>,
}

/// A briefly pretrained system on the synthetic corpus, shared by tests.
pub fn system() -> &'static System {
    static SYSTEM: OnceLock<System> = OnceLock::new();
    SYSTEM.get_or_init(|| {
        let corpus = generate(&CorpusSpec {
            train_size: 120,
            test_size: 40,
            seed: 9,
            ..Default::default()
        });
        let mut spec = PretrainSpec {
            seed: 9,
            ..Default::default()
        };
        spec.train.epochs = 12;
        let (pipeline, model, _) = pretrain(&corpus.train, &spec).unwrap();
        System { corpus, pipeline, model }
    })
}

/// Writes `<id>.conf`, `<id>.bpe` and `<id>.ckpt` (+ vocabularies) into
/// `dir`; returns the config path.
pub fn write_project(dir: &Path, id: &str, edit: impl FnOnce(&mut ModelConfig)) -> PathBuf {
    let s = system();
    let mut cfg = ModelConfig::new(id, "en", "fr", &format!("{id}.bpe"), &format!("{id}.ckpt"));
    edit(&mut cfg);
    save_bpe(&s.pipeline.bpe, &dir.join(format!("{id}.bpe"))).unwrap();
    save_model(&s.model, &s.pipeline, &[], &dir.join(format!("{id}.ckpt"))).unwrap();
    let path = dir.join(format!("{id}.conf"));
    save_config(&cfg, &path).unwrap();
    path
}

/// Minimal HTTP/1.1 client over a raw socket.
pub fn http(addr: SocketAddr, method: &str, path: &str, auth: Option<(&str, &str)>, body: Option<&str>) -> (u16, Value) {
    let (status, _, text) = http_raw(addr, method, path, auth, body);
    let json = serde_json::from_str(&text).unwrap_or_else(|e| panic!("non-JSON body ({e}): {text:?}"));
    (status, json)
}

pub fn http_raw(
    addr: SocketAddr,
    method: &str,
    path: &str,
    auth: Option<(&str, &str)>,
    body: Option<&str>,
) -> (u16, String, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut req = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n");
    if let Some((u, p)) = auth {
        let token = base64::engine::general_purpose::STANDARD.encode(format!("{u}:{p}"));
        req.push_str(&format!("Authorization: Basic {token}\r\n"));
    }
    let body = body.unwrap_or("");
    if !body.is_empty() || method == "POST" {
        req.push_str(&format!("Content-Type: application/json\r\nContent-Length: {}\r\n", body.len()));
    }
    req.push_str("\r\n");
    req.push_str(body);
    stream.write_all(req.as_bytes()).unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, rest) = raw.split_once("\r\n\r\n").expect("response head");
    let status: u16 = head.split(' ').nth(1).unwrap().parse().unwrap();
    let chunked = head.to_ascii_lowercase().contains("transfer-encoding: chunked");
    let body = if chunked { dechunk(rest) } else { rest.to_string() };
    (status, head.to_string(), body)
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = s.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}
