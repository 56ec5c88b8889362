use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, OnceLock};

use oxflow_cli::server::router;
use oxflow_core::apps::Service;
use serde_json::{json, Value};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// One server shared by every test in this file.
fn server() -> SocketAddr {
    static ADDR: OnceLock<SocketAddr> = OnceLock::new();
    *ADDR.get_or_init(|| {
        let mut svc = Service::new();
        let failed = svc.load_dir(&corpus()).unwrap();
        assert!(failed.is_empty(), "{failed:?}");
        let svc = Arc::new(svc);
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async move {
                let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(l.local_addr().unwrap()).unwrap();
                axum::serve(l, router(svc, None)).await.unwrap();
            });
        });
        rx.recv().unwrap()
    })
}

fn request(method: &str, path: &str, body: &str) -> (u16, String) {
    let mut s = TcpStream::connect(server()).unwrap();
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    (status, body.to_string())
}

fn json_of(body: &str) -> Value {
    serde_json::from_str(body).unwrap()
}

#[test]
fn lists_programs() {
    let (st, body) = request("GET", "/programs", "");
    assert_eq!(st, 200);
    let ids: Vec<String> = serde_json::from_value(json_of(&body)["programs"].clone()).unwrap();
    assert!(ids.contains(&"tuple_field".to_string()) && ids.contains(&"password".to_string()));
    assert!(ids.len() >= 30);
}

#[test]
fn program_payload_has_source_functions_and_locations() {
    let (st, body) = request("GET", "/program/tuple_field", "");
    assert_eq!(st, 200);
    let v = json_of(&body);
    let src = std::fs::read_to_string(corpus().join("tuple_field.ox")).unwrap();
    assert_eq!(v["source"], json!(src));
    assert_eq!(v["functions"][0]["name"], "main");
    let locs = v["locations"].as_array().unwrap();
    assert!(!locs.is_empty());
    for l in locs {
        assert!(l["id"].is_u64() && l["span"]["line"].is_u64());
    }
    assert_eq!(request("GET", "/program/tuple_field", "").1, body);
}

#[test]
fn unknown_program_and_function_are_404() {
    assert_eq!(request("GET", "/program/nope", "").0, 404);
    let body = json!({"program": "nope", "fn": "main", "criterion": {"var": "t"}, "direction": "back"});
    assert_eq!(request("POST", "/slice", &body.to_string()).0, 404);
    let body = json!({"program": "tuple_field", "fn": "nope", "criterion": {"var": "t"}, "direction": "back"});
    assert_eq!(request("POST", "/slice", &body.to_string()).0, 404);
    assert_eq!(request("POST", "/ifc", &json!({"program": "nope"}).to_string()).0, 404);
}

#[test]
fn bad_criteria_are_400() {
    let body = json!({"program": "tuple_field", "fn": "main", "criterion": {"var": "zz"}, "direction": "back"});
    let (st, msg) = request("POST", "/slice", &body.to_string());
    assert_eq!(st, 400);
    assert!(json_of(&msg)["error"].as_str().unwrap().contains("zz"));
    let body = json!({"program": "tuple_field", "fn": "main", "criterion": {"span": {"line": 90, "col": 1, "len": 2}}, "direction": "fwd"});
    assert_eq!(request("POST", "/slice", &body.to_string()).0, 400);
    assert_eq!(request("POST", "/slice", "{not json").0, 400);
    let body = json!({"program": "tuple_field", "fn": "main", "criterion": {"var": "t"}, "direction": "sideways"});
    assert_eq!(request("POST", "/slice", &body.to_string()).0, 400);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_oxflow")).args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

#[test]
fn cli_and_http_slices_are_identical() {
    let file = corpus().join("tuple_field.ox");
    let file = file.to_str().unwrap();
    let cases = [
        (json!({"var": "t"}), "back", "modular", vec!["--var", "t"]),
        (json!({"var": "t"}), "fwd", "whole", vec!["--var", "t"]),
        (json!({"span": {"line": 3, "col": 26, "len": 1}}), "fwd", "modular", vec!["--span", "3:26:1"]),
        (json!({"span": {"line": 4, "col": 5, "len": 10}}), "back", "refblind", vec!["--span", "4:5:10"]),
    ];
    for (criterion, dir, mode, flag) in cases {
        let body = json!({"program": "tuple_field", "fn": "main", "criterion": criterion, "direction": dir, "mode": mode});
        let (st, http) = request("POST", "/slice", &body.to_string());
        assert_eq!(st, 200, "{http}");
        let mut args = vec!["slice", file, "--fn", "main", "--dir", dir, "--mode", mode, "--json"];
        args.extend(flag);
        let (code, out) = cli(&args);
        assert_eq!(code, 0);
        assert_eq!(out.strip_suffix('\n').unwrap().as_bytes(), http.as_bytes());
    }
}

#[test]
fn ifc_endpoint_reports_password_flow() {
    let (st, body) = request("POST", "/ifc", &json!({"program": "password"}).to_string());
    assert_eq!(st, 200);
    let v = json_of(&body);
    let vs = v["violations"].as_array().unwrap();
    assert_eq!(vs.len(), 1);
    assert!(vs[0]["chain"].as_array().unwrap().len() >= 3);
    let (_, body) = request("POST", "/ifc", &json!({"program": "constant_sink", "mode": "refblind"}).to_string());
    assert_eq!(json_of(&body)["violations"], json!([]));
}

#[test]
fn concurrent_requests_agree() {
    let body = json!({"program": "read_until", "fn": "read_until", "criterion": {"var": "buf"}, "direction": "back"}).to_string();
    let expected = request("POST", "/slice", &body);
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let b = body.clone();
            std::thread::spawn(move || request("POST", "/slice", &b))
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
}
