//! Browser bindings: an in-memory `Service` driven from JavaScript.
//!
//! Every call returns a JSON string `{"status": u16, "body": <response json>}`.

use oxflow_core::apps::{Response, Service};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const PROGRAM: &str = "demo";

fn wrap(r: Response) -> String {
    let body: Value = serde_json::from_str(&r.body).unwrap_or(Value::String(r.body));
    json!({ "status": r.status, "body": body }).to_string()
}

#[wasm_bindgen]
#[derive(Default)]
pub struct Demo {
    service: Service,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Demo {
        Demo::default()
    }

    /// Parse, check and analyze `source`, replacing the current program.
    pub fn load(&mut self, source: &str) -> String {
        self.service = Service::new();
        match self.service.add(PROGRAM, source.to_string()) {
            Ok(()) => wrap(self.service.program(PROGRAM)),
            Err(e) => wrap(Response::error(400, e)),
        }
    }

    /// `request` is a slice request without the `program` field.
    pub fn slice(&self, request: &str) -> String {
        self.post("/slice", request)
    }

    /// `mode` is one of `modular`, `whole`, `mutblind`, `refblind`.
    pub fn ifc(&self, mode: &str) -> String {
        self.post("/ifc", &json!({ "mode": mode }).to_string())
    }

    fn post(&self, path: &str, request: &str) -> String {
        let mut v: Value = match serde_json::from_str(request) {
            Ok(v) => v,
            Err(e) => return wrap(Response::error(400, format!("bad request: {e}"))),
        };
        if let Some(o) = v.as_object_mut() {
            o.insert("program".into(), json!(PROGRAM));
        }
        wrap(self.service.handle("POST", path, &v.to_string()))
    }
}
