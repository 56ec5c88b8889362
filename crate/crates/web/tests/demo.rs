use oxflow_web::Demo;
use serde_json::{json, Value};

const PASSWORD: &str = include_str!("../../../corpus/password.ox");
const TUPLE: &str = include_str!("../../../corpus/tuple_field.ox");

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn load_reports_locations_and_errors() {
    let mut d = Demo::new();
    let v = parse(d.load(TUPLE));
    assert_eq!(v["status"], 200);
    assert!(!v["body"]["locations"].as_array().unwrap().is_empty());
    let v = parse(d.load("fn main( -> unit { }"));
    assert_eq!(v["status"], 400);
    assert!(v["body"]["error"].is_string());
}

#[test]
fn slice_matches_service() {
    let mut d = Demo::new();
    d.load(TUPLE);
    let req = json!({"fn": "main", "criterion": {"var": "t"}, "direction": "back"});
    let v = parse(d.slice(&req.to_string()));
    assert_eq!(v["status"], 200);
    let mut svc = oxflow_core::apps::Service::new();
    svc.add("tuple_field", TUPLE.to_string()).unwrap();
    let mut full = req.clone();
    full["program"] = json!("tuple_field");
    let direct = svc.handle("POST", "/slice", &full.to_string());
    assert_eq!(v["body"], parse(direct.body));
    assert_eq!(parse(d.slice("{oops"))["status"], 400);
}

#[test]
fn ifc_flags_password_only_in_its_program() {
    let mut d = Demo::new();
    d.load(PASSWORD);
    let v = parse(d.ifc("modular"));
    assert_eq!(v["body"]["violations"].as_array().unwrap().len(), 1);
    d.load(TUPLE);
    assert_eq!(parse(d.ifc("whole"))["body"]["violations"], json!([]));
    assert_eq!(parse(d.ifc("bogus"))["status"], 400);
}
