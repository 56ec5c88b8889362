#![allow(dead_code)]

use std::fs;
use std::path::PathBuf;

use oxflow_core::lang::parse_located;
use oxflow_core::ownership::{typecheck, TypedProgram};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// `(name, source)` for every corpus program, sorted by name.
pub fn sources() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "ox"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn checked(src: &str) -> TypedProgram {
    typecheck(&parse_located(src).unwrap()).unwrap()
}

pub fn typed() -> Vec<(String, TypedProgram)> {
    sources().into_iter().map(|(n, s)| (n, checked(&s))).collect()
}

pub fn program(name: &str) -> TypedProgram {
    checked(&fs::read_to_string(corpus_dir().join(format!("{name}.ox"))).unwrap())
}
