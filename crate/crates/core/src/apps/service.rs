//! Request handling for the JSON API, independent of any HTTP server.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::ifc::{check_fn, IfcPolicy, IfcViolation};
use super::slice::{slice, Direction, SliceError, Target};
use crate::flow::{analyze_fn, FlowConfig, FlowResult, Mode};
use crate::lang::{parse_located, Location};
use crate::ownership::{typecheck, TypedProgram};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    pub fn ok(v: &impl Serialize) -> Response {
        Response {
            status: 200,
            body: serde_json::to_string(v).expect("serializable"),
        }
    }

    pub fn error(status: u16, msg: impl Into<String>) -> Response {
        Response {
            status,
            body: json!({ "error": msg.into() }).to_string(),
        }
    }
}

fn default_mode() -> Mode {
    Mode::Modular
}

#[derive(Clone, Debug, Deserialize)]
pub struct SliceRequest {
    pub program: String,
    #[serde(rename = "fn")]
    pub fn_name: String,
    pub criterion: Target,
    pub direction: Direction,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

#[derive(Clone, Debug, Deserialize)]
pub struct IfcRequest {
    pub program: String,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

#[derive(Serialize)]
struct IfcBody<'a> {
    violations: &'a [IfcViolation],
}

/// A loaded program with its analyses precomputed for every mode.
pub struct Loaded {
    pub source: String,
    pub tp: TypedProgram,
    pub results: BTreeMap<(String, Mode), FlowResult>,
    pub violations: BTreeMap<Mode, Vec<IfcViolation>>,
}

impl Loaded {
    pub fn new(source: String) -> Result<Loaded, String> {
        let p = parse_located(&source).map_err(|e| e.to_string())?;
        let tp = typecheck(&p).map_err(|errs| {
            errs.iter()
                .map(|(f, e)| format!("{f}: {e}"))
                .collect::<Vec<_>>()
                .join("; ")
        })?;
        let pol = IfcPolicy::from_program(&tp.program);
        let mut results = BTreeMap::new();
        let mut violations = BTreeMap::new();
        for mode in Mode::ALL {
            let mut vs = Vec::new();
            for f in &tp.program.fns {
                if let Some(r) = analyze_fn(&tp, &f.name, FlowConfig::new(mode)) {
                    vs.extend(check_fn(f, &r, &pol));
                    results.insert((f.name.clone(), mode), r);
                }
            }
            vs.sort();
            violations.insert(mode, vs);
        }
        Ok(Loaded {
            source,
            tp,
            results,
            violations,
        })
    }
}

/// Immutable set of programs answering API requests.
#[derive(Default)]
pub struct Service {
    pub programs: BTreeMap<String, Loaded>,
}

impl Service {
    pub fn new() -> Service {
        Service::default()
    }

    pub fn add(&mut self, id: &str, source: String) -> Result<(), String> {
        self.programs.insert(id.to_string(), Loaded::new(source)?);
        Ok(())
    }

    /// Load every `.ox` file in `dir`; returns the ones that failed with their reasons.
    pub fn load_dir(&mut self, dir: &Path) -> std::io::Result<Vec<(String, String)>> {
        let mut failed = Vec::new();
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ox"))
            .collect();
        paths.sort();
        for p in paths {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            if let Err(e) = self.add(&id, fs::read_to_string(&p)?) {
                failed.push((id, e));
            }
        }
        Ok(failed)
    }

    pub fn handle(&self, method: &str, path: &str, body: &str) -> Response {
        let path = path.split('?').next().unwrap_or(path);
        match (method, path) {
            ("GET", "/programs") => self.list(),
            ("GET", p) if p.starts_with("/program/") => self.program(&p["/program/".len()..]),
            ("POST", "/slice") => match serde_json::from_str::<SliceRequest>(body) {
                Ok(req) => self.slice(&req),
                Err(e) => Response::error(400, format!("bad slice request: {e}")),
            },
            ("POST", "/ifc") => match serde_json::from_str::<IfcRequest>(body) {
                Ok(req) => self.ifc(&req),
                Err(e) => Response::error(400, format!("bad ifc request: {e}")),
            },
            _ => Response::error(404, format!("no route for {method} {path}")),
        }
    }

    pub fn list(&self) -> Response {
        let ids: Vec<&String> = self.programs.keys().collect();
        Response::ok(&json!({ "programs": ids }))
    }

    fn get(&self, id: &str) -> Result<&Loaded, Response> {
        self.programs
            .get(id)
            .ok_or_else(|| Response::error(404, format!("unknown program `{id}`")))
    }

    pub fn program(&self, id: &str) -> Response {
        let l = match self.get(id) {
            Ok(l) => l,
            Err(r) => return r,
        };
        let functions: Vec<_> = l
            .tp
            .program
            .fns
            .iter()
            .map(|f| {
                json!({
                    "name": f.name,
                    "param": f.param,
                    "extern": f.is_extern(),
                    "span": f.span,
                })
            })
            .collect();
        let locations: Vec<Location> = l.tp.program.fns.iter().flat_map(|f| f.locations()).collect();
        let locations: Vec<_> = locations
            .iter()
            .map(|loc| json!({ "id": loc.id, "fn": loc.fn_name, "span": loc.span }))
            .collect();
        Response::ok(&json!({
            "id": id,
            "source": l.source,
            "functions": functions,
            "locations": locations,
        }))
    }

    pub fn slice(&self, req: &SliceRequest) -> Response {
        let l = match self.get(&req.program) {
            Ok(l) => l,
            Err(r) => return r,
        };
        let (Some(f), Some(r)) = (
            l.tp.program.func(&req.fn_name),
            l.results.get(&(req.fn_name.clone(), req.mode)),
        ) else {
            return Response::error(404, format!("unknown function `{}`", req.fn_name));
        };
        match slice(f, &l.source, r, &req.criterion, req.direction) {
            Ok(out) => Response::ok(&out),
            Err(e @ SliceError::UnknownFunction(_)) => Response::error(404, e.to_string()),
            Err(e) => Response::error(400, e.to_string()),
        }
    }

    pub fn ifc(&self, req: &IfcRequest) -> Response {
        match self.get(&req.program) {
            Ok(l) => Response::ok(&IfcBody {
                violations: &l.violations[&req.mode],
            }),
            Err(r) => r,
        }
    }
}
