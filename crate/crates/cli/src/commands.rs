//! Subcommands of the `oxflow` binary.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use oxflow_core::apps::{ablation_report, check_json, flow_json, Direction, Service, SliceRequest, Target};
use oxflow_core::cfg::{analyze_cfg, cfg_states, to_dot, to_dot_annotated};
use oxflow_core::flow::{analyze_fn, Bug, FlowConfig, FlowResult, Mode};
use oxflow_core::harness::check_noninterference;
use oxflow_core::interp::{Interp, NoObserver, Value};
use oxflow_core::lang::{parse_located, Program, Span};
use oxflow_core::ownership::{typecheck, TypedProgram};

#[derive(Parser, Debug)]
#[command(name = "oxflow", about = "Ownership-based information flow analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    Typed,
    Cfg,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Ownership-check a program and report location types.
    Check {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Dependency contexts of each function.
    Flow {
        file: PathBuf,
        #[arg(long, default_value = "modular")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "typed")]
        engine: Engine,
        #[arg(long = "fn")]
        fn_name: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Lowered control-flow graph of a function.
    Cfg {
        file: PathBuf,
        #[arg(long = "fn", default_value = "main")]
        fn_name: String,
        #[arg(long, default_value = "modular")]
        mode: Mode,
        #[arg(long)]
        dot: bool,
        /// Omit the per-statement contexts.
        #[arg(long)]
        plain: bool,
    },
    /// Evaluate a function on an argument.
    Run {
        file: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        /// Argument as JSON: numbers, booleans, null for unit, arrays for tuples.
        #[arg(long, default_value = "null")]
        init: String,
        #[arg(long)]
        json: bool,
    },
    /// Randomized noninterference check over a directory of programs.
    Ni {
        corpus: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "modular")]
        mode: Mode,
        /// Seed a defect into the analysis: branch-control, assign-conflicts, shrd-loans, uniq-mutation or deref-resolution.
        #[arg(long, value_parser = parse_bug)]
        bug: Option<Bug>,
        #[arg(long)]
        json: bool,
    },
    /// Backward or forward slice of a variable or a source range.
    Slice {
        file: PathBuf,
        #[arg(long = "fn")]
        fn_name: String,
        #[arg(long, conflicts_with = "span", required_unless_present = "span")]
        var: Option<String>,
        /// Source range as LINE:COL:LEN.
        #[arg(long, value_parser = parse_span)]
        span: Option<Span>,
        #[arg(long, default_value = "back")]
        dir: Direction,
        #[arg(long, default_value = "modular")]
        mode: Mode,
        #[arg(long)]
        json: bool,
    },
    /// Flows from secure sources to insecure sinks.
    Ifc {
        file: PathBuf,
        #[arg(long, default_value = "modular")]
        mode: Mode,
        #[arg(long)]
        json: bool,
    },
    /// Compare exit dependency sizes between modes over a directory of programs.
    Eval {
        corpus: PathBuf,
        #[arg(long, default_value = "modular")]
        base: Mode,
        #[arg(long, value_delimiter = ',', default_value = "whole,mutblind,refblind")]
        others: Vec<Mode>,
        #[arg(long)]
        csv: PathBuf,
        /// Histogram data; defaults to the CSV path with a `.json` extension.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Serve the JSON API for a directory of programs.
    Serve {
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of static files served for other GET paths.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
}

pub fn parse_bug(s: &str) -> Result<Bug, String> {
    Ok(match s {
        "branch-control" => Bug::DropBranchControl,
        "assign-conflicts" => Bug::DropAssignConflicts,
        "shrd-loans" => Bug::DropShrdLoans,
        "uniq-mutation" => Bug::DropUniqMutation,
        "deref-resolution" => Bug::DropDerefResolution,
        _ => return Err(format!("unknown bug `{s}`")),
    })
}

pub fn parse_span(s: &str) -> Result<Span, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [line, col, len] = parts.as_slice() else {
        return Err(format!("expected LINE:COL:LEN, got `{s}`"));
    };
    let num = |x: &str| x.parse::<u32>().map_err(|e| format!("`{x}`: {e}"));
    Ok(Span {
        line: num(line)?,
        col: num(col)?,
        len: num(len)?,
    })
}

/// Output of a command and its exit status.
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Outcome {
        Outcome { stdout, code: 0 }
    }
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_file(path: &Path) -> Result<(String, Program), String> {
    let src = read(path)?;
    let p = parse_located(&src).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((src, p))
}

fn checked(path: &Path) -> Result<(String, TypedProgram), String> {
    let (src, p) = parse_file(path)?;
    let tp = typecheck(&p).map_err(|errs| {
        errs.iter()
            .map(|(f, e)| format!("{}: in `{f}`: {e}", path.display()))
            .collect::<Vec<_>>()
            .join("\n")
    })?;
    Ok((src, tp))
}

fn corpus_files(dir: &Path) -> Result<Vec<(String, String)>, String> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ox"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), read(&p)?)))
        .collect()
}

fn json_to_value(v: &serde_json::Value) -> Result<Value, String> {
    Ok(match v {
        serde_json::Value::Null => Value::Unit,
        serde_json::Value::Bool(b) => Value::Bool(*b),
        serde_json::Value::Number(n) => Value::U32(
            n.as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| format!("`{n}` is not a u32"))?,
        ),
        serde_json::Value::Array(xs) => Value::Tuple(xs.iter().map(json_to_value).collect::<Result<_, _>>()?),
        other => return Err(format!("cannot use `{other}` as a value")),
    })
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn flow(path: &Path, mode: Mode, engine: Engine, fn_name: Option<&str>, as_json: bool) -> Result<Outcome, String> {
    let (_, tp) = checked(path)?;
    let cfg = FlowConfig::new(mode);
    let names: Vec<&str> = match fn_name {
        Some(f) => {
            if tp.func(f).is_none() {
                return Err(format!("unknown function `{f}`"));
            }
            vec![f]
        }
        None => tp.program.fns.iter().map(|f| f.name.as_str()).collect(),
    };
    let mut results: Vec<(&str, FlowResult)> = Vec::new();
    for f in names {
        let r = match engine {
            Engine::Typed => analyze_fn(&tp, f, cfg),
            Engine::Cfg => analyze_cfg(&tp, f, cfg),
        };
        if let Some(r) = r {
            results.push((f, r));
        }
    }
    let engine_name = match engine {
        Engine::Typed => "typed",
        Engine::Cfg => "cfg",
    };
    if as_json {
        let vs: Vec<serde_json::Value> = results
            .iter()
            .map(|(f, r)| flow_json(tp.program.func(f).expect("function"), r, engine_name))
            .collect();
        let v = if fn_name.is_some() { vs.into_iter().next().unwrap_or_default() } else { json!(vs) };
        return Ok(Outcome::ok(pretty(&v)));
    }
    let mut out = String::new();
    for (f, r) in &results {
        out.push_str(&format!("fn {f} ({mode}, {engine_name})\n"));
        for (p, k) in &r.exit_theta.map {
            out.push_str(&format!("  {p}: {k:?}\n"));
        }
        out.push_str(&format!("  return: {:?}\n", r.ret_kappa));
    }
    Ok(Outcome::ok(out))
}

fn slice_cmd(path: &Path, req: SliceRequest, as_json: bool) -> Result<Outcome, String> {
    let src = read(path)?;
    let mut svc = Service::new();
    svc.add(&req.program, src.clone()).map_err(|e| format!("{}: {e}", path.display()))?;
    let r = svc.slice(&req);
    if r.status != 200 {
        let msg: serde_json::Value = serde_json::from_str(&r.body).unwrap_or_default();
        return Err(msg["error"].as_str().unwrap_or(&r.body).to_string());
    }
    if as_json {
        return Ok(Outcome::ok(r.body + "\n"));
    }
    let v: serde_json::Value = serde_json::from_str(&r.body).expect("service output");
    let mut out = String::new();
    for s in v["spans"].as_array().into_iter().flatten() {
        let sp: Span = serde_json::from_value(s.clone()).expect("span");
        out.push_str(&format!("{}:{}\t{}\n", sp.line, sp.col, sp.text(&src)));
    }
    Ok(Outcome::ok(out))
}

pub fn run(cli: Cli) -> Result<Outcome, String> {
    match cli.cmd {
        Cmd::Check { file, json } => {
            let (_, p) = parse_file(&file)?;
            let v = check_json(&p);
            let failed = v["functions"]
                .as_array()
                .into_iter()
                .flatten()
                .any(|f| !f["errors"].as_array().is_none_or(|e| e.is_empty()));
            let stdout = if json {
                pretty(&v)
            } else {
                let mut out = String::new();
                for f in v["functions"].as_array().into_iter().flatten() {
                    let name = f["name"].as_str().unwrap_or_default();
                    match f["errors"].as_array().and_then(|e| e.first()) {
                        None => out.push_str(&format!("{name}: ok\n")),
                        Some(e) => out.push_str(&format!(
                            "{name}: {} at {}: {}\n",
                            e["kind"].as_str().unwrap_or_default(),
                            e["span"]
                                .as_object()
                                .map(|s| format!("{}:{}", s["line"], s["col"]))
                                .unwrap_or_else(|| "?".into()),
                            e["message"].as_str().unwrap_or_default()
                        )),
                    }
                }
                out
            };
            Ok(Outcome {
                stdout,
                code: i32::from(failed),
            })
        }
        Cmd::Flow {
            file,
            mode,
            engine,
            fn_name,
            json,
        } => flow(&file, mode, engine, fn_name.as_deref(), json),
        Cmd::Cfg {
            file,
            fn_name,
            mode,
            dot,
            plain,
        } => {
            let (_, tp) = checked(&file)?;
            let (body, states) =
                cfg_states(&tp, &fn_name, FlowConfig::new(mode)).ok_or_else(|| format!("no body for `{fn_name}`"))?;
            let out = match (dot, plain) {
                (true, false) => to_dot_annotated(&body, &states),
                (true, true) => to_dot(&body),
                (false, _) => {
                    let mut out = String::new();
                    for (i, b) in body.blocks.iter().enumerate() {
                        out.push_str(&format!("bb{i}:\n"));
                        for (j, st) in b.stmts.iter().enumerate() {
                            out.push_str(&format!("    {st}\n"));
                            if !plain {
                                let th = &states[i][j + 1];
                                let entries: Vec<String> = th.map.iter().map(|(k, v)| format!("{k}: {v:?}")).collect();
                                out.push_str(&format!("        {}\n", entries.join(", ")));
                            }
                        }
                        out.push_str(&format!("    {}\n", b.term));
                    }
                    out
                }
            };
            Ok(Outcome::ok(out))
        }
        Cmd::Run { file, entry, init, json } => {
            let (_, tp) = checked(&file)?;
            let arg: serde_json::Value = serde_json::from_str(&init).map_err(|e| format!("--init: {e}"))?;
            let arg = json_to_value(&arg)?;
            let (v, _) = Interp::new(&tp.program)
                .call_fn(&entry, arg, &mut NoObserver)
                .map_err(|e| e.to_string())?;
            Ok(Outcome::ok(if json {
                json!({ "result": v }).to_string() + "\n"
            } else {
                format!("{v}\n")
            }))
        }
        Cmd::Ni {
            corpus,
            trials,
            seed,
            mode,
            bug,
            json,
        } => {
            let mut cfg = FlowConfig::new(mode);
            if let Some(b) = bug {
                cfg = cfg.with_bug(b);
            }
            let mut reports = Vec::new();
            for (name, src) in corpus_files(&corpus)? {
                let p = parse_located(&src).map_err(|e| format!("{name}: {e}"))?;
                let tp = typecheck(&p).map_err(|e| format!("{name}: {}", e[0].1))?;
                reports.push(check_noninterference(&name, &tp, cfg, trials, seed));
            }
            let violations: usize = reports.iter().map(|r| r.violation_count).sum();
            let stdout = if json {
                pretty(&json!({ "mode": mode, "violations": violations, "reports": reports }))
            } else {
                let mut out = String::new();
                for r in &reports {
                    out.push_str(&format!(
                        "{}: {} trials, {} result checks, {} place checks, {} skipped, {} violations\n",
                        r.program, r.trials, r.part_a_checks, r.part_b_checks, r.skipped, r.violation_count
                    ));
                }
                out.push_str(&format!("total violations: {violations}\n"));
                out
            };
            Ok(Outcome {
                stdout,
                code: i32::from(violations > 0),
            })
        }
        Cmd::Slice {
            file,
            fn_name,
            var,
            span,
            dir,
            mode,
            json,
        } => {
            let criterion = match (var, span) {
                (Some(v), _) => Target::Var(v),
                (None, Some(s)) => Target::Span(s),
                (None, None) => return Err("need --var or --span".into()),
            };
            let program = file.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            slice_cmd(
                &file,
                SliceRequest {
                    program,
                    fn_name,
                    criterion,
                    direction: dir,
                    mode,
                },
                json,
            )
        }
        Cmd::Ifc { file, mode, json } => {
            let (src, tp) = checked(&file)?;
            let vs = oxflow_core::apps::ifc_check(&tp, mode);
            if json {
                return Ok(Outcome::ok(pretty(&json!({ "violations": vs }))));
            }
            let mut out = String::new();
            for v in &vs {
                let f = tp.program.func(&v.function).expect("function");
                let show = |id: u32| {
                    f.expr_by_id(id)
                        .map(|e| format!("{}:{} `{}`", e.span.line, e.span.col, e.span.text(&src)))
                        .unwrap_or_default()
                };
                out.push_str(&format!(
                    "{}: secure `{}` reaches insecure `{}`\n",
                    v.function, v.source_name, v.sink_fn
                ));
                for id in &v.chain {
                    out.push_str(&format!("    {id:>4}  {}\n", show(*id)));
                }
            }
            if vs.is_empty() {
                out.push_str("no violations\n");
            }
            Ok(Outcome::ok(out))
        }
        Cmd::Eval {
            corpus,
            base,
            others,
            csv,
            json,
        } => {
            let rep = ablation_report(&corpus_files(&corpus)?, base, &others);
            fs::write(&csv, rep.to_csv()).map_err(|e| format!("{}: {e}", csv.display()))?;
            let json_path = json.unwrap_or_else(|| csv.with_extension("json"));
            fs::write(&json_path, pretty(&rep.histogram_json())).map_err(|e| format!("{}: {e}", json_path.display()))?;
            let mut out = String::new();
            for s in &rep.summary {
                out.push_str(&format!(
                    "{} vs {}: {} compared, {:.1}% unchanged, median nonzero increase {}\n",
                    s.mode,
                    s.base,
                    s.compared,
                    100.0 * s.zero_fraction,
                    s.median_nonzero.map_or("n/a".to_string(), |m| format!("{:.1}%", 100.0 * m))
                ));
            }
            for s in &rep.skipped {
                out.push_str(&format!("skipped {}: {}\n", s.program, s.reason));
            }
            Ok(Outcome::ok(out))
        }
        Cmd::Serve {
            corpus,
            addr,
            static_dir,
        } => {
            let mut svc = Service::new();
            for (id, reason) in svc.load_dir(&corpus).map_err(|e| format!("{}: {e}", corpus.display()))? {
                eprintln!("skipping {id}: {reason}");
            }
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(crate::server::serve(Arc::new(svc), addr, static_dir))
                .map_err(|e| e.to_string())?;
            Ok(Outcome::ok(String::new()))
        }
    }
}
