//! Orchestration: solve -> kernels -> targets -> energies -> verify, with one
//! JSON document out.

use serde_json::{json, Value};

use nctr_core::bethe::{solve_bethe, BetheSystem, NewtonOptions};
use nctr_core::correlators::RecursionContext;
use nctr_core::energies::{f0, f1, fg_high, FgOptions, LogValue};
use nctr_core::error::{Error, Result};
use nctr_core::potential::Potential;
use nctr_core::scalar::{rational_to_f64, Scalar};
use nctr_core::verify::{
    check_asymptotics, check_dilaton, check_kernel_independence, check_loop_equation, check_oracle,
    check_resy, check_symmetry, check_variational, check_w30_forms, CheckReport, CheckStatus,
    PipelineSpec,
};

use crate::config::{parse_rational, BackendSpec, InjectSpec, RunConfig};
use crate::output::ScalarJson;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Correlators,
    FreeEnergy,
    Verify,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

pub struct Outcome {
    pub document: String,
    pub exit_code: i32,
}

pub fn execute(
    cmd: Command,
    cfg: &RunConfig,
    format: Format,
) -> std::result::Result<Outcome, String> {
    let result = match cfg.backend {
        BackendSpec::Rational => run_typed::<nctr_core::Rational>(cmd, cfg, format),
        BackendSpec::Double => run_typed::<nctr_core::Complex>(cmd, cfg, format),
        BackendSpec::Bigfloat { bits } => {
            nctr_core::scalar::set_big_precision(bits);
            run_typed::<nctr_core::BigComplex>(cmd, cfg, format)
        }
    };
    result.map_err(|e| format!("{e}"))
}

fn parse_scalar<S: Scalar>(s: &str) -> Result<S> {
    let r = parse_rational(s).map_err(Error::InvalidInput)?;
    Ok(S::from_rational(&r))
}

fn build_potential<S: Scalar>(cfg: &RunConfig) -> Result<Potential<S>> {
    let coeffs: Vec<S> = cfg
        .potential
        .vprime_poly
        .iter()
        .map(|s| parse_scalar(s))
        .collect::<Result<_>>()?;
    let poles: Vec<(S, S)> = cfg
        .potential
        .poles
        .iter()
        .map(|(a, st)| Ok((parse_scalar(a)?, parse_scalar(st)?)))
        .collect::<Result<_>>()?;
    Potential::new(coeffs, poles)
}

fn newton_options(cfg: &RunConfig) -> NewtonOptions {
    NewtonOptions {
        max_iter: cfg.newton.max_iter,
        tol: cfg.newton.tol,
        max_halvings: 20,
    }
}

fn tensor_json<S: Scalar + ScalarJson>(t: &nctr_core::correlators::WTensor<S>) -> Value {
    let terms: Vec<Value> = t
        .terms()
        .map(|(idx, c)| {
            json!({
                "idx": idx.iter().map(|&(j, k)| json!([j, k])).collect::<Vec<_>>(),
                "val": c.to_json(),
            })
        })
        .collect();
    json!({
        "g": t.g(),
        "n": t.n(),
        "universal_part": t.has_universal_part(),
        "terms": terms,
    })
}

fn logvalue_json<S: Scalar + ScalarJson>(v: &LogValue<S>) -> Value {
    let logs: Vec<Value> = v
        .logs
        .iter()
        .map(|(c, a)| json!([c.to_json(), a.to_json()]))
        .collect();
    let collapsed = v.collapse().ok().map(|c| c.to_json());
    json!({ "analytic": v.analytic.to_json(), "logs": logs, "collapsed": collapsed })
}

fn run_typed<S: Scalar + ScalarJson>(
    cmd: Command,
    cfg: &RunConfig,
    format: Format,
) -> Result<Outcome> {
    let pot: Potential<S> = build_potential(cfg)?;
    let hbar: S = parse_scalar(&cfg.hbar)?;
    let seeds: Vec<S> = cfg
        .newton
        .seeds
        .iter()
        .map(|s| parse_scalar(s))
        .collect::<Result<_>>()?;
    if seeds.len() != cfg.m {
        return Err(Error::InvalidInput(format!(
            "m = {} but {} seeds were given",
            cfg.m,
            seeds.len()
        )));
    }
    let opts = newton_options(cfg);
    let mut sys = solve_bethe(&pot, hbar.clone(), &seeds, &opts)?;
    if let Some(InjectSpec::A { i, j, rel }) = cfg.inject {
        sys.corrupt_a_entry(i, j, rel);
    }

    let mut doc = serde_json::Map::new();
    doc.insert(
        "config_echo".into(),
        serde_json::to_value(cfg).expect("config echo"),
    );
    doc.insert(
        "roots".into(),
        Value::Array(sys.roots().iter().map(|r| r.to_json()).collect()),
    );
    let m = sys.root_count();
    doc.insert(
        "a_matrix".into(),
        Value::Array(
            (0..m)
                .map(|i| {
                    Value::Array(
                        (0..m)
                            .map(|j| sys.inverse_hessian().at(i, j).to_json())
                            .collect(),
                    )
                })
                .collect(),
        ),
    );
    doc.insert("bethe_residual".into(), json!(sys.bethe_residual()));

    if cmd == Command::Oracle {
        let spec = cfg.oracle.as_ref().ok_or_else(|| {
            Error::InvalidInput("the oracle command needs an `oracle` config block".into())
        })?;
        let s_param = oracle_s_parameter(cfg)?;
        let report = check_oracle(s_param, spec.beta, &spec.n_values, cfg.seed)?;
        let failed = !report.passed();
        doc.insert(
            "checks".into(),
            serde_json::to_value(vec![&report]).expect("report"),
        );
        return finish(doc, format, failed);
    }

    let mut ctx = RecursionContext::new(sys.clone())?;

    let mut tensors = Vec::new();
    if cmd != Command::Solve {
        for &(g, n) in &cfg.targets {
            let t = ctx.compute_w(g, n)?;
            tensors.push(tensor_json(&t));
        }
    }
    doc.insert("tensors".into(), Value::Array(tensors));

    if let Some(InjectSpec::Tensor { g, n, rel }) = cfg.inject {
        let mut t = (*ctx.compute_w(g, n)?).clone();
        t.corrupt_first_entry(rel);
        ctx.poke_tensor(g, n, t);
    }

    let mut energies = Vec::new();
    if cmd == Command::FreeEnergy || cmd == Command::Verify {
        let fg_opts = FgOptions {
            newton: opts.clone(),
            ..FgOptions::default()
        };
        for &g in &cfg.energies {
            let entry = match g {
                0 => json!({ "g": 0, "value": logvalue_json(&f0(&sys)?) }),
                1 => json!({ "g": 1, "value": logvalue_json(&f1(&sys)?) }),
                _ => {
                    let r = fg_high(&pot, sys.roots(), g, &hbar, &fg_opts)?;
                    json!({
                        "g": g,
                        "value": r.value.to_json(),
                        "heldout_residual": r.profile.heldout_residual,
                        "resonant_rel": r.profile.resonant_rel,
                    })
                }
            };
            energies.push(entry);
        }
    }
    doc.insert("energies".into(), Value::Array(energies));

    let mut any_failed = false;
    let mut checks: Vec<CheckReport> = Vec::new();
    if cmd == Command::Verify && !cfg.verify.is_empty() {
        let names = cfg.verify.names().map_err(Error::InvalidInput)?;
        let targets: Vec<(u32, u32)> = if cfg.targets.is_empty() {
            vec![(0, 3), (1, 1)]
        } else {
            cfg.targets.clone()
        };
        let descriptors = build_descriptors(&names, &targets);
        checks = run_checks(descriptors, &pot, &sys, &hbar, &opts, cfg, &mut ctx)?;
        any_failed = checks.iter().any(|c| c.status == CheckStatus::Fail);
    }
    doc.insert(
        "checks".into(),
        serde_json::to_value(&checks).expect("check serialization"),
    );
    finish(doc, format, any_failed)
}

/// The oracle needs the reference one-well shape: V' = x - s^2/x.
fn oracle_s_parameter(cfg: &RunConfig) -> Result<f64> {
    let ok_poly = cfg.potential.vprime_poly.len() == 2;
    if !ok_poly || cfg.potential.poles.len() != 1 || cfg.m != 1 {
        return Err(Error::InvalidInput(
            "oracle needs m = 1 and V' = x + S/(x - 0) with S = -s^2".into(),
        ));
    }
    let strength = parse_rational(&cfg.potential.poles[0].1).map_err(Error::InvalidInput)?;
    let s2 = -rational_to_f64(&strength);
    if s2 <= 0.0 {
        return Err(Error::InvalidInput(
            "oracle pole strength must be -s^2 < 0".into(),
        ));
    }
    Ok(s2.sqrt())
}

enum CheckDescriptor {
    Symmetry(u32, u32),
    LoopEquation(u32, u32),
    KernelIndependence(Vec<(u32, u32)>),
    W30,
    Moment(u32, u32, u32),
    Asymptotics,
    Variational(u32, u32, usize),
    Dilaton(u32, u32),
}

fn build_descriptors(names: &[String], targets: &[(u32, u32)]) -> Vec<CheckDescriptor> {
    let mut out = Vec::new();
    for name in names {
        match name.as_str() {
            "symmetry" => {
                for &(g, n) in targets {
                    out.push(CheckDescriptor::Symmetry(g, n));
                }
            }
            "loop_equation" => {
                out.push(CheckDescriptor::LoopEquation(0, 0));
                for &(g, n) in targets {
                    out.push(CheckDescriptor::LoopEquation(g, n - 1));
                }
            }
            "kernel_independence" => {
                out.push(CheckDescriptor::KernelIndependence(targets.to_vec()));
            }
            "w30" => out.push(CheckDescriptor::W30),
            "moments" => {
                for &(g, n) in targets {
                    for k in 0..=1 {
                        out.push(CheckDescriptor::Moment(g, n, k));
                    }
                }
            }
            "asymptotics" => out.push(CheckDescriptor::Asymptotics),
            "variational" => out.push(CheckDescriptor::Variational(0, 1, 1)),
            "dilaton" => {
                out.push(CheckDescriptor::Dilaton(0, 1));
                out.push(CheckDescriptor::Dilaton(1, 1));
            }
            other => {
                // surfaces as a failed config, not a silent skip
                out.push(CheckDescriptor::Symmetry(u32::MAX, 0));
                let _ = other;
            }
        }
    }
    out
}

fn run_one_check<S: Scalar>(
    d: &CheckDescriptor,
    pot: &Potential<S>,
    sys: &BetheSystem<S>,
    hbar: &S,
    opts: &NewtonOptions,
    seed: u64,
    ctx: &mut RecursionContext<S>,
) -> Result<CheckReport> {
    match d {
        CheckDescriptor::Symmetry(g, n) => {
            if *g == u32::MAX {
                return Err(Error::InvalidInput(
                    "unknown check name in verify list".into(),
                ));
            }
            check_symmetry(ctx, *g, *n, seed)
        }
        CheckDescriptor::LoopEquation(g, n_ext) => {
            check_loop_equation(ctx, *g, *n_ext as usize, seed)
        }
        CheckDescriptor::KernelIndependence(targets) => {
            check_kernel_independence(ctx, targets, 3, seed)
        }
        CheckDescriptor::W30 => check_w30_forms(ctx, seed),
        CheckDescriptor::Moment(g, n, k) => check_resy(ctx, *g, *n, *k, seed),
        CheckDescriptor::Asymptotics => check_asymptotics(ctx, seed),
        CheckDescriptor::Variational(g, n, p) => {
            if S::EXACT {
                return Ok(inconclusive(
                    "variational",
                    "finite differences need a floating backend",
                    seed,
                ));
            }
            let spec = PipelineSpec {
                potential: pot,
                hbar: hbar.clone(),
                seeds: sys.roots().to_vec(),
                newton: opts.clone(),
            };
            check_variational(&spec, ctx, *g, *n, *p, seed)
        }
        CheckDescriptor::Dilaton(g, n) => {
            if S::EXACT {
                return Ok(inconclusive(
                    "dilaton",
                    "finite differences need a floating backend",
                    seed,
                ));
            }
            let spec = PipelineSpec {
                potential: pot,
                hbar: hbar.clone(),
                seeds: sys.roots().to_vec(),
                newton: opts.clone(),
            };
            check_dilaton(&spec, ctx, *g, *n, seed)
        }
    }
}

fn inconclusive(name: &str, why: &str, seed: u64) -> CheckReport {
    CheckReport {
        name: name.to_string(),
        status: CheckStatus::Inconclusive,
        worst_residual: f64::NAN,
        tolerance: 0.0,
        seed,
        runtime_ms: 0,
        details: why.to_string(),
    }
}

fn run_checks<S: Scalar>(
    descriptors: Vec<CheckDescriptor>,
    pot: &Potential<S>,
    sys: &BetheSystem<S>,
    hbar: &S,
    opts: &NewtonOptions,
    cfg: &RunConfig,
    ctx: &mut RecursionContext<S>,
) -> Result<Vec<CheckReport>> {
    if cfg.threads <= 1 {
        return descriptors
            .iter()
            .map(|d| run_one_check(d, pot, sys, hbar, opts, cfg.seed, ctx))
            .collect();
    }
    // parallel: each check runs against a fresh context clone
    let inject = cfg.inject.clone();
    let results: Vec<Result<CheckReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = descriptors
            .iter()
            .map(|d| {
                let inject = inject.clone();
                scope.spawn(move || {
                    let mut local = RecursionContext::new(sys.clone())?;
                    if let Some(InjectSpec::Tensor { g, n, rel }) = inject {
                        let mut t = (*local.compute_w(g, n)?).clone();
                        t.corrupt_first_entry(rel);
                        local.poke_tensor(g, n, t);
                    }
                    run_one_check(d, pot, sys, hbar, opts, cfg.seed, &mut local)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("check thread"))
            .collect()
    });
    results.into_iter().collect()
}

fn finish(
    doc: serde_json::Map<String, Value>,
    format: Format,
    any_failed: bool,
) -> Result<Outcome> {
    let document = match format {
        Format::Json => serde_json::to_string_pretty(&Value::Object(doc)).expect("document") + "\n",
        Format::Csv => document_to_csv(&doc),
    };
    Ok(Outcome {
        document,
        exit_code: if any_failed { 2 } else { 0 },
    })
}

/// Flat CSV rendering: one section per record kind.
fn document_to_csv(doc: &serde_json::Map<String, Value>) -> String {
    let mut out = String::new();
    if let Some(Value::Array(roots)) = doc.get("roots") {
        out.push_str("section,index,value\n");
        for (i, r) in roots.iter().enumerate() {
            out.push_str(&format!("root,{},{}\n", i, csv_scalar(r)));
        }
    }
    if let Some(Value::Array(tensors)) = doc.get("tensors") {
        out.push_str("section,g,n,idx,val\n");
        for t in tensors {
            let g = t["g"].clone();
            let n = t["n"].clone();
            if let Value::Array(terms) = &t["terms"] {
                for term in terms {
                    let idx = term["idx"]
                        .as_array()
                        .map(|a| {
                            a.iter()
                                .map(|jk| format!("{}:{}", jk[0], jk[1]))
                                .collect::<Vec<_>>()
                                .join(";")
                        })
                        .unwrap_or_default();
                    out.push_str(&format!(
                        "tensor,{},{},{},{}\n",
                        g,
                        n,
                        idx,
                        csv_scalar(&term["val"])
                    ));
                }
            }
        }
    }
    if let Some(Value::Array(checks)) = doc.get("checks") {
        out.push_str("section,name,status,worst_residual,tolerance,seed,runtime_ms\n");
        for c in checks {
            out.push_str(&format!(
                "check,{},{},{},{},{},{}\n",
                c["name"].as_str().unwrap_or(""),
                c["status"].as_str().unwrap_or(""),
                c["worst_residual"],
                c["tolerance"],
                c["seed"],
                c["runtime_ms"],
            ));
        }
    }
    out
}

fn csv_scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Object(o) => o
            .get("dec")
            .and_then(|d| d.as_str())
            .map(|s| s.to_string())
            .unwrap_or_else(|| v.to_string()),
        other => other.to_string(),
    }
}
