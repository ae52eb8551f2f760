//! Subcommands and their exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure |
//! | 2 | parse error (expression, file, arguments) |
//! | 3 | realization failure |
//! | 4 | solver singularity |
//! | 5 | condition of an operation violated |
//! | 6 | operand kind or shape mismatch |
//! | 7 | hexplot precondition failure |

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use subalg::algebra::{
    add_y, additive_inverse, additive_zero, duality_y, duality_z, embed, extension, identity_superfunction, merge_phases_y, merge_phases_z,
    multiplicative_inverse, multiply_superfunctions, project_u, reference_transform, substitute_into_y, substitute_into_z,
};
use subalg::hexmap::{pole_trajectory, Grid, HexError};
use subalg::ratfunc::{parse, realize_scalar_seeded, RatFuncError};
use subalg::reduction::{continued_fraction, normalize_y, prune_y, prune_z, recursion_z, reduce_z, CFStop, CFTail, CollectionDims};
use subalg::solvers::{annulus_point, eval_f, eval_y, eval_z, solve_superfunction, solve_y, solve_z};
use subalg::{
    random, AlgebraError, AnyCollection, CollectionError, ComplexMatrix, Method, PortMaps, ReductionError, ScalingVector, SolveError, Tolerance,
    YCollection, C64,
};
use thiserror::Error;

use crate::format::{structurally_valid, write_atomic, CollectionFile, FormatError};

/// Points at which every operation re-checks its function law.
pub const LAW_POINTS: usize = 10;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("realization failed: {0}")]
    Realization(String),
    #[error("solver failure {name}: {detail}")]
    Solver { name: &'static str, detail: String },
    #[error("condition violated: {0}")]
    Condition(String),
    #[error("kind mismatch: {0}")]
    Kind(String),
    #[error("hexplot precondition failed: {0}")]
    Hexplot(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Realization(_) => 3,
            CliError::Solver { .. } => 4,
            CliError::Condition(_) => 5,
            CliError::Kind(_) => 6,
            CliError::Hexplot(_) => 7,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Read { .. } | FormatError::Write { .. } => CliError::Io(e.to_string()),
            other => CliError::Parse(other.to_string()),
        }
    }
}

fn solve_name(e: &SolveError) -> &'static str {
    match e {
        SolveError::SingularL => "SingularL",
        SolveError::SingularOnJ => "SingularOnJ",
        SolveError::SingularResolvent(_) => "SingularResolvent",
        SolveError::SingularCoupling => "SingularCoupling",
        SolveError::SingularFEJ => "SingularFEJ",
        SolveError::Divergent(_) => "Divergent",
        SolveError::Collection(_) => "Collection",
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Solver { name: solve_name(&e), detail: e.to_string() }
    }
}

impl From<AlgebraError> for CliError {
    fn from(e: AlgebraError) -> Self {
        match e {
            AlgebraError::PlugNotScalar(_) | AlgebraError::PortMismatch(..) | AlgebraError::DimensionMismatch(_) => CliError::Kind(e.to_string()),
            AlgebraError::SlotOutOfRange { .. } | AlgebraError::InvalidMerge(..) | AlgebraError::InvalidScaling => CliError::Parse(e.to_string()),
            other => CliError::Condition(other.to_string()),
        }
    }
}

impl From<ReductionError> for CliError {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::AssumptionViolated { condition, detail } => CliError::Condition(format!("{condition} ({detail})")),
            ReductionError::Solve(s) => s.into(),
            ReductionError::Collection(c) => c.into(),
        }
    }
}

impl From<CollectionError> for CliError {
    fn from(e: CollectionError) -> Self {
        CliError::Condition(e.to_string())
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "subalg", version, about = "Subspace collections: realization, evaluation and algebra")]
pub struct Cli {
    /// Seed for all randomized verification.
    #[arg(long, global = true, env = "SUBALG_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_rank: f64,
    /// Residual bound for certificates and law checks.
    #[arg(long, global = true)]
    pub tol_residual: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
pub enum MethodArg {
    Direct,
    Shifted,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
pub enum OpName {
    Add,
    Mul,
    SubstY,
    SubstZ,
    Dual,
    Merge,
    Extend,
    Refscale,
    Addinv,
    Mulinv,
    Prune,
    Normalize,
    Reduce,
    Cf,
    ProjectU,
    Embed,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a rational function into a Z collection with a certificate.
    Realize {
        /// Expression in z1..zn, e.g. "z1*z2/z3".
        expr: String,
        /// Number of variables (default: the largest index used).
        #[arg(long)]
        vars: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Certificate path (default: OUT with extension .cert.json).
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Evaluate the associated matrix of a collection file.
    Eval {
        file: PathBuf,
        /// Comma-separated values z1,..,zn; complex values as "1+2i".
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        z: Vec<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
        method: MethodArg,
        /// Shift for the shifted method.
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        z0: String,
    },
    /// Apply an operation to collection files.
    Op {
        op: OpName,
        /// Operand files; "identity" (mul) and "zero" (add) name built-in operands.
        operands: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Phase (1-based) replaced by the plug in subst-y / subst-z.
        #[arg(long, default_value_t = 1)]
        slot: usize,
        /// Phases (1-based) merged by merge.
        #[arg(long, num_args = 2, value_names = ["I", "J"])]
        phases: Vec<usize>,
        /// Ratios d_i = c^E_i / c^J_i for refscale.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        d: Vec<String>,
        /// Target dimension of V for embed.
        #[arg(long)]
        target: Option<usize>,
        /// Number of leading U frame vectors kept by project-u.
        #[arg(long, default_value_t = 1)]
        keep: usize,
        /// Maximum depth of the continued fraction.
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Pole trajectories of a pruned scalar three-phase Z collection.
    Hexplot {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        grid_lo: f64,
        #[arg(long, default_value_t = 1e2)]
        grid_hi: f64,
        #[arg(long, default_value_t = 41)]
        grid_points: usize,
        /// CSV output.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

/// Runs one command, writing the human-readable report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let tol = Tolerance::new(cli.tol_rank, Tolerance::default().residual_abs).map_err(|e| CliError::Parse(e.to_string()))?;
    let ctx = Context { seed: cli.seed, tol, tol_residual: cli.tol_residual };
    match &cli.command {
        Command::Realize { expr, vars, out: path, cert } => ctx.realize(expr, *vars, path, cert.as_deref(), out),
        Command::Eval { file, z, method, z0 } => ctx.eval(file, z, *method, z0, out),
        Command::Op { op, operands, out: path, slot, phases, d, target, keep, depth } => {
            let params = OpParams { slot: *slot, phases: phases.clone(), d: d.clone(), target: *target, keep: *keep, depth: *depth };
            ctx.op(*op, operands, path, &params, out)
        }
        Command::Hexplot { file, grid_lo, grid_hi, grid_points, out: path, svg } => {
            let grid = Grid { lo: *grid_lo, hi: *grid_hi, points: *grid_points };
            ctx.hexplot(file, &grid, path, svg.as_deref(), out)
        }
    }
}

pub struct OpParams {
    pub slot: usize,
    pub phases: Vec<usize>,
    pub d: Vec<String>,
    pub target: Option<usize>,
    pub keep: usize,
    pub depth: usize,
}

struct Context {
    seed: u64,
    tol: Tolerance,
    tol_residual: Option<f64>,
}

pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.replace('j', "i");
    t.parse::<C64>().map_err(|_| CliError::Parse(format!("invalid complex number {s:?}")))
}

/// Highest `k` among the `z<k>` tokens of an expression.
fn max_variable(expr: &str) -> usize {
    let b = expr.as_bytes();
    let mut best = 0;
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'z' && (i == 0 || !b[i - 1].is_ascii_alphanumeric()) {
            let start = i + 1;
            let mut end = start;
            while end < b.len() && b[end].is_ascii_digit() {
                end += 1;
            }
            if let Ok(k) = expr[start..end].parse::<usize>() {
                best = best.max(k);
            }
            i = end;
        } else {
            i += 1;
        }
    }
    best
}

/// `x` with 12 significant digits, trailing zeros removed.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let e = format!("{x:.11e}");
    let (mantissa, exp) = e.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{x:.*}", (11 - exp).max(0) as usize))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

pub fn format_entry(c: C64) -> String {
    let sign = if c.im.is_sign_negative() && c.im != 0.0 { '-' } else { '+' };
    format!("{}{sign}{}i", sig12(c.re), sig12(c.im.abs()))
}

pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|c| format_entry(*c)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn matrix_json(m: &ComplexMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.rows()).map(|i| m.row(i).iter().map(|c| [c.re, c.im]).collect()).collect();
    json!(rows)
}

fn dims_json(d: &CollectionDims) -> serde_json::Value {
    json!({ "ambient": d.ambient, "m": d.m, "q1": d.q1, "q2": d.q2, "phases": d.phases })
}

/// Largest entrywise difference relative to the size of the data.
fn relative_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return f64::INFINITY;
    }
    a.max_abs_diff(b) / (1.0 + a.max_abs().max(b.max_abs()))
}

fn eval_any(c: &AnyCollection, z: &[C64]) -> Result<ComplexMatrix, SolveError> {
    match c {
        AnyCollection::Z(x) => eval_z(x, z),
        AnyCollection::Y(x) if x.m() == 0 => Ok(ComplexMatrix::zeros(0, 0)),
        AnyCollection::Y(x) => eval_y(x, z),
        AnyCollection::Super(s) => eval_f(s, z),
    }
}

fn n_vars(c: &AnyCollection) -> usize {
    match c {
        AnyCollection::Z(x) => x.n(),
        AnyCollection::Y(x) => x.n(),
        AnyCollection::Super(s) => s.base().n(),
    }
}

fn kind_err(op: OpName, expected: &str, got: &[&AnyCollection]) -> CliError {
    let kinds: Vec<&str> = got.iter().map(|c| c.kind()).collect();
    CliError::Kind(format!("{op:?} expects {expected}, got {}", kinds.join(", ")))
}

type Law<'a> = Box<dyn Fn(&[C64]) -> Result<(ComplexMatrix, ComplexMatrix), SolveError> + 'a>;

/// Result of an operation: the new collection, extra metadata, and the law
/// `(result, expected)` as functions of the result's variables.
struct OpOutcome<'a> {
    result: AnyCollection,
    meta: Vec<(&'static str, serde_json::Value)>,
    law: Law<'a>,
}

impl Context {
    fn load(&self, path: &Path) -> Result<AnyCollection, CliError> {
        Ok(CollectionFile::read(path)?.to_collection(&self.tol)?)
    }

    fn realize(&self, expr: &str, vars: Option<usize>, path: &Path, cert: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
        let n = vars.unwrap_or_else(|| max_variable(expr));
        if n == 0 {
            return Err(CliError::Parse("no variables z1..zn in the expression; pass --vars".into()));
        }
        let target = parse(expr, n).map_err(|e| CliError::Parse(e.to_string()))?;
        let certificate = realize_scalar_seeded(&target, self.seed).map_err(|e| match e {
            RatFuncError::Syntax { .. }
            | RatFuncError::NotHomogenizable(_)
            | RatFuncError::NotNormalizable(_)
            | RatFuncError::DegreeMismatch { .. }
            | RatFuncError::VariableCount { .. } => CliError::Parse(e.to_string()),
            other => CliError::Realization(other.to_string()),
        })?;
        let residual = certificate.max_residual();
        let bound = self.tol_residual.unwrap_or(subalg::ratfunc::SCALAR_CERTIFICATE_TOL);
        let c = AnyCollection::Z(certificate.collection.clone());
        let file = CollectionFile::from_collection(&c)
            .with_meta("target", json!(target.render()))
            .with_meta("seed", json!(self.seed));
        write_atomic(path, &file.to_json())?;
        let samples: Vec<serde_json::Value> = certificate
            .samples
            .iter()
            .map(|(z, r)| json!({ "z": z.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>(), "residual": r }))
            .collect();
        let cert_json = json!({
            "target": target.render(),
            "seed": self.seed,
            "points": samples.len(),
            "max_residual": residual,
            "tolerance": bound,
            "passed": residual < bound,
            "samples": samples,
        });
        let cert_path = cert.map(Path::to_path_buf).unwrap_or_else(|| path.with_extension("cert.json"));
        write_atomic(&cert_path, &(serde_json::to_string_pretty(&cert_json).expect("json") + "\n"))?;
        let z = &certificate.collection;
        writeln!(out, "target     {}", target.render()).map_err(io_err)?;
        writeln!(out, "collection h = {}, dim E = {}, dim J = {}, phases {:?}", z.h(), z.e().dim(), z.j().dim(), z.phase_dims()).map_err(io_err)?;
        writeln!(out, "certificate {} points, seed {}, max residual {:.3e} (bound {:.1e})", samples.len(), self.seed, residual, bound).map_err(io_err)?;
        if residual >= bound {
            return Err(CliError::Realization(format!("certificate residual {residual:.3e} exceeds {bound:.1e}")));
        }
        Ok(())
    }

    fn eval(&self, path: &Path, z: &[String], method: MethodArg, z0: &str, out: &mut dyn Write) -> Result<(), CliError> {
        let c = self.load(path)?;
        let z: Vec<C64> = z.iter().map(|s| parse_complex(s)).collect::<Result<_, _>>()?;
        let method = match method {
            MethodArg::Direct => Method::Direct,
            MethodArg::Shifted => Method::Shifted(parse_complex(z0)?),
        };
        let value = match &c {
            AnyCollection::Z(x) => solve_z(x, &z, method)?.value,
            AnyCollection::Y(x) => solve_y(x, &z, method)?.value,
            AnyCollection::Super(s) => solve_superfunction(s, &z, method)?.value,
        };
        out.write_all(format_matrix(&value).as_bytes()).map_err(io_err)
    }

    fn operand(&self, op: OpName, name: &str) -> Result<Option<AnyCollection>, CliError> {
        match (op, name) {
            (OpName::Mul, "identity") | (OpName::Add, "zero") => Ok(None),
            _ => self.load(Path::new(name)).map(Some),
        }
    }

    fn op(&self, op: OpName, operands: &[String], path: &Path, params: &OpParams, out: &mut dyn Write) -> Result<(), CliError> {
        let arity = match op {
            OpName::Add | OpName::Mul | OpName::SubstY | OpName::SubstZ => 2,
            _ => 1,
        };
        if operands.len() != arity {
            return Err(CliError::Parse(format!("{op:?} takes {arity} operand(s), got {}", operands.len())));
        }
        let first = self.operand(op, &operands[0])?.ok_or_else(|| CliError::Parse(format!("{:?} cannot be the first operand", operands[0])))?;
        let second = match operands.get(1) {
            Some(name) => Some(self.operand(op, name)?),
            None => None,
        };
        let outcome = self.apply(op, &first, second.as_ref().map(|s| s.as_ref()), params)?;

        let report = subalg::collections::validate(&outcome.result, &self.tol);
        if !structurally_valid(&report) {
            return Err(CliError::Condition(format!("result fails validation:\n{report}")));
        }
        let mut file = CollectionFile::from_collection(&outcome.result).with_meta("op", json!(format!("{op:?}")));
        for (k, v) in outcome.meta {
            file = file.with_meta(k, v);
        }

        let n = n_vars(&outcome.result);
        let mut g = random::rng(self.seed);
        let mut residual = 0.0f64;
        let mut size = 0.0f64;
        for _ in 0..LAW_POINTS {
            let z = annulus_point(&mut g, n);
            let (got, expected) = (outcome.law)(&z)?;
            residual = residual.max(relative_diff(&got, &expected));
            size = size.max(got.max_abs());
        }
        let bound = self.tol_residual.unwrap_or(1e-8);
        file = file.with_meta("law_residual", json!(residual)).with_meta("seed", json!(self.seed));
        write_atomic(path, &file.to_json())?;

        let dims = match &outcome.result {
            AnyCollection::Z(x) => CollectionDims::of_z(x),
            AnyCollection::Y(x) => CollectionDims::of_y(x),
            AnyCollection::Super(s) => CollectionDims::of_y(s.base()),
        };
        writeln!(out, "op         {op:?}").map_err(io_err)?;
        writeln!(
            out,
            "result     kind {}, ambient {}, m {}, dim E {}, dim J {}, phases {:?}",
            outcome.result.kind(),
            dims.ambient,
            dims.m,
            dims.q1,
            dims.q2,
            dims.phases
        )
        .map_err(io_err)?;
        let verdict = if report.passed() {
            "pass".to_string()
        } else {
            let names: Vec<&str> = report.failures().map(|c| c.name).collect();
            format!("{} ({})", if structurally_valid(&report) { "pass with advisories" } else { "FAIL" }, names.join(", "))
        };
        writeln!(out, "validate   {verdict}").map_err(io_err)?;
        writeln!(
            out,
            "law        {} points, seed {}, residual {:.3e} ({})",
            LAW_POINTS,
            self.seed,
            residual,
            if residual < bound { "pass" } else { "FAIL" }
        )
        .map_err(io_err)?;
        if size < bound {
            writeln!(out, "function   zero (max |value| {size:.3e})").map_err(io_err)?;
        }
        Ok(())
    }

    fn apply<'a>(&self, op: OpName, a: &'a AnyCollection, b: Option<Option<&'a AnyCollection>>, params: &OpParams) -> Result<OpOutcome<'a>, CliError> {
        use AnyCollection as A;
        let tol = self.tol;
        let slot = params.slot.checked_sub(1).ok_or_else(|| CliError::Parse("--slot is 1-based".into()))?;
        Ok(match (op, a, b) {
            (OpName::Add, A::Y(y1), Some(second)) => {
                let y2 = match second {
                    Some(A::Y(y2)) => y2,
                    None => return self.add(y1, additive_zero(y1.m(), 0, &tol)),
                    Some(other) => return Err(kind_err(op, "Y Y", &[a, other])),
                };
                let id = ComplexMatrix::identity(y1.m());
                let r = add_y(y1, y2, &id, &id)?;
                let n1 = y1.n();
                OpOutcome {
                    result: A::Y(r.clone()),
                    meta: vec![],
                    law: Box::new(move |z| {
                        let expected = &eval_any(&A::Y(y1.clone()), &z[..n1])? + &eval_any(&A::Y(y2.clone()), &z[n1..])?;
                        Ok((eval_any(&A::Y(r.clone()), z)?, expected))
                    }),
                }
            }
            (OpName::Mul, A::Super(s1), Some(second)) => {
                let ports = PortMaps::natural(s1.half());
                let s2 = match second {
                    Some(A::Super(s2)) => s2.clone(),
                    None => identity_superfunction(&ports, &tol)?,
                    Some(other) => return Err(kind_err(op, "super super", &[a, other])),
                };
                let p = multiply_superfunctions(s1, &s2, &ports)?;
                let n1 = s1.base().n();
                let m = ComplexMatrix::block_diag(&[&ports.m_e, &ports.m_j]);
                let s1 = s1.clone();
                OpOutcome {
                    result: A::Super(p.clone()),
                    meta: vec![("ports", json!({ "m_e": matrix_json(&ports.m_e), "m_j": matrix_json(&ports.m_j) }))],
                    law: Box::new(move |z| {
                        let f1 = eval_f(&s1, &z[..n1])?;
                        let f2 = eval_f(&s2, &z[n1..])?;
                        Ok((eval_f(&p, z)?, &f1 * &(&m * &f2)))
                    }),
                }
            }
            (OpName::SubstY | OpName::SubstZ, host, Some(Some(A::Z(plug)))) => {
                let result = match (op, host) {
                    (OpName::SubstY, A::Y(h)) => A::Y(substitute_into_y(h, plug, slot)?),
                    (OpName::SubstZ, A::Z(h)) => A::Z(substitute_into_z(h, plug, slot)?),
                    _ => return Err(kind_err(op, if op == OpName::SubstY { "Y Z" } else { "Z Z" }, &[a, &A::Z(plug.clone())])),
                };
                let np = plug.n();
                let plug = plug.clone();
                let r2 = result.clone();
                OpOutcome {
                    result,
                    meta: vec![("slot", json!(params.slot))],
                    law: Box::new(move |z| {
                        let w = eval_z(&plug, &z[..np])?[(0, 0)];
                        let mut hz = z[np..].to_vec();
                        hz.insert(slot, w);
                        Ok((eval_any(&r2, z)?, eval_any(host, &hz)?))
                    }),
                }
            }
            (OpName::Dual, A::Z(_) | A::Y(_), None) => {
                let result = match a {
                    A::Z(x) => A::Z(duality_z(x)?),
                    A::Y(x) => A::Y(duality_y(x)?),
                    _ => unreachable!(),
                };
                let r2 = result.clone();
                OpOutcome {
                    result,
                    meta: vec![],
                    law: Box::new(move |z| {
                        let inv: Vec<C64> = z.iter().map(|x| x.inv()).collect();
                        let v = eval_any(a, &inv)?;
                        let expected = subalg::numcore::inverse(&v, &tol).map_err(|_| SolveError::SingularOnJ)?;
                        Ok((eval_any(&r2, z)?, expected))
                    }),
                }
            }
            (OpName::Merge, A::Z(_) | A::Y(_), None) => {
                let [i, j] = match params.phases.as_slice() {
                    [i, j] if *i >= 1 && *j >= 1 => [i - 1, j - 1],
                    _ => return Err(CliError::Parse("merge needs --phases I J (1-based)".into())),
                };
                let result = match a {
                    A::Z(x) => A::Z(merge_phases_z(x, i, j)?),
                    A::Y(x) => A::Y(merge_phases_y(x, i, j)?),
                    _ => unreachable!(),
                };
                let (lo, hi) = (i.min(j), i.max(j));
                let n = n_vars(a);
                let r2 = result.clone();
                OpOutcome {
                    result,
                    meta: vec![("merged", json!([i + 1, j + 1]))],
                    law: Box::new(move |z| {
                        let old: Vec<C64> = (0..n)
                            .map(|k| match k {
                                k if k == hi => z[lo],
                                k if k > hi => z[k - 1],
                                k => z[k],
                            })
                            .collect();
                        Ok((eval_any(&r2, z)?, eval_any(a, &old)?))
                    }),
                }
            }
            (OpName::Extend, A::Z(x), None) => {
                let r = A::Y(extension(x, &ComplexMatrix::identity(x.m()))?);
                let r2 = r.clone();
                OpOutcome { result: r, meta: vec![], law: Box::new(move |z| Ok((eval_any(&r2, z)?, eval_any(a, z)?))) }
            }
            (OpName::Refscale, A::Y(x), None) => {
                let d: Vec<C64> = params.d.iter().map(|s| parse_complex(s)).collect::<Result<_, _>>()?;
                if d.len() != x.n() {
                    return Err(CliError::Parse(format!("refscale needs --d with {} values", x.n())));
                }
                let r = A::Y(reference_transform(x, &ScalingVector::ratios(&d)?)?);
                let r2 = r.clone();
                OpOutcome {
                    result: r,
                    meta: vec![("d", json!(d.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>()))],
                    law: Box::new(move |z| {
                        let dz: Vec<C64> = z.iter().zip(&d).map(|(a, b)| a * b).collect();
                        Ok((eval_any(&r2, z)?, eval_any(a, &dz)?))
                    }),
                }
            }
            (OpName::Addinv, A::Y(x), None) => {
                let r = A::Y(additive_inverse(x)?);
                let r2 = r.clone();
                OpOutcome { result: r, meta: vec![], law: Box::new(move |z| Ok((eval_any(&r2, z)?, -eval_any(a, z)?))) }
            }
            (OpName::Mulinv, A::Super(s), None) => {
                let (inv, ports) = multiplicative_inverse(s)?;
                let half = s.half();
                let mut sign = vec![subalg::re(1.0); half];
                sign.extend(vec![subalg::re(-1.0); half]);
                let dmat = ComplexMatrix::diagonal(&sign);
                let r = A::Super(inv);
                let r2 = r.clone();
                OpOutcome {
                    result: r,
                    meta: vec![("ports", json!({ "m_e": matrix_json(&ports.m_e), "m_j": matrix_json(&ports.m_j) }))],
                    law: Box::new(move |z| {
                        let f = eval_any(a, z)?;
                        let finv = subalg::numcore::inverse(&f, &tol).map_err(|_| SolveError::SingularFEJ)?;
                        Ok((eval_any(&r2, z)?, &dmat * &(&finv * &dmat)))
                    }),
                }
            }
            (OpName::Prune, A::Z(_) | A::Y(_), None) => {
                let (result, report) = match a {
                    A::Z(x) => {
                        let (c, r) = prune_z(x, &tol)?;
                        (A::Z(c), r)
                    }
                    A::Y(x) => {
                        let (c, r) = prune_y(x, &tol)?;
                        (A::Y(c), r)
                    }
                    _ => unreachable!(),
                };
                let r2 = result.clone();
                OpOutcome {
                    result,
                    meta: vec![("before", dims_json(&report.before)), ("after", dims_json(&report.after))],
                    law: Box::new(move |z| Ok((eval_any(&r2, z)?, eval_any(a, z)?))),
                }
            }
            (OpName::Normalize, A::Y(x), None) => {
                let (zc, m, k) = normalize_y(x)?;
                let r = A::Z(zc);
                let r2 = r.clone();
                let (m2, k2) = (m.clone(), k.clone());
                OpOutcome {
                    result: r,
                    meta: vec![("M", matrix_json(&m)), ("K", matrix_json(&k))],
                    law: Box::new(move |z| Ok((&m2 * &(&eval_any(&r2, z)? * &k2), eval_any(a, z)?))),
                }
            }
            (OpName::Reduce, A::Z(x), None) => {
                let (y, w) = reduce_z(x)?;
                let w_json: Vec<serde_json::Value> = w.w.iter().map(matrix_json).collect();
                let r = A::Y(y);
                let r2 = r.clone();
                OpOutcome {
                    result: r,
                    meta: vec![("w", json!(w_json))],
                    law: Box::new(move |z| {
                        let yv = eval_any(&r2, z)?;
                        Ok((recursion_z(&w, &yv, z)?, eval_any(a, z)?))
                    }),
                }
            }
            (OpName::Cf, A::Z(x), None) => {
                let cf = continued_fraction(x, params.depth);
                let levels: Vec<serde_json::Value> =
                    cf.levels.iter().map(|l| json!({ "index": l.index, "dims": dims_json(&l.dims.z), "v": l.dims.v })).collect();
                let stop = match &cf.stop {
                    CFStop::Exhausted => json!("exhausted"),
                    CFStop::MaxDepth => json!("max depth"),
                    CFStop::AssumptionViolated { level, stage, detail } => json!({ "level": level, "stage": stage, "detail": detail }),
                };
                let result = match &cf.tail {
                    CFTail::Z(c) => A::Z(c.clone()),
                    CFTail::Y { y, .. } => A::Y(y.clone()),
                };
                OpOutcome {
                    result,
                    meta: vec![("levels", json!(levels)), ("stop", stop), ("depth", json!(cf.depth()))],
                    law: Box::new(move |z| Ok((cf.evaluate(z)?, eval_any(a, z)?))),
                }
            }
            (OpName::ProjectU, A::Z(x), None) => {
                let k = params.keep;
                if k == 0 || k > x.m() {
                    return Err(CliError::Parse(format!("--keep must be in 1..={}", x.m())));
                }
                let r = A::Z(project_u(x, &x.u_frame().column_range(0, k), None)?);
                let r2 = r.clone();
                OpOutcome {
                    result: r,
                    meta: vec![("keep", json!(k))],
                    law: Box::new(move |z| Ok((eval_any(&r2, z)?, eval_any(a, z)?.submatrix(0, 0, k, k)))),
                }
            }
            (OpName::Embed, A::Y(x), None) => {
                let target = params.target.ok_or_else(|| CliError::Parse("embed needs --target".into()))?;
                let r = A::Y(embed(x, target)?);
                let r2 = r.clone();
                OpOutcome {
                    result: r,
                    meta: vec![("target", json!(target))],
                    law: Box::new(move |z| {
                        let mut expected = ComplexMatrix::zeros(target, target);
                        expected.set_block(0, 0, &eval_any(a, z)?);
                        Ok((eval_any(&r2, z)?, expected))
                    }),
                }
            }
            (op, a, b) => {
                let expected = match op {
                    OpName::Add => "Y Y",
                    OpName::Mul => "super super",
                    OpName::SubstY => "Y Z",
                    OpName::SubstZ => "Z Z",
                    OpName::Dual | OpName::Merge | OpName::Prune => "Z or Y",
                    OpName::Extend | OpName::Reduce | OpName::Cf | OpName::ProjectU => "Z",
                    OpName::Refscale | OpName::Addinv | OpName::Normalize | OpName::Embed => "Y",
                    OpName::Mulinv => "super",
                };
                let mut got = vec![a];
                if let Some(Some(b)) = b {
                    got.push(b);
                }
                return Err(kind_err(op, expected, &got));
            }
        })
    }

    fn add<'a>(&self, y1: &'a YCollection, zero: YCollection) -> Result<OpOutcome<'a>, CliError> {
        let id = ComplexMatrix::identity(y1.m());
        let r = add_y(y1, &zero, &id, &id)?;
        let r2 = r.clone();
        Ok(OpOutcome {
            result: AnyCollection::Y(r),
            meta: vec![],
            law: Box::new(move |z| Ok((eval_any(&AnyCollection::Y(r2.clone()), z)?, eval_any(&AnyCollection::Y(y1.clone()), z)?))),
        })
    }

    fn hexplot(&self, path: &Path, grid: &Grid, csv: &Path, svg: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
        let c = match self.load(path)? {
            AnyCollection::Z(z) => z,
            other => return Err(CliError::Hexplot(format!("expected a Z collection, got {}", other.kind()))),
        };
        let t = pole_trajectory(&c, grid).map_err(|e| match e {
            HexError::BadGrid(_) => CliError::Parse(e.to_string()),
            other => CliError::Hexplot(other.to_string()),
        })?;
        write_atomic(csv, &t.to_csv())?;
        if let Some(svg) = svg {
            write_atomic(svg, &t.to_svg())?;
        }
        writeln!(out, "function   {}", t.function).map_err(io_err)?;
        for i in 0..3 {
            writeln!(out, "hexagon {}  {} pole paths (dim P{} = {})", i + 1, t.counts[i], i + 1, t.phase_dims[i]).map_err(io_err)?;
        }
        match t.q2_estimate {
            Some(q2) => writeln!(out, "dim J      estimated {q2} from edge crossings (actual {})", c.j().dim()),
            None => writeln!(out, "dim J      not determined by edge crossings (actual {})", c.j().dim()),
        }
        .map_err(io_err)?;
        writeln!(out, "points     {}", t.points.len()).map_err(io_err)?;
        Ok(())
    }
}
