//! JSON collection files.
//!
//! ```json
//! { "kind": "Z", "ambient_dim": 3,
//!   "spaces": { "U": [[[1,0],[0,0],[0,0]]], "E": [...], "J": [...], "P1": [...], ... },
//!   "phase_order": ["P1", "P2"],
//!   "meta": {} }
//! ```
//!
//! Each space is a list of basis vectors, each vector a list of `[re, im]`
//! pairs. `U` (`V`, or `V_in`/`V_out` for superfunctions) is stored as its
//! frame, the other spaces as canonical bases. Numbers are written in the
//! shortest form that reads back to the same double.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use subalg::collections::validate;
use subalg::{AnyCollection, CollectionError, ComplexMatrix, Subspace, Superfunction, Tolerance, ValidationReport, YCollection, ZCollection, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown kind {0:?}, expected \"Z\", \"Y\" or \"super\"")]
    UnknownKind(String),
    #[error("missing space {0:?}")]
    MissingSpace(String),
    #[error("space {name:?} has a vector of length {len}, ambient dimension is {ambient}")]
    VectorLength { name: String, len: usize, ambient: usize },
    #[error("space {name:?}: {detail}")]
    Degenerate { name: String, detail: String },
    #[error(transparent)]
    Collection(#[from] CollectionError),
    #[error("collection fails validation:\n{0}")]
    Invalid(String),
}

pub type Vector = Vec<[f64; 2]>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionFile {
    pub kind: String,
    pub ambient_dim: usize,
    pub spaces: BTreeMap<String, Vec<Vector>>,
    pub phase_order: Vec<String>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

fn columns(m: &ComplexMatrix) -> Vec<Vector> {
    (0..m.cols()).map(|j| m.column(j).iter().map(|c| [c.re, c.im]).collect()).collect()
}

fn phase_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("P{i}")).collect()
}

impl CollectionFile {
    fn build(kind: &str, ambient: usize, frames: &[(&str, &ComplexMatrix)], e: &Subspace, j: &Subspace, phases: &[Subspace]) -> Self {
        let mut spaces = BTreeMap::new();
        for (name, frame) in frames {
            spaces.insert(name.to_string(), columns(frame));
        }
        spaces.insert("E".into(), columns(e.basis()));
        spaces.insert("J".into(), columns(j.basis()));
        let phase_order = phase_names(phases.len());
        for (name, p) in phase_order.iter().zip(phases) {
            spaces.insert(name.clone(), columns(p.basis()));
        }
        CollectionFile {
            kind: kind.into(),
            ambient_dim: ambient,
            spaces,
            phase_order,
            meta: serde_json::Value::Object(Default::default()),
        }
    }

    pub fn from_collection(c: &AnyCollection) -> Self {
        match c {
            AnyCollection::Z(z) => Self::build("Z", z.h(), &[("U", z.u_frame())], z.e(), z.j(), z.phases()),
            AnyCollection::Y(y) => Self::build("Y", y.k(), &[("V", y.v_frame())], y.e(), y.j(), y.phases()),
            AnyCollection::Super(s) => {
                let b = s.base();
                Self::build("super", b.k(), &[("V_in", &s.v_in_frame()), ("V_out", &s.v_out_frame())], b.e(), b.j(), b.phases())
            }
        }
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        if !self.meta.is_object() {
            self.meta = serde_json::Value::Object(Default::default());
        }
        self.meta.as_object_mut().expect("object").insert(key.into(), value);
        self
    }

    fn matrix(&self, name: &str) -> Result<ComplexMatrix, FormatError> {
        let vectors = self.spaces.get(name).ok_or_else(|| FormatError::MissingSpace(name.into()))?;
        let n = self.ambient_dim;
        let mut cols = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != n {
                return Err(FormatError::VectorLength { name: name.into(), len: v.len(), ambient: n });
            }
            cols.push(v.iter().map(|p| C64::new(p[0], p[1])).collect());
        }
        Ok(ComplexMatrix::from_columns(n, &cols))
    }

    fn space(&self, name: &str, tol: &Tolerance) -> Result<Subspace, FormatError> {
        let m = self.matrix(name)?;
        let s = Subspace::from_basis(&m, tol);
        if s.dim() != m.cols() {
            return Err(FormatError::Degenerate {
                name: name.into(),
                detail: format!("{} vectors span a space of dimension {}", m.cols(), s.dim()),
            });
        }
        Ok(s)
    }

    pub fn to_collection(&self, tol: &Tolerance) -> Result<AnyCollection, FormatError> {
        let e = self.space("E", tol)?;
        let j = self.space("J", tol)?;
        let phases = self.phase_order.iter().map(|p| self.space(p, tol)).collect::<Result<Vec<_>, _>>()?;
        let c = match self.kind.as_str() {
            "Z" => AnyCollection::Z(ZCollection::new(self.matrix("U")?, e, j, phases, tol)?),
            "Y" => AnyCollection::Y(YCollection::new(self.matrix("V")?, e, j, phases, tol)?),
            "super" => AnyCollection::Super(Superfunction::new(self.matrix("V_in")?, self.matrix("V_out")?, e, j, phases, tol)?),
            other => return Err(FormatError::UnknownKind(other.into())),
        };
        let report = validate(&c, tol);
        if !structurally_valid(&report) {
            return Err(FormatError::Invalid(report.to_string()));
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = fs::read_to_string(path).map_err(|source| FormatError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}

/// Checks a file must pass. `V ∩ E = 0` is reported but not required: additive
/// zeros and embeddings violate it by construction and still have a function.
pub const ADVISORY_CHECKS: [&str; 1] = ["v_cap_e_zero"];

pub fn structurally_valid(report: &ValidationReport) -> bool {
    report.failures().all(|c| ADVISORY_CHECKS.contains(&c.name))
}

/// Writes `contents` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), FormatError> {
    let err = |source| FormatError::Write { path: path.display().to_string(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(err)?;
    f.write_all(contents.as_bytes()).map_err(err)?;
    f.sync_all().map_err(err)?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        err(e)
    })
}
