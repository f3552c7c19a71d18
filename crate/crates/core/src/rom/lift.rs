use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fom::{Field, SnapshotSet};
use crate::numkit::DenseMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftFn {
    Identity,
    Cos,
    Sin,
    Square,
    Cube,
}

impl LiftFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            LiftFn::Identity => x,
            LiftFn::Cos => x.cos(),
            LiftFn::Sin => x.sin(),
            LiftFn::Square => x * x,
            LiftFn::Cube => x * x * x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LiftFn::Identity => "identity",
            LiftFn::Cos => "cos",
            LiftFn::Sin => "sin",
            LiftFn::Square => "sq",
            LiftFn::Cube => "cube",
        }
    }
}

impl FromStr for LiftFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" | "id" => Ok(LiftFn::Identity),
            "cos" => Ok(LiftFn::Cos),
            "sin" => Ok(LiftFn::Sin),
            "sq" | "square" => Ok(LiftFn::Square),
            "cube" => Ok(LiftFn::Cube),
            other => Err(Error::Config(format!("unknown lift '{other}'"))),
        }
    }
}

/// Ordered list of elementwise lifts; identity comes first, exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LiftFn>", into = "Vec<LiftFn>")]
pub struct LiftSpec(Vec<LiftFn>);

impl LiftSpec {
    pub fn new(fns: Vec<LiftFn>) -> Result<Self> {
        if fns.first() != Some(&LiftFn::Identity) {
            return Err(Error::Config("lift list must start with identity".into()));
        }
        if fns.iter().filter(|&&f| f == LiftFn::Identity).count() != 1 {
            return Err(Error::Config("identity lift must appear exactly once".into()));
        }
        for (i, f) in fns.iter().enumerate() {
            if fns[..i].contains(f) {
                return Err(Error::Config(format!("lift '{}' repeated", f.name())));
            }
        }
        Ok(Self(fns))
    }

    pub fn identity() -> Self {
        Self(vec![LiftFn::Identity])
    }

    /// Identity followed by `cos, sin, sq, cube`.
    pub fn full() -> Self {
        Self(vec![LiftFn::Identity, LiftFn::Cos, LiftFn::Sin, LiftFn::Square, LiftFn::Cube])
    }

    pub fn fns(&self) -> &[LiftFn] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lifts one snapshot vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len() * self.len());
        for f in &self.0 {
            out.extend(x.iter().map(|&v| f.apply(v)));
        }
        out
    }
}

impl TryFrom<Vec<LiftFn>> for LiftSpec {
    type Error = Error;
    fn try_from(v: Vec<LiftFn>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LiftSpec> for Vec<LiftFn> {
    fn from(s: LiftSpec) -> Self {
        s.0
    }
}

/// Parses a comma list such as `cos,sin,sq,cube`; the identity is implied
/// when absent. An empty string means identity only.
impl FromStr for LiftSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut fns = vec![LiftFn::Identity];
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let f: LiftFn = part.parse()?;
            if f != LiftFn::Identity {
                fns.push(f);
            }
        }
        Self::new(fns)
    }
}

impl fmt::Display for LiftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.0.iter().map(|l| l.name()).collect();
        write!(f, "{}", names.join(","))
    }
}

/// Applies every lift to every entry; segments are concatenated in spec
/// order, so the first `N_dof` columns reproduce the input.
pub fn lift(s: &SnapshotSet, spec: &LiftSpec) -> Result<SnapshotSet> {
    let data = s.data();
    let n = s.n_dof();
    let mut out = DenseMatrix::zeros(s.n_t(), n * spec.len());
    for j in 0..s.n_t() {
        out.row_mut(j).copy_from_slice(&spec.apply(data.row(j)));
    }
    let mut fields = Vec::with_capacity(s.fields().len() * spec.len());
    for f in spec.fns() {
        for field in s.fields() {
            let name = match f {
                LiftFn::Identity => field.name.clone(),
                other => format!("{}({})", other.name(), field.name),
            };
            fields.push(Field::new(name, field.size));
        }
    }
    let mut lifted = SnapshotSet::new(s.times().to_vec(), out, fields, s.source)?;
    lifted.params = s.params;
    Ok(lifted)
}
