//! Flat `key = value` configuration files with one `[kind]` section per
//! experiment. Keys above the first section are shared defaults.
//!
//! ```text
//! seed = 7
//!
//! [stability]
//! family = sk
//! n = 12
//! epsilon = 0.25
//! replications = 50
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::brw::ProgenyLaw;
use crate::error::{Error, Result};
use crate::graph::GraphKind;
use crate::problem::{caps, Family, FamilyKind, InputLaw, ProblemInstance, SchemeVariant};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Calibrate,
    Stability,
    Tightness,
    OracleCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Calibrate,
        ExperimentKind::Stability,
        ExperimentKind::Tightness,
        ExperimentKind::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Stability => "stability",
            ExperimentKind::Tightness => "tightness",
            ExperimentKind::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Validation(format!("unknown output format '{s}'"))),
        }
    }
}

/// How BRW trees relate across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeMode {
    /// A new tree per replication.
    Resampled,
    /// One tree for the whole experiment; only displacements vary.
    Fixed,
}

/// A fully validated experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// `None` runs every family (oracle-check only).
    pub family: Option<FamilyKind>,
    /// Size grid; for EA the number of sites of each shape.
    pub sizes: Vec<usize>,
    /// EA box shapes, aligned with `sizes`.
    pub shapes: Vec<Vec<usize>>,
    pub d: usize,
    pub q: f64,
    pub graph: GraphKind,
    /// Wishart aspect `n/m`.
    pub alpha: f64,
    pub progeny: Vec<f64>,
    pub condition_on_survival: bool,
    pub tree_mode: TreeMode,
    pub law: Option<InputLaw>,
    pub variant: SchemeVariant,
    pub epsilons: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    /// Blocks solved per replication; `None` means all of them.
    pub block_subsample: Option<usize>,
    /// Largest cloud handed to the exact packing solver.
    pub exact_cap: usize,
    pub timing: bool,
    pub out: PathBuf,
    pub format: OutputFormat,
}

pub const DEFAULT_REPLICATIONS: usize = 30;
pub const DEFAULT_EXACT_CAP: usize = 2048;

impl ExperimentSpec {
    /// Defaults for `kind`; `family` and sizes still have to be set.
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            family: None,
            sizes: Vec::new(),
            shapes: Vec::new(),
            d: 2,
            q: 1.0,
            graph: GraphKind::Tour,
            alpha: 1.0,
            progeny: vec![0.0, 0.0, 1.0],
            condition_on_survival: true,
            tree_mode: TreeMode::Resampled,
            law: None,
            variant: SchemeVariant::SingleBlock,
            epsilons: vec![0.25],
            theta_c: vec![1.0],
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            block_subsample: Some(crate::problem::DEFAULT_BLOCK_SUBSAMPLE),
            exact_cap: DEFAULT_EXACT_CAP,
            timing: false,
            out: PathBuf::from("results"),
            format: OutputFormat::Csv,
        }
    }

    /// Default law of a family: Exp(1) for assignment, U(0,1) for weighted
    /// graphs and point clouds, N(0,1) otherwise.
    pub fn law_for(&self, family: FamilyKind) -> InputLaw {
        self.law.unwrap_or(match family {
            FamilyKind::Assignment => InputLaw::UNIT_EXPONENTIAL,
            FamilyKind::Tsp | FamilyKind::Mst | FamilyKind::WeightedGraph => InputLaw::UNIT_UNIFORM,
            _ => InputLaw::STANDARD_GAUSSIAN,
        })
    }

    /// Families this spec runs.
    pub fn families(&self) -> Vec<FamilyKind> {
        match self.family {
            Some(f) => vec![f],
            None => FamilyKind::ALL.to_vec(),
        }
    }

    /// Size grid of a family (oracle-check fills in small defaults).
    pub fn sizes_for(&self, family: FamilyKind) -> Vec<usize> {
        if self.family.is_some() && !self.sizes.is_empty() {
            return self.sizes.clone();
        }
        match family {
            FamilyKind::Tsp => vec![6, 8],
            FamilyKind::Mst => vec![6, 7],
            FamilyKind::WeightedGraph => vec![6, 8],
            FamilyKind::Assignment => vec![5, 7],
            FamilyKind::Sk => vec![8, 10],
            FamilyKind::Ea => vec![6, 9],
            FamilyKind::Brw => vec![6, 10],
            FamilyKind::Wigner => vec![8, 16],
            FamilyKind::Wishart => vec![6, 12],
        }
    }

    fn shape_for(&self, family: FamilyKind, size: usize) -> Vec<usize> {
        if family == FamilyKind::Ea {
            if let Some(i) = self.sizes.iter().position(|&s| s == size).filter(|&i| i < self.shapes.len()) {
                return self.shapes[i].clone();
            }
            return if size % 3 == 0 { vec![3, size / 3] } else { vec![2, size / 2] };
        }
        Vec::new()
    }

    /// The family with its parameters at one grid size.
    pub fn family_at(&self, family: FamilyKind, size: usize) -> Result<Family> {
        Ok(match family {
            FamilyKind::Tsp => Family::Tsp { n: size, d: self.d, q: self.q },
            FamilyKind::Mst => Family::Mst { n: size, d: self.d, q: self.q },
            FamilyKind::WeightedGraph => Family::WeightedGraph { p: size, kind: self.graph },
            FamilyKind::Assignment => Family::Assignment { n: size },
            FamilyKind::Sk => Family::Sk { n: size },
            FamilyKind::Ea => Family::ea(&self.shape_for(family, size))?,
            FamilyKind::Brw => Family::Brw {
                n: size,
                progeny: ProgenyLaw::new(self.progeny.clone())?,
                condition_on_survival: self.condition_on_survival,
                tree_seed: match self.tree_mode {
                    TreeMode::Fixed => Some(seed::hash64(self.seed, &[seed::purpose::TREE])),
                    TreeMode::Resampled => None,
                },
            },
            FamilyKind::Wigner => Family::Wigner { n: size },
            FamilyKind::Wishart => Family::Wishart { m: (size as f64 / self.alpha).round() as usize, n: size },
        })
    }

    pub fn instance(&self, family: FamilyKind, size: usize, seed: u64) -> Result<ProblemInstance> {
        ProblemInstance::new(self.family_at(family, size)?, self.law_for(family), seed)
    }

    /// Checks ranges and caps. Errors are [`Error::Validation`].
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if self.family.is_none() && self.kind != ExperimentKind::OracleCheck {
            return bad(format!("{} needs a family", self.kind));
        }
        if self.family.is_some() && self.sizes.is_empty() {
            return bad("missing size grid (n or shape)".into());
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return bad(format!("epsilon values must lie in (0, 1), got {:?}", self.epsilons));
        }
        if self.theta_c.is_empty() || self.theta_c.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return bad(format!("theta_c values must be positive, got {:?}", self.theta_c));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.block_subsample == Some(0) {
            return bad("block_subsample must be >= 1".into());
        }
        if self.exact_cap == 0 {
            return bad("exact_cap must be >= 1".into());
        }
        for family in self.families() {
            for size in self.sizes_for(family) {
                let inst = self.instance(family, size, self.seed).map_err(|e| match e {
                    Error::Validation(_) => e,
                    other => Error::Validation(other.to_string()),
                })?;
                if self.kind == ExperimentKind::Tightness {
                    enumeration_cap(&inst)?;
                }
                if self.kind == ExperimentKind::Stability && self.variant == SchemeVariant::RowBlock {
                    if !matches!(family, FamilyKind::Sk | FamilyKind::Assignment | FamilyKind::Wigner | FamilyKind::Wishart) {
                        return bad(format!("row_block is not defined for {family}"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Near-optimal sets are enumerated, so tightness experiments obey the
/// enumeration caps rather than the solver caps.
fn enumeration_cap(inst: &ProblemInstance) -> Result<()> {
    use crate::graph::{MATCHING_ENUM_CAP, TOUR_ENUM_CAP, TREE_ENUM_CAP};
    let size = inst.family.size();
    let cap = match &inst.family {
        Family::Tsp { .. } => TOUR_ENUM_CAP,
        Family::Mst { .. } => TREE_ENUM_CAP,
        Family::WeightedGraph { kind: GraphKind::Tour, .. } => TOUR_ENUM_CAP,
        Family::WeightedGraph { kind: GraphKind::Tree, .. } => TREE_ENUM_CAP,
        Family::WeightedGraph { kind: GraphKind::Matching, .. } => MATCHING_ENUM_CAP,
        Family::Assignment { .. } => crate::weighted::ASSIGNMENT_ENUM_CAP,
        Family::Sk { .. } | Family::Ea { .. } => caps::SPINS,
        Family::Brw { .. } => caps::BRW_GENERATIONS,
        Family::Wigner { .. } | Family::Wishart { .. } => {
            return Err(Error::Validation(format!(
                "near-optimal sets of {} live in a continuous space",
                inst.kind()
            )));
        }
    };
    if size > cap {
        return Err(Error::Validation(format!(
            "{} size {size} exceeds the enumeration cap {cap}",
            inst.kind()
        )));
    }
    Ok(())
}

const KEYS: [&str; 22] = [
    "kind",
    "family",
    "n",
    "shape",
    "d",
    "q",
    "graph",
    "alpha",
    "progeny",
    "condition",
    "tree_mode",
    "law",
    "variant",
    "epsilon",
    "theta_c",
    "replications",
    "seed",
    "block_subsample",
    "exact_cap",
    "timing",
    "out",
    "format",
];

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>> {
    e.value
        .split(',')
        .map(|v| v.trim().parse::<T>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| parse_err(e.line, format!("key '{}': cannot parse '{}'", e.key, e.value)))
}

fn one<T: FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse::<T>()
        .map_err(|_| parse_err(e.line, format!("key '{}': cannot parse '{}'", e.key, e.value)))
}

fn apply(spec: &mut ExperimentSpec, e: &Entry) -> Result<()> {
    let v = e.value.as_str();
    let wrap = |err: Error| parse_err(e.line, format!("key '{}': {err}", e.key));
    match e.key.as_str() {
        "kind" => {
            if one::<String>(e)? != spec.kind.name() {
                return Err(parse_err(e.line, format!("key 'kind' is '{v}' but the experiment is '{}'", spec.kind)));
            }
        }
        "family" => spec.family = if v == "all" { None } else { Some(v.parse().map_err(wrap)?) },
        "n" => spec.sizes = list(e)?,
        "shape" => {
            spec.shapes = v
                .split(',')
                .map(|s| {
                    s.trim()
                        .split(['x', '×'])
                        .map(|k| k.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(e.line, format!("key 'shape': cannot parse '{v}'")))?;
            spec.sizes = spec.shapes.iter().map(|s| s.iter().product()).collect();
        }
        "d" => spec.d = one(e)?,
        "q" => spec.q = one(e)?,
        "graph" => {
            spec.graph = match v {
                "tour" => GraphKind::Tour,
                "tree" | "mst" => GraphKind::Tree,
                "matching" => GraphKind::Matching,
                _ => return Err(parse_err(e.line, format!("key 'graph': unknown kind '{v}'"))),
            }
        }
        "alpha" => spec.alpha = one(e)?,
        "progeny" => {
            spec.progeny = match v {
                "binary" => vec![0.0, 0.0, 1.0],
                _ => list(e)?,
            };
            ProgenyLaw::new(spec.progeny.clone()).map_err(wrap)?;
        }
        "condition" => spec.condition_on_survival = one(e)?,
        "tree_mode" => {
            spec.tree_mode = match v {
                "fixed" => TreeMode::Fixed,
                "resampled" => TreeMode::Resampled,
                _ => return Err(parse_err(e.line, format!("key 'tree_mode': unknown mode '{v}'"))),
            }
        }
        "law" => spec.law = Some(v.parse().map_err(wrap)?),
        "variant" => spec.variant = v.parse().map_err(wrap)?,
        "epsilon" => spec.epsilons = list(e)?,
        "theta_c" => spec.theta_c = list(e)?,
        "replications" => spec.replications = one(e)?,
        "seed" => spec.seed = one(e)?,
        "block_subsample" => spec.block_subsample = if v == "all" { None } else { Some(one(e)?) },
        "exact_cap" => spec.exact_cap = one(e)?,
        "timing" => spec.timing = one(e)?,
        "out" => spec.out = PathBuf::from(v),
        "format" => spec.format = v.parse().map_err(wrap)?,
        _ => unreachable!("keys are checked before they are applied"),
    }
    Ok(())
}

/// Parses config text for `kind` and validates the result.
pub fn parse_config(text: &str, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let mut shared = Vec::new();
    let mut own = Vec::new();
    let mut found = false;
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line, format!("unterminated section header '{s}'")))?
                .trim();
            name.parse::<ExperimentKind>()
                .map_err(|_| parse_err(line, format!("unknown section '[{name}]'")))?;
            found |= name == kind.name();
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{s}'")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(parse_err(line, format!("unknown key '{key}'")));
        }
        let entry = Entry { line, key: key.to_string(), value: value.trim().to_string() };
        match section.as_deref() {
            None => shared.push(entry),
            Some(name) if name == kind.name() => own.push(entry),
            Some(_) => {}
        }
    }
    if !found {
        return Err(Error::Validation(format!("config has no [{kind}] section")));
    }
    let mut spec = ExperimentSpec::new(kind);
    for e in shared.iter().chain(&own) {
        apply(&mut spec, e)?;
    }
    if spec.family.is_some() && spec.family != Some(FamilyKind::Ea) && !spec.shapes.is_empty() {
        return Err(Error::Validation("'shape' applies to the ea family only".into()));
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path, kind: ExperimentKind) -> Result<ExperimentSpec> {
    parse_config(&std::fs::read_to_string(path)?, kind)
}
