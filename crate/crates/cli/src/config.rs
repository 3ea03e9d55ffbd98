//! Run configuration: the versioned JSON document, rank lists and the
//! resolution of file values, flags and defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use foelner_core::OperatorSpecDoc;
use foelner_core::ProjectionDoc;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subcommand {
    Defect,
    Sequence,
    Probe,
    Classify,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum NormChoice {
    Hs,
    Trace,
    Op,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    Interval,
    Tensor,
    Greedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExtenderChoice {
    Interval,
    Optimizer,
    Trivial,
    Script,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveChoice {
    Max,
    SumSquares,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SuiteChoice {
    Perturbation,
    SumProjections,
    Tensor,
    TraceHs,
    All,
}

/// Rank sweep. Parsed from `a..b` (inclusive), comma lists, or a mix such as
/// `1..4,8,16`; serialized as the explicit list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RankList(pub Vec<usize>);

impl RankList {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((a, b)) = part.split_once("..") {
                let b = b.strip_prefix('=').unwrap_or(b);
                let a: usize = a.trim().parse().map_err(|_| format!("bad range start in `{part}`"))?;
                let b: usize = b.trim().parse().map_err(|_| format!("bad range end in `{part}`"))?;
                if a > b {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(a..=b);
            } else {
                out.push(part.parse().map_err(|_| format!("bad rank `{part}`"))?);
            }
        }
        if out.is_empty() {
            return Err("rank list is empty".into());
        }
        Ok(RankList(out))
    }
}

impl std::str::FromStr for RankList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RankList::parse(s)
    }
}

impl<'de> Deserialize<'de> for RankList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => RankList::parse(&t).map_err(de::Error::custom),
            Raw::List(l) if l.is_empty() => Err(de::Error::custom("rank list is empty")),
            Raw::List(l) => Ok(RankList(l)),
        }
    }
}

/// Tensor-suite dimensions, `AxB`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims(pub usize, pub usize);

impl std::str::FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected AxB, got `{s}`"))?;
        let a = a.trim().parse().map_err(|_| format!("bad dimension in `{s}`"))?;
        let b = b.trim().parse().map_err(|_| format!("bad dimension in `{s}`"))?;
        Ok(Dims(a, b))
    }
}

/// Operators given inline (one document or a list) or as a path to a JSON
/// file, relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorsField {
    Path(String),
    One(OperatorSpecDoc),
    Many(Vec<OperatorSpecDoc>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionField {
    Path(String),
    Inline(ProjectionDoc),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<Subcommand>,
    #[serde(default, alias = "operator", skip_serializing_if = "Option::is_none")]
    pub operators: Option<OperatorsField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<ProjectionField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<RankList>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extender: Option<ExtenderChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extender_cmd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient_depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<Dims>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($field:ident),* $(,)?) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::validation(format!("malformed config {}: {e}", path.display())))?;
        match cfg.schema_version {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(Failure::validation(format!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"))),
            None => return Err(Failure::validation("config is missing schema_version")),
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.operators = match cfg.operators.take() {
            Some(OperatorsField::Path(p)) => Some(OperatorsField::Many(read_operators(&base.join(p))?)),
            other => other,
        };
        cfg.projection = match cfg.projection.take() {
            Some(ProjectionField::Path(p)) => Some(ProjectionField::Inline(read_projection(&base.join(p))?)),
            other => other,
        };
        Ok(cfg)
    }

    /// Values set in `top` replace those in `self`.
    pub fn overlay(&mut self, top: RunConfig) {
        overlay!(self, top;
            subcommand, operators, projection, rank, norm, scheme, ranks, steps, extender, extender_cmd,
            ambient, ambient_depth, restarts, iters, objective, max_rank, tol, suite, trials, dim, s, dims,
            seed, format, output,
        );
    }

    pub fn operator_docs(&self) -> Result<Vec<OperatorSpecDoc>, Failure> {
        match &self.operators {
            Some(OperatorsField::One(d)) => Ok(vec![d.clone()]),
            Some(OperatorsField::Many(v)) if !v.is_empty() => Ok(v.clone()),
            Some(OperatorsField::Many(_)) => Err(Failure::validation("operator list is empty")),
            Some(OperatorsField::Path(p)) => read_operators(Path::new(p)),
            None => Err(Failure::validation("no operator given (use --operator FILE or \"operator\" in the config)")),
        }
    }

    pub fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T, Failure> {
        value.ok_or_else(|| Failure::validation(format!("missing required parameter `{name}`")))
    }
}

pub fn read_operators(path: &Path) -> Result<Vec<OperatorSpecDoc>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read operator file {}: {e}", path.display())))?;
    let docs = OperatorSpecDoc::list_from_json(&text)
        .map_err(|e| Failure::validation(format!("malformed operator file {}: {e}", path.display())))?;
    if docs.is_empty() {
        return Err(Failure::validation(format!("operator file {} is empty", path.display())));
    }
    Ok(docs)
}

pub fn read_projection(path: &Path) -> Result<ProjectionDoc, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read projection file {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::validation(format!("malformed projection file {}: {e}", path.display())))
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Defect => "defect",
            Subcommand::Sequence => "sequence",
            Subcommand::Probe => "probe",
            Subcommand::Classify => "classify",
            Subcommand::Verify => "verify",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_syntax() {
        assert_eq!(RankList::parse("1..4").unwrap().0, vec![1, 2, 3, 4]);
        assert_eq!(RankList::parse("4,16, 64").unwrap().0, vec![4, 16, 64]);
        assert_eq!(RankList::parse("1..2,8").unwrap().0, vec![1, 2, 8]);
        assert_eq!(RankList::parse("3..=4").unwrap().0, vec![3, 4]);
        assert!(RankList::parse("5..2").is_err());
        assert!(RankList::parse("").is_err());
        assert!(RankList::parse("a").is_err());
        let from_json: RankList = serde_json::from_str("\"2..3\"").unwrap();
        assert_eq!(from_json.0, vec![2, 3]);
        let from_list: RankList = serde_json::from_str("[5, 6]").unwrap();
        assert_eq!(from_list.0, vec![5, 6]);
    }

    #[test]
    fn dims_syntax() {
        assert_eq!("8x8".parse::<Dims>().unwrap(), Dims(8, 8));
        assert!("8".parse::<Dims>().is_err());
    }

    #[test]
    fn overlay_prefers_top() {
        let mut base = RunConfig { seed: Some(1), trials: Some(10), ..Default::default() };
        base.overlay(RunConfig { seed: Some(7), ..Default::default() });
        assert_eq!(base.seed, Some(7));
        assert_eq!(base.trials, Some(10));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"schema_version":1,"bogus":2}"#).is_err());
    }
}
