//! JSON space files. See `docs/space-format.md` for the schema.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{DesignSpace, Expr, SpaceError, VarKind};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed space file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid space: {0}")]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub variables: Vec<VarSpec>,
    #[serde(default)]
    pub activations: Vec<ActivationSpec>,
    #[serde(default)]
    pub forbidden: Vec<Expr>,
    #[serde(default = "default_true")]
    pub single_option_inactive: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: KindSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KindSpec {
    Continuous { bounds: [f64; 2] },
    Integer { bounds: [i64; 2] },
    Ordinal { values: Vec<f64> },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub target: String,
    pub predicate: Expr,
}

impl SpaceFile {
    pub fn from_space(space: &DesignSpace) -> SpaceFile {
        let variables = space
            .variables()
            .iter()
            .map(|v| VarSpec {
                name: v.name.clone(),
                kind: match &v.kind {
                    VarKind::Continuous { lower, upper } => KindSpec::Continuous { bounds: [*lower, *upper] },
                    VarKind::Integer { lower, upper } => KindSpec::Integer { bounds: [*lower, *upper] },
                    VarKind::Ordinal { values } => KindSpec::Ordinal { values: values.clone() },
                    VarKind::Categorical { levels } => KindSpec::Categorical { levels: levels.clone() },
                },
            })
            .collect();
        let activations = space
            .activation_exprs()
            .into_iter()
            .map(|(target, predicate)| ActivationSpec { target, predicate })
            .collect();
        SpaceFile {
            variables,
            activations,
            forbidden: space.forbidden_exprs(),
            single_option_inactive: space.single_option_inactive(),
        }
    }

    pub fn build(&self) -> Result<DesignSpace, SpaceError> {
        let mut b = DesignSpace::builder().single_option_inactive(self.single_option_inactive);
        for v in &self.variables {
            let kind = match &v.kind {
                KindSpec::Continuous { bounds } => VarKind::Continuous { lower: bounds[0], upper: bounds[1] },
                KindSpec::Integer { bounds } => VarKind::Integer { lower: bounds[0], upper: bounds[1] },
                KindSpec::Ordinal { values } => VarKind::Ordinal { values: values.clone() },
                KindSpec::Categorical { levels } => VarKind::Categorical { levels: levels.clone() },
            };
            b = b.variable(&v.name, kind);
        }
        for a in &self.activations {
            b = b.active_if(&a.target, a.predicate.clone());
        }
        for f in &self.forbidden {
            b = b.forbid(f.clone());
        }
        b.build()
    }
}

pub fn parse_space(text: &str) -> Result<DesignSpace, FormatError> {
    let file: SpaceFile = serde_json::from_str(text)?;
    Ok(file.build()?)
}

pub fn space_to_json(space: &DesignSpace) -> String {
    serde_json::to_string_pretty(&SpaceFile::from_space(space)).expect("space file serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
      "variables": [
        {"name": "fan", "kind": "categorical", "levels": ["no", "yes"]},
        {"name": "n", "kind": "integer", "bounds": [1, 3]},
        {"name": "r", "kind": "ordinal", "values": [0.5, 1.0, 2.0]},
        {"name": "bpr", "kind": "continuous", "bounds": [2.0, 12.5]}
      ],
      "activations": [{"target": "bpr", "predicate": {"eq": ["fan", "yes"]}}],
      "forbidden": [{"and": [{"eq": ["n", 1]}, {"ge": ["r", 1.0]}]}]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let s = parse_space(SAMPLE).unwrap();
        assert_eq!(s.n_vars(), 4);
        assert!(s.single_option_inactive());
        let text = space_to_json(&s);
        let back = parse_space(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(*s.enumeration().unwrap(), *back.enumeration().unwrap());
    }

    #[test]
    fn reports_position_on_syntax_error() {
        let err = parse_space("{\n \"variables\": [ {\"name\": 1} ]\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn reports_unknown_variable() {
        let text = r#"{"variables": [{"name": "a", "kind": "integer", "bounds": [0, 1]}],
                       "forbidden": [{"eq": ["b", 0]}]}"#;
        let err = parse_space(text).unwrap_err();
        assert!(err.to_string().contains("unknown variable `b`"));
    }
}
