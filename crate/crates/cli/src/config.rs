//! Run configurations, read from JSON or TOML by file extension.

use std::path::Path;

use hicontrast::fields::MicrostructureSpec;
use hicontrast::symbols::{catalog, OperatorDoc};
use hicontrast::{DifferentialOperator, IntegrandSpec, SoftFamily, SolveOptions};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A catalog name such as `"div:2"`, or an inline operator document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorRef {
    Name(String),
    Spec(OperatorDoc),
}

impl OperatorRef {
    pub fn resolve(&self) -> Result<DifferentialOperator, CliError> {
        match self {
            Self::Name(name) => Ok(catalog::lookup(name)?.op),
            Self::Spec(doc) => Ok(doc.clone().into_operator()?),
        }
    }
}

/// One point or a list of points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    One(Vec<f64>),
    Many(Vec<Vec<f64>>),
}

impl Points {
    pub fn to_vec(&self) -> Vec<Vec<f64>> {
        match self {
            Self::One(p) => vec![p.clone()],
            Self::Many(ps) => ps.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub operator: OperatorRef,
    pub integrand: IntegrandSpec,
    pub xi: Points,
    pub n: usize,
    #[serde(default)]
    pub opts: SolveOptions,
    #[serde(default)]
    pub output_csv: Option<String>,
}

fn default_k() -> Vec<usize> {
    vec![1]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhomConfig {
    pub operator: OperatorRef,
    pub integrand: IntegrandSpec,
    pub microstructure: MicrostructureSpec,
    pub xi: Points,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    pub n: usize,
    #[serde(default)]
    pub opts: SolveOptions,
    #[serde(default)]
    pub output_csv: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alpha0Config {
    pub operator: OperatorRef,
    pub integrand: IntegrandSpec,
    pub microstructure: MicrostructureSpec,
    pub n: usize,
    #[serde(default)]
    pub opts: SolveOptions,
    #[serde(default)]
    pub output_csv: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub operator: OperatorRef,
    pub f0: IntegrandSpec,
    #[serde(default)]
    pub f0_perturbation: Option<IntegrandSpec>,
    pub f1: IntegrandSpec,
    pub microstructure: MicrostructureSpec,
    pub s: usize,
    pub m_list: Vec<usize>,
    pub xi_grid: Vec<Vec<f64>>,
    #[serde(default = "default_k")]
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub opts: SolveOptions,
    #[serde(default)]
    pub output_csv: Option<String>,
}

impl SweepConfig {
    pub fn soft_family(&self) -> SoftFamily {
        SoftFamily {
            base: self.f0.clone(),
            perturbation: self.f0_perturbation.clone(),
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path)
}

pub fn parse<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, CliError> {
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let json = r#"{"operator":"div:2","integrand":{"kind":"quadratic","b":[0,0]},"xi":[1,2],"n":8}"#;
        let toml = "operator = \"div:2\"\nxi = [1.0, 2.0]\nn = 8\n[integrand]\nkind = \"quadratic\"\nb = [0.0, 0.0]\n";
        let a: EnvelopeConfig = parse(json, Path::new("a.json")).unwrap();
        let b: EnvelopeConfig = parse(toml, Path::new("a.toml")).unwrap();
        assert_eq!(a.xi.to_vec(), b.xi.to_vec());
        assert_eq!(a.integrand, b.integrand);
        assert_eq!(a.opts, SolveOptions::default());
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"operator":"div:2","integrand":{"kind":"neg_det"},"xi":[0,0,0,0],"n":8,"typo":1}"#;
        assert!(parse::<EnvelopeConfig>(json, Path::new("a.json")).is_err());
    }

    #[test]
    fn inline_operator_document() {
        let json = r#"{"dim":1,"order":1,"in_dim":1,"out_dim":1,"terms":[{"multi_index":[1],"matrix":[1.0]}]}"#;
        let r: OperatorRef = serde_json::from_str(json).unwrap();
        assert_eq!(r.resolve().unwrap().dim(), 1);
        let bad = OperatorRef::Name("nope".into());
        assert!(bad.resolve().is_err());
    }
}
