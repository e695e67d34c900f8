//! Instance files: a JSON document describing a space, an operator, a
//! projection and optionally a sub-projection.
//!
//! Matrix entries may be JSON numbers or decimal strings; the canonical form
//! written back out always uses decimal strings with full precision.

use std::path::Path;
use std::sync::Arc;

use ergodicity::{
    make_embedded, make_simplex, InnerBall, MarkovOperator, MarkovProjection, ProjectionKind,
    SpaceKind, StateSpace,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Text(String),
}

impl Real {
    fn value(&self, location: &str) -> Result<f64, CliError> {
        let v = match self {
            Real::Number(v) => *v,
            Real::Text(s) => s.trim().parse::<f64>().map_err(|_| {
                CliError::parse(location, format!("'{s}' is not a decimal number"))
            })?,
        };
        if !v.is_finite() {
            return Err(CliError::parse(location, "entry is not finite"));
        }
        Ok(v)
    }
}

pub fn decimal(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallSpec {
    L1,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Simplex { dim: usize },
    Embedded { inner_dim: usize, inner_ball: BallSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionSpec {
    RankOne {
        y: Vec<Real>,
    },
    Block {
        blocks: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchors: Option<Vec<Vec<Real>>>,
    },
    Matrix {
        entries: Vec<Vec<Real>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub space: SpaceSpec,
    /// Row-major.
    pub operator: Vec<Vec<Real>>,
    pub projection: ProjectionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_projection: Option<ProjectionSpec>,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: Arc<StateSpace>,
    pub t: MarkovOperator,
    pub p: MarkovProjection,
    pub q: Option<MarkovProjection>,
}

fn vector(v: &[Real], dim: usize, location: &str) -> Result<DVector<f64>, CliError> {
    if v.len() != dim {
        return Err(CliError::parse(
            location,
            format!("expected {dim} entries, found {}", v.len()),
        ));
    }
    let values = v
        .iter()
        .enumerate()
        .map(|(i, r)| r.value(&format!("{location}[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DVector::from_vec(values))
}

fn matrix(rows: &[Vec<Real>], dim: usize, location: &str) -> Result<DMatrix<f64>, CliError> {
    if rows.len() != dim {
        return Err(CliError::parse(
            location,
            format!("expected {dim} rows, found {}", rows.len()),
        ));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let r = vector(row, dim, &format!("{location}[{i}]"))?;
        m.set_row(i, &r.transpose());
    }
    Ok(m)
}

fn projection(
    spec: &ProjectionSpec,
    space: &Arc<StateSpace>,
    location: &str,
) -> Result<MarkovProjection, CliError> {
    let dim = space.dim();
    let built = match spec {
        ProjectionSpec::RankOne { y } => {
            MarkovProjection::rank_one(space.clone(), vector(y, dim, &format!("{location}.y"))?)
        }
        ProjectionSpec::Block { blocks, anchors } => {
            let anchors = match anchors {
                None => None,
                Some(list) => {
                    if list.len() != blocks.len() {
                        return Err(CliError::parse(
                            &format!("{location}.anchors"),
                            format!("{} anchors for {} blocks", list.len(), blocks.len()),
                        ));
                    }
                    let mut out = Vec::with_capacity(list.len());
                    for (b, a) in list.iter().enumerate() {
                        let len = if a.len() == dim { dim } else { blocks[b].len() };
                        out.push(vector(a, len, &format!("{location}.anchors[{b}]"))?);
                    }
                    Some(out)
                }
            };
            MarkovProjection::block_averaging(space.clone(), blocks.clone(), anchors)
        }
        ProjectionSpec::Matrix { entries } => MarkovProjection::explicit(
            space.clone(),
            matrix(entries, dim, &format!("{location}.entries"))?,
        ),
    };
    built.map_err(|e| CliError::Validation(format!("{location}: {e}")))
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::parse(&format!("line {}, column {}", e.line(), e.column()), e.to_string())
        })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    pub fn build(&self) -> Result<Instance, CliError> {
        let space = match &self.space {
            SpaceSpec::Simplex { dim } => make_simplex(*dim),
            SpaceSpec::Embedded {
                inner_dim,
                inner_ball,
            } => make_embedded(
                *inner_dim,
                match inner_ball {
                    BallSpec::L1 => InnerBall::L1,
                    BallSpec::Linf => InnerBall::Linf,
                },
            ),
        }
        .map_err(|e| CliError::Validation(format!("space: {e}")))?;
        let space = Arc::new(space);
        let m = matrix(&self.operator, space.dim(), "operator")?;
        let t = MarkovOperator::new(m, space.clone())
            .map_err(|e| CliError::Validation(format!("operator: {e}")))?;
        let p = projection(&self.projection, &space, "projection")?;
        let q = self
            .sub_projection
            .as_ref()
            .map(|s| projection(s, &space, "sub_projection"))
            .transpose()?;
        Ok(Instance { space, t, p, q })
    }

    /// Canonical JSON text; entries as decimal strings.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files always serialize")
    }
}

fn reals(v: impl IntoIterator<Item = f64>) -> Vec<Real> {
    v.into_iter().map(|x| Real::Text(decimal(x))).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<Real>> {
    m.row_iter().map(|r| reals(r.iter().copied())).collect()
}

fn projection_spec(p: &MarkovProjection) -> ProjectionSpec {
    match p.kind() {
        ProjectionKind::RankOne { y } => ProjectionSpec::RankOne {
            y: reals(y.iter().copied()),
        },
        ProjectionKind::BlockAveraging { blocks, anchors } => ProjectionSpec::Block {
            blocks: blocks.clone(),
            anchors: Some(anchors.iter().map(|a| reals(a.iter().copied())).collect()),
        },
        ProjectionKind::Explicit => ProjectionSpec::Matrix {
            entries: rows(p.matrix()),
        },
    }
}

impl Instance {
    pub fn to_file(&self) -> InstanceFile {
        let space = match self.space.kind() {
            SpaceKind::EmbeddedBall {
                inner_dim,
                inner_ball,
            } => SpaceSpec::Embedded {
                inner_dim: *inner_dim,
                inner_ball: match inner_ball {
                    InnerBall::L1 => BallSpec::L1,
                    InnerBall::Linf => BallSpec::Linf,
                },
            },
            _ => SpaceSpec::Simplex {
                dim: self.space.dim(),
            },
        };
        InstanceFile {
            space,
            operator: rows(self.t.matrix()),
            projection: projection_spec(&self.p),
            sub_projection: self.q.as_ref().map(projection_spec),
        }
    }

    /// `sha256:` digest of the canonical serialization.
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(&self.to_file()).expect("instance files always serialize");
        format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())))
    }
}

pub fn load(path: &Path) -> Result<Instance, CliError> {
    InstanceFile::read(path)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_STATE: &str = r#"{
        "space": {"type": "simplex", "dim": 2},
        "operator": [[0.7, "0.1"], [0.3, 0.9]],
        "projection": {"type": "rank_one", "y": [0.25, 0.75]}
    }"#;

    #[test]
    fn parses_numbers_and_strings() {
        let inst = InstanceFile::parse(TWO_STATE).unwrap().build().unwrap();
        assert_eq!(inst.t.matrix()[(0, 1)], 0.1);
        assert_eq!(inst.t.matrix()[(1, 0)], 0.3);
    }

    #[test]
    fn round_trip_is_exact() {
        let inst = InstanceFile::parse(TWO_STATE).unwrap().build().unwrap();
        let text = inst.to_file().to_json();
        let again = InstanceFile::parse(&text).unwrap().build().unwrap();
        assert_eq!(inst.t.matrix(), again.t.matrix());
        assert_eq!(inst.p.matrix(), again.p.matrix());
        assert_eq!(inst.digest(), again.digest());
    }

    #[test]
    fn bad_row_length_is_located() {
        let text = TWO_STATE.replace("[0.7, \"0.1\"]", "[0.7, 0.1, 0.2]");
        let err = InstanceFile::parse(&text).unwrap().build().unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("operator[0]"), "{err}");
    }

    #[test]
    fn non_markov_is_a_validation_error() {
        let text = TWO_STATE.replace("[0.3, 0.9]", "[0.4, 0.9]");
        let err = InstanceFile::parse(&text).unwrap().build().unwrap_err();
        assert_eq!(err.code(), 3);
    }
}
