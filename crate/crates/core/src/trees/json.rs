//! JSON encoding of trees: nested
//! `{"poly": [...], "ext": {"q0": "...", "q1": "..."}, "children":
//!   [{"kind": "I"|"Xi", "deriv": [...], "tree": {...}}]}`.

use serde::{Deserialize, Serialize};

use crate::algebra::{format_q, parse_q, Degree, MultiIndex};
use crate::error::{Error, Result};

use super::tree::{EdgeKind, EdgeType, Tree};

#[derive(Serialize, Deserialize)]
pub struct TreeJson {
    pub poly: Vec<u32>,
    pub ext: DegreeJson,
    pub children: Vec<EdgeJson>,
}

#[derive(Serialize, Deserialize)]
pub struct DegreeJson {
    pub q0: String,
    pub q1: String,
}

#[derive(Serialize, Deserialize)]
pub struct EdgeJson {
    pub kind: String,
    pub deriv: Vec<u32>,
    pub tree: TreeJson,
}

impl From<&Degree> for DegreeJson {
    fn from(d: &Degree) -> Self {
        DegreeJson {
            q0: format_q(&d.q0),
            q1: format_q(&d.q1),
        }
    }
}

impl DegreeJson {
    pub fn to_degree(&self) -> Result<Degree> {
        Ok(Degree::new(parse_q(&self.q0)?, parse_q(&self.q1)?))
    }
}

impl From<&Tree> for TreeJson {
    fn from(t: &Tree) -> Self {
        TreeJson {
            poly: t.poly().entries().to_vec(),
            ext: t.ext().into(),
            children: t
                .children()
                .iter()
                .map(|(e, c)| EdgeJson {
                    kind: match e.kind {
                        EdgeKind::Noise => "Xi".into(),
                        EdgeKind::Kernel => "I".into(),
                    },
                    deriv: e.deriv.entries().to_vec(),
                    tree: c.into(),
                })
                .collect(),
        }
    }
}

impl TreeJson {
    pub fn to_tree(&self, dim: usize) -> Result<Tree> {
        if self.poly.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.poly.len(),
            });
        }
        let children = self
            .children
            .iter()
            .map(|e| {
                let kind = match e.kind.as_str() {
                    "Xi" => EdgeKind::Noise,
                    "I" => EdgeKind::Kernel,
                    other => {
                        return Err(Error::Invalid(format!("unknown edge kind `{other}`")))
                    }
                };
                if e.deriv.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: e.deriv.len(),
                    });
                }
                Ok((
                    EdgeType {
                        kind,
                        deriv: MultiIndex::new(e.deriv.clone()),
                    },
                    e.tree.to_tree(dim)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tree::new(
            MultiIndex::new(self.poly.clone()),
            self.ext.to_degree()?,
            children,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::parse::parse_tree;

    #[test]
    fn json_round_trip() {
        let t = parse_tree("E^{-1-2k}*X^(1,0,0,0)*I_(0,0,0,1)[Xi]", 4).unwrap();
        let j = serde_json::to_string(&TreeJson::from(&t)).unwrap();
        let back: TreeJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.to_tree(4).unwrap(), t);
    }
}
