//! JSON channel files.
//!
//! ```json
//! {"kraus": [[[[1,0],[0,0]], [[0,0],[0.9,0]]], ...]}
//! {"ptm": [[1,0,0,0],[0,0.8,0,0],[0,0,0.8,0],[0,0,0,1]]}
//! ```
//!
//! Complex numbers are `[re, im]` pairs; each Kraus operator is a list of rows.

use nalgebra::{Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

use super::{kraus_to_superop, ChannelError, KrausSet, SuperOp};
use crate::linalg::{c, C64};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptm: Option<Vec<Vec<f64>>>,
}

impl ChannelFile {
    pub fn from_superop(c: &SuperOp) -> Self {
        let ptm = (0..4).map(|i| (0..4).map(|j| c.ptm()[(i, j)]).collect()).collect();
        Self { kraus: None, ptm: Some(ptm) }
    }

    pub fn from_kraus(k: &KrausSet) -> Self {
        let ops = k
            .ops()
            .iter()
            .map(|a| (0..2).map(|i| (0..2).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect())
            .collect();
        Self { kraus: Some(ops), ptm: None }
    }

    pub fn to_superop(&self) -> Result<SuperOp, ChannelError> {
        match (&self.kraus, &self.ptm) {
            (Some(ops), None) => {
                let mats = ops.iter().map(|op| parse_kraus_op(op)).collect::<Result<Vec<_>, _>>()?;
                Ok(kraus_to_superop(&KrausSet::new(mats)?))
            }
            (None, Some(rows)) => {
                if rows.len() != 4 || rows.iter().any(|row| row.len() != 4) {
                    return Err(ChannelError::Parse("ptm must be 4x4".into()));
                }
                SuperOp::from_ptm(Matrix4::from_fn(|i, j| rows[i][j]))
            }
            _ => Err(ChannelError::Parse("expected exactly one of \"kraus\" or \"ptm\"".into())),
        }
    }
}

fn parse_kraus_op(rows: &[Vec<[f64; 2]>]) -> Result<Matrix2<C64>, ChannelError> {
    if rows.len() != 2 || rows.iter().any(|row| row.len() != 2) {
        return Err(ChannelError::Parse("each Kraus operator must be 2x2".into()));
    }
    Ok(Matrix2::from_fn(|i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn parse_channel(text: &str) -> Result<SuperOp, ChannelError> {
    let file: ChannelFile =
        serde_json::from_str(text).map_err(|e| ChannelError::Parse(e.to_string()))?;
    file.to_superop()
}
