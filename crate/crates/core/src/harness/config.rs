//! JSON schemas for system and sweep-grid files. Matrices are row-major
//! nested arrays.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sweep::{ControllerKind, SweepGrid, SystemTemplate};
use crate::dap::DapClass;
use crate::error::{Error, Result};
use crate::flh::PrunePolicy;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DapClassFile {
    pub m: usize,
    pub r: f64,
    pub gamma: f64,
}

/// System file: dynamics, costs and the policy-class parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemFile {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub r_x: Vec<Vec<f64>>,
    pub r_u: Vec<Vec<f64>>,
    pub dap: DapClassFile,
}

/// Sweep grid file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    #[serde(default)]
    pub system: Option<SystemFile>,
    pub ns: Vec<usize>,
    pub cns: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub controller: Option<String>,
    #[serde(default)]
    pub h_cap: Option<usize>,
    #[serde(default)]
    pub prune_geometric: bool,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::dims("matrix needs at least one row"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dims("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl SystemFile {
    /// The sign-pattern environment with its unit policy class.
    pub fn lower_bound() -> Self {
        Self {
            a: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            b: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            r_x: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            r_u: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            dap: DapClassFile {
                m: 1,
                r: 1.0,
                gamma: 0.5,
            },
        }
    }

    pub fn template(&self) -> Result<SystemTemplate> {
        Ok(SystemTemplate {
            a: matrix_from_rows(&self.a)?,
            b: matrix_from_rows(&self.b)?,
            r_x: matrix_from_rows(&self.r_x)?,
            r_u: matrix_from_rows(&self.r_u)?,
        })
    }

    pub fn dap_class(&self) -> Result<DapClass> {
        let b = matrix_from_rows(&self.b)?;
        DapClass::new(self.dap.m, self.dap.r, self.dap.gamma, b.ncols(), b.nrows())
    }
}

impl GridFile {
    pub fn to_grid(&self) -> Result<SweepGrid> {
        let system_file = self.system.clone().unwrap_or_else(SystemFile::lower_bound);
        let controller = match self.controller.as_deref() {
            None | Some("prodr") => ControllerKind::Prodr,
            Some("zero") => ControllerKind::Zero,
            Some(other) => {
                return Err(Error::bounds(format!("unknown controller '{other}'")));
            }
        };
        Ok(SweepGrid {
            system: system_file.template()?,
            class: system_file.dap_class()?,
            ns: self.ns.clone(),
            cns: self.cns.clone(),
            seeds: self.seeds.clone(),
            controller,
            h_cap: self.h_cap,
            prune: if self.prune_geometric {
                PrunePolicy::Geometric
            } else {
                PrunePolicy::KeepAll
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_roundtrip() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let m = matrix_from_rows(&rows).unwrap();
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(matrix_to_rows(&m), rows);
        assert!(matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn grid_json_parses() {
        let json = r#"{
            "ns": [64, 128],
            "cns": [4.0],
            "seeds": [1, 2],
            "controller": "zero",
            "h_cap": 4
        }"#;
        let grid: GridFile = serde_json::from_str(json).unwrap();
        let sweep = grid.to_grid().unwrap();
        assert_eq!(sweep.ns, vec![64, 128]);
        assert_eq!(sweep.controller, ControllerKind::Zero);
        assert_eq!(sweep.class.d_u, 2);
    }
}
