use serde::Serialize;

use crate::error::Result;
use crate::moment_algebra::{
    format_f64, recurrence_with_diagnostics, EquilibriumState, MomentVector,
};

use super::{GridState, PIVOT_TOL};

/// Relative size of `min_{k>=1} b_k` against `M_2/M_0` below which a cell
/// is flagged as touching the realizability boundary.
pub const NEAR_BOUNDARY_RATIO: f64 = 1e-10;

/// True when some `b_k` (`k >= 1`) of the cell is below
/// `NEAR_BOUNDARY_RATIO * M_2/M_0`. The scale `M_2/M_0 = U^2 + theta` stays
/// finite when `theta` itself collapses. Non-realizable input counts as near.
pub fn near_boundary(m: &MomentVector) -> bool {
    let Ok((rc, _)) = recurrence_with_diagnostics(m, PIVOT_TOL) else {
        return true;
    };
    let scale = m.get(2) / m.get(0);
    rc.b()
        .iter()
        .skip(1)
        .any(|b| *b < NEAR_BOUNDARY_RATIO * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub x: f64,
    pub moments: Vec<f64>,
    pub rho: f64,
    #[serde(rename = "U")]
    pub velocity: f64,
    pub theta: f64,
    /// `1` for a well-separated cell, `0` when [`near_boundary`] holds.
    pub realizable_flag: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    pub rows: Vec<SnapshotRow>,
}

impl Snapshot {
    pub fn capture(g: &GridState, step: usize) -> Result<Self> {
        let rows = g
            .cells
            .iter()
            .zip(&g.x)
            .map(|(m, x)| {
                let st = EquilibriumState::from_moments(m)?;
                Ok(SnapshotRow {
                    x: *x,
                    moments: m.values().to_vec(),
                    rho: st.rho,
                    velocity: st.velocity,
                    theta: st.theta,
                    realizable_flag: u8::from(!near_boundary(m)),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            time: g.time,
            step,
            rows,
        })
    }

    pub fn flagged_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.realizable_flag == 0).count()
    }

    pub fn to_csv(&self) -> String {
        let len = self.rows.first().map_or(0, |r| r.moments.len());
        let mut out = String::from("x");
        for k in 0..len {
            out.push_str(&format!(",M_{k}"));
        }
        out.push_str(",rho,U,theta,realizable_flag\n");
        for r in &self.rows {
            out.push_str(&format_f64(r.x));
            for v in &r.moments {
                out.push(',');
                out.push_str(&format_f64(*v));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                format_f64(r.rho),
                format_f64(r.velocity),
                format_f64(r.theta),
                r.realizable_flag
            ));
        }
        out
    }
}
