use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment_algebra::{
    recurrence_to_moments, EquilibriumState, MomentVector, RecurrenceCoefficients, MAX_HALF_ORDER,
};

use super::{Boundary, FluxChoice, GridState};

/// Piecewise-constant initial data on `[x_min, x_max)`, given as an
/// equilibrium state plus optional perturbations of its recurrence
/// coefficients (`a_k += da[k]`, `b_k += db[k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub x_min: f64,
    pub x_max: f64,
    pub rho: f64,
    #[serde(rename = "U", alias = "u")]
    pub velocity: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub da: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub db: Vec<f64>,
}

impl Segment {
    /// Moments `M_0..M_2n` of this segment.
    pub fn moments(&self, n: usize) -> Result<MomentVector> {
        let state = EquilibriumState::new(self.rho, self.velocity, self.theta)
            .map_err(|e| Error::Config(format!("initial segment: {e}")))?;
        if self.da.len() > n {
            return Err(Error::Config(format!(
                "initial.da has {} entries, at most n = {n} allowed",
                self.da.len()
            )));
        }
        if self.db.len() > n + 1 {
            return Err(Error::Config(format!(
                "initial.db has {} entries, at most n + 1 = {} allowed",
                self.db.len(),
                n + 1
            )));
        }
        let base = RecurrenceCoefficients::equilibrium(&state, n, n + 1);
        let mut a = base.a().to_vec();
        let mut b = base.b().to_vec();
        for (k, d) in self.da.iter().enumerate() {
            a[k] += d;
        }
        for (k, d) in self.db.iter().enumerate() {
            b[k] += d;
            if !(b[k] > 0.0) {
                return Err(Error::Config(format!(
                    "initial.db[{k}] makes b_{k} = {} non-positive",
                    b[k]
                )));
            }
        }
        let rc = RecurrenceCoefficients::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
        recurrence_to_moments(&rc, 2 * n + 1)
    }
}

fn default_gamma() -> f64 {
    1.0
}

/// Simulation input. `tau = null` (or absent) disables relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub flux_variant: FluxChoice,
    pub cfl: f64,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    pub domain: [f64; 2],
    pub cells: usize,
    pub t_final: f64,
    /// Time between snapshots; absent means initial and final only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
    pub boundary: Boundary,
    pub initial: Vec<Segment>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if self.n == 0 || self.n > MAX_HALF_ORDER {
            return bad(
                "n",
                format!("must be in 1..={MAX_HALF_ORDER}, got {}", self.n),
            );
        }
        let nf = self.n as f64;
        if !(self.gamma.is_finite() && self.gamma > -2.0 * nf) {
            return bad(
                "gamma",
                format!("must exceed -2n = {}, got {}", -2.0 * nf, self.gamma),
            );
        }
        if self.flux_variant == FluxChoice::EigenNodes && !(self.gamma > -nf) {
            return bad(
                "gamma",
                format!(
                    "eigen_nodes flux needs gamma > -n = {}, got {}",
                    -nf, self.gamma
                ),
            );
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", format!("must be in (0, 1], got {}", self.cfl));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return bad("tau", format!("must be positive or null, got {t}"));
            }
        }
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                return bad("dt_max", format!("must be positive, got {d}"));
            }
        }
        let [x0, x1] = self.domain;
        if !(x0.is_finite() && x1.is_finite() && x1 > x0) {
            return bad("domain", format!("need x0 < x1, got [{x0}, {x1}]"));
        }
        if self.cells == 0 {
            return bad("cells", "must be positive".into());
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad("t_final", format!("must be >= 0, got {}", self.t_final));
        }
        if let Some(s) = self.snapshot_every {
            if !(s > 0.0 && s.is_finite()) {
                return bad("snapshot_every", format!("must be positive, got {s}"));
            }
        }
        if self.initial.is_empty() {
            return bad("initial", "at least one segment is required".into());
        }
        for (i, seg) in self.initial.iter().enumerate() {
            if !(seg.x_max > seg.x_min) {
                return bad(&format!("initial[{i}]"), "x_max must exceed x_min".into());
            }
            seg.moments(self.n)
                .map_err(|e| Error::Config(format!("initial[{i}]: {e}")))?;
        }
        for j in 0..self.cells {
            let x = self.cell_center(j);
            if !self.initial.iter().any(|s| s.x_min <= x && x < s.x_max) {
                return bad("initial", format!("no segment covers cell {j} at x = {x}"));
            }
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.domain[1] - self.domain[0]) / self.cells as f64
    }

    pub fn cell_center(&self, j: usize) -> f64 {
        self.domain[0] + (j as f64 + 0.5) * self.dx()
    }

    /// Grid at `t = 0`; each cell takes the first segment containing its center.
    pub fn initial_grid(&self) -> Result<GridState> {
        self.validate()?;
        let mut cells = Vec::with_capacity(self.cells);
        let mut x = Vec::with_capacity(self.cells);
        for j in 0..self.cells {
            let xc = self.cell_center(j);
            let seg = self
                .initial
                .iter()
                .find(|s| s.x_min <= xc && xc < s.x_max)
                .expect("validated coverage");
            cells.push(seg.moments(self.n)?);
            x.push(xc);
        }
        Ok(GridState {
            cells,
            dx: vec![self.dx(); self.cells],
            x,
            time: 0.0,
            tau: self.tau,
            boundary: self.boundary,
        })
    }
}
