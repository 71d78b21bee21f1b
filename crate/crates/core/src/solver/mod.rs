//! First-order finite-volume solver for the closed moment system with
//! kinetic upwind fluxes and semi-implicit BGK relaxation.
//!
//! One step reads
//! `(1 + dt/tau) M^{p+1}_j = M^p_j + dt/dx_j (F_{j-1/2} - F_{j+1/2}) + (dt/tau) rho Delta^p_j`,
//! where the fluxes split the reconstructed node set of each cell by sign.
//! Under `dt max|u| <= dx` every cell stays strictly realizable.

mod config;
mod snapshot;

pub use config::{RunConfig, Segment};
pub use snapshot::{near_boundary, Snapshot, SnapshotRow};

use serde::{Deserialize, Serialize};

use crate::closure::{hyqmom_next_a, spectral_decomposition_with_tol, ClosureSpec};
use crate::error::{Error, Result};
use crate::moment_algebra::{
    gaussian_moments, is_strictly_realizable, recurrence_with_diagnostics, EquilibriumState,
    MomentVector,
};
use crate::orthopoly::{gauss_rule, Quadrature};

/// Relative Hankel pivot threshold inside the solver. Cells only need
/// positive pivots; cells close to the boundary are flagged in snapshots
/// (see [`near_boundary`]) rather than rejected.
pub const PIVOT_TOL: f64 = 0.0;

/// Node set used by the kinetic flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxChoice {
    /// `n+1` Gauss nodes of the closure-augmented `(2n+2)`-moment vector.
    GaussNodes,
    /// The `2n+1` eigenvalues and reconstruction weights of the closed system.
    EigenNodes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    ZeroGradient,
}

/// Cell averages `M_0..M_2n` on a 1D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub cells: Vec<MomentVector>,
    pub dx: Vec<f64>,
    /// Cell centers, for output only.
    pub x: Vec<f64>,
    pub time: f64,
    /// `None` turns the relaxation off.
    pub tau: Option<f64>,
    pub boundary: Boundary,
}

impl GridState {
    /// `sum_j dx_j M_{k,j}` for each `k`.
    pub fn totals(&self) -> Vec<f64> {
        let len = self.cells[0].len();
        let mut out = vec![0.0; len];
        for (m, dx) in self.cells.iter().zip(&self.dx) {
            for k in 0..len {
                out[k] += dx * m.get(k);
            }
        }
        out
    }

    /// `sum_j dx_j |M_{k,j}|`, the scale for conservation errors.
    pub fn abs_totals(&self) -> Vec<f64> {
        let len = self.cells[0].len();
        let mut out = vec![0.0; len];
        for (m, dx) in self.cells.iter().zip(&self.dx) {
            for k in 0..len {
                out[k] += dx * m.get(k).abs();
            }
        }
        out
    }
}

/// Node set of one cell for the chosen flux.
pub fn reconstruct_nodes(m: &MomentVector, gamma: f64, choice: FluxChoice) -> Result<Quadrature> {
    match choice {
        FluxChoice::GaussNodes => {
            if m.len().is_multiple_of(2) || m.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "cells carry 2n+1 moments, got {}",
                    m.len()
                )));
            }
            let n = m.len() / 2;
            let (rc, _) = recurrence_with_diagnostics(m, PIVOT_TOL)?;
            let rc = rc.with_next_a(hyqmom_next_a(&rc, gamma))?;
            gauss_rule(&rc, n + 1)
        }
        FluxChoice::EigenNodes => {
            let sd = spectral_decomposition_with_tol(m, &ClosureSpec::hyqmom(gamma), PIVOT_TOL)?;
            Ok(Quadrature {
                nodes: sd.lambda,
                weights: sd.omega,
            })
        }
    }
}

/// `F_k = sum_L w max(0,u)^{k+1} + sum_R w min(0,u)^{k+1}` for `k < count`.
pub fn interface_flux(left: &Quadrature, right: &Quadrature, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    for (u, w) in left.nodes.iter().zip(&left.weights) {
        if *u > 0.0 {
            let mut p = w * u;
            for slot in out.iter_mut() {
                *slot += p;
                p *= u;
            }
        }
    }
    for (u, w) in right.nodes.iter().zip(&right.weights) {
        if *u < 0.0 {
            let mut p = w * u;
            for slot in out.iter_mut() {
                *slot += p;
                p *= u;
            }
        }
    }
    out
}

/// Single component of [`interface_flux`].
pub fn kinetic_flux(left: &Quadrature, right: &Quadrature, k: usize) -> f64 {
    interface_flux(left, right, k + 1)[k]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepInfo {
    pub dt: f64,
    pub max_speed: f64,
}

/// Largest stable step: `cfl * min_j dx_j / max_i |u_{i,j}|`, infinite for a
/// grid at rest.
pub fn cfl_time_step(nodes: &[Quadrature], dx: &[f64], cfl: f64) -> (f64, f64) {
    let mut dt = f64::INFINITY;
    let mut speed = 0.0_f64;
    for (q, h) in nodes.iter().zip(dx) {
        let s = q.max_abs_node();
        speed = speed.max(s);
        if s > 0.0 {
            dt = dt.min(cfl * h / s);
        }
    }
    (dt, speed)
}

fn reconstruct_all(g: &GridState, gamma: f64, choice: FluxChoice) -> Result<Vec<Quadrature>> {
    g.cells
        .iter()
        .enumerate()
        .map(|(j, m)| {
            reconstruct_nodes(m, gamma, choice).map_err(|e| Error::RealizabilityLoss {
                cell: j,
                time: g.time,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Advances `g` by one CFL step, shortened so as not to pass `t_stop`
/// (which is then hit exactly). Fails if any cell leaves the strictly
/// realizable set.
pub fn step(
    g: &mut GridState,
    gamma: f64,
    choice: FluxChoice,
    cfl: f64,
    t_stop: f64,
) -> Result<StepInfo> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "cfl = {cfl} must be in (0, 1]"
        )));
    }
    let cells = g.cells.len();
    let len = g.cells[0].len();
    let nodes = reconstruct_all(g, gamma, choice)?;
    let (dt_cfl, max_speed) = cfl_time_step(&nodes, &g.dx, cfl);
    let capped = t_stop - g.time <= dt_cfl;
    let dt = if capped { t_stop - g.time } else { dt_cfl };
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "no finite positive time step (dt = {dt})"
        )));
    }

    #[cfg(debug_assertions)]
    for (q, h) in nodes.iter().zip(&g.dx) {
        for u in &q.nodes {
            debug_assert!(
                1.0 - dt * u.abs() / h >= -1e-12,
                "convex update factor is negative"
            );
        }
    }

    // flux[j] sits at the left face of cell j; flux[cells] at the right end
    let ghost = |j: isize| -> &Quadrature {
        match g.boundary {
            Boundary::Periodic => &nodes[j.rem_euclid(cells as isize) as usize],
            Boundary::ZeroGradient => &nodes[j.clamp(0, cells as isize - 1) as usize],
        }
    };
    let faces: Vec<Vec<f64>> = (0..=cells as isize)
        .map(|j| interface_flux(ghost(j - 1), ghost(j), len))
        .collect();

    let relax = g.tau.map(|tau| dt / tau);
    let t_new = if capped { t_stop } else { g.time + dt };
    let mut next = Vec::with_capacity(cells);
    for j in 0..cells {
        let m = g.cells[j].values();
        let ratio = dt / g.dx[j];
        let mut out: Vec<f64> = (0..len)
            .map(|k| m[k] + ratio * (faces[j][k] - faces[j + 1][k]))
            .collect();
        if let Some(r) = relax {
            let target = equilibrium_target(&g.cells[j])?;
            for k in 0..len {
                out[k] = (out[k] + r * target[k]) / (1.0 + r);
            }
        }
        let mv = MomentVector::new(out).map_err(|e| Error::RealizabilityLoss {
            cell: j,
            time: t_new,
            reason: e.to_string(),
        })?;
        let rep = is_strictly_realizable(&mv, PIVOT_TOL)?;
        if !rep.realizable {
            return Err(Error::RealizabilityLoss {
                cell: j,
                time: t_new,
                reason: format!(
                    "Hankel pivot {} = {:e} after the update",
                    rep.failing_pivot.unwrap_or(0),
                    rep.pivots.last().copied().unwrap_or(f64::NAN)
                ),
            });
        }
        next.push(mv);
    }
    g.cells = next;
    g.time = t_new;
    Ok(StepInfo { dt, max_speed })
}

/// `rho Delta_k(U, theta)` of the cell's own `(M_0, M_1, M_2)`; the first
/// three entries are copied from the cell so they are exact.
pub fn equilibrium_target(m: &MomentVector) -> Result<Vec<f64>> {
    let st = EquilibriumState::from_moments(m)?;
    let d = gaussian_moments(m.len(), st.velocity, st.theta)?;
    Ok((0..m.len())
        .map(|k| if k < 3 { m.get(k) } else { st.rho * d[k] })
        .collect())
}

/// Snapshots at `t = 0`, every `snapshot_every`, and `t_final`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    pub dts: Vec<f64>,
}

/// Runs the configured problem to `t_final`.
pub fn run(cfg: &RunConfig) -> Result<Trajectory> {
    run_with(cfg, |_, _| {})
}

/// Like [`run`], calling `observe(state, info)` after every step.
pub fn run_with(
    cfg: &RunConfig,
    mut observe: impl FnMut(&GridState, &StepInfo),
) -> Result<Trajectory> {
    let mut g = cfg.initial_grid()?;
    let mut snapshots = vec![Snapshot::capture(&g, 0)?];
    let mut targets: Vec<f64> = Vec::new();
    if let Some(every) = cfg.snapshot_every {
        let mut i = 1u64;
        loop {
            let t = every * i as f64;
            if t >= cfg.t_final {
                break;
            }
            targets.push(t);
            i += 1;
        }
    }
    if cfg.t_final > 0.0 {
        targets.push(cfg.t_final);
    }
    let mut steps = 0;
    let mut dts = Vec::new();
    for target in targets {
        while g.time < target {
            let stop = match cfg.dt_max {
                Some(d) if g.time + d < target => g.time + d,
                _ => target,
            };
            let info = step(&mut g, cfg.gamma, cfg.flux_variant, cfg.cfl, stop)?;
            steps += 1;
            dts.push(info.dt);
            observe(&g, &info);
        }
        snapshots.push(Snapshot::capture(&g, steps)?);
    }
    Ok(Trajectory {
        snapshots,
        steps,
        dts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mv(v: &[f64]) -> MomentVector {
        MomentVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gauss_nodes_of_unit_normal_n1() {
        // augmented (1,0,1,0) has the two-point rule at -1, 1
        let q = reconstruct_nodes(&mv(&[1.0, 0.0, 1.0]), 1.0, FluxChoice::GaussNodes).unwrap();
        assert_eq!(q.len(), 2);
        assert_relative_eq!(q.nodes[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(q.nodes[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(q.weights[0], 0.5, epsilon = 1e-15);
        let e = reconstruct_nodes(&mv(&[1.0, 0.0, 1.0]), 1.0, FluxChoice::EigenNodes).unwrap();
        let s3 = 3.0_f64.sqrt();
        assert_relative_eq!(e.nodes[0], -s3, epsilon = 1e-14);
        // both rules reproduce (1, 0, 1, 0)
        for k in 0..4 {
            assert!((q.power_sum(k) - e.power_sum(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn nodes_shift_with_the_state() {
        let st = EquilibriumState::new(2.0, 0.5, 4.0).unwrap();
        for choice in [FluxChoice::GaussNodes, FluxChoice::EigenNodes] {
            let base =
                reconstruct_nodes(&EquilibriumState::standard().moments(5), 1.0, choice).unwrap();
            let q = reconstruct_nodes(&st.moments(5), 1.0, choice).unwrap();
            for (a, b) in q.nodes.iter().zip(&base.nodes) {
                assert_relative_eq!(*a, 0.5 + 2.0 * b, epsilon = 1e-12);
            }
            for k in 0..5 {
                assert_relative_eq!(q.power_sum(k), st.moments(5).get(k), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn flux_examples() {
        let left = Quadrature {
            nodes: vec![-2.0, -1.0],
            weights: vec![0.5, 0.5],
        };
        let right = Quadrature {
            nodes: vec![-0.5, 1.0],
            weights: vec![1.0, 1.0],
        };
        let f = interface_flux(&left, &right, 3);
        assert_eq!(f, vec![-0.5, 0.25, -0.125]);

        let sym = reconstruct_nodes(&mv(&[1.0, 0.0, 1.0]), 1.0, FluxChoice::GaussNodes).unwrap();
        assert!(kinetic_flux(&sym, &sym, 0).abs() < 1e-15);

        let delta = Quadrature {
            nodes: vec![0.8],
            weights: vec![1.5],
        };
        for k in 0..4 {
            assert_relative_eq!(
                kinetic_flux(&delta, &sym, k),
                1.5 * 0.8_f64.powi(k as i32 + 1) + kinetic_flux(&empty(), &sym, k)
            );
        }
        // left side moving away contributes nothing
        assert_eq!(interface_flux(&left, &empty(), 3), vec![0.0; 3]);
    }

    fn empty() -> Quadrature {
        Quadrature {
            nodes: vec![],
            weights: vec![],
        }
    }
}
