//! Graceful-coexistence check and the cellular contention-window search.
//!
//! A window `Z` is admissible when both the per-AP and the per-SCBS
//! throughput beat the per-AP throughput of a Wi-Fi-only network with the
//! same total node count. Among admissible windows the one with the highest
//! total throughput wins, ties going to the smaller window.

use rayon::prelude::*;
use serde::Serialize;

use crate::airtime::{frame_durations, throughputs};
use crate::config::CoexConfig;
use crate::error::{CoexError, Result};
use crate::scalar::Scalar;
use crate::solver::solve_fixed_point;

/// Reference window for the improvement metric.
pub const DEFAULT_REFERENCE_CW: usize = 16;
pub const DEFAULT_Z_RANGE: (usize, usize) = (2, 64);

/// Per-AP throughput of `n` Wi-Fi APs alone at traffic `q_wifi`.
pub fn wifi_only_baseline<T: Scalar>(q_wifi: T, n: usize, cfg: &CoexConfig<T>) -> Result<T> {
    if n == 0 {
        return Err(CoexError::invalid("n_W", "baseline needs at least one AP"));
    }
    let only = CoexConfig {
        n_wifi: n,
        n_cell: 0,
        q_wifi,
        ..cfg.clone()
    };
    let fp = solve_fixed_point(&only)?;
    if !fp.converged {
        return Err(CoexError::NoConvergence {
            quantity: "Wi-Fi-only baseline",
            residual: fp.residual_inf_norm.as_f64(),
        });
    }
    Ok(throughputs(&fp, &frame_durations(&only), &only).s_wifi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTrace<T> {
    pub z: usize,
    pub s_co_wifi: T,
    pub s_co_cell: T,
    pub s_only_wifi: T,
    pub constraint_met: bool,
    pub s_total: T,
    pub converged: bool,
    /// `|tau - F(tau)|_inf` of the coexistence fixed point.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalCwResult<T> {
    pub z_star: Option<usize>,
    pub feasible: bool,
    pub trace: Vec<ZTrace<T>>,
    /// `S_only^W`, bits/s.
    pub baseline: T,
}

impl<T: Scalar> OptimalCwResult<T> {
    pub fn best(&self) -> Option<&ZTrace<T>> {
        let z = self.z_star?;
        self.trace.iter().find(|t| t.z == z)
    }

    pub fn at(&self, z: usize) -> Option<&ZTrace<T>> {
        self.trace.iter().find(|t| t.z == z)
    }
}

fn evaluate_z<T: Scalar>(cfg: &CoexConfig<T>, z: usize, baseline: T) -> Result<ZTrace<T>> {
    let cfg = cfg.with_cw(z);
    let fp = solve_fixed_point(&cfg)?;
    let rep = throughputs(&fp, &frame_durations(&cfg), &cfg);
    Ok(ZTrace {
        z,
        s_co_wifi: rep.s_wifi,
        s_co_cell: rep.s_cell,
        s_only_wifi: baseline,
        constraint_met: fp.converged && rep.s_wifi.min(rep.s_cell) > baseline,
        s_total: rep.s_total,
        converged: fp.converged,
        residual: fp.residual_inf_norm,
    })
}

/// Linear search over `Z` in `[z_min, z_max]`.
///
/// Windows whose fixed point does not converge are recorded as infeasible.
pub fn optimal_cw<T: Scalar>(
    cfg: &CoexConfig<T>,
    z_min: usize,
    z_max: usize,
) -> Result<OptimalCwResult<T>> {
    if z_min < 2 || z_min > z_max {
        return Err(CoexError::invalid(
            "Z",
            format!("search range [{z_min}, {z_max}] must satisfy 2 <= z_min <= z_max"),
        ));
    }
    cfg.check()?;
    let baseline = wifi_only_baseline(cfg.q_wifi, cfg.n_wifi + cfg.n_cell, cfg)?;
    let trace = (z_min..=z_max)
        .into_par_iter()
        .map(|z| evaluate_z(cfg, z, baseline))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<&ZTrace<T>> = None;
    for t in trace.iter().filter(|t| t.constraint_met) {
        // strict comparison keeps the smallest window on ties
        if best.is_none_or(|b| t.s_total > b.s_total) {
            best = Some(t);
        }
    }
    let z_star = best.map(|b| b.z);
    Ok(OptimalCwResult {
        z_star,
        feasible: z_star.is_some(),
        trace,
        baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell<T> {
    pub q_wifi: T,
    pub q_cell: T,
    pub result: OptimalCwResult<T>,
    /// `S_total` at the reference window.
    pub s_total_reference: T,
    /// `S_total(Z*) / S_total(Z_ref) - 1`; only defined on feasible cells.
    pub improvement: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid<T> {
    pub q_wifi_values: Vec<T>,
    pub q_cell_values: Vec<T>,
    pub reference_cw: usize,
    /// Row-major: `q_wifi` outer, `q_cell` inner.
    pub cells: Vec<SweepCell<T>>,
}

impl<T: Scalar> SweepGrid<T> {
    pub fn cell(&self, i_wifi: usize, i_cell: usize) -> &SweepCell<T> {
        &self.cells[i_wifi * self.q_cell_values.len() + i_cell]
    }

    /// Uniform average of the improvement over feasible cells.
    pub fn mean_improvement(&self) -> Option<T> {
        let vals: Vec<T> = self.cells.iter().filter_map(|c| c.improvement).collect();
        if vals.is_empty() {
            return None;
        }
        let sum = vals.iter().fold(T::zero(), |a, &b| a + b);
        Some(sum / T::count(vals.len()))
    }

    pub fn feasible_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.result.feasible).count()
    }
}

/// Runs [`optimal_cw`] on every `(q_W, q_C)` cell.
pub fn sweep<T: Scalar>(
    q_wifi_values: &[T],
    q_cell_values: &[T],
    cfg: &CoexConfig<T>,
    z_range: (usize, usize),
    reference_cw: usize,
) -> Result<SweepGrid<T>> {
    if q_wifi_values.is_empty() || q_cell_values.is_empty() {
        return Err(CoexError::invalid(
            "grid",
            "both traffic grids must be non-empty",
        ));
    }
    let keys: Vec<(T, T)> = q_wifi_values
        .iter()
        .flat_map(|&qw| q_cell_values.iter().map(move |&qc| (qw, qc)))
        .collect();
    let cells = keys
        .into_par_iter()
        .map(|(qw, qc)| {
            let cell_cfg = CoexConfig {
                q_wifi: qw,
                q_cell: qc,
                ..cfg.clone()
            };
            let result = optimal_cw(&cell_cfg, z_range.0, z_range.1)?;
            let s_total_reference = match result.at(reference_cw) {
                Some(t) => t.s_total,
                None => evaluate_z(&cell_cfg, reference_cw, result.baseline)?.s_total,
            };
            let improvement = result
                .best()
                .map(|b| b.s_total / s_total_reference - T::one());
            Ok(SweepCell {
                q_wifi: qw,
                q_cell: qc,
                result,
                s_total_reference,
                improvement,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepGrid {
        q_wifi_values: q_wifi_values.to_vec(),
        q_cell_values: q_cell_values.to_vec(),
        reference_cw,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    type Cfg = CoexConfig<f64>;

    #[test]
    fn baseline_examples() {
        let cfg = Cfg::default();
        assert_eq!(wifi_only_baseline(0.0, 1, &cfg).unwrap(), 0.0);
        let crowded = wifi_only_baseline(1.0, 3, &cfg).unwrap();
        let alone = wifi_only_baseline(1.0, 1, &cfg).unwrap();
        assert!(crowded < alone);
        assert!(wifi_only_baseline(0.5, 0, &cfg).is_err());
    }

    #[test]
    fn rejects_bad_range() {
        assert!(optimal_cw(&Cfg::default(), 10, 9).is_err());
        assert!(optimal_cw(&Cfg::default(), 1, 9).is_err());
    }

    #[test]
    fn idle_cellular_is_never_graceful() {
        let cfg = Cfg {
            q_cell: 0.0,
            ..Cfg::default()
        };
        let r = optimal_cw(&cfg, 2, 20).unwrap();
        assert!(!r.feasible);
        assert!(r.z_star.is_none());
        assert_eq!(r.trace.len(), 19);
    }

    #[test]
    fn reported_window_dominates_trace() {
        // a faster cellular radio leaves room for graceful operation
        let cfg = Cfg {
            rate_cell: 2e8,
            ..Cfg::default()
        };
        let r = optimal_cw(&cfg, 2, 64).unwrap();
        if let Some(best) = r.best() {
            assert!(best.constraint_met);
            for t in r.trace.iter().filter(|t| t.constraint_met) {
                assert!(t.s_total <= best.s_total);
                if t.s_total == best.s_total {
                    assert!(t.z >= best.z);
                }
            }
        }
        let again = optimal_cw(&cfg, 2, 64).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn single_cell_sweep_matches_direct_search() {
        let cfg = Cfg::default();
        let grid = sweep(&[0.5], &[0.5], &cfg, (2, 30), 16).unwrap();
        let direct = optimal_cw(&cfg, 2, 30).unwrap();
        assert_eq!(grid.cells.len(), 1);
        assert_eq!(grid.cell(0, 0).result, direct);
        assert!(sweep::<f64>(&[], &[0.5], &cfg, (2, 30), 16).is_err());
    }
}
