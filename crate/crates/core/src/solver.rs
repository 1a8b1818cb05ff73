//! Coupled fixed point between the Wi-Fi and cellular chains.
//!
//! Each chain maps the collision probability it sees to an attempt
//! probability; collision probabilities in turn follow from every other
//! node's attempt probability. The solver iterates the composed map
//! `F(tau_W, tau_C)` with damping until `|tau - F(tau)|_inf` is small.

use serde::Serialize;

use crate::cellular::{cell_tau, CellChainInput};
use crate::config::{CoexConfig, Probability};
use crate::error::Result;
use crate::scalar::{pow_complement, Scalar};
use crate::wifi::{wifi_tau, WifiChainInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint<T> {
    pub tau_wifi: Probability<T>,
    pub tau_cell: Probability<T>,
    pub p_wifi: Probability<T>,
    pub p_cell: Probability<T>,
    /// `|tau - F(tau)|_inf` at the reported point.
    pub residual_inf_norm: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Scalar> FixedPoint<T> {
    /// Channel idle probability seen by a silent Wi-Fi AP (`1 - p_W`).
    pub fn p_idle_wifi(&self) -> T {
        T::one() - self.p_wifi.get()
    }

    /// Channel idle probability seen by a silent SCBS (`1 - p_C`).
    pub fn p_idle_cell(&self) -> T {
        T::one() - self.p_cell.get()
    }

    pub fn taus(&self) -> [T; 2] {
        [self.tau_wifi.get(), self.tau_cell.get()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub damping: T,
    /// Damping used when the first pass stalls or runs out of budget.
    pub fallback_damping: T,
    pub start: [T; 2],
    /// Convergence threshold on `|tau - F(tau)|_inf`.
    pub tolerance: T,
    pub max_iterations: usize,
    /// A pass whose best residual has not improved for this many iterations
    /// counts as stalled.
    pub stall_window: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            damping: T::lit(0.5),
            fallback_damping: T::lit(0.1),
            start: [T::lit(0.01), T::lit(0.01)],
            tolerance: T::lit(1e-12),
            max_iterations: 100_000,
            stall_window: 5_000,
        }
    }
}

/// Collision probabilities `(p_W, p_C)` implied by the attempt probabilities.
///
/// With no node of one technology the returned value is what a single node of
/// that technology would see, so it stays meaningful for baselines.
pub fn collision_probabilities<T: Scalar>(
    tau_wifi: T,
    tau_cell: T,
    n_wifi: usize,
    n_cell: usize,
) -> (T, T) {
    let one = T::one();
    let p_w =
        one - pow_complement(tau_wifi, n_wifi.saturating_sub(1)) * pow_complement(tau_cell, n_cell);
    let p_c =
        one - pow_complement(tau_wifi, n_wifi) * pow_complement(tau_cell, n_cell.saturating_sub(1));
    (p_w.max(T::zero()), p_c.max(T::zero()))
}

/// The composed map `F`: attempt probabilities produced by both chains when
/// the channel is loaded by `candidate`.
pub fn attempt_map<T: Scalar>(candidate: [T; 2], cfg: &CoexConfig<T>) -> Result<[T; 2]> {
    let [tw, tc] = candidate;
    let (p_w, p_c) = collision_probabilities(tw, tc, cfg.n_wifi, cfg.n_cell);
    let next_w = if cfg.n_wifi == 0 {
        T::zero()
    } else {
        let input = WifiChainInput {
            q: Probability::new(cfg.q_wifi)?,
            p: Probability::saturating(p_w),
            p_idle: Probability::saturating(T::one() - p_w),
            w0: cfg.w0,
            max_stage: cfg.max_stage,
        };
        wifi_tau(&input)?.get()
    };
    let next_c = if cfg.n_cell == 0 {
        T::zero()
    } else {
        let input = CellChainInput {
            q: Probability::new(cfg.q_cell)?,
            p: Probability::saturating(p_c),
            p_idle: Probability::saturating(T::one() - p_c),
            z: cfg.cw_cell,
        };
        cell_tau(&input)?.get()
    };
    Ok([next_w, next_c])
}

/// `candidate - F(candidate)`.
pub fn residual<T: Scalar>(candidate: [T; 2], cfg: &CoexConfig<T>) -> Result<[T; 2]> {
    let f = attempt_map(candidate, cfg)?;
    Ok([candidate[0] - f[0], candidate[1] - f[1]])
}

fn inf_norm<T: Scalar>(v: [T; 2]) -> T {
    v[0].abs().max(v[1].abs())
}

struct Pass<T> {
    point: [T; 2],
    residual: T,
    iterations: usize,
}

fn damped_pass<T: Scalar>(
    cfg: &CoexConfig<T>,
    start: [T; 2],
    omega: T,
    opts: &SolverOptions<T>,
) -> Result<Pass<T>> {
    let mut tau = start;
    let mut best = Pass {
        point: tau,
        residual: T::infinity(),
        iterations: 0,
    };
    let mut last_improvement = 0;
    for it in 0..opts.max_iterations {
        let f = attempt_map(tau, cfg)?;
        let r = inf_norm([tau[0] - f[0], tau[1] - f[1]]);
        if r < best.residual {
            if r < best.residual * T::lit(0.999) {
                last_improvement = it;
            }
            best = Pass {
                point: tau,
                residual: r,
                iterations: it,
            };
        }
        if r < opts.tolerance || it - last_improvement > opts.stall_window {
            break;
        }
        let one = T::one();
        tau = [
            (one - omega) * tau[0] + omega * f[0],
            (one - omega) * tau[1] + omega * f[1],
        ];
    }
    Ok(best)
}

fn finish<T: Scalar>(cfg: &CoexConfig<T>, pass: Pass<T>, tolerance: T) -> FixedPoint<T> {
    let [tw, tc] = pass.point;
    let (p_w, p_c) = collision_probabilities(tw, tc, cfg.n_wifi, cfg.n_cell);
    FixedPoint {
        tau_wifi: Probability::saturating(tw),
        tau_cell: Probability::saturating(tc),
        p_wifi: Probability::saturating(p_w),
        p_cell: Probability::saturating(p_c),
        residual_inf_norm: pass.residual,
        iterations: pass.iterations,
        converged: pass.residual < tolerance,
    }
}

/// Solves with [`SolverOptions::default`].
pub fn solve_fixed_point<T: Scalar>(cfg: &CoexConfig<T>) -> Result<FixedPoint<T>> {
    solve_fixed_point_with(cfg, &SolverOptions::default())
}

/// Damped fixed-point iteration, restarted with the fallback damping when the
/// first pass does not converge. Non-convergence is reported through
/// [`FixedPoint::converged`] with the best iterate attached.
pub fn solve_fixed_point_with<T: Scalar>(
    cfg: &CoexConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<FixedPoint<T>> {
    cfg.check()?;
    let mut start = opts.start;
    // a silent technology maps to exactly zero, so start there
    if cfg.n_wifi == 0 || cfg.q_wifi == T::zero() {
        start[0] = T::zero();
    }
    if cfg.n_cell == 0 || cfg.q_cell == T::zero() {
        start[1] = T::zero();
    }
    let first = damped_pass(cfg, start, opts.damping, opts)?;
    if first.residual < opts.tolerance {
        return Ok(finish(cfg, first, opts.tolerance));
    }
    let second = damped_pass(cfg, start, opts.fallback_damping, opts)?;
    let spent = first.iterations;
    let best = if second.residual < first.residual {
        Pass {
            iterations: spent + second.iterations,
            ..second
        }
    } else {
        first
    };
    Ok(finish(cfg, best, opts.tolerance))
}

/// Solves from several scattered starting points and returns the distinct
/// converged roots (points closer than `separation` are merged).
pub fn distinct_roots<T: Scalar>(cfg: &CoexConfig<T>, separation: T) -> Result<Vec<FixedPoint<T>>> {
    let starts = [
        [0.01, 0.01],
        [0.3, 0.01],
        [0.01, 0.3],
        [0.2, 0.2],
        [0.6, 0.6],
    ];
    let mut roots: Vec<FixedPoint<T>> = Vec::new();
    for s in starts {
        let opts = SolverOptions {
            start: [T::lit(s[0]), T::lit(s[1])],
            ..SolverOptions::default()
        };
        let fp = solve_fixed_point_with(cfg, &opts)?;
        if !fp.converged {
            continue;
        }
        let duplicate = roots.iter().any(|r| {
            inf_norm([
                r.tau_wifi.get() - fp.tau_wifi.get(),
                r.tau_cell.get() - fp.tau_cell.get(),
            ]) <= separation
        });
        if !duplicate {
            roots.push(fp);
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Cfg = CoexConfig<f64>;

    #[test]
    fn no_traffic_is_a_fixed_point() {
        let cfg = Cfg {
            q_wifi: 0.0,
            q_cell: 0.0,
            ..Cfg::default()
        };
        assert_eq!(residual([0.0, 0.0], &cfg).unwrap(), [0.0, 0.0]);
        let fp = solve_fixed_point(&cfg).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.taus(), [0.0, 0.0]);
    }

    #[test]
    fn lone_ap_never_collides() {
        let cfg = Cfg {
            n_wifi: 1,
            n_cell: 0,
            q_wifi: 0.4,
            ..Cfg::default()
        };
        let input = WifiChainInput::new(0.4, 0.0, 1.0, 16, 3).unwrap();
        let expected = wifi_tau(&input).unwrap().get();
        let r = residual([expected, 0.7], &cfg).unwrap();
        assert!(r[0].abs() < 1e-15);
    }

    #[test]
    fn saturated_single_nodes() {
        let cfg = Cfg {
            n_wifi: 1,
            n_cell: 0,
            q_wifi: 1.0,
            ..Cfg::default()
        };
        let fp = solve_fixed_point(&cfg).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.p_wifi.get(), 0.0);
        assert!((fp.tau_wifi.get() - 2.0 / 17.0).abs() < 1e-12);

        let cfg = Cfg {
            n_wifi: 0,
            n_cell: 1,
            q_cell: 1.0,
            cw_cell: 2,
            ..Cfg::default()
        };
        let fp = solve_fixed_point(&cfg).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.p_cell.get(), 0.0);
        assert!((fp.tau_cell.get() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_point_is_self_consistent() {
        let cfg = Cfg::default().with_cw(10);
        let fp = solve_fixed_point(&cfg).unwrap();
        assert!(fp.converged, "{fp:?}");
        let r = residual(fp.taus(), &cfg).unwrap();
        assert!(inf_norm(r) < 1e-10);
        let (pw, pc) = collision_probabilities(fp.tau_wifi.get(), fp.tau_cell.get(), 2, 1);
        assert_eq!((pw, pc), (fp.p_wifi.get(), fp.p_cell.get()));
        assert!(fp.p_wifi.get() < 1.0 && fp.p_cell.get() < 1.0);
    }

    #[test]
    fn no_cellular_nodes_reduces_to_wifi_only() {
        let mixed = Cfg {
            n_cell: 0,
            n_wifi: 3,
            q_cell: 0.9,
            ..Cfg::default()
        };
        let pure = Cfg {
            q_cell: 0.0,
            ..mixed.clone()
        };
        let a = solve_fixed_point(&mixed).unwrap();
        let b = solve_fixed_point(&pure).unwrap();
        assert_eq!(a.tau_wifi, b.tau_wifi);
        assert_eq!(a.tau_cell.get(), 0.0);
    }

    #[test]
    fn single_root_on_default_scenario() {
        let roots = distinct_roots(&Cfg::default(), 1e-6).unwrap();
        assert_eq!(roots.len(), 1);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = SolverOptions {
            max_iterations: 2,
            ..SolverOptions::default()
        };
        let fp = solve_fixed_point_with(&Cfg::default(), &opts).unwrap();
        assert!(!fp.converged);
        assert!(fp.residual_inf_norm > 0.0);
    }
}
