//! Frame durations, per-epoch airtime mix and throughput.

use serde::Serialize;

use crate::config::CoexConfig;
use crate::error::Result;
use crate::scalar::{one_minus_pow_complement, pow_complement, Scalar};
use crate::solver::{solve_fixed_point, FixedPoint};

/// Durations of each channel outcome in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameDurations<T> {
    pub sigma: T,
    pub ts_wifi: T,
    pub ts_cell: T,
    pub tc_wifi: T,
    pub tc_cell: T,
    /// Collision between at least one AP and at least one SCBS.
    pub tc_mixed: T,
}

/// Basic-access frame accounting applied to both technologies.
///
/// A success costs header + payload, SIFS, ACK (+ PHY header), DIFS and two
/// propagation delays; a collision costs header + payload, DIFS and one
/// propagation delay. Every bit is serialized at the node's own rate. A
/// mixed collision lasts as long as the longer of the two collision frames.
pub fn frame_durations<T: Scalar>(cfg: &CoexConfig<T>) -> FrameDurations<T> {
    let us = T::lit(1e6);
    let frame = |payload: T, rate: T| {
        let data = (cfg.phy_header_bits + cfg.mac_header_bits + payload) / rate * us;
        let ack = (cfg.ack_bits + cfg.phy_header_bits) / rate * us;
        let success =
            data + cfg.sifs_us + cfg.prop_delay_us + ack + cfg.difs_us + cfg.prop_delay_us;
        let collision = data + cfg.difs_us + cfg.prop_delay_us;
        (success, collision)
    };
    let (ts_wifi, tc_wifi) = frame(cfg.payload_wifi, cfg.rate_wifi);
    let (ts_cell, tc_cell) = frame(cfg.payload_cell, cfg.rate_cell);
    FrameDurations {
        sigma: cfg.sigma_us,
        ts_wifi,
        ts_cell,
        tc_wifi,
        tc_cell,
        tc_mixed: tc_wifi.max(tc_cell),
    }
}

/// `(P_tr, P_s)` for `n` nodes attempting with probability `tau`: at least
/// one transmission, and exactly one given at least one. `P_s` is defined as
/// 0 when nobody transmits.
pub fn ptr_ps<T: Scalar>(tau: T, n: usize) -> (T, T) {
    let p_tr = one_minus_pow_complement(tau, n);
    if p_tr == T::zero() {
        return (T::zero(), T::zero());
    }
    let p_s = T::count(n) * tau * pow_complement(tau, n - 1) / p_tr;
    (p_tr, p_s.min(T::one()))
}

/// Probability of each epoch outcome.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AirtimeShares<T> {
    pub idle: T,
    pub wifi_success: T,
    pub cell_success: T,
    pub wifi_collision: T,
    pub cell_collision: T,
    pub mixed_collision: T,
}

impl<T: Scalar> AirtimeShares<T> {
    pub fn from_attempts(tau_wifi: T, n_wifi: usize, tau_cell: T, n_cell: usize) -> Self {
        let one = T::one();
        let (tr_w, s_w) = ptr_ps(tau_wifi, n_wifi);
        let (tr_c, s_c) = ptr_ps(tau_cell, n_cell);
        AirtimeShares {
            idle: (one - tr_w) * (one - tr_c),
            wifi_success: tr_w * s_w * (one - tr_c),
            cell_success: (one - tr_w) * tr_c * s_c,
            wifi_collision: tr_w * (one - s_w) * (one - tr_c),
            cell_collision: (one - tr_w) * tr_c * (one - s_c),
            mixed_collision: tr_w * tr_c,
        }
    }

    pub fn as_array(&self) -> [T; 6] {
        [
            self.idle,
            self.wifi_success,
            self.cell_success,
            self.wifi_collision,
            self.cell_collision,
            self.mixed_collision,
        ]
    }

    pub fn total(&self) -> T {
        self.as_array().iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Expected epoch length under these shares.
    pub fn mean_duration(&self, d: &FrameDurations<T>) -> T {
        self.idle * d.sigma
            + self.wifi_success * d.ts_wifi
            + self.cell_success * d.ts_cell
            + self.wifi_collision * d.tc_wifi
            + self.cell_collision * d.tc_cell
            + self.mixed_collision * d.tc_mixed
    }
}

/// `(T_state, shares)`: the expected time per chain state, in microseconds.
pub fn expected_slot_time<T: Scalar>(
    fp: &FixedPoint<T>,
    durations: &FrameDurations<T>,
    cfg: &CoexConfig<T>,
) -> (T, AirtimeShares<T>) {
    let shares =
        AirtimeShares::from_attempts(fp.tau_wifi.get(), cfg.n_wifi, fp.tau_cell.get(), cfg.n_cell);
    (shares.mean_duration(durations), shares)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThroughputReport<T> {
    /// Per-AP throughput, bits/s.
    pub s_wifi: T,
    /// Per-SCBS throughput, bits/s.
    pub s_cell: T,
    /// `n_W * s_wifi + n_C * s_cell`, bits/s.
    pub s_total: T,
    /// Mean epoch length, microseconds.
    pub t_state_us: T,
    pub shares: AirtimeShares<T>,
}

/// Per-node throughputs. The network-wide success share of a technology is
/// split evenly over its nodes.
pub fn throughputs<T: Scalar>(
    fp: &FixedPoint<T>,
    durations: &FrameDurations<T>,
    cfg: &CoexConfig<T>,
) -> ThroughputReport<T> {
    let (t_state, shares) = expected_slot_time(fp, durations, cfg);
    let per_second = T::lit(1e6) / t_state;
    let per_node = |share: T, payload: T, n: usize| {
        if n == 0 {
            T::zero()
        } else {
            share * payload * per_second / T::count(n)
        }
    };
    let s_wifi = per_node(shares.wifi_success, cfg.payload_wifi, cfg.n_wifi);
    let s_cell = per_node(shares.cell_success, cfg.payload_cell, cfg.n_cell);
    ThroughputReport {
        s_wifi,
        s_cell,
        s_total: T::count(cfg.n_wifi) * s_wifi + T::count(cfg.n_cell) * s_cell,
        t_state_us: t_state,
        shares,
    }
}

/// Solves the fixed point and evaluates the throughput report.
pub fn analyze<T: Scalar>(cfg: &CoexConfig<T>) -> Result<(FixedPoint<T>, ThroughputReport<T>)> {
    let fp = solve_fixed_point(cfg)?;
    let report = throughputs(&fp, &frame_durations(cfg), cfg);
    Ok((fp, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Probability;

    type Cfg = CoexConfig<f64>;

    fn point(tw: f64, tc: f64) -> FixedPoint<f64> {
        FixedPoint {
            tau_wifi: Probability::new(tw).unwrap(),
            tau_cell: Probability::new(tc).unwrap(),
            p_wifi: Probability::zero(),
            p_cell: Probability::zero(),
            residual_inf_norm: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    #[test]
    fn ptr_ps_examples() {
        assert_eq!(ptr_ps(0.3f64, 1), (0.3, 1.0));
        let (tr, s) = ptr_ps(0.5f64, 2);
        assert!((tr - 0.75).abs() < 1e-15 && (s - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ptr_ps(0.0f64, 4), (0.0, 0.0));
        assert_eq!(ptr_ps(0.4f64, 0), (0.0, 0.0));
    }

    #[test]
    fn default_frame_durations() {
        let d = frame_durations(&Cfg::default());
        assert!((d.ts_wifi - 176.6).abs() < 1e-9);
        assert!((d.tc_wifi - 158.1).abs() < 1e-9);
        assert_eq!(d.tc_mixed, d.tc_wifi.max(d.tc_cell));
        let fast = Cfg {
            rate_cell: 2e8,
            ..Cfg::default()
        };
        let d = frame_durations(&fast);
        assert!(d.ts_cell < d.ts_wifi);
        assert_eq!(d.tc_mixed, d.tc_wifi);
    }

    #[test]
    fn empty_channel_costs_one_slot() {
        let cfg = Cfg::default();
        let (t, shares) = expected_slot_time(&point(0.0, 0.0), &frame_durations(&cfg), &cfg);
        assert_eq!(t, 9.0);
        assert_eq!(shares.idle, 1.0);
    }

    #[test]
    fn lone_saturated_transmitter() {
        let cfg = Cfg {
            n_wifi: 1,
            n_cell: 0,
            ..Cfg::default()
        };
        let d = frame_durations(&cfg);
        let (t, _) = expected_slot_time(&point(1.0, 0.0), &d, &cfg);
        assert!((t - d.ts_wifi).abs() < 1e-12);
    }

    #[test]
    fn shares_close_and_report_is_consistent() {
        let cfg = Cfg::default().with_cw(10);
        let (fp, rep) = analyze(&cfg).unwrap();
        assert!((rep.shares.total() - 1.0).abs() < 1e-12);
        assert_eq!(rep.s_total, 2.0 * rep.s_wifi + rep.s_cell);
        let used = 2.0 * rep.s_wifi * rep.t_state_us / 1e6 / cfg.payload_wifi
            + rep.s_cell * rep.t_state_us / 1e6 / cfg.payload_cell;
        assert!(used <= 1.0);
        assert!(fp.converged);
    }

    #[test]
    fn no_traffic_no_throughput() {
        let cfg = Cfg {
            q_wifi: 0.0,
            q_cell: 0.0,
            ..Cfg::default()
        };
        let (_, rep) = analyze(&cfg).unwrap();
        assert_eq!((rep.s_wifi, rep.s_cell), (0.0, 0.0));
    }
}
