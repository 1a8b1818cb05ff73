use lbt_coex::airtime::{analyze, AirtimeShares};
use lbt_coex::cellular::cell_solve;
use lbt_coex::optimizer::{optimal_cw, sweep};
use lbt_coex::solver::{collision_probabilities, residual};
use lbt_coex::wifi::wifi_solve;
use lbt_coex::{CellChainInput, Config, WifiChainInput};
use proptest::prelude::*;

fn config() -> impl Strategy<Value = Config> {
    (
        (1usize..5, 0usize..4, 0.0..=1.0f64, 0.0..=1.0f64),
        (2usize..40, 0usize..6, 2usize..70),
        (
            1e6..1e9f64,
            1e6..1e9f64,
            100.0..20000.0f64,
            100.0..20000.0f64,
        ),
        (0.1..30.0f64, 0.0..50.0f64, 0.0..60.0f64, 0.0..2.0f64),
    )
        .prop_map(
            |((nw, nc, qw, qc), (w0, m, z), (rw, rc, dw, dc), (sigma, sifs, difs, prop))| Config {
                n_wifi: nw,
                n_cell: nc,
                q_wifi: qw,
                q_cell: qc,
                w0,
                max_stage: m,
                cw_cell: z,
                rate_wifi: rw,
                rate_cell: rc,
                payload_wifi: dw,
                payload_cell: dc,
                sigma_us: sigma,
                sifs_us: sifs,
                difs_us: difs,
                prop_delay_us: prop,
                ..Config::default()
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trips(cfg in config()) {
        let text = cfg.to_config_string();
        prop_assert_eq!(Config::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn chain_outputs_are_probabilities(q in 0.0..=1.0f64, p in 0.0..0.99f64, w0 in 2usize..64, m in 0usize..6, z in 2usize..64) {
        let w = wifi_solve(&WifiChainInput::new(q, p, 1.0 - p, w0, m).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&w.tau.get()));
        prop_assert!((0.0..=1.0).contains(&w.b00e.get()));
        prop_assert_eq!(w.tau.get() == 0.0, q == 0.0);
        let c = cell_solve(&CellChainInput::new(q, p, 1.0 - p, z).unwrap()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.tau.get()));
        prop_assert!((0.0..=1.0).contains(&c.b0e.get()) && (0.0..=1.0).contains(&c.b0.get()));
        prop_assert_eq!(c.tau.get() == 0.0, q == 0.0);
    }

    #[test]
    fn solved_point_is_self_consistent(cfg in config()) {
        let (fp, rep) = analyze(&cfg).unwrap();
        prop_assume!(fp.converged);
        let r = residual(fp.taus(), &cfg).unwrap();
        prop_assert!(r[0].abs().max(r[1].abs()) < 1e-10);
        let (pw, pc) = collision_probabilities(fp.tau_wifi.get(), fp.tau_cell.get(), cfg.n_wifi, cfg.n_cell);
        prop_assert!((pw - fp.p_wifi.get()).abs() < 1e-12 && (pc - fp.p_cell.get()).abs() < 1e-12);
        prop_assert!((rep.shares.total() - 1.0).abs() < 1e-12);
        prop_assert!(rep.s_wifi >= 0.0 && rep.s_cell >= 0.0);
        if cfg.n_cell == 0 || cfg.q_cell == 0.0 {
            prop_assert_eq!(rep.s_cell, 0.0);
        }
    }

    #[test]
    fn shares_partition_the_epoch(tw in 0.0..=1.0f64, nw in 0usize..6, tc in 0.0..=1.0f64, nc in 0usize..6) {
        let s = AirtimeShares::from_attempts(tw, nw, tc, nc);
        prop_assert!((s.total() - 1.0).abs() < 1e-12);
        prop_assert!(s.as_array().iter().all(|&x| x >= -1e-15));
    }
}

#[test]
fn throughput_rises_with_traffic() {
    let mut last = 0.0;
    for i in 1..=10 {
        let cfg = Config {
            q_cell: i as f64 / 10.0,
            ..Config::default()
        };
        let (_, rep) = analyze(&cfg).unwrap();
        assert!(rep.s_cell >= last);
        last = rep.s_cell;
    }
}

#[test]
fn larger_window_protects_wifi() {
    let mut last_w = 0.0;
    let mut last_c = f64::INFINITY;
    for z in [2, 4, 8, 16, 32, 64] {
        let (_, rep) = analyze(&Config::default().with_cw(z)).unwrap();
        assert!(rep.s_wifi > last_w && rep.s_cell < last_c);
        last_w = rep.s_wifi;
        last_c = rep.s_cell;
    }
}

#[test]
fn optimizer_is_deterministic() {
    let cfg = Config {
        rate_cell: 2e8,
        ..Config::default()
    };
    let a = optimal_cw(&cfg, 2, 64).unwrap();
    let b = optimal_cw(&cfg, 2, 64).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.trace.iter().zip(&b.trace) {
        assert_eq!(x.s_total.to_bits(), y.s_total.to_bits());
    }
}

#[test]
fn faster_cellular_radio_needs_no_larger_window() {
    let q = [0.2, 0.5, 0.8];
    let slow = sweep(&q, &q, &Config::default(), (2, 64), 16).unwrap();
    let fast = sweep(
        &q,
        &q,
        &Config {
            rate_cell: 2e8,
            ..Config::default()
        },
        (2, 64),
        16,
    )
    .unwrap();
    for (s, f) in slow.cells.iter().zip(&fast.cells) {
        if let (Some(zs), Some(zf)) = (s.result.z_star, f.result.z_star) {
            assert!(zf <= zs);
        }
    }
    assert!(fast.feasible_cells() >= slow.feasible_cells());
}

#[test]
fn f32_pipeline_tracks_f64() {
    let cfg64 = Config::default().with_cw(10);
    let cfg32 = lbt_coex::config::CoexConfig::<f32>::parse(&cfg64.to_config_string()).unwrap();
    let (_, r64) = analyze(&cfg64).unwrap();
    // the default tolerance is below f32 resolution, so only closeness is checked
    let (_, r32) = analyze(&cfg32).unwrap();
    assert!(((r32.s_wifi as f64) / r64.s_wifi - 1.0).abs() < 1e-3);
    assert!(((r32.s_cell as f64) / r64.s_cell - 1.0).abs() < 1e-3);
}
