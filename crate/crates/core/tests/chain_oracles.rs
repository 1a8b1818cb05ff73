//! Closed forms against stationary solves of chains built here from the
//! behavioral rules, independently of the library's own matrix builders.

use std::collections::HashMap;

use lbt_coex::cellular::{cell_closed_form, cell_solve, cell_transition_matrix};
use lbt_coex::markov::{stationary_distribution, stationary_residual, StochasticMatrix};
use lbt_coex::wifi::wifi_solve;
use lbt_coex::{CellChainInput, WifiChainInput};

fn q_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn p_grid() -> Vec<f64> {
    (1..=16).map(|i| i as f64 * 0.05).collect()
}

/// Sparse transition list keyed by state labels, densified at the end.
struct Builder<K> {
    index: HashMap<K, usize>,
    edges: Vec<(usize, usize, f64)>,
}

impl<K: std::hash::Hash + Eq + Copy> Builder<K> {
    fn new(states: &[K]) -> Self {
        Builder {
            index: states.iter().enumerate().map(|(i, &s)| (s, i)).collect(),
            edges: Vec::new(),
        }
    }

    fn edge(&mut self, from: K, to: K, p: f64) {
        self.edges.push((self.index[&from], self.index[&to], p));
    }

    fn solve(&self) -> (Vec<f64>, HashMap<K, usize>) {
        let n = self.index.len();
        let mut rows = vec![vec![0.0; n]; n];
        for &(f, t, p) in &self.edges {
            rows[f][t] += p;
        }
        let m = StochasticMatrix::from_rows(&rows).unwrap();
        m.check_stochastic(1e-12).unwrap();
        let pi = stationary_distribution(&m).unwrap();
        assert!(stationary_residual(&m, &pi) < 1e-12);
        (pi, self.index.clone())
    }
}

#[derive(Clone, Copy, Hash, PartialEq, Eq, Debug)]
enum W {
    Post(usize),
    Back(usize, usize),
}

/// Returns `(b00e, tau)` of the Wi-Fi chain.
fn wifi_oracle(q: f64, p: f64, pi: f64, w0: usize, m: usize) -> (f64, f64) {
    let win = |i: usize| w0 * (1 << i);
    let mut states: Vec<W> = (0..w0).map(W::Post).collect();
    for i in 0..=m {
        states.extend((0..win(i)).map(|k| W::Back(i, k)));
    }
    let mut b = Builder::new(&states);
    let spread = |b: &mut Builder<W>, from: W, mass: f64, target: &dyn Fn(usize) -> W, w: usize| {
        for k in 0..w {
            b.edge(from, target(k), mass / w as f64);
        }
    };
    for k in 1..w0 {
        b.edge(W::Post(k), W::Post(k - 1), 1.0 - q);
        b.edge(W::Post(k), W::Back(0, k - 1), q);
    }
    let retry = m.min(1);
    b.edge(W::Post(0), W::Post(0), 1.0 - q);
    spread(&mut b, W::Post(0), q * pi * (1.0 - p), &W::Post, w0);
    spread(&mut b, W::Post(0), q * (1.0 - pi), &|k| W::Back(0, k), w0);
    spread(
        &mut b,
        W::Post(0),
        q * pi * p,
        &|k| W::Back(retry, k),
        win(retry),
    );
    for i in 0..=m {
        for k in 1..win(i) {
            b.edge(W::Back(i, k), W::Back(i, k - 1), 1.0);
        }
        let next = (i + 1).min(m);
        spread(&mut b, W::Back(i, 0), (1.0 - p) * (1.0 - q), &W::Post, w0);
        spread(&mut b, W::Back(i, 0), (1.0 - p) * q, &|k| W::Back(0, k), w0);
        spread(&mut b, W::Back(i, 0), p, &|k| W::Back(next, k), win(next));
    }
    let (v, idx) = b.solve();
    let b00e = v[idx[&W::Post(0)]];
    let heads: f64 = (0..=m).map(|i| v[idx[&W::Back(i, 0)]]).sum();
    (b00e, q * pi * b00e + heads)
}

#[derive(Clone, Copy, Hash, PartialEq, Eq, Debug)]
enum C {
    Post(usize),
    Back(usize),
}

/// Returns `(b0e, b0, tau, backoff mass)` of the cellular chain.
fn cell_oracle(q: f64, p: f64, pi: f64, z: usize) -> (f64, f64, f64, f64) {
    let mut states: Vec<C> = (0..z).map(C::Post).collect();
    states.extend((0..z).map(C::Back));
    let mut b = Builder::new(&states);
    let u = 1.0 / z as f64;
    for k in 1..z {
        // idle: count down, packet presence picks the stage
        b.edge(C::Post(k), C::Post(k - 1), (1.0 - q) * pi);
        b.edge(C::Post(k), C::Back(k - 1), q * pi);
        // busy: restart with a fresh counter
        for l in 0..z {
            b.edge(C::Post(k), C::Post(l), (1.0 - q) * (1.0 - pi) * u);
            b.edge(C::Post(k), C::Back(l), q * (1.0 - pi) * u);
        }
        b.edge(C::Back(k), C::Back(k - 1), 1.0 - p);
        for l in 0..z {
            b.edge(C::Back(k), C::Back(l), p * u);
        }
    }
    b.edge(C::Post(0), C::Post(0), 1.0 - q);
    for l in 0..z {
        b.edge(C::Post(0), C::Post(l), q * pi * (1.0 - p) * u);
        b.edge(C::Post(0), C::Back(l), q * pi * p * u + q * (1.0 - pi) * u);
        b.edge(C::Back(0), C::Back(l), p * u + (1.0 - p) * q * u);
        b.edge(C::Back(0), C::Post(l), (1.0 - p) * (1.0 - q) * u);
    }
    let (v, idx) = b.solve();
    let b0e = v[idx[&C::Post(0)]];
    let b0 = v[idx[&C::Back(0)]];
    let backoff: f64 = (0..z).map(|k| v[idx[&C::Back(k)]]).sum();
    (b0e, b0, b0 + q * pi * b0e, backoff)
}

#[test]
fn cellular_closed_form_matches_oracle_on_grid() {
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for q in q_grid() {
        for p in p_grid() {
            for z in [2, 4, 8, 16, 32] {
                let pi = 1.0 - p;
                let (b0e, b0, tau, _) = cell_oracle(q, p, pi, z);
                let sol = cell_solve(&CellChainInput::new(q, p, pi, z).unwrap()).unwrap();
                for (got, want) in [
                    (sol.b0e.get(), b0e),
                    (sol.b0.get(), b0),
                    (sol.tau.get(), tau),
                ] {
                    let err = (got - want).abs();
                    worst = worst.max(err);
                    assert!(err < 1e-9, "q={q} p={p} Z={z}: {got} vs {want}");
                }
                points += 1;
            }
        }
    }
    assert_eq!(points, 720);
    assert!(worst < 1e-9);
}

#[test]
fn wifi_closed_form_matches_oracle_on_grid() {
    for w0 in [4, 16, 32] {
        for m in [0, 1, 3] {
            for q in q_grid() {
                for p in p_grid() {
                    let pi = 1.0 - p;
                    let (b00e, tau) = wifi_oracle(q, p, pi, w0, m);
                    let sol = wifi_solve(&WifiChainInput::new(q, p, pi, w0, m).unwrap()).unwrap();
                    assert!(
                        (sol.b00e.get() - b00e).abs() < 1e-10,
                        "b00e q={q} p={p} W0={w0} m={m}"
                    );
                    assert!(
                        (sol.tau.get() - tau).abs() < 1e-10,
                        "tau q={q} p={p} W0={w0} m={m}"
                    );
                }
            }
        }
    }
}

#[test]
fn idle_probability_decoupled_from_collisions() {
    // the chains accept any P_idle, not only 1 - p
    for &(q, p, pi, z) in &[
        (0.5, 0.3, 0.7, 8),
        (0.9, 0.1, 0.9, 16),
        (0.2, 0.05, 0.95, 4),
        (0.4, 0.3, 0.5, 6),
    ] {
        let (b0e, b0, tau, backoff) = cell_oracle(q, p, pi, z);
        let input = CellChainInput::new(q, p, pi, z).unwrap();
        let sol = cell_solve(&input).unwrap();
        assert!((sol.b0e.get() - b0e).abs() < 1e-9);
        assert!((sol.b0.get() - b0).abs() < 1e-9);
        assert!((sol.tau.get() - tau).abs() < 1e-9);
        let terms = cell_closed_form(&input).unwrap();
        assert!((terms.gamma * terms.b0e() - b0).abs() < 1e-9);
        assert!((terms.backoff_mass(b0e, b0) - backoff).abs() < 1e-9);
        let total = terms.post_backoff_mass(b0e, b0) + terms.backoff_mass(b0e, b0);
        assert!((total - 1.0).abs() < 1e-9);
    }
    let (b00e, tau) = wifi_oracle(0.5, 0.2, 0.6, 16, 3);
    let sol = wifi_solve(&WifiChainInput::new(0.5, 0.2, 0.6, 16, 3).unwrap()).unwrap();
    assert!((sol.b00e.get() - b00e).abs() < 1e-10);
    assert!((sol.tau.get() - tau).abs() < 1e-10);
}

#[test]
fn library_cell_matrix_agrees_with_independent_build() {
    let input = CellChainInput::new(0.5, 0.3, 0.7, 3).unwrap();
    let m = cell_transition_matrix(&input).unwrap();
    m.check_stochastic(1e-12).unwrap();
    // row of (2): p/Z to every backoff state plus 1 - p to (1)
    let row = m.row(input.backoff(2));
    for k in 0..3 {
        let want = 0.3 / 3.0 + if k == 1 { 0.7 } else { 0.0 };
        assert!((row[input.backoff(k)] - want).abs() < 1e-15);
    }
    let pi = stationary_distribution(&m).unwrap();
    let (b0e, b0, _, _) = cell_oracle(0.5, 0.3, 0.7, 3);
    assert!((pi[input.post_backoff(0)] - b0e).abs() < 1e-12);
    assert!((pi[input.backoff(0)] - b0).abs() < 1e-12);
}

#[test]
fn saturated_cellular_matches_backoff_only_chain() {
    // with q = 1 only the Z backoff states carry mass
    for &(p, z) in &[(0.0, 2), (0.1, 4), (0.3, 8), (0.6, 16)] {
        let mut b = Builder::new(&(0..z).collect::<Vec<_>>());
        let u = 1.0 / z as f64;
        for k in 1..z {
            b.edge(k, k - 1, 1.0 - p);
            for l in 0..z {
                b.edge(k, l, p * u);
            }
        }
        for l in 0..z {
            b.edge(0, l, u);
        }
        let (v, idx) = b.solve();
        let tau = cell_solve(&CellChainInput::new(1.0, p, 1.0 - p, z).unwrap())
            .unwrap()
            .tau
            .get();
        assert!((tau - v[idx[&0]]).abs() < 1e-10, "p={p} Z={z}");
    }
}

#[test]
fn monotone_on_grid() {
    for p in p_grid() {
        let mut last_w = 0.0;
        for q in q_grid() {
            let t = wifi_solve(&WifiChainInput::new(q, p, 1.0 - p, 16, 3).unwrap())
                .unwrap()
                .tau
                .get();
            assert!(t >= last_w - 1e-15 && t <= 1.0);
            last_w = t;
        }
        for z in [2, 4, 8, 16, 32] {
            let mut last = 0.0;
            for q in q_grid() {
                let t = cell_solve(&CellChainInput::new(q, p, 1.0 - p, z).unwrap())
                    .unwrap()
                    .tau
                    .get();
                assert!(t >= last - 1e-15);
                last = t;
            }
        }
        for q in q_grid() {
            let mut last = 1.0;
            for z in [2, 4, 8, 16, 32] {
                let t = cell_solve(&CellChainInput::new(q, p, 1.0 - p, z).unwrap())
                    .unwrap()
                    .tau
                    .get();
                assert!(t <= last + 1e-15, "q={q} p={p} Z={z}");
                last = t;
            }
        }
    }
}

#[test]
fn library_wifi_matrix_agrees_with_independent_build() {
    use lbt_coex::wifi::wifi_transition_matrix;
    for &(q, p, pi, w0, m) in &[
        (0.5, 0.2, 0.8, 4, 2),
        (0.9, 0.4, 0.5, 8, 0),
        (0.1, 0.05, 0.95, 4, 3),
    ] {
        let (mat, states) =
            wifi_transition_matrix(&WifiChainInput::new(q, p, pi, w0, m).unwrap()).unwrap();
        let v = stationary_distribution(&mat).unwrap();
        let (b00e, tau) = wifi_oracle(q, p, pi, w0, m);
        assert!((v[states.post_backoff(0)] - b00e).abs() < 1e-12);
        let heads: f64 = (0..=m).map(|i| v[states.backoff(i, 0)]).sum();
        assert!((q * pi * v[states.post_backoff(0)] + heads - tau).abs() < 1e-12);
    }
}
