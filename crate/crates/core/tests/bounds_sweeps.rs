//! Numeric sweeps of the closed-form bounds, with the formulas re-entered
//! independently here.

use std::f64::consts::E;

use matprod_core::bounds::{
    bernstein_tail, beta_k, d_k_remainder, expectation_bound, expectation_delta, gamma_k,
    k_condition, lemma_exp_bound, lemma_tail_bound, restriction_ok, theorem_bound, BoundReport,
};

const LS: [f64; 5] = [0.1, 0.3, 0.5, 1.0, 2.0];
const DS: [usize; 3] = [1, 2, 8];
const DELTAS: [f64; 3] = [0.01, 0.1, 0.5];

fn n_grid() -> Vec<usize> {
    (2..=7)
        .flat_map(|p| [10usize.pow(p), 3 * 10usize.pow(p)])
        .collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

#[test]
fn gamma_is_beta_plus_remainder() {
    for l in LS {
        for n in n_grid() {
            for d in DS {
                for delta in DELTAS {
                    for k in 1..=20 {
                        let g = gamma_k(l, n, k, d, delta);
                        let parts = beta_k(l, n, k, d, delta) + d_k_remainder(l, n, k);
                        assert!(rel_close(g, parts, 1e-12), "L={l} n={n} k={k}");
                        assert!(beta_k(l, n, k, d, delta) > 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn gamma_halves_past_threshold() {
    for l in LS {
        let start = 2f64.max(2.0 * E * l).ceil() as usize;
        for n in n_grid() {
            for d in DS {
                for delta in DELTAS {
                    for k in start..40 {
                        let ratio = gamma_k(l, n, k + 1, d, delta) / gamma_k(l, n, k, d, delta);
                        assert!(ratio <= 0.5, "L={l} n={n} d={d} δ={delta} k={k}: {ratio}");
                    }
                }
            }
        }
    }
}

#[test]
fn remainder_dominated_where_k_admissible() {
    for l in LS {
        for n in n_grid() {
            for d in DS {
                for delta in DELTAS {
                    for k in (1..200).take_while(|&k| k_condition(k, n, d, delta)) {
                        assert!(d_k_remainder(l, n, k) <= gamma_k(l, n, k, d, delta));
                    }
                }
            }
        }
    }
}

/// `(2Le^L log n/√n)(2√(log(2d/δ) + (log n)²) + log n/√n)`, entered term by term.
fn main_term(l: f64, n: f64, d: f64, delta: f64) -> f64 {
    let log_n = n.ln();
    let sqrt_n = n.sqrt();
    let prefactor = 2.0 * l * l.exp() * log_n / sqrt_n;
    let radical = (2.0 * d / delta).ln() + log_n.powi(2);
    prefactor * (2.0 * radical.sqrt() + log_n / sqrt_n)
}

#[test]
fn theorem_double_entry() {
    let (l, n, d, delta) = (0.5, 1_000_000usize, 2usize, 0.1);
    let want = main_term(l, n as f64, d as f64, delta) + l * l * l.exp() / (2.0 * n as f64);
    let got = theorem_bound(l, n, d, delta).unwrap();
    assert!(rel_close(got, want, 1e-12), "{got} vs {want}");
}

#[test]
fn theorem_monotone_with_polylog_rate() {
    // Each L keeps ⌈Le²⌉ <= log(10³) + 1, so the whole grid is admissible.
    for l in [0.1, 0.5, 0.9] {
        for d in DS {
            for delta in DELTAS {
                let ns: Vec<usize> = (0..=40)
                    .map(|i| (1e3 * 10f64.powf(i as f64 / 10.0)).round() as usize)
                    .collect();
                let values: Vec<f64> = ns
                    .iter()
                    .map(|&n| theorem_bound(l, n, d, delta).unwrap())
                    .collect();
                assert!(
                    values.windows(2).all(|w| w[1] < w[0]),
                    "L={l} d={d} δ={delta}"
                );
                let scaled: Vec<f64> = ns
                    .iter()
                    .zip(&values)
                    .map(|(&n, v)| v * (n as f64).sqrt() / (n as f64).ln().powi(2))
                    .collect();
                let hi = scaled.iter().cloned().fold(f64::MIN, f64::max);
                let lo = scaled.iter().cloned().fold(f64::MAX, f64::min);
                assert!(hi / lo <= 10.0, "spread {}", hi / lo);
            }
        }
    }
}

#[test]
fn aggregation_chain_on_admissible_grid() {
    let mut checked = 0;
    for l in LS {
        for n in n_grid() {
            for d in DS {
                for delta in DELTAS {
                    if !restriction_ok(l, n, d, delta).unwrap() {
                        continue;
                    }
                    let depth = (n as f64).ln().ceil() as usize;
                    let sum: f64 = (1..=depth).map(|k| gamma_k(l, n, k, d, delta)).sum();
                    assert!(
                        sum <= main_term(l, n as f64, d as f64, delta),
                        "L={l} n={n} d={d} δ={delta}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn expectation_exceeds_theorem_at_same_delta() {
    for l in [0.1, 0.5, 1.0] {
        for n in n_grid() {
            for d in DS {
                let delta = expectation_delta(l, n);
                let Ok(e) = expectation_bound(l, n, d) else {
                    continue;
                };
                let t = theorem_bound(l, n, d, delta).unwrap();
                assert!(e > t && e.is_finite());
                assert!(((e - t) - l * l * l.exp() / (2.0 * n as f64)).abs() <= 1e-14 * e);
            }
        }
    }
}

#[test]
fn scalar_lemmas() {
    assert!(rel_close(lemma_exp_bound(1.0, 2), E / 4.0, 1e-15));
    assert!(rel_close(
        lemma_tail_bound(1.0, 100),
        2.0 * E * E / (100.0 * (E - 1.0)),
        1e-15
    ));
    assert!((lemma_tail_bound(1.0, 100) - 0.0860).abs() < 1e-4);
    for n in [1, 3, 100, 12345] {
        assert_eq!(lemma_exp_bound(1.7, 2 * n), lemma_exp_bound(1.7, n) / 2.0);
        assert!(rel_close(
            lemma_tail_bound(0.6, n),
            2.0 * lemma_tail_bound(0.3, n),
            1e-15
        ));
    }
}

#[test]
fn bernstein_monotone_in_t() {
    for (v, l) in [(1.0, 1.0), (100.0, 1.0), (0.5, 3.0)] {
        let values: Vec<f64> = (0..200)
            .map(|i| bernstein_tail(v, l, i as f64 * 0.25, 2, 3))
            .collect();
        assert_eq!(values[0], 5.0);
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn evaluators_are_bitwise_repeatable() {
    let a = BoundReport::evaluate(0.7, 5000, 3, 0.05).unwrap();
    let b = BoundReport::evaluate(0.7, 5000, 3, 0.05).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.gamma.len(), 9);
}
