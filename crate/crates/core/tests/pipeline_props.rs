use proptest::prelude::*;
use roughvol::model::{BlockGrid, EtaScheme, PricePath, SimScenario, TradingDay, TuningSpec, VarianceModel};
use roughvol::rng::rng_stream;
use roughvol::roughtest::{build_block_grid, compute_diff_panel, run_test, test_statistic, DEFAULT_ALPHAS};
use roughvol::stats::{ks_normal, mean, std_dev};
use roughvol::{simulate, DiffPanel, SpotVolPanel};

const P_N: usize = 10;
const K_N: usize = 8;

fn tuning() -> TuningSpec {
    TuningSpec::new(0.75, EtaScheme::SameTimeOfDay { lookback_days: 2 }).unwrap()
}

/// Random walk with heteroscedastic Gaussian returns on a small grid.
fn random_path(seed: u64, n_days: usize, n_returns: usize, delta_n: f64) -> PricePath {
    let mut s = rng_stream(seed, 0, 0);
    let mut x = 0.0;
    let days = (0..n_days)
        .map(|d| {
            let mut prices = vec![x];
            for i in 0..n_returns {
                let vol = 0.1 * (1.0 + 0.5 * ((i as f64) / 7.0).sin());
                x += vol * delta_n.sqrt() * s.normal();
                prices.push(x);
            }
            TradingDay::new(format!("d{d}"), prices)
        })
        .collect();
    PricePath::new(days, delta_n, "prop").unwrap()
}

/// Same as `random_path` but rounded to multiples of 2⁻²⁰ so that shifts by
/// small integers are exact in floating point.
fn dyadic_path(seed: u64, n_days: usize, n_returns: usize, delta_n: f64) -> PricePath {
    let mut p = random_path(seed, n_days, n_returns, delta_n);
    let q = (1u64 << 20) as f64;
    for d in &mut p.days {
        for x in &mut d.log_prices {
            *x = (*x * q).round() / q;
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn statistic_invariant_to_price_shift(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let p = random_path(seed, 8, 80, 1e-4);
        let a = run_test(&p, P_N, K_N, &tuning(), &DEFAULT_ALPHAS).unwrap();
        let b = run_test(&p.shifted(shift), P_N, K_N, &tuning(), &DEFAULT_ALPHAS).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() < 1e-6, "{} vs {}", a.statistic, b.statistic);
    }

    #[test]
    fn dyadic_shift_is_exact(seed in 0u64..1000, shift in -4i32..4) {
        let p = dyadic_path(seed, 8, 80, 1e-4);
        let a = run_test(&p, P_N, K_N, &tuning(), &DEFAULT_ALPHAS).unwrap();
        let b = run_test(&p.shifted(shift as f64), P_N, K_N, &tuning(), &DEFAULT_ALPHAS).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unused_returns_do_not_matter(seed in 0u64..1000, day in 0usize..8, block in 0usize..8, off in 0usize..2, bump in -1.0f64..1.0) {
        // the first gap return after each block is unused (the last one is the
        // next block's bipower predecessor), as is the tail of the day
        let p = random_path(seed, 8, 85, 1e-4);
        let mut q = p.clone();
        let idx = if block == 7 { 80 + off } else { block * P_N + K_N };
        for x in &mut q.days[day].log_prices[idx + 1..] {
            *x += bump;
        }
        // shifting the rest of the day also shifts later days' levels
        for d in &mut q.days[day + 1..] {
            for x in &mut d.log_prices {
                *x += bump;
            }
        }
        let grid = build_block_grid(&p, P_N, K_N).unwrap();
        let a = compute_diff_panel(&p, &grid, &tuning()).unwrap();
        let b = compute_diff_panel(&q, &grid, &tuning()).unwrap();
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (x, y) in ra.iter().zip(rb) {
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (None, None) => {}
                    _ => prop_assert!(false, "mask changed"),
                }
            }
        }
    }

    #[test]
    fn statistic_bounded_by_root_count(values in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 8), 3..8)) {
        let grid = BlockGrid::new(2, 2, 16).unwrap();
        let rows: Vec<Vec<Option<f64>>> = values.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect();
        let panel = SpotVolPanel::from_log_variances(grid, tuning(), 1, &rows);
        let diff = DiffPanel::from_spot(&panel).unwrap();
        if let Ok(r) = test_statistic(&diff, &DEFAULT_ALPHAS) {
            prop_assert!(r.statistic.abs() <= (r.n_summands as f64).sqrt() + 1e-12);
            prop_assert!(r.p_value > 0.0 && r.p_value < 1.0);
        }
    }
}

#[test]
fn heston_differences_have_zero_mean() {
    let sc = SimScenario {
        variance: VarianceModel::Heston {
            theta: 0.02,
            kappa: 8.0,
            nu: 0.45,
            rho: -0.7,
            v0: 0.02,
        },
        jumps: None,
        noise: None,
        grid: Default::default(),
        seed: 0,
    };
    let tuning = TuningSpec::new(0.75, EtaScheme::default()).unwrap();
    let mut all = Vec::new();
    for block in 0..4 {
        let out = simulate(&sc, 7, &rng_stream(21, 0, block)).unwrap();
        let grid = build_block_grid(&out.prices, 60, 48).unwrap();
        let diff = compute_diff_panel(&out.prices, &grid, &tuning).unwrap();
        all.extend(diff.values.iter().flatten().flatten().copied());
    }
    let t = mean(&all) / (std_dev(&all) / (all.len() as f64).sqrt());
    assert!(t.abs() < 2.58, "t = {t} over {} differences", all.len());
}

#[test]
fn independent_differences_give_standard_normal_statistic() {
    let mut s = rng_stream(22, 0, 0);
    let tuning = TuningSpec::new(0.75, EtaScheme::default()).unwrap();
    let stats: Vec<f64> = (0..500)
        .map(|_| {
            let values: Vec<Vec<Option<f64>>> =
                (0..100).map(|_| (0..101).map(|_| Some(s.normal())).collect()).collect();
            let diff = DiffPanel {
                tuning,
                pairs_per_day: 101,
                product_days: (0..100).collect(),
                values,
            };
            test_statistic(&diff, &DEFAULT_ALPHAS).unwrap().statistic
        })
        .collect();
    let ks = ks_normal(&stats);
    assert!(ks.p_value > 0.01, "KS p = {}", ks.p_value);
}
