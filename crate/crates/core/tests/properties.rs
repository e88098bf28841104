//! Property tests for the structural invariants: log-domain arithmetic,
//! measure reconstruction, harmonic-sequence identities, the single-birth
//! table equivalences, and the duality identities.

use proptest::prelude::*;

use specdisc::duality::dual_model;
use specdisc::harmonic;
use specdisc::logdomain::{log_sum_exp, LogScalar, LogSumAcc};
use specdisc::model::{DiscreteModel, MeasureCache, Rate, TableExtension};
use specdisc::series::{stolz_limit, Monotonicity};
use specdisc::single_birth::{f_tilde_direct, g_columns, g_table, poisson_solve, LowerTriModel};

fn table_model(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> DiscreteModel {
    DiscreteModel::new(
        Rate::from_table(a, TableExtension::ErrorPastEnd),
        Rate::from_table(b, TableExtension::ErrorPastEnd),
        Rate::from_table(c, TableExtension::ErrorPastEnd),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn logscalar_tracks_f64_arithmetic(
        x in -1e6f64..1e6,
        y in prop::num::f64::NORMAL.prop_filter("moderate", |v| v.abs() > 1e-6 && v.abs() < 1e6),
    ) {
        let lx = LogScalar::from_value(x);
        let ly = LogScalar::from_value(y);
        let prod = lx.mul(&ly).to_f64();
        prop_assert!((prod - x * y).abs() <= 1e-12 * (x * y).abs());
        let sum = lx.add(&ly).to_f64();
        prop_assert!((sum - (x + y)).abs() <= 1e-10 * (x.abs() + y.abs()).max(1e-300));
    }

    #[test]
    fn log_sum_acc_is_permutation_invariant(mut logs in prop::collection::vec(-50.0f64..50.0, 2..400)) {
        let mut fwd = LogSumAcc::new();
        for &l in &logs {
            fwd.add_log(l);
        }
        let reference = log_sum_exp(&logs);
        logs.reverse();
        let mut rev = LogSumAcc::new();
        for &l in &logs {
            rev.add_log(l);
        }
        prop_assert!((fwd.log_value() - reference).abs() < 1e-12);
        prop_assert!((rev.log_value() - reference).abs() < 1e-12);
    }

    #[test]
    fn mu_ratio_identity_and_round_trip(
        b in prop::collection::vec(0.1f64..10.0, 2..200),
        seed in any::<u32>(),
    ) {
        // build mu from b and a pseudo-random positive profile, reconstruct
        let n = b.len();
        let mut mu = Vec::with_capacity(n);
        let mut state = seed as u64 | 1;
        for _ in 0..n {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            mu.push(0.05 + ((state >> 33) as f64 / (1u64 << 31) as f64) * 5.0);
        }
        mu[0] = 1.0;
        let model = DiscreteModel::from_b_and_mu(&b, &mu).unwrap();
        let mut cache = MeasureCache::new(&model);
        for k in 0..n {
            let got = cache.mu(k).unwrap().to_f64();
            prop_assert!((got - mu[k]).abs() / mu[k] < 1e-12, "k = {k}");
            // mu(n)/mu(n-1) = b_(n-1)/a_n in log domain
            if k >= 1 {
                let lhs = cache.log_mu(k).unwrap() - cache.log_mu(k - 1).unwrap();
                let rhs = model.b(k - 1).unwrap().ln() - model.a(k).unwrap().ln();
                prop_assert!((lhs - rhs).abs() < 1e-13);
            }
            // nu_hat * mu * b = 1
            let residual = cache.log_nu_hat(k).unwrap() + cache.log_mu(k).unwrap()
                + model.b(k).unwrap().ln();
            prop_assert!(residual.abs() < 1e-13);
        }
    }

    #[test]
    fn harmonic_invariants_on_random_rates(
        a in prop::collection::vec(0.2f64..5.0, 40..80),
        b in prop::collection::vec(0.2f64..5.0, 40..80),
        c in prop::collection::vec(0.0f64..2.0, 40..80),
    ) {
        let n = a.len().min(b.len()).min(c.len());
        let model = table_model(
            a[..n].to_vec(),
            b[..n].to_vec(),
            c[..n].to_vec(),
        );
        let n_max = n - 2;
        let seq = harmonic::compute(&model, n_max).unwrap();
        for k in 1..=n_max {
            // recursion residual
            let rec = ((seq.xi[k] - seq.u[k] * seq.r[k - 1]) * seq.r[k] - 1.0).abs();
            prop_assert!(rec < 1e-13, "k = {k}");
            // both bounds
            prop_assert!(seq.r[k] > 0.0);
            prop_assert!(seq.r[k] <= 1.0 / (1.0 + seq.v[k]) + 1e-12);
            let refined = 1.0 / (1.0 + seq.v[k] + seq.u[k] * seq.v[k - 1] / (1.0 + seq.v[k - 1]));
            prop_assert!(seq.r[k] <= refined + 1e-12);
            // h nondecreasing with the (1 + v) factor
            prop_assert!(seq.log_h[k] >= seq.log_h[k - 1] + (1.0 + seq.v[k - 1]).ln() - 1e-12);
            // harmonicity
            if k < n_max {
                let res = harmonic::harmonicity_residual(&model, &seq, k).unwrap();
                prop_assert!(res < 1e-10, "k = {k}: {res}");
            }
        }
        // the second-order route agrees (moderate n, no cancellation flags)
        let (h2, flags) = harmonic::h_second_order(&model, n_max).unwrap();
        for k in 0..=n_max {
            if !flags[k] {
                prop_assert!((h2[k].ln_abs() - seq.log_h[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn duality_identities_random_tables(
        a in prop::collection::vec(0.2f64..5.0, 30..60),
        b in prop::collection::vec(0.2f64..5.0, 30..60),
    ) {
        let n = a.len().min(b.len());
        let model = table_model(a[..n].to_vec(), b[..n].to_vec(), vec![0.0; n]);
        let pair = dual_model(&model, n - 1).unwrap();
        let mut primal = MeasureCache::new(&pair.primal);
        let mut dual = MeasureCache::new(&pair.dual);
        let log_a0 = pair.a_star_0.ln();
        for k in 0..n - 1 {
            let lhs = primal.log_nu_hat(k).unwrap() + log_a0;
            let rhs = dual.log_mu(k).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-13, "k = {k}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_birth_table_identities(
        seed in any::<u64>(),
        n in 4usize..11,
    ) {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let q_up: Vec<f64> = (0..=n).map(|_| 0.1 + 9.9 * next()).collect();
        let mut q_low = Vec::new();
        for i in 1..=n {
            for j in 0..i {
                if next() < 0.6 {
                    q_low.push((i, j, 10.0 * next()));
                }
            }
        }
        let c: Vec<f64> = (0..=n).map(|_| 2.0 * next() - 1.0).collect();
        let model = LowerTriModel::new(q_up, &q_low, c).unwrap();

        // diagonal equals the reference recursion
        let i0 = 1usize;
        let g = g_table(&model, i0, n - i0).unwrap();
        for m in 0..=(n - i0) {
            let f = f_tilde_direct(&model, i0 + m, i0).unwrap();
            prop_assert!((g.diag[m] - f).abs() / f.abs().max(1e-30) < 1e-12);
        }

        // column-k representation is independent of k
        let m_top = n - i0;
        let cols = g_columns(&model, i0, m_top).unwrap();
        let target = f_tilde_direct(&model, i0 + m_top, i0).unwrap();
        for k in 1..=m_top {
            let mut s = 0.0;
            for l in k..=m_top {
                s += f_tilde_direct(&model, i0 + m_top, i0 + l).unwrap() * cols[k - 1][l - k];
            }
            prop_assert!((s - target).abs() / target.abs().max(1e-30) < 1e-10, "k = {k}");
        }

        // poisson solver's internal residual check at 1e-9 must pass
        let f: Vec<f64> = (0..n).map(|_| 4.0 * next() - 2.0).collect();
        poisson_solve(&model, &f, next(), n).unwrap();
    }

    #[test]
    fn stolz_bounds_contain_proportional_limits(
        scale in 0.1f64..10.0,
        m in 20usize..200,
    ) {
        let q: Vec<f64> = (1..=m).map(|k| (k as f64).sqrt()).collect();
        let p: Vec<f64> = q.iter().map(|&x| scale * x).collect();
        let b = stolz_limit(&p, &q, Monotonicity::Increasing).unwrap();
        prop_assert!(b.lo <= scale + 1e-12 && scale - 1e-12 <= b.hi);
    }
}
