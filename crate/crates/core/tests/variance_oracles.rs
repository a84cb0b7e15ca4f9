#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use oobvar::forest::{ForestParams, SubsampleRule};
use oobvar::oob::{oob_weight_matrix, refit_by_substitution, OobRouting};
use oobvar::variance::{
    bootstrap_refit, bootstrap_response, estimate_all, oob_fit, oob_residuals, r_hat_b, r_infinity, sigma2_fast,
    sigma2_rf, BootstrapConfig,
};
use oobvar::sim::{generate_dataset, SimulationModel};
use rand::Rng;

#[test]
fn residuals_of_toy_match_weight_form() {
    let data = random_dataset(6, 6, 1);
    let forest = fit(&data, params(200, 4));
    let fit = oob_fit(&forest, &data).unwrap();
    let dense = dense_oob_weights(&forest, &data);
    for (k, &i) in fit.residuals.rows.iter().enumerate() {
        let m: f64 = dense[i].as_ref().unwrap().iter().zip(data.response()).map(|(w, y)| w * y).sum();
        assert!(rel_close(fit.residuals.values[k], data.response()[i] - m, 1e-10));
    }
}

#[test]
fn residuals_shift_with_response() {
    let data = random_dataset(1, 10, 1);
    let m: Vec<Option<f64>> = data.response().iter().map(|y| Some(y - 1.0)).collect();
    let r = oob_residuals(&data, &m).unwrap();
    assert!(r.values.iter().all(|&e| (e - 1.0).abs() < 1e-12));
    let flat = data.with_response(vec![3.0; 10]).unwrap();
    let forest = fit(&flat, params(50, 0));
    let fit = oob_fit(&forest, &flat).unwrap();
    assert!(fit.residuals.values.iter().all(|&e| e == 0.0));
    assert_eq!(fit.sigma2_rf, 0.0);
}

#[test]
fn refit_with_zero_noise_is_smoothed_oob() {
    let data = random_dataset(2, 30, 2);
    let forest = fit(&data, params(100, 9));
    let fit = oob_fit(&forest, &data).unwrap();
    let refit = bootstrap_refit(&fit.weights, &fit.m_oob);
    let mut differs = false;
    for i in 0..30 {
        if let Some(v) = refit[i] {
            assert!(rel_close(v, fit.weights.row_dot(i, &fit.m_oob), 1e-15));
            differs |= (v - fit.m_oob[i]).abs() > 1e-9;
        }
    }
    assert!(differs, "W m_oob should not equal m_oob in general");
}

#[test]
fn single_leaf_refit_is_oob_inbag_mean() {
    let n = 12;
    let data = random_dataset(5, n, 1);
    let forest = fit(&data, ForestParams { max_leaves: Some(1), subsample: Some(SubsampleRule::Size(5)), ..params(40, 3) });
    let w = oob_weight_matrix(&forest, &data);
    let y_star: Vec<f64> = (0..n).map(|j| (j as f64).sqrt()).collect();
    let refit = bootstrap_refit(&w, &y_star);
    for i in 0..n {
        let oob: Vec<_> = forest.trees().iter().filter(|t| !t.inbag.contains(&i)).collect();
        if oob.is_empty() {
            assert_eq!(refit[i], None);
            continue;
        }
        let expect = oob.iter().map(|t| t.inbag.iter().map(|&j| y_star[j]).sum::<f64>() / 5.0).sum::<f64>() / oob.len() as f64;
        assert!(rel_close(refit[i].unwrap(), expect, 1e-12));
    }
}

#[test]
fn linear_refit_equals_tree_substitution() {
    let mut r = rng(31);
    for _ in 0..10 {
        let n = r.random_range(6..=50);
        let p = r.random_range(1..=3);
        let data = random_dataset(r.random(), n, p);
        let forest = fit(&data, random_params(&mut r, n, p));
        let Ok(fit) = oob_fit(&forest, &data) else { continue };
        let routing = OobRouting::new(&forest, &data);
        let cfg = BootstrapConfig { replicates: 5, seed: r.random(), ..Default::default() };
        for b in 0..5 {
            let y_star = bootstrap_response(&fit.m_oob, fit.sigma2_rf, &cfg, b);
            let linear = bootstrap_refit(&fit.weights, &y_star);
            let direct = refit_by_substitution(&forest, &routing, &y_star);
            for i in 0..n {
                match (linear[i], direct[i]) {
                    (Some(a), Some(b)) => assert!(rel_close(a, b, 1e-10)),
                    (None, None) => {}
                    other => panic!("{other:?}"),
                }
            }
        }
    }
}

/// `E*[(sum_j W_ij y*_j - m_i)^2]` as mean-square plus `sum_jk W_ij W_ik Cov(eps_j, eps_k)`
/// with `Cov = sigma2 * I`, on a dense matrix built independently of the library's.
fn brute_r_infinity(dense: &[Option<Vec<f64>>], m: &[f64], sigma2: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for (i, row) in dense.iter().enumerate() {
        let Some(row) = row else { continue };
        let mean_shift: f64 = row.iter().zip(m).map(|(w, mj)| w * mj).sum::<f64>() - m[i];
        let mut var = 0.0;
        for (j, wj) in row.iter().enumerate() {
            for (k, wk) in row.iter().enumerate() {
                if j == k {
                    var += wj * wk * sigma2;
                }
            }
        }
        total += mean_shift * mean_shift + var;
        count += 1;
    }
    total / count as f64
}

#[test]
fn closed_form_matches_brute_force_expectation() {
    let data = random_dataset(6, 6, 1);
    let forest = fit(&data, params(200, 12));
    let fit = oob_fit(&forest, &data).unwrap();
    let dense = dense_oob_weights(&forest, &data);
    for s2 in [0.0, fit.sigma2_rf, 2.5] {
        let got = r_infinity(&fit.weights, &fit.m_oob, s2);
        assert!(rel_close(got, brute_r_infinity(&dense, &fit.m_oob, s2), 1e-12));
    }
}

#[test]
fn closed_form_lower_bound() {
    let mut r = rng(4);
    for _ in 0..20 {
        let n = r.random_range(6..=40);
        let data = random_dataset(r.random(), n, 2);
        let forest = fit(&data, random_params(&mut r, n, 2));
        let Ok(fit) = oob_fit(&forest, &data) else { continue };
        let w = &fit.weights;
        let covered: Vec<usize> = (0..n).filter(|&i| w.is_covered(i)).collect();
        let min_sq = covered.iter().map(|&i| w.row_sum_squares(i)).fold(f64::INFINITY, f64::min);
        let r_inf = r_infinity(w, &fit.m_oob, fit.sigma2_rf);
        assert!(r_inf >= fit.sigma2_rf * min_sq * (1.0 - 1e-12));
        assert!(min_sq >= 1.0 / n as f64 * (1.0 - 1e-12));
    }
}

#[test]
fn zero_variance_bootstrap_is_the_squared_smoothing_shift() {
    let data = random_dataset(8, 25, 2);
    let forest = fit(&data, params(80, 5));
    let fit = oob_fit(&forest, &data).unwrap();
    let cfg = BootstrapConfig { replicates: 7, seed: 3, ..Default::default() };
    let est = r_hat_b(&fit.weights, &fit.m_oob, 0.0, &cfg).unwrap();
    let expect = r_infinity(&fit.weights, &fit.m_oob, 0.0);
    assert!(est.replicate_terms.iter().all(|&t| t == est.replicate_terms[0]));
    assert!(rel_close(est.r_hat_b, expect, 1e-12));
}

#[test]
fn monte_carlo_converges_to_closed_form() {
    let data = random_dataset(10, 120, 2);
    let forest = fit(&data, params(100, 6));
    let fit = oob_fit(&forest, &data).unwrap();
    let cfg = BootstrapConfig { replicates: 2000, seed: 77, ..Default::default() };
    let est = r_hat_b(&fit.weights, &fit.m_oob, fit.sigma2_rf, &cfg).unwrap();
    let r_inf = r_infinity(&fit.weights, &fit.m_oob, fit.sigma2_rf);
    assert!((est.r_hat_b - r_inf).abs() <= 4.0 * est.standard_error());
    assert_eq!(est, r_hat_b(&fit.weights, &fit.m_oob, fit.sigma2_rf, &cfg).unwrap());
}

#[test]
fn report_identities_and_ordering() {
    let mut r = rng(17);
    for _ in 0..15 {
        let n = r.random_range(10..=60);
        let data = random_dataset(r.random(), n, 2);
        let forest = fit(&data, params(60, r.random()));
        let rep = estimate_all(&forest, &data, &BootstrapConfig { replicates: 20, seed: 1, ..Default::default() }).unwrap();
        let a = forest.subsample_size();
        assert_eq!(rep.sigma2_fast.to_bits(), sigma2_fast(rep.sigma2_rf, a).to_bits());
        assert_eq!(rep.sigma2_boot_closed.to_bits(), (rep.sigma2_rf - rep.r_infinity).to_bits());
        assert_eq!(rep.sigma2_boot_mc.unwrap().to_bits(), (rep.sigma2_rf - rep.r_hat_b.unwrap()).to_bits());
        assert_eq!(rep.clamped_boot, rep.sigma2_boot_closed.max(0.0));
        assert!(rep.sigma2_rf >= rep.sigma2_fast);
        assert!(a * a >= n);
        assert!(rep.r_infinity >= rep.lower_bound);
        assert!(rep.ordering_ok);
        assert_eq!(rep.replicates, 20);
    }
}

#[test]
fn too_many_uncovered_rows_is_an_error() {
    let data = random_dataset(1, 20, 1);
    let forest = fit(&data, ForestParams { subsample: Some(SubsampleRule::Size(19)), ..params(3, 0) });
    assert!(matches!(
        estimate_all(&forest, &data, &BootstrapConfig::default()),
        Err(oobvar::Error::Estimation(_))
    ));
}

#[test]
fn report_json_has_exact_fields() {
    let data = random_dataset(3, 30, 2);
    let forest = fit(&data, params(50, 2));
    let rep = estimate_all(&forest, &data, &BootstrapConfig::default()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    let mut expected = vec![
        "sigma2_rf", "sigma2_fast", "sigma2_boot_mc", "sigma2_boot_closed", "r_hat_B", "r_infinity", "lower_bound",
        "n_covered", "B", "ordering_ok", "clamped_boot", "warnings",
    ];
    expected.sort_unstable();
    assert_eq!(keys, expected);
    assert!(v["r_hat_B"].is_null());
    assert_eq!(v["sigma2_rf"].as_f64().unwrap().to_bits(), rep.sigma2_rf.to_bits());
}

#[test]
fn pure_noise_sigma2_rf_band() {
    let model = SimulationModel::zero(5, 1.0).unwrap();
    let mut values = Vec::new();
    for seed in 0..20u64 {
        let sim = generate_dataset(&model, 500, seed).unwrap();
        let forest = fit(&sim.dataset, params(300, seed + 1000));
        let fit = oob_fit(&forest, &sim.dataset).unwrap();
        values.push(fit.sigma2_rf);
        assert_eq!(fit.sigma2_rf, sigma2_rf(&fit.residuals.values).unwrap());
    }
    for v in &values {
        assert!((0.8..=1.3).contains(v), "{values:?}");
    }
}
