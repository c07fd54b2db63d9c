mod common;

use approx::assert_abs_diff_eq;
use statrs::distribution::{ContinuousCDF, Normal};

use common::{mean_field_at, toy, toy_optimum};
use softcvi::distributions::VariationalFamily;
use softcvi::harness::random_phi;
use softcvi::metrics::*;
use softcvi::numeric::{RngKey, SampleMatrix};
use softcvi::objectives::{EstimatorKind, NegativeSpec, ObjectiveSpec};
use softcvi::reference::{analytic_posterior, GaussianDensity};
use softcvi::Error;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn hdr_threshold_of_a_standard_normal() {
    let (family, phi) = mean_field_at(1, 0.0, 0.0);
    // the half-mass HDR is |θ| < z_0.75
    let z = std_normal().inverse_cdf(0.75);
    let exact = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let thr = hdr_threshold(&family, &phi, 0.5, 100_000, RngKey::new(1)).unwrap();
    assert_abs_diff_eq!(thr, exact, epsilon = 3e-3);
}

#[test]
fn hdr_threshold_vanishes_as_gamma_approaches_one() {
    let (family, phi) = mean_field_at(2, 0.0, 0.0);
    let key = RngKey::new(2);
    let mut last = f64::INFINITY;
    for g in [0.5, 0.9, 0.99, 0.999, 0.9999] {
        let t = hdr_threshold(&family, &phi, g, 100_000, key).unwrap();
        assert!(t < last);
        last = t;
    }
    // peak density is 1/2π; at 0.9999 we are deep in the tails
    assert!(last < 1e-4 / (2.0 * std::f64::consts::PI) * 10.0);
    assert!(hdr_threshold(&family, &phi, 1.0, 100, key).is_err());
}

#[test]
fn self_coverage_is_calibrated_for_every_family() {
    let families = [
        VariationalFamily::mean_field_normal(3),
        VariationalFamily::full_rank_normal(4),
        VariationalFamily::eight_schools(),
        VariationalFamily::spline_flow(4, 8, 32),
        VariationalFamily::garch(),
    ];
    let (n_ref, n_mc) = (10_000, 100_000);
    for (fi, family) in families.iter().enumerate() {
        let phi = random_phi(family, RngKey::new(fi as u64), 0.3);
        let reference = family.sample(&phi, RngKey::new(1000 + fi as u64), n_ref).unwrap();
        let curve = coverage_curve(family, &phi, &reference, &default_gamma_grid(), n_mc, RngKey::new(7)).unwrap();
        for (g, a) in curve.nominal.iter().zip(&curve.actual) {
            // binomial noise of the reference plus that of the threshold draws
            let se = (g * (1.0 - g) * (1.0 / n_ref as f64 + 1.0 / n_mc as f64)).sqrt();
            assert!((a - g).abs() < 2.0 * se, "{} γ={g}: {a}", family.descriptor());
        }
    }
}

#[test]
fn posterior_q_is_calibrated_against_the_analytic_reference() {
    let task = toy(2);
    let (family, phi) = toy_optimum(2);
    let r = analytic_posterior(&task, 10_000, RngKey::new(3)).unwrap();
    let curve = coverage_curve(&family, &phi, &r.samples, &default_gamma_grid(), 10_000, RngKey::new(4)).unwrap();
    for (g, a) in curve.nominal.iter().zip(&curve.actual) {
        assert!((a - g).abs() < 0.02, "γ={g}: {a}");
    }
    assert!(curve.mean_abs_miscalibration() < 0.01);
}

/// Probability under N(0.8, 0.8) of the γ-HDR of N(0.8, k² 0.8).
fn scaled_hdr_mass(k: f64, g: f64) -> f64 {
    let z = std_normal().inverse_cdf(0.5 + g / 2.0);
    2.0 * std_normal().cdf(k * z) - 1.0
}

#[test]
fn mis_scaled_q_coverage_follows_the_gaussian_overlap() {
    let task = toy(1);
    let r = analytic_posterior(&task, 10_000, RngKey::new(5)).unwrap();
    for k in [0.1f64, 10.0] {
        let (family, phi) = mean_field_at(1, 0.8, 0.5 * 0.8f64.ln() + k.ln());
        let curve = coverage_curve(&family, &phi, &r.samples, &default_gamma_grid(), 100_000, RngKey::new(6)).unwrap();
        for (g, a) in curve.nominal.iter().zip(&curve.actual) {
            let exact = scaled_hdr_mass(k, *g);
            let tol = 4.0 * binomial_se(exact, 10_000) + 0.005;
            assert!((a - exact).abs() < tol, "k={k} γ={g}: {a} vs {exact}");
            if (0.3..=0.7).contains(g) {
                if k < 1.0 {
                    assert!(*a < 0.2 * g);
                } else {
                    assert!(*a > 0.99);
                }
            }
        }
        let m = curve.miscalibration();
        assert!(if k < 1.0 { m < -0.3 } else { m > 0.3 }, "{m}");
    }
}

#[test]
fn averaged_coverage_is_monotone() {
    let task = toy(2);
    let r = analytic_posterior(&task, 2000, RngKey::new(8)).unwrap();
    let (family, phi) = mean_field_at(2, 0.5, -0.5);
    let grid = default_gamma_grid();
    let mut avg = vec![0.0; grid.len()];
    for rep in 0..10 {
        let c = coverage_curve(&family, &phi, &r.samples, &grid, 2000, RngKey::new(9).fold_in(rep)).unwrap();
        for (a, v) in avg.iter_mut().zip(&c.actual) {
            *a += v / 10.0;
        }
    }
    assert!(avg.windows(2).all(|w| w[0] <= w[1]), "{avg:?}");
    assert!(avg.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn reference_log_prob_of_the_exact_posterior_is_minus_its_entropy() {
    let d = 3;
    let task = toy(d);
    let (family, phi) = toy_optimum(d);
    let r = analytic_posterior(&task, 10_000, RngKey::new(10)).unwrap();
    let v = mean_reference_log_prob(&family, &phi, &r.samples).unwrap();
    let neg_entropy = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.8).ln();
    assert!((v.value - neg_entropy).abs() < 3.0 * v.std_error, "{} vs {neg_entropy}", v.value);
    assert_eq!(v.outside_support, 0);
}

#[test]
fn shifting_q_away_lowers_reference_log_prob() {
    let task = toy(1);
    let r = analytic_posterior(&task, 10_000, RngKey::new(11)).unwrap();
    let mut last = f64::INFINITY;
    for shift in [0.0, 0.2, 0.5, 1.0, 2.0] {
        let (family, phi) = mean_field_at(1, 0.8 + shift, 0.5 * 0.8f64.ln());
        let v = mean_reference_log_prob(&family, &phi, &r.samples).unwrap().value;
        assert!(v < last);
        last = v;
    }
}

#[test]
fn reference_log_prob_plus_entropy_is_minus_forward_kl() {
    let task = toy(1);
    let r = analytic_posterior(&task, 10_000, RngKey::new(12)).unwrap();
    let p = r.density.as_ref().unwrap();
    for (m, ls) in [(0.3, 0.0), (1.5, -0.5), (0.8, 0.4)] {
        let (family, phi) = mean_field_at(1, m, ls);
        let v = mean_reference_log_prob(&family, &phi, &r.samples).unwrap();
        // KL(N(a, s²) || N(b, t²)) = ln(t/s) + (s² + (a-b)²)/2t² - 1/2
        let (s2, t2): (f64, f64) = (0.8, (2.0 * ls).exp());
        let kl = 0.5 * (t2 / s2).ln() + (s2 + (0.8 - m).powi(2)) / (2.0 * t2) - 0.5;
        assert!((v.value + p.entropy() + kl).abs() < 3.0 * v.std_error, "{} vs {}", v.value + p.entropy(), -kl);
        let (mq, cq) = family.gaussian(&phi).unwrap();
        assert_abs_diff_eq!(p.kl_to(&GaussianDensity::new(mq, cq).unwrap()), kl, epsilon = 1e-12);
    }
}

#[test]
fn reference_outside_q_support_is_flagged() {
    let family = VariationalFamily::spline_flow(2, 4, 8);
    let phi = family.init_params(RngKey::new(0));
    let mut rows = vec![vec![0.0; 5]; 999];
    rows.push(vec![0.0, 0.0, 3.5, 0.0, 0.0]);
    let v = mean_reference_log_prob(&family, &phi, &SampleMatrix::from_rows(5, rows)).unwrap();
    assert_eq!(v.value, f64::NEG_INFINITY);
    assert_eq!(v.outside_support, 1);
    let json = serde_json::to_string(&v).unwrap();
    let back: ReferenceLogProb = serde_json::from_str(&json).unwrap();
    assert_eq!(back.value, f64::NEG_INFINITY);
}

#[test]
fn posterior_mean_accuracy_cases() {
    let reference = SampleMatrix::from_rows(3, (0..100).map(|i| vec![i as f64, (i % 7) as f64, -(i as f64) * 0.5]));
    assert_eq!(posterior_mean_accuracy(&reference, &reference).unwrap(), 0.0);
    // a one-standard-deviation shift in one coordinate
    let sd = reference.column_stds();
    let shifted = SampleMatrix::from_rows(3, reference.rows().map(|r| vec![r[0], r[1] + sd[1], r[2]]));
    assert_abs_diff_eq!(posterior_mean_accuracy(&reference, &shifted).unwrap(), -1.0, epsilon = 1e-12);
}

#[test]
fn posterior_mean_accuracy_by_direct_formula() {
    let a = GaussianDensity::new(nalgebra::DVector::from_vec(vec![0.0, 1.0]), nalgebra::DMatrix::from_diagonal_element(2, 2, 2.0))
        .unwrap()
        .sample(RngKey::new(1), 500);
    let b = GaussianDensity::new(nalgebra::DVector::from_vec(vec![0.5, 0.0]), nalgebra::DMatrix::identity(2, 2))
        .unwrap()
        .sample(RngKey::new(2), 700);
    let mean = |s: &SampleMatrix, j: usize| s.column(j).iter().sum::<f64>() / s.n_rows() as f64;
    let mut sq = 0.0;
    for j in 0..2 {
        let m = mean(&a, j);
        let var = a.column(j).iter().map(|x| (x - m).powi(2)).sum::<f64>() / (a.n_rows() as f64 - 1.0);
        sq += ((m - mean(&b, j)) / var.sqrt()).powi(2);
    }
    assert_abs_diff_eq!(posterior_mean_accuracy(&a, &b).unwrap(), -sq.sqrt(), epsilon = 1e-12);
}

#[test]
fn zero_reference_spread_names_the_dimension() {
    let reference = SampleMatrix::from_rows(2, (0..10).map(|i| vec![i as f64, 4.0]));
    let q = SampleMatrix::from_rows(2, (0..10).map(|i| vec![i as f64, 3.0]));
    assert!(matches!(posterior_mean_accuracy(&reference, &q), Err(Error::ZeroReferenceStd(1))));
}

#[test]
fn softcvi_snr_is_degenerate_at_the_optimum_and_snis_is_not() {
    let task = toy(2);
    let (family, phi) = toy_optimum(2);
    let soft = ObjectiveSpec::softcvi(8, NegativeSpec::proposal(1.0));
    let r = grad_snr(&soft, &task, &family, &phi, 1000, RngKey::new(1)).unwrap();
    assert!(r.noise.iter().all(|&n| n < 1e-9));
    assert!(r.all_degenerate());
    assert!(r.mean_snr().is_nan());
    let snis = ObjectiveSpec::of(EstimatorKind::SnisFkl, 8);
    let r = grad_snr(&snis, &task, &family, &phi, 1000, RngKey::new(1)).unwrap();
    assert!(r.noise.iter().all(|&n| n > 1e-2));
    assert!(r.mean_snr() < 0.2, "{}", r.mean_snr());
}

#[test]
fn constant_gradients_have_zero_noise() {
    let r = SnrReport::from_draws(2, (0..50).map(|_| vec![1.5, 0.0]));
    assert_eq!(r.noise, vec![0.0, 0.0]);
    assert_eq!(r.signal, vec![1.5, 0.0]);
    assert_eq!(r.snr[0], f64::INFINITY);
    assert!(r.degenerate[1] && r.snr[1].is_nan());
    let r = SnrReport::from_draws(1, vec![vec![1.0], vec![f64::NAN], vec![3.0]]);
    assert_eq!((r.n_used, r.n_excluded), (2, 1));
    assert_abs_diff_eq!(r.signal[0], 2.0);
}

#[test]
fn unit_alpha_and_snis_signals_agree() {
    let task = toy(2);
    let family = VariationalFamily::mean_field_normal(2);
    let phi = random_phi(&family, RngKey::new(3), 0.5);
    let soft = ObjectiveSpec::softcvi(8, NegativeSpec::proposal(1.0));
    let snis = ObjectiveSpec::of(EstimatorKind::SnisFkl, 8);
    let n = 4000;
    let a = grad_snr(&soft, &task, &family, &phi, n, RngKey::new(20)).unwrap();
    let b = grad_snr(&snis, &task, &family, &phi, n, RngKey::new(21)).unwrap();
    for j in 0..phi.len() {
        let se = ((a.noise[j].powi(2) + b.noise[j].powi(2)) / n as f64).sqrt();
        assert!((a.signal[j] - b.signal[j]).abs() < 3.0 * se, "coord {j}: {} vs {}", a.signal[j], b.signal[j]);
    }
}

#[test]
fn evaluate_reports_forward_kl_for_gaussians() {
    let task = toy(2);
    let (family, phi) = mean_field_at(2, 0.5, 0.0);
    let r = analytic_posterior(&task, 5000, RngKey::new(30)).unwrap();
    let report = evaluate(&family, &phi, &r, 5000, RngKey::new(31)).unwrap();
    let kl = report.forward_kl.unwrap();
    let per_dim = 0.5 * (1.0f64 / 0.8).ln() + (0.8 + 0.09) / 2.0 - 0.5;
    assert_abs_diff_eq!(kl, 2.0 * per_dim, epsilon = 1e-12);
    assert_eq!(report.coverage.nominal.len(), 19);
    assert_eq!(report.n_ref, 5000);
    assert!(report.posterior_mean_accuracy < 0.0);
}
