use std::f64::consts::PI;

use super::*;
use crate::mollifiers::{make_family, Generator, Ladder, MollifierFamily};
use crate::rng;
use crate::volume_profiles::{log_grid, make_power_profile};

fn all_spaces() -> Vec<DynSpace> {
    vec![
        Box::new(make_euclidean(1).unwrap()),
        Box::new(make_euclidean(3).unwrap()),
        Box::new(make_normed(2, 1.0).unwrap()),
        Box::new(make_normed(3, 3.5).unwrap()),
        Box::new(make_normed(2, f64::INFINITY).unwrap()),
        Box::new(make_warped_line(make_power_profile(2).unwrap()).unwrap()),
        Box::new(make_warped_line(VolumeProfile::exp_minus_one()).unwrap()),
        Box::new(make_circle(1.5).unwrap()),
        Box::new(make_heisenberg_with(crate::Measured::exact(HEISENBERG_UNIT_BALL_EXACT))),
    ]
}

#[test]
fn constructor_errors() {
    assert!(make_euclidean(0).is_err());
    assert!(make_normed(2, 0.5).is_err());
    assert!(make_circle(0.0).is_err());
    let sqrt = VolumeProfile::custom("sqrt", |t: f64| t.sqrt(), |t: f64| 0.5 / t.sqrt(), |v: f64| v * v);
    assert!(make_warped_line(sqrt).is_err());
}

#[test]
fn ball_volume_examples() {
    let e2 = make_euclidean(2).unwrap();
    assert!((e2.ball_volume(&[3.0, -1.0], 1.0).value - PI).abs() < 1e-14);
    let w = make_warped_line(make_power_profile(2).unwrap()).unwrap();
    assert_eq!(w.ball_volume(&[0.3], 1.7).value / 1.7f64.powi(2), 2.0);
    assert!((lq_unit_ball_volume(2, 1.0) - 2.0).abs() < 1e-14);
    assert!((lq_unit_ball_volume(3, 2.0) - 4.0 * PI / 3.0).abs() < 1e-13);
    let c = make_circle(1.0).unwrap();
    assert_eq!(c.ball_volume(&[0.0], 10.0).value, 2.0 * PI);
}

#[test]
fn spheres_have_exact_radius_and_balls_stay_inside() {
    for space in all_spaces() {
        let dim = space.chart_dim();
        let mut s = rng::stream(11, rng::tags::PROPERTY, 0);
        let mut x = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        for _ in 0..200 {
            space.random_point(&mut s, &mut x);
            let r = 0.05 + 2.0 * rand::Rng::random::<f64>(&mut s);
            space.sample_sphere(&x, r, &mut s, &mut y);
            let expect = r.min(space.diameter());
            assert!((space.distance(&x, &y) / expect - 1.0).abs() < 1e-9, "{} r={r}", space.label());
            space.sample_ball(&x, r, &mut s, &mut y);
            assert!(space.distance(&x, &y) <= r * (1.0 + 1e-12), "{}", space.label());
            if space.diameter().is_finite() {
                continue;
            }
            let (lo, hi) = space.ball_box(&x, r);
            assert!(y.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| *v >= a - 1e-12 && *v <= b + 1e-12));
        }
    }
}

#[test]
fn gauge_constant_matches_analytic_value() {
    let h = make_heisenberg();
    let c = h.unit_volume();
    assert!((c.value - HEISENBERG_UNIT_BALL_EXACT).abs() < 4.0 * c.uncertainty, "{c:?}");
    assert!(c.uncertainty < 1e-3);
}

#[test]
fn heisenberg_dilation_homogeneity_by_rejection() {
    let h = make_heisenberg();
    let x = [0.4, -1.1, 0.7];
    let v1 = mc_ball_volume(&h, &x, 1.0, 400_000, 5, None);
    let v2 = mc_ball_volume(&h, &x, 2.0, 400_000, 6, None);
    let ratio = v2.value / v1.value;
    let se = ratio * ((v1.uncertainty / v1.value).powi(2) + (v2.uncertainty / v2.value).powi(2)).sqrt();
    assert!((ratio - 16.0).abs() < 4.0 * se, "ratio {ratio} se {se}");
    assert!((v1.value - HEISENBERG_UNIT_BALL_EXACT).abs() < 4.0 * v1.uncertainty);
}

#[test]
fn bgi_examples() {
    let e3 = make_euclidean(3).unwrap();
    let grid = log_grid(1e-2, 1e3, 16);
    let rep = check_bgi(&e3, &make_power_profile(3).unwrap(), &grid).unwrap();
    assert!(rep.pass);
    assert!((rep.avr_estimate.value - 4.0 * PI / 3.0).abs() < 1e-12);

    let w = make_warped_line(VolumeProfile::exp_minus_one()).unwrap();
    let rep = check_bgi(&w, &VolumeProfile::exp_minus_one(), &log_grid(1e-3, 5.0, 12)).unwrap_err();
    assert!(matches!(rep, crate::Error::InvalidParameter(_)));
    let rep = check_bgi(&w, &VolumeProfile::exp_minus_one(), &log_grid(1e-3, 50.0, 12)).unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.avr_estimate.value, 2.0);

    let e2 = make_euclidean(2).unwrap();
    let rep = check_bgi(&e2, &make_power_profile(1).unwrap(), &grid).unwrap();
    assert!(!rep.pass);
    assert!(!rep.violations.is_empty());
}

#[test]
fn avr_and_density_examples() {
    let grid = log_grid(1.0, 1e4, 9);
    let e2 = make_euclidean(2).unwrap();
    let avr = estimate_avr(&e2, &make_power_profile(2).unwrap(), &grid).unwrap();
    assert!((avr.value - PI).abs() < 1e-12);
    assert!(avr.is_exact());

    let c = make_circle(1.0).unwrap();
    let avr = estimate_avr(&c, &make_power_profile(1).unwrap(), &grid).unwrap();
    assert_eq!(avr.value, 0.0);

    let w = make_warped_line(make_power_profile(2).unwrap()).unwrap();
    let down: Vec<f64> = log_grid(1e-4, 1.0, 5).into_iter().rev().collect();
    for x in [-3.0, 0.0, 0.25, 17.0] {
        let d = estimate_density(&w, &make_power_profile(2).unwrap(), &[x], &down).unwrap();
        assert_eq!(d.value, 2.0);
    }
    let d = estimate_density(&c, &make_power_profile(1).unwrap(), &[0.0], &down).unwrap();
    assert!((d.value - 2.0).abs() < 1e-12);
}

#[test]
fn volume_bound_examples() {
    let grid = log_grid(1.0, 1e3, 10);
    let e2 = make_euclidean(2).unwrap();
    let rep = check_volume_bound(&e2, &make_power_profile(2).unwrap(), &grid, 16, 1).unwrap();
    assert!((rep.k - PI).abs() < 1e-12 && rep.bounded);
    let w = make_warped_line(make_power_profile(2).unwrap()).unwrap();
    let rep = check_volume_bound(&w, &make_power_profile(2).unwrap(), &grid, 16, 1).unwrap();
    assert_eq!(rep.k, 2.0);
    let h = make_heisenberg();
    let rep = check_volume_bound(&h, &make_power_profile(4).unwrap(), &grid, 16, 1).unwrap();
    let c = h.unit_volume();
    assert!((rep.k - c.value).abs() < 1e-12 * c.value && rep.bounded);
    assert!(check_volume_bound(&e2, &make_power_profile(2).unwrap(), &grid, 8, 1).is_err());
    let rep = check_volume_bound(&e2, &make_power_profile(1).unwrap(), &grid, 16, 1).unwrap();
    assert!(!rep.bounded);
}

#[test]
fn tail_mollifier_mass_examples() {
    let e1 = make_euclidean(1).unwrap();
    let fam = MollifierFamily::standard(1, 1.0, vec![0.5]).unwrap();
    let t = tail_mollifier_mass(&e1, &fam, 0, &[0.3], 1.0).unwrap();
    assert!((t.value - 2.0).abs() < 1e-10, "{t:?}");

    let v = make_power_profile(2).unwrap();
    let w = make_warped_line(v.clone()).unwrap();
    let fam = make_family(Generator::power(1.0).unwrap(), v, Ladder::explicit(vec![0.1])).unwrap();
    let t = tail_mollifier_mass(&w, &fam, 0, &[0.0], 2.0).unwrap();
    assert!((t.value - 2.0 * 4f64.powf(-0.1)).abs() < 1e-10);
    assert!((t.value - 1.7411).abs() < 1e-4);

    let c = make_circle(1.0).unwrap();
    let fam = MollifierFamily::standard(1, 1.0, vec![0.3]).unwrap();
    assert_eq!(tail_mollifier_mass(&c, &fam, 0, &[0.0], 4.0).unwrap().value, 0.0);
    // ∫_1^π 2·0.3 t^{-1.3} dt = 2(1 − π^{-0.3})
    let t = tail_mollifier_mass(&c, &fam, 0, &[0.0], 1.0).unwrap();
    assert!((t.value - 2.0 * (1.0 - PI.powf(-0.3))).abs() < 1e-10, "{t:?}");
}
