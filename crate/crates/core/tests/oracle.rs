use std::f64::consts::PI;
use std::sync::Arc;

use apids::apsymbol::{APSymbol, BaseSymbol, CoefficientFn};
use apids::freqgeom::FrequencyModule;
use apids::oracle::*;
use num_complex::Complex64;

fn mathieu(eps: f64, h: f64) -> PeriodicOperator {
    let m = Arc::new(FrequencyModule::integer_lattice(1, 1.0).unwrap());
    let one = CoefficientFn::real(1.0);
    let b = APSymbol::new(m, vec![(vec![1], one.clone()), (vec![-1], one)], true).unwrap();
    PeriodicOperator::new(BaseSymbol::isotropic(1), b, eps, h).unwrap()
}

#[test]
fn free_case_matches_interval_volume() {
    let op = mathieu(0.0, 0.1);
    let s = OracleSettings {
        k_points: 400,
        ..Default::default()
    };
    let n = ids_oracle(&op, 1.0, &s).unwrap();
    assert!((n.value - 10.0 / PI).abs() < 1e-4, "{}", n.value);
}

#[test]
fn below_spectrum_is_empty() {
    let op = mathieu(0.1, 0.5);
    let s = OracleSettings::default();
    assert_eq!(ids_oracle(&op, -0.5, &s).unwrap().value, 0.0);
}

#[test]
fn mathieu_reference_is_stable_under_radius_doubling() {
    let op = mathieu(0.1, 0.5);
    let mk = |r| OracleSettings {
        k_points: 200,
        radius: Some(r),
        ..Default::default()
    };
    let a = ids_oracle(&op, 1.0, &mk(32.0)).unwrap().value;
    let b = ids_oracle(&op, 1.0, &mk(64.0)).unwrap().value;
    println!("mathieu reference {a:.12}");
    assert!((a - b).abs() < 1e-6);
}

#[test]
fn fiber_matrix_examples() {
    let op = mathieu(0.0, 0.1);
    let f = fiber_matrix(&op, &[0.2], 4.0).unwrap();
    for i in 0..f.basis.len() {
        for j in 0..f.basis.len() {
            let expect = if i == j {
                (0.1 * (0.2 + f.basis.points[i][0])).powi(2)
            } else {
                0.0
            };
            assert!((f.matrix[(i, j)].re - expect).abs() < 1e-15);
        }
    }
    let op = mathieu(0.3, 0.1);
    let f = fiber_matrix(&op, &[0.2], 4.0).unwrap();
    assert!(hermitian_deviation(&f.matrix) < 1e-12);
    assert!((f.matrix[(3, 4)] - Complex64::new(0.3, 0.0)).norm() < 1e-15);
    assert_eq!(f.matrix[(2, 4)], Complex64::new(0.0, 0.0));

    let m = Arc::new(FrequencyModule::integer_lattice(1, 1.0).unwrap());
    let g = CoefficientFn::gaussian(Complex64::new(1.0, 0.0), 1.0);
    let b = APSymbol::new(m, vec![(vec![1], g.clone()), (vec![-1], g)], true).unwrap();
    let op = PeriodicOperator::new(BaseSymbol::isotropic(1), b, 0.5, 0.1).unwrap();
    let f = fiber_matrix(&op, &[0.2], 4.0).unwrap();
    let (i, j) = (5, 4);
    let mid = 0.1 * (0.2 + 0.5 * (f.basis.points[i][0] + f.basis.points[j][0]));
    assert!((f.matrix[(i, j)].re - 0.5 * (-mid * mid).exp()).abs() < 1e-15);
}

#[test]
fn spectral_function_properties() {
    let s = OracleSettings {
        k_points: 200,
        ..Default::default()
    };
    let free = mathieu(0.0, 0.5);
    let e0 = spectral_function_oracle(&free, &[0.3], 1.0, &s).unwrap();
    let n0 = ids_oracle(&free, 1.0, &s).unwrap().value;
    assert!((e0 - n0).abs() < 1e-10);

    let op = mathieu(0.1, 0.5);
    let a = spectral_function_oracle(&op, &[0.0], 1.0, &s).unwrap();
    let b = spectral_function_oracle(&op, &[PI], 1.0, &s).unwrap();
    assert!((a - b).abs() > 1e-4, "{a} {b}");
    let c = spectral_function_oracle(&op, &[0.75], 1.0, &s).unwrap();
    let d = spectral_function_oracle(&op, &[0.75 + 2.0 * PI], 1.0, &s).unwrap();
    assert_eq!(c.to_bits(), d.to_bits());

    let nx = 32;
    let mean: f64 = (0..nx)
        .map(|i| {
            spectral_function_oracle(&op, &[2.0 * PI * i as f64 / nx as f64], 1.0, &s).unwrap()
        })
        .sum::<f64>()
        / nx as f64;
    let n = ids_oracle(&op, 1.0, &s).unwrap().value;
    assert!((mean - n).abs() < 1e-8 * n.max(1.0), "{mean} {n}");
}

#[test]
fn non_lattice_is_unsupported() {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let m = Arc::new(
        FrequencyModule::new(1, vec![vec![1.0], vec![phi]], vec![vec![1, 0]], None).unwrap(),
    );
    let b = APSymbol::new(
        m,
        vec![
            (vec![1, 0], CoefficientFn::real(1.0)),
            (vec![-1, 0], CoefficientFn::real(1.0)),
        ],
        true,
    )
    .unwrap();
    assert!(matches!(
        PeriodicOperator::new(BaseSymbol::isotropic(1), b, 0.1, 0.1),
        Err(apids::Error::Unsupported(_))
    ));
}

#[test]
fn exponential_is_unitary_and_overlap_persists() {
    let op = mathieu(0.01, 0.05);
    let f = fiber_matrix(&op, &[0.1], 20.0).unwrap();
    let e = hermitian_exp(&f.matrix, 3.0);
    let sv = e.singular_values();
    assert!(sv.iter().all(|s| (s - 1.0).abs() < 1e-10));
    let q = |x: &[f64]| {
        if (0.8..=1.2).contains(&x[0]) {
            1.0
        } else {
            0.0
        }
    };
    let s = PropagationSettings {
        k_samples: 4,
        radius: 50.0,
        exec: apids::Execution::Parallel,
    };
    let r = propagation_norm(&op, q, q, 1e-3, &s).unwrap();
    assert!(r.norm > 0.9);
}
