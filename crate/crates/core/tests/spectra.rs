use std::f64::consts::PI;
use std::sync::Arc;

use apids::apsymbol::{APSymbol, BaseSymbol, CoefficientFn};
use apids::freqgeom::FrequencyModule;
use apids::oracle::{ids_oracle, spectral_function_oracle, OracleSettings};
use apids::spectra::*;
use apids::zones::ZoneParams;
use apids::{Error, Execution};

fn mathieu(eps: f64, h: f64) -> SpectralProblem {
    let m = Arc::new(FrequencyModule::integer_lattice(1, 1.0).unwrap());
    let one = CoefficientFn::real(1.0);
    let b = APSymbol::new(m, vec![(vec![1], one.clone()), (vec![-1], one)], true).unwrap();
    SpectralProblem {
        base: BaseSymbol::isotropic(1),
        perturbation: b,
        eps,
        h,
        sumset_k: 6,
    }
}

fn mathieu_params(p: &SpectralProblem, steps: usize) -> ZoneParams {
    let mut params = ZoneParams::with_defaults(p.eps, p.h, 1, steps, 2.0).unwrap();
    params.c0 = 1.0;
    params
}

fn opts_m2() -> PipelineOptions {
    let mut o = PipelineOptions::default();
    o.gauge.m = 2;
    o
}

fn square(eps: f64, h: f64) -> SpectralProblem {
    let m = Arc::new(FrequencyModule::integer_lattice(2, 1.0).unwrap());
    let one = CoefficientFn::real(1.0);
    let terms = [[1, 0], [-1, 0], [0, 1], [0, -1]]
        .iter()
        .map(|c| (c.to_vec(), one.clone()))
        .collect();
    SpectralProblem {
        base: BaseSymbol::isotropic(2),
        perturbation: APSymbol::new(m, terms, true).unwrap(),
        eps,
        h,
        sumset_k: 2,
    }
}

#[test]
fn free_pipeline_is_the_interval_volume() {
    let p = mathieu(0.0, 0.1);
    let params = ZoneParams::with_defaults(0.0, 0.1, 1, 1, 0.0).unwrap();
    let r = ids_pipeline(&p, 1.0, &params, 2, &PipelineOptions::default()).unwrap();
    assert!((r.value - 10.0 / PI).abs() < 1e-8, "{}", r.value);
    let below = ids_pipeline(&p, -0.5, &params, 2, &PipelineOptions::default()).unwrap();
    assert_eq!(below.value, 0.0);
}

#[test]
fn mathieu_pipeline_matches_oracle() {
    let p = mathieu(0.1, 0.1);
    let r = ids_pipeline(&p, 1.0, &mathieu_params(&p, 2), 2, &opts_m2()).unwrap();
    let o = ids_oracle(&p.periodic().unwrap(), 1.0, &OracleSettings::default())
        .unwrap()
        .value;
    assert!(
        (r.value - o).abs() / o < 5e-3,
        "pipeline {} oracle {o}",
        r.value
    );
    let sum = r.contributions.iter().fold(0.0, |s, c| s + c.value);
    assert_eq!(sum.to_bits(), r.value.to_bits());
    assert_eq!(r.contributions[0].zone, "interior");
}

#[test]
fn pipeline_is_monotone_in_tau() {
    let p = mathieu(0.1, 0.1);
    let params = mathieu_params(&p, 1);
    let vals: Vec<f64> = [0.8, 0.9, 1.0, 1.1, 1.2]
        .iter()
        .map(|&t| {
            ids_pipeline(&p, t, &params, 1, &PipelineOptions::default())
                .unwrap()
                .value
        })
        .collect();
    assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{vals:?}");
}

#[test]
fn small_eps_continuity() {
    let h = 0.1;
    let free = 10.0 / PI;
    let ratios: Vec<f64> = [1e-3, 1e-4]
        .iter()
        .map(|&f| {
            let p = mathieu(f * h, h);
            let v = ids_pipeline(
                &p,
                1.0,
                &mathieu_params(&p, 1),
                1,
                &PipelineOptions::default(),
            )
            .unwrap()
            .value;
            (v - free).abs() / (p.eps / h)
        })
        .collect();
    assert!(ratios.iter().all(|r| *r < 1.0), "{ratios:?}");
}

#[test]
fn shell_through_critical_point_is_unsupported() {
    let p = mathieu(0.1, 0.1);
    let mut params = mathieu_params(&p, 1);
    params.c0 = 12.0;
    let err = ids_pipeline(&p, 1.0, &params, 1, &PipelineOptions::default()).unwrap_err();
    assert!(
        matches!(err, Error::Unsupported(_) | Error::Decomposition(_)),
        "{err}"
    );
}

#[test]
fn leading_kernel_free_case_is_flat() {
    let p = mathieu(0.0, 0.1);
    let params = ZoneParams::with_defaults(0.0, 0.1, 1, 1, 0.0).unwrap();
    for x in [0.0, 1.0, 2.5] {
        let v =
            spectral_function_leading(&p, x, 1.0, &params, 1, &PipelineOptions::default()).unwrap();
        assert!((v.value - 10.0 / PI).abs() < 1e-8);
    }
}

#[test]
fn leading_kernel_tracks_oracle_and_averages_to_ids() {
    let p = mathieu(0.1, 0.1);
    let params = mathieu_params(&p, 2);
    let ker = LeadingKernel::new(&p, 1.0, &params, 2, &opts_m2()).unwrap();
    let op = p.periodic().unwrap();
    for x in [0.0, PI / 2.0, PI] {
        let o = spectral_function_oracle(&op, &[x], 1.0, &OracleSettings::default()).unwrap();
        let v = ker.value(x).value;
        assert!((v - o).abs() / o < 0.02, "x = {x}: {v} vs {o}");
    }
    let n = 32;
    let mean = (0..n)
        .map(|i| ker.value(2.0 * PI * i as f64 / n as f64).value)
        .sum::<f64>()
        / n as f64;
    let ids = ids_pipeline(&p, 1.0, &params, 2, &opts_m2()).unwrap().value;
    assert!((mean - ids).abs() / ids < 1e-3);
}

#[test]
fn convergence_table_for_free_rows() {
    let build = |h: f64, k: usize| {
        let p = mathieu(0.0, h);
        let params = ZoneParams::with_defaults(0.0, h, 1, k.max(1), 0.0)?;
        Ok((p, params))
    };
    let oracle = OracleSettings {
        k_points: 400,
        ..Default::default()
    };
    let t = convergence_study(
        build,
        1.0,
        &[0.2, 0.1, 0.05],
        &[0, 1],
        &PipelineOptions::default(),
        &oracle,
        Execution::Parallel,
    )
    .unwrap();
    assert_eq!(t.rows.len(), 6);
    for r in &t.rows {
        assert!(r.flag.is_none());
        assert!((r.n_pipeline - 2.0 / (2.0 * PI * r.h)).abs() < 1e-8);
    }
    let csv = t.to_csv();
    assert!(csv.starts_with("h,epsilon,tau,K,n_pipeline,n_oracle,abs_err,free\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn slope_fit_recovers_power_law() {
    let xs = [0.2, 0.1, 0.05, 0.025];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.5)).collect();
    assert!((fit_slope(&xs, &ys) - 2.5).abs() < 1e-12);
}

#[test]
fn two_dimensional_zones_add_up_to_free_volume() {
    let (eps, h) = (1e-6, 0.2);
    let p = square(eps, h);
    let mut params = ZoneParams::with_defaults(eps, h, 2, 1, 4.0).unwrap();
    params.c = 0.26 / params.gamma(1);
    params.c0 = 1.0;
    let r = ids_pipeline(&p, 1.0, &params, 1, &PipelineOptions::default()).unwrap();
    let z = r.decomposition.as_ref().unwrap();
    assert!(!z.components.is_empty());
    let free = 1.0 / (4.0 * PI * h * h);
    assert!(
        (r.value - free).abs() / free < 2e-3,
        "{} vs {free}",
        r.value
    );
}
