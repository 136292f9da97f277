use std::sync::Arc;

use apids::apsymbol::BaseSymbol;
use apids::freqgeom::{sumset, FrequencyModule};
use apids::zones::*;
use apids::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params_with_gamma(d: usize, h: f64, gamma: f64) -> ZoneParams {
    let mut p = ZoneParams::with_defaults(h, h, d, 1, 1.0).unwrap();
    p.c0 = 0.5;
    p.c *= gamma / p.gamma(1);
    p.validate().unwrap();
    p
}

#[test]
fn one_dimensional_shell_is_non_resonant() {
    let m = Arc::new(FrequencyModule::integer_lattice(1, 2.0).unwrap());
    let s = sumset(&m, 1).unwrap();
    let b = BaseSymbol::isotropic(1);
    let p = params_with_gamma(1, 0.05, 0.1);
    let shell = EnergyShell::new(&b, 1.0, 0.1, 0.005).unwrap();
    let z = classify(&b, &shell, &s, &p, Execution::Parallel).unwrap();
    assert!(z.components.is_empty());
    assert_eq!(z.critical_cells().count(), 0);
    assert_eq!(z.non_resonant_cells().count(), shell.cells.len());

    let low = EnergyShell::new(&b, 0.001, 0.01, 0.005).unwrap();
    let z = classify(&b, &low, &s, &p, Execution::Parallel).unwrap();
    assert!(z.critical_cells().count() > 0);
}

fn circle_decomposition(c_scale: f64) -> ZoneDecomposition {
    let m = Arc::new(
        FrequencyModule::new(
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1, 0]],
            None,
        )
        .unwrap(),
    );
    let s = sumset(&m, 1).unwrap();
    let b = BaseSymbol::isotropic(2);
    let mut p = params_with_gamma(2, 0.05, 0.1);
    p.c *= c_scale;
    let shell = EnergyShell::new(&b, 1.0, 0.05, 0.01).unwrap();
    classify(&b, &shell, &s, &p, Execution::Parallel).unwrap()
}

#[test]
fn single_direction_gives_two_arcs_near_the_axis() {
    let z = circle_decomposition(1.0);
    assert_eq!(z.components.len(), 2);
    for comp in &z.components {
        assert_eq!(comp.level, 1);
        assert_eq!(comp.witnesses.len(), 1);
        assert_eq!(
            comp.witnesses[0]
                .iter()
                .map(|x| x.abs())
                .collect::<Vec<_>>(),
            vec![1, 0]
        );
        for &c in &comp.cells {
            let x = &z.cells[c].center;
            assert!(x[0].abs() < 0.1 && x[1].abs() > 0.9, "{x:?}");
        }
        assert!(comp.diameter <= z.params.diameter_factor * comp.gamma);
    }
}

#[test]
fn both_axes_give_no_level_two_on_the_circle() {
    let m = Arc::new(FrequencyModule::integer_lattice(2, 1.0).unwrap());
    let s = sumset(&m, 1).unwrap();
    let b = BaseSymbol::isotropic(2);
    let p = params_with_gamma(2, 0.05, 0.1);
    let shell = EnergyShell::new(&b, 1.0, 0.05, 0.01).unwrap();
    let z = classify(&b, &shell, &s, &p, Execution::Parallel).unwrap();
    assert_eq!(z.components.len(), 4);
    assert!(z
        .components
        .iter()
        .all(|c| c.level == 1 && c.transverse_margin > 0.0));
    let hist = z.level_histogram();
    assert!(hist.keys().all(|&l| l <= 1));
}

#[test]
fn non_resonant_cells_satisfy_the_divisor_bound() {
    let m = Arc::new(FrequencyModule::integer_lattice(2, 2.0).unwrap());
    let s = sumset(&m, 1).unwrap();
    let b = BaseSymbol::isotropic(2);
    let p = params_with_gamma(2, 0.05, 0.1);
    let shell = EnergyShell::new(&b, 1.0, 0.05, 0.01).unwrap();
    let z = classify(&b, &shell, &s, &p, Execution::Parallel).unwrap();
    let nonres: Vec<_> = z.non_resonant_cells().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let freqs = s.nonzero_frequencies();
    for _ in 0..1000 {
        let c = nonres[rng.random_range(0..nonres.len())];
        let g = b.gradient(&c.center);
        for f in &freqs {
            let v: f64 = g.iter().zip(f.embedding()).map(|(a, b)| a * b).sum();
            assert!(v.abs() >= p.gamma(1));
        }
    }
}

#[test]
fn classification_is_deterministic_and_monotone_in_c() {
    let a = circle_decomposition(1.0);
    let b = circle_decomposition(1.0);
    let seq = {
        let m = Arc::new(
            FrequencyModule::new(
                2,
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![vec![1, 0]],
                None,
            )
            .unwrap(),
        );
        let s = sumset(&m, 1).unwrap();
        let base = BaseSymbol::isotropic(2);
        let p = params_with_gamma(2, 0.05, 0.1);
        let shell = EnergyShell::new(&base, 1.0, 0.05, 0.01).unwrap();
        classify(&base, &shell, &s, &p, Execution::Sequential).unwrap()
    };
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_csv(), seq.to_csv());
    let wider = circle_decomposition(1.5);
    for (x, y) in a.cells.iter().zip(&wider.cells) {
        if x.label != CellLabel::NonResonant {
            assert_ne!(y.label, CellLabel::NonResonant);
        }
    }
    assert!(wider.resonant_cell_count() > a.resonant_cell_count());
}

#[test]
fn csv_export_has_header_and_rows() {
    let z = circle_decomposition(1.0);
    let csv = z.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "xi_1,xi_2,label,level,component,critical,subspace_basis"
    );
    assert_eq!(lines.count(), z.cells.len());
    assert!(csv.contains("resonant,1,0,false,(1 0)") || csv.contains("resonant,1,0,false,(-1 0)"));
}
