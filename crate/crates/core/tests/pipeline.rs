use corrlsd::diagnostics::{compute_w_averaged, laplace_cross_moment, moment_estimates};
use corrlsd::ensemble::generate;
use corrlsd::limit_laws::{default_grid, lsd_density_on_grid, lsd_map, lsd_quantiles, mp_quantile, mp_stieltjes, solve_lsd, SolverOptions};
use corrlsd::population::{build_banded_toeplitz, build_identity, esd_of_t};
use corrlsd::spectra::stieltjes_empirical;
use corrlsd::{Complex64, DistributionSpec, StreamKey};

#[test]
fn empirical_stieltjes_tracks_mp() {
    let e = generate(&build_identity(500).unwrap(), &DistributionSpec::gaussian(), 1000, 21).unwrap();
    let spectrum = e.r_spectrum().unwrap();
    for z in [Complex64::new(0.5, 0.5), Complex64::i(), Complex64::new(2.0, 0.3)] {
        let gap = (stieltjes_empirical(&spectrum, z).unwrap() - mp_stieltjes(0.5, z).unwrap()).norm();
        assert!(gap < 0.02, "z={z}: {gap}");
    }
}

#[test]
fn smallest_eigenvalue_near_lower_edge() {
    let e = generate(&build_identity(500).unwrap(), &DistributionSpec::student_t(5.0).unwrap(), 1000, 22).unwrap();
    let edge = (1.0 - 0.5f64.sqrt()).powi(2);
    let min = e.r_spectrum().unwrap().min();
    assert!((min - edge).abs() < 0.05, "{min} vs {edge}");
}

#[test]
fn banded_solution_satisfies_fixed_point() {
    let h = esd_of_t(&build_banded_toeplitz(200, &[0.5, 0.25]).unwrap());
    for z in [Complex64::new(0.2, 0.05), Complex64::i(), Complex64::new(3.0, 0.01)] {
        let fp = solve_lsd(0.5, &h, z, &SolverOptions::default()).unwrap();
        assert!(fp.s.im > 0.0);
        assert!((fp.s - lsd_map(0.5, &h, z, fp.s)).norm() < 1e-9);
    }
}

#[test]
fn identity_lsd_quantiles_match_mp() {
    let h = corrlsd::DiscreteMeasure::point_mass(1.0);
    let grid = default_grid(0.25, &h, 3000);
    let sol = lsd_density_on_grid(0.25, &h, &grid, 1e-4, &SolverOptions::default()).unwrap();
    let qs = [0.1, 0.5, 0.9];
    for (q, x) in qs.iter().zip(lsd_quantiles(&sol, &qs).unwrap()) {
        let exact = mp_quantile(0.25, *q).unwrap();
        assert!((x - exact).abs() < 0.01, "q={q}: {x} vs {exact}");
    }
}

#[test]
fn resolvent_form_shrinks_with_dimension() {
    let z = Complex64::i();
    let mean_abs = |p: usize, n: usize| {
        let model = build_identity(p).unwrap();
        let rows: Vec<usize> = (0..p).step_by(p / 10).collect();
        (0..10u32)
            .map(|r| {
                let e = generate(&model, &DistributionSpec::gaussian(), n, StreamKey::new(23, p as u32, r)).unwrap();
                compute_w_averaged(&e, &rows, z).unwrap().w_n.norm()
            })
            .sum::<f64>()
            / 10.0
    };
    let (small, large) = (mean_abs(50, 100), mean_abs(200, 400));
    assert!(large < small, "{large} !< {small}");
}

#[test]
fn cross_moment_quadrature_agrees_with_simulation() {
    let spec = DistributionSpec::centered_exponential();
    let n = 16;
    let q = laplace_cross_moment(&spec, n).unwrap();
    let mc = moment_estimates(&build_identity(40).unwrap(), &spec, n, 400, StreamKey::new(24, 0, 0)).unwrap();
    assert!(mc.n_e_y1y2.within(n as f64 * q.value, 4.0), "{:?} vs {}", mc.n_e_y1y2, n as f64 * q.value);
    assert_eq!(laplace_cross_moment(&DistributionSpec::gaussian(), n).unwrap().value, 0.0);
}
