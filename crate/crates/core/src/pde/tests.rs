use std::f64::consts::PI;

use proptest::prelude::*;

use super::*;
use crate::rng::stream;

fn random_field(grid: Grid2D, seed: u64) -> Field {
    let mut rng = stream(seed, "pde-test", 0);
    grid.sample(|_| rng.random_range(-1.0..1.0))
}

/// Projection coefficient of `u` onto the nodal mode `phi`.
fn amplitude(u: &Field, phi: &Field) -> f64 {
    let num: f64 = u.values.iter().zip(&phi.values).map(|(a, b)| a * b).sum();
    let den: f64 = phi.values.iter().map(|b| b * b).sum();
    num / den
}

fn fundamental(grid: &Grid2D) -> Field {
    grid.sample(|s| (s[0] / 2.0).sin() * (s[1] / 2.0).sin())
}

/// Eigenvalue of the 5-point Laplacian for `sin(w s1) sin(w s2)`.
fn discrete_eigenvalue(w: f64, h: f64) -> f64 {
    2.0 * 4.0 / (h * h) * (w * h / 2.0).sin().powi(2)
}

#[test]
fn heat_zero_data_stays_zero() {
    let g = Grid2D::heat(12).unwrap();
    let u = heat_forward_fd(&Field::zeros(g), &HeatConfig::new(0.64)).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
}

#[test]
fn heat_boundary_is_zero_at_every_step() {
    let g = Grid2D::heat(10).unwrap();
    let u0 = random_field(g, 1);
    let mut worst: f64 = 0.0;
    let cfg = HeatConfig { steps: 20, ..HeatConfig::new(0.64) };
    heat_forward_fd_observe(&u0, &cfg, |_, v| {
        for i in 0..g.n2 {
            for j in 0..g.n1 {
                if g.is_boundary(i, j) {
                    worst = worst.max(v[g.index(i, j)].abs());
                }
            }
        }
    })
    .unwrap();
    assert_eq!(worst, 0.0);
}

#[test]
fn heat_matches_discrete_implicit_euler_decay() {
    let g = Grid2D::heat(28).unwrap();
    let phi = fundamental(&g);
    for steps in [10, 100] {
        let cfg = HeatConfig { steps, ..HeatConfig::new(0.64) };
        let a = amplitude(&heat_forward_fd(&phi, &cfg).unwrap(), &phi);
        let dt = 1.0 / steps as f64;
        let oracle = (1.0 + dt * 0.64 * discrete_eigenvalue(0.5, g.h1())).powi(-(steps as i32));
        assert!((a - oracle).abs() < 1e-8, "steps {steps}: {a} vs {oracle}");
    }
}

#[test]
fn heat_eigenmode_decay_and_time_refinement() {
    let g = Grid2D::heat(28).unwrap();
    let phi = fundamental(&g);
    let run = |steps| {
        let cfg = HeatConfig { steps, ..HeatConfig::new(0.64) };
        amplitude(&heat_forward_fd(&phi, &cfg).unwrap(), &phi)
    };
    let exact = (-0.32f64).exp();
    let a100 = run(100);
    assert!((a100 - exact).abs() / exact < 0.02);
    let semi = (-0.64 * discrete_eigenvalue(0.5, g.h1())).exp();
    let ratio = (run(100) - semi).abs() / (run(200) - semi).abs();
    assert!((ratio - 2.0).abs() <= 0.4, "refinement ratio {ratio}");
}

#[test]
fn heat_maximum_principle() {
    for seed in 0..5 {
        let g = Grid2D::heat(14).unwrap();
        let u0 = random_field(g, seed);
        let bound = u0.max_abs();
        let mut peak: f64 = 0.0;
        let cfg = HeatConfig { steps: 30, ..HeatConfig::new(0.2) };
        heat_forward_fd_observe(&u0, &cfg, |_, v| {
            peak = v.iter().fold(peak, |m, x| m.max(x.abs()));
        })
        .unwrap();
        assert!(peak <= bound * (1.0 + 1e-9), "{peak} > {bound}");
    }
}

#[test]
fn heat_config_is_validated() {
    let g = Grid2D::heat(6).unwrap();
    for cfg in [
        HeatConfig::new(0.0),
        HeatConfig { steps: 0, ..HeatConfig::new(1.0) },
        HeatConfig { t_final: -1.0, ..HeatConfig::new(1.0) },
    ] {
        assert!(heat_forward_fd(&Field::zeros(g), &cfg).is_err());
    }
}

#[test]
fn grid_spacing_and_layout() {
    let g = Grid2D::new(5, 3, (0.0, 2.0), (1.0, 2.0)).unwrap();
    assert_eq!(g.h1(), 0.5);
    assert_eq!(g.h2(), 0.5);
    assert_eq!(g.point(2, 1), [0.5, 2.0]);
    assert_eq!(g.index(2, 1), 11);
    assert!(Grid2D::new(1, 3, (0.0, 1.0), (0.0, 1.0)).is_err());
    assert!(Grid2D::new(3, 3, (1.0, 1.0), (0.0, 1.0)).is_err());
    assert!(Field::new(g, vec![0.0; 14]).is_err());
    assert!(Field::new(g, vec![f64::NAN; 15]).is_err());
}

#[test]
fn cg_reports_non_convergence() {
    let b = vec![1.0, 2.0, 3.0];
    let mut x = vec![0.0; 3];
    let err = conjugate_gradient(|v, out| out.copy_from_slice(&[v[0], 2.0 * v[1], 3.0 * v[2]]), &b, &mut x, 1e-14, 1).unwrap_err();
    assert!(matches!(err, crate::Error::NoConvergence { iterations: 1, .. }), "{err}");
    let mut x = vec![0.0; 3];
    conjugate_gradient(|v, out| out.copy_from_slice(&[v[0], 2.0 * v[1], 3.0 * v[2]]), &b, &mut x, 1e-12, 10).unwrap();
    assert!((x[2] - 1.0).abs() < 1e-12);
}

#[test]
fn fem_zero_source_gives_zero() {
    let g = Grid2D::unit(9).unwrap();
    let kappa = g.sample(|s| 1.0 + s[0]);
    let u = steady_conduction_fem(&kappa, 0.0).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
}

#[test]
fn fem_rejects_non_positive_conductivity() {
    let g = Grid2D::unit(5).unwrap();
    let mut kappa = Field::new(g, vec![1.0; 25]).unwrap();
    kappa.values[12] = 0.0;
    assert!(steady_conduction_fem(&kappa, 1.0).is_err());
}

fn manufactured_error(n: usize) -> f64 {
    let g = Grid2D::unit(n).unwrap();
    let exact = g.sample(|s| (PI * s[0]).sin() * (PI * s[1]).sin());
    let b = g.sample(|s| 2.0 * PI * PI * (PI * s[0]).sin() * (PI * s[1]).sin());
    let u = steady_conduction_fem_source(&Field::new(g, vec![1.0; g.len()]).unwrap(), &b).unwrap();
    let diff = Field::new(g, u.values.iter().zip(&exact.values).map(|(a, b)| a - b).collect()).unwrap();
    diff.l2_norm()
}

#[test]
fn fem_manufactured_solution_converges_at_second_order() {
    let e: Vec<f64> = [17, 33, 65].iter().map(|&n| manufactured_error(n)).collect();
    for w in e.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&rate), "errors {e:?}");
    }
}

#[test]
fn fem_centered_inclusion_is_transpose_symmetric() {
    let g = Grid2D::unit(33).unwrap();
    let kappa = g.sample(|s| if (s[0] - 0.5).hypot(s[1] - 0.5) < 0.2 { 5.0 } else { 1.0 });
    let u = steady_conduction_fem(&kappa, 10.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..g.n2 {
        for j in 0..g.n1 {
            worst = worst.max((u.at(i, j) - u.at(j, i)).abs());
        }
    }
    // The checkerboard split maps onto itself under s1 <-> s2, so only the
    // solver tolerance separates the two halves.
    assert!(worst <= 1e-8 * u.max_abs(), "asymmetry {worst}");
}

#[test]
fn fem_stiffness_is_spd() {
    for seed in 0..4 {
        let g = Grid2D::unit(6).unwrap();
        let mut rng = stream(seed, "kappa", 0);
        let kappa = g.sample(|_| rng.random_range(0.1..10.0));
        let k = assemble_stiffness(&kappa).unwrap();
        let d = k.to_dense();
        let m = nalgebra::DMatrix::from_fn(k.n, k.n, |r, c| d[r][c]);
        assert!((&m - m.transpose()).abs().max() < 1e-12);
        let ev = m.symmetric_eigen().eigenvalues;
        assert!(ev.min() > 0.0, "min eigenvalue {}", ev.min());
    }
}

#[test]
fn triangulation_covers_the_square_once() {
    let g = Grid2D::unit(5).unwrap();
    let tris = triangulate(&g);
    assert_eq!(tris.len(), 32);
    let area: f64 = tris
        .iter()
        .map(|t| {
            let p = t.map(|k| g.point(k / g.n1, k % g.n1));
            0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        })
        .inspect(|&a| assert!(a > 0.0))
        .sum();
    assert!((area - 1.0).abs() < 1e-12);
}

#[test]
fn bump_peak_and_symmetry() {
    let g = Grid2D::heat(28).unwrap();
    let c = g.point(10, 13);
    let b = gaussian_bump(c, BUMP_SIGMA, &g).unwrap();
    assert!((b.at(10, 13) - 0.5699).abs() < 1e-4);
    let same = |a: f64, b: f64| assert!((a - b).abs() <= 1e-14 * a, "{a} vs {b}");
    same(b.at(10, 16), b.at(10, 10));
    same(b.at(7, 13), b.at(13, 13));
    same(b.at(13, 16), b.at(7, 10));
    assert!(gaussian_bump(c, 0.0, &g).is_err());
}

#[test]
fn bump_mass_matches_fine_quadrature() {
    let c = [2.0, 4.5];
    let coarse = gaussian_bump(c, BUMP_SIGMA, &Grid2D::heat(28).unwrap()).unwrap().integral();
    let fine = gaussian_bump(c, BUMP_SIGMA, &Grid2D::heat(541).unwrap()).unwrap().integral();
    assert!((coarse - fine).abs() / fine < 1e-3, "{coarse} vs {fine}");
    // Centered, the box truncates the bump beyond 4.5 sigma and the mass is
    // the full-plane value sqrt(2 pi) sigma.
    let centered = gaussian_bump([PI, PI], BUMP_SIGMA, &Grid2D::heat(28).unwrap()).unwrap().integral();
    assert!((centered - (2.0 * PI).sqrt() * BUMP_SIGMA).abs() < 1e-4);
}

proptest! {
    #[test]
    fn sine_transform_roundtrip(n1 in 3usize..9, n2 in 3usize..9, seed in 0u64..1000) {
        let g = Grid2D::new(n1, n2, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let mut u = random_field(g, seed);
        for i in 0..n2 {
            for j in 0..n1 {
                if g.is_boundary(i, j) {
                    u.values[g.index(i, j)] = 0.0;
                }
            }
        }
        let back = synthesize(&g, &analyze(&u));
        for (a, b) in back.values.iter().zip(&u.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_decreases_beyond_monotone_radius(
        kappa0 in 0.0f64..10.0,
        gx in -5.0f64..5.0,
        gy in -5.0f64..5.0,
        theta in 0.0f64..(2.0 * PI),
        du in -3.0f64..3.0,
        r in 1e-3f64..5.0,
    ) {
        let s0 = [0.3, -0.2];
        let r0 = kernel_monotone_radius(kappa0, [gx, gy], [theta.cos(), theta.sin()]).max(r);
        let at = |r: f64| {
            delta_kappa_kernel([s0[0] + r * theta.cos(), s0[1] + r * theta.sin()], s0, kappa0, [gx, gy], du)
                .unwrap()
                .abs()
        };
        let (a, b) = (at(r0), at(r0 * 1.5));
        prop_assert!(b <= a * (1.0 + 1e-12), "{a} then {b}");
    }
}

#[test]
fn kernel_scaling_laws() {
    let s0 = [1.0, 1.0];
    let pure = |r: f64| delta_kappa_kernel([1.0 + r, 1.0], s0, 2.0, [0.0, 0.0], 1.0).unwrap();
    assert!((pure(0.5) / pure(1.0) - 4.0).abs() < 1e-12);
    let grad = |r: f64| delta_kappa_kernel([1.0, 1.0 + r], s0, 0.0, [0.6, 0.8], 1.0).unwrap();
    assert!((grad(0.5) / grad(1.0) - 2.0).abs() < 1e-12);
    assert!(delta_kappa_kernel(s0, s0, 1.0, [0.0, 0.0], 1.0).is_err());
}

#[test]
fn kernel_matches_polar_closed_form() {
    // -dU (|grad k| cos(phi) / (2 pi r) - k0 / (2 pi r^2)), phi the angle between
    // the ray and grad kappa.
    let (k0, g, du) = (1.5, [0.3, -0.4], 2.0);
    let theta = 0.7f64;
    let phi = theta - (-0.4f64).atan2(0.3);
    for step in 1..=10 {
        let r = 0.25 * step as f64;
        let s = [r * theta.cos(), r * theta.sin()];
        let v = delta_kappa_kernel(s, [0.0, 0.0], k0, g, du).unwrap();
        let oracle = -du * (0.5 * phi.cos() / (2.0 * PI * r) - k0 / (2.0 * PI * r * r));
        assert!((v - oracle).abs() < 1e-12 * oracle.abs().max(1.0), "r {r}: {v} vs {oracle}");
    }
}

#[test]
fn inverse_of_zero_is_zero() {
    let g = Grid2D::heat(28).unwrap();
    let u = fft_regularized_inverse(&Field::zeros(g), 0.2, 1.0, 25).unwrap();
    assert!(u.values.iter().all(|&v| v == 0.0));
    assert!(fft_regularized_inverse(&Field::zeros(g), 0.2, 1.0, 0).is_err());
}

#[test]
fn extended_grid_geometry() {
    let g = Grid2D::heat(28).unwrap();
    let e = ExtendedGrid::new(g).unwrap();
    assert_eq!(e.grid.n1, 82);
    assert!((e.grid.a1 + 2.0 * PI).abs() < 1e-12 && (e.grid.b1 - 4.0 * PI).abs() < 1e-12);
    assert!((e.grid.h1() - g.h1()).abs() < 1e-15);
    let u = random_field(g, 3);
    assert_eq!(e.restrict(&e.embed(&u).unwrap()).unwrap(), u);
}

/// Random combination of the sine modes `k, l <= modes` of the grid's box.
fn bandlimited(grid: &Grid2D, modes: usize, seed: u64) -> Field {
    let mut rng = stream(seed, "band", 0);
    let (m1, m2) = (grid.n1 - 2, grid.n2 - 2);
    let c: Vec<Vec<f64>> = (0..m2)
        .map(|l| (0..m1).map(|k| if k < modes && l < modes { rng.random_range(-1.0..1.0) } else { 0.0 }).collect())
        .collect();
    synthesize(grid, &c)
}

#[test]
fn spectral_roundtrip_on_extended_box() {
    let e = ExtendedGrid::new(Grid2D::heat(28).unwrap()).unwrap();
    for seed in 0..3 {
        let u0 = bandlimited(&e.grid, 25, seed);
        let ut = sine_propagate(&u0, 0.2, 1.0, None);
        let back = sine_propagate(&ut, 0.2, -1.0, Some(25));
        let err = back.values.iter().zip(&u0.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let norm = u0.values.iter().map(|b| b * b).sum::<f64>();
        assert!((err / norm).sqrt() < 1e-8);
    }
}

#[test]
fn bump_tightens_backward_in_time() {
    let g = Grid2D::heat(28).unwrap();
    let l = 2.0 * PI;
    for c in [[0.5 * l, 0.5 * l], [0.0, 0.0], [0.25 * l, 0.75 * l], [l, 0.5 * l], [0.75 * l, 0.25 * l]] {
        let ut = gaussian_bump(c, BUMP_SIGMA, &g).unwrap();
        let u0 = fft_regularized_inverse(&ut, 0.2, 1.0, 25).unwrap();
        let (before, after) = (second_moment(&ut, c), second_moment(&u0, c));
        assert!(after < before, "center {c:?}: {after} >= {before}");
    }
}

#[test]
fn backward_solve_is_consistent_with_fd_under_refinement() {
    let errs: Vec<f64> = [(15, 25), (29, 100), (57, 400)]
        .iter()
        .map(|&(n, steps)| {
            let g = Grid2D::heat(n).unwrap();
            let u0 = bandlimited(&g, 3, 9);
            let cfg = HeatConfig { steps, ..HeatConfig::new(0.2) };
            let ut = heat_forward_fd(&u0, &cfg).unwrap();
            let back = sine_propagate(&ut, 0.2, -1.0, Some(3));
            let diff = Field::new(g, back.values.iter().zip(&u0.values).map(|(a, b)| a - b).collect()).unwrap();
            diff.l2_norm() / u0.l2_norm()
        })
        .collect();
    assert!(errs[0] < 0.05 && errs[1] < errs[0] / 2.0 && errs[2] < errs[1] / 2.0, "{errs:?}");
}

#[test]
fn modal_heat_matches_iterative_solver() {
    let g = Grid2D::heat(16).unwrap();
    let u0 = random_field(g, 4);
    for source in [0.0, 0.5] {
        let cfg = HeatConfig { steps: 20, source, ..HeatConfig::new(0.64) };
        let a = heat_forward_fd(&u0, &cfg).unwrap();
        let b = heat_forward_fd_modal(&u0, &cfg).unwrap();
        let worst = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(worst < 1e-8 * a.max_abs().max(1.0), "source {source}: {worst}");
    }
}
