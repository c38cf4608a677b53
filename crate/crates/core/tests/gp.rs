mod common;

use std::sync::OnceLock;

use common::{matern_bessel, p, sparse_heatmap_16};
use lostpath::gis::{CellIndex, RasterGrid};
use lostpath::gp::{
    exact_mll, kiss_interp_weights, kiss_mll, matern25_of_r, normalize_heatmap, posterior_grid, sample_pls, train,
    GpHyper, GpModel, InducingLattice, Matern52, TrainConfig,
};
use lostpath::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_matches_bessel_quadrature() {
    for i in 0..200 {
        let r = 0.01 + i as f64 * 0.03;
        let want = matern_bessel(r, 1.7);
        let got = matern25_of_r(r, 1.7);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-12), "r={r}: {got} vs {want}");
    }
    assert_eq!(matern25_of_r(0.0, 1.7), 1.7);
}

#[test]
fn anisotropic_scaling_uses_each_axis() {
    let k = Matern52::new([0.5, 2.0], 1.0).unwrap();
    let a = [0.0, 0.0];
    assert!((k.eval(a, [0.5, 0.0]) - matern_bessel(1.0, 1.0)).abs() < 1e-9);
    assert!((k.eval(a, [0.0, 2.0]) - matern_bessel(1.0, 1.0)).abs() < 1e-9);
    assert!(Matern52::new([0.0, 1.0], 1.0).is_err());
}

fn kiss_kernel(k: &Matern52<f64>, lattice: &InducingLattice, a: [f64; 2], b: [f64; 2]) -> f64 {
    let wa = kiss_interp_weights(a, lattice).unwrap();
    let wb = kiss_interp_weights(b, lattice).unwrap();
    let mut s = 0.0;
    for &(i, x) in &wa {
        for &(j, y) in &wb {
            s += x * y * k.eval(lattice.point(i), lattice.point(j));
        }
    }
    s
}

#[test]
fn lattice_kernel_tracks_exact_kernel() {
    let lattice = InducingLattice::covering([0.0, 0.0], [1.0, 1.0], [24, 24]).unwrap();
    let k = Matern52::new([0.25, 0.35], 1.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let a = [rng.random::<f64>(), rng.random::<f64>()];
        let b = [rng.random::<f64>(), rng.random::<f64>()];
        let exact = k.eval(a, b);
        let approx = kiss_kernel(&k, &lattice, a, b);
        worst = worst.max((approx - exact).abs() / exact);
    }
    assert!(worst < 0.02, "worst relative error {worst}");
}

#[test]
fn interpolation_weights_reproduce_lattice_points_and_sum_to_one() {
    let lattice = InducingLattice::covering([0.0, 0.0], [1.0, 1.0], [10, 10]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let q = [rng.random::<f64>(), rng.random::<f64>()];
        let w = kiss_interp_weights(q, &lattice).unwrap();
        assert_eq!(w.len(), 16);
        assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-12);
        // cubic convolution reproduces linear functions
        let x: f64 = w.iter().map(|&(i, c)| c * lattice.point(i)[0]).sum();
        assert!((x - q[0]).abs() < 1e-12);
    }
    let inner = (0..lattice.len())
        .find(|&i| lattice.point(i).iter().all(|v| (0.3..0.7).contains(v)))
        .unwrap();
    let w = kiss_interp_weights(lattice.point(inner), &lattice).unwrap();
    assert!(w.iter().any(|&(i, c)| i == inner && (c - 1.0).abs() < 1e-12));
}

fn fit_16() -> GpModel<f64> {
    train(normalize_heatmap(&sparse_heatmap_16()).unwrap(), &TrainConfig::default()).unwrap()
}

fn trained_16() -> &'static GpModel<f64> {
    static MODEL: OnceLock<GpModel<f64>> = OnceLock::new();
    MODEL.get_or_init(fit_16)
}

#[test]
fn posterior_reproduces_training_data_within_noise() {
    let model = trained_16();
    let (points, y) = model.data.training_set();
    let sd = model.noise_std();
    let inside = points
        .iter()
        .zip(&y)
        .filter(|(q, y)| (model.mean_normalized(**q).unwrap() - **y).abs() <= 2.0 * sd)
        .count();
    assert!(inside as f64 >= 0.95 * points.len() as f64, "{inside}/{}", points.len());
}

#[test]
fn accepted_steps_never_lower_the_likelihood() {
    let model = trained_16();
    assert!(model.mll_history.len() > 1);
    for w in model.mll_history.windows(2) {
        assert!(w[1] >= w[0], "{} -> {}", w[0], w[1]);
    }
    let best = exact_mll(&model.data, model.hyper).unwrap();
    assert!((best - model.final_mll.unwrap()).abs() < 1e-8 * best.abs().max(1.0));
}

#[test]
fn lattice_likelihood_is_close_to_exact() {
    let data = normalize_heatmap(&sparse_heatmap_16()).unwrap();
    let h = GpHyper {
        length_scale: [0.2, 0.2],
        output_scale: 0.05,
        noise: 0.005,
    };
    let e = exact_mll(&data, h).unwrap();
    let k = kiss_mll(&data, h, [40, 40]).unwrap();
    assert!((e - k).abs() < 0.02 * e.abs(), "{e} vs {k}");
}

#[test]
fn training_is_deterministic() {
    let a = trained_16();
    let b = fit_16();
    assert_eq!(a.hyper, b.hyper);
    assert_eq!(a.mll_history, b.mll_history);
}

#[test]
fn upsampling_multiplies_resolution() {
    let model = trained_16();
    let out = posterior_grid(model, 20.0).unwrap();
    assert_eq!((out.n_cols(), out.n_rows()), (80, 80));
    assert_eq!(out.len(), 25 * model.data.grid.len());
    assert_eq!(out.origin(), model.data.grid.origin());
    assert!(out.values().iter().all(|&v| v >= 0.0));
    // the strongest cluster stays the hot spot
    let peak = out
        .cells()
        .max_by(|&a, &b| out.at(a).total_cmp(&out.at(b)))
        .map(|c| out.cell_to_world(c))
        .unwrap();
    assert!(peak.distance(p(500.0, 500.0)) < 150.0, "{peak:?}");
}

#[test]
fn constant_heatmap_normalizes_to_half() {
    let g = RasterGrid::filled(4, 4, 100.0, p(0.0, 0.0), -9999.0, 3.0).unwrap();
    let n = normalize_heatmap(&g).unwrap();
    assert!(n.grid.values().iter().all(|&v| v == 0.5));
    assert_eq!(n.denormalize(), g);
}

#[test]
fn all_nodata_heatmap_is_empty_input() {
    let g = RasterGrid::filled(4, 4, 100.0, p(0.0, 0.0), -9999.0, -9999.0).unwrap();
    assert!(matches!(normalize_heatmap(&g), Err(Error::EmptyInput(_))));
}

#[test]
fn start_sampler_only_draws_positive_cells() {
    let mut g = RasterGrid::filled(5, 5, 20.0, p(0.0, 0.0), -9999.0, 0.0).unwrap();
    g.set(CellIndex::new(1, 1), 1.0);
    g.set(CellIndex::new(3, 4), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws = sample_pls(&g, 40_000, &mut rng).unwrap();
    let hot = draws.iter().filter(|q| **q == g.cell_to_world(CellIndex::new(3, 4))).count();
    assert_eq!(
        draws.iter().filter(|q| **q == g.cell_to_world(CellIndex::new(1, 1))).count() + hot,
        draws.len()
    );
    let f = hot as f64 / draws.len() as f64;
    assert!((f - 0.75).abs() < 0.01, "{f}");
    let empty = g.like(0.0);
    assert!(matches!(sample_pls(&empty, 1, &mut rng), Err(Error::EmptyInput(_))));
}
