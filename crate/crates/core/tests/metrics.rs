use lostpath::gis::LandCoverCategory::{self, *};
use lostpath::metrics::{compare_to_reference, skl, skl_weights, CategoryHistogram, SMOOTHING_EPS};
use lostpath::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hist<R: Rng>(rng: &mut R) -> CategoryHistogram {
    // roughly one in six bins is empty so smoothing gets exercised
    let pairs: Vec<(LandCoverCategory, u64)> = LandCoverCategory::ALL
        .iter()
        .map(|&c| (c, if rng.random_ratio(1, 6) { 0 } else { rng.random_range(1..500) }))
        .collect();
    if pairs.iter().all(|p| p.1 == 0) {
        return CategoryHistogram::uniform();
    }
    CategoryHistogram::from_counts(&pairs)
}

#[test]
fn divergence_properties_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let p = random_hist(&mut rng);
        let q = random_hist(&mut rng);
        let pq = skl(&p, &q).unwrap();
        let qp = skl(&q, &p).unwrap();
        assert!(pq >= 0.0);
        assert!((pq - qp).abs() <= 1e-12 * pq.max(1.0));
        assert!(skl(&p, &p).unwrap().abs() <= 1e-12);
        let scaled = CategoryHistogram::from_counts(&p.counts.iter().map(|(&c, &n)| (c, 7 * n)).collect::<Vec<_>>());
        assert!((skl(&scaled, &q).unwrap() - pq).abs() <= 1e-12 * pq.max(1.0));
    }
}

#[test]
fn three_bins_by_hand() {
    let p = [0.5, 0.3, 0.2];
    let q = [0.2, 0.3, 0.5];
    let manual = 0.5 * (0.5f64 / 0.2).ln() + 0.3 * (1.0f64).ln() + 0.2 * (0.2f64 / 0.5).ln()
        + 0.2 * (0.2f64 / 0.5).ln()
        + 0.3 * (1.0f64).ln()
        + 0.5 * (0.5f64 / 0.2).ln();
    assert!((skl_weights(&p, &q).unwrap() - manual).abs() < 1e-12);
}

#[test]
fn empty_bins_are_smoothed_not_infinite() {
    let v = skl_weights(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!(v.is_finite());
    let e = SMOOTHING_EPS / (1.0 + SMOOTHING_EPS);
    let a = 1.0 / (1.0 + SMOOTHING_EPS);
    let manual = 2.0 * (a - e) * (a / e).ln();
    assert!((v - manual).abs() < 1e-9 * manual);
}

#[test]
fn identical_histograms_compare_to_zero() {
    let r = CategoryHistogram::hiker_reference();
    let rep = compare_to_reference(&r, &r).unwrap();
    assert_eq!(rep.skl, 0.0);
    assert!(rep.categories.iter().all(|c| c.difference_points == 0.0));
}

#[test]
fn open_ground_gap_in_points() {
    let found = CategoryHistogram::from_counts(&[
        (OpenGround, 3836),
        (Road, 3000),
        (Building, 2000),
        (Trees, 1000),
        (Water, 164),
    ]);
    let reference = CategoryHistogram::from_counts(&[
        (OpenGround, 408),
        (Road, 300),
        (Building, 200),
        (Trees, 80),
        (Water, 12),
    ]);
    let rep = compare_to_reference(&found, &reference).unwrap();
    let og = rep.categories.iter().find(|c| c.category == OpenGround).unwrap();
    assert!((og.found_percent - 38.36).abs() < 1e-9);
    assert!((og.reference_percent - 40.8).abs() < 1e-9);
    assert!((og.difference_points.abs() - 2.44).abs() < 1e-9);
}

#[test]
fn differences_match_direct_subtraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let f = random_hist(&mut rng);
        let r = random_hist(&mut rng);
        let rep = compare_to_reference(&f, &r).unwrap();
        for c in &rep.categories {
            let fp = 100.0 * f.count(c.category) as f64 / f.total() as f64;
            let rp = 100.0 * r.count(c.category) as f64 / r.total() as f64;
            assert_eq!(c.difference_points, fp - rp);
        }
        assert_eq!(rep.skl, skl(&f, &r).unwrap());
    }
}

#[test]
fn mismatched_categories_are_rejected() {
    let a = CategoryHistogram::hiker_reference();
    let b = CategoryHistogram::from_counts(&[(OpenGround, 1), (Road, 1)]);
    assert!(matches!(compare_to_reference(&a, &b), Err(Error::CategoryMismatch(_))));
    assert!(matches!(CategoryHistogram::parse_csv("swamp,3\n"), Err(Error::CategoryMismatch(_))));
}

#[test]
fn reference_csv_round_trips() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/hiker_reference.csv")).unwrap();
    let h = CategoryHistogram::parse_csv(&text).unwrap();
    assert_eq!(h, CategoryHistogram::hiker_reference());
    assert_eq!(h.total(), 130);
    assert!((h.percent(OpenGround) - 40.769_230_769).abs() < 1e-6);
}

#[test]
fn uniform_baseline_is_reported_alongside() {
    let r = CategoryHistogram::hiker_reference();
    let rep = compare_to_reference(&CategoryHistogram::uniform(), &r).unwrap();
    assert!((rep.uniform_baseline_skl - rep.skl).abs() < 1e-15);
}
