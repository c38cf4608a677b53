mod common;

use common::{fixtures, p};
use lostpath::behaviors::nearest_k_edges;
use lostpath::geom::Point2;
use lostpath::gis::{
    load_path_network, load_raster, CellIndex, FoundClassifier, LandCover, LandCoverCategory, PathGraph, RasterGrid,
    TerrainStack,
};
use lostpath::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seg_dist(q: Point2<f64>, a: Point2<f64>, b: Point2<f64>) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((q.x - a.x) * dx + (q.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (q.x - (a.x + t * dx)).hypot(q.y - (a.y + t * dy))
}

fn edge_dist(q: Point2<f64>, line: &[Point2<f64>]) -> f64 {
    line.windows(2).map(|w| seg_dist(q, w[0], w[1])).fold(f64::INFINITY, f64::min)
}

fn island() -> (TerrainStack<f64>, PathGraph<f64>) {
    let dir = fixtures().join("island");
    let t = TerrainStack::load_dir(&dir).unwrap();
    let g = load_path_network(dir.join("network.geojson")).unwrap();
    (t, g)
}

#[test]
fn figure_network_fixture_topology() {
    let g: PathGraph<f64> = load_path_network(fixtures().join("junction_network.geojson")).unwrap();
    assert_eq!(g.node_count(), 4);
    assert_eq!(g.edge_count(), 4);
    let mut degrees: Vec<usize> = g.nodes().iter().map(|n| g.adjacency(n.id).len()).collect();
    degrees.sort();
    assert_eq!(degrees, vec![1, 2, 2, 3]);
}

#[test]
fn nearest_edges_match_exhaustive_scan() {
    let (_, g) = island();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        let q = p(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
        let mut want: Vec<(f64, usize)> = g.edges().map(|e| (edge_dist(q, &e.polyline), e.id.0)).collect();
        want.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got = nearest_k_edges(q, &g, 3).unwrap();
        assert_eq!(got.len(), 3);
        for (n, w) in got.iter().zip(&want) {
            assert!((n.distance - w.0).abs() < 1e-9, "{} vs {}", n.distance, w.0);
            assert!((n.point.distance(q) - n.distance).abs() < 1e-9);
        }
        assert_eq!(got[0].edge.0, want[0].1);
    }
}

#[test]
fn classification_matches_rule_by_rule_oracle() {
    let (t, g) = island();
    let classifier = FoundClassifier::new(&t, &g);
    let cs = t.cell_size();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..4000 {
        // every fourth point is pulled onto a road so the road arm is exercised
        let q = if i % 4 == 0 {
            let e = g.edges().nth(rng.random_range(0..g.edge_count())).unwrap();
            let k = rng.random_range(0..e.polyline.len() - 1);
            let a = e.polyline[k].lerp(e.polyline[k + 1], rng.random::<f64>());
            p(a.x + rng.random_range(-8.0..8.0), a.y + rng.random_range(-8.0..8.0))
        } else {
            p(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0))
        };
        let Some(cell) = t.grid().world_to_cell(q) else { continue };
        let near_road = g.edges().any(|e| edge_dist(q, &e.polyline) <= cs);
        let cover = LandCover::from_id(t.land_cover.at(cell).round() as i64);
        let wet = t.water_surface.at(cell) != 0.0 || cover == Some(LandCover::Water);
        let want = if near_road {
            LandCoverCategory::Road
        } else if wet {
            LandCoverCategory::Water
        } else if cover == Some(LandCover::Urban) {
            LandCoverCategory::Building
        } else if cover == Some(LandCover::Woodland) {
            LandCoverCategory::Trees
        } else {
            LandCoverCategory::OpenGround
        };
        assert_eq!(classifier.classify(q).unwrap(), want, "{q:?}");
        seen.insert(want);
    }
    assert_eq!(seen.len(), 5, "every category occurs on the island");
}

#[test]
fn classifying_off_grid_is_an_error() {
    let (t, g) = island();
    assert!(matches!(FoundClassifier::new(&t, &g).classify(p(-5.0, 10.0)), Err(Error::OutOfBounds { .. })));
}

#[test]
fn ascii_grid_round_trip_is_exact() {
    let dem: RasterGrid<f64> = load_raster(fixtures().join("island").join("dem.asc")).unwrap();
    let again = RasterGrid::<f64>::from_ascii(&dem.to_ascii()).unwrap();
    assert_eq!(dem, again);
    assert_eq!(dem.n_cols(), 200);
    assert_eq!(dem.cell_size(), 5.0);
}

#[test]
fn misaligned_layers_are_rejected() {
    let a = RasterGrid::filled(10, 10, 5.0, p(0.0, 0.0), -9999.0, 0.0).unwrap();
    let b = RasterGrid::filled(10, 10, 5.0, p(5.0, 0.0), -9999.0, 0.0).unwrap();
    let r = TerrainStack::new(a.clone(), a.clone(), b, a.clone(), a.clone());
    assert!(matches!(r, Err(Error::Misaligned(_))));
}

#[test]
fn missing_terrain_layer_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    match TerrainStack::<f64>::load_dir(dir.path()) {
        Err(Error::MissingInput(path)) => assert!(path.starts_with(dir.path())),
        other => panic!("expected a missing-input error, got {other:?}"),
    }
}

#[test]
fn island_layers_are_consistent() {
    let (t, _) = island();
    for c in t.grid().cells() {
        let surface = t.water_surface.at(c);
        if surface != 0.0 {
            assert_eq!(t.land_cover.at(c), f64::from(LandCover::Water.id()), "{c:?}");
        }
    }
    assert!(t.land_cover_at(CellIndex::new(100, 100)).is_some());
}
