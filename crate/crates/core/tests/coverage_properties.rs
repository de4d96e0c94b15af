use proptest::prelude::*;
use wclim_core::boundaries::{
    build_coverage, polygon_cell_fraction, AdminLevel, AdminUnit, MultiPolygon, Polygon, Ring,
};
use wclim_core::grid::GridSpec;

/// Star-shaped simple polygon around `(cx, cy)`.
fn star(cx: f64, cy: f64, radii: &[f64], jitter: &[f64]) -> Ring {
    let n = radii.len();
    let pts = (0..n)
        .map(|k| {
            let theta = (k as f64 + 0.8 * jitter[k]) / n as f64 * std::f64::consts::TAU;
            [cx + radii[k] * theta.cos(), cy + radii[k] * theta.sin()]
        })
        .collect();
    Ring(pts)
}

fn star_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (5usize..14).prop_flat_map(|n| {
        (
            prop::collection::vec(0.3f64..2.4, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
}

fn grid() -> GridSpec {
    // 10×10 cells of 0.5° covering lon [0, 5], lat [0, 5].
    GridSpec::new(4.75, 0.25, 0.5, 10, 10).unwrap()
}

fn unit(ring: Ring) -> AdminUnit {
    AdminUnit::new("U", AdminLevel::Gadm0, "U", MultiPolygon(vec![Polygon::new(ring, vec![])])).unwrap()
}

fn fractions(geometry: &MultiPolygon, grid: &GridSpec) -> Vec<f64> {
    (0..grid.n_rows)
        .flat_map(|r| (0..grid.n_cols).map(move |c| (r, c)))
        .map(|(r, c)| polygon_cell_fraction(geometry, &grid.cell_rect(r, c)).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn area_is_conserved((radii, jitter) in star_strategy()) {
        let ring = star(2.5, 2.5, &radii, &jitter);
        let u = unit(ring);
        let g = grid();
        let cov = build_coverage(AdminLevel::Gadm0, std::slice::from_ref(&u), &g).unwrap();
        let cell = g.resolution * g.resolution;
        let covered: f64 = cov.cells("U").unwrap().iter().map(|&(_, f)| f * cell).sum();
        let area = u.geometry.area();
        prop_assert!((covered - area).abs() <= 1e-6 * area, "{covered} vs {area}");
    }

    #[test]
    fn reversal_and_rotation_do_not_change_fractions(
        (radii, jitter) in star_strategy(),
        shift in 0usize..14,
    ) {
        let ring = star(2.5, 2.5, &radii, &jitter);
        let g = grid();
        let base = fractions(&MultiPolygon(vec![Polygon::new(ring.clone(), vec![])]), &g);

        let reversed = ring.reversed();
        let mut rotated = ring.0.clone();
        let k = shift % rotated.len();
        rotated.rotate_left(k);
        for variant in [reversed, Ring(rotated)] {
            let other = fractions(&MultiPolygon(vec![Polygon::new(variant, vec![])]), &g);
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn fractions_are_translation_equivariant(
        (radii, jitter) in star_strategy(),
        dlon in -40.0f64..40.0,
        dlat in -30.0f64..30.0,
    ) {
        let geometry = MultiPolygon(vec![Polygon::new(star(2.5, 2.5, &radii, &jitter), vec![])]);
        let g = grid();
        let moved_grid = GridSpec::new(g.lat_origin + dlat, g.lon_origin + dlon, g.resolution, g.n_rows, g.n_cols).unwrap();
        let base = fractions(&geometry, &g);
        let moved = fractions(&geometry.translated(dlon, dlat), &moved_grid);
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn fractions_lie_in_unit_interval((radii, jitter) in star_strategy()) {
        let u = unit(star(2.5, 2.5, &radii, &jitter));
        let cov = build_coverage(AdminLevel::Gadm0, std::slice::from_ref(&u), &grid()).unwrap();
        for &(_, f) in cov.cells("U").unwrap() {
            prop_assert!(f > 0.0 && f <= 1.0);
        }
    }
}

#[test]
fn hole_subtracts_from_coverage() {
    let outer = Ring(vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
    let hole = Ring(vec![[0.5, 0.5], [0.5, 1.0], [1.0, 1.0], [1.0, 0.5]]);
    let u = AdminUnit::new("H", AdminLevel::Gadm0, "H", MultiPolygon(vec![Polygon::new(outer, vec![hole])])).unwrap();
    let g = GridSpec::new(1.75, 0.25, 0.5, 4, 4).unwrap();
    let cov = build_coverage(AdminLevel::Gadm0, &[u], &g).unwrap();
    let cells = cov.cells("H").unwrap();
    assert_eq!(cells.len(), 15);
    assert!(cells.iter().all(|&(_, f)| f == 1.0));
    assert!(!cells.iter().any(|&(c, _)| c == g.index(2, 1)));
}

#[test]
fn west_half_rectangle_gives_one_half() {
    let g = GridSpec::new(0.25, 0.25, 0.5, 1, 1).unwrap();
    let west = MultiPolygon(vec![Polygon::new(Ring(vec![[0.0, 0.0], [0.25, 0.0], [0.25, 0.5], [0.0, 0.5]]), vec![])]);
    assert!((polygon_cell_fraction(&west, &g.cell_rect(0, 0)).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn duplicate_units_collide() {
    let ring = Ring(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]);
    let u = unit(ring);
    assert!(matches!(
        build_coverage(AdminLevel::Gadm0, &[u.clone(), u], &grid()),
        Err(wclim_core::Error::KeyCollision(_))
    ));
}
