use std::collections::BTreeMap;

use proptest::prelude::*;
use wclim_core::aggregate::weighted_aggregate;
use wclim_core::boundaries::{AdminLevel, CoverageMatrix};
use wclim_core::grid::{block_aggregate, Grid, GridSpec};
use wclim_core::weights::{
    concurrent_base_year, nightlight_weight, unweighted_layer, WeightKind, WeightLayer, WeightScheme,
};

const ROWS: usize = 6;
const COLS: usize = 8;

fn spec() -> GridSpec {
    GridSpec::new(62.75, -3.75, 0.5, ROWS, COLS).unwrap()
}

#[derive(Debug, Clone)]
struct Case {
    plane: Vec<f64>,
    weights: Vec<f64>,
    units: BTreeMap<String, Vec<(usize, f64)>>,
}

fn case_strategy() -> impl Strategy<Value = Case> {
    let n = ROWS * COLS;
    let plane = prop::collection::vec(prop_oneof![9 => -50.0f64..50.0, 1 => Just(f64::NAN)], n);
    let weights = prop::collection::vec(prop_oneof![6 => 0.0f64..1e4, 2 => Just(0.0), 1 => Just(f64::NAN)], n);
    let unit = prop::collection::btree_map(0..n, 0.01f64..=1.0, 1..12)
        .prop_map(|m| m.into_iter().collect::<Vec<_>>());
    let units = prop::collection::vec(unit, 1..5).prop_map(|us| {
        us.into_iter()
            .enumerate()
            .map(|(i, cells)| (format!("U{i}"), cells))
            .collect()
    });
    (plane, weights, units).prop_map(|(plane, weights, units)| Case { plane, weights, units })
}

fn layer(kind: WeightKind, values: Vec<f64>) -> WeightLayer {
    let scheme = if kind == WeightKind::Unweighted {
        WeightScheme::unweighted()
    } else {
        WeightScheme::new(kind, Some(2015)).unwrap()
    };
    WeightLayer::new(scheme, Grid::new(spec(), values, "w").unwrap()).unwrap()
}

fn coverage(units: &BTreeMap<String, Vec<(usize, f64)>>) -> CoverageMatrix {
    CoverageMatrix::from_entries(AdminLevel::Gadm1, spec(), units.clone()).unwrap()
}

/// Two-pass area-weighted mean: first the total mass, then the normalized sum.
fn two_pass_area_mean(plane: &[f64], cells: &[(usize, f64)]) -> Option<f64> {
    let g = spec();
    let mass = |cell: usize, f: f64| {
        let (r, _) = g.row_col(cell);
        let lat = g.lat_center(r).to_radians();
        g.resolution * g.resolution * lat.cos() * f
    };
    let total: f64 = cells
        .iter()
        .filter(|(c, _)| !plane[*c].is_nan())
        .map(|&(c, f)| mass(c, f))
        .sum();
    if total <= 0.0 {
        return None;
    }
    Some(
        cells
            .iter()
            .filter(|(c, _)| !plane[*c].is_nan())
            .map(|&(c, f)| mass(c, f) / total * plane[c])
            .sum(),
    )
}

/// Agreement to `rel` relative to the magnitude of the data, so cancellation
/// near zero does not turn rounding noise into a large relative error.
fn close(a: Option<f64>, b: Option<f64>, rel: f64, scale: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= rel * a.abs().max(b.abs()).max(scale),
        (None, None) => true,
        _ => false,
    }
}

fn data_scale(plane: &[f64], cells: &[(usize, f64)]) -> f64 {
    cells
        .iter()
        .map(|&(c, _)| plane[c].abs())
        .filter(|v| !v.is_nan())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn result_is_a_convex_combination(case in case_strategy()) {
        let w = layer(WeightKind::Population, case.weights.clone());
        let out = weighted_aggregate(&case.plane, &coverage(&case.units), &w).unwrap();
        for (unit, cells) in &case.units {
            let Some(y) = out[unit] else { continue };
            let contributing: Vec<f64> = cells
                .iter()
                .filter(|(c, _)| !case.plane[*c].is_nan() && case.weights[*c] > 0.0)
                .map(|(c, _)| case.plane[*c])
                .collect();
            let lo = contributing.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = contributing.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(y >= lo && y <= hi, "{y} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn scaling_weights_changes_nothing(case in case_strategy(), c in 1e-6f64..1e6) {
        let w = layer(WeightKind::Nightlight, case.weights.clone());
        let cov = coverage(&case.units);
        let a = weighted_aggregate(&case.plane, &cov, &w).unwrap();
        let b = weighted_aggregate(&case.plane, &cov, &w.scaled(c).unwrap()).unwrap();
        for (unit, y) in &a {
            prop_assert!(close(*y, b[unit], 1e-12, data_scale(&case.plane, &case.units[unit])), "{unit}: {y:?} vs {:?}", b[unit]);
        }
    }

    #[test]
    fn unweighted_matches_two_pass_oracle(case in case_strategy()) {
        let cov = coverage(&case.units);
        let out = weighted_aggregate(&case.plane, &cov, &unweighted_layer(&spec())).unwrap();
        for (unit, cells) in &case.units {
            let oracle = two_pass_area_mean(&case.plane, cells);
            prop_assert!(close(out[unit], oracle, 1e-12, data_scale(&case.plane, cells)), "{unit}: {:?} vs {oracle:?}", out[unit]);
        }
    }

    #[test]
    fn concentrated_weight_reproduces_the_cell(case in case_strategy(), pick in any::<prop::sample::Index>()) {
        for (unit, cells) in &case.units {
            let (cell, _) = cells[pick.index(cells.len())];
            let mut weights = vec![0.0; ROWS * COLS];
            weights[cell] = 3.7;
            let cov = coverage(&BTreeMap::from([(unit.clone(), cells.clone())]));
            let out = weighted_aggregate(&case.plane, &cov, &layer(WeightKind::Cropland, weights)).unwrap();
            let x = case.plane[cell];
            if x.is_nan() {
                prop_assert_eq!(out[unit], None);
            } else {
                prop_assert_eq!(out[unit], Some(x));
            }
        }
    }

    #[test]
    fn storage_order_does_not_matter(case in case_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = layer(WeightKind::Population, case.weights.clone());
        let base = weighted_aggregate(&case.plane, &coverage(&case.units), &w).unwrap();
        let shuffled: BTreeMap<String, Vec<(usize, f64)>> = case
            .units
            .iter()
            .map(|(u, cells)| {
                let mut cells = cells.clone();
                cells.shuffle(&mut rng);
                (u.clone(), cells)
            })
            .collect();
        let other = weighted_aggregate(&case.plane, &coverage(&shuffled), &w).unwrap();
        for (unit, y) in &base {
            prop_assert!(close(*y, other[unit], 1e-12, data_scale(&case.plane, &case.units[unit])));
        }
    }

    #[test]
    fn nightlight_weights_never_exceed_raw_block_means(
        dn in prop::collection::vec(0u8..=63, 36),
    ) {
        let fine_spec = GridSpec::new(1.4, 0.1, 0.2, 6, 6).unwrap();
        let fine = Grid::new(fine_spec, dn.iter().map(|&d| f64::from(d)).collect(), "DN").unwrap();
        let target = GridSpec::new(1.2, 0.3, 0.6, 2, 2).unwrap();
        let w = nightlight_weight(&fine, &target, 2015).unwrap();
        let raw = block_aggregate(&fine, 3).unwrap();
        for (a, b) in w.grid.values().iter().zip(raw.values()) {
            prop_assert!(*a >= 0.0 && a <= b, "{a} > {b}");
        }
    }

    #[test]
    fn concurrent_base_year_is_decade_start(year in 1900i32..=2029) {
        let base = concurrent_base_year(year).unwrap();
        prop_assert_eq!(base % 10, 0);
        prop_assert!(base <= year && year <= base + 9);
        prop_assert_eq!(concurrent_base_year(base).unwrap(), base);
    }
}

#[test]
fn negative_weights_are_rejected() {
    let g = Grid::new(spec(), vec![-1.0; ROWS * COLS], "w").unwrap();
    assert!(WeightLayer::new(WeightScheme::new(WeightKind::Population, Some(2000)).unwrap(), g).is_err());
}
