use proptest::prelude::*;
use wclim_core::grid::{align_half_offset, align_to, block_aggregate, cell_area, Grid, GridSpec};

fn fine_grid(rows: usize, cols: usize, values: Vec<f64>) -> Grid {
    let spec = GridSpec::new(10.0 - 0.25, 20.0 + 0.25, 0.5, rows, cols).unwrap();
    Grid::new(spec, values, "x").unwrap()
}

fn value_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![
        8 => -1e3f64..1e3,
        1 => Just(f64::NAN),
    ]
}

fn range_of(values: &[f64]) -> Option<(f64, f64)> {
    values
        .iter()
        .filter(|v| !v.is_nan())
        .fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

proptest! {
    #[test]
    fn cell_area_is_symmetric_about_the_equator(lat in -90.0f64..=90.0, res in prop::sample::select(vec![0.25, 0.5, 1.0, 2.5])) {
        prop_assert_eq!(cell_area(lat, res).unwrap(), cell_area(-lat, res).unwrap());
    }

    #[test]
    fn cell_area_never_exceeds_the_equator(lat in -90.0f64..=90.0) {
        let a = cell_area(lat, 0.5).unwrap();
        prop_assert!(a >= 0.0 && a <= cell_area(0.0, 0.5).unwrap());
    }

    #[test]
    fn block_aggregate_stays_within_input_range(
        (factor, br, bc) in (1usize..5, 1usize..4, 1usize..4),
        seed in prop::collection::vec(value_strategy(), 256),
    ) {
        let (rows, cols) = (factor * br, factor * bc);
        let g = fine_grid(rows, cols, seed[..rows * cols].to_vec());
        let coarse = block_aggregate(&g, factor).unwrap();
        if let Some((lo, hi)) = range_of(g.values()) {
            for &v in coarse.values().iter().filter(|v| !v.is_nan()) {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn block_aggregate_factor_one_is_identity(values in prop::collection::vec(value_strategy(), 12)) {
        let g = fine_grid(3, 4, values);
        let same = block_aggregate(&g, 1).unwrap();
        prop_assert_eq!(same.spec, g.spec);
        for (a, b) in same.values().iter().zip(g.values()) {
            prop_assert!(a.to_bits() == b.to_bits());
        }
    }

    #[test]
    fn block_aggregate_conserves_mass(
        (factor, br, bc) in (2usize..6, 1usize..4, 1usize..4),
        seed in prop::collection::vec(-1e3f64..1e3, 400),
    ) {
        let (rows, cols) = (factor * br, factor * bc);
        let g = fine_grid(rows, cols, seed[..rows * cols].to_vec());
        let coarse = block_aggregate(&g, factor).unwrap();
        let fine_mass: f64 = g.values().iter().sum();
        let coarse_mass: f64 = coarse.values().iter().map(|v| v * (factor * factor) as f64).sum();
        let scale: f64 = g.values().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((fine_mass - coarse_mass).abs() <= 1e-9 * scale,
            "fine {fine_mass} coarse {coarse_mass}");
    }

    #[test]
    fn align_half_offset_stays_within_input_range(
        values in prop::collection::vec(value_strategy(), 30),
    ) {
        let src = Grid::new(GridSpec::new(2.0, 0.0, 1.0, 5, 6).unwrap(), values, "x").unwrap();
        let target = GridSpec::new(1.5, 0.5, 1.0, 4, 5).unwrap();
        let out = align_half_offset(&src, &target).unwrap();
        if let Some((lo, hi)) = range_of(src.values()) {
            for &v in out.values().iter().filter(|v| !v.is_nan()) {
                prop_assert!(v >= lo && v <= hi);
            }
        }
    }

    #[test]
    fn align_half_offset_reproduces_affine_fields(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -100.0f64..100.0) {
        let src_spec = GridSpec::new(2.0, 0.0, 1.0, 5, 6).unwrap();
        let src = Grid::from_fn(src_spec, "x", |r, col| {
            a * src_spec.lat_center(r) + b * src_spec.lon_center(col) + c
        });
        let target = GridSpec::new(1.5, 0.5, 1.0, 4, 5).unwrap();
        let out = align_half_offset(&src, &target).unwrap();
        for r in 0..target.n_rows {
            for col in 0..target.n_cols {
                let expect = a * target.lat_center(r) + b * target.lon_center(col) + c;
                let got = out.get(r, col).unwrap();
                prop_assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0), "{got} vs {expect}");
            }
        }
    }
}

#[test]
fn era5_frame_crops_to_socioeconomic_frame() {
    let era5 = GridSpec::global_centered(0.25).unwrap();
    assert_eq!((era5.n_rows, era5.n_cols), (721, 1440));
    let target = GridSpec::global(0.25).unwrap();
    let src = Grid::filled(era5, 7.25, "degC");
    let out = align_to(&src, &target).unwrap();
    assert_eq!((out.spec.n_rows, out.spec.n_cols), (720, 1440));
    assert!(out.values().iter().all(|&v| v == 7.25));
}

#[test]
fn socioeconomic_frame_moves_onto_era5_frame() {
    let src = Grid::filled(GridSpec::global(1.0).unwrap(), 3.0, "x");
    let target = GridSpec::global_centered(1.0).unwrap();
    let out = align_to(&src, &target).unwrap();
    assert_eq!(out.spec.n_rows, 181);
    assert!(out.values().iter().all(|&v| v == 3.0));
}
