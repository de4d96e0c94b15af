use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use wclim_core::aggregate::{Source, UnitTable};
use wclim_core::boundaries::AdminLevel;
use wclim_core::io::table::{read_table, render_table, TableFormat, TableLayout, TableMeta};
use wclim_core::io::{read_boundaries, read_climate, write_climate, WriteOptions};
use wclim_core::temporal::VariableKind;
use wclim_core::time::{Frequency, Period, TimeAxis};
use wclim_core::weights::{WeightKind, WeightScheme};
use wclim_core::{ClimateField, Error, GridSpec};

fn value() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        6 => (-1e6f64..1e6).prop_map(Some),
        1 => (-1e-7f64..1e-7).prop_map(Some),
        1 => Just(None),
    ]
}

fn table_strategy() -> impl Strategy<Value = UnitTable> {
    let freq = prop::sample::select(vec![Frequency::Annual, Frequency::Monthly, Frequency::Daily]);
    (freq, 1usize..6, 1usize..20).prop_flat_map(|(freq, n_units, n_steps)| {
        prop::collection::vec(prop::collection::vec(value(), n_steps), n_units).prop_map(move |rows| {
            let start = match freq {
                Frequency::Annual => Period::Year(1990),
                Frequency::Monthly => Period::month(1999, 11).unwrap(),
                _ => Period::day(2000, 2, 27).unwrap(),
            };
            let values = rows
                .into_iter()
                .enumerate()
                .map(|(i, r)| (format!("C{:02}.{}_1", 10 - i, i), r))
                .collect();
            UnitTable::new(
                AdminLevel::Gadm1,
                TimeAxis::new(start, n_steps),
                VariableKind::TemperatureMax,
                WeightScheme::new(WeightKind::Population, Some(2010)).unwrap(),
                values,
            )
            .unwrap()
        })
    })
}

fn triples(t: &UnitTable) -> BTreeSet<(String, String, Option<u64>)> {
    t.triples()
        .into_iter()
        .map(|(u, p, v)| (u, p, v.map(f64::to_bits)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_formats_round_trip(t in table_strategy()) {
        for layout in TableLayout::ALL {
            for format in [TableFormat::Json, TableFormat::Parquet] {
                let bytes = render_table(&t, layout, format).unwrap();
                let back = read_table(&bytes, layout, format, TableMeta::of(&t)).unwrap();
                prop_assert_eq!(&back, &t);
                prop_assert_eq!(render_table(&t, layout, format).unwrap(), bytes);
            }
        }
    }

    #[test]
    fn csv_round_trips_to_twelve_digits(t in table_strategy()) {
        for layout in TableLayout::ALL {
            let bytes = render_table(&t, layout, TableFormat::Csv).unwrap();
            let back = read_table(&bytes, layout, TableFormat::Csv, TableMeta::of(&t)).unwrap();
            prop_assert_eq!(&back.time, &t.time);
            for ((u, a), (v, b)) in back.rows().zip(t.rows()) {
                prop_assert_eq!(u, v);
                for (x, y) in a.iter().zip(b) {
                    match (x, y) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-9 * y.abs(), "{x} vs {y}"),
                        _ => prop_assert_eq!(x, y),
                    }
                }
            }
        }
    }

    #[test]
    fn wide_and_long_hold_the_same_triples(t in table_strategy()) {
        let wide = read_table(&render_table(&t, TableLayout::Wide, TableFormat::Json).unwrap(), TableLayout::Wide, TableFormat::Json, TableMeta::of(&t)).unwrap();
        let long = read_table(&render_table(&t, TableLayout::Long, TableFormat::Parquet).unwrap(), TableLayout::Long, TableFormat::Parquet, TableMeta::of(&t)).unwrap();
        prop_assert_eq!(triples(&wide), triples(&long));
        prop_assert_eq!(triples(&wide), triples(&t));
    }
}

#[test]
fn long_csv_rows_are_sorted_by_unit_then_period() {
    let t = UnitTable::new(
        AdminLevel::Gadm0,
        TimeAxis::years(Frequency::Annual, 2001, 2002).unwrap(),
        VariableKind::Precipitation,
        WeightScheme::unweighted(),
        BTreeMap::from([
            ("ZZZ".to_string(), vec![Some(1.0), Some(2.0)]),
            ("AAA".to_string(), vec![None, Some(3.5)]),
        ]),
    )
    .unwrap();
    let text = String::from_utf8(render_table(&t, TableLayout::Long, TableFormat::Csv).unwrap()).unwrap();
    assert_eq!(
        text,
        "unit_id,period,value\nAAA,2001,\nAAA,2002,3.5\nZZZ,2001,1\nZZZ,2002,2\n"
    );
}

#[test]
fn netcdf_requires_fill_value_and_known_units() {
    use netcdf3::{DataSet, FileWriter, Version};
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, units: &str, fill: bool| {
        let path = dir.path().join(name);
        let mut ds = DataSet::new();
        ds.add_fixed_dim("time", 1).unwrap();
        ds.add_fixed_dim("lat", 2).unwrap();
        ds.add_fixed_dim("lon", 2).unwrap();
        ds.add_var_f64("time", &["time"]).unwrap();
        ds.add_var_attr_string("time", "units", "days since 2000-01-01").unwrap();
        ds.add_var_f64("lat", &["lat"]).unwrap();
        ds.add_var_f64("lon", &["lon"]).unwrap();
        ds.add_var_f32("t2m", &["time", "lat", "lon"]).unwrap();
        ds.add_var_attr_string("t2m", "units", units).unwrap();
        if fill {
            ds.add_var_attr_f32("t2m", "_FillValue", vec![-32767.0]).unwrap();
        }
        let mut w = FileWriter::open(&path).unwrap();
        w.set_def(&ds, Version::Offset64Bit, 0).unwrap();
        w.write_var_f64("time", &[0.0]).unwrap();
        w.write_var_f64("lat", &[10.0, 10.25]).unwrap();
        w.write_var_f64("lon", &[359.75, 0.0]).unwrap();
        w.write_var_f32("t2m", &[273.15, -32767.0, 283.15, 263.15]).unwrap();
        w.close().unwrap();
        path
    };

    let ok = read_climate(write("ok.nc", "K", true), VariableKind::TemperatureAvg, Source::Era5).unwrap();
    assert_eq!(ok.grid, GridSpec::new(10.25, -0.25, 0.25, 2, 2).unwrap());
    assert_eq!(ok.time.labels(), vec!["2000-01-01"]);
    // File rows are south-first and columns start at 359.75 (= -0.25).
    let p = &ok.planes[0];
    assert!((p[0] - 10.0).abs() < 1e-4 && (p[1] + 10.0).abs() < 1e-4);
    assert!((p[2] - 0.0).abs() < 1e-4 && p[3].is_nan());

    for (name, units, fill) in [("nofill.nc", "K", false), ("units.nc", "furlongs", true)] {
        match read_climate(write(name, units, fill), VariableKind::TemperatureAvg, Source::Era5) {
            Err(Error::Ingestion { path, variable, .. }) => {
                assert!(path.ends_with(name));
                assert_eq!(variable, "t2m");
            }
            other => panic!("{name}: unexpected {other:?}"),
        }
    }
}

#[test]
fn netcdf_rejects_non_uniform_coordinates() {
    use netcdf3::{DataSet, FileWriter, Version};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.nc");
    let mut ds = DataSet::new();
    ds.add_fixed_dim("time", 1).unwrap();
    ds.add_fixed_dim("lat", 3).unwrap();
    ds.add_fixed_dim("lon", 1).unwrap();
    ds.add_var_f64("time", &["time"]).unwrap();
    ds.add_var_attr_string("time", "units", "hours since 2000-01-01 00:00:00").unwrap();
    ds.add_var_f64("latitude", &["lat"]).unwrap();
    ds.add_var_f64("longitude", &["lon"]).unwrap();
    ds.add_var_f64("tp", &["time", "lat", "lon"]).unwrap();
    ds.add_var_attr_string("tp", "units", "m").unwrap();
    ds.add_var_attr_f64("tp", "missing_value", vec![-1.0]).unwrap();
    let mut w = FileWriter::open(&path).unwrap();
    w.set_def(&ds, Version::Classic, 0).unwrap();
    w.write_var_f64("time", &[0.0]).unwrap();
    w.write_var_f64("latitude", &[0.0, 0.5, 1.5]).unwrap();
    w.write_var_f64("longitude", &[0.0]).unwrap();
    w.write_var_f64("tp", &[0.001, 0.002, 0.003]).unwrap();
    w.close().unwrap();
    let err = read_climate(&path, VariableKind::Precipitation, Source::Era5).unwrap_err();
    assert!(err.to_string().contains("not uniform"), "{err}");
}

#[test]
fn climate_file_round_trip_with_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(45.0, -10.0, 1.0, 3, 4).unwrap();
    let time = TimeAxis::years(Frequency::Monthly, 1990, 1990).unwrap();
    let planes = (0..12)
        .map(|t| (0..12).map(|c| if (t + c) % 7 == 0 { f64::NAN } else { (t * 12 + c) as f64 * 0.5 }).collect())
        .collect();
    let f = ClimateField::new(VariableKind::Precipitation, Source::CruTs, spec, time, planes).unwrap();
    let path = dir.path().join("pre.nc");
    write_climate(&path, &f, WriteOptions { lat_ascending: true, ..Default::default() }).unwrap();
    let back = read_climate(&path, VariableKind::Precipitation, Source::CruTs).unwrap();
    assert_eq!(back.time, f.time);
    for (a, b) in back.planes.iter().flatten().zip(f.planes.iter().flatten()) {
        assert!(a == b || (a.is_nan() && b.is_nan()));
    }
}

#[test]
fn boundaries_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gadm0.geojson");
    std::fs::write(
        &path,
        r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"GID_0":"XYZ","COUNTRY":"Xyz"},
             "geometry":{"type":"MultiPolygon","coordinates":[
                [[[0,0],[1,0],[1,1],[0,1],[0,0]]],
                [[[2,0],[3,0],[3,1],[2,0]]]]}}]}"#,
    )
    .unwrap();
    let units = read_boundaries(&path, AdminLevel::Gadm0).unwrap();
    assert_eq!(units.len(), 1);
    assert_eq!(units[0].name, "Xyz");
    assert_eq!(units[0].geometry.polygons().len(), 2);
    assert!((units[0].geometry.area() - 1.5).abs() < 1e-12);
}
