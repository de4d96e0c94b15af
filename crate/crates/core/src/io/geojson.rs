//! GeoJSON administrative boundaries.

use std::collections::BTreeSet;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::boundaries::{AdminLevel, AdminUnit, MultiPolygon, Point, Polygon, Ring};
use crate::error::{Error, Result};

fn boundary_err(feature: &str, message: impl Into<String>) -> Error {
    Error::Boundary {
        feature: feature.to_string(),
        message: message.into(),
    }
}

fn position(feature: &str, v: &Value) -> Result<Point> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| boundary_err(feature, "position is not an array of at least two numbers"))?;
    let lon = arr[0].as_f64();
    let lat = arr[1].as_f64();
    match (lon, lat) {
        (Some(lon), Some(lat)) => Ok([lon, lat]),
        _ => Err(boundary_err(feature, "position holds non-numeric coordinates")),
    }
}

fn ring(feature: &str, v: &Value) -> Result<Ring> {
    let coords = v
        .as_array()
        .ok_or_else(|| boundary_err(feature, "ring is not an array"))?
        .iter()
        .map(|p| position(feature, p))
        .collect::<Result<Vec<_>>>()?;
    Ring::from_closed(coords).map_err(|e| boundary_err(feature, e.to_string()))
}

fn polygon(feature: &str, v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .filter(|r| !r.is_empty())
        .ok_or_else(|| boundary_err(feature, "polygon has no rings"))?;
    let exterior = ring(feature, &rings[0])?;
    let holes = rings[1..]
        .iter()
        .map(|r| ring(feature, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(Polygon::new(exterior, holes))
}

/// Parse a GeoJSON `Polygon` or `MultiPolygon` geometry object.
pub fn parse_geometry(feature: &str, geometry: &Value) -> Result<MultiPolygon> {
    let kind = geometry.get("type").and_then(Value::as_str);
    let coords = geometry
        .get("coordinates")
        .ok_or_else(|| boundary_err(feature, "geometry has no coordinates"))?;
    match kind {
        Some("Polygon") => Ok(MultiPolygon(vec![polygon(feature, coords)?])),
        Some("MultiPolygon") => {
            let polys = coords
                .as_array()
                .ok_or_else(|| boundary_err(feature, "multipolygon coordinates are not an array"))?
                .iter()
                .map(|p| polygon(feature, p))
                .collect::<Result<Vec<_>>>()?;
            Ok(MultiPolygon(polys))
        }
        Some(other) => Err(boundary_err(feature, format!("unsupported geometry type `{other}`"))),
        None => Err(boundary_err(feature, "geometry has no type")),
    }
}

/// Serialize a geometry back to a GeoJSON `MultiPolygon` object with closed rings.
pub fn geometry_to_json(geometry: &MultiPolygon) -> Value {
    let coords: Vec<Vec<Vec<Point>>> = geometry
        .polygons()
        .iter()
        .map(|p| p.rings().map(Ring::to_closed).collect())
        .collect();
    json!({ "type": "MultiPolygon", "coordinates": coords })
}

fn property_string(props: &Map<String, Value>, key: &str) -> Option<String> {
    match props.get(key)? {
        Value::String(s) if !s.trim().is_empty() => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Parse a FeatureCollection held in memory.
pub fn parse_boundaries(text: &str, level: AdminLevel) -> Result<Vec<AdminUnit>> {
    let doc: Value = serde_json::from_str(text)?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(boundary_err("<document>", "top-level object is not a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| boundary_err("<document>", "FeatureCollection has no features array"))?;

    let mut seen = BTreeSet::new();
    let mut units = Vec::with_capacity(features.len());
    let empty = Map::new();
    for (i, feature) in features.iter().enumerate() {
        let props = feature
            .get("properties")
            .and_then(Value::as_object)
            .unwrap_or(&empty);
        let Some(id) = property_string(props, level.id_property()) else {
            return Err(boundary_err(
                &format!("feature #{i}"),
                format!("missing {} property", level.id_property()),
            ));
        };
        if level == AdminLevel::Gadm1 && property_string(props, "GID_0").is_none() {
            return Err(boundary_err(&id, "missing GID_0 property"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::KeyCollision(format!(
                "{} {id} appears more than once",
                level.id_property()
            )));
        }
        let name = property_string(props, level.name_property()).unwrap_or_else(|| id.clone());
        let geometry = feature
            .get("geometry")
            .filter(|g| !g.is_null())
            .ok_or_else(|| boundary_err(&id, "feature has no geometry"))?;
        let geometry = parse_geometry(&id, geometry)?;
        let unit = AdminUnit::new(id.clone(), level, name, geometry)
            .map_err(|e| boundary_err(&id, e.to_string()))?;
        units.push(unit);
    }
    Ok(units)
}

/// Read a boundary FeatureCollection from disk.
pub fn read_boundaries(path: impl AsRef<Path>, level: AdminLevel) -> Result<Vec<AdminUnit>> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_boundaries(&text, level)
}

/// FeatureCollection of `units`, one feature each, with id and name properties.
pub fn units_to_geojson(units: &[AdminUnit]) -> Value {
    let features: Vec<Value> = units
        .iter()
        .map(|u| {
            let mut props = Map::new();
            if u.level == AdminLevel::Gadm1 {
                let country = u.unit_id.split('.').next().unwrap_or(&u.unit_id);
                props.insert("GID_0".into(), Value::String(country.to_string()));
            }
            props.insert(u.level.id_property().into(), Value::String(u.unit_id.clone()));
            props.insert(u.level.name_property().into(), Value::String(u.name.clone()));
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": geometry_to_json(&u.geometry),
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str) -> Value {
        json!({
            "type": "Feature",
            "properties": { "GID_0": "AAA", "GID_1": id, "NAME_1": format!("Unit {id}") },
            "geometry": {
                "type": "Polygon",
                "coordinates": [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]]
            }
        })
    }

    fn collection(features: Vec<Value>) -> String {
        json!({ "type": "FeatureCollection", "features": features }).to_string()
    }

    #[test]
    fn one_square() {
        let units = parse_boundaries(&collection(vec![square("AAA.1_1")]), AdminLevel::Gadm1).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].unit_id, "AAA.1_1");
        assert_eq!(units[0].name, "Unit AAA.1_1");
        assert_eq!(units[0].geometry.polygons().len(), 1);
        assert!(units[0].geometry.polygons()[0].holes.is_empty());
    }

    #[test]
    fn hole_is_preserved() {
        let f = json!({
            "type": "Feature",
            "properties": { "GID_0": "BBB" },
            "geometry": {
                "type": "Polygon",
                "coordinates": [
                    [[0.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0], [0.0, 0.0]],
                    [[1.0, 1.0], [1.0, 2.0], [2.0, 2.0], [2.0, 1.0], [1.0, 1.0]]
                ]
            }
        });
        let units = parse_boundaries(&collection(vec![f]), AdminLevel::Gadm0).unwrap();
        assert_eq!(units[0].geometry.polygons()[0].holes.len(), 1);
        assert_eq!(units[0].name, "BBB");
        assert!((units[0].geometry.area() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_id_collides() {
        let text = collection(vec![square("AAA.1_1"), square("AAA.1_1")]);
        assert!(matches!(
            parse_boundaries(&text, AdminLevel::Gadm1),
            Err(Error::KeyCollision(_))
        ));
    }

    #[test]
    fn open_ring_names_feature() {
        let mut f = square("AAA.2_1");
        f["geometry"]["coordinates"][0].as_array_mut().unwrap().pop();
        match parse_boundaries(&collection(vec![f]), AdminLevel::Gadm1) {
            Err(Error::Boundary { feature, .. }) => assert_eq!(feature, "AAA.2_1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_id_names_position() {
        let mut f = square("x");
        f["properties"] = json!({ "NAME_1": "nameless" });
        match parse_boundaries(&collection(vec![f]), AdminLevel::Gadm1) {
            Err(Error::Boundary { feature, message }) => {
                assert_eq!(feature, "feature #0");
                assert!(message.contains("GID_1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn echo_round_trip() {
        let units = parse_boundaries(&collection(vec![square("AAA.1_1")]), AdminLevel::Gadm1).unwrap();
        let again = parse_boundaries(&units_to_geojson(&units).to_string(), AdminLevel::Gadm1).unwrap();
        assert_eq!(units, again);
    }
}
