mod support;

use geopatch::geo::{BoundingBox, Resolution};
use geopatch::proj::CrsDef;
use geopatch::vector::{parse_polygons, rasterize, Polygon, PolygonSet};
use proptest::prelude::*;
use support::{point_in_polygon_exact, random_star, Lcg};

fn set(polygons: Vec<Polygon>) -> PolygonSet {
    PolygonSet {
        polygons,
        crs: CrsDef::from_epsg(32618).unwrap(),
    }
}

/// Compare the rasteriser against the exact oracle at every pixel centre.
fn check_against_oracle(polys: &PolygonSet, b: &BoundingBox, res: f64) {
    let r = Resolution::square(res).unwrap();
    let m = rasterize(polys, b, &r);
    let t = m.transform();
    for row in 0..m.height() {
        for col in 0..m.width() {
            let (x, y) = t.pixel_to_world(row as f64 + 0.5, col as f64 + 0.5);
            let expect = polys
                .polygons
                .iter()
                .rev()
                .find(|p| point_in_polygon_exact(&p.rings, x, y))
                .map_or(0.0, |p| p.burn as f32);
            assert_eq!(m.get(0, row, col), expect, "pixel ({row},{col}) centre ({x},{y})");
        }
    }
}

#[test]
fn right_triangle_matches_oracle() {
    let tri = Polygon::new(vec![vec![(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (0.0, 0.0)]], 1).unwrap();
    let polys = set(vec![tri]);
    let b = BoundingBox::new(0.0, 0.0, 4.0, 4.0).unwrap();
    check_against_oracle(&polys, &b, 1.0);
    // centres (x+y <= 4): 10 of the 16 are inside or on the hypotenuse
    let m = rasterize(&polys, &b, &Resolution::square(1.0).unwrap());
    assert_eq!(m.samples.iter().filter(|v| **v == 1.0).count(), 10);
}

#[test]
fn polygon_with_hole_matches_oracle() {
    let outer = vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0), (0.0, 0.0)];
    let hole = vec![(2.5, 2.5), (7.5, 2.5), (5.0, 7.5), (2.5, 2.5)];
    let polys = set(vec![Polygon::new(vec![outer, hole], 2).unwrap()]);
    check_against_oracle(&polys, &BoundingBox::new(-1.0, -1.0, 11.0, 11.0).unwrap(), 0.5);
}

#[test]
fn box_partly_outside_polygon_extent() {
    let mut rng = Lcg(99);
    let p = random_star(&mut rng, 50.0, 50.0, 40.0, None, 7).unwrap();
    let polys = set(vec![p]);
    check_against_oracle(&polys, &BoundingBox::new(60.0, -20.0, 130.0, 70.0).unwrap(), 1.0);
}

#[test]
fn geojson_to_mask() {
    let text = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"code":5},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#;
    let polys = parse_polygons(text, Some("code"), Some(CrsDef::from_epsg(32618).unwrap())).unwrap();
    let m = rasterize(
        &polys,
        &BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(),
        &Resolution::square(0.5).unwrap(),
    );
    assert_eq!(m.samples, vec![5.0; 4]);
    assert!(m.valid.iter().all(|v| *v));
}

#[test]
fn reproject_moves_vertices() {
    let ll = PolygonSet {
        polygons: vec![Polygon::new(
            vec![vec![
                (-75.1, 39.9),
                (-74.9, 39.9),
                (-74.9, 40.1),
                (-75.1, 40.1),
                (-75.1, 39.9),
            ]],
            1,
        )
        .unwrap()],
        crs: CrsDef::wgs84(),
    };
    let utm = ll.reproject(&CrsDef::from_epsg(32618).unwrap()).unwrap();
    let b = utm.bounds().unwrap();
    // central meridian of zone 18 is -75, so the box straddles easting 500 km
    assert!(b.minx < 500000.0 && b.maxx > 500000.0);
    assert!(b.miny > 4.4e6 && b.maxy < 4.45e6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rasterizer_equals_point_in_polygon(seed in any::<u64>(), snapped in any::<bool>(), count in 1usize..4) {
        let mut rng = Lcg(seed);
        let quantum = if snapped { Some(0.5) } else { None };
        let polys: Vec<Polygon> = (0..count)
            .filter_map(|i| {
                let (cx, cy, rmax) = (rng.range(5.0, 25.0), rng.range(5.0, 25.0), rng.range(2.0, 12.0));
                random_star(&mut rng, cx, cy, rmax, quantum, i as u16 + 1)
            })
            .collect();
        check_against_oracle(&set(polys), &BoundingBox::new(0.0, 0.0, 30.0, 30.0).unwrap(), 1.0);
    }

    #[test]
    fn translation_equivariance(seed in any::<u64>(), kx in -4096i64..4096, ky in -4096i64..4096) {
        let mut rng = Lcg(seed);
        // eighth-unit vertices and offsets keep every sum exact in f64
        let Some(p) = random_star(&mut rng, 16.0, 16.0, 12.0, Some(0.125), 3) else { return Ok(()) };
        let (dx, dy) = (kx as f64 * 0.125, ky as f64 * 0.125);
        let moved = Polygon::new(
            p.rings.iter().map(|r| r.iter().map(|&(x, y)| (x + dx, y + dy)).collect()).collect(),
            p.burn,
        ).unwrap();
        let b = BoundingBox::new(0.0, 0.0, 32.0, 32.0).unwrap();
        let r = Resolution::square(0.5).unwrap();
        let a = rasterize(&set(vec![p]), &b, &r);
        let m = rasterize(&set(vec![moved]), &b.translate(dx, dy), &r);
        prop_assert_eq!(a.samples, m.samples);
    }
}
