//! Closed-form map projections and CRS-to-CRS transformation.
//!
//! Supported families: geographic (degrees), ellipsoidal Transverse Mercator
//! (Krüger series), ellipsoidal Albers equal-area conic and spherical Web
//! Mercator. No datum shifts are applied: WGS84 and GRS80 are treated as the
//! same datum, which keeps UTM/WGS84 and Albers/NAD83 layers within a
//! sub-millimetre flattening difference of each other.

mod albers;
mod mercator;
mod tmerc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::BoundingBox;

pub use albers::Albers;
pub use mercator::WebMercator;
pub use tmerc::TransverseMercator;

/// Default number of points per edge used when reprojecting boxes.
pub const DEFAULT_DENSIFY: usize = 21;

const PARAM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    /// Semi-major axis in metres.
    pub a: f64,
    /// Inverse flattening.
    pub inv_f: f64,
}

impl Ellipsoid {
    pub const WGS84: Ellipsoid = Ellipsoid {
        a: 6378137.0,
        inv_f: 298.257223563,
    };
    pub const GRS80: Ellipsoid = Ellipsoid {
        a: 6378137.0,
        inv_f: 298.257222101,
    };

    pub fn flattening(&self) -> f64 {
        1.0 / self.inv_f
    }

    /// First eccentricity squared.
    pub fn e2(&self) -> f64 {
        let f = self.flattening();
        f * (2.0 - f)
    }

    pub fn e(&self) -> f64 {
        self.e2().sqrt()
    }

    /// Third flattening.
    pub fn n(&self) -> f64 {
        let f = self.flattening();
        f / (2.0 - f)
    }

    /// Prime vertical radius of curvature at latitude `phi` (radians).
    pub fn prime_vertical_radius(&self, phi: f64) -> f64 {
        let s = phi.sin();
        self.a / (1.0 - self.e2() * s * s).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectionKind {
    Geographic,
    TransverseMercator,
    AlbersEqualArea,
    WebMercator,
}

/// Projection parameters. Angles are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrsParams {
    pub kind: ProjectionKind,
    pub ellipsoid: Ellipsoid,
    pub lon0: f64,
    pub lat0: f64,
    pub k0: f64,
    pub false_easting: f64,
    pub false_northing: f64,
    /// Standard parallels (Albers only).
    pub lat1: f64,
    pub lat2: f64,
}

impl CrsParams {
    fn approx_eq(&self, o: &CrsParams) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= PARAM_TOL * a.abs().max(b.abs()).max(1.0);
        if self.kind != o.kind {
            return false;
        }
        let common = close(self.ellipsoid.a, o.ellipsoid.a) && close(self.ellipsoid.inv_f, o.ellipsoid.inv_f);
        match self.kind {
            ProjectionKind::Geographic => common,
            ProjectionKind::WebMercator => {
                common
                    && close(self.lon0, o.lon0)
                    && close(self.false_easting, o.false_easting)
                    && close(self.false_northing, o.false_northing)
            }
            ProjectionKind::TransverseMercator => {
                common
                    && close(self.lon0, o.lon0)
                    && close(self.lat0, o.lat0)
                    && close(self.k0, o.k0)
                    && close(self.false_easting, o.false_easting)
                    && close(self.false_northing, o.false_northing)
            }
            ProjectionKind::AlbersEqualArea => {
                common
                    && close(self.lon0, o.lon0)
                    && close(self.lat0, o.lat0)
                    && close(self.lat1, o.lat1)
                    && close(self.lat2, o.lat2)
                    && close(self.false_easting, o.false_easting)
                    && close(self.false_northing, o.false_northing)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Geographic,
    Tm(TransverseMercator),
    Albers(Albers),
    Merc(WebMercator),
}

/// A coordinate reference system: parameters plus precomputed projection
/// constants. Equality is parameter-wise with a 1e-12 tolerance, so a
/// hand-built parameter set equals its EPSG alias.
#[derive(Clone)]
pub struct CrsDef {
    params: CrsParams,
    epsg: Option<u32>,
    engine: Engine,
}

impl fmt::Debug for CrsDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsg {
            Some(code) => write!(f, "CrsDef(EPSG:{code})"),
            None => write!(f, "CrsDef({:?})", self.params),
        }
    }
}

impl fmt::Display for CrsDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.epsg {
            Some(code) => write!(f, "EPSG:{code}"),
            None => write!(f, "{:?} (custom)", self.params.kind),
        }
    }
}

impl PartialEq for CrsDef {
    fn eq(&self, other: &Self) -> bool {
        self.params.approx_eq(&other.params)
    }
}

impl CrsDef {
    pub fn new(params: CrsParams) -> Result<Self> {
        Self::build(params, None)
    }

    fn build(params: CrsParams, epsg: Option<u32>) -> Result<Self> {
        if !(-180.0..=180.0).contains(&params.lon0) {
            return Err(Error::InvalidArgument(format!(
                "central meridian {} out of range",
                params.lon0
            )));
        }
        let engine = match params.kind {
            ProjectionKind::Geographic => Engine::Geographic,
            ProjectionKind::TransverseMercator => {
                if !(params.k0 > 0.0) {
                    return Err(Error::InvalidArgument("scale factor must be positive".into()));
                }
                Engine::Tm(TransverseMercator::new(&params))
            }
            ProjectionKind::AlbersEqualArea => {
                if (params.lat1 + params.lat2).abs() < 1e-10 {
                    return Err(Error::InvalidArgument(
                        "Albers standard parallels must not be symmetric".into(),
                    ));
                }
                Engine::Albers(Albers::new(&params))
            }
            ProjectionKind::WebMercator => Engine::Merc(WebMercator::new(&params)),
        };
        Ok(CrsDef { params, epsg, engine })
    }

    pub fn params(&self) -> &CrsParams {
        &self.params
    }

    pub fn kind(&self) -> ProjectionKind {
        self.params.kind
    }

    pub fn epsg(&self) -> Option<u32> {
        self.epsg
    }

    pub fn is_geographic(&self) -> bool {
        self.params.kind == ProjectionKind::Geographic
    }

    pub fn wgs84() -> Self {
        Self::from_epsg(4326).expect("4326 is built in")
    }

    /// UTM zone on WGS84.
    pub fn utm(zone: u32, south: bool) -> Result<Self> {
        if !(1..=60).contains(&zone) {
            return Err(Error::UnknownCrs(format!("UTM zone {zone}")));
        }
        let params = CrsParams {
            kind: ProjectionKind::TransverseMercator,
            ellipsoid: Ellipsoid::WGS84,
            lon0: -183.0 + 6.0 * zone as f64,
            lat0: 0.0,
            k0: 0.9996,
            false_easting: 500000.0,
            false_northing: if south { 10_000_000.0 } else { 0.0 },
            lat1: 0.0,
            lat2: 0.0,
        };
        let code = if south { 32700 + zone } else { 32600 + zone };
        Self::build(params, Some(code))
    }

    /// Expand a recognised EPSG code into its parameter set.
    pub fn from_epsg(code: u32) -> Result<Self> {
        let base = CrsParams {
            kind: ProjectionKind::Geographic,
            ellipsoid: Ellipsoid::WGS84,
            lon0: 0.0,
            lat0: 0.0,
            k0: 1.0,
            false_easting: 0.0,
            false_northing: 0.0,
            lat1: 0.0,
            lat2: 0.0,
        };
        match code {
            4326 => Self::build(base, Some(code)),
            32601..=32660 => Self::utm(code - 32600, false),
            32701..=32760 => Self::utm(code - 32700, true),
            5070 => Self::build(
                CrsParams {
                    kind: ProjectionKind::AlbersEqualArea,
                    ellipsoid: Ellipsoid::GRS80,
                    lon0: -96.0,
                    lat0: 23.0,
                    lat1: 29.5,
                    lat2: 45.5,
                    ..base
                },
                Some(code),
            ),
            3857 => Self::build(
                CrsParams {
                    kind: ProjectionKind::WebMercator,
                    ..base
                },
                Some(code),
            ),
            _ => Err(Error::UnknownCrs(format!("EPSG:{code}"))),
        }
    }

    /// Forward projection from geographic degrees to this CRS.
    pub fn project_forward(&self, p: LonLat) -> Result<ProjXY> {
        check_lonlat(p)?;
        let (x, y) = match &self.engine {
            Engine::Geographic => (p.lon, p.lat),
            Engine::Tm(tm) => tm.forward(p.lon.to_radians(), p.lat.to_radians())?,
            Engine::Albers(al) => al.forward(p.lon.to_radians(), p.lat.to_radians())?,
            Engine::Merc(m) => m.forward(p.lon.to_radians(), p.lat.to_radians())?,
        };
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::OutOfDomain(format!("{p:?} has no finite image in {self}")));
        }
        Ok(ProjXY { x, y })
    }

    /// Inverse projection from this CRS to geographic degrees.
    pub fn project_inverse(&self, p: ProjXY) -> Result<LonLat> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::OutOfDomain(format!("non-finite coordinate {p:?}")));
        }
        let (lon, lat) = match &self.engine {
            Engine::Geographic => (p.x, p.y),
            Engine::Tm(tm) => rad_pair(tm.inverse(p.x, p.y)?),
            Engine::Albers(al) => rad_pair(al.inverse(p.x, p.y)?),
            Engine::Merc(m) => rad_pair(m.inverse(p.x, p.y)?),
        };
        let out = LonLat { lon, lat };
        check_lonlat(out)?;
        Ok(out)
    }
}

fn rad_pair((lon, lat): (f64, f64)) -> (f64, f64) {
    (lon.to_degrees(), lat.to_degrees())
}

fn check_lonlat(p: LonLat) -> Result<()> {
    if !(p.lon.is_finite() && p.lat.is_finite()) || p.lat.abs() > 90.0 {
        return Err(Error::OutOfDomain(format!("invalid geographic coordinate {p:?}")));
    }
    Ok(())
}

/// Wrap an angle in radians into `[-pi, pi]`.
pub(crate) fn wrap_pi(mut a: f64) -> f64 {
    use std::f64::consts::PI;
    if a.abs() > PI {
        a = (a + PI).rem_euclid(2.0 * PI) - PI;
    }
    a
}

impl FromStr for CrsDef {
    type Err = Error;

    /// Accepts `EPSG:nnnn` (case-insensitive prefix).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let code = s
            .split_once(':')
            .filter(|(auth, _)| auth.eq_ignore_ascii_case("epsg"))
            .and_then(|(_, c)| c.parse::<u32>().ok())
            .ok_or_else(|| Error::UnknownCrs(format!("expected EPSG:nnnn, got {s:?}")))?;
        Self::from_epsg(code)
    }
}

impl Serialize for CrsDef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.epsg {
            Some(code) => s.serialize_str(&format!("EPSG:{code}")),
            None => self.params.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CrsDef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Code(String),
            Params(CrsParams),
        }
        match Repr::deserialize(d)? {
            Repr::Code(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Params(p) => CrsDef::new(p).map_err(serde::de::Error::custom),
        }
    }
}

/// Geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub fn new(lon: f64, lat: f64) -> Self {
        LonLat { lon, lat }
    }
}

/// Projected coordinate (metres, or degrees for geographic CRSs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjXY {
    pub x: f64,
    pub y: f64,
}

impl ProjXY {
    pub fn new(x: f64, y: f64) -> Self {
        ProjXY { x, y }
    }
}

pub fn project_forward(c: &CrsDef, p: LonLat) -> Result<ProjXY> {
    c.project_forward(p)
}

pub fn project_inverse(c: &CrsDef, p: ProjXY) -> Result<LonLat> {
    c.project_inverse(p)
}

/// Move a point from `src` to `dst`. Identical CRSs return the input unchanged.
pub fn transform_point(src: &CrsDef, dst: &CrsDef, p: ProjXY) -> Result<ProjXY> {
    if src == dst {
        return Ok(p);
    }
    dst.project_forward(src.project_inverse(p)?)
}

/// Axis-aligned hull of `b` reprojected with `densify_n` samples per edge.
pub fn transform_bbox(src: &CrsDef, dst: &CrsDef, b: &BoundingBox, densify_n: usize) -> Result<BoundingBox> {
    if densify_n < 2 {
        return Err(Error::InvalidArgument(format!(
            "densify_n must be >= 2, got {densify_n}"
        )));
    }
    if src == dst {
        return Ok(*b);
    }
    let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let mut add = |x: f64, y: f64| -> Result<()> {
        let q = transform_point(src, dst, ProjXY::new(x, y))?;
        hull[0] = hull[0].min(q.x);
        hull[1] = hull[1].min(q.y);
        hull[2] = hull[2].max(q.x);
        hull[3] = hull[3].max(q.y);
        Ok(())
    };
    let last = (densify_n - 1) as f64;
    for i in 0..densify_n {
        let f = i as f64 / last;
        let x = b.minx + f * (b.maxx - b.minx);
        let y = b.miny + f * (b.maxy - b.miny);
        add(x, b.miny)?;
        add(x, b.maxy)?;
        add(b.minx, y)?;
        add(b.maxx, y)?;
    }
    let mut out = BoundingBox::raw(hull[0], hull[1], hull[2], hull[3]);
    out.mint = b.mint;
    out.maxt = b.maxt;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsg_aliases() {
        let c = CrsDef::from_epsg(32619).unwrap();
        let p = c.params();
        assert_eq!(p.kind, ProjectionKind::TransverseMercator);
        assert_eq!(p.lon0, -69.0);
        assert_eq!(p.k0, 0.9996);
        assert_eq!(p.false_easting, 500000.0);
        assert_eq!(p.ellipsoid, Ellipsoid::WGS84);
        assert_eq!("EPSG:32619".parse::<CrsDef>().unwrap(), c);
        assert_eq!(
            "epsg:5070".parse::<CrsDef>().unwrap().kind(),
            ProjectionKind::AlbersEqualArea
        );
        assert!("EPSG:2154".parse::<CrsDef>().is_err());
        assert!("32619".parse::<CrsDef>().is_err());
    }

    #[test]
    fn hand_built_equals_alias() {
        let alias = CrsDef::from_epsg(32619).unwrap();
        let hand = CrsDef::new(*alias.params()).unwrap();
        assert_eq!(hand, alias);
        assert_eq!(hand.epsg(), None);
        assert_ne!(alias, CrsDef::from_epsg(32618).unwrap());
    }

    #[test]
    fn symmetric_albers_parallels_rejected() {
        let mut p = *CrsDef::from_epsg(5070).unwrap().params();
        p.lat1 = 30.0;
        p.lat2 = -30.0;
        assert!(CrsDef::new(p).is_err());
    }

    #[test]
    fn crs_serde_round_trip() {
        let c = CrsDef::from_epsg(5070).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, "\"EPSG:5070\"");
        let back: CrsDef = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn identity_transform_is_exact() {
        let c = CrsDef::from_epsg(32619).unwrap();
        let p = ProjXY::new(186585.123456789, 4505085.987654321);
        assert_eq!(transform_point(&c, &c, p).unwrap(), p);
        let b = BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert_eq!(transform_bbox(&c, &c, &b, 21).unwrap(), b);
    }

    #[test]
    fn densify_must_be_at_least_two() {
        let a = CrsDef::from_epsg(4326).unwrap();
        let b = CrsDef::from_epsg(32619).unwrap();
        let bb = BoundingBox::new(-70., 42., -68., 44.).unwrap();
        assert!(transform_bbox(&a, &b, &bb, 1).is_err());
    }

    #[test]
    fn wrap_pi_range() {
        use std::f64::consts::PI;
        assert!((wrap_pi(3.0 * PI) - PI).abs() < 1e-12 || (wrap_pi(3.0 * PI) + PI).abs() < 1e-12);
        assert_eq!(wrap_pi(0.5), 0.5);
        assert!((wrap_pi(-1.5 * PI) - 0.5 * PI).abs() < 1e-12);
    }
}
