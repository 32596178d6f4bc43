//! Spherical (pseudo) Mercator on the sphere of radius `a`.

use super::{wrap_pi, CrsParams};
use crate::error::{Error, Result};

const MAX_LAT: f64 = 89.9;

#[derive(Debug, Clone)]
pub struct WebMercator {
    a: f64,
    lon0: f64,
    fe: f64,
    fn_: f64,
}

impl WebMercator {
    pub(super) fn new(p: &CrsParams) -> Self {
        WebMercator {
            a: p.ellipsoid.a,
            lon0: p.lon0.to_radians(),
            fe: p.false_easting,
            fn_: p.false_northing,
        }
    }

    pub fn forward(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        if lat.to_degrees().abs() >= MAX_LAT {
            return Err(Error::OutOfDomain(format!(
                "latitude {} too close to the pole for Mercator",
                lat.to_degrees()
            )));
        }
        let dlon = lon - self.lon0;
        // keep +180 at the eastern edge instead of wrapping it to -180
        let dlon = if dlon.abs() <= std::f64::consts::PI {
            dlon
        } else {
            wrap_pi(dlon)
        };
        let y = lat.tan().asinh();
        Ok((self.fe + self.a * dlon, self.fn_ + self.a * y))
    }

    pub fn inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let lon = self.lon0 + (x - self.fe) / self.a;
        let lat = ((y - self.fn_) / self.a).sinh().atan();
        if lon.abs() > std::f64::consts::PI * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!("easting {x} beyond the antimeridian")));
        }
        Ok((lon, lat))
    }
}
