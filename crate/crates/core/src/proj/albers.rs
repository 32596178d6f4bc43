//! Ellipsoidal Albers equal-area conic.

use super::{wrap_pi, CrsParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Albers {
    a: f64,
    e: f64,
    e2: f64,
    lon0: f64,
    fe: f64,
    fn_: f64,
    n: f64,
    c: f64,
    rho0: f64,
    /// q at the poles.
    qp: f64,
}

impl Albers {
    pub(super) fn new(p: &CrsParams) -> Self {
        let a = p.ellipsoid.a;
        let e = p.ellipsoid.e();
        let e2 = p.ellipsoid.e2();
        let (phi0, phi1, phi2) = (p.lat0.to_radians(), p.lat1.to_radians(), p.lat2.to_radians());
        let m1 = msfn(phi1, e2);
        let m2 = msfn(phi2, e2);
        let q0 = qsfn(phi0, e, e2);
        let q1 = qsfn(phi1, e, e2);
        let q2 = qsfn(phi2, e, e2);
        let n = if (phi1 - phi2).abs() > 1e-10 {
            (m1 * m1 - m2 * m2) / (q2 - q1)
        } else {
            phi1.sin()
        };
        let c = m1 * m1 + n * q1;
        let rho0 = a * (c - n * q0).max(0.0).sqrt() / n;
        Albers {
            a,
            e,
            e2,
            lon0: p.lon0.to_radians(),
            fe: p.false_easting,
            fn_: p.false_northing,
            n,
            c,
            rho0,
            qp: qsfn(std::f64::consts::FRAC_PI_2, e, e2),
        }
    }

    pub fn forward(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        let q = qsfn(lat, self.e, self.e2);
        let radicand = self.c - self.n * q;
        if radicand < -1e-12 {
            return Err(Error::OutOfDomain(format!(
                "latitude {} outside Albers cone",
                lat.to_degrees()
            )));
        }
        let rho = self.a * radicand.max(0.0).sqrt() / self.n;
        let theta = self.n * wrap_pi(lon - self.lon0);
        Ok((self.fe + rho * theta.sin(), self.fn_ + self.rho0 - rho * theta.cos()))
    }

    pub fn inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let mut xs = x - self.fe;
        let mut ys = self.rho0 - (y - self.fn_);
        if self.n < 0.0 {
            xs = -xs;
            ys = -ys;
        }
        let rho = xs.hypot(ys);
        let theta = xs.atan2(ys);
        let nr = rho * self.n / self.a;
        let q = (self.c - nr * nr) / self.n;
        let lat = if (q.abs() - self.qp.abs()).abs() < 1e-14 || q.abs() > self.qp.abs() {
            if q.abs() > self.qp.abs() + 1e-9 {
                return Err(Error::OutOfDomain(format!("({x}, {y}) lies outside the Albers cone")));
            }
            std::f64::consts::FRAC_PI_2.copysign(q)
        } else {
            self.phi_from_q(q)
        };
        Ok((wrap_pi(self.lon0 + theta / self.n), lat))
    }

    fn phi_from_q(&self, q: f64) -> f64 {
        let mut phi = (q / 2.0).clamp(-1.0, 1.0).asin();
        for _ in 0..30 {
            let s = phi.sin();
            let c = phi.cos();
            let es = self.e * s;
            let one = 1.0 - es * es;
            let d = one * one / (2.0 * c)
                * (q / (1.0 - self.e2) - s / one + (1.0 / (2.0 * self.e)) * ((1.0 - es) / (1.0 + es)).ln());
            phi += d;
            if d.abs() < 1e-15 {
                break;
            }
        }
        phi
    }
}

fn msfn(phi: f64, e2: f64) -> f64 {
    let s = phi.sin();
    phi.cos() / (1.0 - e2 * s * s).sqrt()
}

fn qsfn(phi: f64, e: f64, e2: f64) -> f64 {
    let s = phi.sin();
    let es = e * s;
    (1.0 - e2) * (s / (1.0 - es * es) - (1.0 / (2.0 * e)) * ((1.0 - es) / (1.0 + es)).ln())
}

#[cfg(test)]
mod tests {
    use crate::proj::{CrsDef, LonLat, ProjXY};

    #[test]
    fn origin_maps_to_zero() {
        let c = CrsDef::from_epsg(5070).unwrap();
        let p = c.project_forward(LonLat::new(-96.0, 23.0)).unwrap();
        assert!(p.x.abs() < 1e-9 && p.y.abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn poles_round_trip() {
        let c = CrsDef::from_epsg(5070).unwrap();
        let p = c.project_forward(LonLat::new(-96.0, 90.0)).unwrap();
        let back = c.project_inverse(p).unwrap();
        assert!((back.lat - 90.0).abs() < 1e-9);
        assert!(c.project_inverse(ProjXY::new(0.0, 5.0e7)).is_err());
    }
}
