//! Ellipsoidal Transverse Mercator using the Krüger series in the third
//! flattening, truncated at order n^4. Accurate to well below a millimetre
//! within 45 degrees of the central meridian; points further out are
//! rejected.

use super::{wrap_pi, CrsParams};
use crate::error::{Error, Result};

const MAX_DLON: f64 = 45.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone)]
pub struct TransverseMercator {
    e: f64,
    e2: f64,
    lon0: f64,
    k0: f64,
    fe: f64,
    fn_: f64,
    /// Rectifying radius A.
    rect_a: f64,
    alpha: [f64; 4],
    beta: [f64; 4],
    /// Scaled meridian arc to the latitude of origin.
    xi0: f64,
}

impl TransverseMercator {
    pub(super) fn new(p: &CrsParams) -> Self {
        let n = p.ellipsoid.n();
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let rect_a = p.ellipsoid.a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0);
        let alpha = [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0,
            49561.0 * n4 / 161280.0,
        ];
        let beta = [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0,
            4397.0 * n4 / 161280.0,
        ];
        let mut tm = TransverseMercator {
            e: p.ellipsoid.e(),
            e2: p.ellipsoid.e2(),
            lon0: p.lon0.to_radians(),
            k0: p.k0,
            fe: p.false_easting,
            fn_: p.false_northing,
            rect_a,
            alpha,
            beta,
            xi0: 0.0,
        };
        tm.xi0 = tm.gauss_kruger(p.lat0.to_radians(), 0.0).0;
        tm
    }

    /// Tangent of the conformal latitude from the tangent of the geodetic latitude.
    fn tau_prime(&self, tau: f64) -> f64 {
        let tau1 = tau.hypot(1.0);
        let sig = (self.e * (self.e * tau / tau1).atanh()).sinh();
        tau * sig.hypot(1.0) - sig * tau1
    }

    /// Newton inversion of `tau_prime`.
    fn tau_from_prime(&self, taup: f64) -> f64 {
        let mut tau = taup / (1.0 - self.e2).max(f64::MIN_POSITIVE);
        for _ in 0..8 {
            let tp = self.tau_prime(tau);
            let dtau =
                (taup - tp) / tp.hypot(1.0) * (1.0 + (1.0 - self.e2) * tau * tau) / ((1.0 - self.e2) * tau.hypot(1.0));
            tau += dtau;
            if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }

    /// Unscaled (xi, eta) for geodetic latitude `phi` and longitude offset `dlon`.
    fn gauss_kruger(&self, phi: f64, dlon: f64) -> (f64, f64) {
        let taup = self.tau_prime(phi.tan());
        let xip = taup.atan2(dlon.cos());
        let etap = (dlon.sin() / taup.hypot(dlon.cos())).asinh();
        let mut xi = xip;
        let mut eta = etap;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi += a * (k * xip).sin() * (k * etap).cosh();
            eta += a * (k * xip).cos() * (k * etap).sinh();
        }
        (xi, eta)
    }

    pub fn forward(&self, lon: f64, lat: f64) -> Result<(f64, f64)> {
        let dlon = wrap_pi(lon - self.lon0);
        if dlon.abs() > MAX_DLON {
            return Err(Error::OutOfDomain(format!(
                "longitude offset {:.3} deg exceeds Transverse Mercator series range",
                dlon.to_degrees()
            )));
        }
        let (xi, eta) = if lat.abs() >= std::f64::consts::FRAC_PI_2 {
            // every series term vanishes at the pole
            (std::f64::consts::FRAC_PI_2.copysign(lat), 0.0)
        } else {
            self.gauss_kruger(lat, dlon)
        };
        let x = self.fe + self.k0 * self.rect_a * eta;
        let y = self.fn_ + self.k0 * self.rect_a * (xi - self.xi0);
        Ok((x, y))
    }

    pub fn inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let xi = (y - self.fn_) / (self.k0 * self.rect_a) + self.xi0;
        let eta = (x - self.fe) / (self.k0 * self.rect_a);
        let mut xip = xi;
        let mut etap = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xip -= b * (k * xi).sin() * (k * eta).cosh();
            etap -= b * (k * xi).cos() * (k * eta).sinh();
        }
        let s = etap.sinh();
        let c = xip.cos();
        let r = s.hypot(c);
        let dlon = s.atan2(c);
        let taup = xip.sin() / r;
        let lat = self.tau_from_prime(taup).atan();
        if dlon.abs() > MAX_DLON || !lat.is_finite() {
            return Err(Error::OutOfDomain(format!(
                "({x}, {y}) lies outside the Transverse Mercator series range"
            )));
        }
        Ok((wrap_pi(self.lon0 + dlon), lat))
    }
}
