//! Constellation geometry: circular two-body orbits, ground stations on the
//! rotating Earth, the geostationary relay, eclipse and visibility
//! predicates, and contact-window extraction.
//!
//! Everything here is a pure function of time; positions use an
//! Earth-centered inertial (ECI) frame with kilometers throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH_KM3_S2: f64 = 398600.4418;
/// Mean Earth radius, km. Also the occlusion radius for eclipse and
/// line-of-sight checks.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Earth sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Geostationary orbit radius, km.
pub const GEO_RADIUS_KM: f64 = 42_164.0;
/// Contact-window boundaries are bisected down to this width, seconds.
pub const WINDOW_REFINE_S: f64 = 0.1;

/// Position in the ECI frame, kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }

    /// Unit vector in the same direction; zero-length input is returned as-is.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, other: Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }
}

/// Circular orbit description. Eccentricity is fixed at zero, so the only
/// in-plane degree of freedom is the phase angle at epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    /// Orbit radius: Earth radius plus altitude, km.
    pub semi_major_axis_km: f64,
    pub inclination_deg: f64,
    /// Right ascension of the ascending node, degrees.
    pub raan_deg: f64,
    /// Position along the orbit at t = 0, degrees.
    pub phase_deg: f64,
}

impl OrbitalElements {
    pub fn validate(&self) -> Result<()> {
        if !self.semi_major_axis_km.is_finite() || self.semi_major_axis_km <= EARTH_RADIUS_KM {
            return Err(SimError::InvalidInput(format!(
                "semi-major axis {} km must exceed the Earth radius {} km",
                self.semi_major_axis_km, EARTH_RADIUS_KM
            )));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            return Err(SimError::InvalidInput(format!(
                "inclination {} deg outside [0, 180]",
                self.inclination_deg
            )));
        }
        Ok(())
    }

    /// Orbital period, seconds. Assumes the elements validate.
    pub fn period_s(&self) -> f64 {
        let a = self.semi_major_axis_km;
        2.0 * std::f64::consts::PI * (a * a * a / MU_EARTH_KM3_S2).sqrt()
    }
}

/// A ground endpoint fixed to the rotating Earth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub name: String,
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub min_elevation_deg: f64,
}

impl GroundStation {
    pub fn validate(&self) -> Result<()> {
        if self.latitude_deg.abs() > 90.0 {
            return Err(SimError::InvalidInput(format!(
                "station {}: latitude {} outside [-90, 90]",
                self.name, self.latitude_deg
            )));
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            return Err(SimError::InvalidInput(format!(
                "station {}: min elevation {} outside [0, 90)",
                self.name, self.min_elevation_deg
            )));
        }
        Ok(())
    }
}

/// One interval during which a visibility predicate holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactWindow {
    pub endpoint_id: String,
    pub t_start: f64,
    pub t_end: f64,
}

impl ContactWindow {
    pub fn duration_s(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_start && t < self.t_end
    }
}

/// Period of a circular orbit with the given radius, seconds.
pub fn orbital_period(semi_major_axis_km: f64) -> Result<f64> {
    if !semi_major_axis_km.is_finite() || semi_major_axis_km <= EARTH_RADIUS_KM {
        return Err(SimError::InvalidInput(format!(
            "semi-major axis {semi_major_axis_km} km must exceed the Earth radius {EARTH_RADIUS_KM} km"
        )));
    }
    Ok(2.0 * std::f64::consts::PI * (semi_major_axis_km.powi(3) / MU_EARTH_KM3_S2).sqrt())
}

/// Position on the circular orbit at time `t` seconds after epoch.
pub fn propagate(elements: &OrbitalElements, t: f64) -> Vec3 {
    let a = elements.semi_major_axis_km;
    let period = elements.period_s();
    let u = (elements.phase_deg + 360.0 * t / period).to_radians();
    let incl = elements.inclination_deg.to_radians();
    let raan = elements.raan_deg.to_radians();

    // In-plane position, then rotate by inclination about x, then RAAN about z.
    let xp = a * u.cos();
    let yp = a * u.sin();
    let (ci, si) = (incl.cos(), incl.sin());
    let (co, so) = (raan.cos(), raan.sin());
    Vec3::new(
        xp * co - yp * ci * so,
        xp * so + yp * ci * co,
        yp * si,
    )
}

/// Inertial position of a ground station at time `t`, on the mean sphere.
pub fn ground_station_position(station: &GroundStation, t: f64) -> Vec3 {
    surface_position(station.latitude_deg, station.longitude_deg, t)
}

/// Inertial position of a point fixed at (lat, lon) on the rotating Earth.
pub fn surface_position(latitude_deg: f64, longitude_deg: f64, t: f64) -> Vec3 {
    let lat = latitude_deg.to_radians();
    let lon = longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * t;
    Vec3::new(
        EARTH_RADIUS_KM * lat.cos() * lon.cos(),
        EARTH_RADIUS_KM * lat.cos() * lon.sin(),
        EARTH_RADIUS_KM * lat.sin(),
    )
}

/// Inertial position of a geostationary satellite parked at the given
/// geographic longitude.
pub fn geostationary_position(longitude_deg: f64, t: f64) -> Vec3 {
    let lon = longitude_deg.to_radians() + EARTH_ROTATION_RAD_S * t;
    Vec3::new(GEO_RADIUS_KM * lon.cos(), GEO_RADIUS_KM * lon.sin(), 0.0)
}

/// Cylindrical-shadow eclipse test. `sun_dir` must be a unit vector.
pub fn is_eclipsed(sat: Vec3, sun_dir: Vec3) -> bool {
    let along = sat.dot(sun_dir);
    if along >= 0.0 {
        return false;
    }
    let radial = sat - sun_dir.scale(along);
    radial.norm() < EARTH_RADIUS_KM
}

/// Elevation of `sat` above the local horizon plane at `station_pos`,
/// degrees. Negative below the horizon.
pub fn elevation_deg(sat: Vec3, station_pos: Vec3) -> Result<f64> {
    let rel = sat - station_pos;
    let dist = rel.norm();
    if dist < 1e-9 {
        return Err(SimError::InvalidInput(
            "satellite position coincides with the station".to_string(),
        ));
    }
    let sin_el = rel.dot(station_pos.normalized()) / dist;
    Ok(sin_el.clamp(-1.0, 1.0).asin().to_degrees())
}

/// True when the segment from `a` to `b` clears the Earth sphere.
pub fn has_line_of_sight(a: Vec3, b: Vec3) -> bool {
    let d = b - a;
    let dd = d.dot(d);
    if dd == 0.0 {
        return true;
    }
    let t = -a.dot(d) / dd;
    if !(0.0..=1.0).contains(&t) {
        // Closest approach lies outside the segment; both endpoints are
        // above the surface, so the segment clears.
        return true;
    }
    (a + d.scale(t)).norm() >= EARTH_RADIUS_KM
}

/// Extract maximal visibility intervals of `visible` over `[t0, t1]`.
///
/// The predicate is sampled every `dt_sample` seconds and each transition is
/// refined by bisection to [`WINDOW_REFINE_S`]. Runs touching the interval
/// ends are clipped to `t0`/`t1`.
pub fn contact_windows<F>(
    mut visible: F,
    endpoint_id: &str,
    t0: f64,
    t1: f64,
    dt_sample: f64,
) -> Vec<ContactWindow>
where
    F: FnMut(f64) -> bool,
{
    let mut windows = Vec::new();
    if !(t1 > t0) || !(dt_sample > 0.0) {
        return windows;
    }

    // Sample instants: t0, t0 + dt, ..., with t1 forced as the last sample.
    let mut samples = Vec::new();
    let mut k = 0u64;
    loop {
        let t = t0 + (k as f64) * dt_sample;
        if t >= t1 {
            break;
        }
        samples.push(t);
        k += 1;
    }
    samples.push(t1);

    let mut open_start: Option<f64> = None;
    let mut prev_t = samples[0];
    let mut prev_vis = visible(samples[0]);
    if prev_vis {
        open_start = Some(t0);
    }
    for &t in &samples[1..] {
        let vis = visible(t);
        if vis && !prev_vis {
            open_start = Some(refine_rising(&mut visible, prev_t, t));
        } else if !vis && prev_vis {
            let start = open_start.take().expect("open window on falling edge");
            let end = refine_falling(&mut visible, prev_t, t);
            push_window(&mut windows, endpoint_id, start, end);
        }
        prev_t = t;
        prev_vis = vis;
    }
    if let Some(start) = open_start {
        push_window(&mut windows, endpoint_id, start, t1);
    }
    windows
}

fn push_window(windows: &mut Vec<ContactWindow>, endpoint_id: &str, start: f64, end: f64) {
    if end > start {
        windows.push(ContactWindow {
            endpoint_id: endpoint_id.to_string(),
            t_start: start,
            t_end: end,
        });
    }
}

/// Bisect a false→true transition; returns the earliest known-true time.
fn refine_rising<F: FnMut(f64) -> bool>(visible: &mut F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > WINDOW_REFINE_S {
        let mid = 0.5 * (lo + hi);
        if visible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Bisect a true→false transition; returns the latest known-true time.
fn refine_falling<F: FnMut(f64) -> bool>(visible: &mut F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > WINDOW_REFINE_S {
        let mid = 0.5 * (lo + hi);
        if visible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
