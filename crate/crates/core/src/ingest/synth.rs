//! Synthetic rotating-LiDAR sweeps.
//!
//! A sensor at the origin casts one ray per (beam, azimuth) pair against a
//! ground plane at `z = -sensor_height` and a set of random axis-aligned
//! boxes standing on it. The nearest hit within `max_range` becomes a point
//! after Gaussian noise is added along the ray. Downward beams trace rings
//! on the ground whose spacing grows with range, so density falls with `r`
//! the same way it does in real sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{CartesianPoint, PointCloud, ATTRIBUTE_PEAK};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntensityModel {
    Constant(f64),
    /// Surface reflectivity fading linearly to 30 % at `max_range`.
    RangeDecay,
    /// Ground checkerboard of the given cell size (meters); boxes keep their
    /// own reflectivity.
    Checker(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub beams: u32,
    /// Lowest and highest beam elevation, radians.
    pub elevation: (f64, f64),
    pub azimuth_step: f64,
    pub max_range: f64,
    pub sensor_height: f64,
    pub noise_sigma: f64,
    pub intensity: IntensityModel,
    pub boxes: u32,
}

impl Default for SweepSpec {
    /// A 64-beam sensor, roughly 10^5 returns per sweep.
    fn default() -> Self {
        Self {
            beams: 64,
            elevation: (-24.8f64.to_radians(), 2.0f64.to_radians()),
            azimuth_step: 0.2f64.to_radians(),
            max_range: 80.0,
            sensor_height: 1.73,
            noise_sigma: 0.02,
            intensity: IntensityModel::RangeDecay,
            boxes: 40,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.elevation;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.beams == 0 {
            return bad("beam count must be at least 1".into());
        }
        if !(self.azimuth_step.is_finite() && self.azimuth_step > 0.0) {
            return bad(format!("azimuth step must be positive, got {}", self.azimuth_step));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return bad(format!("max range must be positive, got {}", self.max_range));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo > -PI_2 && hi < PI_2) {
            return bad(format!("elevation range ({lo}, {hi}) invalid"));
        }
        if !(self.sensor_height.is_finite() && self.sensor_height >= 0.0) {
            return bad(format!("sensor height must be non-negative, got {}", self.sensor_height));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        match self.intensity {
            IntensityModel::Constant(v) if !(0.0..=ATTRIBUTE_PEAK).contains(&v) => {
                bad(format!("constant intensity {v} outside [0, 255]"))
            }
            IntensityModel::Checker(c) if !(c.is_finite() && c > 0.0) => bad(format!("checker cell {c} must be positive")),
            _ => Ok(()),
        }
    }

    fn elevations(&self) -> Vec<f64> {
        let (lo, hi) = self.elevation;
        if self.beams == 1 {
            return vec![lo];
        }
        let step = (hi - lo) / (self.beams - 1) as f64;
        (0..self.beams).map(|i| lo + i as f64 * step).collect()
    }
}

const PI_2: f64 = std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy)]
struct Obstacle {
    lo: [f64; 3],
    hi: [f64; 3],
    reflectivity: f64,
}

impl Obstacle {
    /// Entry distance of a ray from the origin, slab method.
    fn hit(&self, dir: [f64; 3]) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            if dir[a].abs() < 1e-15 {
                if 0.0 < self.lo[a] || 0.0 > self.hi[a] {
                    return None;
                }
                continue;
            }
            let (u, v) = (self.lo[a] / dir[a], self.hi[a] / dir[a]);
            t0 = t0.max(u.min(v));
            t1 = t1.min(u.max(v));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

fn random_obstacles(spec: &SweepSpec, rng: &mut ChaCha8Rng) -> Vec<Obstacle> {
    let reach = (spec.max_range * 0.6).max(6.0);
    (0..spec.boxes)
        .map(|_| {
            let d = rng.random_range(4.0..reach);
            let az = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let (sx, sy) = (rng.random_range(0.8..4.0), rng.random_range(0.8..4.0));
            let height = rng.random_range(1.0..3.5);
            let (cx, cy) = (d * az.cos(), d * az.sin());
            Obstacle {
                lo: [cx - sx / 2.0, cy - sy / 2.0, -spec.sensor_height],
                hi: [cx + sx / 2.0, cy + sy / 2.0, -spec.sensor_height + height],
                reflectivity: rng.random_range(40.0..250.0),
            }
        })
        .collect()
}

const GROUND_REFLECTIVITY: f64 = 110.0;

/// Generates one sweep; identical `(spec, seed)` give identical clouds.
pub fn synth_sweep(spec: &SweepSpec, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obstacles = random_obstacles(spec, &mut rng);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let azimuths = (std::f64::consts::TAU / spec.azimuth_step).ceil() as usize;

    let mut points = Vec::new();
    let mut attributes = Vec::new();
    for el in spec.elevations() {
        let (sin_el, cos_el) = el.sin_cos();
        for j in 0..azimuths {
            let az = -std::f64::consts::PI + j as f64 * spec.azimuth_step;
            let (sin_az, cos_az) = az.sin_cos();
            let dir = [cos_el * cos_az, cos_el * sin_az, sin_el];

            let mut best: Option<(f64, f64)> = None;
            if sin_el < 0.0 {
                let t = spec.sensor_height / -sin_el;
                if t > 0.0 {
                    best = Some((t, GROUND_REFLECTIVITY));
                }
            }
            for o in &obstacles {
                if let Some(t) = o.hit(dir) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, o.reflectivity));
                    }
                }
            }
            let Some((t, reflectivity)) = best else { continue };
            if t > spec.max_range {
                continue;
            }
            let range = if spec.noise_sigma > 0.0 { t + noise.sample(&mut rng) } else { t };
            if range <= 0.0 {
                continue;
            }
            let p = CartesianPoint::new(range * dir[0], range * dir[1], range * dir[2]);
            let ground = reflectivity == GROUND_REFLECTIVITY;
            let a = match spec.intensity {
                IntensityModel::Constant(v) => v,
                IntensityModel::RangeDecay => reflectivity * (1.0 - 0.7 * t / spec.max_range),
                IntensityModel::Checker(cell) if ground => {
                    let parity = ((p.x / cell).floor() as i64 + (p.y / cell).floor() as i64).rem_euclid(2);
                    if parity == 0 { 60.0 } else { 200.0 }
                }
                IntensityModel::Checker(_) => reflectivity,
            };
            points.push(p);
            attributes.push(a.round().clamp(0.0, ATTRIBUTE_PEAK));
        }
    }
    PointCloud::new(points, attributes)
}
