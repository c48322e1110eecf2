//! Dempster–Shafer occupancy algebra over the frame `{empty, occupied}`.
//!
//! A [`Belief`] carries the masses of `{empty}`, `{occupied}` and the whole
//! frame (`unknown`). A beam `O → Q` says the space it crossed is empty and
//! the space just behind its hit is probably occupied. [`beam_belief`] turns
//! that into masses at a query point, [`smoothed_beam_belief`] does the same
//! with the step and the occupied kernel blurred by measurement and
//! registration noise, and [`fuse`] combines independent beliefs.

use nalgebra::Vector3;
use statrs::function::erf::erf;

use crate::error::{Error, Result};

/// Conflict above which two beliefs are treated as totally contradictory.
const TOTAL_CONFLICT: f64 = 1.0 - 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Belief {
    pub e: f64,
    pub o: f64,
    pub u: f64,
}

impl Default for Belief {
    fn default() -> Self {
        Belief::VACUOUS
    }
}

impl Belief {
    /// All mass on `unknown`; the identity of [`fuse`].
    pub const VACUOUS: Belief = Belief {
        e: 0.0,
        o: 0.0,
        u: 1.0,
    };

    /// Validates non-negativity and unit sum (within 1e-9).
    pub fn new(e: f64, o: f64, u: f64) -> Result<Self> {
        let b = Belief { e, o, u };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::InvalidParams(format!("invalid belief ({e}, {o}, {u})")))
        }
    }

    /// Builds `(e, o, 1 - e - o)`, clamping tiny negative residue.
    pub fn from_eo(e: f64, o: f64) -> Self {
        let u = (1.0 - e - o).max(0.0);
        Belief { e, o, u }
    }

    pub fn is_valid(&self) -> bool {
        [self.e, self.o, self.u]
            .iter()
            .all(|&m| m.is_finite() && m >= 0.0)
            && (self.e + self.o + self.u - 1.0).abs() <= 1e-9
    }

    pub fn is_vacuous(&self) -> bool {
        self.e == 0.0 && self.o == 0.0
    }

    /// `empty` is strictly larger than both other masses.
    pub fn empty_dominant(&self) -> bool {
        self.e > self.o && self.e > self.u
    }

    /// [`fuse`] without the conflict flag.
    pub fn combine(self, other: Belief) -> Belief {
        fuse(self, other).belief
    }
}

/// Result of Dempster's rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fusion {
    pub belief: Belief,
    /// The inputs were in total conflict; `belief` is vacuous.
    pub total_conflict: bool,
}

/// Dempster's rule of combination with conflict `K = o₁e₂ + e₁o₂`.
///
/// Total conflict (`K = 1`) is not an error: the result is vacuous and flagged
/// so long fusion chains keep going.
pub fn fuse(a: Belief, b: Belief) -> Fusion {
    let k = a.o * b.e + a.e * b.o;
    if k >= TOTAL_CONFLICT {
        return Fusion {
            belief: Belief::VACUOUS,
            total_conflict: true,
        };
    }
    let norm = 1.0 / (1.0 - k);
    Fusion {
        belief: Belief {
            e: (a.e * b.e + a.e * b.u + a.u * b.e) * norm,
            o: (a.o * b.o + a.o * b.u + a.u * b.o) * norm,
            u: a.u * b.u * norm,
        },
        total_conflict: false,
    }
}

/// Left fold of [`fuse`], starting from the vacuous belief. Returns the
/// number of total-conflict steps alongside the result.
pub fn fuse_all<I: IntoIterator<Item = Belief>>(beliefs: I) -> (Belief, usize) {
    beliefs
        .into_iter()
        .fold((Belief::VACUOUS, 0), |(acc, conflicts), b| {
            let f = fuse(acc, b);
            (f.belief, conflicts + f.total_conflict as usize)
        })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    /// Conflicting mass.
    pub conf: f64,
    /// Consistent mass.
    pub cons: f64,
    /// Uncertain mass.
    pub unc: f64,
}

impl Comparison {
    /// Conflict strictly dominates.
    pub fn is_moving(&self) -> bool {
        self.conf > self.cons && self.conf > self.unc
    }
}

/// Consistency of two beliefs about the same location. Symmetric.
pub fn compare(a: Belief, b: Belief) -> Comparison {
    Comparison {
        conf: a.e * b.o + a.o * b.e,
        cons: a.e * b.e + a.o * b.o + a.u * b.u,
        unc: a.u * (b.e + b.o) + b.u * (a.e + a.o),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyParams {
    /// Range measurement noise, meters.
    pub sigma_m: f64,
    /// Registration noise, meters.
    pub sigma_r: f64,
    /// Angular scale of the rotation occupancy weight, radians.
    pub theta_scale: f64,
    /// Length unit of the occupied kernel `exp(-r²/2)`, meters.
    pub range_kernel_scale: f64,
    pub conv_table_step: f64,
    pub conv_table_halfwidth: f64,
}

impl Default for OccupancyParams {
    fn default() -> Self {
        OccupancyParams {
            sigma_m: 0.05,
            sigma_r: 0.15,
            theta_scale: 0.0035,
            range_kernel_scale: 1.0,
            conv_table_step: 0.01,
            conv_table_halfwidth: 5.0,
        }
    }
}

impl OccupancyParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_m,
            self.sigma_r,
            self.theta_scale,
            self.range_kernel_scale,
            self.conv_table_step,
            self.conv_table_halfwidth,
        ];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidParams("occupancy parameters must be positive".into()))
        }
    }

    /// Standard deviation of the combined noise kernel.
    pub fn sigma_f(&self) -> f64 {
        self.sigma_m.hypot(self.sigma_r)
    }

    /// Rotation occupancy weight `exp(-θ²/(2λ²))`.
    #[inline]
    pub fn f_theta(&self, theta: f64) -> f64 {
        let t = theta / self.theta_scale;
        (-0.5 * t * t).exp()
    }

    /// Unsmoothed occupied mass at signed offset `s` (see [`BeamRelation`]).
    #[inline]
    pub fn sharp_occupied(&self, s: f64) -> f64 {
        if s > 0.0 {
            0.0
        } else {
            let r = s / self.range_kernel_scale;
            (-0.5 * r * r).exp()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizeParams {
    pub r_sup: f64,
    pub r_inf: f64,
}

impl Default for DiscretizeParams {
    fn default() -> Self {
        DiscretizeParams {
            r_sup: 0.8,
            r_inf: 0.6,
        }
    }
}

impl DiscretizeParams {
    pub fn validate(&self) -> Result<()> {
        if 0.0 < self.r_inf && self.r_inf <= self.r_sup && self.r_sup <= 1.0 {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "need 0 < r_inf <= r_sup <= 1, got r_inf={} r_sup={}",
                self.r_inf, self.r_sup
            )))
        }
    }
}

/// A lidar beam from sensor origin to measured endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamGeometry {
    pub origin: Vector3<f64>,
    pub endpoint: Vector3<f64>,
}

impl BeamGeometry {
    pub fn new(origin: Vector3<f64>, endpoint: Vector3<f64>) -> Result<Self> {
        if (endpoint - origin).norm_squared() == 0.0 {
            return Err(Error::DegenerateGeometry("beam has zero length"));
        }
        Ok(BeamGeometry { origin, endpoint })
    }
}

/// Angle between two directions, stable for small angles.
#[inline]
pub fn ray_angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Where a query point sits relative to a beam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamRelation {
    /// `|OQ| - |OP'|` where `P'` is the projection of `P` on the beam line:
    /// positive when the beam continues past `P'`, non-positive when `P'` lies
    /// at or behind the hit `Q`. `|s|` is the distance `P'Q`.
    pub s: f64,
    /// Angle between `OP` and `OQ`.
    pub theta: f64,
}

pub fn beam_relation(p: &Vector3<f64>, beam: &BeamGeometry) -> Result<BeamRelation> {
    let op = p - beam.origin;
    if op.norm_squared() == 0.0 {
        return Err(Error::DegenerateGeometry("query point coincides with beam origin"));
    }
    let oq = beam.endpoint - beam.origin;
    let len = oq.norm();
    if len == 0.0 {
        return Err(Error::DegenerateGeometry("beam has zero length"));
    }
    let along = op.dot(&oq) / len;
    Ok(BeamRelation {
        s: len - along,
        theta: ray_angle(&op, &oq),
    })
}

/// Masses at `p` induced by one beam, with a sharp empty/occupied boundary.
pub fn beam_belief(p: &Vector3<f64>, beam: &BeamGeometry, params: &OccupancyParams) -> Result<Belief> {
    let rel = beam_relation(p, beam)?;
    let e_r = if rel.s > 0.0 { 1.0 } else { 0.0 };
    let e = params.f_theta(rel.theta) * e_r;
    let o = params.sharp_occupied(rel.s);
    Ok(Belief::from_eo(e, o))
}

/// Sampled `e_r ⊗ F` and `o_r ⊗ F` over the signed offset `s`, where `F` is
/// the zero-mean Gaussian with variance `σ_m² + σ_r²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTables {
    start: f64,
    step: f64,
    inv_step: f64,
    empty: Vec<f64>,
    occupied: Vec<f64>,
}

/// Nodes per Simpson integration of the occupied convolution.
const CONV_INTERVALS: usize = 512;
/// Integration half-width in units of the noise standard deviation.
const CONV_SIGMAS: f64 = 9.0;

pub fn build_smoothing_tables(params: &OccupancyParams) -> Result<ConvTables> {
    params.validate()?;
    let step = params.conv_table_step;
    let hw = params.conv_table_halfwidth;
    let n = (2.0 * hw / step).round() as usize + 1;
    let sigma = params.sigma_f();
    let samples: Vec<f64> = (0..n).map(|i| -hw + i as f64 * step).collect();
    let empty = samples
        .iter()
        .map(|&s| 0.5 * (1.0 + erf(s / (sigma * std::f64::consts::SQRT_2))))
        .collect();
    let occupied = samples
        .iter()
        .map(|&s| convolve_occupied(s, sigma, params))
        .collect();
    Ok(ConvTables {
        start: -hw,
        step,
        inv_step: 1.0 / step,
        empty,
        occupied,
    })
}

/// `∫ o_r(s - x) N(x; 0, σ²) dx`. `o_r(s - x)` is non-zero only for `x >= s`,
/// so the integral starts at the discontinuity and the integrand is smooth.
fn convolve_occupied(s: f64, sigma: f64, params: &OccupancyParams) -> f64 {
    let lo = s.max(-CONV_SIGMAS * sigma);
    let hi = CONV_SIGMAS * sigma;
    if lo >= hi {
        return 0.0;
    }
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |x: f64| {
        let z = x / sigma;
        params.sharp_occupied(s - x) * norm * (-0.5 * z * z).exp()
    };
    let h = (hi - lo) / CONV_INTERVALS as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..CONV_INTERVALS {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

impl ConvTables {
    #[inline]
    fn lookup(&self, table: &[f64], s: f64) -> f64 {
        let x = (s - self.start) * self.inv_step;
        if !(x > 0.0) {
            return table[0];
        }
        let last = table.len() - 1;
        if x >= last as f64 {
            return table[last];
        }
        let i = x as usize;
        let t = x - i as f64;
        table[i] + (table[i + 1] - table[i]) * t
    }

    /// Smoothed empty step at offset `s`.
    #[inline]
    pub fn empty(&self, s: f64) -> f64 {
        self.lookup(&self.empty, s)
    }

    /// Smoothed occupied kernel at offset `s`.
    #[inline]
    pub fn occupied(&self, s: f64) -> f64 {
        self.lookup(&self.occupied, s)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Sample positions and both tables, for inspection.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.empty.len()).map(|i| {
            (
                self.start + i as f64 * self.step,
                self.empty[i],
                self.occupied[i],
            )
        })
    }

    /// Noise-smoothed masses for a beam relation.
    #[inline]
    pub fn belief(&self, rel: BeamRelation, params: &OccupancyParams) -> Belief {
        let mut e = params.f_theta(rel.theta) * self.empty(rel.s);
        let mut o = self.occupied(rel.s);
        let total = e + o;
        if total > 1.0 {
            e /= total;
            o /= total;
        }
        Belief::from_eo(e, o)
    }
}

/// [`beam_belief`] with the step and kernel replaced by their smoothed tables.
pub fn smoothed_beam_belief(
    p: &Vector3<f64>,
    beam: &BeamGeometry,
    params: &OccupancyParams,
    tables: &ConvTables,
) -> Result<Belief> {
    Ok(tables.belief(beam_relation(p, beam)?, params))
}

/// Belief strength for a point at distance `|OP|` from a sensor whose
/// farthest return is `b_norm` away: `r_sup` at the sensor, falling linearly
/// to `r_inf` at the farthest return.
pub fn depth_weight_l(
    p: &Vector3<f64>,
    b_norm: f64,
    origin: &Vector3<f64>,
    params: &DiscretizeParams,
) -> Result<f64> {
    if !(b_norm > 0.0) {
        return Err(Error::DegenerateScan("farthest-point distance is zero"));
    }
    let ratio = (p - origin).norm() / b_norm;
    let l = params.r_inf + (params.r_sup - params.r_inf) * (1.0 - ratio);
    Ok(l.clamp(params.r_inf, params.r_sup))
}

/// Snaps a belief to mass `l` on its strictly dominant hypothesis. Without a
/// strict maximum, or when `unknown` dominates, the result is vacuous.
pub fn discretize(b: Belief, l: f64) -> Belief {
    let e = if b.e > b.o && b.e > b.u { l } else { 0.0 };
    let o = if b.o > b.e && b.o > b.u { l } else { 0.0 };
    Belief { e, o, u: 1.0 - e - o }
}
