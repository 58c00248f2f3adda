//! Pairwise vector-base amplitude panning on a horizontal loudspeaker ring.
//!
//! Angles are in degrees, 0° is frontal (the +x axis) and positive angles run
//! counterclockwise. Every azimuth is normalized into (−180, 180].
//!
//! A virtual source direction `p` is rendered by the adjacent pair whose unit
//! vectors `l1`, `l2` bracket it: `p = g1·l1 + g2·l2`, i.e. `g = pᵀ·L12⁻¹`
//! with the rows of `L12` being `l1` and `l2`. The raw gains are then rescaled
//! so that `g1² + g2² = c`, where the depth constant `c ∈ [0, 1]` sets the
//! total rendered power (`c = 1` near, smaller `c` farther).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sources closer than this (degrees) to a loudspeaker count as coincident.
pub const COINCIDENCE_TOL_DEG: f64 = 1e-6;

const SINGULAR_DET: f64 = 1e-9;
const NEGATIVE_GAIN_TOL: f64 = 1e-12;

/// Wraps an angle in degrees into (−180, 180].
pub fn normalize_azimuth(deg: f64) -> f64 {
    let wrapped = (deg + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        180.0
    } else {
        wrapped
    }
}

/// Counterclockwise angular distance from `from` to `to`, in [0, 360).
fn ccw_deg(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(360.0)
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = ccw_deg(a, b);
    d.min(360.0 - d)
}

/// Unit vector `(cos θ, sin θ)` for an azimuth in degrees.
pub fn direction_vector(azimuth_deg: f64) -> Result<[f64; 2]> {
    if !azimuth_deg.is_finite() {
        return Err(Error::arg(format!("azimuth must be finite, got {azimuth_deg}")));
    }
    let (s, c) = azimuth_deg.to_radians().sin_cos();
    Ok([c, s])
}

/// On-disk form of a ring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub azimuths_deg: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
}

fn default_radius() -> f64 {
    1.0
}

/// N loudspeakers on a horizontal circle, sorted by azimuth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RingSpec", into = "RingSpec")]
pub struct LoudspeakerRing {
    azimuths_deg: Vec<f64>,
    directions: Vec<[f64; 2]>,
    radius_m: f64,
}

impl LoudspeakerRing {
    pub fn new(azimuths_deg: &[f64], radius_m: f64) -> Result<Self> {
        if azimuths_deg.len() < 2 {
            return Err(Error::config(format!(
                "a ring needs at least 2 loudspeakers, got {}",
                azimuths_deg.len()
            )));
        }
        if !(radius_m.is_finite() && radius_m > 0.0) {
            return Err(Error::config(format!("radius must be positive, got {radius_m}")));
        }
        if let Some(bad) = azimuths_deg.iter().find(|a| !a.is_finite()) {
            return Err(Error::config(format!("non-finite loudspeaker azimuth {bad}")));
        }
        let mut azimuths: Vec<f64> = azimuths_deg.iter().map(|&a| normalize_azimuth(a)).collect();
        azimuths.sort_by(f64::total_cmp);
        for w in azimuths.windows(2) {
            if w[1] - w[0] <= COINCIDENCE_TOL_DEG {
                return Err(Error::config(format!("duplicate loudspeaker azimuth {}", w[0])));
            }
        }
        // wraparound duplicate, e.g. -179.9999999 and 180
        if angular_distance(azimuths[0], azimuths[azimuths.len() - 1]) <= COINCIDENCE_TOL_DEG {
            return Err(Error::config(format!("duplicate loudspeaker azimuth {}", azimuths[0])));
        }
        let directions = azimuths
            .iter()
            .map(|&a| direction_vector(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            azimuths_deg: azimuths,
            directions,
            radius_m,
        })
    }

    /// `n` evenly spaced loudspeakers, one of them at 0°.
    pub fn regular(n: usize, radius_m: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("a ring needs at least 2 loudspeakers, got {n}")));
        }
        let step = 360.0 / n as f64;
        let azimuths: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
        Self::new(&azimuths, radius_m)
    }

    pub fn len(&self) -> usize {
        self.azimuths_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.azimuths_deg.is_empty()
    }

    pub fn azimuths_deg(&self) -> &[f64] {
        &self.azimuths_deg
    }

    pub fn direction(&self, index: usize) -> [f64; 2] {
        self.directions[index]
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    /// Index of the loudspeaker coincident with `azimuth_deg`, if any.
    pub fn coincident(&self, azimuth_deg: f64) -> Option<usize> {
        self.azimuths_deg
            .iter()
            .position(|&a| angular_distance(a, azimuth_deg) <= COINCIDENCE_TOL_DEG)
    }
}

impl TryFrom<RingSpec> for LoudspeakerRing {
    type Error = Error;

    fn try_from(spec: RingSpec) -> Result<Self> {
        Self::new(&spec.azimuths_deg, spec.radius_m)
    }
}

impl From<LoudspeakerRing> for RingSpec {
    fn from(ring: LoudspeakerRing) -> Self {
        RingSpec {
            azimuths_deg: ring.azimuths_deg,
            radius_m: ring.radius_m,
        }
    }
}

/// How a source that coincides with a loudspeaker is rendered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanningMode {
    /// Play coincident sources from the single physical loudspeaker.
    Real,
    /// Always render from a pair; coincident sources use the two flanking
    /// neighbours of the coincident loudspeaker.
    #[default]
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SourceSpec", into = "SourceSpec")]
pub struct VirtualSource {
    azimuth_deg: f64,
    depth_c: f64,
}

/// On-disk form of a source, with the rendering mode alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub azimuth_deg: f64,
    #[serde(default = "default_depth")]
    pub depth_c: f64,
    #[serde(default)]
    pub mode: PanningMode,
}

fn default_depth() -> f64 {
    1.0
}

impl VirtualSource {
    pub fn new(azimuth_deg: f64, depth_c: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() {
            return Err(Error::arg(format!("azimuth must be finite, got {azimuth_deg}")));
        }
        check_depth(depth_c)?;
        Ok(Self {
            azimuth_deg: normalize_azimuth(azimuth_deg),
            depth_c,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn depth_c(&self) -> f64 {
        self.depth_c
    }
}

impl TryFrom<SourceSpec> for VirtualSource {
    type Error = Error;

    fn try_from(spec: SourceSpec) -> Result<Self> {
        Self::new(spec.azimuth_deg, spec.depth_c)
    }
}

impl From<VirtualSource> for SourceSpec {
    fn from(s: VirtualSource) -> Self {
        SourceSpec {
            azimuth_deg: s.azimuth_deg,
            depth_c: s.depth_c,
            mode: PanningMode::default(),
        }
    }
}

fn check_depth(depth_c: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&depth_c) {
        return Err(Error::arg(format!("depth constant must lie in [0, 1], got {depth_c}")));
    }
    Ok(())
}

/// Two adjacent loudspeakers and the 2x2 base whose rows are their unit vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBase {
    pub index_1: usize,
    pub index_2: usize,
    pub base: [[f64; 2]; 2],
}

impl PairBase {
    fn new(ring: &LoudspeakerRing, index_1: usize, index_2: usize) -> Result<Self> {
        let base = [ring.direction(index_1), ring.direction(index_2)];
        let pair = Self { index_1, index_2, base };
        if pair.det().abs() < SINGULAR_DET {
            return Err(Error::DegeneratePair {
                index_1,
                index_2,
                span_deg: ccw_deg(ring.azimuths_deg[index_1], ring.azimuths_deg[index_2]),
            });
        }
        Ok(pair)
    }

    pub fn det(&self) -> f64 {
        let [l1, l2] = self.base;
        l1[0] * l2[1] - l1[1] * l2[0]
    }
}

/// Picks the adjacent pair that renders `azimuth_deg`.
///
/// A source strictly inside an arc gets that arc's endpoints. A source on a
/// loudspeaker gets the loudspeaker's two neighbours, never the loudspeaker
/// itself.
pub fn select_pair(ring: &LoudspeakerRing, azimuth_deg: f64) -> Result<PairBase> {
    if !azimuth_deg.is_finite() {
        return Err(Error::arg(format!("azimuth must be finite, got {azimuth_deg}")));
    }
    let n = ring.len();
    let az = normalize_azimuth(azimuth_deg);
    if let Some(k) = ring.coincident(az) {
        return PairBase::new(ring, (k + n - 1) % n, (k + 1) % n);
    }
    let a = ring.azimuths_deg();
    let i = (0..n)
        .find(|&i| {
            let j = (i + 1) % n;
            let offset = ccw_deg(a[i], az);
            offset > 0.0 && offset < ccw_deg(a[i], a[j])
        })
        .expect("non-coincident azimuth lies strictly inside some arc");
    PairBase::new(ring, i, (i + 1) % n)
}

/// Raw gains `g = pᵀ·L12⁻¹` for the source direction.
pub fn solve_gains(pair: &PairBase, source: &VirtualSource) -> Result<(f64, f64)> {
    let det = pair.det();
    if det.abs() < SINGULAR_DET {
        return Err(Error::DegeneratePair {
            index_1: pair.index_1,
            index_2: pair.index_2,
            span_deg: f64::NAN,
        });
    }
    let p = direction_vector(source.azimuth_deg)?;
    let [l1, l2] = pair.base;
    // pᵀ times the adjugate of L12, over det
    let g1 = (p[0] * l2[1] - p[1] * l2[0]) / det;
    let g2 = (p[1] * l1[0] - p[0] * l1[1]) / det;
    if g1 < -NEGATIVE_GAIN_TOL || g2 < -NEGATIVE_GAIN_TOL {
        return Err(Error::OutOfArc {
            azimuth_deg: source.azimuth_deg,
            g1,
            g2,
        });
    }
    Ok((g1.max(0.0), g2.max(0.0)))
}

/// Rescales raw gains so that `g1² + g2² = depth_c`.
pub fn apply_depth(g1: f64, g2: f64, depth_c: f64) -> Result<(f64, f64)> {
    check_depth(depth_c)?;
    if depth_c == 0.0 {
        return Ok((0.0, 0.0));
    }
    let power = g1 * g1 + g2 * g2;
    if !(power.is_finite() && power > 0.0) {
        return Err(Error::arg("cannot rescale an all-zero gain pair to nonzero power"));
    }
    let scale = (depth_c / power).sqrt();
    Ok((g1 * scale, g2 * scale))
}

/// Per-loudspeaker gains for one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanningGains {
    pub gains: Vec<f64>,
}

impl PanningGains {
    pub fn power(&self) -> f64 {
        self.gains.iter().map(|g| g * g).sum()
    }

    /// `Σ gᵢ·lᵢ` over the ring.
    pub fn rendered_direction(&self, ring: &LoudspeakerRing) -> [f64; 2] {
        self.gains.iter().enumerate().fold([0.0, 0.0], |acc, (i, &g)| {
            let l = ring.direction(i);
            [acc[0] + g * l[0], acc[1] + g * l[1]]
        })
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.gains.len()).filter(|&i| self.gains[i] != 0.0).collect()
    }
}

/// Full N-length gain vector for a source on a ring.
pub fn ring_gain_vector(ring: &LoudspeakerRing, source: &VirtualSource, mode: PanningMode) -> Result<PanningGains> {
    let mut gains = vec![0.0; ring.len()];
    if mode == PanningMode::Real {
        if let Some(k) = ring.coincident(source.azimuth_deg) {
            gains[k] = source.depth_c.sqrt();
            return Ok(PanningGains { gains });
        }
    }
    let pair = select_pair(ring, source.azimuth_deg)?;
    let (g1, g2) = solve_gains(&pair, source)?;
    let (g1, g2) = apply_depth(g1, g2, source.depth_c)?;
    gains[pair.index_1] = g1;
    gains[pair.index_2] = g2;
    Ok(PanningGains { gains })
}
