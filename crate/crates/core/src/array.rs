//! Linear array geometry, arrival and steering phases, array factor,
//! Van Atta pairing, heterodyne conjugation and beam squint.
//!
//! Angles are measured from boresight. A source at angle `θ` is farther from
//! element `i` than from element 1 by `(xᵢ - x₁)·sin θ`, so its arrival phase
//! relative to element 1 is `-β·(xᵢ - x₁)·sin θ`. The array factor uses the
//! same convention, which makes the conjugate of the arrival phases peak
//! back at `θ`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

/// Half a wavelength at 60 GHz.
pub const HALF_WAVE_60GHZ: f64 = C / 60e9 / 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrayError {
    #[error("array needs at least one element")]
    Empty,
    #[error("element spacing must be positive and finite, got {0}")]
    Spacing(f64),
    #[error("element index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("no main lobe: |(f_rx/f_tx)·sin θ| = {0} exceeds 1")]
    NoMainLobe(f64),
}

/// Wavenumber `2π f / c`.
pub fn wavenumber(freq: f64) -> f64 {
    TAU * freq / C
}

/// Equidistant linear array. Positions are element offsets along the array
/// axis, centered on the array phase center.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    spacing: f64,
    positions: Vec<f64>,
}

impl ArrayGeometry {
    pub fn uniform(n: usize, spacing: f64) -> Result<Self, ArrayError> {
        if n == 0 {
            return Err(ArrayError::Empty);
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(ArrayError::Spacing(spacing));
        }
        let mid = (n - 1) as f64 / 2.0;
        let positions = (0..n).map(|i| (i as f64 - mid) * spacing).collect();
        Ok(Self { spacing, positions })
    }

    /// `n` elements at λ/2 of 60 GHz.
    pub fn half_wave(n: usize) -> Result<Self, ArrayError> {
        Self::uniform(n, HALF_WAVE_60GHZ)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn aperture(&self) -> f64 {
        self.spacing * (self.n() - 1) as f64
    }
}

/// Fixed-gain element with a hard coverage cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementPattern {
    pub gain_dbi: f64,
    /// Cone half-angle in radians.
    pub cone_half_angle: f64,
}

impl Default for ElementPattern {
    /// 4 dBi over a cone of 1.6π sr, i.e. half-angle `acos(0.2)`.
    fn default() -> Self {
        Self {
            gain_dbi: 4.0,
            cone_half_angle: 0.2f64.acos(),
        }
    }
}

impl ElementPattern {
    /// Gain in dBi toward `angle` off boresight, or `None` outside the cone.
    pub fn gain_db(&self, angle: f64) -> Option<f64> {
        (angle.abs() <= self.cone_half_angle).then_some(self.gain_dbi)
    }

    pub fn covers(&self, angle: f64) -> bool {
        angle.abs() <= self.cone_half_angle
    }

    /// Solid angle of the coverage cone in steradians.
    pub fn solid_angle(&self) -> f64 {
        TAU * (1.0 - self.cone_half_angle.cos())
    }
}

/// Per-element phases in radians, relative to element 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|p| -p).collect())
    }
}

/// Phase of each element relative to element 1 for a far-field plane wave
/// arriving from `angle` at `freq`.
pub fn arrival_phases(geom: &ArrayGeometry, angle: f64, freq: f64) -> PhaseVector {
    let beta = wavenumber(freq);
    let x1 = geom.positions[0];
    PhaseVector(
        geom.positions
            .iter()
            .map(|&x| -beta * (x - x1) * angle.sin())
            .collect(),
    )
}

/// Complex far-field sum of unit elements driven with `phases`, observed at
/// `angle` and radiating at `freq`.
pub fn array_factor(phases: &PhaseVector, geom: &ArrayGeometry, angle: f64, freq: f64) -> Complex64 {
    let beta = wavenumber(freq);
    let x1 = geom.positions[0];
    phases
        .0
        .iter()
        .zip(&geom.positions)
        .map(|(&p, &x)| Complex64::from_polar(1.0, p - beta * (x - x1) * angle.sin()))
        .sum()
}

/// `|AF|²` in dB at each angle.
pub fn pattern_db(
    phases: &PhaseVector,
    geom: &ArrayGeometry,
    angles: &[f64],
    freq: f64,
) -> Vec<f64> {
    angles
        .iter()
        .map(|&a| 10.0 * array_factor(phases, geom, a, freq).norm_sqr().max(1e-300).log10())
        .collect()
}

/// Angle of the largest `|AF|` on the grid, with its power `|AF|²`.
pub fn pattern_peak(
    phases: &PhaseVector,
    geom: &ArrayGeometry,
    angles: &[f64],
    freq: f64,
) -> (f64, f64) {
    angles
        .iter()
        .map(|&a| (a, array_factor(phases, geom, a, freq).norm_sqr()))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        })
}

/// Uniform angle grid over `[-limit, limit]` with `step` spacing.
pub fn angle_grid(limit: f64, step: f64) -> Vec<f64> {
    let n = (2.0 * limit / step).floor() as usize;
    (0..=n).map(|k| -limit + k as f64 * step).collect()
}

/// Van Atta partner of 1-based element `i`: `n + 1 - i`.
pub fn van_atta_map(i: usize, n: usize) -> Result<usize, ArrayError> {
    if i == 0 || i > n {
        return Err(ArrayError::IndexOutOfRange { index: i, n });
    }
    Ok(n + 1 - i)
}

/// Which mixing product is kept after heterodyning with an LO above the RF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    /// Difference product `ω_LO - ω_RF`: the phase is negated.
    Lower,
    /// Sum product: the phase is kept.
    Upper,
}

/// Order in which retransmitting elements are fed from receiving elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementOrder {
    Same,
    Reversed,
}

/// Phase carried to the transmitter after heterodyne mixing.
pub fn heterodyne_conjugate(phase: f64, sideband: Sideband) -> f64 {
    match sideband {
        Sideband::Lower => -phase,
        Sideband::Upper => phase,
    }
}

/// Retransmit phases for a given sideband and element wiring. Element `j`
/// transmits the mixed phase of the element that feeds it.
pub fn retransmit_phases(arrival: &PhaseVector, sideband: Sideband, order: ElementOrder) -> PhaseVector {
    let n = arrival.len();
    PhaseVector(
        (0..n)
            .map(|j| {
                let src = match order {
                    ElementOrder::Same => j,
                    ElementOrder::Reversed => n - 1 - j,
                };
                heterodyne_conjugate(arrival.0[src], sideband)
            })
            .collect(),
    )
}

/// Direction of the retransmitted beam when conjugate phases acquired at
/// `f_rx` are radiated at `f_tx` from the same element positions.
pub fn squint_angle(theta: f64, f_rx: f64, f_tx: f64) -> Result<f64, ArrayError> {
    let s = f_rx / f_tx * theta.sin();
    if s.abs() > 1.0 {
        return Err(ArrayError::NoMainLobe(s.abs()));
    }
    Ok(s.asin())
}

/// Where the interrogating source sits relative to the array center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Source {
    /// Far-field plane wave from the given angle.
    PlaneWave { angle: f64 },
    /// Point source at `range` meters in direction `angle`.
    Point { angle: f64, range: f64 },
}

/// Spread (max - min, as carrier phase) of the round-trip path sums
/// `Lᵢ + L_{n+1-i}` through a Van Atta array.
pub fn van_atta_path_check(geom: &ArrayGeometry, source: Source, freq: f64) -> f64 {
    let n = geom.n();
    if n == 1 {
        return 0.0;
    }
    // Source direction has axis component -sin θ so that path length grows
    // with element position.
    let lengths: Vec<f64> = match source {
        Source::PlaneWave { angle } => geom.positions.iter().map(|&x| x * angle.sin()).collect(),
        Source::Point { angle, range } => {
            let (sx, sy) = (-range * angle.sin(), range * angle.cos());
            geom.positions
                .iter()
                .map(|&x| ((sx - x).powi(2) + sy * sy).sqrt())
                .collect()
        }
    };
    let sums: Vec<f64> = (0..n).map(|i| lengths[i] + lengths[n - 1 - i]).collect();
    let max = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
    wavenumber(freq) * (max - min)
}

/// `|AF|² / n` averaged over angles inside a coverage cone; 1 for an
/// isotropic (uncorrelated-phase) array on average.
pub fn mean_normalized_power(phases: &PhaseVector, geom: &ArrayGeometry, cone: f64, freq: f64) -> f64 {
    let angles = angle_grid(cone, PI / 720.0);
    let n = geom.n() as f64;
    angles
        .iter()
        .map(|&a| array_factor(phases, geom, a, freq).norm_sqr() / n)
        .sum::<f64>()
        / angles.len() as f64
}
