//! Input photon states: a double-hump spatio-temporal amplitude times one of
//! two orthogonal polarizations.

use std::f64::consts::PI;
use std::fmt;
use std::ops::BitXor;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::siggrid::{Amplitude, TauGrid, Window};

/// Samples per sigma on the default grid.
pub const SAMPLES_PER_SIGMA: f64 = 64.0;
/// Grid margin, in sigmas, on either side of the humps.
pub const GRID_MARGIN_SIGMAS: f64 = 8.0;
/// Minimum margin, in sigmas, a grid must leave around a hump.
pub const MIN_HUMP_MARGIN_SIGMAS: f64 = 6.0;

/// A classical bit value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn flip(self) -> Self {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b as u8
    }
}

impl TryFrom<u8> for Bit {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            other => Err(Error::Precondition(format!("bit must be 0 or 1, got {other}"))),
        }
    }
}

impl BitXor for Bit {
    type Output = Bit;

    fn bitxor(self, rhs: Bit) -> Bit {
        Bit::from(self != rhs)
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", *self as u8)
    }
}

/// Shape parameters of the double-hump wavepacket, in tau units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavepacketSpec {
    /// Width (standard deviation of `|f|^2`) of each hump.
    pub sigma: f64,
    /// Separation between the two humps.
    pub tau0: f64,
    /// Half-width of the localization window around each hump.
    pub delta_tau: f64,
    /// Tail-mass budget.
    pub delta: f64,
}

impl WavepacketSpec {
    pub fn new(sigma: f64, tau0: f64, delta_tau: f64, delta: f64) -> Result<Self> {
        let spec = Self { sigma, tau0, delta_tau, delta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if self.delta_tau > self.tau0 / 4.0 {
            return bad(format!("delta_tau {} exceeds tau0/4", self.delta_tau));
        }
        if self.sigma >= self.delta_tau {
            return bad(format!("sigma {} must be below delta_tau {}", self.sigma, self.delta_tau));
        }
        if !(self.delta > 0.0 && self.delta <= 1e-3) {
            return bad(format!("delta must lie in (0, 1e-3], got {}", self.delta));
        }
        Ok(())
    }

    /// Default grid `[-8 sigma, tau0 + extra + 8 sigma]` at 64 samples per sigma.
    /// `extra` leaves room for delayed copies of the packet.
    pub fn default_grid(&self, extra: f64) -> Result<TauGrid> {
        let margin = GRID_MARGIN_SIGMAS * self.sigma;
        TauGrid::spanning(-margin, self.tau0 + extra.max(0.0) + margin, SAMPLES_PER_SIGMA / self.sigma)
    }

    pub fn front_window(&self) -> Window {
        Window::interval(-self.delta_tau, self.delta_tau).expect("validated spec")
    }

    pub fn back_window(&self) -> Window {
        Window::interval(self.tau0 - self.delta_tau, self.tau0 + self.delta_tau).expect("validated spec")
    }

    /// Both localization half-windows.
    pub fn halves_window(&self) -> Window {
        Window::new(vec![(-self.delta_tau, self.delta_tau), (self.tau0 - self.delta_tau, self.tau0 + self.delta_tau)])
            .expect("validated spec")
    }
}

/// Unit vector `alpha |e0> + beta |e1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationVector {
    alpha: Complex64,
    beta: Complex64,
}

impl PolarizationVector {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("polarization norm^2 {n} != 1")));
        }
        Ok(Self { alpha, beta })
    }

    /// Normalizes `(alpha, beta)`; fails only for the zero vector.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if n == 0.0 {
            return Err(Error::Validation("zero polarization vector".into()));
        }
        Ok(Self { alpha: alpha / n, beta: beta / n })
    }

    pub fn e0() -> Self {
        Self { alpha: Complex64::new(1.0, 0.0), beta: Complex64::new(0.0, 0.0) }
    }

    pub fn e1() -> Self {
        Self { alpha: Complex64::new(0.0, 0.0), beta: Complex64::new(1.0, 0.0) }
    }

    pub fn basis(bit: Bit) -> Self {
        match bit {
            Bit::Zero => Self::e0(),
            Bit::One => Self::e1(),
        }
    }

    /// Real rotation by `theta` in the (e0, e1) plane.
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { alpha: self.alpha * c - self.beta * s, beta: self.alpha * s + self.beta * c }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }
}

/// Single photon: amplitude times polarization, optionally labeled with the bit it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonState {
    pub amplitude: Amplitude,
    pub polarization: PolarizationVector,
    pub bit_label: Option<Bit>,
}

/// Real Gaussian-modulus hump: `|f(tau)|^2` is the normal density N(center, sigma^2).
pub fn make_hump(sigma: f64, center: f64, grid: TauGrid) -> Result<Amplitude> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::Precondition(format!("sigma must be positive, got {sigma}")));
    }
    let norm = (2.0 * PI * sigma * sigma).powf(-0.25);
    let hump =
        Amplitude::from_fn(grid, |t| Complex64::new(norm * (-(t - center).powi(2) / (4.0 * sigma * sigma)).exp(), 0.0));
    let margin = MIN_HUMP_MARGIN_SIGMAS * sigma;
    if grid.t_min() > center - margin || grid.t_max() < center + margin {
        let lost = (1.0 - hump.norm_sqr()).max(0.0);
        return Err(Error::Truncation { lost, budget: hump_tail_budget() });
    }
    Ok(hump)
}

/// Two-sided Gaussian tail mass beyond 6 sigma.
fn hump_tail_budget() -> f64 {
    1.973e-9
}

/// Double-hump amplitude `F = (f(tau) + f(tau - tau0)) / sqrt(2)`, renormalized on the grid.
pub fn make_double_hump(spec: &WavepacketSpec, grid: TauGrid) -> Result<Amplitude> {
    spec.validate()?;
    let front = make_hump(spec.sigma, 0.0, grid)?;
    let back = make_hump(spec.sigma, spec.tau0, grid)?;
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let samples = front.samples().iter().zip(back.samples()).map(|(a, b)| (a + b) * s).collect();
    let amp = Amplitude::new(grid, samples)?.normalized()?;
    let achieved = achieved_delta(spec, &amp);
    if achieved > spec.delta {
        return Err(Error::Validation(format!("achieved tail mass {achieved:.3e} exceeds delta {:.3e}", spec.delta)));
    }
    Ok(amp)
}

/// Measured tail mass: `1/2 - min(mass in front half-window, mass in back half-window)`.
pub fn achieved_delta(spec: &WavepacketSpec, amp: &Amplitude) -> f64 {
    let front = amp.window_mass(&spec.front_window());
    let back = amp.window_mass(&spec.back_window());
    (0.5 - front.min(back)).max(0.0)
}

pub fn make_input_state(bit: Bit, spec: &WavepacketSpec, grid: TauGrid) -> Result<PhotonState> {
    Ok(PhotonState {
        amplitude: make_double_hump(spec, grid)?,
        polarization: PolarizationVector::basis(bit),
        bit_label: Some(bit),
    })
}
