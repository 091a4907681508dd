//! Uniform tau-grid numerics.
//!
//! Everything in the simulator lives in the light-cone coordinate
//! `tau = t - x` (with `c = 1`). Amplitudes are sampled on a uniform grid and
//! all integrals are rectangle sums `sum f(tau_i) * dt`.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform sampling of `[t_min, t_max]` with `n_samples` points (both ends included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    t_min: f64,
    t_max: f64,
    n_samples: usize,
}

impl TauGrid {
    pub fn new(t_min: f64, t_max: f64, n_samples: usize) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 samples, got {n_samples}")));
        }
        if !(t_min.is_finite() && t_max.is_finite()) || t_max <= t_min {
            return Err(Error::InvalidGrid(format!("bad span [{t_min}, {t_max}]")));
        }
        Ok(Self { t_min, t_max, n_samples })
    }

    /// Grid over `[lo, hi]` with `samples_per_unit` points per tau unit.
    ///
    /// When `(hi - lo) * samples_per_unit` is an integer the step is exactly
    /// `1 / samples_per_unit`, so shifts by whole tau units land on grid points.
    pub fn spanning(lo: f64, hi: f64, samples_per_unit: f64) -> Result<Self> {
        if samples_per_unit.is_nan() || samples_per_unit <= 0.0 {
            return Err(Error::InvalidGrid("samples_per_unit must be positive".into()));
        }
        let cells = ((hi - lo) * samples_per_unit).round().max(1.0) as usize;
        Self::new(lo, hi, cells + 1)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_samples - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.t_min + i as f64 * self.dt()
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |i| self.point(i))
    }

    /// Nearest sample index for `tau`, clamped to `[0, n]` (`n` = one past the end).
    /// Infinite arguments map to the ends.
    fn snap(&self, tau: f64) -> usize {
        if tau == f64::NEG_INFINITY {
            return 0;
        }
        if tau == f64::INFINITY {
            return self.n_samples;
        }
        let x = ((tau - self.t_min) / self.dt()).round();
        if x <= 0.0 {
            0
        } else if x >= self.n_samples as f64 {
            self.n_samples
        } else {
            x as usize
        }
    }

    /// Number of grid steps corresponding to a shift `s`, if `s` is a grid multiple.
    pub fn steps_for(&self, s: f64) -> Option<isize> {
        let m = (s / self.dt()).round();
        ((m * self.dt() - s).abs() <= 1e-9 * self.dt().max(s.abs())).then_some(m as isize)
    }
}

/// Ordered, disjoint union of closed tau intervals.
///
/// On a grid, each interval `[lo, hi]` selects the half-open index range
/// `[snap(lo), snap(hi))`, so a window and its complement partition the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    intervals: Vec<(f64, f64)>,
}

impl Window {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::Precondition(format!("window interval [{lo}, {hi}] is empty")));
            }
        }
        for pair in intervals.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::Precondition("window intervals overlap or are unsorted".into()));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn full() -> Self {
        Self { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_full(&self) -> bool {
        self.intervals == [(f64::NEG_INFINITY, f64::INFINITY)]
    }

    pub fn contains(&self, tau: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= tau && tau <= hi)
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut cursor = f64::NEG_INFINITY;
        for &(lo, hi) in &self.intervals {
            if lo > cursor {
                out.push((cursor, lo));
            }
            cursor = hi;
        }
        if cursor < f64::INFINITY {
            out.push((cursor, f64::INFINITY));
        }
        Self { intervals: out }
    }

    /// Grid index ranges selected by this window.
    pub fn index_ranges(&self, grid: &TauGrid) -> Vec<Range<usize>> {
        self.intervals.iter().map(|&(lo, hi)| grid.snap(lo)..grid.snap(hi)).filter(|r| !r.is_empty()).collect()
    }
}

/// Complex amplitude sampled on a [`TauGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Amplitude {
    grid: TauGrid,
    samples: Vec<Complex64>,
}

impl Amplitude {
    pub fn new(grid: TauGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: samples.len() });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TauGrid) -> Self {
        Self { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: TauGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = grid.points().map(f).collect();
        Self { grid, samples }
    }

    pub fn grid(&self) -> &TauGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn norm_sqr(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Rescaled copy with unit squared norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::UndefinedSupport);
        }
        Ok(self.scaled(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, samples: self.samples.iter().map(|z| z * c).collect() }
    }

    /// `self - c * other`, on the shared grid.
    pub fn sub_scaled(&self, c: Complex64, other: &Amplitude) -> Result<Self> {
        self.check_grid(other)?;
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - c * b).collect();
        Ok(Self { grid: self.grid, samples })
    }

    /// Delays the amplitude by `steps` grid points (advances it when negative).
    /// Samples shifted off the grid are dropped; vacated samples are zero.
    pub fn shifted(&self, steps: isize) -> Self {
        let n = self.samples.len() as isize;
        let zero = Complex64::new(0.0, 0.0);
        let samples = (0..n)
            .map(|i| {
                let src = i - steps;
                if (0..n).contains(&src) {
                    self.samples[src as usize]
                } else {
                    zero
                }
            })
            .collect();
        Self { grid: self.grid, samples }
    }

    fn check_grid(&self, other: &Amplitude) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `sum a(tau) * conj(b(tau)) * dt`.
    pub fn inner(&self, other: &Amplitude) -> Result<Complex64> {
        inner_product(self, other)
    }

    pub fn window_mass(&self, w: &Window) -> f64 {
        window_mass(self, w)
    }

    pub fn support_start(&self, eps: f64) -> Result<f64> {
        support_start(self, eps)
    }

    /// Index of the first sample whose cumulative (normalized) mass reaches `eps`.
    pub(crate) fn support_start_index(&self, eps: f64) -> Result<usize> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Precondition(format!("eps must lie in (0, 1), got {eps}")));
        }
        let total: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        if total <= 0.0 {
            return Err(Error::UndefinedSupport);
        }
        let target = eps * total;
        let mut acc = 0.0;
        for (i, z) in self.samples.iter().enumerate() {
            acc += z.norm_sqr();
            if acc >= target {
                return Ok(i);
            }
        }
        Ok(self.samples.len() - 1)
    }
}

pub fn inner_product(a: &Amplitude, b: &Amplitude) -> Result<Complex64> {
    a.check_grid(b)?;
    let sum: Complex64 = a.samples.iter().zip(&b.samples).map(|(x, y)| x * y.conj()).sum();
    Ok(sum * a.grid.dt())
}

pub fn window_mass(a: &Amplitude, w: &Window) -> f64 {
    let dt = a.grid.dt();
    w.index_ranges(&a.grid).into_iter().map(|r| a.samples[r].iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>()
        * dt
}

/// Smallest grid tau at which the cumulative mass, relative to the total, reaches `eps`.
pub fn support_start(a: &Amplitude, eps: f64) -> Result<f64> {
    a.support_start_index(eps).map(|i| a.grid.point(i))
}
