//! Measurements on channel outputs.
//!
//! Three families live here: the windowed identity resolution (what B can do
//! while only part of the packet is accessible), the optimal two-outcome
//! polarization measurement built from the discrimination operator `Gamma`,
//! and the projection on the complement of all honest output modes (the
//! "perp" outcome that only dishonest inputs can trigger). [`OutcomeDistribution`]
//! turns any of these into a seeded sampler.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, Component, OutputEnsemble};
use crate::error::{Error, Result};
use crate::siggrid::{Amplitude, Window};
use crate::states::{Bit, PolarizationVector};

const HERMITIAN_TOL: f64 = 1e-12;
const ZERO_GAMMA_TOL: f64 = 1e-14;
/// Slack allowed on the total outcome probability before it counts as an overflow.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Complex 2x2 matrix in the (e0, e1) basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn zero() -> Self {
        Mat2([[Complex64::new(0.0, 0.0); 2]; 2])
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Mat2([[one, zero], [zero, one]])
    }

    /// `|v><v|`.
    pub fn projector(v: &PolarizationVector) -> Self {
        let c = [v.alpha(), v.beta()];
        Mat2([[c[0] * c[0].conj(), c[0] * c[1].conj()], [c[1] * c[0].conj(), c[1] * c[1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// `<v|M|v>`.
    pub fn expectation(&self, v: &PolarizationVector) -> Complex64 {
        let c = [v.alpha(), v.beta()];
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, ci) in c.iter().enumerate() {
            for (j, cj) in c.iter().enumerate() {
                acc += ci.conj() * self.0[i][j] * cj;
            }
        }
        acc
    }

    /// `Tr(self * other)`.
    pub fn trace_product(&self, other: &Mat2) -> Complex64 {
        let (a, b) = (&self.0, &other.0);
        a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let mut m = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                m = m.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.0[0][0].im.abs() <= tol
            && self.0[1][1].im.abs() <= tol
            && (self.0[0][1] - self.0[1][0].conj()).norm() <= tol
    }

    /// Eigenvalues `(low, high)` of a Hermitian matrix.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = self.0[0][1].norm();
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        (mean - r, mean + r)
    }
}

impl Add for Mat2 {
    type Output = Mat2;

    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;

    fn sub(self, rhs: Mat2) -> Mat2 {
        self + rhs * -1.0
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;

    fn mul(self, s: f64) -> Mat2 {
        let mut out = self;
        for row in out.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }
}

/// Hermitian discrimination operator on polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaOperator {
    pub g00: f64,
    pub g01: Complex64,
    pub g11: f64,
}

impl GammaOperator {
    pub fn new(g00: f64, g01: Complex64, g11: f64) -> Self {
        Self { g00, g01, g11 }
    }

    pub fn from_matrix(m: &Mat2) -> Result<Self> {
        if !m.is_hermitian(HERMITIAN_TOL) {
            return Err(Error::Validation("Gamma must be Hermitian".into()));
        }
        Ok(Self { g00: m.0[0][0].re, g01: m.0[0][1], g11: m.0[1][1].re })
    }

    pub fn g10(&self) -> Complex64 {
        self.g01.conj()
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2([[Complex64::new(self.g00, 0.0), self.g01], [self.g10(), Complex64::new(self.g11, 0.0)]])
    }

    pub fn is_zero(&self) -> bool {
        self.g00.abs() <= ZERO_GAMMA_TOL && self.g11.abs() <= ZERO_GAMMA_TOL && self.g01.norm() <= ZERO_GAMMA_TOL
    }
}

/// Which off-diagonal element to use when assembling `Gamma` from a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaForm {
    /// `(rho_pol(1) - rho_pol(0)) / 2`, the minimum-error operator.
    #[default]
    Helstrom,
    /// Off-diagonal `(1/2) sum lambda_i (alpha_{i,1} beta*_{i,0} - alpha_{i,0} beta*_{i,1})`
    /// exactly as printed in the source derivation; kept for comparison only.
    PaperLiteral,
}

/// Polarization-reduced output `rho_pol(b) = sum_i lambda_i |e_{i,b}><e_{i,b}|`.
pub fn reduced_output(model: &ChannelModel, bit: Bit) -> Mat2 {
    model.modes().iter().fold(Mat2::zero(), |acc, m| acc + Mat2::projector(&m.pol_out[bit.index()]) * m.weight)
}

pub fn gamma_operator(model: &ChannelModel) -> GammaOperator {
    gamma_operator_with(model, GammaForm::Helstrom)
}

pub fn gamma_operator_with(model: &ChannelModel, form: GammaForm) -> GammaOperator {
    let helstrom = (reduced_output(model, Bit::One) - reduced_output(model, Bit::Zero)) * 0.5;
    let g00 = helstrom.0[0][0].re;
    let g11 = helstrom.0[1][1].re;
    let g01 = match form {
        GammaForm::Helstrom => helstrom.0[0][1],
        GammaForm::PaperLiteral => {
            model
                .modes()
                .iter()
                .map(|m| {
                    let (p0, p1) = (&m.pol_out[0], &m.pol_out[1]);
                    (p1.alpha() * p0.beta().conj() - p0.alpha() * p1.beta().conj()) * m.weight
                })
                .sum::<Complex64>()
                * 0.5
        }
    };
    GammaOperator::new(g00, g01, g11)
}

/// Smaller eigenvalue `(g00 + g11)/2 - sqrt((g00 - g11)^2 + 4 |g01|^2) / 2`.
pub fn gamma2(g: &GammaOperator) -> f64 {
    0.5 * (g.g00 + g.g11) - 0.5 * ((g.g00 - g.g11).powi(2) + 4.0 * g.g01.norm_sqr()).sqrt()
}

/// Two-outcome POVM on polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationPOVM {
    e0: Mat2,
    e1: Mat2,
}

impl PolarizationPOVM {
    pub fn new(e0: Mat2, e1: Mat2) -> Result<Self> {
        if (e0 + e1).max_abs_diff(&Mat2::identity()) > HERMITIAN_TOL {
            return Err(Error::Validation("POVM elements do not sum to identity".into()));
        }
        for e in [&e0, &e1] {
            if !e.is_hermitian(HERMITIAN_TOL) || e.hermitian_eigenvalues().0 < -HERMITIAN_TOL {
                return Err(Error::Validation("POVM element is not positive semidefinite".into()));
            }
        }
        Ok(Self { e0, e1 })
    }

    /// Projective measurement with `E0 = |v><v|`.
    pub fn projective(v: &PolarizationVector) -> Self {
        let e0 = Mat2::projector(v);
        Self { e0, e1: Mat2::identity() - e0 }
    }

    pub fn computational() -> Self {
        Self::projective(&PolarizationVector::e0())
    }

    pub fn element(&self, r: Bit) -> &Mat2 {
        match r {
            Bit::Zero => &self.e0,
            Bit::One => &self.e1,
        }
    }

    /// `<v|E_r|v>`, clamped to `[0, 1]`.
    pub fn prob(&self, r: Bit, v: &PolarizationVector) -> f64 {
        self.element(r).expectation(v).re.clamp(0.0, 1.0)
    }
}

/// Projector on the eigenvector of `g` with the smaller eigenvalue, and its complement.
/// A zero `g` gives the computational basis.
pub fn optimal_povm(g: &GammaOperator) -> PolarizationPOVM {
    if g.is_zero() {
        return PolarizationPOVM::computational();
    }
    let low = gamma2(g);
    let v = if g.g01.norm() > ZERO_GAMMA_TOL {
        PolarizationVector::normalized(g.g01, Complex64::new(low - g.g00, 0.0))
            .expect("nonzero off-diagonal gives a nonzero eigenvector")
    } else if g.g00 <= g.g11 {
        PolarizationVector::e0()
    } else {
        PolarizationVector::e1()
    };
    PolarizationPOVM::projective(&v)
}

/// Error of guessing the bit from the full output with `povm`: absorbed photons are a
/// coin flip, detected ones are misread with `Tr rho_pol(b) E_{1-b}`. Equal priors.
pub fn measurement_error(model: &ChannelModel, povm: &PolarizationPOVM) -> f64 {
    let rho0 = reduced_output(model, Bit::Zero);
    let rho1 = reduced_output(model, Bit::One);
    0.5 * (1.0 - model.total_weight())
        + 0.5 * rho0.trace_product(povm.element(Bit::One)).re
        + 0.5 * rho1.trace_product(povm.element(Bit::Zero)).re
}

/// Minimum error with the whole output accessible: `1/2 - |gamma2|`.
pub fn full_access_error(model: &ChannelModel) -> f64 {
    0.5 - gamma2(&gamma_operator(model)).abs()
}

/// Error when only `w` is accessible: outcomes inside are error-free, outside are guessed.
pub fn restricted_error(a: &Amplitude, w: &Window) -> f64 {
    0.5 * a.window_mass(&w.complement())
}

/// Probability that the honest output clicks inside `w`, regardless of polarization.
pub fn windowed_detection_prob(ens: &OutputEnsemble, w: &Window) -> f64 {
    ens.components.iter().map(|c| c.weight * c.amplitude.window_mass(w)).sum()
}

/// Probability of the outcome orthogonal to every honest output mode.
pub fn perp_probability(out: &[Component], model: &ChannelModel) -> Result<f64> {
    let mut p = 0.0;
    for c in out {
        let captured: f64 =
            model.modes().iter().map(|m| c.amplitude.inner(&m.profile).map(|z| z.norm_sqr())).sum::<Result<f64>>()?;
        p += c.weight * (1.0 - captured).max(0.0);
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub max_overlap: f64,
    /// False when some output coincides with an honest mode (no delay at all).
    pub delayed: bool,
    pub bound: f64,
    pub within_bound: bool,
}

/// Largest `|<eta_k|u_i>|^2` over outputs and modes, checked against `1/2 + delta`.
pub fn overlap_bound_check(out: &[Component], model: &ChannelModel, delta: f64) -> Result<OverlapReport> {
    let mut max_overlap = 0.0f64;
    for c in out {
        let n = c.amplitude.norm_sqr();
        for m in model.modes() {
            let q = c.amplitude.inner(&m.profile)?.norm_sqr() / n.max(f64::MIN_POSITIVE);
            max_overlap = max_overlap.max(q);
        }
    }
    let bound = 0.5 + delta;
    Ok(OverlapReport { max_overlap, delayed: max_overlap < 1.0 - 1e-9, bound, within_bound: max_overlap <= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeKind {
    ModePol { mode: usize, result: Bit },
    Perp,
    NoClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub time_tag: Option<f64>,
}

impl Outcome {
    pub fn polarization(&self) -> Option<Bit> {
        match self.kind {
            OutcomeKind::ModePol { result, .. } => Some(result),
            _ => None,
        }
    }
}

/// Inverse-CDF sampler over the grid points of `|g|^2` restricted to a window.
#[derive(Debug, Clone)]
struct TimeSampler {
    t_min: f64,
    dt: f64,
    offsets: Vec<usize>,
    cdf: Vec<f64>,
}

impl TimeSampler {
    fn new(a: &Amplitude, w: &Window) -> Option<Self> {
        let grid = a.grid();
        let mut offsets = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for r in w.index_ranges(grid) {
            for i in r {
                let p = a.samples()[i].norm_sqr();
                if p > 0.0 {
                    acc += p;
                    offsets.push(i);
                    cdf.push(acc);
                }
            }
        }
        (acc > 0.0).then(|| {
            cdf.iter_mut().for_each(|c| *c /= acc);
            Self { t_min: grid.t_min(), dt: grid.dt(), offsets, cdf }
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        self.t_min + self.offsets[k] as f64 * self.dt
    }
}

#[derive(Debug, Clone)]
struct Entry {
    prob: f64,
    kind: OutcomeKind,
    time: Option<usize>,
}

/// Precomputed outcome probabilities for a fixed source, POVM and window.
#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    entries: Vec<Entry>,
    samplers: Vec<TimeSampler>,
}

/// What B receives: an honest output ensemble or the components of a general input.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Honest(&'a OutputEnsemble),
    General(&'a [Component]),
}

impl OutcomeDistribution {
    pub fn new(source: Source<'_>, model: &ChannelModel, povm: &PolarizationPOVM, w: &Window) -> Result<Self> {
        match source {
            Source::Honest(ens) => Self::honest(ens, povm, w),
            Source::General(out) => Self::general(out, model, povm, w),
        }
    }

    /// Honest outputs: component `i` is mode `i`, so it never reaches the perp outcome.
    pub fn honest(ens: &OutputEnsemble, povm: &PolarizationPOVM, w: &Window) -> Result<Self> {
        let mut entries = Vec::new();
        let mut samplers = Vec::new();
        for (i, c) in ens.components.iter().enumerate() {
            let mass = c.amplitude.window_mass(w);
            let time = TimeSampler::new(&c.amplitude, w).map(|s| {
                samplers.push(s);
                samplers.len() - 1
            });
            for r in [Bit::Zero, Bit::One] {
                entries.push(Entry {
                    prob: c.weight * povm.prob(r, &c.polarization) * mass,
                    kind: OutcomeKind::ModePol { mode: i, result: r },
                    time,
                });
            }
        }
        Self::finish(entries, samplers)
    }

    /// General outputs: each component splits over the modes by squared overlap and
    /// sends its residual, orthogonal to every mode, to the perp outcome.
    pub fn general(out: &[Component], model: &ChannelModel, povm: &PolarizationPOVM, w: &Window) -> Result<Self> {
        let modes = model.modes();
        let mut samplers = Vec::new();
        let mut mode_time = Vec::with_capacity(modes.len());
        let mut mode_mass = Vec::with_capacity(modes.len());
        for m in modes {
            mode_mass.push(m.profile.window_mass(w));
            mode_time.push(TimeSampler::new(&m.profile, w).map(|s| {
                samplers.push(s);
                samplers.len() - 1
            }));
        }
        let mut mode_probs = vec![[0.0f64; 2]; modes.len()];
        let mut perp_entries = Vec::new();
        for c in out {
            let mut residual = c.amplitude.clone();
            for (i, m) in modes.iter().enumerate() {
                let coeff = c.amplitude.inner(&m.profile)?;
                residual = residual.sub_scaled(coeff, &m.profile)?;
                for r in [Bit::Zero, Bit::One] {
                    mode_probs[i][r.index()] +=
                        c.weight * coeff.norm_sqr() * povm.prob(r, &c.polarization) * mode_mass[i];
                }
            }
            let perp = c.weight * residual.window_mass(w);
            if perp > 0.0 {
                let time = TimeSampler::new(&residual, w).map(|s| {
                    samplers.push(s);
                    samplers.len() - 1
                });
                perp_entries.push(Entry { prob: perp, kind: OutcomeKind::Perp, time });
            }
        }
        let mut entries = Vec::new();
        for (i, probs) in mode_probs.iter().enumerate() {
            for r in [Bit::Zero, Bit::One] {
                entries.push(Entry {
                    prob: probs[r.index()],
                    kind: OutcomeKind::ModePol { mode: i, result: r },
                    time: mode_time[i],
                });
            }
        }
        entries.extend(perp_entries);
        Self::finish(entries, samplers)
    }

    fn finish(entries: Vec<Entry>, samplers: Vec<TimeSampler>) -> Result<Self> {
        let total: f64 = entries.iter().map(|e| e.prob).sum();
        if total > 1.0 + PROBABILITY_SLACK {
            return Err(Error::ProbabilityOverflow(total));
        }
        Ok(Self { entries, samplers })
    }

    pub fn prob_mode_pol(&self) -> f64 {
        self.sum_where(|k| matches!(k, OutcomeKind::ModePol { .. }))
    }

    pub fn prob_perp(&self) -> f64 {
        self.sum_where(|k| matches!(k, OutcomeKind::Perp))
    }

    pub fn prob_no_click(&self) -> f64 {
        (1.0 - self.prob_mode_pol() - self.prob_perp()).max(0.0)
    }

    /// Probability of reading polarization `r` on any mode.
    pub fn prob_result(&self, r: Bit) -> f64 {
        self.sum_where(|k| matches!(k, OutcomeKind::ModePol { result, .. } if *result == r))
    }

    fn sum_where(&self, pred: impl Fn(&OutcomeKind) -> bool) -> f64 {
        self.entries.iter().filter(|e| pred(&e.kind)).map(|e| e.prob).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for e in &self.entries {
            acc += e.prob;
            if u < acc {
                let time_tag = e.time.map(|s| self.samplers[s].sample(rng));
                return Outcome { kind: e.kind, time_tag };
            }
        }
        Outcome { kind: OutcomeKind::NoClick, time_tag: None }
    }
}

/// Draws one outcome, deterministically for a given `seed`.
pub fn sample_outcome(
    source: Source<'_>,
    model: &ChannelModel,
    povm: &PolarizationPOVM,
    w: &Window,
    seed: u64,
) -> Result<Outcome> {
    let dist = OutcomeDistribution::new(source, model, povm, w)?;
    Ok(dist.sample(&mut ChaCha8Rng::seed_from_u64(seed)))
}
