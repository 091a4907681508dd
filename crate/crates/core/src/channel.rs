//! The channel instrument in spectral form.
//!
//! An honest input `F (x) e_b` leaves the channel as the mixture
//! `sum_i lambda_i |u_i, e_{i,b}><u_i, e_{i,b}|`; the deficit `1 - sum lambda_i`
//! is absorption. Inputs outside the honest subspace are handled by
//! time-translation covariance: `F` delayed by `s` maps to the same mixture with
//! every `u_i` delayed by `s`, and whatever is orthogonal to the shifted
//! reference is absorbed.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::siggrid::{Amplitude, Window};
use crate::states::{Bit, PhotonState, PolarizationVector, WavepacketSpec};

/// Tolerance for the pairwise orthonormality of mode profiles.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Tolerance on `sum lambda_i <= 1`.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Cumulative-mass levels at which output fronts are compared with the input front.
pub const CAUSALITY_EPS: [f64; 2] = [0.01, 0.25];
/// Minimum squared overlap with the reference for an input to count as honest.
pub const HONEST_OVERLAP: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMode {
    pub weight: f64,
    pub profile: Amplitude,
    /// Output polarization for input `e0` (index 0) and `e1` (index 1).
    pub pol_out: [PolarizationVector; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    name: String,
    reference: Amplitude,
    modes: Vec<ChannelMode>,
    d_tau: f64,
}

impl ChannelModel {
    /// Structural checks only; physical admissibility is reported by [`validate_channel`].
    pub fn new(name: impl Into<String>, reference: Amplitude, modes: Vec<ChannelMode>, d_tau: f64) -> Result<Self> {
        if !(d_tau > 0.0 && d_tau.is_finite()) {
            return Err(Error::Validation(format!("d_tau must be positive, got {d_tau}")));
        }
        for (i, m) in modes.iter().enumerate() {
            if !(m.weight > 0.0 && m.weight <= 1.0) {
                return Err(Error::Validation(format!("mode {i}: weight {} not in (0, 1]", m.weight)));
            }
            if m.profile.grid() != reference.grid() {
                return Err(Error::GridMismatch);
            }
            if !m.profile.is_normalized(ORTHONORMAL_TOL) {
                return Err(Error::Validation(format!("mode {i}: profile norm^2 {} is not 1", m.profile.norm_sqr())));
            }
        }
        Ok(Self { name: name.into(), reference, modes, d_tau })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn reference(&self) -> &Amplitude {
        &self.reference
    }

    pub fn modes(&self) -> &[ChannelMode] {
        &self.modes
    }

    pub fn d_tau(&self) -> f64 {
        self.d_tau
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// Output half-windows `[-D, D]` and `[tau0 - D, tau0 + D]`.
    pub fn output_halves(&self, tau0: f64) -> Result<Window> {
        Window::new(vec![(-self.d_tau, self.d_tau), (tau0 - self.d_tau, tau0 + self.d_tau)])
    }

    pub fn front_output_window(&self) -> Window {
        Window::interval(-self.d_tau, self.d_tau).expect("d_tau is positive")
    }
}

/// One weighted, pure output (or input) component.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub amplitude: Amplitude,
    pub polarization: PolarizationVector,
}

/// Channel output for an honest input: one component per mode plus absorption.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputEnsemble {
    /// Component `i` comes from mode `i`.
    pub components: Vec<Component>,
    pub absorption: f64,
}

/// Mixed input `sum_l mu_l |mu_l><mu_l|` with a polarization per component.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedInput {
    components: Vec<Component>,
}

impl MixedInput {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("mixture weights sum to {total}, not 1")));
        }
        for c in &components {
            if c.weight < 0.0 {
                return Err(Error::Validation("negative mixture weight".into()));
            }
            if !c.amplitude.is_normalized(1e-9) {
                return Err(Error::Validation("mixture amplitude is not normalized".into()));
            }
        }
        Ok(Self { components })
    }

    pub fn pure(amplitude: Amplitude, polarization: PolarizationVector) -> Result<Self> {
        Self::new(vec![Component { weight: 1.0, amplitude, polarization }])
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub channel: String,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "channel '{}'", self.channel)?;
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "  [{mark}] {:<14} measured={:.6e}  {}", c.name, c.measured, c.detail)?;
        }
        write!(f, "  => {}", if self.all_passed() { "valid" } else { "INVALID" })
    }
}

pub fn validate_channel(model: &ChannelModel, spec: &WavepacketSpec) -> ValidationReport {
    let mut checks = Vec::new();
    let modes = model.modes();

    let total = model.total_weight();
    checks.push(CheckResult {
        name: "weights".into(),
        passed: total <= 1.0 + WEIGHT_TOL,
        measured: total,
        detail: "sum of lambda_i <= 1".into(),
    });

    let mut max_off = 0.0f64;
    let mut max_diag = 0.0f64;
    for (i, a) in modes.iter().enumerate() {
        let self_ip = a.profile.inner(&a.profile).map(|z| z.re).unwrap_or(f64::NAN);
        max_diag = max_diag.max((1.0 - self_ip).abs());
        for b in &modes[i + 1..] {
            let ov = a.profile.inner(&b.profile).map(|z| z.norm()).unwrap_or(f64::INFINITY);
            max_off = max_off.max(ov);
        }
    }
    checks.push(CheckResult {
        name: "orthonormal".into(),
        passed: max_off <= ORTHONORMAL_TOL && max_diag <= ORTHONORMAL_TOL,
        measured: max_off.max(max_diag),
        detail: format!("max |<u_i|u_j>| = {max_off:.3e}, max |1 - <u_i|u_i>| = {max_diag:.3e}"),
    });

    let d = model.d_tau();
    let geometry_ok = d > spec.delta_tau && 2.0 * d < spec.tau0;
    checks.push(CheckResult {
        name: "window".into(),
        passed: geometry_ok,
        measured: d,
        detail: format!("need delta_tau {} < D {} < tau0/2 {}", spec.delta_tau, d, spec.tau0 / 2.0),
    });

    let front = model.front_output_window();
    let back = Window::interval(spec.tau0 - d, spec.tau0 + d);
    let mut achieved = 0.0f64;
    for m in modes {
        let back_mass = back.as_ref().map(|w| m.profile.window_mass(w)).unwrap_or(0.0);
        let front_mass = m.profile.window_mass(&front);
        achieved = achieved.max(0.5 - front_mass.min(back_mass));
    }
    checks.push(CheckResult {
        name: "localization".into(),
        passed: achieved <= spec.delta,
        measured: achieved,
        detail: format!("achieved delta {achieved:.3e} (budget {:.3e})", spec.delta),
    });

    let dt = model.reference().grid().dt();
    let mut worst = f64::INFINITY;
    let mut causal_detail = String::from("output fronts never precede the input front");
    for eps in CAUSALITY_EPS {
        let Ok(input_front) = model.reference().support_start(eps) else {
            worst = f64::NEG_INFINITY;
            causal_detail = "reference amplitude has no support".into();
            break;
        };
        for (i, m) in modes.iter().enumerate() {
            let margin = match m.profile.support_start(eps) {
                Ok(out_front) => out_front - (input_front - dt),
                Err(_) => f64::NEG_INFINITY,
            };
            if margin < worst {
                worst = margin;
                if margin < 0.0 {
                    causal_detail = format!("mode {i} leads the input by {:.4} at eps={eps}", -margin + dt);
                }
            }
        }
    }
    checks.push(CheckResult {
        name: "causality".into(),
        passed: worst >= 0.0,
        measured: if worst.is_finite() { worst } else { 0.0 },
        detail: causal_detail,
    });

    ValidationReport { channel: model.name().to_string(), checks }
}

/// Applies the channel to one of the two honest states.
pub fn apply_channel(model: &ChannelModel, input: &PhotonState) -> Result<OutputEnsemble> {
    let bit = input.bit_label.ok_or_else(|| Error::Precondition("honest input must carry a bit label".into()))?;
    let overlap = input.amplitude.inner(model.reference())?.norm_sqr();
    if overlap < HONEST_OVERLAP {
        return Err(Error::NotHonest { overlap });
    }
    Ok(honest_output(model, bit))
}

/// Output ensemble for the honest state encoding `bit`.
pub fn honest_output(model: &ChannelModel, bit: Bit) -> OutputEnsemble {
    let components = model
        .modes()
        .iter()
        .map(|m| Component { weight: m.weight, amplitude: m.profile.clone(), polarization: m.pol_out[bit.index()] })
        .collect();
    OutputEnsemble { components, absorption: 1.0 - model.total_weight() }
}

/// Applies the channel to an arbitrary mixed input by time-translation covariance.
///
/// Each input component is projected on the closest grid-shifted copy of the
/// reference `F_m`; the projection weight `|<F_m|mu>|^2` is carried through the
/// modes (delayed by `m`), the remainder is absorbed. A polarization
/// `a e0 + b e1` feeds the `e0` branch with weight `|a|^2` and the `e1` branch
/// with `|b|^2`.
pub fn apply_channel_general(model: &ChannelModel, input: &MixedInput) -> Result<Vec<Component>> {
    let mut out = Vec::new();
    for comp in input.components() {
        let (steps, projection) = best_reference_shift(model.reference(), &comp.amplitude)?;
        if projection <= 0.0 {
            continue;
        }
        let branch = [comp.polarization.alpha().norm_sqr(), comp.polarization.beta().norm_sqr()];
        for mode in model.modes() {
            let profile = mode.profile.shifted(steps);
            for (share, pol) in branch.iter().zip(mode.pol_out) {
                let w = comp.weight * projection * mode.weight * share;
                if w > 0.0 {
                    out.push(Component { weight: w, amplitude: profile.clone(), polarization: pol });
                }
            }
        }
    }
    Ok(out)
}

/// Grid shift `m` maximizing `|<F_m|a>|^2`, and that squared overlap
/// (reported as exactly 1 when it is within [`HONEST_OVERLAP`] of 1).
pub fn best_reference_shift(reference: &Amplitude, a: &Amplitude) -> Result<(isize, f64)> {
    if reference.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let norm = a.norm_sqr();
    if norm <= 0.0 {
        return Ok((0, 0.0));
    }
    let score = |m: isize| shifted_overlap(reference, a, m).norm_sqr() / norm;

    // Fast path: align the medians.
    let guess = match (reference.support_start_index(0.5), a.support_start_index(0.5)) {
        (Ok(r), Ok(s)) => s as isize - r as isize,
        _ => 0,
    };
    let q = score(guess);
    if q >= HONEST_OVERLAP {
        return Ok((guess, 1.0));
    }

    let n = reference.samples().len() as isize;
    let (mut best_m, mut best_q) = (guess, q);
    for m in -(n - 1)..n {
        let q = score(m);
        if q > best_q {
            best_m = m;
            best_q = q;
        }
    }
    Ok((best_m, if best_q >= HONEST_OVERLAP { 1.0 } else { best_q.min(1.0) }))
}

/// `<F shifted by m | a>` without materializing the shifted copy.
fn shifted_overlap(reference: &Amplitude, a: &Amplitude, m: isize) -> Complex64 {
    let r = reference.samples();
    let s = a.samples();
    let n = r.len() as isize;
    let lo = m.max(0);
    let hi = (n + m).min(n);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in lo..hi {
        acc += s[i as usize] * r[(i - m) as usize].conj();
    }
    acc * reference.grid().dt()
}

pub fn detection_probability(model: &ChannelModel) -> f64 {
    model.total_weight()
}

/// The channel catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum BuiltinChannel {
    Ideal,
    Rotate { theta: f64, lambda: f64 },
    Jitter { shifts: Vec<f64>, weights: Vec<f64> },
    Collapse { lambda: f64 },
    Absorbing,
}

impl BuiltinChannel {
    pub fn label(&self) -> String {
        match self {
            BuiltinChannel::Ideal => "ideal".into(),
            BuiltinChannel::Rotate { theta, lambda } => format!("rotate(theta={theta}, lambda={lambda})"),
            BuiltinChannel::Jitter { shifts, weights } => format!("jitter(s={shifts:?}, lambda={weights:?})"),
            BuiltinChannel::Collapse { lambda } => format!("collapse(lambda={lambda})"),
            BuiltinChannel::Absorbing => "absorbing".into(),
        }
    }

    /// Two-mode jitter used as the catalogue default: shifts `0` and `2 sigma`.
    pub fn default_jitter(spec: &WavepacketSpec) -> Self {
        BuiltinChannel::Jitter { shifts: vec![0.0, 2.0 * spec.sigma], weights: vec![0.5, 0.4] }
    }

    /// Rotations and weights of the catalogue used for sweeps.
    pub fn catalogue(spec: &WavepacketSpec) -> Vec<Self> {
        let mut v = vec![BuiltinChannel::Ideal];
        for theta in [PI / 8.0, PI / 4.0] {
            for lambda in [1.0, 0.8] {
                v.push(BuiltinChannel::Rotate { theta, lambda });
            }
        }
        v.push(BuiltinChannel::Collapse { lambda: 1.0 });
        v.push(Self::default_jitter(spec));
        v.push(BuiltinChannel::Absorbing);
        v
    }
}

/// Builds a catalogue channel for the reference amplitude `reference` and
/// rejects it unless it passes [`validate_channel`].
pub fn builtin_channel(
    kind: &BuiltinChannel,
    spec: &WavepacketSpec,
    reference: &Amplitude,
    d_tau: f64,
) -> Result<ChannelModel> {
    let check_lambda = |l: f64| {
        if l > 0.0 && l <= 1.0 {
            Ok(())
        } else {
            Err(Error::Validation(format!("lambda {l} not in (0, 1]")))
        }
    };
    let single = |lambda: f64, pol_out: [PolarizationVector; 2]| {
        vec![ChannelMode { weight: lambda, profile: reference.clone(), pol_out }]
    };
    let identity = [PolarizationVector::e0(), PolarizationVector::e1()];
    let modes = match kind {
        BuiltinChannel::Ideal => single(1.0, identity),
        BuiltinChannel::Rotate { theta, lambda } => {
            check_lambda(*lambda)?;
            single(*lambda, identity.map(|p| p.rotated(*theta)))
        }
        BuiltinChannel::Collapse { lambda } => {
            check_lambda(*lambda)?;
            single(*lambda, [PolarizationVector::e0(); 2])
        }
        BuiltinChannel::Absorbing => Vec::new(),
        BuiltinChannel::Jitter { shifts, weights } => jitter_modes(spec, reference, d_tau, shifts, weights)?,
    };
    let model = ChannelModel::new(kind.label(), reference.clone(), modes, d_tau)?;
    let report = validate_channel(&model, spec);
    if !report.all_passed() {
        let why: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(Error::Validation(why.join("; ")));
    }
    Ok(model)
}

fn jitter_modes(
    spec: &WavepacketSpec,
    reference: &Amplitude,
    d_tau: f64,
    shifts: &[f64],
    weights: &[f64],
) -> Result<Vec<ChannelMode>> {
    if shifts.len() != weights.len() || shifts.is_empty() {
        return Err(Error::Validation("jitter needs one weight per shift".into()));
    }
    let limit = d_tau - spec.delta_tau;
    let grid = reference.grid();
    let mut raw = Vec::with_capacity(shifts.len());
    for &s in shifts {
        if s.abs() > limit + 1e-12 {
            return Err(Error::Validation(format!("jitter shift {s} exceeds D - delta_tau = {limit}")));
        }
        let steps =
            grid.steps_for(s).ok_or_else(|| Error::Validation(format!("jitter shift {s} is not a grid multiple")))?;
        raw.push(reference.shifted(steps));
    }
    let profiles = gram_schmidt(&raw)?;
    Ok(profiles
        .into_iter()
        .zip(weights)
        .map(|(profile, &weight)| ChannelMode {
            weight,
            profile,
            pol_out: [PolarizationVector::e0(), PolarizationVector::e1()],
        })
        .collect())
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
pub fn gram_schmidt(vectors: &[Amplitude]) -> Result<Vec<Amplitude>> {
    let mut basis: Vec<Amplitude> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = w.inner(q)?;
                w = w.sub_scaled(c, q)?;
            }
        }
        if w.norm_sqr() < 1e-6 * v.norm_sqr() {
            return Err(Error::Validation("profiles are linearly dependent".into()));
        }
        basis.push(w.normalized()?);
    }
    Ok(basis)
}
