//! Cheating strategies and how often they are caught.
//!
//! B may measure before A discloses, when only the leading halves have
//! arrived. A may hold back the photons of one block to choose their value
//! late, or simply announce a flipped block. Each attack reports its Monte
//! Carlo rate next to the analytic prediction.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_general, honest_output, ChannelModel, MixedInput};
use crate::coding::{block_error, cheat_probability, decode_majority, early_guess_bound, encode};
use crate::error::{Error, Result};
use crate::measure::{
    gamma_operator, optimal_povm, overlap_bound_check, perp_probability, OutcomeDistribution, OverlapReport,
};
use crate::protocol::{run_trials, AliceBehavior, ProtocolConfig, Simulator, TrialRecord};
use crate::rng::{rng_for, STREAM_ALICE, STREAM_BOB};
use crate::siggrid::{TauGrid, Window};
use crate::states::{make_double_hump, Bit, PolarizationVector, WavepacketSpec};
use crate::stats::Tally;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    EarlyMeasure,
    /// Delay the photons of `block` by `shift`.
    Delay {
        shift: f64,
        block: usize,
    },
    ParityFlip {
        block: usize,
    },
}

/// The honest double hump delayed by `s`, as a single-component input.
///
/// `s` must be at least `d_tau` and a multiple of the grid step; the shifted
/// state must still fit the grid up to the localization budget.
pub fn make_delayed_state(spec: &WavepacketSpec, grid: TauGrid, d_tau: f64, s: f64) -> Result<MixedInput> {
    if s < d_tau {
        return Err(Error::Precondition(format!("delay {s} is below D = {d_tau}")));
    }
    let steps = grid
        .steps_for(s)
        .ok_or_else(|| Error::Precondition(format!("delay {s} is not a multiple of the grid step")))?;
    let shifted = make_double_hump(spec, grid)?.shifted(steps);
    let lost = 1.0 - shifted.norm_sqr();
    if lost > spec.delta {
        return Err(Error::Truncation { lost, budget: spec.delta });
    }
    MixedInput::pure(shifted.normalized()?, PolarizationVector::e0())
}

/// Squared-norm share of each input component inside `[-d_tau, d_tau]`.
pub fn leading_window_mass(input: &MixedInput, d_tau: f64) -> f64 {
    let w = Window::interval(-d_tau, d_tau).expect("d_tau is positive");
    input.components().iter().map(|c| c.weight * c.amplitude.window_mass(&w)).sum()
}

/// Overlap of the channel outputs of a state delayed by `s` with the honest modes.
pub fn delayed_overlap(spec: &WavepacketSpec, model: &ChannelModel, s: f64) -> Result<OverlapReport> {
    let input = make_delayed_state(spec, *model.reference().grid(), model.d_tau(), s)?;
    let out = apply_channel_general(model, &input)?;
    overlap_bound_check(&out, model, spec.delta)
}

/// Per-photon perp probability of a state delayed by `s`.
pub fn delayed_perp_probability(spec: &WavepacketSpec, model: &ChannelModel, s: f64) -> Result<f64> {
    let input = make_delayed_state(spec, *model.reference().grid(), model.d_tau(), s)?;
    perp_probability(&apply_channel_general(model, &input)?, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EarlyRecord {
    pub trial: u64,
    pub committed_bit: Bit,
    pub guessed_parity: Bit,
    pub bit_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStats {
    /// Wrong guesses over all positions of all trials.
    pub bit_errors: Tally,
    pub parity_success: Tally,
    /// Per-bit error implied by the outcome probabilities.
    pub analytic_bit_error: f64,
    /// `1/2 + 2^{-(eta/2) N k}`.
    pub bound: f64,
    pub records: Vec<EarlyRecord>,
}

/// B measures every photon with the optimal POVM but only sees `w`; silent
/// photons are guessed. B is given the block grouping, which the protocol
/// withholds until disclosure, so this overstates what B learns.
pub fn run_windowed_measurement(config: &ProtocolConfig, w: &Window, trials: u64, seed: u64) -> Result<EarlyStats> {
    config.validate()?;
    let model = &config.channel;
    let povm = optimal_povm(&gamma_operator(model));
    let dists = [
        OutcomeDistribution::honest(&honest_output(model, Bit::Zero), &povm, w)?,
        OutcomeDistribution::honest(&honest_output(model, Bit::One), &povm, w)?,
    ];
    let analytic_bit_error = [Bit::Zero, Bit::One]
        .iter()
        .map(|&b| {
            let d = &dists[b.index()];
            let silent = 1.0 - d.prob_result(Bit::Zero) - d.prob_result(Bit::One);
            0.5 * (d.prob_result(b.flip()) + 0.5 * silent)
        })
        .sum();
    let code = config.code;
    let records: Vec<EarlyRecord> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut alice = rng_for(seed, &[i, STREAM_ALICE]);
            let mut bob = rng_for(seed, &[i, STREAM_BOB]);
            let bit = Bit::from(alice.random::<bool>());
            let truth = encode(bit, code, &mut alice).bits();
            let guesses: Vec<Bit> = truth
                .iter()
                .map(|&b| {
                    let o = dists[b.index()].sample(&mut bob);
                    o.polarization().unwrap_or_else(|| Bit::from(bob.random::<bool>()))
                })
                .collect();
            let bit_errors = guesses.iter().zip(&truth).filter(|(g, t)| g != t).count();
            let guessed_parity = decode_majority(&guesses, code).expect("length matches the code").parity;
            EarlyRecord { trial: i, committed_bit: bit, guessed_parity, bit_errors }
        })
        .collect();
    let mut bit_errors = Tally::default();
    let mut parity_success = Tally::default();
    for r in &records {
        bit_errors = bit_errors.merge(Tally::new(r.bit_errors as u64, code.n_bits() as u64));
        parity_success.add(r.guessed_parity == r.committed_bit);
    }
    Ok(EarlyStats {
        bit_errors,
        parity_success,
        analytic_bit_error,
        bound: early_guess_bound(code.n_blocks(), code.block_len())?,
        records,
    })
}

/// Early measurement restricted to the leading output window `[-D, D]`.
pub fn run_early_measurement(config: &ProtocolConfig, trials: u64, seed: u64) -> Result<EarlyStats> {
    run_windowed_measurement(config, &config.channel.front_output_window(), trials, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub p_perp: f64,
    /// `(1 - p_perp)^k`.
    pub analytic_undetected: f64,
    /// Runs B accepted.
    pub undetected: Tally,
    /// Runs without a single perp outcome.
    pub no_perp: Tally,
    /// Perp outcomes in interleaved honest runs (expected zero).
    pub control_perp: u64,
    pub control_trials: u64,
    pub records: Vec<TrialRecord>,
}

/// A delays one block by `shift` and announces the opposite bit.
pub fn run_delay_attack(
    config: &ProtocolConfig,
    shift: f64,
    block: usize,
    trials: u64,
    seed: u64,
) -> Result<DelayStats> {
    let sim = Simulator::new(config, AliceBehavior::DelayBlock { block, shift })?;
    let p_perp = sim.delayed_perp_probability().expect("delay behavior");
    let records = run_trials(&sim, trials, seed)?;
    let mut undetected = Tally::default();
    let mut no_perp = Tally::default();
    for r in &records {
        undetected.add(r.accepted);
        no_perp.add(r.n_perp == 0);
    }
    let control_trials = trials.div_ceil(10);
    let honest = Simulator::new(config, AliceBehavior::Honest)?;
    let control_perp = run_trials(&honest, control_trials, seed ^ 0xC0)?.iter().map(|r| r.n_perp as u64).sum();
    Ok(DelayStats {
        p_perp,
        analytic_undetected: cheat_probability(p_perp.clamp(0.0, 1.0), config.code.block_len())?,
        undetected,
        no_perp,
        control_perp,
        control_trials,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipStats {
    /// Runs B rejected, for any reason.
    pub detected: Tally,
    /// Runs where the flipped block itself contradicted B's majority.
    pub target_detected: Tally,
    /// `1 - block_error(P_e, k)`.
    pub analytic_detection: f64,
    pub records: Vec<TrialRecord>,
}

/// A sends honestly and then announces `block` flipped together with the opposite bit.
pub fn run_parity_flip(config: &ProtocolConfig, block: usize, trials: u64, seed: u64) -> Result<FlipStats> {
    let sim = Simulator::new(config, AliceBehavior::FlipBlock { block })?;
    let records = run_trials(&sim, trials, seed)?;
    let mut detected = Tally::default();
    let mut target_detected = Tally::default();
    for r in &records {
        detected.add(!r.accepted);
        target_detected.add(r.mismatched_blocks.contains(&block));
    }
    let p_bit = crate::measure::full_access_error(&config.channel).clamp(0.0, 0.5);
    let analytic_detection = 1.0 - block_error(p_bit, config.code.block_len())?.exact;
    Ok(FlipStats { detected, target_detected, analytic_detection, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{builtin_channel, BuiltinChannel};
    use crate::coding::BlockCode;

    const D: f64 = 8.0;

    fn spec() -> WavepacketSpec {
        WavepacketSpec::new(1.0, 20.0, 5.0, 1e-3).unwrap()
    }

    fn config(kind: BuiltinChannel, n: usize, k: usize) -> ProtocolConfig {
        let spec = spec();
        let f = make_double_hump(&spec, spec.default_grid(2.0 * spec.tau0).unwrap()).unwrap();
        let ch = builtin_channel(&kind, &spec, &f, D).unwrap();
        ProtocolConfig::new(BlockCode::new(n, k).unwrap(), spec, ch).unwrap()
    }

    #[test]
    fn delayed_state_preconditions() {
        let s = spec();
        let grid = s.default_grid(2.0 * s.tau0).unwrap();
        assert!(matches!(make_delayed_state(&s, grid, D, 0.0), Err(Error::Precondition(_))));
        assert!(matches!(make_delayed_state(&s, grid, D, 10.0 + 1.0 / 128.0), Err(Error::Precondition(_))));
        // past the end of the grid the packet is cut off
        assert!(matches!(make_delayed_state(&s, grid, D, 3.0 * s.tau0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn delay_by_tau0_leaves_the_leading_window() {
        let s = spec();
        let grid = s.default_grid(2.0 * s.tau0).unwrap();
        let input = make_delayed_state(&s, grid, D, s.tau0).unwrap();
        assert!(leading_window_mass(&input, D) <= s.delta);
        let far = make_delayed_state(&s, grid, D, 2.0 * s.tau0).unwrap();
        let halves = Window::new(vec![(-D, D), (s.tau0 - D, s.tau0 + D)]).unwrap();
        assert!(far.components()[0].amplitude.window_mass(&halves) < 1e-12);
    }

    #[test]
    fn identity_channel_perp_probability() {
        let c = config(BuiltinChannel::Ideal, 2, 1);
        // the delayed back half overlaps nothing, its front half meets the honest back half
        let p = delayed_perp_probability(&c.spec, &c.channel, c.spec.tau0).unwrap();
        assert!((p - 0.75).abs() < 1e-3, "{p}");
        let p = delayed_perp_probability(&c.spec, &c.channel, 2.0 * c.spec.tau0).unwrap();
        assert!((p - 1.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn overlaps_stay_below_half() {
        let c = config(BuiltinChannel::Ideal, 2, 1);
        for s in [D + 2.0, c.spec.tau0, 2.0 * c.spec.tau0] {
            let r = delayed_overlap(&c.spec, &c.channel, s).unwrap();
            assert!(r.within_bound && r.delayed, "s={s}: {r:?}");
        }
    }

    #[test]
    fn early_measurement_per_bit_error_is_a_quarter() {
        let c = config(BuiltinChannel::Ideal, 2, 1);
        let stats = run_early_measurement(&c, 20_000, 11).unwrap();
        assert!((stats.analytic_bit_error - 0.25).abs() < 1e-6, "{}", stats.analytic_bit_error);
        assert!(stats.bit_errors.within_3sigma(0.25), "{:?}", stats.bit_errors);
    }

    #[test]
    fn full_window_control_recovers_parity() {
        let c = config(BuiltinChannel::Ideal, 4, 4);
        let stats = run_windowed_measurement(&c, &Window::full(), 500, 1).unwrap();
        assert_eq!(stats.parity_success.hits, 500);
        assert_eq!(stats.bit_errors.hits, 0);
    }

    #[test]
    fn delay_attack_single_photon() {
        let c = config(BuiltinChannel::Ideal, 2, 1);
        let stats = run_delay_attack(&c, c.spec.tau0, 0, 20_000, 3).unwrap();
        assert!((stats.analytic_undetected - 0.25).abs() < 1e-3);
        assert!(stats.undetected.within_3sigma(stats.analytic_undetected), "{:?}", stats.undetected);
        assert_eq!(stats.undetected, stats.no_perp);
        assert_eq!(stats.control_perp, 0);
    }

    #[test]
    fn delay_beyond_support_always_caught() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        let stats = run_delay_attack(&c, 2.0 * c.spec.tau0, 1, 500, 4).unwrap();
        assert_eq!(stats.undetected.hits, 0);
    }

    #[test]
    fn flip_on_ideal_channel_always_detected() {
        let c = config(BuiltinChannel::Ideal, 2, 3);
        let stats = run_parity_flip(&c, 0, 1000, 5).unwrap();
        assert_eq!(stats.detected.hits, 1000);
        assert_eq!(stats.analytic_detection, 1.0);
    }

    #[test]
    fn flip_with_coin_flip_bit() {
        // collapse leaves B with a fair coin per bit
        let c = config(BuiltinChannel::Collapse { lambda: 1.0 }, 2, 1);
        let stats = run_parity_flip(&c, 0, 10_000, 6).unwrap();
        assert!((stats.analytic_detection - 0.5).abs() < 1e-12);
        assert!(stats.target_detected.within_3sigma(0.5), "{:?}", stats.target_detected);
        // the unflipped block also mismatches half the time
        assert!(stats.detected.within_3sigma(0.75), "{:?}", stats.detected);
    }
}
