//! The commitment protocol as two communicating state machines.
//!
//! A commits by sending `N k` photons, one per channel (the channel has zero
//! length, so emission and arrival share the timeline). B
//! measures each arrival, asks for disclosure at a chosen time inside the
//! commitment window, and verifies the announcement once every channel has
//! reported. The simulation is a discrete-event loop: a priority queue of timed
//! actions, each handled by exactly one party, with messages as new events.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::make_delayed_state;
use crate::channel::{apply_channel_general, honest_output, validate_channel, ChannelModel};
use crate::coding::{block_error, decode_majority, encode, parity_error, BlockCode, Codeword};
use crate::error::{Error, Result};
use crate::measure::{
    full_access_error, gamma_operator, optimal_povm, Outcome, OutcomeDistribution, OutcomeKind, PolarizationPOVM,
};
use crate::rng::{derive_path, STREAM_ALICE, STREAM_BOB};
use crate::siggrid::Window;
use crate::states::{Bit, PolarizationVector, WavepacketSpec};
use crate::stats::Tally;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub alice: u64,
    pub bob: u64,
}

#[derive(Debug, Clone)]
pub struct ProtocolConfig {
    pub code: BlockCode,
    pub spec: WavepacketSpec,
    /// Must be validated against `spec`; its `d_tau` is the timing tolerance.
    pub channel: ChannelModel,
    pub seeds: Seeds,
    pub permutation_enabled: bool,
    /// When B asks for disclosure; defaults to the end of the commitment window.
    pub disclose_at: Option<f64>,
}

impl ProtocolConfig {
    pub fn new(code: BlockCode, spec: WavepacketSpec, channel: ChannelModel) -> Result<Self> {
        let config = Self {
            code,
            spec,
            channel,
            seeds: Seeds { alice: 0, bob: 1 },
            permutation_enabled: true,
            disclose_at: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let report = validate_channel(&self.channel, &self.spec);
        if !report.all_passed() {
            let why: Vec<String> = report.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
            return Err(Error::Validation(why.join("; ")));
        }
        if let Some(t) = self.disclose_at {
            let (lo, hi) = commitment_window(self);
            if !(lo..=hi).contains(&t) {
                return Err(Error::Validation(format!("disclosure time {t} outside the window ({lo}, {hi})")));
            }
        }
        Ok(())
    }

    pub fn d_tau(&self) -> f64 {
        self.channel.d_tau()
    }

    pub fn disclosure_time(&self) -> f64 {
        self.disclose_at.unwrap_or_else(|| commitment_window(self).1)
    }
}

/// `(-delta_tau, delta_tau + tau0)`: while B can only see the leading halves.
pub fn commitment_window(config: &ProtocolConfig) -> (f64, f64) {
    (-config.spec.delta_tau, config.spec.delta_tau + config.spec.tau0)
}

/// What A does beyond the honest script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AliceBehavior {
    Honest,
    /// Sends honestly, then announces the opposite bit with `block` flipped.
    FlipBlock {
        block: usize,
    },
    /// Holds back the photons of `block` by `shift`, sends them carrying the
    /// flipped block value, and announces the opposite bit.
    DelayBlock {
        block: usize,
        shift: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub bit: Bit,
    pub blocks: Vec<Bit>,
    /// `permutation[j]` is the channel that carried string position `j`.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    Committed,
    Emitted { channel: usize },
    Detected { channel: usize },
    DisclosureRequested,
    Announced,
    Verified { accepted: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tau: f64,
    pub party: Party,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub committed_bit: Bit,
    pub codeword: Codeword,
    /// B's outcome on each channel, indexed by channel.
    pub outcomes: Vec<Outcome>,
    /// B's bit per channel: the measured polarization, or a coin flip when
    /// the outcome carries none.
    pub bob_bits: Vec<Bit>,
    pub announcement: Announcement,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    PerpOutcome,
    TimingViolation,
    BlockMismatch,
    ParityMismatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCounts {
    pub perp: usize,
    pub no_click: usize,
    pub timing_violations: usize,
    pub block_mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub accepted: bool,
    /// Parity of B's own majority-decoded blocks.
    pub recovered_bit: Bit,
    /// Failed checks, in check order.
    pub reasons: Vec<FailureReason>,
    pub counts: CheckCounts,
    /// Blocks whose majority disagrees with the announcement.
    pub mismatched_blocks: Vec<usize>,
}

/// B's checks on a complete transcript. Every check runs even after a failure.
pub fn verify(
    transcript: &ProtocolTranscript,
    announcement: &Announcement,
    config: &ProtocolConfig,
) -> Result<VerificationReport> {
    let code = config.code;
    let n = code.n_bits();
    if transcript.outcomes.len() != n || transcript.bob_bits.len() != n {
        return Err(Error::Precondition(format!(
            "transcript holds {} outcomes and {} bits, expected {n}",
            transcript.outcomes.len(),
            transcript.bob_bits.len()
        )));
    }
    check_announcement(announcement, code)?;

    let mut counts = CheckCounts::default();
    let halves = config.channel.output_halves(config.spec.tau0)?;
    for o in &transcript.outcomes {
        match o.kind {
            OutcomeKind::Perp => counts.perp += 1,
            OutcomeKind::NoClick => counts.no_click += 1,
            OutcomeKind::ModePol { .. } => {}
        }
        if o.time_tag.is_some_and(|t| !halves.contains(t)) {
            counts.timing_violations += 1;
        }
    }

    let string: Vec<Bit> = announcement.permutation.iter().map(|&ch| transcript.bob_bits[ch]).collect();
    let decoded = decode_majority(&string, code)?;
    let mismatched_blocks: Vec<usize> =
        (0..code.n_blocks()).filter(|&j| decoded.blocks[j] != announcement.blocks[j]).collect();
    counts.block_mismatches = mismatched_blocks.len();
    let parity_ok = crate::coding::parity_of(&announcement.blocks) == announcement.bit;

    let mut reasons = Vec::new();
    if counts.perp > 0 {
        reasons.push(FailureReason::PerpOutcome);
    }
    if counts.timing_violations > 0 {
        reasons.push(FailureReason::TimingViolation);
    }
    if counts.block_mismatches > 0 {
        reasons.push(FailureReason::BlockMismatch);
    }
    if !parity_ok {
        reasons.push(FailureReason::ParityMismatch);
    }
    Ok(VerificationReport {
        accepted: reasons.is_empty(),
        recovered_bit: decoded.parity,
        reasons,
        counts,
        mismatched_blocks,
    })
}

fn check_announcement(a: &Announcement, code: BlockCode) -> Result<()> {
    if a.blocks.len() != code.n_blocks() {
        return Err(Error::MalformedAnnouncement(format!(
            "{} block values for {} blocks",
            a.blocks.len(),
            code.n_blocks()
        )));
    }
    let n = code.n_bits();
    if a.permutation.len() != n {
        return Err(Error::MalformedAnnouncement(format!(
            "permutation of length {} for {n} channels",
            a.permutation.len()
        )));
    }
    let mut seen = vec![false; n];
    for &ch in &a.permutation {
        if ch >= n || std::mem::replace(&mut seen[ch], true) {
            return Err(Error::MalformedAnnouncement("permutation is not a bijection".into()));
        }
    }
    Ok(())
}

/// Outcome distributions shared by every trial of one configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ProtocolConfig,
    behavior: AliceBehavior,
    povm: PolarizationPOVM,
    honest: [OutcomeDistribution; 2],
    delayed: Option<[OutcomeDistribution; 2]>,
}

impl Simulator {
    pub fn new(config: &ProtocolConfig, behavior: AliceBehavior) -> Result<Self> {
        config.validate()?;
        let model = &config.channel;
        let povm = optimal_povm(&gamma_operator(model));
        let full = Window::full();
        let honest = [
            OutcomeDistribution::honest(&honest_output(model, Bit::Zero), &povm, &full)?,
            OutcomeDistribution::honest(&honest_output(model, Bit::One), &povm, &full)?,
        ];
        let delayed = match behavior {
            AliceBehavior::Honest => None,
            AliceBehavior::FlipBlock { block } | AliceBehavior::DelayBlock { block, .. }
                if block >= config.code.n_blocks() =>
            {
                return Err(Error::Precondition(format!("block {block} out of range")));
            }
            AliceBehavior::FlipBlock { .. } => None,
            AliceBehavior::DelayBlock { shift, .. } => {
                let grid = *model.reference().grid();
                let input = make_delayed_state(&config.spec, grid, model.d_tau(), shift)?;
                let amplitude = input.components()[0].amplitude.clone();
                let mut dists = Vec::with_capacity(2);
                for bit in [Bit::Zero, Bit::One] {
                    let pure = crate::channel::MixedInput::pure(amplitude.clone(), PolarizationVector::basis(bit))?;
                    let out = apply_channel_general(model, &pure)?;
                    dists.push(OutcomeDistribution::general(&out, model, &povm, &full)?);
                }
                let [d0, d1]: [OutcomeDistribution; 2] = dists.try_into().expect("two bits");
                Some([d0, d1])
            }
        };
        Ok(Self { config: config.clone(), behavior, povm, honest, delayed })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.config
    }

    pub fn povm(&self) -> &PolarizationPOVM {
        &self.povm
    }

    /// Per-photon perp probability of the delayed states, if any.
    pub fn delayed_perp_probability(&self) -> Option<f64> {
        self.delayed.as_ref().map(|d| d[0].prob_perp())
    }

    /// One protocol run with the given party seeds.
    pub fn run(&self, seeds: Seeds) -> Result<(ProtocolTranscript, VerificationReport)> {
        let mut timeline = Timeline::default();
        let mut alice = Alice::new(&self.config, self.behavior, seeds.alice);
        let mut bob = Bob::new(&self.config, seeds.bob);
        let mut log = Vec::new();

        // packets enter at the start of the grid, delayed ones `shift` later
        let start = self.config.channel.reference().grid().t_min();
        timeline.push(start, Action::Commit);
        timeline.push(self.config.disclosure_time(), Action::RequestDisclosure);
        timeline.push(f64::INFINITY, Action::Close);

        let mut report = None;
        while let Some(Event { tau, action, .. }) = timeline.pop() {
            match action {
                Action::Commit => {
                    log.push(LogEntry { tau, party: Party::Alice, event: LogEvent::Committed });
                    for (delay, photon) in alice.commit() {
                        timeline.push(tau + delay, Action::Emit(photon));
                    }
                }
                Action::Emit(photon) => {
                    log.push(LogEntry {
                        tau,
                        party: Party::Alice,
                        event: LogEvent::Emitted { channel: photon.channel },
                    });
                    let dist = match (photon.delayed, &self.delayed) {
                        (true, Some(d)) => &d[photon.bit.index()],
                        _ => &self.honest[photon.bit.index()],
                    };
                    let outcome = dist.sample(&mut bob.rng);
                    let at = outcome.time_tag.map_or(self.silent_report_time(tau), |t| t.max(tau));
                    timeline.push(at, Action::Arrive { channel: photon.channel, outcome });
                }
                Action::Arrive { channel, outcome } => {
                    if outcome.time_tag.is_some() {
                        log.push(LogEntry { tau, party: Party::Bob, event: LogEvent::Detected { channel } });
                    }
                    bob.record(channel, outcome);
                }
                Action::RequestDisclosure => {
                    log.push(LogEntry { tau, party: Party::Bob, event: LogEvent::DisclosureRequested });
                    timeline.push(tau, Action::Announce);
                }
                Action::Announce => {
                    log.push(LogEntry { tau, party: Party::Alice, event: LogEvent::Announced });
                    bob.announcement = Some(alice.announce());
                }
                Action::Close => {
                    let transcript = bob.transcript(&alice, Vec::new())?;
                    let announcement = transcript.announcement.clone();
                    let r = verify(&transcript, &announcement, &self.config)?;
                    log.push(LogEntry { tau, party: Party::Bob, event: LogEvent::Verified { accepted: r.accepted } });
                    report = Some((transcript, r));
                }
            }
        }
        let (mut transcript, r) = report.expect("close event always runs");
        transcript.log = log;
        Ok((transcript, r))
    }

    /// A photon that never clicks is settled once its packet has fully passed.
    fn silent_report_time(&self, emitted: f64) -> f64 {
        let grid = self.config.channel.reference().grid();
        emitted + (grid.t_max() - grid.t_min())
    }
}

#[derive(Debug, Clone, Copy)]
struct Photon {
    channel: usize,
    bit: Bit,
    delayed: bool,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Commit,
    Emit(Photon),
    Arrive { channel: usize, outcome: Outcome },
    RequestDisclosure,
    Announce,
    Close,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    tau: f64,
    seq: u64,
    action: Action,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed: BinaryHeap pops the earliest event, ties in insertion order
    fn cmp(&self, other: &Self) -> Ordering {
        other.tau.total_cmp(&self.tau).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
struct Timeline {
    queue: BinaryHeap<Event>,
    next_seq: u64,
}

impl Timeline {
    fn push(&mut self, tau: f64, action: Action) {
        self.queue.push(Event { tau, seq: self.next_seq, action });
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.queue.pop()
    }
}

struct Alice {
    code: BlockCode,
    behavior: AliceBehavior,
    permutation_enabled: bool,
    rng: ChaCha8Rng,
    committed: Option<(Bit, Codeword, Vec<usize>)>,
}

impl Alice {
    fn new(config: &ProtocolConfig, behavior: AliceBehavior, seed: u64) -> Self {
        Self {
            code: config.code,
            behavior,
            permutation_enabled: config.permutation_enabled,
            rng: ChaCha8Rng::seed_from_u64(seed),
            committed: None,
        }
    }

    /// Chooses the bit, encodes and shuffles it, and lists the emissions.
    fn commit(&mut self) -> Vec<(f64, Photon)> {
        let bit = Bit::from(self.rng.random::<bool>());
        let codeword = encode(bit, self.code, &mut self.rng);
        let mut permutation: Vec<usize> = (0..self.code.n_bits()).collect();
        if self.permutation_enabled {
            permutation.shuffle(&mut self.rng);
        }
        let bits = codeword.bits();
        let mut emissions = Vec::with_capacity(bits.len());
        for (pos, &b) in bits.iter().enumerate() {
            let block = pos / self.code.block_len();
            let photon = Photon { channel: permutation[pos], bit: b, delayed: false };
            match self.behavior {
                AliceBehavior::DelayBlock { block: target, shift } if target == block => {
                    emissions.push((shift, Photon { bit: b.flip(), delayed: true, ..photon }));
                }
                _ => emissions.push((0.0, photon)),
            }
        }
        emissions.sort_by_key(|(_, p)| p.channel);
        self.committed = Some((bit, codeword, permutation));
        emissions
    }

    fn announce(&self) -> Announcement {
        let (bit, codeword, permutation) = self.committed.as_ref().expect("announce after commit");
        let mut blocks = codeword.blocks().to_vec();
        let bit = match self.behavior {
            AliceBehavior::Honest => *bit,
            AliceBehavior::FlipBlock { block } | AliceBehavior::DelayBlock { block, .. } => {
                blocks[block] = blocks[block].flip();
                bit.flip()
            }
        };
        Announcement { bit, blocks, permutation: permutation.clone() }
    }
}

struct Bob {
    rng: ChaCha8Rng,
    outcomes: Vec<Option<Outcome>>,
    bits: Vec<Bit>,
    announcement: Option<Announcement>,
}

impl Bob {
    fn new(config: &ProtocolConfig, seed: u64) -> Self {
        let n = config.code.n_bits();
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            outcomes: vec![None; n],
            bits: vec![Bit::Zero; n],
            announcement: None,
        }
    }

    fn record(&mut self, channel: usize, outcome: Outcome) {
        self.bits[channel] = outcome.polarization().unwrap_or_else(|| Bit::from(self.rng.random::<bool>()));
        self.outcomes[channel] = Some(outcome);
    }

    fn transcript(&self, alice: &Alice, log: Vec<LogEntry>) -> Result<ProtocolTranscript> {
        let (bit, codeword, _) =
            alice.committed.clone().ok_or_else(|| Error::Precondition("nothing committed".into()))?;
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| o.ok_or_else(|| Error::Precondition("a channel never reported".into())))
            .collect::<Result<Vec<_>>>()?;
        let announcement =
            self.announcement.clone().ok_or_else(|| Error::Precondition("no disclosure before close".into()))?;
        Ok(ProtocolTranscript {
            committed_bit: bit,
            codeword,
            outcomes,
            bob_bits: self.bits.clone(),
            announcement,
            log,
        })
    }
}

/// Per-trial summary; the CSV row of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub committed_bit: Bit,
    pub recovered_bit: Bit,
    pub accepted: bool,
    pub n_perp: usize,
    pub n_noclick: usize,
    /// Positions where B's bit differs from the encoded string.
    pub bit_errors: usize,
    pub reasons: Vec<FailureReason>,
    pub mismatched_blocks: Vec<usize>,
}

/// Seeds of trial `trial` below `master`.
pub fn trial_seeds(master: u64, trial: u64) -> Seeds {
    Seeds { alice: derive_path(master, &[trial, STREAM_ALICE]), bob: derive_path(master, &[trial, STREAM_BOB]) }
}

fn record_of(trial: u64, t: &ProtocolTranscript, r: &VerificationReport) -> TrialRecord {
    let truth = t.codeword.bits();
    let bit_errors = t.announcement.permutation.iter().zip(&truth).filter(|(&ch, &b)| t.bob_bits[ch] != b).count();
    TrialRecord {
        trial,
        committed_bit: t.committed_bit,
        recovered_bit: r.recovered_bit,
        accepted: r.accepted,
        n_perp: r.counts.perp,
        n_noclick: r.counts.no_click,
        bit_errors,
        reasons: r.reasons.clone(),
        mismatched_blocks: r.mismatched_blocks.clone(),
    }
}

/// Runs `trials` independent trials in parallel; records come back in trial order.
pub fn run_trials(sim: &Simulator, trials: u64, seed: u64) -> Result<Vec<TrialRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let (t, r) = sim.run(trial_seeds(seed, i))?;
            Ok(record_of(i, &t, &r))
        })
        .collect()
}

/// Full transcripts of the first `trials` trials, same seeds as [`run_trials`].
pub fn run_transcripts(
    sim: &Simulator,
    trials: u64,
    seed: u64,
) -> Result<Vec<(ProtocolTranscript, VerificationReport)>> {
    (0..trials).into_par_iter().map(|i| sim.run(trial_seeds(seed, i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HonestStats {
    pub acceptance: Tally,
    pub recovery: Tally,
    /// Bit-level errors over all positions of all trials.
    pub bit_errors: Tally,
    pub perp_outcomes: u64,
    /// Per-bit error of the optimal full-access measurement.
    pub p_bit: f64,
    pub p_block: f64,
    /// `1 - parity_error(p_block, N)`.
    pub analytic_recovery: f64,
    /// `(1 - p_block)^N`: every block's majority matches.
    pub analytic_acceptance: f64,
}

pub fn summarize(config: &ProtocolConfig, records: &[TrialRecord]) -> Result<HonestStats> {
    let mut acceptance = Tally::default();
    let mut recovery = Tally::default();
    let mut bit_errors = Tally::default();
    let mut perp_outcomes = 0;
    let n_bits = config.code.n_bits() as u64;
    for r in records {
        acceptance.add(r.accepted);
        recovery.add(r.recovered_bit == r.committed_bit);
        bit_errors = bit_errors.merge(Tally::new(r.bit_errors as u64, n_bits));
        perp_outcomes += r.n_perp as u64;
    }
    let p_bit = full_access_error(&config.channel).clamp(0.0, 0.5);
    let p_block = block_error(p_bit, config.code.block_len())?.exact;
    let analytic_recovery = 1.0 - parity_error(p_block, config.code.n_blocks())?.closed;
    let analytic_acceptance = (1.0 - p_block).powi(config.code.n_blocks() as i32);
    Ok(HonestStats {
        acceptance,
        recovery,
        bit_errors,
        perp_outcomes,
        p_bit,
        p_block,
        analytic_recovery,
        analytic_acceptance,
    })
}

/// Honest protocol runs: per-trial records and aggregate statistics.
pub fn run_honest(config: &ProtocolConfig, trials: u64, seed: u64) -> Result<(Vec<TrialRecord>, HonestStats)> {
    let sim = Simulator::new(config, AliceBehavior::Honest)?;
    let records = run_trials(&sim, trials, seed)?;
    let stats = summarize(config, &records)?;
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{builtin_channel, BuiltinChannel};
    use crate::states::make_double_hump;
    use std::f64::consts::PI;

    fn config(kind: BuiltinChannel, n: usize, k: usize) -> ProtocolConfig {
        let spec = WavepacketSpec::new(1.0, 20.0, 5.0, 1e-3).unwrap();
        let f = make_double_hump(&spec, spec.default_grid(2.0 * spec.tau0).unwrap()).unwrap();
        let ch = builtin_channel(&kind, &spec, &f, 8.0).unwrap();
        ProtocolConfig::new(BlockCode::new(n, k).unwrap(), spec, ch).unwrap()
    }

    #[test]
    fn commitment_window_example() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        assert_eq!(commitment_window(&c), (-5.0, 25.0));
        let (lo, hi) = commitment_window(&c);
        assert_eq!(hi - lo, c.spec.tau0 + 2.0 * c.spec.delta_tau);
        assert_eq!(c.disclosure_time(), 25.0);
    }

    #[test]
    fn disclosure_outside_window_rejected() {
        let mut c = config(BuiltinChannel::Ideal, 2, 2);
        c.disclose_at = Some(30.0);
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn honest_ideal_run_accepted() {
        let c = config(BuiltinChannel::Ideal, 4, 3);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (t, r) = sim.run(Seeds { alice: 3, bob: 4 }).unwrap();
        assert!(r.accepted, "{:?}", r.reasons);
        assert_eq!(r.recovered_bit, t.committed_bit);
        assert_eq!(t.outcomes.len(), 12);
        assert!(t.outcomes.iter().all(|o| o.time_tag.is_some()));
        assert_eq!(t.announcement.bit, t.committed_bit);
        // permutation is a bijection, and not the identity for this seed
        let mut p = t.announcement.permutation.clone();
        p.sort_unstable();
        assert_eq!(p, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn log_is_time_ordered() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (t, _) = sim.run(Seeds { alice: 1, bob: 2 }).unwrap();
        assert!(t.log.windows(2).all(|w| w[0].tau <= w[1].tau));
        assert_eq!(t.log[0].event, LogEvent::Committed);
        assert!(matches!(t.log.last().unwrap().event, LogEvent::Verified { accepted: true }));
        let emitted = t.log.iter().filter(|e| matches!(e.event, LogEvent::Emitted { .. })).count();
        assert_eq!(emitted, 4);
    }

    #[test]
    fn perp_outcome_aborts() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (mut t, _) = sim.run(Seeds { alice: 1, bob: 2 }).unwrap();
        t.outcomes[1] = Outcome { kind: OutcomeKind::Perp, time_tag: Some(0.5) };
        let r = verify(&t, &t.announcement, &c).unwrap();
        assert!(!r.accepted);
        assert_eq!(r.reasons, vec![FailureReason::PerpOutcome]);
    }

    #[test]
    fn late_tag_is_timing_violation() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (mut t, _) = sim.run(Seeds { alice: 1, bob: 2 }).unwrap();
        t.outcomes[0].time_tag = Some(c.spec.tau0 + c.d_tau() + 1.0);
        let r = verify(&t, &t.announcement, &c).unwrap();
        assert_eq!(r.reasons, vec![FailureReason::TimingViolation]);
        assert_eq!(r.counts.timing_violations, 1);
    }

    #[test]
    fn flipped_block_and_parity() {
        let c = config(BuiltinChannel::Ideal, 2, 3);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (t, _) = sim.run(Seeds { alice: 5, bob: 6 }).unwrap();

        let mut a = t.announcement.clone();
        a.blocks[0] = a.blocks[0].flip();
        let r = verify(&t, &a, &c).unwrap();
        assert_eq!(r.reasons, vec![FailureReason::BlockMismatch, FailureReason::ParityMismatch]);

        a.bit = a.bit.flip();
        let r = verify(&t, &a, &c).unwrap();
        assert_eq!(r.reasons, vec![FailureReason::BlockMismatch]);
        assert_eq!(r.counts.block_mismatches, 1);
    }

    #[test]
    fn malformed_announcement_is_an_error() {
        let c = config(BuiltinChannel::Ideal, 2, 2);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (t, _) = sim.run(Seeds { alice: 1, bob: 2 }).unwrap();
        let mut a = t.announcement.clone();
        a.blocks.pop();
        assert!(matches!(verify(&t, &a, &c), Err(Error::MalformedAnnouncement(_))));
        let mut a = t.announcement.clone();
        a.permutation[0] = a.permutation[1];
        assert!(matches!(verify(&t, &a, &c), Err(Error::MalformedAnnouncement(_))));
    }

    #[test]
    fn permutation_can_be_disabled() {
        let mut c = config(BuiltinChannel::Ideal, 2, 4);
        c.permutation_enabled = false;
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let (t, r) = sim.run(Seeds { alice: 9, bob: 9 }).unwrap();
        assert_eq!(t.announcement.permutation, (0..8).collect::<Vec<_>>());
        assert!(r.accepted);
    }

    #[test]
    fn runs_are_deterministic() {
        let c = config(BuiltinChannel::Rotate { theta: PI / 8.0, lambda: 0.8 }, 4, 4);
        let sim = Simulator::new(&c, AliceBehavior::Honest).unwrap();
        let a = run_transcripts(&sim, 20, 77).unwrap();
        let b = run_transcripts(&sim, 20, 77).unwrap();
        assert_eq!(serde_json::to_string(&a[7].0).unwrap(), serde_json::to_string(&b[7].0).unwrap());
        assert_eq!(run_trials(&sim, 50, 5).unwrap(), run_trials(&sim, 50, 5).unwrap());
        assert_ne!(run_trials(&sim, 50, 5).unwrap(), run_trials(&sim, 50, 6).unwrap());
    }

    #[test]
    fn ideal_channel_recovers_everything() {
        let c = config(BuiltinChannel::Ideal, 4, 2);
        let (records, stats) = run_honest(&c, 200, 1).unwrap();
        assert_eq!(records.len(), 200);
        assert_eq!(stats.acceptance.hits, 200);
        assert_eq!(stats.recovery.hits, 200);
        assert_eq!(stats.bit_errors.hits, 0);
        assert!(stats.analytic_recovery.abs() - 1.0 < 1e-12);
    }

    #[test]
    fn collapse_channel_hides_the_bit() {
        let c = config(BuiltinChannel::Collapse { lambda: 1.0 }, 2, 3);
        let (_, stats) = run_honest(&c, 4000, 2).unwrap();
        assert!(stats.recovery.within_3sigma(0.5), "{:?}", stats.recovery);
        assert!((stats.analytic_recovery - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rotate_channel_bit_error_matches_analytic() {
        let c = config(BuiltinChannel::Rotate { theta: PI / 8.0, lambda: 0.8 }, 2, 5);
        let (_, stats) = run_honest(&c, 3000, 3).unwrap();
        assert!((stats.p_bit - 0.1).abs() < 1e-9);
        assert!(stats.bit_errors.within_3sigma(0.1), "{:?}", stats.bit_errors);
        assert!(stats.recovery.within_3sigma(stats.analytic_recovery));
        assert_eq!(stats.perp_outcomes, 0);
    }

    #[test]
    fn flip_attack_always_caught_on_ideal_channel() {
        let c = config(BuiltinChannel::Ideal, 2, 3);
        let sim = Simulator::new(&c, AliceBehavior::FlipBlock { block: 1 }).unwrap();
        let records = run_trials(&sim, 300, 4).unwrap();
        assert!(records.iter().all(|r| !r.accepted && r.reasons == vec![FailureReason::BlockMismatch]));
    }

    #[test]
    fn block_index_checked() {
        let c = config(BuiltinChannel::Ideal, 2, 3);
        assert!(Simulator::new(&c, AliceBehavior::FlipBlock { block: 2 }).is_err());
    }
}
