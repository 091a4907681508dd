//! Block-parity encoding of the committed bit and the combinatorics around it.
//!
//! The bit is the XOR of `N` block values; each block repeats its value `k`
//! times. Changing the parity therefore touches at least `k` positions, and B
//! recovers each block by majority vote.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::Bit;

/// Largest `N * k` for which exact counts are computed (the float forms overflow past ~1000).
pub const MAX_EXACT_BITS: usize = 1000;
/// Largest string length the brute-force enumeration accepts.
pub const MAX_BRUTE_FORCE_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCode {
    n_blocks: usize,
    block_len: usize,
}

impl BlockCode {
    pub fn new(n_blocks: usize, block_len: usize) -> Result<Self> {
        if n_blocks == 0 || !n_blocks.is_multiple_of(2) {
            return Err(Error::Validation(format!("N must be a positive even integer, got {n_blocks}")));
        }
        if block_len == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        Ok(Self { n_blocks, block_len })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn n_bits(&self) -> usize {
        self.n_blocks * self.block_len
    }

    /// Position range of block `j` in the flat string.
    pub fn block_range(&self, j: usize) -> std::ops::Range<usize> {
        j * self.block_len..(j + 1) * self.block_len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    code: BlockCode,
    blocks: Vec<Bit>,
}

impl Codeword {
    pub fn from_blocks(code: BlockCode, blocks: Vec<Bit>) -> Result<Self> {
        if blocks.len() != code.n_blocks() {
            return Err(Error::LengthMismatch { expected: code.n_blocks(), got: blocks.len() });
        }
        Ok(Self { code, blocks })
    }

    pub fn code(&self) -> BlockCode {
        self.code
    }

    pub fn blocks(&self) -> &[Bit] {
        &self.blocks
    }

    pub fn parity(&self) -> Bit {
        parity_of(&self.blocks)
    }

    /// The flat `N * k` bit string.
    pub fn bits(&self) -> Vec<Bit> {
        self.blocks.iter().flat_map(|&b| std::iter::repeat_n(b, self.code.block_len())).collect()
    }
}

pub fn parity_of(bits: &[Bit]) -> Bit {
    bits.iter().fold(Bit::Zero, |acc, &b| acc ^ b)
}

/// Uniformly random block values with parity `bit`.
pub fn encode<R: Rng + ?Sized>(bit: Bit, code: BlockCode, rng: &mut R) -> Codeword {
    let mut blocks: Vec<Bit> = (0..code.n_blocks() - 1).map(|_| Bit::from(rng.random::<bool>())).collect();
    let fix = parity_of(&blocks) ^ bit;
    blocks.push(fix);
    Codeword { code, blocks }
}

pub fn encode_seeded(bit: Bit, code: BlockCode, seed: u64) -> Codeword {
    encode(bit, code, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub blocks: Vec<Bit>,
    pub parity: Bit,
    /// Blocks that split exactly in half (decoded to 0).
    pub ties: Vec<bool>,
}

/// Majority vote per block; an exact tie decodes to 0 and is flagged.
pub fn decode_majority(noisy: &[Bit], code: BlockCode) -> Result<Decoded> {
    if noisy.len() != code.n_bits() {
        return Err(Error::LengthMismatch { expected: code.n_bits(), got: noisy.len() });
    }
    let (blocks, ties): (Vec<Bit>, Vec<bool>) = noisy
        .chunks(code.block_len())
        .map(|block| {
            let ones = block.iter().filter(|&&b| b == Bit::One).count();
            let zeros = block.len() - ones;
            (Bit::from(ones > zeros), ones == zeros)
        })
        .unzip();
    let parity = parity_of(&blocks);
    Ok(Decoded { blocks, parity, ties })
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `C(n, k)` as a float, multiplicative form.
pub fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Three evaluations of the number of length-`N k` strings of either parity class.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityCount {
    /// `(1/2) sum_m C(N k, m k)`.
    pub exact: BigUint,
    /// `(2^{Nk} / 2k) sum_{l=1..k} cos^{Nk}(l pi / k) cos(l N pi)`.
    pub trig: f64,
    /// `2^{Nk} / 2k`.
    pub approx: f64,
}

pub fn count_parity_strings(n_blocks: usize, block_len: usize) -> Result<ParityCount> {
    let n_bits = n_blocks * block_len;
    if n_bits > MAX_EXACT_BITS {
        return Err(Error::Overflow(n_bits));
    }
    if block_len == 0 || n_blocks == 0 {
        return Err(Error::Precondition("N and k must be positive".into()));
    }
    let k = block_len as u64;
    let nk = n_bits as u64;
    let sum: BigUint = (0..=n_blocks as u64).map(|m| binomial(nk, m * k)).sum();
    let exact = sum / 2u32;

    let scale = 2f64.powi(n_bits as i32) / (2.0 * k as f64);
    let trig_sum: f64 = (1..=block_len)
        .map(|l| {
            let sign = if (l * n_blocks).is_multiple_of(2) { 1.0 } else { -1.0 };
            (l as f64 * PI / k as f64).cos().powi(n_bits as i32) * sign
        })
        .sum();
    Ok(ParityCount { exact, trig: scale * trig_sum, approx: scale })
}

/// Number of length-`n_bits` strings whose weight is a multiple of `k`, halved,
/// by direct enumeration.
pub fn brute_force_parity_count(n_bits: usize, k: usize) -> Result<u64> {
    if n_bits > MAX_BRUTE_FORCE_BITS {
        return Err(Error::Overflow(n_bits));
    }
    let hits = (0u64..1 << n_bits).filter(|s| (s.count_ones() as usize).is_multiple_of(k)).count() as u64;
    Ok(hits / 2)
}

/// Shannon information `I = log2(count)` and `eta = I / (N k)`.
pub fn shannon_info(n_blocks: usize, block_len: usize) -> Result<(f64, f64)> {
    let count = count_parity_strings(n_blocks, block_len)?;
    let i = count.exact.to_f64().unwrap_or(f64::INFINITY).log2();
    Ok((i, i / (n_blocks * block_len) as f64))
}

/// `1/2 + 2^{-(eta/2) N k}`, capped at 1.
pub fn early_guess_bound(n_blocks: usize, block_len: usize) -> Result<f64> {
    let (_, eta) = shannon_info(n_blocks, block_len)?;
    let exponent = 0.5 * eta * (n_blocks * block_len) as f64;
    Ok((0.5 + 2f64.powf(-exponent)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    /// Binomial tail from `ceil(k/2)`; ties count as errors.
    pub exact: f64,
    /// `sqrt(2 / (pi k)) [2 sqrt(p (1 - p))]^k`.
    pub asymptotic: f64,
}

pub fn block_error(p: f64, k: usize) -> Result<BlockError> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::Precondition(format!("per-bit error {p} not in [0, 1/2]")));
    }
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let k64 = k as u64;
    let exact = (k.div_ceil(2)..=k)
        .map(|i| binomial_f64(k64, i as u64) * p.powi(i as i32) * (1.0 - p).powi((k - i) as i32))
        .sum::<f64>()
        .min(1.0);
    let asymptotic = (2.0 / (PI * k as f64)).sqrt() * (2.0 * (p * (1.0 - p)).sqrt()).powi(k as i32);
    Ok(BlockError { exact, asymptotic })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityError {
    /// `(1/2) [1 - (1 - 2 p)^N]`.
    pub closed: f64,
    /// `sum_{i odd} C(N, i) p^i (1 - p)^{N - i}`.
    pub direct: f64,
}

pub fn parity_error(p_block: f64, n_blocks: usize) -> Result<ParityError> {
    if !(0.0..=1.0).contains(&p_block) {
        return Err(Error::Precondition(format!("block error {p_block} not in [0, 1]")));
    }
    if n_blocks == 0 || !n_blocks.is_multiple_of(2) {
        return Err(Error::Precondition(format!("N must be positive and even, got {n_blocks}")));
    }
    let n = n_blocks as u64;
    let closed = 0.5 * (1.0 - (1.0 - 2.0 * p_block).powi(n_blocks as i32));
    let direct = (1..n_blocks)
        .step_by(2)
        .map(|i| binomial_f64(n, i as u64) * p_block.powi(i as i32) * (1.0 - p_block).powi((n_blocks - i) as i32))
        .sum();
    Ok(ParityError { closed, direct })
}

/// `(1 - p_perp)^k`: all `k` delayed states avoid the perp outcome.
pub fn cheat_probability(p_perp: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_perp) {
        return Err(Error::Precondition(format!("p_perp {p_perp} not in [0, 1]")));
    }
    Ok((1.0 - p_perp).powi(k as i32))
}
