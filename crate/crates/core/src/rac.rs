//! Nonlocality-assisted random access coding.
//!
//! Alice holds n = 2^k bits, Bob wants the bit at a uniformly random address and
//! receives a single classical bit. The pyramid protocol arranges the data as the
//! leaves of a depth-k binary tree and compresses sibling pairs level by level
//! with one box per internal node; Bob follows the address path and XORs his k
//! box outputs into the message bit.
//!
//! The efficiency is J = Σᵢ I(Xᵢ : Gᵢ) with m = 1 transmitted bit, and
//! Δ_IC = J − m. For isotropic boxes every guess is a binary symmetric channel
//! with success (1+E^k)/2.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boxes::{isotropic_box, BipartiteBox};
use crate::error::{invalid, shape, Result};
use crate::infotheory::{bias_information, h2, mutual_information_2d};
use crate::rng::stream;

/// Largest nesting depth accepted by the simulator.
pub const MAX_DEPTH: u32 = 20;

/// Largest data length for which the raw per-position estimator is tabulated.
const RAW_TABLE_MAX_BITS: usize = 1 << 12;

/// The shared resource fed into every node of the pyramid.
#[derive(Debug, Clone, PartialEq)]
pub enum RacResource {
    /// Isotropic box with correlation strength E.
    Isotropic(f64),
    Box(BipartiteBox),
}

impl RacResource {
    fn to_box(&self) -> Result<BipartiteBox> {
        match self {
            RacResource::Isotropic(e) => isotropic_box(*e),
            RacResource::Box(b) => {
                check_binary(b)?;
                Ok(b.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RacConfig {
    pub depth: u32,
    pub resource: RacResource,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RacResult {
    pub depth: u32,
    /// Pr[G = X_address], exact or estimated.
    pub per_bit_success: f64,
    pub j: f64,
    pub m: f64,
    pub delta_ic: f64,
    pub per_bit_stderr: f64,
    /// Delta-method standard error of `j`.
    pub j_stderr: f64,
    /// Σᵢ I(Xᵢ:Gᵢ) from empirical per-position tables, when tabulated.
    pub j_raw: Option<f64>,
    /// 0 for closed-form results.
    pub trials: u64,
}

fn check_binary(b: &BipartiteBox) -> Result<()> {
    if b.dims() != (2, 2, 2, 2) {
        return Err(shape(format!("protocol needs a 2x2x2x2 box, got {:?}", b.dims())));
    }
    Ok(())
}

fn check_depth(k: u32) -> Result<()> {
    if k == 0 || k > MAX_DEPTH {
        return Err(invalid(format!("depth {k} outside 1..={MAX_DEPTH}")));
    }
    Ok(())
}

/// One van Dam round: Alice feeds x₀⊕x₁ and sends M = x₀⊕a, Bob feeds the
/// address and guesses M⊕b.
pub fn van_dam_round<R: Rng + ?Sized>(
    bx: &BipartiteBox,
    x0: u8,
    x1: u8,
    address: u8,
    rng: &mut R,
) -> Result<(u8, u8)> {
    check_binary(bx)?;
    if x0 > 1 || x1 > 1 || address > 1 {
        return Err(invalid("bits must be 0 or 1"));
    }
    let (a, b) = bx.sample((x0 ^ x1) as usize, address as usize, rng);
    let msg = x0 ^ a as u8;
    Ok((msg, msg ^ b as u8))
}

/// Number of boxes at level `j` (leaves are level 0) of a depth-`k` pyramid.
pub fn level_width(k: u32, j: u32) -> usize {
    1usize << (k - 1 - j)
}

/// Global index of box `i` at level `j`: levels are stored bottom-up.
pub fn box_index(k: u32, j: u32, i: usize) -> usize {
    let n = 1usize << k;
    n - (n >> j) + i
}

/// Alice's side of the pyramid. `alice(box, input)` returns her output for
/// that box; the result is the single message bit.
pub fn pyramid_encode(data: &[u8], depth: u32, mut alice: impl FnMut(usize, u8) -> u8) -> Result<u8> {
    check_depth(depth)?;
    if data.len() != 1 << depth {
        return Err(shape(format!("depth {depth} needs {} data bits, got {}", 1usize << depth, data.len())));
    }
    let mut layer = data.to_vec();
    for j in 0..depth {
        let next: Vec<u8> = (0..layer.len() / 2)
            .map(|i| {
                let a = alice(box_index(depth, j, i), layer[2 * i] ^ layer[2 * i + 1]);
                layer[2 * i] ^ a
            })
            .collect();
        layer = next;
    }
    Ok(layer[0])
}

/// Boxes on Bob's decoding path for `address` (bit j = address at level j),
/// together with his input to each.
pub fn decoding_path(depth: u32, address: usize) -> Vec<(usize, u8)> {
    (0..depth)
        .map(|j| (box_index(depth, j, address >> (j + 1)), ((address >> j) & 1) as u8))
        .collect()
}

fn address_index(address: &[u8]) -> usize {
    address.iter().enumerate().map(|(j, &b)| (b as usize) << j).sum()
}

/// Runs the depth-k pyramid with one independent copy of `bx` per node and
/// returns Bob's guess for `data[Σ address[j]·2^j]`.
pub fn nested_protocol<R: Rng + ?Sized>(bx: &BipartiteBox, data: &[u8], address: &[u8], rng: &mut R) -> Result<u8> {
    check_binary(bx)?;
    let depth = address.len() as u32;
    if data.iter().chain(address).any(|&v| v > 1) {
        return Err(invalid("bits must be 0 or 1"));
    }
    let mut outs = vec![(0u8, 0u8); (1usize << depth).saturating_sub(1)];
    run_pyramid(bx, depth, data, address_index(address), rng, &mut outs)
}

fn run_pyramid<R: Rng + ?Sized>(
    bx: &BipartiteBox,
    depth: u32,
    data: &[u8],
    address: usize,
    rng: &mut R,
    outs: &mut [(u8, u8)],
) -> Result<u8> {
    // each box is sampled jointly, Bob's input at level j being address bit j
    let msg = pyramid_encode(data, depth, |idx, x| {
        let j = level_of(depth, idx);
        let y = (address >> j) & 1;
        let (a, b) = bx.sample(x as usize, y, rng);
        outs[idx] = (a as u8, b as u8);
        a as u8
    })?;
    Ok(decoding_path(depth, address).into_iter().fold(msg, |g, (idx, _)| g ^ outs[idx].1))
}

fn level_of(depth: u32, idx: usize) -> u32 {
    let n = 1usize << depth;
    (0..depth).find(|&j| idx < n - (n >> (j + 1))).expect("index inside the pyramid")
}

/// Closed-form efficiency for isotropic boxes: J = 2^k (1 − h((1+E^k)/2)).
pub fn j_exact(e: f64, k: u32) -> Result<RacResult> {
    if !(-1.0..=1.0).contains(&e) {
        return Err(invalid(format!("correlation strength {e} outside [-1, 1]")));
    }
    if k == 0 {
        return Err(invalid("depth must be at least 1"));
    }
    let bias = e.powi(k as i32);
    let j = (k as f64).exp2() * bias_information(bias);
    Ok(RacResult {
        depth: k,
        per_bit_success: (1.0 + bias) / 2.0,
        j,
        m: 1.0,
        delta_ic: j - 1.0,
        per_bit_stderr: 0.0,
        j_stderr: 0.0,
        j_raw: None,
        trials: 0,
    })
}

#[derive(Clone)]
struct Tally {
    correct: u64,
    // counts[(pos * 2 + x) * 2 + g]
    table: Vec<u64>,
}

impl Tally {
    fn new(n: usize, raw: bool) -> Self {
        Self { correct: 0, table: if raw { vec![0; 4 * n] } else { Vec::new() } }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.correct += other.correct;
        for (a, b) in self.table.iter_mut().zip(other.table) {
            *a += b;
        }
        self
    }
}

/// Monte-Carlo estimate of J. Trial `t` draws its data, address and box
/// outcomes from stream `(seed, t)`, so the result does not depend on the
/// thread count.
pub fn j_monte_carlo(config: &RacConfig) -> Result<RacResult> {
    check_depth(config.depth)?;
    if config.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let bx = config.resource.to_box()?;
    let k = config.depth;
    let n = 1usize << k;
    let raw = n <= RAW_TABLE_MAX_BITS;

    let tally = (0..config.trials)
        .into_par_iter()
        .fold(
            || (Tally::new(n, raw), vec![0u8; n], vec![(0u8, 0u8); n - 1]),
            |(mut tally, mut data, mut outs), t| {
                let mut rng = stream(config.seed, t);
                for d in data.iter_mut() {
                    *d = rng.random::<bool>() as u8;
                }
                let address = rng.random_range(0..n);
                let g = run_pyramid(&bx, k, &data, address, &mut rng, &mut outs).expect("validated");
                let x = data[address];
                tally.correct += (g == x) as u64;
                if raw {
                    tally.table[(address * 2 + x as usize) * 2 + g as usize] += 1;
                }
                (tally, data, outs)
            },
        )
        .map(|(tally, _, _)| tally)
        .reduce(|| Tally::new(n, raw), Tally::merge);

    let trials = config.trials as f64;
    let p = tally.correct as f64 / trials;
    let se_p = (p * (1.0 - p) / trials).sqrt();
    let scale = n as f64;
    let j = scale * (1.0 - h2(p));
    let j_stderr = if p > 0.0 && p < 1.0 { scale * ((1.0 - p) / p).log2().abs() * se_p } else { 0.0 };
    let j_raw = raw.then(|| raw_information(&tally.table, n));
    Ok(RacResult {
        depth: k,
        per_bit_success: p,
        j,
        m: 1.0,
        delta_ic: j - 1.0,
        per_bit_stderr: se_p,
        j_stderr,
        j_raw,
        trials: config.trials,
    })
}

fn raw_information(table: &[u64], n: usize) -> f64 {
    (0..n)
        .map(|pos| {
            let cell = &table[pos * 4..pos * 4 + 4];
            let total: u64 = cell.iter().sum();
            if total == 0 {
                return 0.0;
            }
            let p: Vec<f64> = cell.iter().map(|&c| c as f64 / total as f64).collect();
            mutual_information_2d(&p, 2, 2)
        })
        .sum()
}

/// Smallest depth k ≤ kmax with J(E,k) > 1, if any.
pub fn threshold_depth(e: f64, kmax: u32) -> Result<Option<u32>> {
    for k in 1..=kmax {
        if j_exact(e, k)?.j > 1.0 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub e: f64,
    /// Smallest violating depth, `None` when J ≤ 1 up to kmax.
    pub depth: Option<u32>,
    /// Closed-form result at `depth`, or at kmax when there is no violation.
    pub result: RacResult,
}

/// Scans `steps` equally spaced correlation strengths in [emin, emax].
pub fn ic_threshold_scan(emin: f64, emax: f64, steps: usize, kmax: u32) -> Result<Vec<ThresholdRow>> {
    if steps == 0 {
        return Err(invalid("steps must be at least 1"));
    }
    if !(-1.0..=1.0).contains(&emin) || !(-1.0..=1.0).contains(&emax) || emin > emax {
        return Err(invalid(format!("range [{emin}, {emax}] not inside [-1, 1]")));
    }
    if kmax == 0 {
        return Err(invalid("kmax must be at least 1"));
    }
    (0..steps)
        .map(|i| {
            let e = if steps == 1 { emin } else { emin + (emax - emin) * i as f64 / (steps - 1) as f64 };
            let depth = threshold_depth(e, kmax)?;
            let result = j_exact(e, depth.unwrap_or(kmax))?;
            Ok(ThresholdRow { e, depth, result })
        })
        .collect()
}
