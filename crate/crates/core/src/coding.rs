//! Finite-blocklength channel coding over discrete memoryless channels.
//!
//! A codebook is an N×l matrix of letters. Its letter frequency f(x) and its
//! tolerance τ = maxₓ |p(x) − f(x)| against a target input law p describe how
//! typical it is; the average error probability P_e is estimated with a
//! uniform message under a chosen decoder. Random codebooks, their
//! re-randomization through a kernel p(x|x′), and the bracket
//! I_acc(X:S) ≤ I_G(X:S) ≤ min(H(X), I_Q) live here too.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accessible_info::{accessible_information, DiscreteMeasuredSystem};
use crate::error::{invalid, shape, Error, Result};
use crate::infotheory::{entropy, mutual_information_2d, NORM_TOL};
use crate::quantum::{holevo_quantity, qubit_accessible_info, CQEnsemble, DEFAULT_GRID_STEPS, DEFAULT_REFINE_ITERS};
use crate::rng::{derive_seed, stream};

/// Largest blocklength accepted.
pub const MAX_BLOCKLENGTH: usize = 1 << 14;

/// Largest number of messages accepted.
pub const MAX_MESSAGES: usize = 1 << 16;

/// Largest output space enumerated by [`exact_error_probability`].
pub const MAX_ENUMERATED_OUTPUTS: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    alphabet: usize,
    n_messages: usize,
    blocklength: usize,
    letters: Vec<u8>,
}

impl Codebook {
    /// `letters[w * l + k]` is letter k of codeword w.
    pub fn new(alphabet: usize, n_messages: usize, blocklength: usize, letters: Vec<u8>) -> Result<Self> {
        if alphabet == 0 || alphabet > 256 {
            return Err(invalid(format!("alphabet size {alphabet} outside 1..=256")));
        }
        check_size(n_messages, blocklength)?;
        if letters.len() != n_messages * blocklength {
            return Err(shape(format!("{} letters for a {n_messages}x{blocklength} codebook", letters.len())));
        }
        if let Some(&bad) = letters.iter().find(|&&x| x as usize >= alphabet) {
            return Err(invalid(format!("letter {bad} outside alphabet of size {alphabet}")));
        }
        Ok(Self { alphabet, n_messages, blocklength, letters })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn n_messages(&self) -> usize {
        self.n_messages
    }

    pub fn blocklength(&self) -> usize {
        self.blocklength
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn codeword(&self, w: usize) -> &[u8] {
        &self.letters[w * self.blocklength..(w + 1) * self.blocklength]
    }

    /// log₂N / l.
    pub fn rate(&self) -> f64 {
        (self.n_messages as f64).log2() / self.blocklength as f64
    }

    /// f(x) = count(x) / (lN).
    pub fn letter_frequency(&self) -> Vec<f64> {
        let mut counts = vec![0u64; self.alphabet];
        for &x in &self.letters {
            counts[x as usize] += 1;
        }
        let total = self.letters.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    /// Appends `tail` to every codeword (same tail for all messages).
    pub fn extend(&self, tail: &[u8]) -> Result<Codebook> {
        let l = self.blocklength + tail.len();
        let mut letters = Vec::with_capacity(self.n_messages * l);
        for w in 0..self.n_messages {
            letters.extend_from_slice(self.codeword(w));
            letters.extend_from_slice(tail);
        }
        Codebook::new(self.alphabet, self.n_messages, l, letters)
    }

    /// The first `positions` letters of every codeword.
    pub fn truncate(&self, positions: usize) -> Result<Codebook> {
        if positions == 0 || positions > self.blocklength {
            return Err(invalid(format!("cannot keep {positions} of {} positions", self.blocklength)));
        }
        let letters = (0..self.n_messages).flat_map(|w| self.codeword(w)[..positions].to_vec()).collect();
        Codebook::new(self.alphabet, self.n_messages, positions, letters)
    }
}

fn check_size(n_messages: usize, blocklength: usize) -> Result<()> {
    if n_messages == 0 || blocklength == 0 {
        return Err(invalid("codebook dimensions must be positive"));
    }
    if blocklength > MAX_BLOCKLENGTH {
        return Err(Error::TooLarge { entries: blocklength as u128, cap: MAX_BLOCKLENGTH as u128 });
    }
    if n_messages > MAX_MESSAGES {
        return Err(Error::TooLarge { entries: n_messages as u128, cap: MAX_MESSAGES as u128 });
    }
    Ok(())
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::NotNormalized("input law has a negative or non-finite entry".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(format!("input law sums to {s}")));
    }
    Ok(())
}

/// τ = maxₓ |p(x) − f(x)|.
pub fn tolerance(cb: &Codebook, p: &[f64]) -> Result<f64> {
    if p.len() != cb.alphabet {
        return Err(shape(format!("law over {} letters for alphabet {}", p.len(), cb.alphabet)));
    }
    Ok(cb.letter_frequency().iter().zip(p).map(|(f, q)| (f - q).abs()).fold(0.0, f64::max))
}

/// Letters drawn i.i.d. from `p`; codeword w uses stream `(seed, w)`.
pub fn random_codebook(p: &[f64], n_messages: usize, blocklength: usize, seed: u64) -> Result<Codebook> {
    check_distribution(p)?;
    check_size(n_messages, blocklength)?;
    let dist = WeightedIndex::new(p).map_err(|e| invalid(format!("input law: {e}")))?;
    let letters = (0..n_messages)
        .flat_map(|w| {
            let mut rng = stream(seed, w as u64);
            (0..blocklength).map(|_| dist.sample(&mut rng) as u8).collect::<Vec<_>>()
        })
        .collect();
    Codebook::new(p.len(), n_messages, blocklength, letters)
}

/// Replaces each letter x′ of `source` by a draw from `kernel[x′]`.
pub fn rerandomize_codebook(source: &Codebook, kernel: &ClassicalChannel, seed: u64) -> Result<Codebook> {
    if kernel.n_in != source.alphabet {
        return Err(shape(format!("kernel has {} inputs, codebook alphabet {}", kernel.n_in, source.alphabet)));
    }
    let rows: Vec<WeightedIndex<f64>> = (0..kernel.n_in)
        .map(|x| WeightedIndex::new(kernel.row(x)).map_err(|e| invalid(format!("kernel row {x}: {e}"))))
        .collect::<Result<_>>()?;
    let letters = (0..source.n_messages)
        .flat_map(|w| {
            let mut rng = stream(seed, w as u64);
            source.codeword(w).iter().map(|&x| rows[x as usize].sample(&mut rng) as u8).collect::<Vec<_>>()
        })
        .collect();
    Codebook::new(kernel.n_out, source.n_messages, source.blocklength, letters)
}

/// Discrete memoryless channel W(s|x), `w[x * n_out + s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct ClassicalChannel {
    n_in: usize,
    n_out: usize,
    w: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for ClassicalChannel {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_out = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_out) {
            return Err(shape("channel rows differ in length"));
        }
        ClassicalChannel::new(rows.len(), n_out, rows.into_iter().flatten().collect())
    }
}

impl From<ClassicalChannel> for Vec<Vec<f64>> {
    fn from(c: ClassicalChannel) -> Self {
        c.w.chunks(c.n_out).map(<[f64]>::to_vec).collect()
    }
}

impl ClassicalChannel {
    pub fn new(n_in: usize, n_out: usize, w: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 || n_in > 256 || n_out > 256 {
            return Err(shape(format!("channel alphabets {n_in}x{n_out} outside 1..=256")));
        }
        if w.len() != n_in * n_out {
            return Err(shape(format!("{} entries for a {n_in}x{n_out} channel", w.len())));
        }
        for (x, row) in w.chunks(n_out).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) || (s - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized(format!("channel row {x} sums to {s}")));
            }
        }
        Ok(Self { n_in, n_out, w })
    }

    pub fn bsc(flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip) {
            return Err(invalid(format!("flip probability {flip} outside [0,1]")));
        }
        Self::new(2, 2, vec![1.0 - flip, flip, flip, 1.0 - flip])
    }

    /// Binary erasure channel; output 2 is the erasure symbol.
    pub fn bec(erasure: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&erasure) {
            return Err(invalid(format!("erasure probability {erasure} outside [0,1]")));
        }
        Self::new(2, 3, vec![1.0 - erasure, 0.0, erasure, 0.0, 1.0 - erasure, erasure])
    }

    /// `bsc:<p>`, `bec:<p>`, or a JSON row-stochastic matrix.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let number = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("channel parameter {s:?}: {e}")));
        if let Some(p) = text.strip_prefix("bsc:") {
            return Self::bsc(number(p)?);
        }
        if let Some(p) = text.strip_prefix("bec:") {
            return Self::bec(number(p)?);
        }
        if text.starts_with('[') {
            return Ok(serde_json::from_str(text)?);
        }
        Err(invalid(format!("unrecognized channel {text:?}; expected bsc:<p>, bec:<p> or a JSON matrix")))
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.n_out..(x + 1) * self.n_out]
    }

    pub fn prob(&self, x: usize, s: usize) -> f64 {
        self.w[x * self.n_out + s]
    }

    /// x′ ↦ Σₓ K(x|x′) W(s|x): `kernel` first, then `self`.
    pub fn compose_after(&self, kernel: &ClassicalChannel) -> Result<ClassicalChannel> {
        if kernel.n_out != self.n_in {
            return Err(shape(format!("kernel outputs {} letters, channel takes {}", kernel.n_out, self.n_in)));
        }
        let mut w = vec![0.0; kernel.n_in * self.n_out];
        for xp in 0..kernel.n_in {
            for x in 0..self.n_in {
                let k = kernel.prob(xp, x);
                for s in 0..self.n_out {
                    w[xp * self.n_out + s] += k * self.prob(x, s);
                }
            }
        }
        ClassicalChannel::new(kernel.n_in, self.n_out, w)
    }

    /// Flip probability if this is a binary symmetric channel.
    fn bsc_flip(&self) -> Option<f64> {
        (self.n_in == 2 && self.n_out == 2 && self.w[1] == self.w[2] && self.w[0] == self.w[3]).then_some(self.w[1])
    }

    /// I(X:S) for input law `p`.
    pub fn mutual_information(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.n_in {
            return Err(shape(format!("law over {} letters for {} inputs", p.len(), self.n_in)));
        }
        check_distribution(p)?;
        let joint: Vec<f64> = (0..self.n_in * self.n_out).map(|k| p[k / self.n_out] * self.w[k]).collect();
        Ok(mutual_information_2d(&joint, self.n_in, self.n_out))
    }

    pub fn transmit<R: Rng + ?Sized>(&self, codeword: &[u8], rng: &mut R, out: &mut Vec<u8>) {
        out.clear();
        for &x in codeword {
            let row = self.row(x as usize);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut s = row.iter().rposition(|&v| v > 0.0).unwrap_or(0);
            for (k, &v) in row.iter().enumerate() {
                acc += v;
                if u < acc && v > 0.0 {
                    s = k;
                    break;
                }
            }
            out.push(s as u8);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Decoder {
    /// argmax_w W(s|x(w)); ties go to the smallest index.
    MaximumLikelihood,
    /// Unique jointly δ-typical codeword, else an error. `None` picks
    /// δ = 0.1·√(log₂ l / l).
    JointTypicality { delta: Option<f64> },
    /// Maximum likelihood on the first `positions` letters only.
    MaximumLikelihoodPrefix { positions: usize },
}

impl Decoder {
    pub fn name(&self) -> String {
        match self {
            Decoder::MaximumLikelihood => "ml".into(),
            Decoder::JointTypicality { .. } => "typical".into(),
            Decoder::MaximumLikelihoodPrefix { positions } => format!("ml-prefix{positions}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(Decoder::MaximumLikelihood),
            "typical" => Ok(Decoder::JointTypicality { delta: None }),
            _ => Err(invalid(format!("unknown decoder {s:?}; expected ml or typical"))),
        }
    }
}

pub fn default_typicality_delta(blocklength: usize) -> f64 {
    let l = blocklength.max(2) as f64;
    0.1 * (l.log2() / l).sqrt()
}

/// A decoder bound to the codebook and channel model it decodes against.
pub struct DecodingRule<'a> {
    decoder: Decoder,
    codebook: &'a Codebook,
    positions: usize,
    log_w: Vec<f64>,
    n_out: usize,
    packed: Option<PackedCodebook>,
    typical: Option<Typicality>,
}

struct PackedCodebook {
    words: usize,
    bits: Vec<u64>,
}

struct Typicality {
    delta: f64,
    log_p: Vec<f64>,
    log_q: Vec<f64>,
    h_x: f64,
    h_s: f64,
    h_xs: f64,
}

fn pack(bits: &[u8], out: &mut [u64]) {
    out.fill(0);
    for (k, &b) in bits.iter().enumerate() {
        out[k / 64] |= (b as u64 & 1) << (k % 64);
    }
}

impl<'a> DecodingRule<'a> {
    /// `input` is the law used by the typicality test; other decoders ignore it.
    pub fn new(decoder: Decoder, codebook: &'a Codebook, channel: &ClassicalChannel, input: &[f64]) -> Result<Self> {
        if channel.n_in != codebook.alphabet {
            return Err(shape(format!(
                "channel takes {} letters, codebook alphabet has {}",
                channel.n_in, codebook.alphabet
            )));
        }
        let positions = match decoder {
            Decoder::MaximumLikelihoodPrefix { positions } => {
                if positions == 0 || positions > codebook.blocklength {
                    return Err(invalid(format!("prefix of {positions} positions")));
                }
                positions
            }
            _ => codebook.blocklength,
        };
        let log_w: Vec<f64> = channel.w.iter().map(|v| v.ln()).collect();
        let packed = match (decoder, channel.bsc_flip()) {
            (Decoder::MaximumLikelihood | Decoder::MaximumLikelihoodPrefix { .. }, Some(f)) if f < 0.5 => {
                let words = positions.div_ceil(64);
                let mut bits = vec![0u64; words * codebook.n_messages];
                for w in 0..codebook.n_messages {
                    pack(&codebook.codeword(w)[..positions], &mut bits[w * words..(w + 1) * words]);
                }
                Some(PackedCodebook { words, bits })
            }
            _ => None,
        };
        let typical = match decoder {
            Decoder::JointTypicality { delta } => {
                if input.len() != channel.n_in {
                    return Err(shape("typicality decoder needs an input law over the channel inputs"));
                }
                check_distribution(input)?;
                let q: Vec<f64> = (0..channel.n_out)
                    .map(|s| (0..channel.n_in).map(|x| input[x] * channel.prob(x, s)).sum())
                    .collect();
                let joint: Vec<f64> = (0..channel.n_in * channel.n_out)
                    .map(|k| input[k / channel.n_out] * channel.w[k])
                    .collect();
                Some(Typicality {
                    delta: delta.unwrap_or_else(|| default_typicality_delta(codebook.blocklength)),
                    log_p: input.iter().map(|v| v.log2()).collect(),
                    log_q: q.iter().map(|v| v.log2()).collect(),
                    h_x: entropy(input),
                    h_s: entropy(&q),
                    h_xs: entropy(&joint),
                })
            }
            _ => None,
        };
        Ok(Self { decoder, codebook, positions, log_w, n_out: channel.n_out, packed, typical })
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder
    }

    /// Decoded message, or `None` when the rule declares an error.
    pub fn decode(&self, received: &[u8]) -> Option<usize> {
        if let Some(t) = &self.typical {
            return self.decode_typical(t, received);
        }
        if let Some(p) = &self.packed {
            let mut r = vec![0u64; p.words];
            pack(&received[..self.positions], &mut r);
            let mut best = (0, u32::MAX);
            for (w, cw) in p.bits.chunks_exact(p.words).enumerate() {
                let d: u32 = cw.iter().zip(&r).map(|(a, b)| (a ^ b).count_ones()).sum();
                if d < best.1 {
                    best = (w, d);
                }
            }
            return Some(best.0);
        }
        let mut best = (0, f64::NEG_INFINITY);
        for w in 0..self.codebook.n_messages {
            let cw = self.codebook.codeword(w);
            let score: f64 = (0..self.positions)
                .map(|k| self.log_w[cw[k] as usize * self.n_out + received[k] as usize])
                .sum();
            if score > best.1 {
                best = (w, score);
            }
        }
        Some(best.0)
    }

    fn decode_typical(&self, t: &Typicality, received: &[u8]) -> Option<usize> {
        let l = self.codebook.blocklength as f64;
        let hs = -received.iter().map(|&s| t.log_q[s as usize]).sum::<f64>() / l;
        if (hs - t.h_s).abs() > t.delta {
            return None;
        }
        let mut found = None;
        for w in 0..self.codebook.n_messages {
            let cw = self.codebook.codeword(w);
            let hx = -cw.iter().map(|&x| t.log_p[x as usize]).sum::<f64>() / l;
            if (hx - t.h_x).abs() > t.delta {
                continue;
            }
            let hxs = -cw
                .iter()
                .zip(received)
                .map(|(&x, &s)| t.log_p[x as usize] + self.log_w[x as usize * self.n_out + s as usize] / std::f64::consts::LN_2)
                .sum::<f64>()
                / l;
            if (hxs - t.h_xs).abs() <= t.delta {
                if found.is_some() {
                    return None;
                }
                found = Some(w);
            }
        }
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodeStats {
    pub rate: f64,
    pub tolerance: f64,
    pub pe: f64,
    pub pe_stderr: f64,
}

/// Monte-Carlo P_e of `tx` sent over `channel` and decoded by `rule`; trial t
/// draws message, noise and nothing else from stream `(seed, t)`.
pub fn simulate_with_decoder(
    channel: &ClassicalChannel,
    tx: &Codebook,
    rule: &DecodingRule<'_>,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    if channel.n_in != tx.alphabet || tx.n_messages != rule.codebook.n_messages {
        return Err(shape("transmitted codebook does not match the channel or the decoder"));
    }
    if channel.n_out != rule.n_out || tx.blocklength < rule.positions {
        return Err(shape("channel output does not match the decoder"));
    }
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, t| {
            let mut rng = stream(seed, t);
            let w = rng.random_range(0..tx.n_messages);
            channel.transmit(tx.codeword(w), &mut rng, buf);
            (rule.decode(buf) != Some(w)) as u64
        })
        .sum();
    let pe = errors as f64 / trials as f64;
    Ok((pe, (pe * (1.0 - pe) / trials as f64).sqrt()))
}

/// P_e of `cb` over `channel` with `decoder`; tolerance is measured against `input`.
pub fn simulate_code(
    channel: &ClassicalChannel,
    cb: &Codebook,
    input: &[f64],
    decoder: Decoder,
    trials: u64,
    seed: u64,
) -> Result<CodeStats> {
    let rule = DecodingRule::new(decoder, cb, channel, input)?;
    let (pe, pe_stderr) = simulate_with_decoder(channel, cb, &rule, trials, seed)?;
    Ok(CodeStats { rate: cb.rate(), tolerance: tolerance(cb, input)?, pe, pe_stderr })
}

/// Exact P_e by enumerating every output sequence.
pub fn exact_error_probability(channel: &ClassicalChannel, tx: &Codebook, rule: &DecodingRule<'_>) -> Result<f64> {
    if channel.n_in != tx.alphabet || tx.n_messages != rule.codebook.n_messages || channel.n_out != rule.n_out {
        return Err(shape("transmitted codebook does not match the channel or the decoder"));
    }
    let l = tx.blocklength;
    let outputs = (channel.n_out as u128).checked_pow(l as u32).unwrap_or(u128::MAX);
    if outputs > MAX_ENUMERATED_OUTPUTS {
        return Err(Error::TooLarge { entries: outputs, cap: MAX_ENUMERATED_OUTPUTS });
    }
    let mut s = vec![0u8; l];
    let mut correct = 0.0;
    loop {
        if let Some(w) = rule.decode(&s) {
            let cw = tx.codeword(w);
            correct += (0..l).map(|k| channel.prob(cw[k] as usize, s[k] as usize)).product::<f64>();
        }
        let mut k = 0;
        loop {
            if k == l {
                return Ok((1.0 - correct / tx.n_messages as f64).max(0.0));
            }
            s[k] += 1;
            if (s[k] as usize) < channel.n_out {
                break;
            }
            s[k] = 0;
            k += 1;
        }
    }
}

/// Fano converse: P_e ≥ 1 − H′/R − 1/(lR), with H′ any upper bound on the
/// per-letter information.
pub fn fano_converse_bound(rate: f64, blocklength: usize, info_per_letter: f64) -> f64 {
    1.0 - info_per_letter / rate - 1.0 / (blocklength as f64 * rate)
}

/// Exact random-coding average P̄_e over BSC(`flip`) for codebooks with
/// 2^{log2_messages} i.i.d. uniform codewords of length `l`, ML decoding with
/// ties to the smallest index. `log2_messages` may be fractional.
pub fn bsc_ensemble_error_probability(flip: f64, blocklength: usize, log2_messages: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&flip) {
        return Err(invalid(format!("flip probability {flip} outside [0, 1/2)")));
    }
    if blocklength == 0 || blocklength > MAX_BLOCKLENGTH {
        return Err(invalid(format!("blocklength {blocklength} outside 1..={MAX_BLOCKLENGTH}")));
    }
    if log2_messages < 0.0 {
        return Err(invalid("message count below 1"));
    }
    let l = blocklength;
    let n = log2_messages.exp2();
    let ln_pmf = |p: f64| -> Vec<f64> {
        let mut v = vec![0.0; l + 1];
        v[0] = l as f64 * (-p).ln_1p();
        for j in 0..l {
            v[j + 1] = v[j] + ((l - j) as f64).ln() - ((j + 1) as f64).ln() + (p / (1.0 - p)).ln();
        }
        v
    };
    let half: Vec<f64> = ln_pmf(0.5).into_iter().map(f64::exp).collect();
    let noise: Vec<f64> = if flip == 0.0 {
        let mut v = vec![0.0; l + 1];
        v[0] = 1.0;
        v
    } else {
        ln_pmf(flip).into_iter().map(f64::exp).collect()
    };
    // lower[d] = P[Bin(l,1/2) < d], upper[d] = P[Bin(l,1/2) ≥ d]
    let mut lower = vec![0.0; l + 2];
    for d in 0..=l {
        lower[d + 1] = lower[d] + half[d];
    }
    let mut upper = vec![0.0; l + 2];
    for d in (0..=l).rev() {
        upper[d] = upper[d + 1] + half[d];
    }
    let ln_tail = |d: usize| if lower[d] < 0.5 { (-lower[d]).ln_1p() } else { upper[d].ln() };
    let mut pe = 0.0;
    for d in 0..=l {
        if noise[d] == 0.0 {
            continue;
        }
        // competitors beating the true word: closer, or equally close with a smaller index
        let ln_b = ln_tail(d);
        let ln_a = ln_tail(d + 1);
        let tie = half[d];
        let ln_correct = if n <= 1.0 {
            0.0
        } else {
            // (1/N) Σ_{j<N} a^j b^{N−1−j} = (b^N − a^N) / (N (b − a))
            n * ln_b + (-(n * (ln_a - ln_b)).exp_m1()).ln() - (n * tie).ln()
        };
        pe += noise[d] * -ln_correct.exp_m1();
    }
    Ok(pe.clamp(0.0, 1.0))
}

/// One row of a code experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeRow {
    pub blocklength: usize,
    pub n_messages: usize,
    pub stats: CodeStats,
    pub decoder: String,
    pub seed: u64,
}

/// N = round(2^{lR}).
pub fn message_count(rate: f64, blocklength: usize) -> Result<usize> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("rate {rate} must be positive")));
    }
    let n = (rate * blocklength as f64).exp2().round();
    if n > MAX_MESSAGES as f64 {
        return Err(invalid(format!(
            "rate {rate} at l = {blocklength} needs 2^{} messages, above the cap of 2^16",
            rate * blocklength as f64
        )));
    }
    Ok((n as usize).max(1))
}

/// `codebooks` random codebooks with uniform letters at each length; codebook c
/// uses seed `derive_seed(seed, c)` for its letters and a second derived seed
/// for its trials.
pub fn code_experiment(
    channel: &ClassicalChannel,
    rate: f64,
    blocklength: usize,
    codebooks: usize,
    trials: u64,
    decoder: Decoder,
    seed: u64,
) -> Result<Vec<CodeRow>> {
    let n = message_count(rate, blocklength)?;
    let input = vec![1.0 / channel.n_in as f64; channel.n_in];
    (0..codebooks)
        .map(|c| {
            let cb_seed = derive_seed(seed, ((blocklength as u64) << 32) | c as u64);
            let cb = random_codebook(&input, n, blocklength, cb_seed)?;
            let stats = simulate_code(channel, &cb, &input, decoder, trials, derive_seed(cb_seed, u64::MAX))?;
            Ok(CodeRow { blocklength, n_messages: n, stats, decoder: decoder.name(), seed: cb_seed })
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Nearest-rank quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Tolerances of `seeds` random codebooks (N×l, letters from `p`).
pub fn tolerance_sample(p: &[f64], n_messages: usize, blocklength: usize, seeds: u64, seed: u64) -> Result<Vec<f64>> {
    (0..seeds)
        .map(|i| {
            let cb = random_codebook(p, n_messages, blocklength, derive_seed(seed, ((blocklength as u64) << 32) | i))?;
            tolerance(&cb, p)
        })
        .collect()
}

/// Outcome of the re-randomization experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RerandomizationReport {
    /// Exact P_e of the source code on the composed channel.
    pub source_pe: f64,
    pub mean_pe: f64,
    /// Standard error of `mean_pe` across sampled codebooks.
    pub mean_stderr: f64,
    pub codebooks: usize,
}

/// Re-randomizes `source` through `kernel` `codebooks` times, sends each
/// result over `channel`, and decodes with ML for `source` on the composed
/// channel. All error probabilities are exact.
pub fn rerandomization_experiment(
    source: &Codebook,
    kernel: &ClassicalChannel,
    channel: &ClassicalChannel,
    codebooks: usize,
    seed: u64,
) -> Result<RerandomizationReport> {
    if codebooks < 2 {
        return Err(invalid("need at least 2 sampled codebooks"));
    }
    let composed = channel.compose_after(kernel)?;
    let rule = DecodingRule::new(Decoder::MaximumLikelihood, source, &composed, &[])?;
    let source_pe = exact_error_probability(&composed, source, &rule)?;
    let pes: Vec<f64> = (0..codebooks)
        .map(|c| {
            let cb = rerandomize_codebook(source, kernel, derive_seed(seed, c as u64))?;
            exact_error_probability(channel, &cb, &rule)
        })
        .collect::<Result<_>>()?;
    let k = pes.len() as f64;
    let mean = pes.iter().sum::<f64>() / k;
    let var = pes.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (k - 1.0);
    Ok(RerandomizationReport { source_pe, mean_pe: mean, mean_stderr: (var / k).sqrt(), codebooks })
}

/// The system whose generalized mutual information is bracketed.
pub enum GmiSystem<'a> {
    Classical { input: &'a [f64], channel: &'a ClassicalChannel },
    Quantum(&'a CQEnsemble),
    Measured(&'a DiscreteMeasuredSystem),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GmiBracket {
    pub lower: f64,
    pub upper: f64,
}

/// Computable bounds lower ≤ I_G(X:S) ≤ upper.
///
/// Classical outputs give I_C on both sides. Quantum outputs give the Holevo
/// quantity above and a measured lower bound (projective search for qubits,
/// the eigenbasis of the average state for two qubits). A finite menu gives
/// its accessible information and H(X).
pub fn gmi_bracket(system: &GmiSystem<'_>) -> Result<GmiBracket> {
    match system {
        GmiSystem::Classical { input, channel } => {
            let i = channel.mutual_information(input)?;
            Ok(GmiBracket { lower: i, upper: i })
        }
        GmiSystem::Quantum(ens) => {
            let upper = holevo_quantity(ens).min(entropy(ens.px()));
            let lower = if ens.dim() == 2 {
                qubit_accessible_info(ens, DEFAULT_GRID_STEPS, DEFAULT_REFINE_ITERS)?
            } else {
                eigenbasis_information(ens)
            };
            Ok(GmiBracket { lower: lower.min(upper), upper })
        }
        GmiSystem::Measured(sys) => {
            Ok(GmiBracket { lower: accessible_information(sys)?, upper: entropy(&sys.px()) })
        }
    }
}

fn eigenbasis_information(ens: &CQEnsemble) -> f64 {
    let avg = ens.average_state();
    let eig = avg.matrix().clone().symmetric_eigen();
    let d = ens.dim();
    let nx = ens.px().len();
    let mut joint = vec![0.0; nx * d];
    for (x, (&p, rho)) in ens.px().iter().zip(ens.states()).enumerate() {
        for t in 0..d {
            let v = eig.eigenvectors.column(t);
            let pt = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
            joint[x * d + t] = p * pt.max(0.0);
        }
    }
    mutual_information_2d(&joint, nx, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::h2;
    use crate::quantum::DensityMatrix;
    use num_complex::Complex64;
    use rand::Rng;
    use proptest::prelude::*;

    fn cb(alphabet: usize, rows: &[&[u8]]) -> Codebook {
        let l = rows[0].len();
        Codebook::new(alphabet, rows.len(), l, rows.concat()).unwrap()
    }

    #[test]
    fn letter_frequency_and_tolerance() {
        let zeros = cb(2, &[&[0, 0, 0], &[0, 0, 0]]);
        assert_eq!(zeros.letter_frequency(), vec![1.0, 0.0]);
        let swap = cb(2, &[&[0, 1], &[1, 0]]);
        assert_eq!(swap.letter_frequency(), vec![0.5, 0.5]);
        assert_eq!(tolerance(&swap, &[0.5, 0.5]).unwrap(), 0.0);
        let skew = cb(2, &[&[0, 0], &[0, 1]]);
        assert_eq!(tolerance(&skew, &[0.5, 0.5]).unwrap(), 0.25);
        assert!(tolerance(&skew, &[1.0]).is_err());
    }

    #[test]
    fn codebook_validation() {
        assert!(Codebook::new(2, 1, 2, vec![0, 2]).is_err());
        assert!(Codebook::new(2, 2, 2, vec![0, 1]).is_err());
        assert!(matches!(check_size(1 << 17, 4), Err(Error::TooLarge { .. })));
        assert!(matches!(check_size(4, (1 << 14) + 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn random_codebooks() {
        let point = random_codebook(&[0.0, 1.0, 0.0], 4, 5, 1).unwrap();
        assert!(point.letters().iter().all(|&x| x == 1));
        assert_eq!(random_codebook(&[0.3, 0.7], 8, 9, 5).unwrap(), random_codebook(&[0.3, 0.7], 8, 9, 5).unwrap());
        // law of large numbers at lN = 2^14
        let big = random_codebook(&[0.3, 0.7], 64, 256, 2).unwrap();
        assert!(tolerance(&big, &[0.3, 0.7]).unwrap() < 0.02);
        let mut ok = 0;
        for s in 0..100 {
            if tolerance(&random_codebook(&[0.5, 0.5], 64, 256, s).unwrap(), &[0.5, 0.5]).unwrap() < 0.05 {
                ok += 1;
            }
        }
        assert!(ok >= 99);
    }

    #[test]
    fn rerandomization_kernels() {
        let source = random_codebook(&[0.5, 0.5], 8, 6, 3).unwrap();
        let id = ClassicalChannel::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(rerandomize_codebook(&source, &id, 9).unwrap(), source);
        let constant = ClassicalChannel::new(2, 3, vec![0.2, 0.3, 0.5, 0.2, 0.3, 0.5]).unwrap();
        let r = rerandomize_codebook(&source, &constant, 1).unwrap();
        assert_eq!(r.alphabet(), 3);
        assert!(rerandomize_codebook(&r, &id, 1).is_err());
    }

    #[test]
    fn channel_parsing() {
        assert_eq!(ClassicalChannel::parse("bsc:0.1").unwrap(), ClassicalChannel::bsc(0.1).unwrap());
        assert_eq!(ClassicalChannel::parse("bec:0.25").unwrap().n_out(), 3);
        let m = ClassicalChannel::parse("[[0.9,0.1],[0.2,0.8]]").unwrap();
        assert_eq!(m.prob(1, 0), 0.2);
        assert!(ClassicalChannel::parse("[[0.9,0.2],[0.2,0.8]]").is_err());
        assert!(ClassicalChannel::parse("awgn:1").is_err());
        assert!(ClassicalChannel::parse("bsc:1.5").is_err());
    }

    #[test]
    fn capacity_of_bsc() {
        let c = ClassicalChannel::bsc(0.1).unwrap().mutual_information(&[0.5, 0.5]).unwrap();
        assert!((c - 0.531_004_406).abs() < 1e-9);
        assert!((c - (1.0 - h2(0.1))).abs() < 1e-12);
    }

    #[test]
    fn noiseless_ml_is_error_free() {
        let code = cb(2, &[&[0, 0, 0], &[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]);
        let ch = ClassicalChannel::bsc(0.0).unwrap();
        let s = simulate_code(&ch, &code, &[0.5, 0.5], Decoder::MaximumLikelihood, 2000, 4).unwrap();
        assert_eq!(s.pe, 0.0);
        assert_eq!(s.rate, 2.0 / 3.0);
        let rule = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap();
        assert_eq!(exact_error_probability(&ch, &code, &rule).unwrap(), 0.0);
        // generic path over a non-symmetric but noiseless channel
        let ident = ClassicalChannel::parse("[[1,0,0],[0,0,1]]").unwrap();
        let rule = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ident, &[]).unwrap();
        assert_eq!(exact_error_probability(&ident, &code, &rule).unwrap(), 0.0);
    }

    #[test]
    fn ml_ties_go_to_smallest_index() {
        let code = cb(2, &[&[0, 0], &[0, 0], &[1, 1]]);
        let ch = ClassicalChannel::bsc(0.2).unwrap();
        let fast = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap();
        assert_eq!(fast.decode(&[0, 0]), Some(0));
        assert_eq!(fast.decode(&[0, 1]), Some(0));
        let skew = ClassicalChannel::parse("[[0.8,0.2],[0.2,0.8000000000000000]]").unwrap();
        let generic = DecodingRule { packed: None, ..DecodingRule::new(Decoder::MaximumLikelihood, &code, &skew, &[]).unwrap() };
        assert_eq!(generic.decode(&[0, 1]), Some(0));
    }

    #[test]
    fn packed_and_generic_ml_agree() {
        let code = random_codebook(&[0.5, 0.5], 32, 70, 8).unwrap();
        let ch = ClassicalChannel::bsc(0.15).unwrap();
        let fast = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap();
        assert!(fast.packed.is_some());
        let slow = DecodingRule { packed: None, ..DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap() };
        let mut rng = stream(1, 0);
        let mut buf = Vec::new();
        for _ in 0..300 {
            let w = rng.random_range(0..32);
            ch.transmit(code.codeword(w), &mut rng, &mut buf);
            assert_eq!(fast.decode(&buf), slow.decode(&buf));
        }
    }

    #[test]
    fn typicality_decoder() {
        let ch = ClassicalChannel::bsc(0.05).unwrap();
        let code = random_codebook(&[0.5, 0.5], 16, 200, 12).unwrap();
        let s = simulate_code(&ch, &code, &[0.5, 0.5], Decoder::JointTypicality { delta: Some(0.15) }, 500, 3).unwrap();
        assert!(s.pe < 0.1);
        assert!((default_typicality_delta(256) - 0.1 * (8.0f64 / 256.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_matches_monte_carlo() {
        let ch = ClassicalChannel::bsc(0.2).unwrap();
        let code = random_codebook(&[0.5, 0.5], 8, 10, 21).unwrap();
        let rule = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap();
        let exact = exact_error_probability(&ch, &code, &rule).unwrap();
        let (pe, se) = simulate_with_decoder(&ch, &code, &rule, 40_000, 5).unwrap();
        assert!((pe - exact).abs() < 4.0 * se);
    }

    #[test]
    fn prefix_decoding_preserves_error_exactly() {
        // a rate-R code of length λl padded to length l: rate λR, same P_e
        let ch = ClassicalChannel::bsc(0.1).unwrap();
        for seed in 0..5 {
            let short = random_codebook(&[0.5, 0.5], 8, 6, seed).unwrap();
            let long = short.extend(&[1, 0, 1, 1]).unwrap();
            assert!((long.rate() - 0.6 * short.rate()).abs() < 1e-15);
            let r_short = DecodingRule::new(Decoder::MaximumLikelihood, &short, &ch, &[]).unwrap();
            let r_long = DecodingRule::new(Decoder::MaximumLikelihoodPrefix { positions: 6 }, &long, &ch, &[]).unwrap();
            let a = exact_error_probability(&ch, &short, &r_short).unwrap();
            let b = exact_error_probability(&ch, &long, &r_long).unwrap();
            assert!((a - b).abs() < 1e-12);
            assert_eq!(long.truncate(6).unwrap(), short);
        }
    }

    #[test]
    fn ensemble_formula_landmarks() {
        let cases = [
            (20, 8.0, 0.134_262_87),
            (30, 12.0, 0.110_138_35),
            (40, 16.0, 0.092_134_17),
            (64, 25.6, 0.062_656_82),
            (128, 51.2, 0.025_273_56),
            (256, 102.4, 0.004_963_67),
            (10, 7.0, 0.467_745_80),
            (20, 14.0, 0.584_901_60),
        ];
        for (l, lg, want) in cases {
            let got = bsc_ensemble_error_probability(0.1, l, lg).unwrap();
            assert!((got - want).abs() < 5e-8, "l={l}: {got} vs {want}");
        }
        assert_eq!(bsc_ensemble_error_probability(0.1, 8, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ensemble_formula_matches_codebook_average() {
        // average exact P_e over many random codebooks of 4 words, l = 6
        let ch = ClassicalChannel::bsc(0.1).unwrap();
        let k = 400;
        let mut total = 0.0;
        for s in 0..k {
            let code = random_codebook(&[0.5, 0.5], 4, 6, 1000 + s).unwrap();
            let rule = DecodingRule::new(Decoder::MaximumLikelihood, &code, &ch, &[]).unwrap();
            total += exact_error_probability(&ch, &code, &rule).unwrap();
        }
        let avg = total / k as f64;
        let formula = bsc_ensemble_error_probability(0.1, 6, 2.0).unwrap();
        assert!((avg - formula).abs() < 0.02, "{avg} vs {formula}");
    }

    #[test]
    fn fano_bound_values() {
        assert!((fano_converse_bound(0.5, 100, 1.0) - (1.0 - 2.0 - 0.02)).abs() < 1e-15);
        assert!(fano_converse_bound(0.7, 20, 0.531) > 0.0);
    }

    #[test]
    fn message_counts() {
        assert_eq!(message_count(0.4, 20).unwrap(), 256);
        assert_eq!(message_count(0.7, 15).unwrap(), 1448);
        assert!(message_count(0.4, 64).is_err());
        assert!(message_count(-0.1, 64).is_err());
        assert!(message_count(0.5, 40).is_err());
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.95), 95.0);
    }

    #[test]
    fn rerandomization_preserves_average_error() {
        let kernel = ClassicalChannel::parse("[[0.7,0.2,0.1],[0.1,0.3,0.6]]").unwrap();
        let channel = ClassicalChannel::parse("[[0.9,0.1],[0.5,0.5],[0.15,0.85]]").unwrap();
        let source = random_codebook(&[0.5, 0.5], 16, 8, 77).unwrap();
        let r = rerandomization_experiment(&source, &kernel, &channel, 200, 5).unwrap();
        assert!((r.mean_pe - r.source_pe).abs() <= 3.0 * r.mean_stderr, "{r:?}");
    }

    #[test]
    fn gmi_brackets() {
        let ch = ClassicalChannel::bsc(0.1).unwrap();
        let b = gmi_bracket(&GmiSystem::Classical { input: &[0.5, 0.5], channel: &ch }).unwrap();
        assert_eq!(b.lower, b.upper);

        let ket = |v: &[f64]| {
            let c: Vec<Complex64> = v.iter().map(|&x| Complex64::from(x)).collect();
            DensityMatrix::pure(&c).unwrap()
        };
        let zp = CQEnsemble::new(vec![0.5, 0.5], vec![ket(&[1.0, 0.0]), ket(&[1.0, 1.0])]).unwrap();
        let b = gmi_bracket(&GmiSystem::Quantum(&zp)).unwrap();
        assert!((b.upper - 0.600_876_036_692_856).abs() < 1e-12);
        assert!((b.lower - 0.399_123_963_307_143_9).abs() < 1e-9);

        let bell = |v: &[f64]| ket(v);
        let four = CQEnsemble::new(
            vec![0.25; 4],
            vec![bell(&[1.0, 0.0, 0.0, 1.0]), bell(&[1.0, 0.0, 0.0, -1.0]), bell(&[0.0, 1.0, 1.0, 0.0]), bell(&[0.0, 1.0, -1.0, 0.0])],
        )
        .unwrap();
        let b = gmi_bracket(&GmiSystem::Quantum(&four)).unwrap();
        assert!((b.upper - 2.0).abs() < 1e-9);
        assert!(b.lower <= b.upper + 1e-9);

        let sys = crate::accessible_info::random_nosignalling_system(2, crate::accessible_info::SystemSizes { nx: 3, ny: 2, nz: 2, nt: 2 }).unwrap();
        let b = gmi_bracket(&GmiSystem::Measured(&sys)).unwrap();
        assert!(b.lower <= b.upper + 1e-9);
        assert!((b.upper - entropy(&sys.px())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn frequencies_sum_to_one(seed in 0u64..1000, n in 1usize..20, l in 1usize..40) {
            let code = random_codebook(&[0.2, 0.5, 0.3], n, l, seed).unwrap();
            let s: f64 = code.letter_frequency().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(tolerance(&code, &[0.2, 0.5, 0.3]).unwrap() >= 0.0);
        }

        #[test]
        fn post_processing_never_adds_information(a in 0.0f64..1.0, b in 0.0f64..1.0, f in 0.0f64..0.5, p in 0.01f64..0.99) {
            let ch = ClassicalChannel::bsc(f).unwrap();
            let post = ClassicalChannel::new(2, 2, vec![a, 1.0 - a, b, 1.0 - b]).unwrap();
            let composed = post.compose_after(&ch).unwrap();
            let input = [p, 1.0 - p];
            prop_assert!(composed.mutual_information(&input).unwrap() <= ch.mutual_information(&input).unwrap() + 1e-10);
        }
    }
}
