//! Accessible information over an explicit, finite menu of measurements.
//!
//! A [`DiscreteMeasuredSystem`] couples classical variables (X, Y) to a system
//! S through outcome laws p(t|x,y,z), one per measurement z in the menu. The
//! receiver either measures S alone, or first reads Y and picks z(y).
//!
//! "All measurements" of an abstract theory is not enumerable, so every value
//! here is relative to the menu supplied by the caller.

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boxes::BipartiteBox;
use crate::error::{invalid, shape, Error, Result};
use crate::infotheory::{entropy, mutual_information_2d, relative_entropy_raw, NORM_TOL};
use crate::rac::{decoding_path, pyramid_encode};
use crate::rng::stream;

/// Strategy spaces up to this size are searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// One measurement of the menu with `table[(x * ny + y) * outcomes + t] = p(t|x,y,z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub name: String,
    pub outcomes: usize,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasuredSystem {
    nx: usize,
    ny: usize,
    px_y: Vec<f64>,
    measurements: Vec<Measurement>,
}

impl DiscreteMeasuredSystem {
    /// `px_y[x * ny + y]`; use `ny = 1` when there is no side information.
    pub fn new(nx: usize, ny: usize, px_y: Vec<f64>, measurements: Vec<Measurement>) -> Result<Self> {
        if nx == 0 || ny == 0 || px_y.len() != nx * ny {
            return Err(shape(format!("p(x,y) has {} entries for {nx}x{ny}", px_y.len())));
        }
        if px_y.iter().any(|&p| !p.is_finite() || p < -NORM_TOL) {
            return Err(Error::NotNormalized("negative entry in p(x,y)".into()));
        }
        let total: f64 = px_y.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(format!("p(x,y) sums to {total}")));
        }
        for m in &measurements {
            if m.outcomes == 0 || m.table.len() != nx * ny * m.outcomes {
                return Err(shape(format!("measurement {:?} has a malformed table", m.name)));
            }
            for (k, slice) in m.table.chunks(m.outcomes).enumerate() {
                let s: f64 = slice.iter().sum();
                if slice.iter().any(|&v| !v.is_finite() || v < -NORM_TOL) || (s - 1.0).abs() > NORM_TOL {
                    return Err(Error::NotNormalized(format!(
                        "measurement {:?}, (x,y) = ({}, {}): outcome law sums to {s}",
                        m.name,
                        k / ny,
                        k % ny
                    )));
                }
            }
        }
        Ok(Self { nx, ny, px_y, measurements })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn px_y(&self) -> &[f64] {
        &self.px_y
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn px(&self) -> Vec<f64> {
        self.px_y.chunks(self.ny).map(|r| r.iter().sum()).collect()
    }

    pub fn py(&self) -> Vec<f64> {
        (0..self.ny).map(|y| (0..self.nx).map(|x| self.px_y[x * self.ny + y]).sum()).collect()
    }

    /// A copy with one more measurement in the menu.
    pub fn with_measurement(&self, m: Measurement) -> Result<Self> {
        let mut ms = self.measurements.clone();
        ms.push(m);
        Self::new(self.nx, self.ny, self.px_y.clone(), ms)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: SystemJson = serde_json::from_str(s)?;
        let nx = j.px_y.len();
        let ny = j.px_y.first().map_or(0, |r| r.len());
        if j.px_y.iter().any(|r| r.len() != ny) {
            return Err(shape("px_y rows differ in length"));
        }
        let mut ms = Vec::with_capacity(j.outcomes.len());
        for (name, by_x) in j.outcomes {
            if by_x.len() != nx || by_x.iter().any(|r| r.len() != ny) {
                return Err(shape(format!("measurement {name:?} is not indexed x -> y -> t")));
            }
            let outcomes = by_x.first().and_then(|r| r.first()).map_or(0, |t| t.len());
            if by_x.iter().flatten().any(|t| t.len() != outcomes) {
                return Err(shape(format!("measurement {name:?} has ragged outcome lists")));
            }
            let table = by_x.into_iter().flatten().flatten().collect();
            ms.push(Measurement { name, outcomes, table });
        }
        Self::new(nx, ny, j.px_y.into_iter().flatten().collect(), ms)
    }

    pub fn to_json(&self) -> String {
        let px_y = self.px_y.chunks(self.ny).map(<[f64]>::to_vec).collect();
        let outcomes = self
            .measurements
            .iter()
            .map(|m| {
                let by_x = m
                    .table
                    .chunks(self.ny * m.outcomes)
                    .map(|row| row.chunks(m.outcomes).map(<[f64]>::to_vec).collect())
                    .collect();
                (m.name.clone(), by_x)
            })
            .collect();
        serde_json::to_string(&SystemJson { px_y, outcomes }).expect("infallible")
    }

    fn max_outcomes(&self) -> usize {
        self.measurements.iter().map(|m| m.outcomes).max().unwrap_or(1)
    }

    /// p(x,t) for measurement `z` ignoring Y, padded to `width` outcomes.
    fn joint_xt(&self, z: usize, width: usize) -> Vec<f64> {
        let m = &self.measurements[z];
        let mut out = vec![0.0; self.nx * width];
        for x in 0..self.nx {
            for y in 0..self.ny {
                let w = self.px_y[x * self.ny + y];
                let row = &m.table[(x * self.ny + y) * m.outcomes..][..m.outcomes];
                for (t, &p) in row.iter().enumerate() {
                    out[x * width + t] += w * p;
                }
            }
        }
        out
    }

    /// p₁(x, y, t) = p(x,y) p(t|x,y,z(y)) as `[x][y * width + t]`.
    fn joint_with_strategy(&self, strategy: &[usize], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nx * self.ny * width];
        for x in 0..self.nx {
            for (y, &z) in strategy.iter().enumerate() {
                let m = &self.measurements[z];
                let w = self.px_y[x * self.ny + y];
                let row = &m.table[(x * self.ny + y) * m.outcomes..][..m.outcomes];
                for (t, &p) in row.iter().enumerate() {
                    out[(x * self.ny + y) * width + t] = w * p;
                }
            }
        }
        out
    }

    /// I(X : T, Y) under strategy z(y).
    pub fn side_information_value(&self, strategy: &[usize]) -> Result<f64> {
        if strategy.len() != self.ny || strategy.iter().any(|&z| z >= self.measurements.len()) {
            return Err(invalid("strategy must pick one menu entry per y"));
        }
        let w = self.max_outcomes();
        Ok(mutual_information_2d(&self.joint_with_strategy(strategy, w), self.nx, self.ny * w))
    }
}

/// Wire format: `{"px_y": [[..]], "outcomes": {name: x -> y -> t}}`.
#[derive(Debug, Serialize, Deserialize)]
struct SystemJson {
    px_y: Vec<Vec<f64>>,
    outcomes: IndexMap<String, Vec<Vec<Vec<f64>>>>,
}

/// max_z I(X:T_z), exhaustive over the menu.
pub fn accessible_information(sys: &DiscreteMeasuredSystem) -> Result<f64> {
    best_measurement(sys).map(|(_, v)| v)
}

/// Index and value of the best single measurement (first one on ties).
pub fn best_measurement(sys: &DiscreteMeasuredSystem) -> Result<(usize, f64)> {
    if sys.measurements.is_empty() {
        return Err(invalid("measurement menu is empty"));
    }
    let w = sys.max_outcomes();
    let mut best = (0, f64::NEG_INFINITY);
    for z in 0..sys.measurements.len() {
        let v = mutual_information_2d(&sys.joint_xt(z, w), sys.nx, w);
        if v > best.1 {
            best = (z, v);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySearch {
    /// Fall back to coordinate ascent when the strategy space is too large.
    pub allow_heuristic: bool,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for StrategySearch {
    fn default() -> Self {
        Self { allow_heuristic: false, restarts: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideInformation {
    pub value: f64,
    /// z(y) attaining `value`.
    pub strategy: Vec<usize>,
    /// False when `value` is only a lower bound from the heuristic search.
    pub exhaustive: bool,
}

/// max over strategies z(·) of I(X : T, Y).
pub fn accessible_information_with_side(
    sys: &DiscreteMeasuredSystem,
    search: &StrategySearch,
) -> Result<SideInformation> {
    let nz = sys.measurements.len();
    if nz == 0 {
        return Err(invalid("measurement menu is empty"));
    }
    let space = (nz as u128).checked_pow(sys.ny as u32).unwrap_or(u128::MAX);
    if space <= EXHAUSTIVE_LIMIT {
        let mut strategy = vec![0usize; sys.ny];
        let mut best = SideInformation { value: f64::NEG_INFINITY, strategy: strategy.clone(), exhaustive: true };
        loop {
            let v = sys.side_information_value(&strategy)?;
            if v > best.value {
                best.value = v;
                best.strategy.clone_from(&strategy);
            }
            if !advance(&mut strategy, nz) {
                return Ok(best);
            }
        }
    }
    if !search.allow_heuristic {
        return Err(Error::TooLarge { entries: space, cap: EXHAUSTIVE_LIMIT });
    }
    let mut best = SideInformation { value: f64::NEG_INFINITY, strategy: Vec::new(), exhaustive: false };
    for r in 0..search.restarts.max(1) {
        let mut rng = stream(search.seed, r as u64);
        let mut strategy: Vec<usize> = (0..sys.ny).map(|_| rng.random_range(0..nz)).collect();
        let mut value = sys.side_information_value(&strategy)?;
        loop {
            let mut improved = false;
            for y in 0..sys.ny {
                for z in 0..nz {
                    let keep = strategy[y];
                    strategy[y] = z;
                    let v = sys.side_information_value(&strategy)?;
                    if v > value + 1e-15 {
                        value = v;
                        improved = true;
                    } else {
                        strategy[y] = keep;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        if value > best.value {
            best = SideInformation { value, strategy, exhaustive: false };
        }
    }
    Ok(best)
}

fn advance(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Alphabet sizes for [`random_nosignalling_system`]; each at most 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemSizes {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub nt: usize,
}

fn random_distribution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // exponential weights give a uniform draw from the simplex
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Random system whose outcome statistics carry no information about X:
/// Σ_y p(x,y) p(t|x,y,z) = p(x) q_z(t) for every z. Each law is q_z plus a
/// deviation that averages to zero over y given x; about a quarter of the
/// deviations are scaled to touch the boundary of the simplex.
pub fn random_nosignalling_system(seed: u64, sizes: SystemSizes) -> Result<DiscreteMeasuredSystem> {
    let SystemSizes { nx, ny, nz, nt } = sizes;
    if [nx, ny, nz, nt].iter().any(|&n| n == 0 || n > 4) {
        return Err(invalid(format!("sizes {sizes:?} must lie in 1..=4")));
    }
    let mut rng = stream(seed, 0);
    let px_y = random_distribution(nx * ny, &mut rng);
    let mut ms = Vec::with_capacity(nz);
    for z in 0..nz {
        let q = random_distribution(nt, &mut rng);
        let mut d: Vec<f64> = (0..nx * ny * nt).map(|_| rng.random::<f64>() - 0.5).collect();
        for cell in d.chunks_mut(nt) {
            let mean = cell.iter().sum::<f64>() / nt as f64;
            cell.iter_mut().for_each(|v| *v -= mean);
        }
        for x in 0..nx {
            let px: f64 = (0..ny).map(|y| px_y[x * ny + y]).sum();
            for t in 0..nt {
                let avg: f64 = (0..ny).map(|y| px_y[x * ny + y] * d[(x * ny + y) * nt + t]).sum::<f64>() / px;
                for y in 0..ny {
                    d[(x * ny + y) * nt + t] -= avg;
                }
            }
        }
        // with |Y| = 1 the projection leaves only rounding noise
        d.iter_mut().filter(|v| v.abs() < 1e-12).for_each(|v| *v = 0.0);
        let mut reach = f64::INFINITY;
        for (k, &v) in d.iter().enumerate() {
            if v < 0.0 {
                reach = reach.min(q[k % nt] / -v);
            }
        }
        let scale = if !reach.is_finite() {
            0.0
        } else if rng.random::<f64>() < 0.25 {
            reach
        } else {
            reach * rng.random::<f64>()
        };
        let table: Vec<f64> = d
            .iter()
            .enumerate()
            .map(|(k, &v)| (q[k % nt] + scale * v).max(0.0))
            .collect();
        ms.push(Measurement { name: format!("z{z}"), outcomes: nt, table });
    }
    DiscreteMeasuredSystem::new(nx, ny, px_y, ms)
}

/// Quantities from one check of I_acc(X:S,Y) ≤ H(Y).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub i_acc: f64,
    pub i_acc_side: f64,
    pub h_y: f64,
    /// H(Y) − I_acc(X:S,Y).
    pub slack: f64,
    /// min over (t,x,y) of p(x) p₂(t|z(y)) − p₁(t,x,y).
    pub intermediate_slack: f64,
    /// D(p₁(t,y) ‖ p₂(t,y)) at the optimal strategy.
    pub relative_entropy_gap: f64,
    pub exhaustive: bool,
}

pub fn lemma_accy_check(sys: &DiscreteMeasuredSystem, search: &StrategySearch) -> Result<LemmaReport> {
    let i_acc = accessible_information(sys)?;
    let side = accessible_information_with_side(sys, search)?;
    let (nx, ny) = (sys.nx, sys.ny);
    let w = sys.max_outcomes();
    let px = sys.px();
    let py = sys.py();
    // p₂(t|z) = Σ_{x,y} p(x,y) p(t|x,y,z)
    let p2: Vec<Vec<f64>> = (0..sys.measurements.len())
        .map(|z| {
            let xt = sys.joint_xt(z, w);
            (0..w).map(|t| (0..nx).map(|x| xt[x * w + t]).sum()).collect()
        })
        .collect();
    let p1 = sys.joint_with_strategy(&side.strategy, w);
    let mut intermediate = f64::INFINITY;
    let mut p1_ty = vec![0.0; ny * w];
    let mut p2_ty = vec![0.0; ny * w];
    for y in 0..ny {
        let z = side.strategy[y];
        for t in 0..w {
            p2_ty[y * w + t] = py[y] * p2[z][t];
            for x in 0..nx {
                let v = p1[(x * ny + y) * w + t];
                p1_ty[y * w + t] += v;
                intermediate = intermediate.min(px[x] * p2[z][t] - v);
            }
        }
    }
    let h_y = entropy(&py);
    Ok(LemmaReport {
        i_acc,
        i_acc_side: side.value,
        h_y,
        slack: h_y - side.value,
        intermediate_slack: intermediate,
        relative_entropy_gap: relative_entropy_raw(&p1_ty, &p2_ty),
        exhaustive: side.exhaustive,
    })
}

/// Worst case over a seeded corpus of random no-signalling systems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub systems: u64,
    pub min_slack: f64,
    pub min_intermediate_slack: f64,
    /// Largest I_acc(X:S) seen; zero up to rounding by construction.
    pub max_i_acc: f64,
    /// Index of the system attaining `min_slack`.
    pub worst: u64,
}

/// Sizes for corpus member `i`: |X|, |T| in 2..=4 and |Y|, |Z| in 1..=4.
pub fn corpus_sizes(seed: u64, i: u64) -> SystemSizes {
    let mut rng = stream(seed, i);
    SystemSizes {
        nx: rng.random_range(2..=4),
        ny: rng.random_range(1..=4),
        nz: rng.random_range(1..=4),
        nt: rng.random_range(2..=4),
    }
}

/// Runs [`lemma_accy_check`] with exhaustive strategy search on `systems`
/// random no-signalling systems.
pub fn lemma_accy_corpus(systems: u64, seed: u64) -> Result<CorpusSummary> {
    let mut out = CorpusSummary {
        systems,
        min_slack: f64::INFINITY,
        min_intermediate_slack: f64::INFINITY,
        max_i_acc: 0.0,
        worst: 0,
    };
    for i in 0..systems {
        let sys = random_nosignalling_system(crate::rng::derive_seed(seed, i), corpus_sizes(seed, i))?;
        let r = lemma_accy_check(&sys, &StrategySearch::default())?;
        if r.slack < out.min_slack {
            out.min_slack = r.slack;
            out.worst = i;
        }
        out.min_intermediate_slack = out.min_intermediate_slack.min(r.intermediate_slack);
        out.max_i_acc = out.max_i_acc.max(r.i_acc);
    }
    Ok(out)
}

/// Exact transcript of a pyramid run: X is the data string (uniform), Y the
/// transmitted message (absent when `message_bits = 0`) and S Bob's halves of
/// the boxes. Bob's menu is every tuple of inputs to his boxes, measurement
/// index Σ yᵢ 2^i and outcome index Σ bᵢ 2^i over box index i.
#[derive(Debug, Clone, PartialEq)]
pub struct RacTranscript {
    pub depth: u32,
    pub message_bits: u32,
    pub system: DiscreteMeasuredSystem,
}

/// Largest depth for which transcripts are enumerated.
pub const MAX_TRANSCRIPT_DEPTH: u32 = 2;

pub fn pyramid_transcript(bx: &BipartiteBox, depth: u32, send_message: bool) -> Result<RacTranscript> {
    if bx.dims() != (2, 2, 2, 2) {
        return Err(shape(format!("protocol needs a 2x2x2x2 box, got {:?}", bx.dims())));
    }
    if depth == 0 || depth > MAX_TRANSCRIPT_DEPTH {
        return Err(invalid(format!("transcripts are enumerated for depth 1..={MAX_TRANSCRIPT_DEPTH}")));
    }
    let n = 1usize << depth;
    let boxes = n - 1;
    let nx = 1usize << n;
    let nz = 1usize << boxes;
    let nt = 1usize << boxes;
    // p(m, t | x, z) as [z][x][m * nt + t]
    let mut joint = vec![vec![vec![0.0; 2 * nt]; nx]; nz];
    for (z, per_z) in joint.iter_mut().enumerate() {
        for (x, cell) in per_z.iter_mut().enumerate() {
            let data: Vec<u8> = (0..n).map(|i| ((x >> i) & 1) as u8).collect();
            for a_tuple in 0..(1usize << boxes) {
                let mut alice_inputs = vec![0u8; boxes];
                let msg = pyramid_encode(&data, depth, |idx, input| {
                    alice_inputs[idx] = input;
                    ((a_tuple >> idx) & 1) as u8
                })?;
                for t in 0..nt {
                    let p: f64 = (0..boxes)
                        .map(|i| {
                            bx.prob(alice_inputs[i] as usize, (z >> i) & 1, (a_tuple >> i) & 1, (t >> i) & 1)
                        })
                        .product();
                    cell[msg as usize * nt + t] += p;
                }
            }
        }
    }
    let ny = if send_message { 2 } else { 1 };
    // p(m|x) must not depend on Bob's choice
    let mut pm_x = vec![[0.0; 2]; nx];
    for x in 0..nx {
        for m in 0..2 {
            let reference: f64 = joint[0][x][m * nt..(m + 1) * nt].iter().sum();
            for per_z in &joint {
                let v: f64 = per_z[x][m * nt..(m + 1) * nt].iter().sum();
                if (v - reference).abs() > 1e-9 {
                    return Err(Error::Infeasible(
                        "Alice's message depends on Bob's inputs: the box signals from Bob to Alice".into(),
                    ));
                }
            }
            pm_x[x][m] = reference;
        }
    }
    let px = 1.0 / nx as f64;
    let px_y: Vec<f64> = if send_message {
        (0..nx).flat_map(|x| [px * pm_x[x][0], px * pm_x[x][1]]).collect()
    } else {
        vec![px; nx]
    };
    let mut ms = Vec::with_capacity(nz);
    for (z, per_z) in joint.iter().enumerate() {
        let mut table = vec![0.0; nx * ny * nt];
        for x in 0..nx {
            for y in 0..ny {
                let row = &mut table[(x * ny + y) * nt..][..nt];
                if send_message {
                    let pm = pm_x[x][y];
                    for t in 0..nt {
                        row[t] = if pm > 0.0 { per_z[x][y * nt + t] / pm } else { 1.0 / nt as f64 };
                    }
                } else {
                    for t in 0..nt {
                        row[t] = per_z[x][t] + per_z[x][nt + t];
                    }
                }
            }
        }
        ms.push(Measurement { name: format!("{z:0width$b}", width = boxes), outcomes: nt, table });
    }
    let system = DiscreteMeasuredSystem::new(nx, ny, px_y, ms)?;
    Ok(RacTranscript { depth, message_bits: send_message as u32, system })
}

/// I_acc(X⃗ : M⃗, B) − m, with the exhaustive strategy search.
pub fn nss_residual(tr: &RacTranscript) -> Result<f64> {
    let side = accessible_information_with_side(&tr.system, &StrategySearch::default())?;
    Ok(side.value - tr.message_bits as f64)
}

/// Σᵢ I(Xᵢ : Gᵢ) when Bob decodes the transcript with the pyramid rule.
pub fn transcript_efficiency(tr: &RacTranscript) -> Result<f64> {
    let sys = &tr.system;
    let n = 1usize << tr.depth;
    let boxes = n - 1;
    if sys.nx != 1 << n || sys.measurements.len() != 1 << boxes {
        return Err(shape("transcript does not match its depth"));
    }
    let nt = sys.measurements[0].outcomes;
    let mut total = 0.0;
    for address in 0..n {
        let path = decoding_path(tr.depth, address);
        let z: usize = path.iter().map(|&(idx, y)| (y as usize) << idx).sum();
        let m = &sys.measurements[z];
        let mut xg = [0.0; 4];
        for x in 0..sys.nx {
            let bit = (x >> address) & 1;
            for y in 0..sys.ny {
                let w = sys.px_y[x * sys.ny + y];
                for t in 0..nt {
                    let g = path.iter().fold(y, |g, &(idx, _)| g ^ ((t >> idx) & 1));
                    xg[bit * 2 + g] += w * m.table[(x * sys.ny + y) * nt + t];
                }
            }
        }
        total += mutual_information_2d(&xg, 2, 2);
    }
    Ok(total)
}
