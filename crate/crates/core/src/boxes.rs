//! Two-party boxes p(a,b|x,y) in the CHSH scenario and beyond.
//!
//! A box is stored as a dense row-major table over `(x, y, a, b)`. Constructors
//! validate nonnegativity and per-setting normalization; every other operation
//! assumes a valid box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, Error, Result};
use crate::infotheory::JointDistribution;

/// Default validation tolerance for box entries and normalization.
pub const BOX_TOL: f64 = 1e-9;

/// Slack used when comparing CHSH values against the local and Tsirelson bounds.
pub const CHSH_TOL: f64 = 1e-9;

pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxJson", into = "BoxJson")]
pub struct BipartiteBox {
    nx: usize,
    ny: usize,
    na: usize,
    nb: usize,
    p: Vec<f64>,
}

/// Membership flags computable at the CHSH level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxVerdict {
    pub signalling: bool,
    pub local: bool,
    pub chsh: f64,
    pub tsirelson_compatible: bool,
}

impl BipartiteBox {
    pub fn new(nx: usize, ny: usize, na: usize, nb: usize, p: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(nx, ny, na, nb, p, BOX_TOL)
    }

    pub fn with_tolerance(
        nx: usize,
        ny: usize,
        na: usize,
        nb: usize,
        p: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 || na == 0 || nb == 0 {
            return Err(invalid("box alphabets must be nonempty"));
        }
        let entries = nx * ny * na * nb;
        if p.len() != entries {
            return Err(shape(format!("box table has {} entries, expected {entries}", p.len())));
        }
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < -tol || v > 1.0 + tol {
                return Err(Error::NotNormalized(format!("box entry {i} = {v}")));
            }
        }
        let block = na * nb;
        for (s, chunk) in p.chunks(block).enumerate() {
            let total: f64 = chunk.iter().sum();
            if (total - 1.0).abs() > tol {
                let (x, y) = (s / ny, s % ny);
                return Err(Error::NotNormalized(format!(
                    "setting (x={x}, y={y}) sums to {total}"
                )));
            }
        }
        Ok(Self { nx, ny, na, nb, p })
    }

    fn from_fn(
        nx: usize,
        ny: usize,
        na: usize,
        nb: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut p = Vec::with_capacity(nx * ny * na * nb);
        for x in 0..nx {
            for y in 0..ny {
                for a in 0..na {
                    for b in 0..nb {
                        p.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(nx, ny, na, nb, p)
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.nx, self.ny, self.na, self.nb)
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    fn index(&self, x: usize, y: usize, a: usize, b: usize) -> usize {
        ((x * self.ny + y) * self.na + a) * self.nb + b
    }

    /// p(a,b|x,y).
    pub fn prob(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.p[self.index(x, y, a, b)]
    }

    /// Alice's marginal p(a|x,y).
    pub fn alice_marginal(&self, x: usize, y: usize, a: usize) -> f64 {
        (0..self.nb).map(|b| self.prob(x, y, a, b)).sum()
    }

    /// Bob's marginal p(b|x,y).
    pub fn bob_marginal(&self, x: usize, y: usize, b: usize) -> f64 {
        (0..self.na).map(|a| self.prob(x, y, a, b)).sum()
    }

    fn require_chsh_shape(&self) -> Result<()> {
        if self.dims() != (2, 2, 2, 2) {
            return Err(shape(format!(
                "CHSH scenario needs a 2x2x2x2 box, got {:?}",
                self.dims()
            )));
        }
        Ok(())
    }

    /// Correlator E_xy = Σ_{a,b} (−1)^{a⊕b} p(a,b|x,y) for binary outputs.
    pub fn correlator(&self, x: usize, y: usize) -> f64 {
        let mut e = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let sign = if a == b { 1.0 } else { -1.0 };
                e += sign * self.prob(x, y, a, b);
            }
        }
        e
    }

    /// Draws one outcome pair for settings `(x, y)`.
    pub fn sample<R: Rng + ?Sized>(&self, x: usize, y: usize, rng: &mut R) -> (usize, usize) {
        let base = self.index(x, y, 0, 0);
        let block = &self.p[base..base + self.na * self.nb];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &v) in block.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            acc += v;
            last = i;
            if u < acc {
                return (i / self.nb, i % self.nb);
            }
        }
        // u landed in the rounding gap above the accumulated mass
        (last / self.nb, last % self.nb)
    }

    /// Joint distribution over `(x, y, a, b)` for an input distribution `p_xy[x * ny + y]`.
    pub fn joint_with_inputs(&self, p_xy: &[f64]) -> Result<JointDistribution> {
        if p_xy.len() != self.nx * self.ny {
            return Err(shape(format!(
                "input distribution has {} entries, expected {}",
                p_xy.len(),
                self.nx * self.ny
            )));
        }
        JointDistribution::from_fn(vec![self.nx, self.ny, self.na, self.nb], |i| {
            p_xy[i[0] * self.ny + i[1]] * self.prob(i[0], i[1], i[2], i[3])
        })
    }
}

/// The PR box: p(a,b|x,y) = 1/2 iff a⊕b = x·y.
pub fn pr_box() -> BipartiteBox {
    isotropic_box(1.0).expect("E = 1 is in range")
}

/// Noisy PR box with Pr[a⊕b = x·y] = (1+E)/2 and uniform marginals.
///
/// `E = 1` is the PR box, `E = 0` white noise, `E = −1` the anti-PR box, and
/// `E = 1/√2` saturates Tsirelson's bound.
pub fn isotropic_box(e: f64) -> Result<BipartiteBox> {
    if !(-1.0..=1.0).contains(&e) {
        return Err(invalid(format!("correlation strength {e} outside [-1, 1]")));
    }
    BipartiteBox::from_fn(2, 2, 2, 2, |x, y, a, b| {
        if (a ^ b) == (x & y) {
            (1.0 + e) / 4.0
        } else {
            (1.0 - e) / 4.0
        }
    })
}

/// Local deterministic box: a = fa(x), b = fb(y).
pub fn deterministic_box(fa: &[usize], fb: &[usize], na: usize, nb: usize) -> Result<BipartiteBox> {
    if fa.iter().any(|&a| a >= na) || fb.iter().any(|&b| b >= nb) {
        return Err(invalid("deterministic response outside the output alphabet"));
    }
    BipartiteBox::from_fn(fa.len(), fb.len(), na, nb, |x, y, a, b| {
        if fa[x] == a && fb[y] == b {
            1.0
        } else {
            0.0
        }
    })
}

/// The 16 deterministic strategies of the CHSH scenario.
pub fn chsh_deterministic_boxes() -> Vec<BipartiteBox> {
    let mut out = Vec::with_capacity(16);
    for code in 0..16usize {
        let fa = [code & 1, (code >> 1) & 1];
        let fb = [(code >> 2) & 1, (code >> 3) & 1];
        out.push(deterministic_box(&fa, &fb, 2, 2).expect("binary responses"));
    }
    out
}

/// Entrywise convex combination.
pub fn mix(boxes: &[BipartiteBox], weights: &[f64]) -> Result<BipartiteBox> {
    if boxes.is_empty() || boxes.len() != weights.len() {
        return Err(shape(format!("{} boxes but {} weights", boxes.len(), weights.len())));
    }
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(invalid("mixture weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > BOX_TOL {
        return Err(Error::NotNormalized(format!("mixture weights sum to {total}")));
    }
    let dims = boxes[0].dims();
    if boxes.iter().any(|b| b.dims() != dims) {
        return Err(shape("boxes in a mixture must share alphabets"));
    }
    let mut p = vec![0.0; boxes[0].p.len()];
    for (bx, &w) in boxes.iter().zip(weights) {
        for (acc, v) in p.iter_mut().zip(&bx.p) {
            *acc += w * v;
        }
    }
    BipartiteBox::new(dims.0, dims.1, dims.2, dims.3, p)
}

/// S = E₀₀ + E₀₁ + E₁₀ − E₁₁.
pub fn chsh_value(bx: &BipartiteBox) -> Result<f64> {
    bx.require_chsh_shape()?;
    Ok(bx.correlator(0, 0) + bx.correlator(0, 1) + bx.correlator(1, 0) - bx.correlator(1, 1))
}

/// The eight relabelings of the CHSH expression, ±(ΣE − 2E_{x'y'}) for each
/// position of the minus sign. Index `2 * (2x' + y') + s` with `s = 1` for the
/// negated form; index 6 is [`chsh_value`].
pub fn chsh_symmetrizations(bx: &BipartiteBox) -> Result<[f64; 8]> {
    bx.require_chsh_shape()?;
    let e = [
        bx.correlator(0, 0),
        bx.correlator(0, 1),
        bx.correlator(1, 0),
        bx.correlator(1, 1),
    ];
    let total: f64 = e.iter().sum();
    let mut out = [0.0; 8];
    for (k, &ek) in e.iter().enumerate() {
        let s = total - 2.0 * ek;
        out[2 * k] = s;
        out[2 * k + 1] = -s;
    }
    Ok(out)
}

/// Largest of the eight CHSH relabelings.
pub fn max_chsh(bx: &BipartiteBox) -> Result<f64> {
    Ok(chsh_symmetrizations(bx)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True when each party's marginal is independent of the other party's setting.
pub fn is_no_signalling(bx: &BipartiteBox, tol: f64) -> bool {
    for x in 0..bx.nx {
        for a in 0..bx.na {
            let first = bx.alice_marginal(x, 0, a);
            if (1..bx.ny).any(|y| (bx.alice_marginal(x, y, a) - first).abs() > tol) {
                return false;
            }
        }
    }
    for y in 0..bx.ny {
        for b in 0..bx.nb {
            let first = bx.bob_marginal(0, y, b);
            if (1..bx.nx).any(|x| (bx.bob_marginal(x, y, b) - first).abs() > tol) {
                return false;
            }
        }
    }
    true
}

/// Classifies a CHSH-scenario box.
///
/// Locality uses Fine's criterion: a no-signalling 2222 box is local iff all
/// eight CHSH relabelings are at most 2. Quantum membership is only tested
/// through the necessary condition |S| ≤ 2√2.
pub fn classify(bx: &BipartiteBox) -> Result<BoxVerdict> {
    let sym = chsh_symmetrizations(bx)?;
    let chsh = sym[6];
    let signalling = !is_no_signalling(bx, BOX_TOL);
    let local = !signalling && sym.iter().all(|&s| s <= 2.0 + CHSH_TOL);
    Ok(BoxVerdict {
        signalling,
        local,
        chsh,
        tsirelson_compatible: chsh.abs() <= TSIRELSON_BOUND + CHSH_TOL,
    })
}

/// Wire format: `{"nx":2,"ny":2,"na":2,"nb":2,"p":[[[[...]]]]}` nested x→y→a→b.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BoxJson {
    nx: usize,
    ny: usize,
    na: usize,
    nb: usize,
    p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl TryFrom<BoxJson> for BipartiteBox {
    type Error = Error;

    fn try_from(j: BoxJson) -> Result<Self> {
        let nested_ok = j.p.len() == j.nx
            && j.p.iter().all(|py| {
                py.len() == j.ny
                    && py
                        .iter()
                        .all(|pa| pa.len() == j.na && pa.iter().all(|pb| pb.len() == j.nb))
            });
        if !nested_ok {
            return Err(shape("nested table does not match nx, ny, na, nb"));
        }
        let flat: Vec<f64> = j.p.into_iter().flatten().flatten().flatten().collect();
        BipartiteBox::new(j.nx, j.ny, j.na, j.nb, flat)
    }
}

impl From<BipartiteBox> for BoxJson {
    fn from(b: BipartiteBox) -> Self {
        let p = b
            .p
            .chunks(b.ny * b.na * b.nb)
            .map(|px| {
                px.chunks(b.na * b.nb)
                    .map(|py| py.chunks(b.nb).map(|pa| pa.to_vec()).collect())
                    .collect()
            })
            .collect();
        BoxJson { nx: b.nx, ny: b.ny, na: b.na, nb: b.nb, p }
    }
}

impl BipartiteBox {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("box serialization is infallible")
    }
}
