//! Small-dimension quantum layer: density matrices up to two qubits, von Neumann
//! entropy, the Holevo quantity, singlet boxes and the two-bit qubit encoding.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::boxes::BipartiteBox;
use crate::error::{invalid, shape, Error, Result};
use crate::infotheory::{entropy, mutual_information_2d};

pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for Hermiticity, trace and positivity checks.
pub const STATE_TOL: f64 = 1e-10;

/// Largest Hilbert-space dimension accepted for a single system.
pub const MAX_DIM: usize = 4;

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);
const CI: Complex64 = Complex64::new(0.0, 1.0);

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C0, C1, C1, C0])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C0, -CI, CI, C0])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1])
}

/// (I + r·σ)/2 without validation.
fn bloch_operator(r: [f64; 3]) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    (id + pauli_x() * Complex64::from(r[0]) + pauli_y() * Complex64::from(r[1])
        + pauli_z() * Complex64::from(r[2]))
        * Complex64::from(0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() || !(d == 2 || d == 4) {
            return Err(shape(format!("density matrix must be 2x2 or 4x4, got {}x{}", d, m.ncols())));
        }
        let herm_err = (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > STATE_TOL {
            return Err(invalid(format!("matrix not Hermitian (deviation {herm_err:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(invalid(format!("trace {tr} differs from 1")));
        }
        let rho = Self { m };
        let min = rho.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(invalid(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// Qubit state with Bloch vector `r`, |r| ≤ 1.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let n2: f64 = r.iter().map(|v| v * v).sum();
        if n2 > 1.0 + 1e-12 {
            return Err(invalid(format!("Bloch vector length {} exceeds 1", n2.sqrt())));
        }
        Ok(Self { m: bloch_operator(r) })
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) nonzero vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(invalid("zero state vector"));
        }
        let v = nalgebra::DVector::from_column_slice(psi) / Complex64::from(norm2.sqrt());
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        Self::new(CMatrix::identity(dim, dim) / Complex64::from(dim as f64))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Eigenvalues, closed form for qubits.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }

    /// Bloch vector (tr ρσx, tr ρσy, tr ρσz); qubits only.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.dim() != 2 {
            return Err(shape("Bloch vector needs a qubit"));
        }
        let m = &self.m;
        Ok([2.0 * m[(0, 1)].re, -2.0 * m[(0, 1)].im, (m[(0, 0)] - m[(1, 1)]).re])
    }

    /// tr(Mρ) for an operator `op`.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (op * &self.m).trace().re
    }

    /// Convex mixture Σ wᵢ ρᵢ.
    pub fn mixture(states: &[DensityMatrix], weights: &[f64]) -> Result<Self> {
        if states.is_empty() || states.len() != weights.len() {
            return Err(shape("mixture needs one weight per state"));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(shape("mixture of states with different dimensions"));
        }
        let mut m = CMatrix::zeros(d, d);
        for (s, &w) in states.iter().zip(weights) {
            m += &s.m * Complex64::from(w);
        }
        Self::new(m)
    }

    /// ρ_A ⊗ ρ_B.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        Self::new(self.m.kronecker(&other.m))
    }

    /// Reduced states of a two-qubit state: (tr_B ρ, tr_A ρ).
    pub fn partial_traces(&self) -> Result<(DensityMatrix, DensityMatrix)> {
        if self.dim() != 4 {
            return Err(shape("partial trace needs a two-qubit state"));
        }
        let mut a = CMatrix::zeros(2, 2);
        let mut b = CMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    a[(i, j)] += self.m[(2 * i + k, 2 * j + k)];
                    b[(i, j)] += self.m[(2 * k + i, 2 * k + j)];
                }
            }
        }
        Ok((Self::new(a)?, Self::new(b)?))
    }
}

/// Real eigenvalues of a Hermitian matrix.
fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 2 {
        let a = m[(0, 0)].re;
        let d = m[(1, 1)].re;
        let off = m[(0, 1)].norm();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + off * off).sqrt();
        return vec![mean + rad, mean - rad];
    }
    m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
}

fn spectrum_entropy(eigs: &[f64]) -> f64 {
    let clamped: Vec<f64> = eigs.iter().map(|&l| l.max(0.0)).collect();
    entropy(&clamped).max(0.0)
}

/// S(ρ) = −Σ λ log₂ λ, with eigenvalues down to −1e-10 clamped to zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    spectrum_entropy(&rho.eigenvalues())
}

/// Classical-quantum ensemble {p(x), ρₓ}.
#[derive(Debug, Clone, PartialEq)]
pub struct CQEnsemble {
    px: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl CQEnsemble {
    pub fn new(px: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if px.is_empty() || px.len() != states.len() {
            return Err(shape(format!("{} probabilities for {} states", px.len(), states.len())));
        }
        if px.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::NotNormalized("negative ensemble weight".into()));
        }
        let total: f64 = px.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized(format!("ensemble weights sum to {total}")));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(shape("ensemble states differ in dimension"));
        }
        Ok(Self { px, states })
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn average_state(&self) -> DensityMatrix {
        DensityMatrix::mixture(&self.states, &self.px).expect("ensemble is validated")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: EnsembleJson = serde_json::from_str(s)?;
        let mut states = Vec::with_capacity(j.states.len());
        for flat in j.states {
            let d = (flat.len() as f64).sqrt().round() as usize;
            if d * d != flat.len() {
                return Err(shape(format!("state with {} entries is not square", flat.len())));
            }
            let entries: Vec<Complex64> = flat.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
            states.push(DensityMatrix::new(CMatrix::from_row_slice(d, d, &entries))?);
        }
        Self::new(j.px, states)
    }

    pub fn to_json(&self) -> String {
        let states = self
            .states
            .iter()
            .map(|s| {
                let d = s.dim();
                (0..d)
                    .flat_map(|i| (0..d).map(move |j| (i, j)))
                    .map(|(i, j)| [s.m[(i, j)].re, s.m[(i, j)].im])
                    .collect()
            })
            .collect();
        serde_json::to_string(&EnsembleJson { px: self.px.clone(), states }).expect("infallible")
    }
}

/// Wire format: `{"px":[...],"states":[[[re,im],...],...]}`, each state row-major.
#[derive(Debug, Serialize, Deserialize)]
struct EnsembleJson {
    px: Vec<f64>,
    states: Vec<Vec<[f64; 2]>>,
}

/// I_Q(X:S) = S(ρ̄) − Σₓ p(x) S(ρₓ).
pub fn holevo_quantity(ens: &CQEnsemble) -> f64 {
    let avg = von_neumann_entropy(&ens.average_state());
    let cond: f64 = ens
        .px
        .iter()
        .zip(&ens.states)
        .map(|(p, s)| p * von_neumann_entropy(s))
        .sum();
    avg - cond
}

/// Box obtained by measuring the singlet (|01⟩ − |10⟩)/√2 with projective
/// measurements in the x–z plane: Alice at angle θₓ, Bob at angle φ_y.
/// Correlators are E(θ, φ) = −cos(θ − φ).
pub fn singlet_box(alice: [f64; 2], bob: [f64; 2]) -> BipartiteBox {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let singlet = DensityMatrix::pure(&[
        C0,
        Complex64::from(s),
        Complex64::from(-s),
        C0,
    ])
    .expect("normalized");
    let proj = |angle: f64, outcome: usize| {
        let sign = if outcome == 0 { 1.0 } else { -1.0 };
        bloch_operator([sign * angle.sin(), 0.0, sign * angle.cos()])
    };
    let mut p = Vec::with_capacity(16);
    for &theta in &alice {
        for &phi in &bob {
            for a in 0..2 {
                for b in 0..2 {
                    let op = proj(theta, a).kronecker(&proj(phi, b));
                    p.push(singlet.expectation(&op).max(0.0));
                }
            }
        }
    }
    BipartiteBox::new(2, 2, 2, 2, p).expect("quantum probabilities are normalized")
}

/// Binary-outcome measurement {M₀, M₁} on a qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryPovm {
    pub elements: [CMatrix; 2],
}

impl BinaryPovm {
    /// Projective measurement along unit Bloch direction `n`.
    pub fn projective(n: [f64; 3]) -> Self {
        let neg = [-n[0], -n[1], -n[2]];
        Self { elements: [bloch_operator(n), bloch_operator(neg)] }
    }

    /// Largest deviation from completeness and from positivity.
    pub fn defect(&self) -> f64 {
        let sum = &self.elements[0] + &self.elements[1];
        let completeness = (sum - CMatrix::identity(2, 2))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let negativity = self
            .elements
            .iter()
            .flat_map(hermitian_eigenvalues)
            .fold(0.0f64, |acc, l| acc.max(-l));
        completeness.max(negativity)
    }

    pub fn probability(&self, outcome: usize, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.elements[outcome])
    }
}

/// Two uniformly random bits x₀x₁ encoded into one qubit, with the measurement
/// pair decoding each bit.
#[derive(Debug, Clone)]
pub struct QubitPairEncoding {
    pub alpha: f64,
    pub beta: f64,
    /// `states[x0][x1]`.
    pub states: [[DensityMatrix; 2]; 2],
    /// `povms[m]` decodes bit `x_m`; outcome `t` is the guess.
    pub povms: [BinaryPovm; 2],
}

impl QubitPairEncoding {
    /// tr[M^m_{x_m} ρ_{x0 x1}].
    pub fn success_probability(&self, m: usize, x0: usize, x1: usize) -> f64 {
        let target = if m == 0 { x0 } else { x1 };
        self.povms[m].probability(target, &self.states[x0][x1])
    }

    /// Classical mutual information I(X_m : T) when measurement `m` is applied
    /// to the uniform four-state ensemble.
    pub fn decoding_information(&self, m: usize) -> f64 {
        let mut joint = [0.0; 4];
        for x0 in 0..2 {
            for x1 in 0..2 {
                let xm = if m == 0 { x0 } else { x1 };
                for t in 0..2 {
                    joint[xm * 2 + t] += 0.25 * self.povms[m].probability(t, &self.states[x0][x1]);
                }
            }
        }
        mutual_information_2d(&joint, 2, 2)
    }
}

/// Bloch construction r_{x0x1} = (−1)^{x0} α u + (−1)^{x1} β v with u = ẑ,
/// v = x̂, decoded by projective measurements along u and v.
///
/// Exists iff α² + β² ≤ 1 (the qubit state-space condition for two-bit
/// encodings with symmetric decoding biases).
pub fn qubit_pair_encoding(alpha: f64, beta: f64) -> Result<QubitPairEncoding> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&beta) {
        return Err(invalid(format!("biases ({alpha}, {beta}) outside [0,1]")));
    }
    if alpha * alpha + beta * beta > 1.0 + 1e-12 {
        return Err(Error::Infeasible(format!(
            "alpha^2 + beta^2 = {} > 1: no qubit states and measurements realize these biases",
            alpha * alpha + beta * beta
        )));
    }
    let state = |x0: usize, x1: usize| {
        let sa = if x0 == 0 { alpha } else { -alpha };
        let sb = if x1 == 0 { beta } else { -beta };
        // clamp the boundary case against rounding in the Bloch norm
        let r = [sb, 0.0, sa];
        let n = (r[0] * r[0] + r[2] * r[2]).sqrt();
        let r = if n > 1.0 { [r[0] / n, 0.0, r[2] / n] } else { r };
        DensityMatrix::from_bloch(r).expect("inside the Bloch ball")
    };
    Ok(QubitPairEncoding {
        alpha,
        beta,
        states: [[state(0, 0), state(0, 1)], [state(1, 0), state(1, 1)]],
        povms: [BinaryPovm::projective([0.0, 0.0, 1.0]), BinaryPovm::projective([1.0, 0.0, 0.0])],
    })
}

fn block_diagonal_entropy(blocks: &[(f64, &DensityMatrix)]) -> f64 {
    let d = blocks[0].1.dim();
    let n = blocks.len() * d;
    let mut m = CMatrix::zeros(n, n);
    for (k, (w, rho)) in blocks.iter().enumerate() {
        let scaled = rho.matrix() * Complex64::from(*w);
        m.view_mut((k * d, k * d), (d, d)).copy_from(&scaled);
    }
    spectrum_entropy(&hermitian_eigenvalues(&m))
}

/// I_Q(XY:S) + I_C(X:Y) − I_Q(X:S) − I_Q(Y:SX) for c-q data
/// {p(x,y), ρ_xy}; `states[x * ny + y]`.
///
/// Every term is evaluated from its own density matrix (the classical registers
/// enter as explicit block-diagonal operators), so a vanishing residual is a
/// numerical check of the chain rule rather than an algebraic identity.
pub fn quantum_chain_rule_residual(
    px_y: &[f64],
    nx: usize,
    ny: usize,
    states: &[DensityMatrix],
) -> Result<f64> {
    if px_y.len() != nx * ny || states.len() != nx * ny {
        return Err(shape("need one probability and one state per (x,y)"));
    }
    if states.iter().any(|s| s.dim() > MAX_DIM) {
        return Err(shape(format!("system dimension exceeds {MAX_DIM}")));
    }
    let joint = CQEnsemble::new(px_y.to_vec(), states.to_vec())?;
    let i_xy_s = holevo_quantity(&joint);

    let i_x_y = mutual_information_2d(px_y, nx, ny);

    let px: Vec<f64> = (0..nx).map(|x| (0..ny).map(|y| px_y[x * ny + y]).sum()).collect();
    let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| px_y[x * ny + y]).sum()).collect();
    let mut rho_x = Vec::with_capacity(nx);
    for x in 0..nx {
        if px[x] > 0.0 {
            let w: Vec<f64> = (0..ny).map(|y| px_y[x * ny + y] / px[x]).collect();
            rho_x.push(DensityMatrix::mixture(&states[x * ny..(x + 1) * ny], &w)?);
        } else {
            rho_x.push(states[x * ny].clone());
        }
    }
    let i_x_s = holevo_quantity(&CQEnsemble::new(px.clone(), rho_x.clone())?);

    // I(Y:SX) = H(Y) + H(SX) − H(YSX), with SX = ⊕ₓ p(x) ρₓ and YSX = ⊕_{xy} p(x,y) ρ_xy
    let sx: Vec<(f64, &DensityMatrix)> = px.iter().copied().zip(rho_x.iter()).collect();
    let ysx: Vec<(f64, &DensityMatrix)> = px_y.iter().copied().zip(states.iter()).collect();
    let i_y_sx = entropy(&py) + block_diagonal_entropy(&sx) - block_diagonal_entropy(&ysx);

    Ok(i_xy_s + i_x_y - i_x_s - i_y_sx)
}

/// Measure-and-prepare channel ρ ↦ Σₜ tr(Mₜρ) σₜ.
pub fn measure_and_prepare(
    rho: &DensityMatrix,
    povm: &BinaryPovm,
    prepared: &[DensityMatrix; 2],
) -> Result<DensityMatrix> {
    let w = [povm.probability(0, rho), povm.probability(1, rho)];
    DensityMatrix::mixture(prepared, &w)
}

/// Best projective measurement found by the qubit search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitMeasurementSearch {
    pub information: f64,
    pub direction: [f64; 3],
}

fn info_along(px: &[f64], bloch: &[[f64; 3]], n: [f64; 3]) -> f64 {
    let mut joint = Vec::with_capacity(2 * px.len());
    for (p, r) in px.iter().zip(bloch) {
        let c = (n[0] * r[0] + n[1] * r[1] + n[2] * r[2]).clamp(-1.0, 1.0);
        joint.push(p * 0.5 * (1.0 + c));
        joint.push(p * 0.5 * (1.0 - c));
    }
    mutual_information_2d(&joint, px.len(), 2)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd { (c, fc) } else { (d, fd) }
}

fn normalize(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    (n > 1e-12).then(|| [v[0] / n, v[1] / n, v[2] / n])
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Orthonormal basis of a plane containing every Bloch vector, if one exists.
fn spanning_plane(bloch: &[[f64; 3]]) -> Option<([f64; 3], [f64; 3])> {
    let longest = bloch
        .iter()
        .copied()
        .max_by(|a, b| dot(*a, *a).total_cmp(&dot(*b, *b)))?;
    let e1 = normalize(longest).unwrap_or([0.0, 0.0, 1.0]);
    let reject = |r: [f64; 3], e: [f64; 3]| {
        let c = dot(r, e);
        [r[0] - c * e[0], r[1] - c * e[1], r[2] - c * e[2]]
    };
    let residual = bloch
        .iter()
        .map(|&r| reject(r, e1))
        .max_by(|a, b| dot(*a, *a).total_cmp(&dot(*b, *b)))?;
    let e2 = normalize(residual).unwrap_or_else(|| {
        // all vectors collinear: any orthogonal direction completes the plane
        let trial = if e1[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        normalize(reject(trial, e1)).expect("independent trial vector")
    });
    let out_of_plane = bloch
        .iter()
        .map(|&r| {
            let t = reject(reject(r, e1), e2);
            dot(t, t).sqrt()
        })
        .fold(0.0, f64::max);
    (out_of_plane <= 1e-12).then_some((e1, e2))
}

/// Lower bound on the accessible information of a qubit ensemble from a search
/// over projective measurements: a uniform grid of `grid_steps` Bloch angles
/// followed by `refine_iters` golden-section steps around the best grid point.
///
/// When the Bloch vectors lie in a plane the search runs over the great circle
/// of that plane (tilting out of the plane only shrinks every bias, which is a
/// garbling of the outcome). Otherwise a polar/azimuthal grid of
/// `grid_steps/4` × `grid_steps/4` directions is refined coordinate-wise.
pub fn qubit_measurement_search(
    ens: &CQEnsemble,
    grid_steps: usize,
    refine_iters: usize,
) -> Result<QubitMeasurementSearch> {
    if ens.dim() != 2 {
        return Err(shape("qubit accessible information needs qubit states"));
    }
    let grid_steps = grid_steps.max(4);
    let bloch: Vec<[f64; 3]> = ens.states.iter().map(|s| s.bloch_vector().expect("qubit")).collect();
    let px = ens.px.as_slice();

    if let Some((e1, e2)) = spanning_plane(&bloch) {
        let dir = |t: f64| {
            let (s, c) = t.sin_cos();
            [c * e1[0] + s * e2[0], c * e1[1] + s * e2[1], c * e1[2] + s * e2[2]]
        };
        let f = |t: f64| info_along(px, &bloch, dir(t));
        let step = std::f64::consts::PI / grid_steps as f64;
        let (best_t, best_v) = (0..grid_steps)
            .map(|i| {
                let t = i as f64 * step;
                (t, f(t))
            })
            .fold((0.0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let (t, v) = golden_max(f, best_t - step, best_t + step, refine_iters);
        let (t, v) = if v >= best_v { (t, v) } else { (best_t, best_v) };
        return Ok(QubitMeasurementSearch { information: v.max(0.0), direction: dir(t) });
    }

    let n = (grid_steps / 4).max(4);
    let sph = |theta: f64, phi: f64| {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        [st * cp, st * sp, ct]
    };
    let f = |theta: f64, phi: f64| info_along(px, &bloch, sph(theta, phi));
    let dt = std::f64::consts::PI / n as f64;
    let dp = std::f64::consts::PI / n as f64;
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in 0..=n {
        for j in 0..n {
            let (t, p) = (i as f64 * dt, j as f64 * dp);
            let v = f(t, p);
            if v > best.2 {
                best = (t, p, v);
            }
        }
    }
    let (mut t, mut p, mut v) = best;
    for _ in 0..3 {
        let (nt, vt) = golden_max(|x| f(x, p), t - dt, t + dt, refine_iters);
        if vt > v {
            t = nt;
            v = vt;
        }
        let (np, vp) = golden_max(|y| f(t, y), p - dp, p + dp, refine_iters);
        if vp > v {
            p = np;
            v = vp;
        }
    }
    Ok(QubitMeasurementSearch { information: v.max(0.0), direction: sph(t, p) })
}

/// Accessible-information lower bound; see [`qubit_measurement_search`].
pub fn qubit_accessible_info(ens: &CQEnsemble, grid_steps: usize, refine_iters: usize) -> Result<f64> {
    Ok(qubit_measurement_search(ens, grid_steps, refine_iters)?.information)
}

/// Default search resolution: 720 grid angles, 40 golden-section steps.
pub const DEFAULT_GRID_STEPS: usize = 720;
pub const DEFAULT_REFINE_ITERS: usize = 40;

/// Random density matrix G G† / tr(G G†) with complex Gaussian G.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let rank = rank.clamp(1, dim);
    let g = CMatrix::from_fn(dim, rank, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut m = m / Complex64::from(tr);
    // symmetrize away rounding
    m = (&m + m.adjoint()) * Complex64::from(0.5);
    DensityMatrix::new(m).expect("Gram matrices are positive")
}
