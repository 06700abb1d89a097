//! Exact Shannon quantities over finite joint distributions.
//!
//! All logarithms are base 2. `0·log 0` is taken as 0.

use crate::error::{invalid, shape, Error, Result};

/// Largest dense table accepted by [`JointDistribution`].
pub const MAX_ENTRIES: usize = 1 << 24;

/// Normalization tolerance for probability tables.
pub const NORM_TOL: f64 = 1e-9;

/// Dense joint distribution over several discrete variables, row-major with the
/// last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl JointDistribution {
    pub fn new(dims: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        let entries = table_size(&dims)?;
        if p.len() != entries {
            return Err(shape(format!(
                "table has {} entries, dims {:?} need {}",
                p.len(),
                dims,
                entries
            )));
        }
        let mut total = 0.0;
        for (i, &v) in p.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NotNormalized(format!("entry {i} is {v}")));
            }
            total += v;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(format!("total mass {total}")));
        }
        Ok(Self { dims, p })
    }

    /// Builds a table by evaluating `f` on every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let entries = table_size(&dims)?;
        let mut p = Vec::with_capacity(entries);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..entries {
            p.push(f(&idx));
            increment(&mut idx, &dims);
        }
        Self::new(dims, p)
    }

    /// Independent product of one-dimensional distributions.
    pub fn product(marginals: &[&[f64]]) -> Result<Self> {
        let dims: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
        Self::from_fn(dims, |idx| {
            idx.iter().zip(marginals).map(|(&i, m)| m[i]).product()
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn num_vars(&self) -> usize {
        self.dims.len()
    }

    /// Marginal over `vars`, keeping the variables in ascending index order.
    pub fn marginal(&self, vars: &[usize]) -> Result<JointDistribution> {
        let vars = canonical(vars, self.dims.len())?;
        let out_dims: Vec<usize> = vars.iter().map(|&v| self.dims[v]).collect();
        let out = marginal_table(&self.dims, &self.p, &vars, &out_dims);
        Ok(JointDistribution { dims: out_dims, p: out })
    }
}

fn table_size(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(invalid("distribution needs at least one variable"));
    }
    let mut entries: u128 = 1;
    for &d in dims {
        if d == 0 {
            return Err(invalid("alphabet sizes must be positive"));
        }
        entries = entries.saturating_mul(d as u128);
    }
    if entries > MAX_ENTRIES as u128 {
        return Err(Error::TooLarge { entries, cap: MAX_ENTRIES as u128 });
    }
    Ok(entries as usize)
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for pos in (0..dims.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < dims[pos] {
            return;
        }
        idx[pos] = 0;
    }
}

fn canonical(vars: &[usize], n: usize) -> Result<Vec<usize>> {
    if vars.is_empty() {
        return Err(invalid("variable subset must be nonempty"));
    }
    let mut v = vars.to_vec();
    v.sort_unstable();
    for w in v.windows(2) {
        if w[0] == w[1] {
            return Err(invalid(format!("variable {} listed twice", w[0])));
        }
    }
    if let Some(&bad) = v.iter().find(|&&i| i >= n) {
        return Err(invalid(format!("variable {bad} out of range (have {n})")));
    }
    Ok(v)
}

fn marginal_table(dims: &[usize], p: &[f64], vars: &[usize], out_dims: &[usize]) -> Vec<f64> {
    // stride of each source variable inside the marginal table (0 if summed out)
    let mut out_stride = vec![0usize; dims.len()];
    let mut s = 1;
    for (k, &v) in vars.iter().enumerate().rev() {
        out_stride[v] = s;
        s *= out_dims[k];
    }
    let mut out = vec![0.0; s];
    let mut idx = vec![0usize; dims.len()];
    for &pv in p {
        let o: usize = idx.iter().zip(&out_stride).map(|(i, st)| i * st).sum();
        out[o] += pv;
        increment(&mut idx, dims);
    }
    out
}

/// Entropy in bits of a raw probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.log2();
        }
    }
    h
}

/// Joint entropy H(subset) in bits.
pub fn shannon_entropy(dist: &JointDistribution, subset: &[usize]) -> Result<f64> {
    Ok(entropy(dist.marginal(subset)?.probs()))
}

/// h(x) = −x log x − (1−x) log(1−x).
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("binary entropy argument {x} outside [0,1]")));
    }
    Ok(h2(x))
}

/// Unchecked binary entropy; arguments are clamped into [0,1].
pub(crate) fn h2(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    let mut h = 0.0;
    if x > 0.0 {
        h -= x * x.log2();
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).log2();
    }
    h
}

/// 1 − h((1+ε)/2): the information carried by a binary symmetric guess with
/// correlation bias ε. Uses a power series for small |ε|, where the direct
/// formula cancels catastrophically.
pub fn bias_information(bias: f64) -> f64 {
    let e = bias.abs().min(1.0);
    if e < 1e-2 {
        // Σ_{n≥1} ε^{2n} / (2n(2n−1)) / ln 2
        let e2 = e * e;
        let mut term = e2;
        let mut sum = 0.0;
        for n in 1..=8 {
            let n = n as f64;
            sum += term / (2.0 * n * (2.0 * n - 1.0));
            term *= e2;
        }
        return sum / std::f64::consts::LN_2;
    }
    if e == 1.0 {
        return 1.0;
    }
    ((1.0 + e) * e.ln_1p() + (1.0 - e) * (-e).ln_1p()) / (2.0 * std::f64::consts::LN_2)
}

fn disjoint(a: &[usize], b: &[usize]) -> Result<()> {
    if let Some(v) = a.iter().find(|v| b.contains(v)) {
        return Err(invalid(format!("variable {v} appears in two subsets")));
    }
    Ok(())
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u = a.to_vec();
    u.extend_from_slice(b);
    u.sort_unstable();
    u
}

/// I(A:B) = H(A) + H(B) − H(A,B).
pub fn mutual_information(dist: &JointDistribution, a: &[usize], b: &[usize]) -> Result<f64> {
    disjoint(a, b)?;
    let ha = shannon_entropy(dist, a)?;
    let hb = shannon_entropy(dist, b)?;
    let hab = shannon_entropy(dist, &union(a, b))?;
    Ok(ha + hb - hab)
}

/// I(A:B|C) := I(A:B,C) − I(A:C).
pub fn conditional_mutual_information(
    dist: &JointDistribution,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    disjoint(a, b)?;
    disjoint(a, c)?;
    disjoint(b, c)?;
    Ok(mutual_information(dist, a, &union(b, c))? - mutual_information(dist, a, c)?)
}

/// Mutual information of a two-variable table `pxy[x * ny + y]`, unchecked.
pub fn mutual_information_2d(pxy: &[f64], nx: usize, ny: usize) -> f64 {
    debug_assert_eq!(pxy.len(), nx * ny);
    let mut px = vec![0.0; nx];
    let mut py = vec![0.0; ny];
    for x in 0..nx {
        for y in 0..ny {
            let v = pxy[x * ny + y];
            px[x] += v;
            py[y] += v;
        }
    }
    entropy(&px) + entropy(&py) - entropy(pxy)
}

/// D(p‖q) in bits; `f64::INFINITY` when p is not absolutely continuous w.r.t. q.
pub fn relative_entropy(p: &JointDistribution, q: &JointDistribution) -> Result<f64> {
    if p.dims != q.dims {
        return Err(shape(format!("dims {:?} vs {:?}", p.dims, q.dims)));
    }
    Ok(relative_entropy_raw(&p.p, &q.p))
}

pub(crate) fn relative_entropy_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            d += pi * (pi / qi).log2();
        }
    }
    d
}

/// Fano lower bound on I′(W:Ŵ) for a (2^{lR}, l) code with error probability `pe`:
/// lR − 1 − pe·lR.
pub fn fano_mi_lower_bound(rate: f64, blocklength: usize, pe: f64) -> f64 {
    let lr = rate * blocklength as f64;
    lr - 1.0 - pe * lr
}
