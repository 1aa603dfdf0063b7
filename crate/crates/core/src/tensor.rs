//! Dense complex tensors in row-major layout.
//!
//! A [`DenseTensor`] is the value type of every vertex decoration, state and
//! operator in the crate. Axis `k` of a tensor with shape `[d_0, .., d_{r-1}]`
//! has stride `d_{k+1} * .. * d_{r-1}`, so the last index runs fastest.
//!
//! Isometries are stored with their codomain (upper) axes first and their
//! domain (lower) axes last, which makes the row-major data of a tensor of
//! shape `[out.., in..]` identical to the row-major data of its matrix
//! `M: (prod out) x (prod in)`. [`IndexSplit`] lets callers name an arbitrary
//! split instead.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{arg_err, shape_err, Error, Result};

pub type CMatrix = DMatrix<C64>;

/// Default max-norm tolerance for isometry checks.
pub const ISOMETRY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    /// Build a tensor, checking the data length and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return shape_err(format!("zero dimension in shape {shape:?}"));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return shape_err(format!("shape {shape:?} needs {len} entries, got {}", data.len()));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return arg_err(format!("non-finite entry at flat index {pos}"));
        }
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn scalar(value: C64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    pub fn from_real(shape: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// The `d x d` identity matrix.
    pub fn identity(d: usize) -> Self {
        let mut t = Self::zeros(vec![d, d]);
        for i in 0..d {
            t.data[i * d + i] = C64::new(1.0, 0.0);
        }
        t
    }

    /// Row-major copy of a matrix reshaped to `shape`.
    pub fn from_matrix(m: &CMatrix, shape: Vec<usize>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn get(&self, index: &[usize]) -> Result<C64> {
        if index.len() != self.rank() {
            return arg_err(format!("index of length {} for rank {}", index.len(), self.rank()));
        }
        let mut flat = 0;
        for (k, (&i, &d)) in index.iter().zip(&self.shape).enumerate() {
            if i >= d {
                return arg_err(format!("index {i} out of range {d} on axis {k}"));
            }
            flat = flat * d + i;
        }
        Ok(self.data[flat])
    }

    /// Reinterpret the data under a new shape with the same number of entries.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.len() || shape.contains(&0) {
            return shape_err(format!("cannot reshape {:?} into {shape:?}", self.shape));
        }
        Ok(Self { shape, data: self.data.clone() })
    }

    /// Reorder axes: axis `k` of the output is axis `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.rank())?;
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }
        let new_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let old_strides = self.strides();
        let src_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut data = Vec::with_capacity(self.len());
        let mut idx = vec![0usize; new_shape.len()];
        let mut offset = 0usize;
        for _ in 0..self.len() {
            data.push(self.data[offset]);
            for ax in (0..idx.len()).rev() {
                idx[ax] += 1;
                offset += src_strides[ax];
                if idx[ax] < new_shape[ax] {
                    break;
                }
                offset -= src_strides[ax] * new_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: new_shape, data })
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err(format!("shapes {:?} and {:?} differ", self.shape, other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { shape: self.shape.clone(), data })
    }

    /// Max entrywise modulus of `self - other`; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product `<self, other> = sum conj(self) * other`.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        if self.shape != other.shape {
            return shape_err(format!("shapes {:?} and {:?} differ", self.shape, other.shape));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    /// Matrix view with the split's out axes as rows and in axes as columns.
    pub fn to_matrix(&self, split: &IndexSplit) -> Result<CMatrix> {
        split.validate(self.rank())?;
        let perm: Vec<usize> = split.out_axes.iter().chain(&split.in_axes).copied().collect();
        let t = self.permute(&perm)?;
        let rows: usize = split.out_axes.iter().map(|&a| self.shape[a]).product();
        let cols: usize = split.in_axes.iter().map(|&a| self.shape[a]).product();
        Ok(CMatrix::from_row_slice(rows, cols, &t.data))
    }

    /// Inverse of [`DenseTensor::to_matrix`] for a tensor of this tensor's shape.
    pub fn with_matrix(&self, split: &IndexSplit, m: &CMatrix) -> Result<Self> {
        split.validate(self.rank())?;
        let perm: Vec<usize> = split.out_axes.iter().chain(&split.in_axes).copied().collect();
        let grouped_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let rows: usize = split.out_axes.iter().map(|&a| self.shape[a]).product();
        let cols: usize = split.in_axes.iter().map(|&a| self.shape[a]).product();
        if m.nrows() != rows || m.ncols() != cols {
            return shape_err(format!("matrix {}x{} does not fit grouped shape {rows}x{cols}", m.nrows(), m.ncols()));
        }
        let grouped = Self::from_matrix(m, grouped_shape)?;
        grouped.permute(&inverse_permutation(&perm))
    }

    /// Matrix view of a tensor whose leading `n_out` axes are rows.
    pub fn as_matrix(&self, n_out: usize) -> Result<CMatrix> {
        self.to_matrix(&IndexSplit::trailing(self.rank(), self.rank().saturating_sub(n_out))?)
    }
}

/// Partition of a tensor's axes into domain (`in_axes`) and codomain
/// (`out_axes`) indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSplit {
    pub in_axes: Vec<usize>,
    pub out_axes: Vec<usize>,
}

impl IndexSplit {
    pub fn new(in_axes: Vec<usize>, out_axes: Vec<usize>) -> Self {
        Self { in_axes, out_axes }
    }

    /// Leading `rank - n_in` axes are outputs, the last `n_in` are inputs.
    pub fn trailing(rank: usize, n_in: usize) -> Result<Self> {
        if n_in > rank {
            return arg_err(format!("{n_in} input axes on a rank-{rank} tensor"));
        }
        Ok(Self { out_axes: (0..rank - n_in).collect(), in_axes: (rank - n_in..rank).collect() })
    }

    pub fn validate(&self, rank: usize) -> Result<()> {
        let mut seen = vec![false; rank];
        for &a in self.in_axes.iter().chain(&self.out_axes) {
            if a >= rank {
                return arg_err(format!("axis {a} out of range for rank {rank}"));
            }
            if std::mem::replace(&mut seen[a], true) {
                return arg_err(format!("axis {a} appears twice in index split"));
            }
        }
        if seen.iter().any(|s| !s) {
            return arg_err(format!("index split does not cover all {rank} axes"));
        }
        Ok(())
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

fn check_permutation(perm: &[usize], rank: usize) -> Result<()> {
    if perm.len() != rank {
        return arg_err(format!("permutation of length {} for rank {rank}", perm.len()));
    }
    let mut seen = vec![false; rank];
    for &p in perm {
        if p >= rank || std::mem::replace(&mut seen[p], true) {
            return arg_err(format!("{perm:?} is not a permutation"));
        }
    }
    Ok(())
}

pub(crate) fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Row-major `(m x k) * (k x n)` product.
pub(crate) fn matmul(a: &[C64], b: &[C64], m: usize, k: usize, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == C64::new(0.0, 0.0) {
                continue;
            }
            for (o, &bpj) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bpj;
            }
        }
    }
    out
}

/// Apply matrix `m` to axis `axis` of a row-major tensor:
/// `out[.., i, ..] = sum_k m[i, k] * data[.., k, ..]`.
pub(crate) fn apply_on_axis(data: &[C64], shape: &[usize], axis: usize, m: &CMatrix) -> Vec<C64> {
    let d = shape[axis];
    debug_assert_eq!(m.ncols(), d);
    let rows = m.nrows();
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * d * inner..(o + 1) * d * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for i in 0..rows {
            let row = &mut dst[i * inner..(i + 1) * inner];
            for k in 0..d {
                let c = m[(i, k)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (r, &x) in row.iter_mut().zip(&src[k * inner..(k + 1) * inner]) {
                    *r += c * x;
                }
            }
        }
    }
    out
}

/// Contract `a` and `b` over the given `(axis of a, axis of b)` pairs.
///
/// The result carries the uncontracted axes of `a` in order followed by the
/// uncontracted axes of `b`. An empty pair list is the outer product.
pub fn contract(a: &DenseTensor, b: &DenseTensor, pairs: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(i, j) in pairs {
        if i >= a.rank() || j >= b.rank() {
            return arg_err(format!("pair ({i}, {j}) out of range for ranks {} and {}", a.rank(), b.rank()));
        }
        if std::mem::replace(&mut used_a[i], true) || std::mem::replace(&mut used_b[j], true) {
            return arg_err(format!("repeated axis in contraction pairs {pairs:?}"));
        }
        if a.shape[i] != b.shape[j] {
            return shape_err(format!(
                "axis {i} of a has dimension {} but axis {j} of b has {}",
                a.shape[i], b.shape[j]
            ));
        }
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&j| !used_b[j]).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
    let ap = a.permute(&perm_a)?;
    let bp = b.permute(&perm_b)?;

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = pairs.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&j| b.shape[j]).product();
    let data = matmul(&ap.data, &bp.data, m, k, n);

    let shape = free_a.iter().map(|&i| a.shape[i]).chain(free_b.iter().map(|&j| b.shape[j])).collect();
    Ok(DenseTensor::from_parts(shape, data))
}

/// Merge axis groups: output axis `k` has the product of the dimensions in
/// `groups[k]`. Groups that do not follow axis order permute the data first.
pub fn reshape_group(a: &DenseTensor, groups: &[Vec<usize>]) -> Result<DenseTensor> {
    let order: Vec<usize> = groups.iter().flatten().copied().collect();
    if order.len() != a.rank() || groups.iter().any(|g| g.is_empty() && a.rank() > 0) {
        return arg_err(format!("{groups:?} is not a partition of {} axes", a.rank()));
    }
    let permuted = a
        .permute(&order)
        .map_err(|_| Error::Argument(format!("{groups:?} is not a partition of {} axes", a.rank())))?;
    let shape = groups.iter().map(|g| g.iter().map(|&ax| a.shape[ax]).product()).collect();
    permuted.reshape(shape)
}

/// `max |M^dagger M - I|` for the split's matrix view.
pub fn isometry_violation(u: &DenseTensor, split: &IndexSplit) -> Result<f64> {
    let m = u.to_matrix(split)?;
    if m.ncols() > m.nrows() {
        return Err(Error::NoIsometry { in_dim: m.ncols(), out_dim: m.nrows() });
    }
    Ok(gram_violation(&m))
}

pub(crate) fn gram_violation(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Whether `u`, viewed as a map from its in axes to its out axes, satisfies
/// `M^dagger M = I` within `tol` in max norm.
///
/// Fails with [`Error::NoIsometry`] when the domain is larger than the
/// codomain, which is distinct from a plain `false`.
pub fn is_isometry(u: &DenseTensor, split: &IndexSplit, tol: f64) -> Result<bool> {
    Ok(isometry_violation(u, split)? <= tol)
}

/// Haar-random isometry `C^in_dim -> C^out_dim`, as an `out_dim x in_dim` tensor.
pub fn random_isometry<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<DenseTensor> {
    if in_dim == 0 || out_dim == 0 {
        return arg_err("isometry dimensions must be positive");
    }
    if in_dim > out_dim {
        return arg_err(format!("no isometry from dimension {in_dim} into {out_dim}"));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let gaussian = CMatrix::from_fn(out_dim, in_dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let q = polar_factor(&gaussian)?;
    DenseTensor::from_matrix(&q, vec![out_dim, in_dim])
}

/// Isometric polar factor `M (M^dagger M)^{-1/2} = U V^dagger` of a tall matrix.
pub(crate) fn polar_factor(m: &CMatrix) -> Result<CMatrix> {
    if m.ncols() > m.nrows() {
        return Err(Error::NoIsometry { in_dim: m.ncols(), out_dim: m.nrows() });
    }
    let svd = m.clone().svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0f64, f64::max);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = f64::EPSILON * (m.nrows().max(m.ncols()) as f64) * largest.max(f64::MIN_POSITIVE);
    if !(smallest > floor) {
        return Err(Error::Singular { smallest });
    }
    let u = svd.u.expect("requested left singular vectors");
    let v_t = svd.v_t.expect("requested right singular vectors");
    Ok(u * v_t)
}

/// Nearest isometry in Frobenius norm, returned in the input's shape and
/// axis order.
pub fn project_to_isometry(u: &DenseTensor, split: &IndexSplit) -> Result<DenseTensor> {
    let m = u.to_matrix(split)?;
    let q = polar_factor(&m)?;
    u.with_matrix(split, &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha20Rng) -> DenseTensor {
        let len = shape.iter().product();
        let data = (0..len).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        DenseTensor::new(shape, data).unwrap()
    }

    #[test]
    fn identity_applied_to_vector() {
        let v = DenseTensor::from_real(vec![2], &[3.0, 4.0]).unwrap();
        let out = contract(&DenseTensor::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert_eq!(out.data(), &[c(3.0, 0.0), c(4.0, 0.0)]);
    }

    #[test]
    fn scalar_outer_product() {
        let out = contract(&DenseTensor::scalar(c(2.0, 0.0)), &DenseTensor::scalar(c(3.0, 0.0)), &[]).unwrap();
        assert!(out.shape().is_empty());
        assert_eq!(out.data(), &[c(6.0, 0.0)]);
    }

    #[test]
    fn contraction_matches_nested_loops() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let a = random_tensor(vec![2, 3, 2], &mut rng);
        let b = random_tensor(vec![3, 2], &mut rng);
        let out = contract(&a, &b, &[(1, 0), (2, 1)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        for i in 0..2 {
            let mut expected = c(0.0, 0.0);
            for j in 0..3 {
                for k in 0..2 {
                    expected += a.get(&[i, j, k]).unwrap() * b.get(&[j, k]).unwrap();
                }
            }
            assert!((out.get(&[i]).unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn contraction_errors() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 2]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Shape(_))));
        assert!(matches!(contract(&a, &b, &[(0, 0), (0, 1)]), Err(Error::Argument(_))));
    }

    #[test]
    fn reshape_group_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = random_tensor(vec![2, 3, 4], &mut rng);
        let g = reshape_group(&a, &[vec![0], vec![1, 2]]).unwrap();
        assert_eq!(g.shape(), &[2, 12]);
        assert_eq!(g.data(), a.data());

        let v = random_tensor(vec![5], &mut rng);
        assert_eq!(reshape_group(&v, &[vec![0]]).unwrap(), v);

        assert!(reshape_group(&a, &[vec![0], vec![1]]).is_err());
        assert!(reshape_group(&a, &[vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn reshape_group_reorders_when_groups_permute() {
        let a = DenseTensor::from_real(vec![2, 3], &[0., 1., 2., 3., 4., 5.]).unwrap();
        let t = reshape_group(&a, &[vec![1], vec![0]]).unwrap();
        assert_eq!(t.shape(), &[3, 2]);
        assert_eq!(t.get(&[2, 1]).unwrap(), c(5.0, 0.0));
        assert_eq!(t.get(&[1, 0]).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn isometry_examples() {
        let split = IndexSplit::trailing(2, 1).unwrap();
        assert!(is_isometry(&DenseTensor::identity(3), &split, 1e-10).unwrap());

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let state = DenseTensor::new(vec![2, 1], vec![c(h, 0.0), c(0.0, h)]).unwrap();
        assert!(is_isometry(&state, &split, 1e-10).unwrap());

        let wide = DenseTensor::zeros(vec![2, 3]);
        assert!(matches!(is_isometry(&wide, &split, 1e-10), Err(Error::NoIsometry { in_dim: 3, out_dim: 2 })));
    }

    #[test]
    fn gaussian_is_not_isometric_until_projected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let split = IndexSplit::trailing(2, 1).unwrap();
        let g = random_tensor(vec![4, 2], &mut rng);
        assert!(!is_isometry(&g, &split, 1e-6).unwrap());
        let p = project_to_isometry(&g, &split).unwrap();
        assert!(is_isometry(&p, &split, 1e-10).unwrap());
    }

    #[test]
    fn random_isometry_examples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let z = random_isometry(1, 1, &mut rng).unwrap();
        assert!((z.data()[0].norm() - 1.0).abs() < 1e-12);

        let mut rng7 = ChaCha20Rng::seed_from_u64(7);
        let u = random_isometry(2, 4, &mut rng7).unwrap();
        assert_eq!(u.shape(), &[4, 2]);
        assert!(is_isometry(&u, &IndexSplit::trailing(2, 1).unwrap(), 1e-12).unwrap());

        let mut rng8 = ChaCha20Rng::seed_from_u64(8);
        let v = random_isometry(2, 4, &mut rng8).unwrap();
        assert!(u.max_abs_diff(&v) > 1e-3);

        assert!(random_isometry(3, 2, &mut rng).is_err());
    }

    #[test]
    fn projection_fixed_point_and_scaling() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let split = IndexSplit::trailing(2, 1).unwrap();
        let u = random_isometry(2, 5, &mut rng).unwrap();
        assert!(project_to_isometry(&u, &split).unwrap().max_abs_diff(&u) < 1e-12);

        let two_i = DenseTensor::identity(3).scale(c(2.0, 0.0));
        assert!(project_to_isometry(&two_i, &split).unwrap().max_abs_diff(&DenseTensor::identity(3)) < 1e-12);
    }

    #[test]
    fn projection_rejects_rank_deficiency() {
        let split = IndexSplit::trailing(2, 1).unwrap();
        let m = DenseTensor::from_real(vec![3, 2], &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
        match project_to_isometry(&m, &split) {
            Err(Error::Singular { smallest }) => assert!(smallest < 1e-10),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    // Perturbing the polar factor along any one-parameter isometric curve
    // must not bring it closer to the input.
    #[test]
    fn projection_is_locally_nearest() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let split = IndexSplit::trailing(2, 1).unwrap();
        let g = random_tensor(vec![4, 2], &mut rng);
        let p = project_to_isometry(&g, &split).unwrap();
        let base = p.sub(&g).unwrap().frobenius_norm();
        for _ in 0..20 {
            let dir = random_tensor(vec![4, 2], &mut rng);
            for &t in &[1e-1, 1e-2, 1e-3, -1e-3, -1e-2, -1e-1] {
                let moved = project_to_isometry(&p.add(&dir.scale(c(t, 0.0))).unwrap(), &split).unwrap();
                let d = moved.sub(&g).unwrap().frobenius_norm();
                assert!(d >= base - 1e-12, "t={t}: {d} < {base}");
            }
        }
    }

    #[test]
    fn with_matrix_inverts_to_matrix() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let a = random_tensor(vec![2, 3, 2], &mut rng);
        let split = IndexSplit::new(vec![1], vec![2, 0]);
        let m = a.to_matrix(&split).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (4, 3));
        assert_eq!(a.with_matrix(&split, &m).unwrap(), a);
    }

    #[test]
    fn new_rejects_bad_data() {
        assert!(DenseTensor::new(vec![2], vec![c(1.0, 0.0)]).is_err());
        assert!(DenseTensor::new(vec![1], vec![c(f64::NAN, 0.0)]).is_err());
        assert!(DenseTensor::new(vec![], vec![c(1.0, 0.0)]).is_ok());
    }
}
