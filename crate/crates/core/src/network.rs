//! Tensor networks decorated with isometries: evaluation, states,
//! amplitudes, layer maps and the renormalization flow of operators.
//!
//! Vertex `v` carries a tensor whose axes are the dimensions of
//! `quiver.outgoing(v)` followed by those of `quiver.incoming(v)`, each group
//! in ascending edge id. Its row-major data is therefore the matrix of the
//! map from incoming to outgoing spaces.

use std::sync::Arc;

use rand::Rng;

use crate::error::{arg_err, shape_err, Error, Result};
use crate::graph::{topological_layers, EdgeId, EdgeKind, Layering, Quiver, VertexId};
use crate::tensor::{contract, isometry_violation, random_isometry, CMatrix, DenseTensor, IndexSplit, ISOMETRY_TOL};
use crate::C64;

/// One symbol index per observable, in canonical out-edge order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SequenceState {
    pub symbols: Vec<usize>,
}

impl SequenceState {
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl From<Vec<usize>> for SequenceState {
    fn from(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }
}

/// Default edge dimensions: in edges get 1, observables get `w`, and an
/// internal edge at depth `k` gets `min(caps[k-1], w^span)`. The last cap
/// repeats for deeper edges, so a single cap is uniform.
pub fn default_edge_dims(q: &Quiver, w: usize, caps: &[usize]) -> Result<Vec<usize>> {
    if w == 0 {
        return arg_err("alphabet size must be positive");
    }
    if caps.is_empty() || caps.contains(&0) {
        return arg_err("bond dimension caps must be a nonempty list of positive integers");
    }
    Ok((0..q.n_edges())
        .map(|e| match q.edge(e).kind {
            EdgeKind::In => 1,
            EdgeKind::Out => w,
            EdgeKind::Internal => {
                let depth = q.edge_depth(e).max(1);
                let cap = caps[(depth - 1).min(caps.len() - 1)];
                let full = u32::try_from(q.edge_span(e)).ok().and_then(|s| w.checked_pow(s)).unwrap_or(usize::MAX);
                cap.min(full)
            }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct TensorNetwork {
    quiver: Arc<Quiver>,
    dims: Arc<Vec<usize>>,
    tensors: Vec<DenseTensor>,
    tol: f64,
}

impl PartialEq for TensorNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.quiver == other.quiver && self.dims == other.dims && self.tensors == other.tensors
    }
}

impl TensorNetwork {
    /// Validated network with the default isometry tolerance.
    pub fn new(quiver: Quiver, dims: Vec<usize>, tensors: Vec<DenseTensor>) -> Result<Self> {
        Self::with_tolerance(Arc::new(quiver), Arc::new(dims), tensors, ISOMETRY_TOL)
    }

    pub fn with_tolerance(
        quiver: Arc<Quiver>,
        dims: Arc<Vec<usize>>,
        tensors: Vec<DenseTensor>,
        tol: f64,
    ) -> Result<Self> {
        check_dims(&quiver, &dims)?;
        if tensors.len() != quiver.n_vertices() {
            return shape_err(format!("{} tensors for {} vertices", tensors.len(), quiver.n_vertices()));
        }
        let net = Self { quiver, dims, tensors, tol };
        for v in 0..net.quiver.n_vertices() {
            let expected = net.vertex_shape(v);
            if net.tensors[v].shape() != expected.as_slice() {
                return shape_err(format!(
                    "vertex {v} tensor has shape {:?}, incident edges need {expected:?}",
                    net.tensors[v].shape()
                ));
            }
            let violation = isometry_violation(&net.tensors[v], &net.vertex_split(v))?;
            if violation > tol {
                return arg_err(format!("vertex {v} violates isometry by {violation:e} (tolerance {tol:e})"));
            }
        }
        Ok(net)
    }

    /// Haar-random isometry at every vertex.
    pub fn random<R: Rng + ?Sized>(quiver: Quiver, dims: Vec<usize>, rng: &mut R) -> Result<Self> {
        check_dims(&quiver, &dims)?;
        let quiver = Arc::new(quiver);
        let dims = Arc::new(dims);
        let mut tensors = Vec::with_capacity(quiver.n_vertices());
        for v in 0..quiver.n_vertices() {
            let (out_dim, in_dim) = vertex_io_dims(&quiver, &dims, v);
            let m = random_isometry(in_dim, out_dim, rng)?;
            tensors.push(m.reshape(shape_of(&quiver, &dims, v))?);
        }
        Self::with_tolerance(quiver, dims, tensors, ISOMETRY_TOL)
    }

    /// Same topology and dimensions, new vertex tensors (validated).
    pub fn with_tensors(&self, tensors: Vec<DenseTensor>) -> Result<Self> {
        Self::with_tolerance(self.quiver.clone(), self.dims.clone(), tensors, self.tol)
    }

    pub(crate) fn with_tensors_unchecked(&self, tensors: Vec<DenseTensor>) -> Self {
        Self { quiver: self.quiver.clone(), dims: self.dims.clone(), tensors, tol: self.tol }
    }

    pub fn quiver(&self) -> &Quiver {
        &self.quiver
    }

    pub fn shared_quiver(&self) -> Arc<Quiver> {
        self.quiver.clone()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn edge_dim(&self, e: EdgeId) -> usize {
        self.dims[e]
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub fn tensor(&self, v: VertexId) -> &DenseTensor {
        &self.tensors[v]
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn set_tolerance(&mut self, tol: f64) {
        self.tol = tol;
    }

    pub fn n_positions(&self) -> usize {
        self.quiver.n_positions()
    }

    /// Alphabet size at each position.
    pub fn position_dims(&self) -> Vec<usize> {
        self.quiver.out_edges().iter().map(|&e| self.dims[e]).collect()
    }

    pub fn vertex_shape(&self, v: VertexId) -> Vec<usize> {
        shape_of(&self.quiver, &self.dims, v)
    }

    pub fn vertex_split(&self, v: VertexId) -> IndexSplit {
        let n_out = self.quiver.outgoing(v).len();
        let n_in = self.quiver.incoming(v).len();
        IndexSplit::new((n_out..n_out + n_in).collect(), (0..n_out).collect())
    }

    /// `(prod outgoing dims) x (prod incoming dims)` matrix of vertex `v`.
    pub fn vertex_matrix(&self, v: VertexId) -> CMatrix {
        let (rows, cols) = vertex_io_dims(&self.quiver, &self.dims, v);
        CMatrix::from_row_slice(rows, cols, self.tensors[v].data())
    }

    /// Largest `|U^dagger U - I|` entry over all vertices.
    pub fn max_isometry_violation(&self) -> f64 {
        (0..self.quiver.n_vertices())
            .map(|v| isometry_violation(&self.tensors[v], &self.vertex_split(v)).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    /// Real dimension of the product of Stiefel manifolds the vertex
    /// tensors live on: `sum_v (2 * in * out - in^2)`.
    pub fn stiefel_real_dimension(&self) -> usize {
        (0..self.quiver.n_vertices())
            .map(|v| {
                let (out_dim, in_dim) = vertex_io_dims(&self.quiver, &self.dims, v);
                2 * in_dim * out_dim - in_dim * in_dim
            })
            .sum()
    }

    /// A pure-state model: a single in edge of dimension 1.
    pub fn check_state_model(&self) -> Result<()> {
        let ins = self.quiver.in_edges();
        if ins.len() != 1 || self.dims[ins[0]] != 1 {
            let dims: Vec<_> = ins.iter().map(|&e| self.dims[e]).collect();
            return Err(Error::Precondition(format!(
                "a state needs exactly one in edge of dimension 1, found dimensions {dims:?}"
            )));
        }
        Ok(())
    }

    pub fn check_sequence(&self, s: &SequenceState) -> Result<()> {
        let dims = self.position_dims();
        if s.len() != dims.len() {
            return arg_err(format!("sequence of length {} for {} positions", s.len(), dims.len()));
        }
        for (k, (&sym, &d)) in s.symbols.iter().zip(&dims).enumerate() {
            if sym >= d {
                return arg_err(format!("symbol {sym} at position {k} outside alphabet of size {d}"));
            }
        }
        Ok(())
    }
}

fn check_dims(q: &Quiver, dims: &[usize]) -> Result<()> {
    if dims.len() != q.n_edges() {
        return shape_err(format!("{} edge dimensions for {} edges", dims.len(), q.n_edges()));
    }
    if let Some(e) = dims.iter().position(|&d| d == 0) {
        return shape_err(format!("edge {e} has dimension 0"));
    }
    for v in 0..q.n_vertices() {
        let (out_dim, in_dim) = vertex_io_dims(q, dims, v);
        if in_dim > out_dim {
            return Err(Error::NoIsometry { in_dim, out_dim });
        }
    }
    Ok(())
}

fn shape_of(q: &Quiver, dims: &[usize], v: VertexId) -> Vec<usize> {
    q.outgoing(v).iter().chain(q.incoming(v)).map(|&e| dims[e]).collect()
}

fn vertex_io_dims(q: &Quiver, dims: &[usize], v: VertexId) -> (usize, usize) {
    let out_dim = q.outgoing(v).iter().map(|&e| dims[e]).product();
    let in_dim = q.incoming(v).iter().map(|&e| dims[e]).product();
    (out_dim, in_dim)
}

/// A tensor whose axes are tagged with edge ids.
#[derive(Clone, Debug)]
pub(crate) struct Labeled {
    pub tensor: DenseTensor,
    pub labels: Vec<EdgeId>,
}

impl Labeled {
    pub fn unit() -> Self {
        Self { tensor: DenseTensor::scalar(C64::new(1.0, 0.0)), labels: Vec::new() }
    }

    /// Contract every label the two operands share; outer product otherwise.
    pub fn join(&self, other: &Labeled) -> Result<Labeled> {
        let pairs: Vec<(usize, usize)> = self
            .labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| other.labels.iter().position(|m| m == l).map(|j| (i, j)))
            .collect();
        let tensor = contract(&self.tensor, &other.tensor, &pairs)?;
        let labels = self
            .labels
            .iter()
            .filter(|l| !other.labels.contains(l))
            .chain(other.labels.iter().filter(|l| !self.labels.contains(l)))
            .copied()
            .collect();
        Ok(Labeled { tensor, labels })
    }

    /// Reorder axes to follow `order`, which must be a permutation of the labels.
    pub fn arranged(&self, order: &[EdgeId]) -> Result<DenseTensor> {
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.labels.iter().position(|m| m == l))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Shape(format!("labels {:?} cannot be arranged as {order:?}", self.labels)))?;
        if perm.len() != self.labels.len() {
            return shape_err(format!("labels {:?} cannot be arranged as {order:?}", self.labels));
        }
        self.tensor.permute(&perm)
    }
}

pub(crate) fn vertex_labeled(net: &TensorNetwork, v: VertexId) -> Labeled {
    let q = net.quiver();
    Labeled { tensor: net.tensors[v].clone(), labels: q.outgoing(v).iter().chain(q.incoming(v)).copied().collect() }
}

/// Full evaluation of the network as a map from the in spaces to the out
/// spaces. Axes: out edges ascending, then in edges ascending.
pub fn evaluate(net: &TensorNetwork) -> Result<DenseTensor> {
    let q = net.quiver();
    let layering = topological_layers(q)?;
    let mut acc = Labeled::unit();
    for &v in layering.layers.iter().flatten() {
        acc = acc.join(&vertex_labeled(net, v))?;
    }
    let order: Vec<EdgeId> = q.out_edges().iter().chain(q.in_edges()).copied().collect();
    acc.arranged(&order)
}

/// The state `Psi = u_gamma 1` as a rank-`n` tensor over the observables.
pub fn state(net: &TensorNetwork) -> Result<DenseTensor> {
    net.check_state_model()?;
    let full = evaluate(net)?;
    full.reshape(net.position_dims())
}

/// `<s|Psi>`. Trees use leaf-to-root message passing; other graphs contract
/// the full state.
pub fn amplitude(net: &TensorNetwork, s: &SequenceState) -> Result<C64> {
    net.check_state_model()?;
    net.check_sequence(s)?;
    if net.quiver().is_tree() {
        Ok(tree_messages(net, s).amplitude)
    } else {
        state(net)?.get(&s.symbols)
    }
}

/// Upward messages of a tree: `up[e]` is the pull-back of `<s|` onto edge `e`.
pub(crate) struct TreeMessages {
    pub up: Vec<Vec<C64>>,
    pub amplitude: C64,
}

pub(crate) fn tree_messages(net: &TensorNetwork, s: &SequenceState) -> TreeMessages {
    let q = net.quiver();
    let mut up: Vec<Vec<C64>> = vec![Vec::new(); q.n_edges()];
    for (k, &e) in q.out_edges().iter().enumerate() {
        let mut basis = vec![C64::new(0.0, 0.0); net.dims[e]];
        basis[s.symbols[k]] = C64::new(1.0, 0.0);
        up[e] = basis;
    }
    // Heap/construction order puts parents before children for trees built
    // here, but custom trees need a real topological order.
    let layering = topological_layers(q).expect("validated quiver");
    for &v in layering.layers.iter().flatten().collect::<Vec<_>>().iter().rev() {
        let outs = q.outgoing(*v);
        let vectors: Vec<&[C64]> = outs.iter().map(|&e| up[e].as_slice()).collect();
        let msg = absorb_leading(net.tensors[*v].data(), &net.vertex_shape(*v), &vectors);
        up[q.incoming(*v)[0]] = msg;
    }
    let root_in = q.in_edges()[0];
    let amplitude = up[root_in][0];
    TreeMessages { up, amplitude }
}

/// Contract the leading axes of a row-major tensor with the given vectors,
/// one per axis, returning the remaining trailing data.
pub(crate) fn absorb_leading(data: &[C64], shape: &[usize], vectors: &[&[C64]]) -> Vec<C64> {
    let mut current = data.to_vec();
    for (k, vec) in vectors.iter().enumerate() {
        let d = shape[k];
        debug_assert_eq!(vec.len(), d);
        let rest = current.len() / d;
        let mut next = vec![C64::new(0.0, 0.0); rest];
        for (i, &c) in vec.iter().enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            for (n, &x) in next.iter_mut().zip(&current[i * rest..(i + 1) * rest]) {
                *n += c * x;
            }
        }
        current = next;
    }
    current
}

/// Edges crossing the cut above layer `l` (`0..=L`): sources in a layer
/// higher than `l` (in edges count as layer `L + 1`), targets at or below
/// `l` (out edges count as layer 0). Ascending id. `cut(L)` is the in
/// boundary and `cut(0)` the out boundary.
pub fn cut_edges(q: &Quiver, layering: &Layering, l: usize) -> Result<Vec<EdgeId>> {
    let n_layers = layering.num_layers();
    if l > n_layers {
        return arg_err(format!("cut {l} outside 0..={n_layers}"));
    }
    let numbers = layering.layer_numbers(q.n_vertices());
    Ok((0..q.n_edges())
        .filter(|&e| {
            let edge = q.edge(e);
            let src = edge.source.map_or(n_layers + 1, |v| numbers[v]);
            let tgt = edge.target.map_or(0, |v| numbers[v]);
            src > l && tgt <= l
        })
        .collect())
}

/// Map of layer `l`: the tensor product of its vertex maps and identities on
/// edges passing through, from `cut(l)` to `cut(l - 1)`. Axes are the output
/// cut edges followed by the input cut edges, each ascending.
pub fn layer_map(net: &TensorNetwork, layering: &Layering, l: usize) -> Result<DenseTensor> {
    let q = net.quiver();
    let vertices = layering.layer(l)?;
    let cut_in = cut_edges(q, layering, l)?;
    let cut_out = cut_edges(q, layering, l - 1)?;

    // Output-side labels are edge ids; input-side labels are offset so that
    // a pass-through edge can appear on both sides.
    let offset = q.n_edges();
    let mut acc = Labeled::unit();
    for &v in vertices {
        let labels = q.outgoing(v).iter().copied().chain(q.incoming(v).iter().map(|&e| e + offset)).collect();
        acc = acc.join(&Labeled { tensor: net.tensors[v].clone(), labels })?;
    }
    for &e in cut_in.iter().filter(|e| cut_out.contains(e)) {
        acc = acc.join(&Labeled { tensor: DenseTensor::identity(net.dims[e]), labels: vec![e, e + offset] })?;
    }
    let order: Vec<EdgeId> = cut_out.iter().copied().chain(cut_in.iter().map(|&e| e + offset)).collect();
    acc.arranged(&order)
}

fn cut_dim(net: &TensorNetwork, cut: &[EdgeId]) -> usize {
    cut.iter().map(|&e| net.dims[e]).product()
}

fn layer_matrix(net: &TensorNetwork, layering: &Layering, l: usize) -> Result<CMatrix> {
    let q = net.quiver();
    let rows = cut_dim(net, &cut_edges(q, layering, l - 1)?);
    let cols = cut_dim(net, &cut_edges(q, layering, l)?);
    Ok(CMatrix::from_row_slice(rows, cols, layer_map(net, layering, l)?.data()))
}

/// Composition `M_1 M_2 ... M_{l-1}`: the map from `cut(l - 1)` down to the
/// observables. Identity for `l = 1`.
fn descent_matrix(net: &TensorNetwork, layering: &Layering, l: usize) -> Result<CMatrix> {
    let q = net.quiver();
    let base = cut_dim(net, q.out_edges());
    let mut c = CMatrix::identity(base, base);
    for k in 1..l {
        c *= layer_matrix(net, layering, k)?;
    }
    Ok(c)
}

/// The intermediate state on `cut(l - 1)`, the output space of layer `l`:
/// `M_l M_{l+1} ... M_L 1`. For `l = 1` this is `Psi`.
pub fn layer_state(net: &TensorNetwork, layering: &Layering, l: usize) -> Result<Vec<C64>> {
    net.check_state_model()?;
    let n_layers = layering.num_layers();
    if l == 0 || l > n_layers {
        return arg_err(format!("layer {l} outside 1..={n_layers}"));
    }
    let mut psi = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for k in (l..=n_layers).rev() {
        psi = layer_matrix(net, layering, k)? * psi;
    }
    Ok(psi.iter().copied().collect())
}

/// Pull an operator on the observables back to the output space of layer
/// `l`: `o_l = c^dagger op c` with `c = M_1 ... M_{l-1}`.
///
/// `op` may be given as a `D x D` matrix or with factored shape
/// `[out dims.., out dims..]`; the result has shape `[cut dims.., cut dims..]`
/// for `cut = cut(l - 1)`.
pub fn operator_flow(net: &TensorNetwork, layering: &Layering, op: &DenseTensor, l: usize) -> Result<DenseTensor> {
    let q = net.quiver();
    let n_layers = layering.num_layers();
    if l == 0 || l > n_layers {
        return arg_err(format!("layer {l} outside 1..={n_layers}"));
    }
    let base_dims: Vec<usize> = q.out_edges().iter().map(|&e| net.dims[e]).collect();
    let d: usize = base_dims.iter().product();
    let factored: Vec<usize> = base_dims.iter().chain(&base_dims).copied().collect();
    if op.shape() != [d, d] && op.shape() != factored.as_slice() {
        return shape_err(format!("operator of shape {:?} does not act on the {d}-dimensional out space", op.shape()));
    }
    let op_m = CMatrix::from_row_slice(d, d, op.data());
    let c = descent_matrix(net, layering, l)?;
    let flowed = c.adjoint() * op_m * &c;
    let cut = cut_edges(q, layering, l - 1)?;
    let cut_dims: Vec<usize> = cut.iter().map(|&e| net.dims[e]).collect();
    let shape = cut_dims.iter().chain(&cut_dims).copied().collect();
    DenseTensor::from_matrix(&flowed, shape)
}

/// `<psi| o |psi>` for an operator with factored or matrix shape.
pub fn expectation(psi: &[C64], op: &DenseTensor) -> Result<C64> {
    let d = psi.len();
    if op.len() != d * d {
        return shape_err(format!("operator with {} entries on a {d}-dimensional state", op.len()));
    }
    let m = CMatrix::from_row_slice(d, d, op.data());
    let v = nalgebra::DVector::from_column_slice(psi);
    Ok((v.adjoint() * m * v)[(0, 0)])
}

/// All sequences over the given alphabet sizes, in lexicographic order.
pub fn enumerate_sequences(dims: &[usize]) -> Vec<SequenceState> {
    let total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; dims.len()];
    for _ in 0..total {
        out.push(SequenceState::new(cur.clone()));
        for k in (0..dims.len()).rev() {
            cur[k] += 1;
            if cur[k] < dims[k] {
                break;
            }
            cur[k] = 0;
        }
    }
    out
}
