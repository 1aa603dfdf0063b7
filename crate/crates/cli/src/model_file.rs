//! Single-file model format.
//!
//! Layout:
//!
//! | bytes | content |
//! |-------|---------|
//! | 16    | magic `\x89ISOTN-MODEL\r\n\x1a\n` |
//! | 8     | header length `h`, u64 little-endian |
//! | h     | header, UTF-8 JSON |
//! | ...   | tensors of vertices `0, 1, ..` in row-major order; each entry is re then im, f64 little-endian |
//! | 8     | first 8 bytes of the SHA-256 of the tensor section, as a u64 little-endian |
//!
//! The header carries everything needed to rebuild the graph, the edge
//! dimensions, the alphabet and the seed. Tensor shapes follow from the
//! graph: outgoing edges by id, then incoming edges by id.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use isotn::corpus::{escape_token, unescape_token, Scheme};
use isotn::graph::{Edge, EdgeKind, GraphKind};
use isotn::model::SymbolSet;
use isotn::{DenseTensor, Quiver, TensorNetwork, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 16] = b"\x89ISOTN-MODEL\r\n\x1a\n";
pub const FORMAT_VERSION: u32 = 1;

/// A network together with the data needed to read and write text.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub net: TensorNetwork,
    pub symbols: SymbolSet,
    pub scheme: Scheme,
    /// Where the alphabet was read from, if anywhere.
    pub vocab_source: Option<String>,
    pub seed: u64,
    pub training: Option<TrainingInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub bond_dims: Vec<usize>,
    pub data_source: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    graph: GraphHeader,
    symbols: SymbolHeader,
    prng: PrngHeader,
    training: Option<TrainingInfo>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphHeader {
    kind: String,
    n_positions: usize,
    vertices: Vec<VertexRow>,
    edges: Vec<EdgeRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRow {
    id: usize,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRow {
    id: usize,
    kind: String,
    source: Option<usize>,
    target: Option<usize>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolHeader {
    scheme: String,
    source: Option<String>,
    /// Escaped tokens; the out-of-vocabulary entry is `null`.
    tokens: Vec<Option<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrngHeader {
    algorithm: String,
    seed: u64,
}

fn kind_name(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::Internal => "internal",
        EdgeKind::In => "in",
        EdgeKind::Out => "out",
    }
}

fn parse_kind(s: &str) -> Result<EdgeKind> {
    Ok(match s {
        "internal" => EdgeKind::Internal,
        "in" => EdgeKind::In,
        "out" => EdgeKind::Out,
        other => bail!("unknown edge kind {other:?}"),
    })
}

fn checksum(body: &[u8]) -> u64 {
    let digest = Sha256::digest(body);
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let net = &model.net;
    let q = net.quiver();
    let header = Header {
        format_version: FORMAT_VERSION,
        graph: GraphHeader {
            kind: q.kind().name().to_string(),
            n_positions: q.n_positions(),
            vertices: (0..q.n_vertices()).map(|v| VertexRow { id: v, shape: net.vertex_shape(v) }).collect(),
            edges: q
                .edges()
                .iter()
                .enumerate()
                .map(|(id, e)| EdgeRow {
                    id,
                    kind: kind_name(e.kind).to_string(),
                    source: e.source,
                    target: e.target,
                    dim: net.edge_dim(id),
                })
                .collect(),
        },
        symbols: SymbolHeader {
            scheme: model.scheme.name().to_string(),
            source: model.vocab_source.clone(),
            tokens: model
                .symbols
                .tokens()
                .iter()
                .enumerate()
                .map(|(k, t)| (Some(k) != model.symbols.oov()).then(|| escape_token(t)))
                .collect(),
        },
        prng: PrngHeader { algorithm: isotn::rng::ALGORITHM.to_string(), seed: model.seed },
        training: model.training.clone(),
    };
    let head = serde_json::to_vec_pretty(&header)?;
    let mut body = Vec::new();
    for t in net.tensors() {
        for z in t.data() {
            body.extend_from_slice(&z.re.to_le_bytes());
            body.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(16 + 8 + head.len() + body.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(head.len() as u64).to_le_bytes());
    out.extend_from_slice(&head);
    out.extend_from_slice(&body);
    out.extend_from_slice(&checksum(&body).to_le_bytes());
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    ensure!(bytes.len() >= 32 && &bytes[..16] == MAGIC, "not a model file (bad magic)");
    let head_len = u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")) as usize;
    ensure!(bytes.len() >= 24 + head_len + 8, "model file truncated inside the header");
    let header: Header = serde_json::from_slice(&bytes[24..24 + head_len]).context("malformed model header")?;
    ensure!(
        header.format_version == FORMAT_VERSION,
        "unsupported model format version {} (expected {FORMAT_VERSION})",
        header.format_version
    );
    ensure!(
        header.prng.algorithm == isotn::rng::ALGORITHM,
        "model was produced with PRNG {:?}, this build uses {}",
        header.prng.algorithm,
        isotn::rng::ALGORITHM
    );

    let g = &header.graph;
    let mut edges = Vec::with_capacity(g.edges.len());
    let mut dims = Vec::with_capacity(g.edges.len());
    for (k, row) in g.edges.iter().enumerate() {
        ensure!(row.id == k, "edge table out of order at row {k}");
        edges.push(Edge { kind: parse_kind(&row.kind)?, source: row.source, target: row.target });
        dims.push(row.dim);
    }
    for (k, row) in g.vertices.iter().enumerate() {
        ensure!(row.id == k, "vertex table out of order at row {k}");
    }
    // Built-in kinds are rebuilt by their constructor, which also restores
    // the edge geometry used for default dimensions.
    let kind = GraphKind::parse(&g.kind)?;
    let quiver = if kind == GraphKind::Custom {
        Quiver::from_parts(kind, g.vertices.len(), edges)?
    } else {
        let built = isotn::graph::build(kind, g.n_positions)?;
        ensure!(
            built.edges() == edges.as_slice() && built.n_vertices() == g.vertices.len(),
            "edge table does not match a {} graph with {} positions",
            g.kind,
            g.n_positions
        );
        built
    };
    ensure!(quiver.n_positions() == g.n_positions, "header position count disagrees with the edge table");

    let body = &bytes[24 + head_len..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().expect("8 bytes"));
    ensure!(checksum(body) == stored, "model checksum mismatch (file truncated or corrupted)");
    let mut offset = 0;
    let mut tensors = Vec::with_capacity(g.vertices.len());
    for row in &g.vertices {
        let len: usize = row.shape.iter().product();
        ensure!(body.len() >= offset + 16 * len, "tensor section too short for vertex {}", row.id);
        let data = body[offset..offset + 16 * len]
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        offset += 16 * len;
        tensors.push(DenseTensor::new(row.shape.clone(), data)?);
    }
    ensure!(offset == body.len(), "{} trailing bytes after the tensor section", body.len() - offset);
    let net = TensorNetwork::new(quiver, dims, tensors)?;

    let mut oov = None;
    let mut tokens = Vec::with_capacity(header.symbols.tokens.len());
    for (k, t) in header.symbols.tokens.iter().enumerate() {
        match t {
            Some(s) => tokens.push(unescape_token(s).map_err(|e| anyhow::anyhow!("symbol {k}: {e}"))?),
            None => {
                ensure!(oov.is_none(), "more than one out-of-vocabulary symbol");
                oov = Some(k);
                tokens.push(Vec::new());
            }
        }
    }
    let symbols = SymbolSet::new(tokens, oov)?;
    Ok(Model {
        net,
        symbols,
        scheme: Scheme::parse(&header.symbols.scheme)?,
        vocab_source: header.symbols.source,
        seed: header.prng.seed,
        training: header.training,
    })
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    let bytes = encode(model)?;
    std::fs::write(path, bytes).with_context(|| format!("cannot write model file {}", path.display()))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read model file {}", path.display()))?;
    decode(&bytes).with_context(|| format!("invalid model file {}", path.display()))
}
