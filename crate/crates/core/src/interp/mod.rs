//! Reference execution over concrete sparse tensors.
//!
//! Tensors are level trees: each storage level is either an uncompressed
//! array (absent children read as zero), a compressed sorted coordinate
//! list, or an unordered coordinate map; leaves hold integer values. The
//! executor in [`run`] walks a program over such trees, recording every
//! coiteration step and every executed assignment — the empirical oracle
//! against which the cost model's derived sets are checked, and the
//! semantics oracle for the scheduler ([`eval_dense`] provides the
//! protocol-blind referent).
//!
//! Computed tensors may store explicit zeros: occupancy tracks *written*
//! coordinates, which is exactly the may-be-nonzero state the cost model
//! reasons about. Input tensors built by [`gen_uniform`] or read from text
//! never store zeros.

mod run;

pub use run::{eval_dense, run, RunError, TaskTrace};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cinp::{LevelFormat, TensorDecl};
use crate::queries::Relation;

/// Stored numeric values. Integer so every oracle comparison is exact.
pub type Value = i64;

/// One level-tree node. The level's format decides which node kind holds
/// its children; leaves sit below the innermost level (a rank-0 tensor is a
/// bare leaf).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// Dense level: children keyed by coordinate, absent children are zero
    /// subtrees (stored sparsely, read densely).
    Uncompressed(BTreeMap<u32, Node>),
    /// Sorted coordinate list; appends must keep it sorted.
    Compressed(Vec<(u32, Node)>),
    /// Unordered coordinate map (ordered here for determinism; nothing may
    /// rely on the order).
    Hash(BTreeMap<u32, Node>),
    Leaf(Value),
}

impl Node {
    /// Empty node tree for the given level formats (a leaf if none remain).
    pub fn empty(formats: &[LevelFormat]) -> Node {
        match formats.first() {
            None => Node::Leaf(0),
            Some(LevelFormat::Uncompressed) => Node::Uncompressed(BTreeMap::new()),
            Some(LevelFormat::Compressed) => Node::Compressed(Vec::new()),
            Some(LevelFormat::Hash) => Node::Hash(BTreeMap::new()),
        }
    }

    pub fn child(&self, coord: u32) -> Option<&Node> {
        match self {
            Node::Uncompressed(m) | Node::Hash(m) => m.get(&coord),
            Node::Compressed(v) => v
                .binary_search_by_key(&coord, |(c, _)| *c)
                .ok()
                .map(|i| &v[i].1),
            Node::Leaf(_) => None,
        }
    }

    /// Stored coordinates at this level, ascending.
    pub fn coords(&self) -> Vec<u32> {
        match self {
            Node::Uncompressed(m) | Node::Hash(m) => m.keys().copied().collect(),
            Node::Compressed(v) => v.iter().map(|(c, _)| *c).collect(),
            Node::Leaf(_) => Vec::new(),
        }
    }

    pub fn value(&self) -> Value {
        match self {
            Node::Leaf(v) => *v,
            _ => panic!("value read above the leaf level"),
        }
    }

    fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf(_))
    }

    /// Child for `coord`, created empty if absent. Keyed node kinds insert
    /// anywhere; compressed lists only ever have their last entry extended,
    /// so the caller must have checked append order.
    fn child_mut(&mut self, coord: u32, rest: &[LevelFormat]) -> &mut Node {
        match self {
            Node::Uncompressed(m) | Node::Hash(m) => {
                m.entry(coord).or_insert_with(|| Node::empty(rest))
            }
            Node::Compressed(v) => {
                match v.binary_search_by_key(&coord, |(c, _)| *c) {
                    Ok(i) => &mut v[i].1,
                    Err(i) => {
                        v.insert(i, (coord, Node::empty(rest)));
                        &mut v[i].1
                    }
                }
            }
            Node::Leaf(_) => panic!("child requested below the leaf level"),
        }
    }

    /// True when every compressed list in the subtree is strictly sorted.
    pub fn compressed_sorted(&self) -> bool {
        match self {
            Node::Uncompressed(m) | Node::Hash(m) => m.values().all(Node::compressed_sorted),
            Node::Compressed(v) => {
                v.windows(2).all(|w| w[0].0 < w[1].0)
                    && v.iter().all(|(_, n)| n.compressed_sorted())
            }
            Node::Leaf(_) => true,
        }
    }

    fn stored_paths(&self, prefix: &mut Vec<u32>, out: &mut Vec<(Vec<u32>, Value)>) {
        match self {
            Node::Leaf(v) => out.push((prefix.clone(), *v)),
            Node::Uncompressed(m) | Node::Hash(m) => {
                for (c, n) in m {
                    prefix.push(*c);
                    n.stored_paths(prefix, out);
                    prefix.pop();
                }
            }
            Node::Compressed(v) => {
                for (c, n) in v {
                    prefix.push(*c);
                    n.stored_paths(prefix, out);
                    prefix.pop();
                }
            }
        }
    }
}

/// A concrete tensor: its declaration, the extents of its dimensions, and
/// the level tree in storage order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseTensor {
    pub decl: TensorDecl,
    pub dim_sizes: BTreeMap<String, u32>,
    pub root: Node,
}

impl SparseTensor {
    /// All-zero tensor of the declared shape.
    pub fn zero(decl: &TensorDecl, dim_sizes: &BTreeMap<String, u32>) -> SparseTensor {
        SparseTensor {
            decl: decl.clone(),
            dim_sizes: decl
                .dims
                .iter()
                .map(|d| (d.clone(), dim_sizes.get(d).copied().unwrap_or(0)))
                .collect(),
            root: Node::empty(&decl.formats),
        }
    }

    /// Value at the given logical coordinates (zero when absent).
    pub fn get(&self, coords: &[u32]) -> Value {
        let mut node = &self.root;
        for level in 0..self.decl.rank() {
            let coord = coords[self.decl.mode_order[level]];
            match node.child(coord) {
                Some(next) => node = next,
                None => return 0,
            }
        }
        node.value()
    }

    /// Overwrite the value at the given logical coordinates, creating the
    /// path. Writes are recorded even when the value is zero: occupancy
    /// means written-ness for computed tensors.
    pub fn set(&mut self, coords: &[u32], value: Value) {
        let order = self.decl.mode_order.clone();
        let formats = self.decl.formats.clone();
        let mut node = &mut self.root;
        for level in 0..order.len() {
            let coord = coords[order[level]];
            node = node.child_mut(coord, &formats[level + 1..]);
        }
        *node = Node::Leaf(value);
    }

    pub fn add(&mut self, coords: &[u32], value: Value) {
        let current = self.get_written(coords).unwrap_or(0);
        self.set(coords, current + value);
    }

    fn get_written(&self, coords: &[u32]) -> Option<Value> {
        let mut node = &self.root;
        for level in 0..self.decl.rank() {
            node = node.child(coords[self.decl.mode_order[level]])?;
        }
        if node.is_leaf() {
            Some(node.value())
        } else {
            None
        }
    }

    /// Stored coordinates (logical order) with their values, including
    /// explicit zeros.
    pub fn stored(&self) -> Vec<(Vec<u32>, Value)> {
        let mut out = Vec::new();
        self.root.stored_paths(&mut Vec::new(), &mut out);
        out.into_iter()
            .map(|(path, v)| {
                let mut logical = vec![0u32; self.decl.rank()];
                for (level, c) in path.iter().enumerate() {
                    logical[self.decl.mode_order[level]] = *c;
                }
                (logical, v)
            })
            .collect()
    }

    /// Stored nonzero count.
    pub fn nnz(&self) -> usize {
        self.stored().iter().filter(|(_, v)| *v != 0).count()
    }

    /// The tensor's occupancy as a predicate pattern for task-set
    /// evaluation: one tuple per stored coordinate, in logical mode order.
    pub fn to_pattern(&self) -> Relation {
        Relation {
            dims: self.decl.dims.clone(),
            tuples: self.stored().into_iter().map(|(c, _)| c).collect(),
        }
    }

    /// Nonzero values by logical coordinates — the format-independent
    /// mathematical content, used to compare outputs across schedules.
    pub fn to_value_map(&self) -> BTreeMap<Vec<u32>, Value> {
        self.stored().into_iter().filter(|(_, v)| *v != 0).collect()
    }
}

/// Sample a tensor whose every coordinate is independently nonzero with
/// probability `density`, with values uniform in `1..=9`. Deterministic for
/// a fixed seed.
pub fn gen_uniform(
    decl: &TensorDecl,
    dim_sizes: &BTreeMap<String, u32>,
    density: f64,
    seed: u64,
) -> SparseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensor = SparseTensor::zero(decl, dim_sizes);
    let extents: Vec<u32> = decl
        .dims
        .iter()
        .map(|d| dim_sizes.get(d).copied().unwrap_or(0))
        .collect();
    if extents.contains(&0) {
        return tensor;
    }
    let mut coords = vec![0u32; decl.rank()];
    loop {
        if rng.gen_bool(density) {
            let value = rng.gen_range(1..=9);
            tensor.set(&coords, value);
        }
        // Odometer over logical coordinates, last mode fastest.
        let mut mode = decl.rank();
        loop {
            if mode == 0 {
                return tensor;
            }
            mode -= 1;
            coords[mode] += 1;
            if coords[mode] < extents[mode] {
                break;
            }
            coords[mode] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorIoError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate entry for coordinates {coords:?}")]
    Duplicate { line: usize, coords: Vec<u32> },
}

/// Parse the text tensor format: a `dims` header naming each dimension's
/// extent, then one `coord… value` line per nonzero with 1-based
/// coordinates in logical mode order, in any order.
///
/// ```text
/// dims I=2 J=2
/// 1 2 3
/// 2 1 4
/// ```
pub fn parse_tensor(decl: &TensorDecl, text: &str) -> Result<SparseTensor, TensorIoError> {
    let malformed = |line: usize, message: String| TensorIoError::Malformed { line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| malformed(1, "missing dims header".to_string()))?;
    let mut dim_sizes = BTreeMap::new();
    let mut fields = header.split_whitespace();
    if fields.next() != Some("dims") {
        return Err(malformed(header_line, "expected `dims` header".to_string()));
    }
    for field in fields {
        let (name, size) = field
            .split_once('=')
            .ok_or_else(|| malformed(header_line, format!("expected NAME=extent, found `{field}`")))?;
        let size: u32 = size
            .parse()
            .map_err(|_| malformed(header_line, format!("bad extent `{size}`")))?;
        dim_sizes.insert(name.to_string(), size);
    }
    for dim in &decl.dims {
        if !dim_sizes.contains_key(dim) {
            return Err(malformed(
                header_line,
                format!("header does not give an extent for dimension `{dim}`"),
            ));
        }
    }
    let mut tensor = SparseTensor::zero(decl, &dim_sizes);
    for (line, text) in lines {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != decl.rank() + 1 {
            return Err(malformed(
                line,
                format!("expected {} coordinates and a value", decl.rank()),
            ));
        }
        let mut coords = Vec::with_capacity(decl.rank());
        for (mode, field) in fields[..decl.rank()].iter().enumerate() {
            let c: u32 = field
                .parse()
                .map_err(|_| malformed(line, format!("bad coordinate `{field}`")))?;
            let extent = dim_sizes[&decl.dims[mode]];
            if c == 0 || c > extent {
                return Err(malformed(
                    line,
                    format!("coordinate {c} outside 1..={extent} for dimension `{}`", decl.dims[mode]),
                ));
            }
            coords.push(c - 1);
        }
        let value: Value = fields[decl.rank()]
            .parse()
            .map_err(|_| malformed(line, format!("bad value `{}`", fields[decl.rank()])))?;
        if tensor.get_written(&coords).is_some() {
            return Err(TensorIoError::Duplicate { line, coords });
        }
        if value != 0 {
            tensor.set(&coords, value);
        }
    }
    Ok(tensor)
}

/// Render a tensor in the text format `parse_tensor` reads.
pub fn format_tensor(tensor: &SparseTensor) -> String {
    let mut out = String::from("dims");
    for dim in &tensor.decl.dims {
        out.push_str(&format!(" {dim}={}", tensor.dim_sizes.get(dim).copied().unwrap_or(0)));
    }
    out.push('\n');
    for (coords, value) in tensor.to_value_map() {
        for c in &coords {
            out.push_str(&format!("{} ", c + 1));
        }
        out.push_str(&format!("{value}\n"));
    }
    out
}
