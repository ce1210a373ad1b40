//! Pairwise-comparison data: parsing, registries, and the sparse design
//! operators of the linear model `Y = grad * theta + annot * gamma + noise`.
//!
//! Edges are oriented as presented to the annotator: `left` is the item shown
//! on the left, and a positive response means the left item was preferred.
//! With this convention a positive annotator bias reads as a left-click bias.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One pairwise judgment: annotator, presented pair, signed response.
/// For dichotomous data the response is +1 (left preferred) or -1.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub annotator: String,
    pub left: String,
    pub right: String,
    pub response: f64,
}

/// Interned keys in first-appearance order, so matrices built from a dataset
/// are deterministic.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    keys: Vec<String>,
    index: HashMap<String, usize>,
}

impl Registry {
    fn intern(&mut self, key: &str) -> usize {
        if let Some(&i) = self.index.get(key) {
            return i;
        }
        let i = self.keys.len();
        self.keys.push(key.to_owned());
        self.index.insert(key.to_owned(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, index: usize) -> &str {
        &self.keys[index]
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keys.iter().map(String::as_str)
    }
}

/// An indexed edge: all ids resolved against the registries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub annotator: usize,
    pub left: usize,
    pub right: usize,
    pub response: f64,
}

/// An edge list over item and annotator registries. Duplicate
/// (annotator, pair) judgments are kept as distinct edges.
#[derive(Debug, Clone, Default)]
pub struct ComparisonDataset {
    edges: Vec<Edge>,
    items: Registry,
    annotators: Registry,
}

pub const CSV_HEADER: [&str; 4] = ["annotator", "left", "right", "response"];

impl ComparisonDataset {
    /// Builds a dataset from records, interning keys in first-appearance
    /// order and validating each record.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = ComparisonRecord>,
    {
        let mut ds = ComparisonDataset::default();
        for (k, rec) in records.into_iter().enumerate() {
            ds.push_record(&rec, k as u64 + 1)?;
        }
        Ok(ds)
    }

    fn push_record(&mut self, rec: &ComparisonRecord, line: u64) -> Result<()> {
        if rec.left == rec.right {
            return Err(Error::SelfComparison {
                line,
                item: rec.left.clone(),
            });
        }
        if !rec.response.is_finite() || rec.response == 0.0 {
            return Err(Error::InvalidResponse {
                line,
                value: format!("{}", rec.response),
            });
        }
        let annotator = self.annotators.intern(&rec.annotator);
        let left = self.items.intern(&rec.left);
        let right = self.items.intern(&rec.right);
        self.edges.push(Edge {
            annotator,
            left,
            right,
            response: rec.response,
        });
        Ok(())
    }

    /// Parses the CSV wire format: header `annotator,left,right,response`,
    /// comma separated, `#` starts a comment line.
    pub fn parse_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);

        let headers = rdr
            .headers()
            .map_err(|e| Error::BadHeader {
                found: e.to_string(),
            })?
            .clone();
        let got: Vec<&str> = headers.iter().collect();
        if got != CSV_HEADER {
            return Err(Error::BadHeader {
                found: got.join(","),
            });
        }

        let mut ds = ComparisonDataset::default();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e
                    .position()
                    .map(csv::Position::line)
                    .unwrap_or_default();
                Error::MalformedRow {
                    line,
                    reason: e.to_string(),
                }
            })?;
            let line = row.position().map(csv::Position::line).unwrap_or_default();
            if row.len() != 4 {
                return Err(Error::MalformedRow {
                    line,
                    reason: format!("expected 4 fields, got {}", row.len()),
                });
            }
            let response: f64 = row[3].parse().map_err(|_| Error::InvalidResponse {
                line,
                value: row[3].to_owned(),
            })?;
            if !response.is_finite() || response == 0.0 {
                return Err(Error::InvalidResponse {
                    line,
                    value: row[3].to_owned(),
                });
            }
            if row[1] == row[2] {
                return Err(Error::SelfComparison {
                    line,
                    item: row[1].to_owned(),
                });
            }
            let rec = ComparisonRecord {
                annotator: row[0].to_owned(),
                left: row[1].to_owned(),
                right: row[2].to_owned(),
                response,
            };
            ds.push_record(&rec, line)?;
        }
        Ok(ds)
    }

    /// Writes the dataset back to CSV. Responses use the shortest exact
    /// float representation so a parse round-trip is lossless.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", CSV_HEADER.join(","))?;
        for e in &self.edges {
            writeln!(
                out,
                "{},{},{},{}",
                self.annotators.key(e.annotator),
                self.items.key(e.left),
                self.items.key(e.right),
                e.response
            )?;
        }
        Ok(())
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_annotators(&self) -> usize {
        self.annotators.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn items(&self) -> &Registry {
        &self.items
    }

    pub fn annotators(&self) -> &Registry {
        &self.annotators
    }

    /// Reconstructs owned records (registry lookups applied).
    pub fn records(&self) -> impl Iterator<Item = ComparisonRecord> + '_ {
        self.edges.iter().map(|e| ComparisonRecord {
            annotator: self.annotators.key(e.annotator).to_owned(),
            left: self.items.key(e.left).to_owned(),
            right: self.items.key(e.right).to_owned(),
            response: e.response,
        })
    }

    /// The response vector Y, in record order.
    pub fn responses(&self) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|e| e.response))
    }

    pub fn is_dichotomous(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.response == 1.0 || e.response == -1.0)
    }

    /// Per-annotator (left, right) click counts, indexed by annotator
    /// registry order. Requires dichotomous responses.
    pub fn left_right_counts(&self) -> Result<Vec<(u64, u64)>> {
        for e in &self.edges {
            if e.response != 1.0 && e.response != -1.0 {
                return Err(Error::NonDichotomous {
                    annotator: self.annotators.key(e.annotator).to_owned(),
                    value: e.response,
                });
            }
        }
        Ok(self.sign_counts())
    }

    /// Per-annotator counts of positive/negative responses. Same as
    /// `left_right_counts` on dichotomous data but defined for any signed
    /// responses.
    pub fn sign_counts(&self) -> Vec<(u64, u64)> {
        let mut counts = vec![(0u64, 0u64); self.annotators.len()];
        for e in &self.edges {
            if e.response > 0.0 {
                counts[e.annotator].0 += 1;
            } else {
                counts[e.annotator].1 += 1;
            }
        }
        counts
    }
}

/// The two sparse design operators, stored as per-edge index arrays:
/// the gradient operator has one +1 (left item) and one -1 (right item)
/// per row, the annotator operator a single +1 per row.
#[derive(Debug, Clone)]
pub struct DesignOperators {
    n_edges: usize,
    n_items: usize,
    n_annotators: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    annotator: Vec<usize>,
    component_labels: Vec<usize>,
    n_components: usize,
}

impl DesignOperators {
    pub fn from_dataset(ds: &ComparisonDataset) -> Result<Self> {
        if ds.n_edges() == 0 {
            return Err(Error::EmptyDataset);
        }
        let n_items = ds.n_items();
        let mut left = Vec::with_capacity(ds.n_edges());
        let mut right = Vec::with_capacity(ds.n_edges());
        let mut annotator = Vec::with_capacity(ds.n_edges());
        let mut uf = UnionFind::new(n_items);
        for e in ds.edges() {
            left.push(e.left);
            right.push(e.right);
            annotator.push(e.annotator);
            uf.union(e.left, e.right);
        }
        let (component_labels, n_components) = uf.labels();
        Ok(DesignOperators {
            n_edges: ds.n_edges(),
            n_items,
            n_annotators: ds.n_annotators(),
            left,
            right,
            annotator,
            component_labels,
            n_components,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_annotators(&self) -> usize {
        self.n_annotators
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    pub fn annotator(&self) -> &[usize] {
        &self.annotator
    }

    /// Connected-component id per item, labeled in first-item order.
    pub fn component_labels(&self) -> &[usize] {
        &self.component_labels
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// grad * theta: per edge, theta[left] - theta[right].
    pub fn apply_grad(&self, theta: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(theta.len(), self.n_items);
        let mut out = DVector::zeros(self.n_edges);
        for k in 0..self.n_edges {
            out[k] = theta[self.left[k]] - theta[self.right[k]];
        }
        out
    }

    /// grad' * r: scatter each edge value onto its endpoints.
    pub fn apply_grad_transpose(&self, r: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(r.len(), self.n_edges);
        let mut out = DVector::zeros(self.n_items);
        for k in 0..self.n_edges {
            out[self.left[k]] += r[k];
            out[self.right[k]] -= r[k];
        }
        out
    }

    /// annot * gamma: per edge, gamma[annotator].
    pub fn apply_annot(&self, gamma: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(gamma.len(), self.n_annotators);
        let mut out = DVector::zeros(self.n_edges);
        for k in 0..self.n_edges {
            out[k] = gamma[self.annotator[k]];
        }
        out
    }

    /// annot' * r: sum edge values per annotator.
    pub fn apply_annot_transpose(&self, r: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(r.len(), self.n_edges);
        let mut out = DVector::zeros(self.n_annotators);
        for k in 0..self.n_edges {
            out[self.annotator[k]] += r[k];
        }
        out
    }

    /// (grad' grad) * v, the graph Laplacian product, without forming the matrix.
    pub fn laplacian_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_grad_transpose(&self.apply_grad(v))
    }

    /// Item degrees (diagonal of the Laplacian).
    pub fn degrees(&self) -> DVector<f64> {
        let mut deg = DVector::zeros(self.n_items);
        for k in 0..self.n_edges {
            deg[self.left[k]] += 1.0;
            deg[self.right[k]] += 1.0;
        }
        deg
    }

    /// Number of edges carried by each annotator (diagonal of annot' annot).
    pub fn annotator_edge_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_annotators];
        for &a in &self.annotator {
            counts[a] += 1;
        }
        counts
    }

    /// Dense gradient operator, for tests and small instances.
    pub fn grad_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_edges, self.n_items);
        for k in 0..self.n_edges {
            m[(k, self.left[k])] = 1.0;
            m[(k, self.right[k])] = -1.0;
        }
        m
    }

    /// Dense annotator operator, for tests and small instances.
    pub fn annot_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_edges, self.n_annotators);
        for k in 0..self.n_edges {
            m[(k, self.annotator[k])] = 1.0;
        }
        m
    }

    /// Centers `v` to zero mean within each connected component, in place.
    pub fn center_per_component(&self, v: &mut DVector<f64>) {
        let mut sums = vec![0.0; self.n_components];
        let mut sizes = vec![0usize; self.n_components];
        for i in 0..self.n_items {
            sums[self.component_labels[i]] += v[i];
            sizes[self.component_labels[i]] += 1;
        }
        for i in 0..self.n_items {
            let c = self.component_labels[i];
            v[i] -= sums[c] / sizes[c] as f64;
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Compact labels in first-appearance order plus the component count.
    fn labels(&mut self) -> (Vec<usize>, usize) {
        let n = self.parent.len();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for i in 0..n {
            let r = self.find(i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[i] = label[r];
        }
        (out, next)
    }
}
