//! Sum-product loopy belief propagation with a type-grouped schedule.
//!
//! One iteration updates (a) every data factor, (b) every temporal factor in
//! ascending then descending order of its center frame, (c) every collision
//! factor, and (d) every variable-to-factor message. Inside (b) and (c) the
//! incoming variable messages of a factor are rebuilt from the current
//! factor messages just before it is updated, so later factors in a sweep
//! see what earlier ones sent.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FactorGraph, FactorId, FactorKind, Potential, TernaryTable, VarId};

/// Messages below this total before normalization indicate a floor bug.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpOptions {
    pub iterations: usize,
    /// Stop once the max message change drops below this.
    pub early_exit: Option<f64>,
    /// Weight kept from the previous message, in [0, 1).
    pub damping: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        Self { iterations: 5, early_exit: None, damping: 0.0 }
    }
}

/// Factor-to-variable and variable-to-factor messages, one per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageStore {
    pub(crate) f2v: Vec<f64>,
    pub(crate) v2f: Vec<f64>,
}

impl MessageStore {
    pub fn factor_to_var<'a>(&'a self, graph: &FactorGraph, factor: FactorId, slot: usize) -> &'a [f64] {
        let e = graph.edges[graph.factors[factor].edges[slot]];
        &self.f2v[e.offset..e.offset + e.len]
    }

    pub fn var_to_factor<'a>(&'a self, graph: &FactorGraph, factor: FactorId, slot: usize) -> &'a [f64] {
        let e = graph.edges[graph.factors[factor].edges[slot]];
        &self.v2f[e.offset..e.offset + e.len]
    }

    pub fn is_empty(&self) -> bool {
        self.f2v.is_empty()
    }

    /// Largest absolute entry difference across all messages.
    pub fn max_change(&self, other: &MessageStore) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        d(&self.f2v, &other.f2v).max(d(&self.v2f, &other.v2f))
    }
}

/// Uniform messages, except that data factors already carry their table:
/// a data factor's outgoing message does not depend on anything else, so
/// with zero iterations the beliefs are the data terms.
pub fn init_messages(graph: &FactorGraph) -> MessageStore {
    let mut store = MessageStore { f2v: vec![0.0; graph.message_len], v2f: vec![0.0; graph.message_len] };
    for e in &graph.edges {
        let u = 1.0 / e.len as f64;
        store.f2v[e.offset..e.offset + e.len].fill(u);
        store.v2f[e.offset..e.offset + e.len].fill(u);
    }
    for (fid, f) in graph.factors.iter().enumerate() {
        if f.kind == FactorKind::Data {
            if let Potential::Unary(table) = &f.potential {
                let e = graph.edges[graph.factors[fid].edges[0]];
                let total: f64 = table.iter().sum();
                for (dst, v) in store.f2v[e.offset..e.offset + e.len].iter_mut().zip(table) {
                    *dst = v / total;
                }
            }
        }
    }
    store
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let sum: f64 = v.iter().sum();
    if !(sum >= UNDERFLOW_LIMIT) {
        return Err(Error::NumericalUnderflow { sum });
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
    Ok(())
}

fn commit(dst: &mut [f64], mut new: Vec<f64>, damping: f64) -> Result<()> {
    normalize(&mut new)?;
    if damping > 0.0 {
        for (n, o) in new.iter_mut().zip(dst.iter()) {
            *n = (1.0 - damping) * *n + damping * o;
        }
        normalize(&mut new)?;
    }
    dst.copy_from_slice(&new);
    Ok(())
}

fn update_var_to_factor(graph: &FactorGraph, store: &mut MessageStore, var: VarId, edge: usize) -> Result<()> {
    let e = graph.edges[edge];
    let mut out = vec![1.0; e.len];
    for &other in &graph.variables[var].edges {
        if other == edge {
            continue;
        }
        let o = graph.edges[other];
        for (x, m) in out.iter_mut().zip(&store.f2v[o.offset..o.offset + o.len]) {
            *x *= m;
        }
    }
    normalize(&mut out)?;
    store.v2f[e.offset..e.offset + e.len].copy_from_slice(&out);
    Ok(())
}

fn refresh_incoming(graph: &FactorGraph, store: &mut MessageStore, factor: FactorId) -> Result<()> {
    for &edge in &graph.factors[factor].edges {
        update_var_to_factor(graph, store, graph.edges[edge].var, edge)?;
    }
    Ok(())
}

fn update_factor(graph: &FactorGraph, store: &mut MessageStore, factor: FactorId, damping: f64) -> Result<()> {
    let f = &graph.factors[factor];
    let edges: Vec<_> = f.edges.iter().map(|&e| graph.edges[e]).collect();
    let incoming = |i: usize| &store.v2f[edges[i].offset..edges[i].offset + edges[i].len];
    let outs: Vec<Vec<f64>> = match &f.potential {
        Potential::Unary(table) => vec![table.clone()],
        Potential::Pairwise { dims, values } => {
            let (ma, mb) = (incoming(0), incoming(1));
            let mut out_a = vec![0.0; dims[0]];
            let mut out_b = vec![0.0; dims[1]];
            for a in 0..dims[0] {
                let row = &values[a * dims[1]..(a + 1) * dims[1]];
                let mut s = 0.0;
                for b in 0..dims[1] {
                    s += row[b] * mb[b];
                    out_b[b] += row[b] * ma[a];
                }
                out_a[a] = s;
            }
            vec![out_a, out_b]
        }
        Potential::Ternary(table) => ternary_messages(table, incoming(0), incoming(1), incoming(2)),
    };
    for (e, out) in edges.iter().zip(outs) {
        commit(&mut store.f2v[e.offset..e.offset + e.len], out, damping)?;
    }
    Ok(())
}

/// All three outgoing messages of a (prev, center, next) factor in one pass.
fn ternary_messages(table: &TernaryTable, m_prev: &[f64], m_center: &[f64], m_next: &[f64]) -> Vec<Vec<f64>> {
    let [na, nb, nc] = table.dims();
    let mut out_prev = vec![0.0; na];
    let mut out_center = vec![0.0; nb];
    let mut out_next = vec![0.0; nc];
    let mut row = vec![0.0; nb];
    for a in 0..na {
        for c in 0..nc {
            table.center_row(a, c, &mut row);
            let w = m_prev[a] * m_next[c];
            let mut s = 0.0;
            for b in 0..nb {
                out_center[b] += row[b] * w;
                s += row[b] * m_center[b];
            }
            out_prev[a] += s * m_next[c];
            out_next[c] += s * m_prev[a];
        }
    }
    vec![out_prev, out_center, out_next]
}

/// Temporal factors ordered by center frame (stable on insertion order).
fn temporal_order(graph: &FactorGraph) -> Vec<FactorId> {
    let mut ids: Vec<FactorId> = (0..graph.factors.len()).filter(|&i| graph.factors[i].kind == FactorKind::Temporal).collect();
    ids.sort_by_key(|&i| graph.factors[i].frame);
    ids
}

fn of_kind(graph: &FactorGraph, kind: FactorKind) -> Vec<FactorId> {
    (0..graph.factors.len()).filter(|&i| graph.factors[i].kind == kind).collect()
}

/// One full iteration of the schedule.
pub fn sweep_iteration(graph: &FactorGraph, store: &mut MessageStore, damping: f64) -> Result<()> {
    for fid in of_kind(graph, FactorKind::Data) {
        update_factor(graph, store, fid, damping)?;
    }
    let temporal = temporal_order(graph);
    for &fid in temporal.iter().chain(temporal.iter().rev()) {
        refresh_incoming(graph, store, fid)?;
        update_factor(graph, store, fid, damping)?;
    }
    for fid in of_kind(graph, FactorKind::Collision) {
        refresh_incoming(graph, store, fid)?;
        update_factor(graph, store, fid, damping)?;
    }
    for (v, var) in graph.variables.iter().enumerate() {
        for &edge in &var.edges {
            update_var_to_factor(graph, store, v, edge)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub probs: Vec<f64>,
    pub argmax: usize,
}

impl Belief {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let argmax = argmax_lowest(&probs);
        Self { probs, argmax }
    }

    /// The `k` most probable states as (index, probability), best first.
    pub fn top(&self, k: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = (0..self.probs.len()).collect();
        idx.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|i| (i, self.probs[i])).collect()
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Normalized product of every factor message into each variable.
pub fn beliefs(graph: &FactorGraph, store: &MessageStore) -> Result<Vec<Belief>> {
    graph
        .variables
        .iter()
        .map(|var| {
            let mut p = vec![1.0; var.n_states];
            for &edge in &var.edges {
                let e = graph.edges[edge];
                for (x, m) in p.iter_mut().zip(&store.f2v[e.offset..e.offset + e.len]) {
                    *x *= m;
                }
            }
            normalize(&mut p)?;
            Ok(Belief::from_probs(p))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome {
    pub beliefs: Vec<Belief>,
    /// Max L-infinity message change of each iteration that ran.
    pub changes: Vec<f64>,
    pub messages: MessageStore,
}

pub fn run(graph: &FactorGraph, options: &BpOptions) -> Result<BpOutcome> {
    let mut store = init_messages(graph);
    let mut changes = Vec::with_capacity(options.iterations);
    for it in 0..options.iterations {
        let before = store.clone();
        sweep_iteration(graph, &mut store, options.damping)?;
        let change = store.max_change(&before);
        debug!("bp iteration {}: max message change {change:.3e}", it + 1);
        changes.push(change);
        if options.early_exit.is_some_and(|tol| change < tol) {
            break;
        }
    }
    Ok(BpOutcome { beliefs: beliefs(graph, &store)?, changes, messages: store })
}

/// Most probable state per variable.
pub fn select_map(beliefs: &[Belief]) -> Vec<usize> {
    beliefs.iter().map(|b| b.argmax).collect()
}
