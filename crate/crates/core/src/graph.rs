//! Discrete factor graphs with unary, pairwise and ternary potentials.
//!
//! Potentials are stored normalized (entries sum to one). Ternary temporal
//! potentials over 64 states have 262144 entries; the kernel form evaluates
//! them on demand from the state points instead of storing them.

use std::sync::Arc;

use crate::geometry::Point3;

pub type VarId = usize;
pub type FactorId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FactorKind {
    Data,
    Temporal,
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub joint: usize,
    pub frame: u32,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub key: VarKey,
    pub n_states: usize,
    /// Incident edges.
    pub(crate) edges: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Factor {
    pub kind: FactorKind,
    /// Frame used to order the temporal sweep (the center frame).
    pub frame: u32,
    pub vars: Vec<VarId>,
    pub potential: Potential,
    pub(crate) edges: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Edge {
    pub factor: FactorId,
    pub var: VarId,
    /// Offset of this edge's message in the flat message buffers.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalForm {
    /// `exp(-|d|^2 / (2 sigma^2))`
    Gaussian,
    /// `exp(-|d| / (2 sigma^2))`, the unsquared form.
    Literal,
}

/// Constant-velocity kernel over (prev, center, next) state sets.
///
/// The expected center position is `w_prev * prev + w_next * next`; for
/// equally spaced frames both weights are one half.
#[derive(Debug, Clone)]
pub struct TemporalKernel {
    prev: Arc<[Point3]>,
    center: Arc<[Point3]>,
    next: Arc<[Point3]>,
    w_prev: f64,
    w_next: f64,
    inv_two_sigma_sq: f64,
    form: TemporalForm,
    floor: f64,
    normalizer: f64,
}

impl TemporalKernel {
    pub fn new(
        prev: Arc<[Point3]>,
        center: Arc<[Point3]>,
        next: Arc<[Point3]>,
        w_prev: f64,
        sigma: f64,
        form: TemporalForm,
        floor: f64,
    ) -> Self {
        let mut k = Self {
            prev,
            center,
            next,
            w_prev,
            w_next: 1.0 - w_prev,
            inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
            form,
            floor,
            normalizer: 1.0,
        };
        let mut row = vec![0.0; k.center.len()];
        let mut total = 0.0;
        for a in 0..k.prev.len() {
            for c in 0..k.next.len() {
                k.raw_row(a, c, &mut row);
                total += row.iter().sum::<f64>();
            }
        }
        k.normalizer = total;
        k
    }

    fn raw_row(&self, a: usize, c: usize, row: &mut [f64]) {
        let mu = self.prev[a].coords * self.w_prev + self.next[c].coords * self.w_next;
        let k = self.inv_two_sigma_sq;
        // exponents past this are below the floor; skip the exp
        let cutoff = if self.floor > 0.0 { -self.floor.ln() + 1e-9 } else { f64::INFINITY };
        for (out, s) in row.iter_mut().zip(self.center.iter()) {
            let dx = s.x - mu.x;
            let dy = s.y - mu.y;
            let dz = s.z - mu.z;
            let d2 = dx * dx + dy * dy + dz * dz;
            let x = match self.form {
                TemporalForm::Gaussian => k * d2,
                TemporalForm::Literal => k * d2.sqrt(),
            };
            *out = if x > cutoff { self.floor } else { (-x).exp().max(self.floor) };
        }
    }
}

#[derive(Debug, Clone)]
pub enum TernaryTable {
    /// Row-major over (prev, center, next).
    Dense {
        dims: [usize; 3],
        values: Vec<f64>,
    },
    Kernel(TemporalKernel),
}

impl TernaryTable {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            TernaryTable::Dense { dims, .. } => *dims,
            TernaryTable::Kernel(k) => [k.prev.len(), k.center.len(), k.next.len()],
        }
    }

    /// Fills `row[b]` with the normalized entry `(a, b, c)` for every center state `b`.
    pub fn center_row(&self, a: usize, c: usize, row: &mut [f64]) {
        match self {
            TernaryTable::Dense { dims, values } => {
                for (b, out) in row.iter_mut().enumerate() {
                    *out = values[(a * dims[1] + b) * dims[2] + c];
                }
            }
            TernaryTable::Kernel(k) => {
                k.raw_row(a, c, row);
                let inv = 1.0 / k.normalizer;
                for v in row.iter_mut() {
                    *v *= inv;
                }
            }
        }
    }

    pub fn entry(&self, a: usize, b: usize, c: usize) -> f64 {
        let mut row = vec![0.0; self.dims()[1]];
        self.center_row(a, c, &mut row);
        row[b]
    }
}

#[derive(Debug, Clone)]
pub enum Potential {
    Unary(Vec<f64>),
    /// Row-major over (first, second).
    Pairwise {
        dims: [usize; 2],
        values: Vec<f64>,
    },
    Ternary(TernaryTable),
}

impl Potential {
    pub fn arity(&self) -> usize {
        match self {
            Potential::Unary(_) => 1,
            Potential::Pairwise { .. } => 2,
            Potential::Ternary(_) => 3,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            Potential::Unary(v) => vec![v.len()],
            Potential::Pairwise { dims, .. } => dims.to_vec(),
            Potential::Ternary(t) => t.dims().to_vec(),
        }
    }

    /// Sum of all entries (1 for normalized potentials).
    pub fn total(&self) -> f64 {
        match self {
            Potential::Unary(v) => v.iter().sum(),
            Potential::Pairwise { values, .. } => values.iter().sum(),
            Potential::Ternary(t) => {
                let [na, nb, nc] = t.dims();
                let mut row = vec![0.0; nb];
                let mut total = 0.0;
                for a in 0..na {
                    for c in 0..nc {
                        t.center_row(a, c, &mut row);
                        total += row.iter().sum::<f64>();
                    }
                }
                total
            }
        }
    }

    /// Smallest entry.
    pub fn min_entry(&self) -> f64 {
        match self {
            Potential::Unary(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
            Potential::Pairwise { values, .. } => values.iter().copied().fold(f64::INFINITY, f64::min),
            Potential::Ternary(t) => {
                let [na, nb, nc] = t.dims();
                let mut row = vec![0.0; nb];
                let mut lo = f64::INFINITY;
                for a in 0..na {
                    for c in 0..nc {
                        t.center_row(a, c, &mut row);
                        lo = row.iter().copied().fold(lo, f64::min);
                    }
                }
                lo
            }
        }
    }
}

/// Floors every entry at `floor` then rescales to sum one.
pub fn floor_and_normalize(values: &mut [f64], floor: f64) {
    for v in values.iter_mut() {
        *v = v.max(floor);
    }
    let total: f64 = values.iter().sum();
    for v in values.iter_mut() {
        *v /= total;
    }
}

#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub(crate) variables: Vec<Variable>,
    pub(crate) factors: Vec<Factor>,
    pub(crate) edges: Vec<Edge>,
    pub(crate) message_len: usize,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, key: VarKey, n_states: usize) -> VarId {
        assert!(n_states > 0, "variables need at least one state");
        self.variables.push(Variable { key, n_states, edges: Vec::new() });
        self.variables.len() - 1
    }

    /// Adds a factor over `vars` (ordered as the potential's axes).
    ///
    /// Panics if the potential's shape does not match the variables.
    pub fn add_factor(&mut self, kind: FactorKind, frame: u32, vars: Vec<VarId>, potential: Potential) -> FactorId {
        assert_eq!(vars.len(), potential.arity(), "factor arity mismatch");
        for (v, d) in vars.iter().zip(potential.dims()) {
            assert_eq!(self.variables[*v].n_states, d, "potential axis does not match variable {v}");
        }
        if let Potential::Pairwise { dims, values } = &potential {
            assert_eq!(values.len(), dims[0] * dims[1]);
        }
        if let Potential::Ternary(TernaryTable::Dense { dims, values }) = &potential {
            assert_eq!(values.len(), dims.iter().product::<usize>());
        }
        let fid = self.factors.len();
        let mut edges = Vec::with_capacity(vars.len());
        for &v in &vars {
            let len = self.variables[v].n_states;
            let eid = self.edges.len();
            self.edges.push(Edge { factor: fid, var: v, offset: self.message_len, len });
            self.message_len += len;
            self.variables[v].edges.push(eid);
            edges.push(eid);
        }
        self.factors.push(Factor { kind, frame, vars, potential, edges });
        fid
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn count(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind == kind).count()
    }

    /// Factors incident to `v`.
    pub fn factors_of(&self, v: VarId) -> impl Iterator<Item = FactorId> + '_ {
        self.variables[v].edges.iter().map(|&e| self.edges[e].factor)
    }
}
