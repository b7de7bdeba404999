use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Parents below this realization weight make an infoset unreachable.
pub const REACH_TOL: f64 = 1e-12;

/// Tolerance on the flow-conservation equalities of a realization plan.
pub const PLAN_TOL: f64 = 1e-9;

/// An information set: the sequence leading to it and its extensions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Infoset {
    pub parent: usize,
    pub children: Vec<usize>,
}

/// The sequence-form polytope of one agent.
///
/// Sequence `root` is the empty sequence with fixed weight 1. Every other
/// sequence extends exactly one infoset.
#[derive(Debug, Clone, PartialEq)]
pub struct Treeplex {
    n: usize,
    root: usize,
    infosets: Vec<Infoset>,
    infoset_of: Vec<Option<usize>>,
    child_infosets: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl Treeplex {
    pub fn new(n: usize, root: usize, infosets: Vec<Infoset>) -> Result<Self> {
        if root >= n {
            return Err(Error::Structural(format!("root {root} outside {n} sequences")));
        }
        let mut infoset_of = vec![None; n];
        let mut child_infosets = vec![Vec::new(); n];
        for (i, info) in infosets.iter().enumerate() {
            if info.parent >= n {
                return Err(Error::Structural(format!("infoset {i} has parent {} outside range", info.parent)));
            }
            if info.children.is_empty() {
                return Err(Error::Structural(format!("infoset {i} has no extensions")));
            }
            child_infosets[info.parent].push(i);
            for &c in &info.children {
                if c >= n || c == root {
                    return Err(Error::Structural(format!("infoset {i} lists invalid child {c}")));
                }
                if infoset_of[c].replace(i).is_some() {
                    return Err(Error::Structural(format!("sequence {c} extends two infosets")));
                }
            }
        }
        if let Some(s) = (0..n).find(|&s| s != root && infoset_of[s].is_none()) {
            return Err(Error::Structural(format!("sequence {s} belongs to no infoset")));
        }

        // Breadth-first from the root; anything left over sits on a cycle.
        let mut topo = Vec::with_capacity(infosets.len());
        let mut queue: VecDeque<usize> = child_infosets[root].iter().copied().collect();
        while let Some(i) = queue.pop_front() {
            topo.push(i);
            for &c in &infosets[i].children {
                queue.extend(child_infosets[c].iter().copied());
            }
        }
        if topo.len() != infosets.len() {
            return Err(Error::Structural("infosets do not form a forest under the root".into()));
        }
        Ok(Treeplex { n, root, infosets, infoset_of, child_infosets, topo })
    }

    /// The simplex over `k` actions as a one-infoset treeplex; sequence `i + 1`
    /// is action `i`.
    pub fn simplex(k: usize) -> Result<Self> {
        Treeplex::new(k + 1, 0, vec![Infoset { parent: 0, children: (1..=k).collect() }])
    }

    /// Number of sequences, root included.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn infosets(&self) -> &[Infoset] {
        &self.infosets
    }

    /// The infoset a sequence extends (`None` for the root).
    pub fn infoset_of(&self, seq: usize) -> Option<usize> {
        self.infoset_of[seq]
    }

    /// Infosets reached after playing `seq`.
    pub fn child_infosets(&self, seq: usize) -> &[usize] {
        &self.child_infosets[seq]
    }

    /// Infoset indices ordered parents first.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// True if no infoset follows `seq`.
    pub fn is_terminal(&self, seq: usize) -> bool {
        self.child_infosets[seq].is_empty()
    }

    /// The plan that splits every infoset's mass evenly.
    pub fn uniform_plan(&self) -> RealizationPlan {
        let mut r = vec![0.0; self.n];
        r[self.root] = 1.0;
        for &i in &self.topo {
            let info = &self.infosets[i];
            let share = r[info.parent] / info.children.len() as f64;
            for &c in &info.children {
                r[c] = share;
            }
        }
        RealizationPlan { r }
    }

    /// Largest violation of `r(root) = 1` and the per-infoset equalities.
    pub fn constraint_violation(&self, r: &[f64]) -> f64 {
        let mut worst = (r[self.root] - 1.0).abs();
        for info in &self.infosets {
            let s: f64 = info.children.iter().map(|&c| r[c]).sum();
            worst = worst.max((s - r[info.parent]).abs());
        }
        worst
    }
}

/// A sequence-form strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationPlan {
    r: Vec<f64>,
}

impl RealizationPlan {
    /// Validates the plan against `t`: root weight 1, flow conservation to
    /// `1e-9`, entries at least `-1e-12`.
    pub fn new(t: &Treeplex, r: Vec<f64>) -> Result<Self> {
        if r.len() != t.len() {
            return Err(Error::Structural(format!("plan has {} entries, treeplex {}", r.len(), t.len())));
        }
        if let Some(index) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::NumericInput { index });
        }
        if let Some(i) = r.iter().position(|&x| x < -1e-12) {
            return Err(Error::Domain(format!("negative realization weight {} at {i}", r[i])));
        }
        let viol = t.constraint_violation(&r);
        if viol > PLAN_TOL {
            return Err(Error::Domain(format!("realization constraints violated by {viol:e}")));
        }
        Ok(RealizationPlan { r })
    }

    pub(crate) fn from_vec_unchecked(r: Vec<f64>) -> Self {
        RealizationPlan { r }
    }

    pub fn values(&self) -> &[f64] {
        &self.r
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.r
    }
}

/// Local distribution at one infoset.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStrategy {
    pub probs: Vec<f64>,
    pub reachable: bool,
}

/// Behavioral strategy `r(child) / r(parent)` per infoset. Infosets whose parent
/// weight is at most `1e-12` get a uniform placeholder and `reachable = false`.
pub fn behavioral_from_plan(r: &RealizationPlan, t: &Treeplex) -> Vec<LocalStrategy> {
    behavioral(r.values(), t, None)
}

/// Like [`behavioral_from_plan`], but completes unreachable infosets with the
/// limit of the projection as the parent weight shrinks to zero: uniform over
/// the children whose projection input `input` is maximal. For infosets whose
/// children are terminal this is exactly where a vanishing parent weight would
/// be placed.
pub fn behavioral_with_limit(r: &RealizationPlan, t: &Treeplex, input: &[f64]) -> Vec<LocalStrategy> {
    behavioral(r.values(), t, Some(input))
}

fn behavioral(r: &[f64], t: &Treeplex, input: Option<&[f64]>) -> Vec<LocalStrategy> {
    let tie = input.map(|v| 1e-12 * super::scale_of(v)).unwrap_or(0.0);
    t.infosets()
        .iter()
        .map(|info| {
            let k = info.children.len();
            let p = r[info.parent];
            if p > REACH_TOL {
                let probs = info.children.iter().map(|&c| (r[c] / p).max(0.0)).collect();
                return LocalStrategy { probs, reachable: true };
            }
            let probs = match input {
                None => vec![1.0 / k as f64; k],
                Some(v) => {
                    let best = info.children.iter().map(|&c| v[c]).fold(f64::NEG_INFINITY, f64::max);
                    let top: Vec<bool> = info.children.iter().map(|&c| v[c] >= best - tie).collect();
                    let m = top.iter().filter(|&&b| b).count() as f64;
                    top.iter().map(|&b| if b { 1.0 / m } else { 0.0 }).collect()
                }
            };
            LocalStrategy { probs, reachable: false }
        })
        .collect()
}
