//! The two-round alternating bargaining game in sequence form.
//!
//! The firm offers `a` (the worker's share). The worker accepts (`A_a`) or
//! rejects and counters `b` (`R_a b`), where `b` is the firm's share of the
//! discounted surplus. The firm then accepts (`aA_b`) or rejects (`aR_b`).
//!
//! Vector layout is lexicographic by (round, a, b), accept before reject:
//!
//! * firm: `[root, a_0..a_D, (a, b): aA_b, aR_b ...]`
//! * worker: `[root, A_0..A_D, (a, b): R_a b ...]`
//!
//! The worker has no separate "reject" sequence: rejecting `a` and countering
//! `b` is one decision at the infoset that follows offer `a`.

use super::{ActionGrid, Agent, UtilityVector, FEEDBACK_ZERO};
use crate::error::{Error, Result};
use crate::geometry::{Infoset, RealizationPlan, Treeplex};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoRoundGame {
    grid: ActionGrid,
    delta: f64,
}

impl TwoRoundGame {
    /// Requires `0 < delta < 1`.
    pub fn new(grid: ActionGrid, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("discount must lie in (0, 1), got {delta}")));
        }
        Ok(TwoRoundGame { grid, delta })
    }

    pub fn grid(&self) -> ActionGrid {
        self.grid
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn m(&self) -> usize {
        self.grid.len()
    }

    /// Number of sequences, root included.
    pub fn sequence_count(&self, agent: Agent) -> usize {
        let m = self.m();
        match agent {
            Agent::Firm => 1 + m + 2 * m * m,
            Agent::Worker => 1 + m + m * m,
        }
    }

    pub fn firm_offer(&self, a: usize) -> usize {
        1 + a
    }

    pub fn firm_accept(&self, a: usize, b: usize) -> usize {
        1 + self.m() + 2 * (a * self.m() + b)
    }

    pub fn firm_reject(&self, a: usize, b: usize) -> usize {
        self.firm_accept(a, b) + 1
    }

    pub fn worker_accept(&self, a: usize) -> usize {
        1 + a
    }

    pub fn worker_counter(&self, a: usize, b: usize) -> usize {
        1 + self.m() + a * self.m() + b
    }

    /// Index of the firm's second-round infoset after offer `a` and counter `b`.
    pub fn firm_response_infoset(&self, a: usize, b: usize) -> usize {
        1 + a * self.m() + b
    }

    /// Index of the worker's infoset after offer `a`.
    pub fn worker_response_infoset(&self, a: usize) -> usize {
        a
    }

    /// Decodes a vector position into its sequence.
    pub fn sequence(&self, agent: Agent, index: usize) -> Result<SequenceIndex> {
        let m = self.m();
        if index >= self.sequence_count(agent) {
            return Err(Error::Structural(format!("{} has no sequence {index}", agent.name())));
        }
        let kind = if index == 0 {
            SequenceKind::Root
        } else if index <= m {
            match agent {
                Agent::Firm => SequenceKind::Offer(index - 1),
                Agent::Worker => SequenceKind::Accept(index - 1),
            }
        } else {
            match agent {
                Agent::Firm => {
                    let k = index - 1 - m;
                    let (a, b) = ((k / 2) / m, (k / 2) % m);
                    if k % 2 == 0 {
                        SequenceKind::SecondAccept(a, b)
                    } else {
                        SequenceKind::SecondReject(a, b)
                    }
                }
                Agent::Worker => {
                    let k = index - 1 - m;
                    SequenceKind::RejectCounter(k / m, k % m)
                }
            }
        };
        Ok(SequenceIndex { agent, kind })
    }

    /// Encodes a sequence as a vector position.
    pub fn index_of(&self, seq: SequenceIndex) -> Result<usize> {
        let m = self.m();
        let ok = |k: usize| k < m;
        let idx = match (seq.agent, seq.kind) {
            (_, SequenceKind::Root) => Some(0),
            (Agent::Firm, SequenceKind::Offer(a)) if ok(a) => Some(self.firm_offer(a)),
            (Agent::Firm, SequenceKind::SecondAccept(a, b)) if ok(a) && ok(b) => Some(self.firm_accept(a, b)),
            (Agent::Firm, SequenceKind::SecondReject(a, b)) if ok(a) && ok(b) => Some(self.firm_reject(a, b)),
            (Agent::Worker, SequenceKind::Accept(a)) if ok(a) => Some(self.worker_accept(a)),
            (Agent::Worker, SequenceKind::RejectCounter(a, b)) if ok(a) && ok(b) => Some(self.worker_counter(a, b)),
            _ => None,
        };
        idx.ok_or_else(|| Error::Structural(format!("{seq:?} is not a sequence of this game")))
    }

    /// Firm plan of the pure strategy "offer `offer`, then accept a counter iff
    /// it is at least `threshold`". Unreached subtrees carry weight 0.
    pub fn firm_pure_plan(&self, offer: usize, threshold: usize) -> RealizationPlan {
        let mut r = vec![0.0; self.sequence_count(Agent::Firm)];
        r[0] = 1.0;
        r[self.firm_offer(offer)] = 1.0;
        for b in 0..self.m() {
            if b >= threshold {
                r[self.firm_accept(offer, b)] = 1.0;
            } else {
                r[self.firm_reject(offer, b)] = 1.0;
            }
        }
        RealizationPlan::from_vec_unchecked(r)
    }

    /// Worker plan of "accept offers of at least `threshold`, otherwise counter
    /// `counter`".
    pub fn worker_pure_plan(&self, threshold: usize, counter: usize) -> RealizationPlan {
        let mut r = vec![0.0; self.sequence_count(Agent::Worker)];
        r[0] = 1.0;
        for a in 0..self.m() {
            if a >= threshold {
                r[self.worker_accept(a)] = 1.0;
            } else {
                r[self.worker_counter(a, counter)] = 1.0;
            }
        }
        RealizationPlan::from_vec_unchecked(r)
    }

    /// Expected utilities `(u_f, u_w)` of a pair of realization plans.
    pub fn expected_utilities(&self, r_f: &[f64], r_w: &[f64]) -> (f64, f64) {
        let g = self.grid;
        let (mut uf, mut uw) = (0.0, 0.0);
        for a in 0..self.m() {
            let p = r_f[self.firm_offer(a)] * r_w[self.worker_accept(a)];
            uf += p * (1.0 - g.action(a));
            uw += p * g.action(a);
            for b in 0..self.m() {
                let q = r_f[self.firm_accept(a, b)] * r_w[self.worker_counter(a, b)];
                uf += q * self.delta * g.action(b);
                uw += q * self.delta * (1.0 - g.action(b));
            }
        }
        (uf, uw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    Root,
    /// Firm's first-round offer `a`.
    Offer(usize),
    /// Worker accepts offer `a`.
    Accept(usize),
    /// Worker rejects `a` and counters `b`.
    RejectCounter(usize, usize),
    /// Firm accepts counter `b` after offering `a`.
    SecondAccept(usize, usize),
    /// Firm rejects counter `b` after offering `a`.
    SecondReject(usize, usize),
}

/// A sequence of one agent; grid actions are stored as indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SequenceIndex {
    pub agent: Agent,
    pub kind: SequenceKind,
}

/// The agent's sequence-form polytope.
///
/// Firm: one root infoset over the offers, then one infoset per (offer, counter)
/// with extensions {accept, reject}. Worker: one infoset per offer, with
/// extensions {accept, counter 0, ..., counter 1}.
pub fn build_treeplex(game: &TwoRoundGame, agent: Agent) -> Treeplex {
    let m = game.m();
    let mut infosets = Vec::new();
    match agent {
        Agent::Firm => {
            infosets.push(Infoset { parent: 0, children: (0..m).map(|a| game.firm_offer(a)).collect() });
            for a in 0..m {
                for b in 0..m {
                    infosets.push(Infoset {
                        parent: game.firm_offer(a),
                        children: vec![game.firm_accept(a, b), game.firm_reject(a, b)],
                    });
                }
            }
        }
        Agent::Worker => {
            for a in 0..m {
                let mut children = vec![game.worker_accept(a)];
                children.extend((0..m).map(|b| game.worker_counter(a, b)));
                infosets.push(Infoset { parent: 0, children });
            }
        }
    }
    Treeplex::new(game.sequence_count(agent), 0, infosets).expect("bargaining tree is well formed")
}

/// One-step utility of every sequence of `agent` against the opponent's plan.
pub fn expected_feedback_g2(agent: Agent, opponent: &RealizationPlan, game: &TwoRoundGame) -> Result<UtilityVector> {
    let r = opponent.values();
    let expect = game.sequence_count(agent.opponent());
    if r.len() != expect {
        return Err(Error::Structural(format!("opponent plan has {} entries, expected {expect}", r.len())));
    }
    let mut out = vec![0.0; game.sequence_count(agent)];
    match agent {
        Agent::Firm => firm_feedback_g2_into(game, r, &mut out),
        Agent::Worker => worker_feedback_g2_into(game, r, &mut out),
    }
    Ok(UtilityVector { values: out })
}

fn clean(x: f64) -> f64 {
    if x > FEEDBACK_ZERO {
        x
    } else {
        0.0
    }
}

pub(crate) fn firm_feedback_g2_into(game: &TwoRoundGame, r_w: &[f64], out: &mut [f64]) {
    let g = game.grid;
    out.fill(0.0);
    for a in 0..game.m() {
        out[game.firm_offer(a)] = (1.0 - g.action(a)) * clean(r_w[game.worker_accept(a)]);
        for b in 0..game.m() {
            out[game.firm_accept(a, b)] = game.delta * g.action(b) * clean(r_w[game.worker_counter(a, b)]);
        }
    }
}

pub(crate) fn worker_feedback_g2_into(game: &TwoRoundGame, r_f: &[f64], out: &mut [f64]) {
    let g = game.grid;
    out.fill(0.0);
    for a in 0..game.m() {
        out[game.worker_accept(a)] = g.action(a) * clean(r_f[game.firm_offer(a)]);
        for b in 0..game.m() {
            out[game.worker_counter(a, b)] = game.delta * (1.0 - g.action(b)) * clean(r_f[game.firm_accept(a, b)]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(d: usize, delta: f64) -> TwoRoundGame {
        TwoRoundGame::new(ActionGrid::new(d).unwrap(), delta).unwrap()
    }

    // Oracle: walk the game tree and collect each agent's action histories.
    fn walk(d: usize) -> (usize, usize) {
        let mut firm = vec![vec![]];
        let mut worker = vec![vec![]];
        for a in 0..=d {
            firm.push(vec![('o', a)]);
            worker.push(vec![('A', a)]);
            for b in 0..=d {
                worker.push(vec![('R', a), ('c', b)]);
                firm.push(vec![('o', a), ('A', b)]);
                firm.push(vec![('o', a), ('R', b)]);
            }
        }
        firm.sort();
        firm.dedup();
        worker.sort();
        worker.dedup();
        (firm.len(), worker.len())
    }

    #[test]
    fn sequence_counts_match_tree_walk() {
        for d in 3..9 {
            let g = game(d, 0.5);
            let (f, w) = walk(d);
            assert_eq!(g.sequence_count(Agent::Firm), f);
            assert_eq!(g.sequence_count(Agent::Worker), w);
            assert_eq!(f, 1 + (d + 1) + 2 * (d + 1) * (d + 1));
            assert_eq!(w, 1 + (d + 1) + (d + 1) * (d + 1));
        }
    }

    #[test]
    fn d5_treeplex_shapes() {
        let g = game(5, 0.9);
        let tf = build_treeplex(&g, Agent::Firm);
        assert_eq!(tf.len() - 1, 78);
        assert_eq!(tf.infosets().len(), 1 + 36);
        let tw = build_treeplex(&g, Agent::Worker);
        assert_eq!(tw.len() - 1, 42);
        assert_eq!(tw.infosets().len(), 6);
        assert!(ActionGrid::new(1).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = game(4, 0.5);
        for agent in [Agent::Firm, Agent::Worker] {
            for i in 0..g.sequence_count(agent) {
                let s = g.sequence(agent, i).unwrap();
                assert_eq!(g.index_of(s).unwrap(), i);
            }
        }
        assert!(g.index_of(SequenceIndex { agent: Agent::Worker, kind: SequenceKind::Offer(0) }).is_err());
    }

    #[test]
    fn fig6_terminal_payoffs() {
        let g = game(5, 0.9);
        // Worker rejects 0.6 and counters 0.2 with probability one.
        let mut r_w = vec![0.0; g.sequence_count(Agent::Worker)];
        r_w[0] = 1.0;
        for a in 0..6 {
            r_w[if a == 3 { g.worker_counter(3, 1) } else { g.worker_accept(a) }] = 1.0;
        }
        let plan = RealizationPlan::from_vec_unchecked(r_w);
        let u = expected_feedback_g2(Agent::Firm, &plan, &g).unwrap();
        assert!((u.values[g.firm_accept(3, 1)] - 0.18).abs() < 1e-15);
        for a in 0..6 {
            for b in 0..6 {
                assert_eq!(u.values[g.firm_reject(a, b)], 0.0);
            }
        }

        let f = g.firm_pure_plan(3, 1);
        let u = expected_feedback_g2(Agent::Worker, &f, &g).unwrap();
        assert!((u.values[g.worker_counter(3, 1)] - 0.72).abs() < 1e-15);
    }

    #[test]
    fn plans_are_feasible() {
        let g = game(5, 0.3);
        let tf = build_treeplex(&g, Agent::Firm);
        let tw = build_treeplex(&g, Agent::Worker);
        for a in 0..6 {
            for t in 0..6 {
                assert!(tf.constraint_violation(g.firm_pure_plan(a, t).values()) == 0.0);
                assert!(tw.constraint_violation(g.worker_pure_plan(a, t).values()) == 0.0);
            }
        }
    }

    #[test]
    fn immediate_acceptance_reduces_to_ultimatum() {
        use crate::games::{expected_feedback_g1, SimplexPoint};
        let grid = ActionGrid::new(5).unwrap();
        for delta in [0.1, 0.9] {
            let g = game(5, delta);
            // Worker accepting everything: the firm's offer feedback is (1 - a).
            let w = g.worker_pure_plan(0, 2);
            let uf = expected_feedback_g2(Agent::Firm, &w, &g).unwrap();
            let g1 = expected_feedback_g1(Agent::Firm, &SimplexPoint::pure(6, 0), grid).unwrap();
            for a in 0..6 {
                assert!((uf.values[g.firm_offer(a)] - g1.values[a]).abs() < 1e-15);
            }
        }
    }
}
