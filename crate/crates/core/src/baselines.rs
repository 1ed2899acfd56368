//! Comparison schedulers: back-pressure routing and the priority rule.
//!
//! The five-operation back-pressure scheme needs no code of its own; it is the
//! deficit max-weight scheduler run on [`Topology::FiveOp`].

use serde::{Deserialize, Serialize};

use crate::rateadapt::ComboSet;
use crate::spn::back_pressure;
use crate::vrnet::{IncOp, Session, Topology, VrState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RoutingBp,
    FiveOpBp,
    FiveOpPriority,
}

/// Session to serve under plain back-pressure routing, with the combo to use.
/// Maximizes `Q_i · p_di / T` over sessions and combos; idle if both queues are empty.
pub fn routing_step(
    backlog: [usize; 2],
    set: &ComboSet,
    quality: usize,
) -> Option<(usize, Session)> {
    let mut best: Option<((usize, Session), f64)> = None;
    for (i, combo) in set.combos().iter().enumerate() {
        let m = combo.reception(quality).marginals();
        for (s, p) in [(Session::One, m.d1), (Session::Two, m.d2)] {
            let w = backlog[s.index()] as f64 * p / combo.duration;
            if backlog[s.index()] > 0 && best.is_none_or(|(_, b)| w > b) {
                best = Some(((i, s), w));
            }
        }
    }
    best.map(|(choice, _)| choice)
}

/// Feasible `(combo, op)` with the largest actual-queue pressure per second,
/// searching only `candidates`. Lowest combo then op wins ties.
pub fn largest_actual_pressure(
    vr: &VrState,
    topology: Topology,
    set: &ComboSet,
    quality: usize,
    candidates: &[IncOp],
) -> Option<(usize, IncOp)> {
    let lengths = vr.lengths();
    let q: Vec<f64> = topology.queues().iter().map(|q| lengths[q.index()] as f64).collect();
    let mut best: Option<((usize, IncOp), f64)> = None;
    for i in 0..set.len() {
        let inst = set.instance(i);
        let c = set.condition(i, quality);
        let d = back_pressure(&q, inst.b_in(c), inst.b_out(c));
        for (n, &op) in topology.ops().iter().enumerate() {
            if !candidates.contains(&op) || !vr.is_feasible(op) {
                continue;
            }
            let w = d[n] / set.combo(i).duration;
            if best.is_none_or(|(_, b)| w > b) {
                best = Some(((i, op), w));
            }
        }
    }
    best.map(|(choice, _)| choice)
}

/// Classic XOR whenever possible, otherwise the feasible five-operation
/// choice with the largest actual-queue pressure; idle if nothing is feasible.
pub fn priority_step(vr: &VrState, set: &ComboSet, quality: usize) -> Option<(usize, IncOp)> {
    let ops = Topology::FiveOp.ops();
    if vr.is_feasible(IncOp::Cx) {
        return largest_actual_pressure(vr, Topology::FiveOp, set, quality, &[IncOp::Cx]);
    }
    largest_actual_pressure(vr, Topology::FiveOp, set, quality, ops)
}
