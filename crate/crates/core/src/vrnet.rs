//! The virtual network of the seven-operation coding scheme.
//!
//! Five FIFO queues hold virtual packets classified by who has heard them:
//! `[Q1∅, Q2∅, Q1{2}, Q2{1}, Qmix]`. Each coding operation is a service
//! activity that moves packets between these queues depending on the
//! reception status of the transmission. This module never touches payloads;
//! every packet movement is reported through a [`MovementLog`].

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{ReceptionStatus, ReceptionVector, Receiver};
use crate::error::VrError;
use crate::spn::{ServiceMatrix, SpnInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Session {
    One,
    Two,
}

impl Session {
    pub const BOTH: [Session; 2] = [Session::One, Session::Two];

    pub fn other(self) -> Session {
        match self {
            Session::One => Session::Two,
            Session::Two => Session::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Session::One => 0,
            Session::Two => 1,
        }
    }

    /// The destination that wants this session's packets.
    pub fn destination(self) -> Receiver {
        match self {
            Session::One => Receiver::D1,
            Session::Two => Receiver::D2,
        }
    }

    pub fn of_receiver(r: Receiver) -> Session {
        match r {
            Receiver::D1 => Session::One,
            Receiver::D2 => Session::Two,
        }
    }
}

/// Session plus a per-session sequence number starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PacketId {
    pub session: Session,
    pub index: u64,
}

impl PacketId {
    pub fn new(session: Session, index: u64) -> Self {
        Self { session, index }
    }

    pub fn x(index: u64) -> Self {
        Self::new(Session::One, index)
    }

    pub fn y(index: u64) -> Self {
        Self::new(Session::Two, index)
    }
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.session {
            Session::One => write!(f, "X{}", self.index),
            Session::Two => write!(f, "Y{}", self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    Native,
    /// Placed into an overheard queue by reactive coding.
    RcInserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VrPacket {
    pub id: PacketId,
    pub origin: Origin,
}

/// A premixed pair together with the reception status of its XOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MixTuple {
    pub rcpt_star: ReceptionStatus,
    pub x: VrPacket,
    pub y: VrPacket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueueId {
    Q1Empty,
    Q2Empty,
    Q1Over2,
    Q2Over1,
    Mix,
}

impl QueueId {
    pub const ALL: [QueueId; 5] =
        [Self::Q1Empty, Self::Q2Empty, Self::Q1Over2, Self::Q2Over1, Self::Mix];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Q1Empty => "Q1_0",
            Self::Q2Empty => "Q2_0",
            Self::Q1Over2 => "Q1_2",
            Self::Q2Over1 => "Q2_1",
            Self::Mix => "Qmix",
        }
    }

    /// Queue of never-heard packets of a session.
    pub fn fresh(session: Session) -> QueueId {
        match session {
            Session::One => Self::Q1Empty,
            Session::Two => Self::Q2Empty,
        }
    }

    /// Queue of packets for `session` overheard by the other destination.
    pub fn overheard(session: Session) -> QueueId {
        match session {
            Session::One => Self::Q1Over2,
            Session::Two => Self::Q2Over1,
        }
    }
}

/// The seven coding operations, in matrix column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IncOp {
    Nc1,
    Nc2,
    Dx1,
    Dx2,
    Pm,
    Rc,
    Cx,
}

impl IncOp {
    pub const ALL: [IncOp; 7] =
        [Self::Nc1, Self::Nc2, Self::Dx1, Self::Dx2, Self::Pm, Self::Rc, Self::Cx];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Nc1 => "NC1",
            Self::Nc2 => "NC2",
            Self::Dx1 => "DX1",
            Self::Dx2 => "DX2",
            Self::Pm => "PM",
            Self::Rc => "RC",
            Self::Cx => "CX",
        }
    }

    pub fn non_coding(session: Session) -> IncOp {
        match session {
            Session::One => Self::Nc1,
            Session::Two => Self::Nc2,
        }
    }

    pub fn degenerate(session: Session) -> IncOp {
        match session {
            Session::One => Self::Dx1,
            Session::Two => Self::Dx2,
        }
    }

    pub fn inputs(self) -> &'static [QueueId] {
        use QueueId::*;
        match self {
            Self::Nc1 => &[Q1Empty],
            Self::Nc2 => &[Q2Empty],
            Self::Dx1 => &[Q1Over2],
            Self::Dx2 => &[Q2Over1],
            Self::Pm => &[Q1Empty, Q2Empty],
            Self::Rc => &[Mix],
            Self::Cx => &[Q1Over2, Q2Over1],
        }
    }

    pub fn outputs(self) -> &'static [QueueId] {
        use QueueId::*;
        match self {
            Self::Nc1 => &[Q1Over2],
            Self::Nc2 => &[Q2Over1],
            Self::Pm => &[Mix],
            Self::Rc => &[Q1Over2, Q2Over1],
            Self::Dx1 | Self::Dx2 | Self::Cx => &[],
        }
    }
}

/// Which member of a mixed pair reactive coding sends or moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RcPick {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveDecision {
    Stay,
    Leave,
    ToQ1Over2(RcPick),
    ToQ2Over1(RcPick),
}

/// Packet sent by reactive coding for a tuple whose XOR had reception `rcpt_star`.
pub fn rc_transmit_choice(rcpt_star: ReceptionStatus) -> Result<RcPick, VrError> {
    match rcpt_star {
        ReceptionStatus::None => Err(VrError::NoReception),
        ReceptionStatus::D1Only => Ok(RcPick::Y),
        ReceptionStatus::D2Only | ReceptionStatus::Both => Ok(RcPick::X),
    }
}

/// Movement of a mixed tuple under reactive coding.
///
/// `rcpt_star` is the reception of the original XOR, `rcpt_now` that of the
/// reactive transmission. A packet moved to an overheard queue is known by one
/// destination and, combined with the stored XOR, carries what the other
/// destination still lacks.
pub fn reactive_move(
    rcpt_star: ReceptionStatus,
    rcpt_now: ReceptionStatus,
) -> Result<MoveDecision, VrError> {
    use ReceptionStatus::*;
    if rcpt_star == None {
        return Err(VrError::NoReception);
    }
    Ok(match rcpt_now {
        None => MoveDecision::Stay,
        Both => MoveDecision::Leave,
        D1Only => match rcpt_star {
            D2Only => MoveDecision::ToQ2Over1(RcPick::X),
            _ => MoveDecision::ToQ2Over1(RcPick::Y),
        },
        D2Only => match rcpt_star {
            D1Only => MoveDecision::ToQ1Over2(RcPick::Y),
            _ => MoveDecision::ToQ1Over2(RcPick::X),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Destination {
    Queue(QueueId),
    /// Left the virtual network: delivered, or made redundant by a delivery.
    Departed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Movement {
    pub packet: PacketId,
    pub from: QueueId,
    pub to: Destination,
}

/// Everything one operation moved, for the packet plane and for traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovementLog {
    pub op: IncOp,
    pub rcpt: ReceptionStatus,
    pub moves: Vec<Movement>,
}

impl MovementLog {
    fn new(op: IncOp, rcpt: ReceptionStatus) -> Self {
        Self { op, rcpt, moves: Vec::new() }
    }

    fn push(&mut self, packet: PacketId, from: QueueId, to: Destination) {
        self.moves.push(Movement { packet, from, to });
    }

    pub fn departures(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.moves.iter().filter(|m| m.to == Destination::Departed).map(|m| m.packet)
    }

    /// One CSV line per movement: `slot,op,rcpt,packet,from,to`.
    pub fn trace_lines(&self, slot: u64) -> Vec<String> {
        self.moves
            .iter()
            .map(|m| {
                let to = match m.to {
                    Destination::Queue(q) => q.name(),
                    Destination::Departed => "departed",
                };
                format!(
                    "{slot},{},{},{},{},{to}",
                    self.op.name(),
                    self.rcpt.short_name(),
                    m.packet,
                    m.from.name()
                )
            })
            .collect()
    }
}

/// Queue heads an operation would act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpHeads {
    Single(VrPacket),
    /// `(from Q1-side queue, from Q2-side queue)`
    Pair(VrPacket, VrPacket),
    Tuple(MixTuple),
}

/// Realized 0/1 consumption and production of one activation, per queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RealizedService {
    pub consumed: [u8; 5],
    pub produced: [u8; 5],
}

/// Realized service of `op` under reception `rcpt`, in queue order.
pub fn realized_service(op: IncOp, rcpt: ReceptionStatus) -> RealizedService {
    use QueueId::*;
    let mut r = RealizedService::default();
    let mut consume = |q: QueueId, hit: bool| r.consumed[q.index()] = hit as u8;
    match op {
        IncOp::Nc1 => consume(Q1Empty, rcpt.any()),
        IncOp::Nc2 => consume(Q2Empty, rcpt.any()),
        IncOp::Dx1 => consume(Q1Over2, rcpt.d1()),
        IncOp::Dx2 => consume(Q2Over1, rcpt.d2()),
        IncOp::Pm => {
            consume(Q1Empty, rcpt.any());
            consume(Q2Empty, rcpt.any());
        }
        IncOp::Rc => consume(Mix, rcpt.any()),
        IncOp::Cx => {
            consume(Q1Over2, rcpt.d1());
            consume(Q2Over1, rcpt.d2());
        }
    }
    let d1_only = (rcpt == ReceptionStatus::D1Only) as u8;
    let d2_only = (rcpt == ReceptionStatus::D2Only) as u8;
    match op {
        IncOp::Nc1 => r.produced[Q1Over2.index()] = d2_only,
        IncOp::Nc2 => r.produced[Q2Over1.index()] = d1_only,
        IncOp::Pm => r.produced[Mix.index()] = rcpt.any() as u8,
        IncOp::Rc => {
            r.produced[Q1Over2.index()] = d2_only;
            r.produced[Q2Over1.index()] = d1_only;
        }
        _ => {}
    }
    r
}

/// Expected per-activation consumption and production, 5 queues by 7 operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceMatrices {
    pub b_in: [[f64; 7]; 5],
    pub b_out: [[f64; 7]; 5],
}

impl ServiceMatrices {
    pub fn b_in(&self, q: QueueId, op: IncOp) -> f64 {
        self.b_in[q.index()][op.index()]
    }

    pub fn b_out(&self, q: QueueId, op: IncOp) -> f64 {
        self.b_out[q.index()][op.index()]
    }
}

/// Expected service matrices of the seven-operation network under reception vector `p`.
pub fn build_matrices(p: &ReceptionVector) -> ServiceMatrices {
    use IncOp::*;
    use QueueId::*;
    let m = p.marginals();
    let d1_only = p.prob(ReceptionStatus::D1Only);
    let d2_only = p.prob(ReceptionStatus::D2Only);
    let mut b_in = [[0.0; 7]; 5];
    let mut b_out = [[0.0; 7]; 5];
    let mut set_in = |q: QueueId, op: IncOp, v: f64| b_in[q.index()][op.index()] = v;
    set_in(Q1Empty, Nc1, m.either);
    set_in(Q2Empty, Nc2, m.either);
    set_in(Q1Over2, Dx1, m.d1);
    set_in(Q2Over1, Dx2, m.d2);
    set_in(Q1Empty, Pm, m.either);
    set_in(Q2Empty, Pm, m.either);
    set_in(Mix, Rc, m.either);
    set_in(Q1Over2, Cx, m.d1);
    set_in(Q2Over1, Cx, m.d2);
    let mut set_out = |q: QueueId, op: IncOp, v: f64| b_out[q.index()][op.index()] = v;
    set_out(Q1Over2, Nc1, d2_only);
    set_out(Q2Over1, Nc2, d1_only);
    set_out(Mix, Pm, m.either);
    set_out(Q1Over2, Rc, d2_only);
    set_out(Q2Over1, Rc, d1_only);
    ServiceMatrices { b_in, b_out }
}

/// Which operation set (and hence which virtual network) a scheme schedules over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    /// All seven operations, five queues.
    SevenOp,
    /// NC1, NC2, DX1, DX2, CX over the four non-mix queues.
    FiveOp,
}

impl Topology {
    pub fn ops(self) -> &'static [IncOp] {
        use IncOp::*;
        match self {
            Topology::SevenOp => &IncOp::ALL,
            Topology::FiveOp => &[Nc1, Nc2, Dx1, Dx2, Cx],
        }
    }

    pub fn queues(self) -> &'static [QueueId] {
        use QueueId::*;
        match self {
            Topology::SevenOp => &QueueId::ALL,
            Topology::FiveOp => &[Q1Empty, Q2Empty, Q1Over2, Q2Over1],
        }
    }

    /// Restricts the full matrices to this topology's rows and columns.
    pub fn restrict(self, m: &ServiceMatrices) -> (ServiceMatrix, ServiceMatrix) {
        let (qs, ops) = (self.queues(), self.ops());
        let mut b_in = ServiceMatrix::zeros(qs.len(), ops.len());
        let mut b_out = ServiceMatrix::zeros(qs.len(), ops.len());
        for (k, q) in qs.iter().enumerate() {
            for (n, op) in ops.iter().enumerate() {
                b_in.set(k, n, m.b_in(*q, *op));
                b_out.set(k, n, m.b_out(*q, *op));
            }
        }
        (b_in, b_out)
    }

    /// The (0,1) random SPN of this network, one condition per reception vector.
    pub fn spn_instance(self, conditions: &[ReceptionVector]) -> SpnInstance {
        let (qs, ops) = (self.queues(), self.ops());
        let pos = |q: &QueueId| qs.iter().position(|x| x == q).expect("queue in topology");
        let in_sets = ops.iter().map(|op| op.inputs().iter().map(pos).collect()).collect();
        let out_sets = ops.iter().map(|op| op.outputs().iter().map(pos).collect()).collect();
        let mut input = vec![vec![0u32; 2]; qs.len()];
        input[pos(&QueueId::Q1Empty)][0] = 1;
        input[pos(&QueueId::Q2Empty)][1] = 1;
        let matrices = conditions.iter().map(|p| self.restrict(&build_matrices(p))).collect();
        SpnInstance::new(input, in_sets, out_sets, matrices)
            .expect("virtual network is a valid acyclic SPN")
    }

    /// Row-restricted realization of an activation.
    pub fn realized(self, op: IncOp, rcpt: ReceptionStatus) -> (Vec<u8>, Vec<u8>) {
        let r = realized_service(op, rcpt);
        let qs = self.queues();
        (
            qs.iter().map(|q| r.consumed[q.index()]).collect(),
            qs.iter().map(|q| r.produced[q.index()]).collect(),
        )
    }
}

/// The source's virtual queues.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VrState {
    singles: [VecDeque<VrPacket>; 4],
    mix: VecDeque<MixTuple>,
    locations: HashMap<PacketId, QueueId>,
}

impl VrState {
    pub fn new() -> Self {
        Self::default()
    }

    /// A new packet enters its session's never-heard queue.
    pub fn push_arrival(&mut self, id: PacketId) {
        let q = QueueId::fresh(id.session);
        self.push(q, VrPacket { id, origin: Origin::Native });
    }

    pub fn len(&self, q: QueueId) -> usize {
        match q {
            QueueId::Mix => self.mix.len(),
            _ => self.singles[q.index()].len(),
        }
    }

    pub fn lengths(&self) -> [usize; 5] {
        QueueId::ALL.map(|q| self.len(q))
    }

    pub fn is_empty(&self) -> bool {
        self.lengths().iter().all(|&l| l == 0)
    }

    /// Total queue occupancy with each mixed tuple counted once.
    pub fn backlog(&self) -> usize {
        self.lengths().iter().sum()
    }

    /// Number of packets the network still owes, tuples counting once per session.
    pub fn presence(&self) -> usize {
        self.backlog() + self.mix.len()
    }

    /// Occupancy of the queues that belong to `session` (Qmix belongs to both).
    pub fn session_presence(&self, session: Session) -> usize {
        self.len(QueueId::fresh(session)) + self.len(QueueId::overheard(session)) + self.mix.len()
    }

    pub fn location(&self, id: PacketId) -> Option<QueueId> {
        self.locations.get(&id).copied()
    }

    pub fn packets(&self, q: QueueId) -> impl Iterator<Item = &VrPacket> {
        let slice = match q {
            QueueId::Mix => None,
            _ => Some(&self.singles[q.index()]),
        };
        slice.into_iter().flatten()
    }

    pub fn mix(&self) -> impl Iterator<Item = &MixTuple> {
        self.mix.iter()
    }

    /// Packets the source must keep for `session`: its own queues, plus its
    /// member of every mixed tuple.
    pub fn session_buffer(&self, session: Session) -> Vec<PacketId> {
        let mut ids: Vec<PacketId> = self
            .packets(QueueId::fresh(session))
            .chain(self.packets(QueueId::overheard(session)))
            .map(|p| p.id)
            .collect();
        ids.extend(self.mix.iter().map(|t| match session {
            Session::One => t.x.id,
            Session::Two => t.y.id,
        }));
        ids
    }

    pub fn is_feasible(&self, op: IncOp) -> bool {
        op.inputs().iter().all(|q| self.len(*q) >= 1)
    }

    pub fn feasible_ops(&self) -> Vec<IncOp> {
        IncOp::ALL.into_iter().filter(|op| self.is_feasible(*op)).collect()
    }

    pub fn heads(&self, op: IncOp) -> Option<OpHeads> {
        let front = |q: QueueId| self.singles[q.index()].front().copied();
        use QueueId::*;
        match op {
            IncOp::Nc1 => front(Q1Empty).map(OpHeads::Single),
            IncOp::Nc2 => front(Q2Empty).map(OpHeads::Single),
            IncOp::Dx1 => front(Q1Over2).map(OpHeads::Single),
            IncOp::Dx2 => front(Q2Over1).map(OpHeads::Single),
            IncOp::Pm => Some(OpHeads::Pair(front(Q1Empty)?, front(Q2Empty)?)),
            IncOp::Cx => Some(OpHeads::Pair(front(Q1Over2)?, front(Q2Over1)?)),
            IncOp::Rc => self.mix.front().copied().map(OpHeads::Tuple),
        }
    }

    fn push(&mut self, q: QueueId, pkt: VrPacket) {
        debug_assert!(q != QueueId::Mix);
        self.locations.insert(pkt.id, q);
        self.singles[q.index()].push_back(pkt);
    }

    fn pop(&mut self, q: QueueId) -> VrPacket {
        let pkt = self.singles[q.index()].pop_front().expect("feasibility checked");
        self.locations.remove(&pkt.id);
        pkt
    }

    fn depart(&mut self, q: QueueId, log: &mut MovementLog) {
        let pkt = self.pop(q);
        log.push(pkt.id, q, Destination::Departed);
    }

    fn shift(&mut self, from: QueueId, to: QueueId, log: &mut MovementLog) {
        let pkt = self.pop(from);
        self.push(to, pkt);
        log.push(pkt.id, from, Destination::Queue(to));
    }

    /// Executes `op` with reception `rcpt` and returns the packet movements.
    pub fn apply_op(&mut self, op: IncOp, rcpt: ReceptionStatus) -> Result<MovementLog, VrError> {
        if !self.is_feasible(op) {
            return Err(VrError::Infeasible(op));
        }
        let mut log = MovementLog::new(op, rcpt);
        match op {
            IncOp::Nc1 => self.non_coding(Session::One, rcpt, &mut log),
            IncOp::Nc2 => self.non_coding(Session::Two, rcpt, &mut log),
            IncOp::Dx1 => self.degenerate(Session::One, rcpt, &mut log),
            IncOp::Dx2 => self.degenerate(Session::Two, rcpt, &mut log),
            IncOp::Cx => {
                self.degenerate(Session::One, rcpt, &mut log);
                self.degenerate(Session::Two, rcpt, &mut log);
            }
            IncOp::Pm => {
                if rcpt.any() {
                    let x = self.pop(QueueId::Q1Empty);
                    let y = self.pop(QueueId::Q2Empty);
                    self.locations.insert(x.id, QueueId::Mix);
                    self.locations.insert(y.id, QueueId::Mix);
                    self.mix.push_back(MixTuple { rcpt_star: rcpt, x, y });
                    log.push(x.id, QueueId::Q1Empty, Destination::Queue(QueueId::Mix));
                    log.push(y.id, QueueId::Q2Empty, Destination::Queue(QueueId::Mix));
                }
            }
            IncOp::Rc => {
                let tuple = *self.mix.front().expect("feasibility checked");
                let decision = reactive_move(tuple.rcpt_star, rcpt)?;
                if decision != MoveDecision::Stay {
                    self.mix.pop_front();
                    self.locations.remove(&tuple.x.id);
                    self.locations.remove(&tuple.y.id);
                }
                let (moved, to) = match decision {
                    MoveDecision::Stay => return Ok(log),
                    MoveDecision::Leave => (None, None),
                    MoveDecision::ToQ1Over2(pick) => (Some(pick), Some(QueueId::Q1Over2)),
                    MoveDecision::ToQ2Over1(pick) => (Some(pick), Some(QueueId::Q2Over1)),
                };
                for (pick, pkt) in [(RcPick::X, tuple.x), (RcPick::Y, tuple.y)] {
                    match (moved, to) {
                        (Some(m), Some(q)) if m == pick => {
                            self.push(q, VrPacket { id: pkt.id, origin: Origin::RcInserted });
                            log.push(pkt.id, QueueId::Mix, Destination::Queue(q));
                        }
                        _ => log.push(pkt.id, QueueId::Mix, Destination::Departed),
                    }
                }
            }
        }
        Ok(log)
    }

    fn non_coding(&mut self, s: Session, rcpt: ReceptionStatus, log: &mut MovementLog) {
        let src = QueueId::fresh(s);
        if rcpt.received_by(s.destination()) {
            self.depart(src, log);
        } else if rcpt.received_by(s.other().destination()) {
            self.shift(src, QueueId::overheard(s), log);
        }
    }

    fn degenerate(&mut self, s: Session, rcpt: ReceptionStatus, log: &mut MovementLog) {
        if rcpt.received_by(s.destination()) {
            self.depart(QueueId::overheard(s), log);
        }
    }

    /// Plain retransmit-until-received service of a session's head packet.
    /// Only the never-heard queues are used.
    pub fn apply_routing(
        &mut self,
        session: Session,
        rcpt: ReceptionStatus,
    ) -> Result<MovementLog, VrError> {
        let op = IncOp::non_coding(session);
        if !self.is_feasible(op) {
            return Err(VrError::Infeasible(op));
        }
        let mut log = MovementLog::new(op, rcpt);
        if rcpt.received_by(session.destination()) {
            self.depart(QueueId::fresh(session), &mut log);
        }
        Ok(log)
    }
}

/// Expected deliveries of the best policy over `slots` (known reception vectors
/// per slot), using only operations of `topology`. Exhaustive expectimax over
/// the event tree; a delivery is a unit drop in network presence.
pub fn best_expected_deliveries(
    topology: Topology,
    state: &VrState,
    slots: &[ReceptionVector],
) -> f64 {
    let Some((p, rest)) = slots.split_first() else {
        return 0.0;
    };
    let mut best = best_expected_deliveries(topology, state, rest);
    for &op in topology.ops() {
        if !state.is_feasible(op) {
            continue;
        }
        let value: f64 = ReceptionStatus::ALL
            .iter()
            .filter(|s| p.prob(**s) > 0.0)
            .map(|&s| {
                let mut next = state.clone();
                next.apply_op(op, s).expect("feasible");
                let delivered = (state.presence() - next.presence()) as f64;
                p.prob(s) * (delivered + best_expected_deliveries(topology, &next, rest))
            })
            .sum();
        best = best.max(value);
    }
    best
}

/// Expected deliveries of a fixed policy mapping (state, slot number) to an operation.
pub fn expected_deliveries_under<F>(state: &VrState, slots: &[ReceptionVector], policy: &F) -> f64
where
    F: Fn(&VrState, usize) -> Option<IncOp>,
{
    fn go<F: Fn(&VrState, usize) -> Option<IncOp>>(
        state: &VrState,
        slots: &[ReceptionVector],
        t: usize,
        policy: &F,
    ) -> f64 {
        let Some((p, rest)) = slots.split_first() else {
            return 0.0;
        };
        let Some(op) = policy(state, t).filter(|op| state.is_feasible(*op)) else {
            return go(state, rest, t + 1, policy);
        };
        ReceptionStatus::ALL
            .iter()
            .filter(|s| p.prob(**s) > 0.0)
            .map(|&s| {
                let mut next = state.clone();
                next.apply_op(op, s).expect("feasible");
                let delivered = (state.presence() - next.presence()) as f64;
                p.prob(s) * (delivered + go(&next, rest, t + 1, policy))
            })
            .sum()
    }
    go(state, slots, 0, policy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSlotOracle {
    pub five_op: f64,
    pub seven_op: f64,
}

/// One X and one Y at the source; slot 1 splits receptions evenly between the
/// destinations, slot 2 reaches both.
pub fn two_slot_example() -> (VrState, [ReceptionVector; 2]) {
    let mut state = VrState::new();
    state.push_arrival(PacketId::x(1));
    state.push_arrival(PacketId::y(1));
    let slots = [
        ReceptionVector::from_array([0.0, 0.5, 0.5, 0.0]).expect("valid"),
        ReceptionVector::from_array([0.0, 0.0, 0.0, 1.0]).expect("valid"),
    ];
    (state, slots)
}

pub fn two_slot_oracle() -> TwoSlotOracle {
    let (state, slots) = two_slot_example();
    TwoSlotOracle {
        five_op: best_expected_deliveries(Topology::FiveOp, &state, &slots),
        seven_op: best_expected_deliveries(Topology::SevenOp, &state, &slots),
    }
}
