//! Packet plane: payloads, on-air packets, receiver decoding and buffer
//! pruning, plus an independent decodability oracle.

use std::collections::{BTreeSet, HashMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::Receiver;
use crate::error::CodecError;
use crate::vrnet::{
    rc_transmit_choice, Destination, IncOp, MovementLog, OpHeads, PacketId, QueueId, RcPick,
    Session, VrState,
};

pub const DEFAULT_PAYLOAD_LEN: usize = 16;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Payload(Box<[u8]>);

impl std::fmt::Debug for Payload {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.0.iter() {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl Payload {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len].into_boxed_slice())
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn xor(&self, other: &Payload) -> Payload {
        assert_eq!(self.len(), other.len(), "payload lengths differ");
        Payload(self.0.iter().zip(other.0.iter()).map(|(a, b)| a ^ b).collect())
    }
}

/// Deterministic content of packet `id` for a trial seeded with `seed`.
/// Each session reads its own keystream at an offset given by the index,
/// so any packet can be regenerated independently.
pub fn payload_for(seed: u64, id: PacketId, len: usize) -> Payload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(16 + id.session.index() as u64);
    let words = len.div_ceil(4) as u128;
    rng.set_word_pos(id.index as u128 * words);
    let mut buf = vec![0u8; len];
    rng.fill_bytes(&mut buf);
    Payload(buf.into_boxed_slice())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WireIds {
    Uncoded(PacketId),
    /// For PM the order is (X, Y); for CX it is (Q1{2} head, Q2{1} head).
    Xor(PacketId, PacketId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WirePacket {
    pub op: IncOp,
    pub ids: WireIds,
    pub payload: Payload,
}

/// Source-side payload store: exactly the packets present in the virtual network.
#[derive(Debug, Clone, Default)]
pub struct SourceBuffers {
    payloads: HashMap<PacketId, Payload>,
}

impl SourceBuffers {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: PacketId, payload: Payload) {
        self.payloads.insert(id, payload);
    }

    pub fn get(&self, id: PacketId) -> Result<&Payload, CodecError> {
        self.payloads.get(&id).ok_or(CodecError::MissingPayload(id))
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    /// Drops payloads of packets that left the network.
    pub fn apply_log(&mut self, log: &MovementLog) {
        for id in log.departures() {
            self.payloads.remove(&id);
        }
    }

    /// Payload-level encoding of an operation on the given heads.
    pub fn encode(&self, op: IncOp, heads: Option<OpHeads>) -> Result<WirePacket, CodecError> {
        let heads = heads.ok_or(CodecError::MissingHeads(op))?;
        let (ids, payload) = match heads {
            OpHeads::Single(p) => (WireIds::Uncoded(p.id), self.get(p.id)?.clone()),
            OpHeads::Pair(a, b) => {
                (WireIds::Xor(a.id, b.id), self.get(a.id)?.xor(self.get(b.id)?))
            }
            OpHeads::Tuple(t) => {
                let pick = rc_transmit_choice(t.rcpt_star).map_err(|_| CodecError::MissingHeads(op))?;
                let id = match pick {
                    RcPick::X => t.x.id,
                    RcPick::Y => t.y.id,
                };
                (WireIds::Uncoded(id), self.get(id)?.clone())
            }
        };
        Ok(WirePacket { op, ids, payload })
    }
}

/// Where a packet currently sits in the virtual network, for pruning.
pub trait QueueMembership {
    fn location(&self, id: PacketId) -> Option<QueueId>;
}

impl QueueMembership for VrState {
    fn location(&self, id: PacketId) -> Option<QueueId> {
        VrState::location(self, id)
    }
}

/// Membership built from explicit id lists, as sent over the feedback link.
#[derive(Debug, Clone, Default)]
pub struct ListMembership(HashMap<PacketId, QueueId>);

impl ListMembership {
    /// `mix` lists the (x, y) pair of every tuple in Qmix.
    pub fn new(q1_over2: &[PacketId], q2_over1: &[PacketId], mix: &[(PacketId, PacketId)]) -> Self {
        let mut m = HashMap::new();
        m.extend(q1_over2.iter().map(|&id| (id, QueueId::Q1Over2)));
        m.extend(q2_over1.iter().map(|&id| (id, QueueId::Q2Over1)));
        for &(x, y) in mix {
            m.insert(x, QueueId::Mix);
            m.insert(y, QueueId::Mix);
        }
        Self(m)
    }
}

impl QueueMembership for ListMembership {
    fn location(&self, id: PacketId) -> Option<QueueId> {
        self.0.get(&id).copied()
    }
}

type SumKey = (PacketId, PacketId);

/// Decoder and buffer of one destination.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    receiver: Receiver,
    session: Session,
    uncoded: HashMap<PacketId, Payload>,
    sums: HashMap<SumKey, Payload>,
    sum_of: HashMap<PacketId, SumKey>,
    delivered: HashSet<u64>,
    next_in_order: u64,
    delivered_count: u64,
    payload_len: usize,
    /// Entries stored since the last prune.
    fresh: Vec<PacketId>,
}

impl ReceiverState {
    pub fn new(receiver: Receiver, payload_len: usize) -> Self {
        Self {
            receiver,
            session: Session::of_receiver(receiver),
            uncoded: HashMap::new(),
            sums: HashMap::new(),
            sum_of: HashMap::new(),
            delivered: HashSet::new(),
            next_in_order: 1,
            delivered_count: 0,
            payload_len,
            fresh: Vec::new(),
        }
    }

    pub fn receiver(&self) -> Receiver {
        self.receiver
    }

    fn name(&self) -> &'static str {
        match self.receiver {
            Receiver::D1 => "d1",
            Receiver::D2 => "d2",
        }
    }

    fn violation(&self, detail: String) -> CodecError {
        CodecError::ProtocolViolation { receiver: self.name(), detail }
    }

    /// Packets held: overheard uncoded packets plus pending sums.
    pub fn buffer_len(&self) -> usize {
        self.uncoded.len() + self.sums.len()
    }

    pub fn buffer_bytes(&self) -> usize {
        self.buffer_len() * self.payload_len
    }

    pub fn delivered_count(&self) -> u64 {
        self.delivered_count
    }

    /// Every own-session packet with index below this has been delivered.
    pub fn decoded_prefix(&self) -> u64 {
        self.next_in_order - 1
    }

    pub fn is_delivered(&self, id: PacketId) -> bool {
        id.session == self.session
            && (id.index < self.next_in_order || self.delivered.contains(&id.index))
    }

    pub fn holds_sum(&self, a: PacketId) -> bool {
        self.sum_of.contains_key(&a)
    }

    pub fn holds_uncoded(&self, id: PacketId) -> bool {
        self.uncoded.contains_key(&id)
    }

    fn deliver(
        &mut self,
        id: PacketId,
        payload: Payload,
        out: &mut Vec<(PacketId, Payload)>,
    ) -> Result<(), CodecError> {
        if self.is_delivered(id) {
            return Err(self.violation(format!("duplicate delivery of {id}")));
        }
        self.delivered.insert(id.index);
        while self.delivered.remove(&self.next_in_order) {
            self.next_in_order += 1;
        }
        self.delivered_count += 1;
        out.push((id, payload));
        Ok(())
    }

    fn store_uncoded(&mut self, id: PacketId, payload: Payload) {
        self.fresh.push(id);
        self.uncoded.insert(id, payload);
    }

    fn store_sum(&mut self, x: PacketId, y: PacketId, payload: Payload) {
        self.fresh.push(x);
        let key = (x, y);
        self.sum_of.insert(x, key);
        self.sum_of.insert(y, key);
        self.sums.insert(key, payload);
    }

    fn take_sum(&mut self, member: PacketId) -> Option<(PacketId, Payload)> {
        let key = self.sum_of.remove(&member)?;
        let partner = if key.0 == member { key.1 } else { key.0 };
        self.sum_of.remove(&partner);
        let payload = self.sums.remove(&key).expect("index consistent");
        Some((partner, payload))
    }

    /// Recovers own packet from a sum holding `other`, whose value is known.
    fn decode_via_sum(
        &mut self,
        other: PacketId,
        other_payload: &Payload,
        out: &mut Vec<(PacketId, Payload)>,
    ) -> Result<(), CodecError> {
        let Some((own, sum)) = self.take_sum(other) else {
            return Err(self.violation(format!("no stored sum containing {other}")));
        };
        self.deliver(own, sum.xor(other_payload), out)
    }

    /// A packet from the receiver's own overheard queue.
    fn own_overheard(
        &mut self,
        id: PacketId,
        payload: Payload,
        out: &mut Vec<(PacketId, Payload)>,
    ) -> Result<(), CodecError> {
        if id.session == self.session {
            self.deliver(id, payload, out)
        } else {
            self.decode_via_sum(id, &payload, out)
        }
    }

    /// Processes one successfully received packet; returns newly delivered packets.
    pub fn ingest(&mut self, pkt: &WirePacket) -> Result<Vec<(PacketId, Payload)>, CodecError> {
        let mut out = Vec::new();
        let own = self.session;
        match (pkt.op, pkt.ids) {
            (IncOp::Nc1 | IncOp::Nc2, WireIds::Uncoded(id)) => {
                if id.session == own {
                    self.deliver(id, pkt.payload.clone(), &mut out)?;
                } else {
                    self.store_uncoded(id, pkt.payload.clone());
                }
            }
            (IncOp::Pm, WireIds::Xor(x, y)) => self.store_sum(x, y, pkt.payload.clone()),
            (IncOp::Rc, WireIds::Uncoded(id)) => {
                if id.session == own {
                    self.deliver(id, pkt.payload.clone(), &mut out)?;
                    match self.take_sum(id) {
                        Some((other, sum)) => {
                            self.store_uncoded(other, sum.xor(&pkt.payload));
                        }
                        None => {
                            self.store_uncoded(id, pkt.payload.clone());
                        }
                    }
                } else {
                    self.decode_via_sum(id, &pkt.payload, &mut out)?;
                    self.store_uncoded(id, pkt.payload.clone());
                }
            }
            (IncOp::Dx1 | IncOp::Dx2, WireIds::Uncoded(id)) => {
                if pkt.op == IncOp::degenerate(own) {
                    self.own_overheard(id, pkt.payload.clone(), &mut out)?;
                } else if !self.uncoded.contains_key(&id) && !self.is_delivered(id) {
                    return Err(self.violation(format!("{} packet {id} was never overheard", pkt.op.name())));
                }
            }
            (IncOp::Cx, WireIds::Xor(a, b)) => {
                let (mine, cross) = match own {
                    Session::One => (a, b),
                    Session::Two => (b, a),
                };
                let Some(known) = self.uncoded.get(&cross) else {
                    return Err(self.violation(format!("cannot strip {cross} from CX")));
                };
                let payload = pkt.payload.xor(known);
                self.own_overheard(mine, payload, &mut out)?;
            }
            (op, ids) => return Err(self.violation(format!("{} cannot carry {ids:?}", op.name()))),
        }
        Ok(out)
    }

    fn keep_uncoded<M: QueueMembership>(&self, vr: &M, id: PacketId) -> bool {
        vr.location(id) == Some(QueueId::overheard(self.session.other()))
    }

    /// A sum stays while its tuple is in Qmix, or while its other-session
    /// member waits in this receiver's own overheard queue.
    fn keep_sum<M: QueueMembership>(&self, vr: &M, (x, y): SumKey) -> bool {
        let partner = if x.session == self.session { y } else { x };
        vr.location(x) == Some(QueueId::Mix)
            || vr.location(partner) == Some(QueueId::overheard(self.session))
    }

    fn drop_sum(&mut self, key: SumKey) {
        self.sums.remove(&key);
        self.sum_of.remove(&key.0);
        self.sum_of.remove(&key.1);
    }

    /// Drops everything the source says is no longer useful.
    pub fn prune<M: QueueMembership>(&mut self, vr: &M) {
        self.fresh.clear();
        let stale: Vec<PacketId> =
            self.uncoded.keys().filter(|id| !self.keep_uncoded(vr, **id)).copied().collect();
        for id in stale {
            self.uncoded.remove(&id);
        }
        let stale: Vec<SumKey> =
            self.sums.keys().filter(|k| !self.keep_sum(vr, **k)).copied().collect();
        for key in stale {
            self.drop_sum(key);
        }
    }

    /// Same result as [`prune`](Self::prune) provided `touched` lists every
    /// packet that changed queue since the previous prune, but only looks at
    /// those packets.
    pub fn prune_touched<M: QueueMembership>(&mut self, vr: &M, touched: &[PacketId]) {
        let mut ids = std::mem::take(&mut self.fresh);
        ids.extend_from_slice(touched);
        for id in ids {
            if self.uncoded.contains_key(&id) && !self.keep_uncoded(vr, id) {
                self.uncoded.remove(&id);
            }
            if let Some(&key) = self.sum_of.get(&id) {
                if !self.keep_sum(vr, key) {
                    self.drop_sum(key);
                }
            }
        }
    }

    pub fn prune_with_lists(
        &mut self,
        q1_over2: &[PacketId],
        q2_over1: &[PacketId],
        mix: &[(PacketId, PacketId)],
    ) {
        self.prune(&ListMembership::new(q1_over2, q2_over1, mix));
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn add(&mut self) -> usize {
        let i = self.parent.len();
        self.parent.push(i);
        self.size.push(1);
        i
    }

    pub fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

/// Everything one destination ever received, as a linear system over XOR:
/// an uncoded packet pins a variable, a sum ties two variables together.
#[derive(Debug, Clone)]
pub struct DecodabilityOracle {
    session: Session,
    uf: UnionFind,
    nodes: HashMap<PacketId, usize>,
    ground: usize,
    pending: BTreeSet<PacketId>,
}

impl DecodabilityOracle {
    pub fn new(receiver: Receiver) -> Self {
        let mut uf = UnionFind::default();
        let ground = uf.add();
        Self {
            session: Session::of_receiver(receiver),
            uf,
            nodes: HashMap::new(),
            ground,
            pending: BTreeSet::new(),
        }
    }

    fn node(&mut self, id: PacketId) -> usize {
        if let Some(&n) = self.nodes.get(&id) {
            return n;
        }
        let n = self.uf.add();
        self.nodes.insert(id, n);
        n
    }

    /// Registers a packet this destination must eventually recover.
    pub fn note_arrival(&mut self, id: PacketId) {
        if id.session == self.session {
            self.pending.insert(id);
        }
    }

    pub fn observe(&mut self, ids: WireIds) {
        match ids {
            WireIds::Uncoded(p) => {
                let n = self.node(p);
                self.uf.union(n, self.ground);
            }
            WireIds::Xor(a, b) => {
                let (na, nb) = (self.node(a), self.node(b));
                self.uf.union(na, nb);
            }
        }
    }

    /// Checks that every pending packet is known outright or tied to a packet
    /// in `buffer` (the source buffer this destination may read).
    pub fn check(&mut self, buffer: &[PacketId]) -> Result<(), CodecError> {
        let ground = self.uf.find(self.ground);
        let mut roots: HashSet<usize> = HashSet::from([ground]);
        let mut in_buffer: HashSet<PacketId> = HashSet::new();
        for &id in buffer {
            in_buffer.insert(id);
            if let Some(&n) = self.nodes.get(&id) {
                roots.insert(self.uf.find(n));
            }
        }
        let mut certified = Vec::new();
        let mut failure = None;
        for &id in &self.pending {
            let root = self.nodes.get(&id).map(|&n| self.uf.find(n));
            if root == Some(ground) {
                certified.push(id);
            } else if in_buffer.contains(&id) || root.is_some_and(|r| roots.contains(&r)) {
                continue;
            } else {
                failure = Some(id);
                break;
            }
        }
        for id in certified {
            self.pending.remove(&id);
        }
        match failure {
            Some(id) => Err(CodecError::Undecodable(id)),
            None => Ok(()),
        }
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }
}

/// Runs both destinations' oracles against the current source buffers.
pub fn verify_decodability(
    vr: &VrState,
    oracles: &mut [DecodabilityOracle; 2],
) -> Result<(), CodecError> {
    for oracle in oracles.iter_mut() {
        let buffer = vr.session_buffer(oracle.session);
        oracle.check(&buffer)?;
    }
    Ok(())
}

/// Number of packets named in the pruning feedback sent after a slot.
pub fn pruning_feedback_len(vr: &VrState) -> usize {
    vr.len(QueueId::Q1Over2) + vr.len(QueueId::Q2Over1) + 2 * vr.len(QueueId::Mix)
}

/// True if `log` removed `id` from the network.
pub fn departed(log: &MovementLog, id: PacketId) -> bool {
    log.moves.iter().any(|m| m.packet == id && m.to == Destination::Departed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ReceptionStatus::{self, *};

    struct Harness {
        seed: u64,
        vr: VrState,
        src: SourceBuffers,
        rx: [ReceiverState; 2],
        next: [u64; 2],
    }

    impl Harness {
        fn new() -> Self {
            Self {
                seed: 7,
                vr: VrState::new(),
                src: SourceBuffers::new(),
                rx: [ReceiverState::new(Receiver::D1, 16), ReceiverState::new(Receiver::D2, 16)],
                next: [0, 0],
            }
        }

        fn arrive(&mut self, s: Session) -> PacketId {
            self.next[s.index()] += 1;
            let id = PacketId::new(s, self.next[s.index()]);
            self.vr.push_arrival(id);
            self.src.insert(id, payload_for(self.seed, id, 16));
            id
        }

        fn send(&mut self, op: IncOp, rcpt: ReceptionStatus) -> Vec<PacketId> {
            let pkt = self.src.encode(op, self.vr.heads(op)).unwrap();
            let log = self.vr.apply_op(op, rcpt).unwrap();
            self.src.apply_log(&log);
            let mut got = Vec::new();
            for r in Receiver::BOTH {
                if rcpt.received_by(r) {
                    for (id, p) in self.rx[r.index()].ingest(&pkt).unwrap() {
                        assert_eq!(p, payload_for(self.seed, id, 16));
                        got.push(id);
                    }
                }
            }
            for rx in &mut self.rx {
                rx.prune(&self.vr);
            }
            got
        }
    }

    #[test]
    fn xor_laws() {
        let a = payload_for(1, PacketId::x(1), 16);
        let b = payload_for(1, PacketId::y(1), 16);
        assert_eq!(a.xor(&a), Payload::zeros(16));
        assert_eq!(a.xor(&Payload::zeros(16)), a);
        assert_eq!(a.xor(&b).xor(&b), a);
        assert_ne!(a, b);
        assert_eq!(a, payload_for(1, PacketId::x(1), 16));
        assert_ne!(a, payload_for(2, PacketId::x(1), 16));
    }

    #[test]
    fn encode_forms() {
        let mut h = Harness::new();
        let x = h.arrive(Session::One);
        let y = h.arrive(Session::Two);
        let pm = h.src.encode(IncOp::Pm, h.vr.heads(IncOp::Pm)).unwrap();
        assert_eq!(pm.ids, WireIds::Xor(x, y));
        assert_eq!(pm.payload, h.src.get(x).unwrap().xor(h.src.get(y).unwrap()));
        let nc = h.src.encode(IncOp::Nc1, h.vr.heads(IncOp::Nc1)).unwrap();
        assert_eq!(nc.ids, WireIds::Uncoded(x));
        h.send(IncOp::Pm, D1Only);
        let rc = h.src.encode(IncOp::Rc, h.vr.heads(IncOp::Rc)).unwrap();
        assert_eq!(rc.ids, WireIds::Uncoded(y));
        assert!(h.src.encode(IncOp::Cx, h.vr.heads(IncOp::Cx)).is_err());
    }

    #[test]
    fn premix_then_reactive_delivers_both() {
        let mut h = Harness::new();
        let x = h.arrive(Session::One);
        let y = h.arrive(Session::Two);
        assert!(h.send(IncOp::Pm, D1Only).is_empty());
        // Y sent, both hear it: d1 decodes X from the sum, d2 takes Y directly.
        let got = h.send(IncOp::Rc, Both);
        assert_eq!(got, vec![x, y]);
        assert!(h.vr.is_empty());
        assert_eq!(h.rx[0].buffer_len() + h.rx[1].buffer_len(), 0);
    }

    #[test]
    fn classic_xor_after_overhearing() {
        let mut h = Harness::new();
        let x = h.arrive(Session::One);
        let y = h.arrive(Session::Two);
        h.send(IncOp::Nc1, D2Only);
        h.send(IncOp::Nc2, D1Only);
        assert!(h.rx[0].holds_uncoded(y) && h.rx[1].holds_uncoded(x));
        assert_eq!(h.send(IncOp::Cx, Both), vec![x, y]);
    }

    #[test]
    fn other_side_degenerate_is_ignored() {
        let mut h = Harness::new();
        let y = h.arrive(Session::Two);
        h.send(IncOp::Nc2, D1Only);
        assert_eq!(h.rx[0].buffer_len(), 1);
        assert!(h.send(IncOp::Dx2, D1Only).is_empty());
        assert_eq!(h.rx[0].buffer_len(), 1);
        assert_eq!(h.send(IncOp::Dx2, Both), vec![y]);
        assert_eq!(h.rx[0].buffer_len(), 0);
    }

    #[test]
    fn every_reactive_branch_decodes() {
        for star in [D1Only, D2Only, Both] {
            for now in [D1Only, D2Only] {
                let mut h = Harness::new();
                let x = h.arrive(Session::One);
                let y = h.arrive(Session::Two);
                h.send(IncOp::Pm, star);
                h.send(IncOp::Rc, now);
                // Drain with degenerate XORs received by everyone.
                let mut delivered: HashSet<PacketId> =
                    [x, y].into_iter().filter(|id| h.rx[id.session.index()].is_delivered(*id)).collect();
                for op in [IncOp::Dx1, IncOp::Dx2] {
                    if h.vr.is_feasible(op) {
                        delivered.extend(h.send(op, Both));
                    }
                }
                assert!(h.vr.is_empty(), "{star:?}/{now:?}");
                assert_eq!(delivered, HashSet::from([x, y]), "{star:?}/{now:?}");
            }
        }
    }

    fn contents(rx: &ReceiverState) -> (BTreeSet<PacketId>, BTreeSet<SumKey>) {
        (rx.uncoded.keys().copied().collect(), rx.sums.keys().copied().collect())
    }

    #[test]
    fn touched_prune_matches_full_prune() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h = Harness::new();
        let mut lazy = h.rx.clone();
        let mut touched = Vec::new();
        for _ in 0..4000 {
            for s in Session::BOTH {
                if rng.random_bool(0.45) {
                    h.arrive(s);
                }
            }
            let ops = h.vr.feasible_ops();
            if ops.is_empty() {
                continue;
            }
            let op = ops[rng.random_range(0..ops.len())];
            let rcpt = ReceptionStatus::ALL[rng.random_range(0..4)];
            let pkt = h.src.encode(op, h.vr.heads(op)).unwrap();
            let log = h.vr.apply_op(op, rcpt).unwrap();
            h.src.apply_log(&log);
            touched.extend(log.moves.iter().map(|m| m.packet));
            for r in Receiver::BOTH {
                if rcpt.received_by(r) {
                    h.rx[r.index()].ingest(&pkt).unwrap();
                    lazy[r.index()].ingest(&pkt).unwrap();
                }
            }
            if rng.random_bool(0.3) {
                for i in 0..2 {
                    h.rx[i].prune(&h.vr);
                    lazy[i].prune_touched(&h.vr, &touched);
                    assert_eq!(contents(&h.rx[i]), contents(&lazy[i]));
                }
                touched.clear();
            }
        }
    }

    #[test]
    fn prune_lists() {
        let mut h = Harness::new();
        h.arrive(Session::One);
        h.arrive(Session::Two);
        h.send(IncOp::Pm, Both);
        assert_eq!(h.rx[0].buffer_len(), 1);
        h.rx[0].prune_with_lists(&[], &[], &[]);
        assert_eq!(h.rx[0].buffer_len(), 0);
    }

    #[test]
    fn oracle_detects_missing_buffer_entry() {
        let mut h = Harness::new();
        let x = h.arrive(Session::One);
        let y = h.arrive(Session::Two);
        let mut oracles = [DecodabilityOracle::new(Receiver::D1), DecodabilityOracle::new(Receiver::D2)];
        oracles[0].note_arrival(x);
        oracles[1].note_arrival(y);
        let pkt = h.src.encode(IncOp::Pm, h.vr.heads(IncOp::Pm)).unwrap();
        h.send(IncOp::Pm, D1Only);
        oracles[0].observe(pkt.ids);
        verify_decodability(&h.vr, &mut oracles).unwrap();
        let buffer: Vec<PacketId> =
            h.vr.session_buffer(Session::One).into_iter().filter(|id| *id != x).collect();
        assert_eq!(oracles[0].check(&buffer), Err(CodecError::Undecodable(x)));
    }

    #[test]
    fn duplicate_delivery_is_a_violation() {
        let mut rx = ReceiverState::new(Receiver::D1, 16);
        let pkt = WirePacket {
            op: IncOp::Nc1,
            ids: WireIds::Uncoded(PacketId::x(1)),
            payload: Payload::zeros(16),
        };
        rx.ingest(&pkt).unwrap();
        assert!(matches!(rx.ingest(&pkt), Err(CodecError::ProtocolViolation { .. })));
        assert_eq!(rx.decoded_prefix(), 1);
    }
}
