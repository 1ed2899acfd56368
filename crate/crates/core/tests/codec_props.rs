use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use incsim_core::channel::{Receiver, ReceptionStatus, ReceptionVector};
use incsim_core::codec::{
    payload_for, verify_decodability, DecodabilityOracle, ReceiverState, SourceBuffers,
};
use incsim_core::vrnet::{IncOp, PacketId, QueueId, Session, VrState};

const LEN: usize = 16;

struct Net {
    seed: u64,
    vr: VrState,
    src: SourceBuffers,
    rx: [ReceiverState; 2],
    oracles: [DecodabilityOracle; 2],
    arrived: [u64; 2],
    delivered: [u64; 2],
}

impl Net {
    fn new(seed: u64) -> Self {
        Self {
            seed,
            vr: VrState::new(),
            src: SourceBuffers::new(),
            rx: [ReceiverState::new(Receiver::D1, LEN), ReceiverState::new(Receiver::D2, LEN)],
            oracles: [DecodabilityOracle::new(Receiver::D1), DecodabilityOracle::new(Receiver::D2)],
            arrived: [0; 2],
            delivered: [0; 2],
        }
    }

    fn arrive(&mut self, s: Session) {
        self.arrived[s.index()] += 1;
        let id = PacketId::new(s, self.arrived[s.index()]);
        self.vr.push_arrival(id);
        self.src.insert(id, payload_for(self.seed, id, LEN));
        self.oracles[s.destination().index()].note_arrival(id);
    }

    fn send(&mut self, op: IncOp, rcpt: ReceptionStatus) -> Result<(), TestCaseError> {
        let pkt = self.src.encode(op, self.vr.heads(op)).unwrap();
        let log = self.vr.apply_op(op, rcpt).unwrap();
        self.src.apply_log(&log);
        for r in Receiver::BOTH {
            if !rcpt.received_by(r) {
                continue;
            }
            self.oracles[r.index()].observe(pkt.ids);
            for (id, payload) in self.rx[r.index()].ingest(&pkt).unwrap() {
                prop_assert_eq!(id.session.destination(), r);
                prop_assert_eq!(&payload, &payload_for(self.seed, id, LEN), "payload of {}", id);
                self.delivered[id.session.index()] += 1;
            }
        }
        for rx in &mut self.rx {
            rx.prune(&self.vr);
        }
        self.check()
    }

    fn check(&mut self) -> Result<(), TestCaseError> {
        let l = self.vr.lengths();
        let coded = l[QueueId::Q1Over2.index()] + l[QueueId::Q2Over1.index()] + l[QueueId::Mix.index()];
        for rx in &self.rx {
            prop_assert!(rx.buffer_len() <= coded, "buffer {} > {coded}", rx.buffer_len());
        }
        prop_assert_eq!(self.src.len(), l.iter().sum::<usize>() + l[QueueId::Mix.index()]);
        for s in Session::BOTH {
            prop_assert_eq!(self.arrived[s.index()], self.delivered[s.index()] + self.vr.session_presence(s) as u64);
        }
        prop_assert!(verify_decodability(&self.vr, &mut self.oracles).is_ok());
        Ok(())
    }
}

fn reception_vector() -> impl Strategy<Value = ReceptionVector> {
    prop::array::uniform4(0.01f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum();
        ReceptionVector::from_array(w.map(|v| v / s)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random traffic under random feasible operations, then a drain with no
    /// new arrivals: everything delivered bit-exact and in order.
    #[test]
    fn random_traffic_decodes_and_drains(
        seed in any::<u64>(),
        p in reception_vector(),
        load in 0.1f64..0.9,
        slots in 50usize..600,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Net::new(seed);
        for _ in 0..slots {
            for s in Session::BOTH {
                if rng.random_bool(load) {
                    net.arrive(s);
                }
            }
            let ops = net.vr.feasible_ops();
            if ops.is_empty() {
                continue;
            }
            let op = ops[rng.random_range(0..ops.len())];
            net.send(op, p.sample(&mut rng))?;
        }
        let mut guard = 0;
        while !net.vr.is_empty() {
            guard += 1;
            prop_assert!(guard < 100_000, "drain did not finish");
            let ops = net.vr.feasible_ops();
            let op = ops[rng.random_range(0..ops.len())];
            net.send(op, p.sample(&mut rng))?;
        }
        for s in Session::BOTH {
            let rx = &net.rx[s.destination().index()];
            prop_assert_eq!(net.delivered[s.index()], net.arrived[s.index()]);
            prop_assert_eq!(rx.decoded_prefix(), net.arrived[s.index()]);
            prop_assert_eq!(rx.buffer_len(), 0);
        }
        prop_assert!(net.src.is_empty());
    }

    /// Pruning from explicit feedback lists agrees with pruning from the live queues.
    #[test]
    fn list_feedback_prunes_identically(seed in any::<u64>(), p in reception_vector()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Net::new(seed);
        for _ in 0..300 {
            for s in Session::BOTH {
                if rng.random_bool(0.5) {
                    net.arrive(s);
                }
            }
            let ops = net.vr.feasible_ops();
            if ops.is_empty() {
                continue;
            }
            let op = ops[rng.random_range(0..ops.len())];
            net.send(op, p.sample(&mut rng))?;
            let q12: Vec<PacketId> = net.vr.packets(QueueId::Q1Over2).map(|p| p.id).collect();
            let q21: Vec<PacketId> = net.vr.packets(QueueId::Q2Over1).map(|p| p.id).collect();
            let mix: Vec<(PacketId, PacketId)> = net.vr.mix().map(|t| (t.x.id, t.y.id)).collect();
            for rx in &net.rx {
                let mut listed = rx.clone();
                listed.prune_with_lists(&q12, &q21, &mix);
                prop_assert_eq!(listed.buffer_len(), rx.buffer_len());
            }
        }
    }
}
