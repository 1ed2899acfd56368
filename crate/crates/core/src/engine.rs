//! Trial loop, sweeps and CSV output.
//!
//! One step is one transmission opportunity: a slot in slotted mode, or one
//! packet air time under rate adaptation. Within a step the order is: draw the
//! channel quality, schedule, draw the reception, move packets and decode,
//! update scheduler counters, then admit the step's arrivals.

use std::collections::HashMap;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{largest_actual_pressure, priority_step, routing_step};
use crate::channel::{QualityState, Receiver, ReceptionStatus, TrialRng};
use crate::codec::{
    payload_for, verify_decodability, DecodabilityOracle, ReceiverState, SourceBuffers,
};
use crate::error::{CodecError, EngineError};
use crate::rateadapt::{advance_clock, preferred_combo, ComboSet};
use crate::scenario::{Built, Scenario, Scheme};
use crate::spn::{step_inter_actual, Realization, SpnCounters};
use crate::vrnet::{IncOp, PacketId, QueueId, Session, Topology, VrState};

/// Snapshot taken every `sample_stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub time: f64,
    pub quality: usize,
    pub lengths: [usize; 5],
    pub backlog: usize,
    pub q: Vec<f64>,
    pub q_inter: Vec<i64>,
    pub q_inter_actual: Vec<i64>,
    pub null_activity: Vec<u64>,
    pub rx_buffer: [usize; 2],
    pub arrived: [u64; 2],
    pub delivered: [u64; 2],
    pub mean_delay: Option<f64>,
}

/// Counts of everything that should never happen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Integrity {
    pub payload_mismatches: u64,
    pub protocol_violations: u64,
    pub decodability_checks: u64,
    pub decodability_failures: u64,
    pub first_undecodable: Option<PacketId>,
    pub buffer_bound_checks: u64,
    pub buffer_bound_violations: u64,
    pub accounting_failures: u64,
    /// Largest single-receiver buffer seen at a pruning instant.
    pub max_rx_buffer: usize,
}

impl Integrity {
    pub fn is_clean(&self) -> bool {
        self.payload_mismatches == 0
            && self.protocol_violations == 0
            && self.decodability_failures == 0
            && self.buffer_bound_violations == 0
            && self.accounting_failures == 0
    }

    pub fn merge(&mut self, o: &Integrity) {
        self.payload_mismatches += o.payload_mismatches;
        self.protocol_violations += o.protocol_violations;
        self.decodability_checks += o.decodability_checks;
        self.decodability_failures += o.decodability_failures;
        self.first_undecodable = self.first_undecodable.or(o.first_undecodable);
        self.buffer_bound_checks += o.buffer_bound_checks;
        self.buffer_bound_violations += o.buffer_bound_violations;
        self.accounting_failures += o.accounting_failures;
        self.max_rx_buffer = self.max_rx_buffer.max(o.max_rx_buffer);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub label: String,
    pub scheme: Scheme,
    pub seed: u64,
    pub horizon: f64,
    pub steps: u64,
    pub end_time: f64,
    pub samples: Vec<Sample>,
    /// End-to-end delay of every delivered packet, in the scenario's time unit.
    pub delays: Vec<f64>,
    pub arrived: [u64; 2],
    pub delivered: [u64; 2],
    pub mid_backlog: usize,
    pub final_backlog: usize,
    /// Per-step mean backlog over the last [`VERDICT_WINDOW`] of each half.
    pub mid_window_backlog: f64,
    pub end_window_backlog: f64,
    pub idle_steps: u64,
    pub infeasible_steps: u64,
    pub op_counts: [u64; 7],
    pub combo_counts: Vec<u64>,
    pub integrity: Integrity,
}

impl MetricsSeries {
    pub fn queue_names(&self) -> &'static [QueueId] {
        self.scheme.topology().queues()
    }
}

enum Action {
    Idle,
    Op(IncOp),
    Route(Session),
}

struct Trial<'a> {
    sc: &'a Scenario,
    built: Built,
    topology: Topology,
    combos: ComboSet,
    rng: TrialRng,
    seed: u64,
    quality: QualityState,
    vr: VrState,
    src: SourceBuffers,
    rx: [ReceiverState; 2],
    oracles: Option<[DecodabilityOracle; 2]>,
    counters: Option<SpnCounters>,
    next_index: [u64; 2],
    arrival_time: HashMap<PacketId, f64>,
    now: f64,
    out: MetricsSeries,
    delay_sum: f64,
    trace: Option<&'a mut dyn Write>,
    /// Packets moved since the last prune.
    touched: Vec<PacketId>,
}

impl<'a> Trial<'a> {
    fn new(sc: &'a Scenario, seed: u64, trace: Option<&'a mut dyn Write>) -> Result<Self, EngineError> {
        let built = sc.build()?;
        let topology = sc.scheme.topology();
        let combos = ComboSet::new(built.combos.clone(), topology);
        let len = sc.options.payload_len;
        let counters = sc.scheme.uses_dmw().then(|| SpnCounters::new(topology.queues().len()));
        let oracles = (sc.options.decodability_every > 0).then(|| {
            [DecodabilityOracle::new(Receiver::D1), DecodabilityOracle::new(Receiver::D2)]
        });
        let n_combos = combos.len();
        Ok(Self {
            sc,
            quality: built.channel.initial_state(),
            built,
            topology,
            combos,
            rng: TrialRng::new(seed),
            seed,
            vr: VrState::new(),
            src: SourceBuffers::new(),
            rx: [ReceiverState::new(Receiver::D1, len), ReceiverState::new(Receiver::D2, len)],
            oracles,
            counters,
            next_index: [0, 0],
            arrival_time: HashMap::new(),
            now: 0.0,
            out: MetricsSeries {
                label: sc.label().to_string(),
                scheme: sc.scheme,
                seed,
                horizon: sc.horizon,
                steps: 0,
                end_time: 0.0,
                samples: Vec::new(),
                delays: Vec::new(),
                arrived: [0, 0],
                delivered: [0, 0],
                mid_backlog: 0,
                final_backlog: 0,
                mid_window_backlog: 0.0,
                end_window_backlog: 0.0,
                idle_steps: 0,
                infeasible_steps: 0,
                op_counts: [0; 7],
                combo_counts: vec![0; n_combos],
                integrity: Integrity::default(),
            },
            delay_sum: 0.0,
            trace,
            touched: Vec::new(),
        })
    }

    fn fault(&self, step: u64, detail: String) -> Result<(), EngineError> {
        if self.sc.options.strict {
            Err(EngineError::Invariant { step, detail })
        } else {
            Ok(())
        }
    }

    fn run(mut self) -> Result<MetricsSeries, EngineError> {
        let horizon = self.sc.horizon;
        let mut mid_recorded = false;
        let mut step = 0u64;
        let mut quality = 0;
        let mut windows = [(0.0, 0u64); 2];
        self.sample(0, quality);
        while self.now < horizon {
            step += 1;
            let t = self.now / horizon;
            quality = self.step(step)?;
            let w = if t < 0.5 { 0.5 - t } else { 1.0 - t };
            if w <= VERDICT_WINDOW {
                let slot = &mut windows[usize::from(t >= 0.5)];
                slot.0 += self.vr.backlog() as f64;
                slot.1 += 1;
            }
            if !mid_recorded && self.now >= horizon / 2.0 {
                self.out.mid_backlog = self.vr.backlog();
                mid_recorded = true;
            }
            if step % self.sc.options.sample_stride == 0 {
                self.sample(step, quality);
            }
        }
        if step % self.sc.options.sample_stride != 0 {
            self.sample(step, quality);
        }
        self.out.steps = step;
        self.out.end_time = self.now;
        self.out.final_backlog = self.vr.backlog();
        let mean = |(sum, n): (f64, u64)| if n == 0 { 0.0 } else { sum / n as f64 };
        self.out.mid_window_backlog = mean(windows[0]);
        self.out.end_window_backlog = mean(windows[1]);
        Ok(self.out)
    }

    fn decide(&self, quality: usize) -> (usize, Option<usize>, Action) {
        let fastest = self.combos.fastest();
        match self.sc.scheme {
            Scheme::SevenOp | Scheme::FiveOpBp => {
                let counters = self.counters.as_ref().expect("dmw counters");
                let q = counters.pressure_source(self.sc.pressure);
                let Some((combo, n)) = preferred_combo(&q, &self.combos, quality) else {
                    return (fastest, None, Action::Idle);
                };
                let op = self.topology.ops()[n];
                if self.vr.is_feasible(op) {
                    return (combo, Some(n), Action::Op(op));
                }
                if self.sc.options.infeasible_fallback {
                    if let Some((c, alt)) = largest_actual_pressure(
                        &self.vr,
                        self.topology,
                        &self.combos,
                        quality,
                        self.topology.ops(),
                    ) {
                        return (c, Some(n), Action::Op(alt));
                    }
                }
                (combo, Some(n), Action::Idle)
            }
            Scheme::FiveOpPriority => match priority_step(&self.vr, &self.combos, quality) {
                Some((c, op)) => (c, None, Action::Op(op)),
                None => (fastest, None, Action::Idle),
            },
            Scheme::Routing => {
                let backlog = [self.vr.len(QueueId::Q1Empty), self.vr.len(QueueId::Q2Empty)];
                match routing_step(backlog, &self.combos, quality) {
                    Some((c, s)) => (c, None, Action::Route(s)),
                    None => (fastest, None, Action::Idle),
                }
            }
        }
    }

    fn step(&mut self, step: u64) -> Result<usize, EngineError> {
        let quality = self.built.channel.next_quality(&mut self.quality, &mut self.rng.channel);
        let u: f64 = self.rng.channel.random();
        let (combo, preferred, action) = self.decide(quality);
        let rcpt = self.combos.combo(combo).reception(quality).status_from_uniform(u);
        let duration = match action {
            Action::Idle => self.combos.min_duration(),
            _ => self.combos.combo(combo).duration,
        };
        let step_time = self.now;

        let executed = match action {
            Action::Idle => {
                self.out.idle_steps += 1;
                if preferred.is_some() {
                    self.out.infeasible_steps += 1;
                }
                None
            }
            Action::Op(op) => {
                self.transmit(step, op, None, rcpt)?;
                Some(op)
            }
            Action::Route(s) => {
                self.transmit(step, IncOp::non_coding(s), Some(s), rcpt)?;
                None
            }
        };
        if !matches!(action, Action::Idle) {
            self.out.combo_counts[combo] += 1;
        }

        let (arrivals, now) =
            advance_clock(self.now, duration, &self.built.arrivals, &mut self.rng.arrivals);

        if let Some(counters) = self.counters.as_mut() {
            let inst = self.combos.instance(combo);
            let cond = self.combos.condition(combo, quality);
            let a = inst.arrival_vector(&arrivals);
            let realized = match preferred {
                Some(n) => realization(self.topology, self.topology.ops()[n], rcpt),
                None => Realization::idle(a.len()),
            };
            counters.record_null_activity(inst, preferred, &realized);
            counters.step_inter_virtual(&a, &realized);
            let mu_out: Vec<i64> = realized.consumed.iter().map(|&v| v as i64).collect();
            let mu_in: Vec<i64> =
                realized.produced.iter().zip(&a).map(|(&p, x)| p as i64 + x).collect();
            step_inter_actual(&mut counters.q_inter_actual, &mu_out, &mu_in);
            counters.step_virtual(inst, cond, &a, preferred);
            let moved = executed.map(|op| realization(self.topology, op, rcpt));
            counters.step_actual(&a, moved.as_ref());
        }

        for s in Session::BOTH {
            for _ in 0..arrivals[s.index()] {
                self.admit(s, step_time);
            }
        }
        self.now = now;

        if step % self.sc.options.prune_period == 0 {
            self.prune(step)?;
        }
        if let Some(oracles) = self.oracles.as_mut() {
            if step % self.sc.options.decodability_every == 0 {
                self.out.integrity.decodability_checks += 1;
                if let Err(e) = verify_decodability(&self.vr, oracles) {
                    self.out.integrity.decodability_failures += 1;
                    if let CodecError::Undecodable(id) = e {
                        self.out.integrity.first_undecodable.get_or_insert(id);
                    }
                    self.fault(step, e.to_string())?;
                }
            }
        }
        self.check_accounting(step)?;
        Ok(quality)
    }

    fn transmit(
        &mut self,
        step: u64,
        op: IncOp,
        route: Option<Session>,
        rcpt: ReceptionStatus,
    ) -> Result<(), EngineError> {
        self.out.op_counts[op.index()] += 1;
        let pkt = self.src.encode(op, self.vr.heads(op))?;
        let log = match route {
            Some(s) => self.vr.apply_routing(s, rcpt)?,
            None => self.vr.apply_op(op, rcpt)?,
        };
        self.src.apply_log(&log);
        self.touched.extend(log.moves.iter().map(|m| m.packet));
        if let Some(trace) = self.trace.as_mut() {
            for line in log.trace_lines(step) {
                writeln!(trace, "{line}").map_err(|e| EngineError::Invariant {
                    step,
                    detail: format!("trace write failed: {e}"),
                })?;
            }
        }
        for r in Receiver::BOTH {
            if !rcpt.received_by(r) {
                continue;
            }
            if let Some(oracles) = self.oracles.as_mut() {
                oracles[r.index()].observe(pkt.ids);
            }
            match self.rx[r.index()].ingest(&pkt) {
                Ok(delivered) => {
                    for (id, payload) in delivered {
                        if payload != payload_for(self.seed, id, self.sc.options.payload_len) {
                            self.out.integrity.payload_mismatches += 1;
                            self.fault(step, format!("payload of {id} corrupted"))?;
                        }
                        self.out.delivered[id.session.index()] += 1;
                        if let Some(t0) = self.arrival_time.remove(&id) {
                            let d = self.now - t0;
                            self.delay_sum += d;
                            self.out.delays.push(d);
                        }
                    }
                }
                Err(e) => {
                    self.out.integrity.protocol_violations += 1;
                    self.fault(step, e.to_string())?;
                }
            }
        }
        Ok(())
    }

    fn admit(&mut self, s: Session, time: f64) {
        self.next_index[s.index()] += 1;
        let id = PacketId::new(s, self.next_index[s.index()]);
        self.vr.push_arrival(id);
        self.src.insert(id, payload_for(self.seed, id, self.sc.options.payload_len));
        self.arrival_time.insert(id, time);
        if let Some(oracles) = self.oracles.as_mut() {
            oracles[s.destination().index()].note_arrival(id);
        }
        self.out.arrived[s.index()] += 1;
    }

    fn prune(&mut self, step: u64) -> Result<(), EngineError> {
        let bound = self.vr.len(QueueId::Q1Over2) + self.vr.len(QueueId::Q2Over1) + self.vr.len(QueueId::Mix);
        for i in 0..2 {
            self.rx[i].prune_touched(&self.vr, &self.touched);
            let held = self.rx[i].buffer_len();
            self.out.integrity.buffer_bound_checks += 1;
            self.out.integrity.max_rx_buffer = self.out.integrity.max_rx_buffer.max(held);
            if held > bound {
                self.out.integrity.buffer_bound_violations += 1;
                self.fault(step, format!("receiver {} holds {held} > bound {bound}", i + 1))?;
            }
        }
        self.touched.clear();
        Ok(())
    }

    fn check_accounting(&mut self, step: u64) -> Result<(), EngineError> {
        let mut problems = Vec::new();
        if self.src.len() != self.vr.presence() {
            problems.push(format!(
                "source holds {} payloads, network presence {}",
                self.src.len(),
                self.vr.presence()
            ));
        }
        for s in Session::BOTH {
            let i = s.index();
            if self.out.arrived[i] != self.out.delivered[i] + self.vr.session_presence(s) as u64 {
                problems.push(format!(
                    "session {}: arrived {} != delivered {} + in flight {}",
                    i + 1,
                    self.out.arrived[i],
                    self.out.delivered[i],
                    self.vr.session_presence(s)
                ));
            }
        }
        if let Some(c) = &self.counters {
            let lengths = self.vr.lengths();
            let want: Vec<u64> =
                self.topology.queues().iter().map(|q| lengths[q.index()] as u64).collect();
            if c.actual != want {
                problems.push(format!("counter lengths {:?} != network {:?}", c.actual, want));
            }
        }
        for p in problems {
            self.out.integrity.accounting_failures += 1;
            self.fault(step, p)?;
        }
        Ok(())
    }

    fn sample(&mut self, step: u64, quality: usize) {
        let (q, q_inter, q_inter_actual, null_activity) = match &self.counters {
            Some(c) => (
                c.q.clone(),
                c.q_inter.clone(),
                c.q_inter_actual.clone(),
                c.null_activity.clone(),
            ),
            None => Default::default(),
        };
        let delivered = self.out.delays.len();
        self.out.samples.push(Sample {
            step,
            time: self.now,
            quality,
            lengths: self.vr.lengths(),
            backlog: self.vr.backlog(),
            q,
            q_inter,
            q_inter_actual,
            null_activity,
            rx_buffer: [self.rx[0].buffer_len(), self.rx[1].buffer_len()],
            arrived: self.out.arrived,
            delivered: self.out.delivered,
            mean_delay: (delivered > 0).then(|| self.delay_sum / delivered as f64),
        });
    }
}

fn realization(topology: Topology, op: IncOp, rcpt: ReceptionStatus) -> Realization {
    let (consumed, produced) = topology.realized(op, rcpt);
    Realization { consumed, produced }
}

/// Runs one trial with the scenario's own seed.
pub fn run_trial(scenario: &Scenario) -> Result<MetricsSeries, EngineError> {
    run_trial_seeded(scenario, scenario.seed)
}

pub fn run_trial_seeded(scenario: &Scenario, seed: u64) -> Result<MetricsSeries, EngineError> {
    Trial::new(scenario, seed, None)?.run()
}

/// Like [`run_trial`], writing every packet movement as a CSV line.
pub fn run_trial_traced(scenario: &Scenario, trace: &mut dyn Write) -> Result<MetricsSeries, EngineError> {
    writeln!(trace, "slot,op,rcpt,packet,from,to")
        .map_err(|e| EngineError::Invariant { step: 0, detail: e.to_string() })?;
    Trial::new(scenario, scenario.seed, Some(trace))?.run()
}

/// Trials `0..trials` with seeds `seed + i`, in parallel.
pub fn run_trials(scenario: &Scenario, trials: usize) -> Result<Vec<MetricsSeries>, EngineError> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial_seeded(scenario, scenario.seed.wrapping_add(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Unstable,
    Indeterminate,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

pub const STABLE_RATE: f64 = 0.01;
/// Fraction of the horizon averaged before the midpoint and before the end.
pub const VERDICT_WINDOW: f64 = 0.05;
pub const UNSTABLE_RATE: f64 = 0.02;

/// Finite-horizon stability call from the mean backlog near the end and near the
/// midpoint of the run. Returns the verdict and the second-half growth rate.
pub fn verdict(final_backlog: f64, mid_backlog: f64, horizon: f64) -> (Verdict, f64) {
    let half = horizon / 2.0;
    let end_rate = final_backlog / horizon;
    let mid_rate = mid_backlog / half;
    let slope = (final_backlog - mid_backlog) / half;
    let v = if end_rate < STABLE_RATE && end_rate <= mid_rate {
        Verdict::Stable
    } else if end_rate > UNSTABLE_RATE && slope > 0.0 {
        Verdict::Unstable
    } else {
        Verdict::Indeterminate
    };
    (v, slope)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub theta: f64,
    pub sum_rate: f64,
    pub scheme: String,
    pub mean_backlog: f64,
    pub mid_backlog: f64,
    pub slope: f64,
    pub verdict: Verdict,
    pub integrity: Integrity,
}

/// Mean backlog and verdict over `trials` runs.
pub fn evaluate(scenario: &Scenario, trials: usize) -> Result<SweepRow, EngineError> {
    let runs = run_trials(scenario, trials)?;
    Ok(summarize(scenario, &runs))
}

pub fn summarize(scenario: &Scenario, runs: &[MetricsSeries]) -> SweepRow {
    let n = runs.len().max(1) as f64;
    let mean_backlog = runs.iter().map(|r| r.end_window_backlog).sum::<f64>() / n;
    let mid_backlog = runs.iter().map(|r| r.mid_window_backlog).sum::<f64>() / n;
    let (verdict, slope) = verdict(mean_backlog, mid_backlog, scenario.horizon);
    let mut integrity = Integrity::default();
    for r in runs {
        integrity.merge(&r.integrity);
    }
    SweepRow {
        theta: scenario.theta,
        sum_rate: scenario.sum_rate(),
        scheme: scenario.label().to_string(),
        mean_backlog,
        mid_backlog,
        slope,
        verdict,
        integrity,
    }
}

pub fn stability_sweep(
    template: &Scenario,
    thetas: &[f64],
    trials: usize,
) -> Result<Vec<SweepRow>, EngineError> {
    thetas.iter().map(|&t| evaluate(&template.with_theta(t), trials)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayStats {
    pub mean_delay: Option<f64>,
    pub mean_rx_buffer: Option<f64>,
    pub delivered: usize,
}

/// Mean delay over delivered packets and mean receiver buffer over samples
/// and both receivers.
pub fn delay_stats(series: &MetricsSeries) -> DelayStats {
    let delivered = series.delays.len();
    let mean_delay = (delivered > 0).then(|| series.delays.iter().sum::<f64>() / delivered as f64);
    let samples = &series.samples;
    let mean_rx_buffer = (!samples.is_empty()).then(|| {
        samples.iter().map(|s| (s.rx_buffer[0] + s.rx_buffer[1]) as f64 / 2.0).sum::<f64>()
            / samples.len() as f64
    });
    DelayStats { mean_delay, mean_rx_buffer, delivered }
}

/// Pools several trials: delay averaged over all packets, buffer over all samples.
pub fn pooled_delay_stats(runs: &[MetricsSeries]) -> DelayStats {
    let delivered: usize = runs.iter().map(|r| r.delays.len()).sum();
    let delay_sum: f64 = runs.iter().flat_map(|r| &r.delays).sum();
    let n_samples: usize = runs.iter().map(|r| r.samples.len()).sum();
    let buf_sum: f64 = runs
        .iter()
        .flat_map(|r| &r.samples)
        .map(|s| (s.rx_buffer[0] + s.rx_buffer[1]) as f64 / 2.0)
        .sum();
    DelayStats {
        mean_delay: (delivered > 0).then(|| delay_sum / delivered as f64),
        mean_rx_buffer: (n_samples > 0).then(|| buf_sum / n_samples as f64),
        delivered,
    }
}

pub const SWEEP_HEADER: &str = "theta,sum_rate,scheme,mean_backlog,slope,verdict";

pub fn write_sweep_csv<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.theta,
            r.sum_rate,
            r.scheme,
            r.mean_backlog,
            r.slope,
            r.verdict.name()
        )?;
    }
    Ok(())
}

/// Per-sample series. Counter columns are named `<family>_<queue>` with
/// families `q`, `qinter`, `Qinter`, `na`; they are absent for schedulers
/// without virtual counters.
pub fn write_series_csv<W: Write>(mut w: W, series: &MetricsSeries) -> io::Result<()> {
    let mut header = vec![
        "step", "time", "quality", "backlog", "Q1_0", "Q2_0", "Q1_2", "Q2_1", "Qmix", "rx1_buffer",
        "rx2_buffer", "arrived1", "arrived2", "delivered1", "delivered2", "mean_delay",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    let has_counters = series.samples.first().is_some_and(|s| !s.q.is_empty());
    if has_counters {
        for family in ["q", "qinter", "Qinter", "na"] {
            for q in series.queue_names() {
                header.push(format!("{family}_{}", q.name()));
            }
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for s in &series.samples {
        let mut cols = vec![
            s.step.to_string(),
            s.time.to_string(),
            s.quality.to_string(),
            s.backlog.to_string(),
        ];
        cols.extend(s.lengths.iter().map(|l| l.to_string()));
        cols.extend(s.rx_buffer.iter().map(|l| l.to_string()));
        cols.extend(s.arrived.iter().map(|l| l.to_string()));
        cols.extend(s.delivered.iter().map(|l| l.to_string()));
        cols.push(s.mean_delay.map(|d| d.to_string()).unwrap_or_default());
        if has_counters {
            cols.extend(s.q.iter().map(|v| v.to_string()));
            cols.extend(s.q_inter.iter().map(|v| v.to_string()));
            cols.extend(s.q_inter_actual.iter().map(|v| v.to_string()));
            cols.extend(s.null_activity.iter().map(|v| v.to_string()));
        }
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}
