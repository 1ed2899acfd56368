//! Joint choice of modulation/coding combination and coding operation.
//!
//! Each combination has its own transmission duration and reception vector
//! (optionally one per channel quality). The scheduler maximizes back-pressure
//! per unit of air time.

use rand::Rng;

use crate::channel::{ArrivalProcess, ReceptionVector};
use crate::spn::{back_pressure, SpnInstance};
use crate::vrnet::Topology;

#[derive(Debug, Clone, PartialEq)]
pub struct McsCombo {
    /// Seconds to transmit one packet.
    pub duration: f64,
    /// Reception vector for each channel quality.
    pub reception: Vec<ReceptionVector>,
}

impl McsCombo {
    pub fn new(duration: f64, reception: Vec<ReceptionVector>) -> Self {
        assert!(duration > 0.0 && duration.is_finite(), "duration must be positive");
        assert!(!reception.is_empty(), "combo needs at least one reception vector");
        Self { duration, reception }
    }

    pub fn reception(&self, quality: usize) -> &ReceptionVector {
        &self.reception[quality.min(self.reception.len() - 1)]
    }
}

/// Combos with their SPN instances built for a topology.
#[derive(Debug, Clone)]
pub struct ComboSet {
    combos: Vec<McsCombo>,
    instances: Vec<SpnInstance>,
}

impl ComboSet {
    pub fn new(combos: Vec<McsCombo>, topology: Topology) -> Self {
        assert!(!combos.is_empty(), "at least one combo");
        let instances = combos.iter().map(|c| topology.spn_instance(&c.reception)).collect();
        Self { combos, instances }
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn combo(&self, i: usize) -> &McsCombo {
        &self.combos[i]
    }

    pub fn combos(&self) -> &[McsCombo] {
        &self.combos
    }

    pub fn instance(&self, i: usize) -> &SpnInstance {
        &self.instances[i]
    }

    /// Condition index of combo `i` at channel quality `c`.
    pub fn condition(&self, i: usize, c: usize) -> usize {
        c.min(self.instances[i].conditions() - 1)
    }

    pub fn min_duration(&self) -> f64 {
        self.combos.iter().map(|c| c.duration).fold(f64::INFINITY, f64::min)
    }

    /// Index of the shortest combo, lowest on ties.
    pub fn fastest(&self) -> usize {
        let min = self.min_duration();
        self.combos.iter().position(|c| c.duration == min).expect("non-empty")
    }
}

/// `(combo, activity)` maximizing pressure per second, `None` if every
/// candidate is non-positive. Ties go to the lowest combo, then activity.
pub fn preferred_combo(q: &[f64], set: &ComboSet, quality: usize) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for i in 0..set.len() {
        let inst = set.instance(i);
        let c = set.condition(i, quality);
        let d = back_pressure(q, inst.b_in(c), inst.b_out(c));
        for (n, v) in d.into_iter().enumerate() {
            let v = v / set.combo(i).duration;
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some(((i, n), v));
            }
        }
    }
    best.map(|(choice, _)| choice)
}

/// Arrivals during a transmission of `duration` seconds and the new clock.
pub fn advance_clock<R: Rng + ?Sized>(
    now: f64,
    duration: f64,
    arrivals: &ArrivalProcess,
    rng: &mut R,
) -> ([u32; 2], f64) {
    (arrivals.sample(duration, rng), now + duration)
}
