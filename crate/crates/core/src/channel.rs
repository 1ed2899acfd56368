//! Channel-quality processes, the two-receiver broadcast erasure channel and
//! packet arrival processes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::ChannelError;

/// Tolerance on the sum of a reception vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Which of the two destinations received a transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceptionStatus {
    None,
    D1Only,
    D2Only,
    Both,
}

impl ReceptionStatus {
    pub const ALL: [ReceptionStatus; 4] = [Self::None, Self::D1Only, Self::D2Only, Self::Both];

    pub fn d1(self) -> bool {
        matches!(self, Self::D1Only | Self::Both)
    }

    pub fn d2(self) -> bool {
        matches!(self, Self::D2Only | Self::Both)
    }

    pub fn any(self) -> bool {
        self != Self::None
    }

    pub fn received_by(self, receiver: Receiver) -> bool {
        match receiver {
            Receiver::D1 => self.d1(),
            Receiver::D2 => self.d2(),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::D1Only => "d1",
            Self::D2Only => "d2",
            Self::Both => "both",
        }
    }
}

/// One of the two destinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    D1,
    D2,
}

impl Receiver {
    pub const BOTH: [Receiver; 2] = [Receiver::D1, Receiver::D2];

    pub fn index(self) -> usize {
        match self {
            Receiver::D1 => 0,
            Receiver::D2 => 1,
        }
    }
}

/// Joint reception probabilities `(p_none, p_d1_only, p_d2_only, p_both)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceptionVector {
    none: f64,
    d1_only: f64,
    d2_only: f64,
    both: f64,
}

/// Derived marginals of a reception vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marginals {
    /// `p_d1 = p_d1_only + p_both`
    pub d1: f64,
    /// `p_d2 = p_d2_only + p_both`
    pub d2: f64,
    /// `p_{d1 or d2} = 1 - p_none`, computed as the sum of the three receptive entries.
    pub either: f64,
}

impl ReceptionVector {
    pub fn new(none: f64, d1_only: f64, d2_only: f64, both: f64) -> Result<Self, ChannelError> {
        let parts = [none, d1_only, d2_only, both];
        if let Some(bad) = parts.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ChannelError::ProbabilityOutOfRange(*bad));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(ChannelError::ProbabilitySum(sum));
        }
        Ok(Self { none, d1_only, d2_only, both })
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self, ChannelError> {
        Self::new(p[0], p[1], p[2], p[3])
    }

    /// Independent erasures with per-receiver success probabilities `q1`, `q2`.
    pub fn independent(q1: f64, q2: f64) -> Result<Self, ChannelError> {
        for q in [q1, q2] {
            if !(0.0..=1.0).contains(&q) {
                return Err(ChannelError::ProbabilityOutOfRange(q));
            }
        }
        Self::new(
            (1.0 - q1) * (1.0 - q2),
            q1 * (1.0 - q2),
            (1.0 - q1) * q2,
            q1 * q2,
        )
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.none, self.d1_only, self.d2_only, self.both]
    }

    pub fn prob(&self, status: ReceptionStatus) -> f64 {
        match status {
            ReceptionStatus::None => self.none,
            ReceptionStatus::D1Only => self.d1_only,
            ReceptionStatus::D2Only => self.d2_only,
            ReceptionStatus::Both => self.both,
        }
    }

    pub fn marginals(&self) -> Marginals {
        Marginals {
            d1: self.d1_only + self.both,
            d2: self.d2_only + self.both,
            either: self.d1_only + self.d2_only + self.both,
        }
    }

    /// Maps a uniform draw on `[0, 1)` to a reception status by inverse CDF.
    ///
    /// Zero-probability outcomes are never returned.
    pub fn status_from_uniform(&self, u: f64) -> ReceptionStatus {
        let mut acc = 0.0;
        let mut last = ReceptionStatus::None;
        for status in ReceptionStatus::ALL {
            let p = self.prob(status);
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = status;
            if u < acc {
                return status;
            }
        }
        last
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ReceptionStatus {
        self.status_from_uniform(rng.random::<f64>())
    }
}

/// Draws a reception status for one transmission.
pub fn sample_reception<R: Rng + ?Sized>(p: &ReceptionVector, rng: &mut R) -> ReceptionStatus {
    p.sample(rng)
}

/// How channel quality evolves from slot to slot. States are indices into the support.
#[derive(Debug, Clone, PartialEq)]
pub enum QualityMode {
    Iid { frequencies: Vec<f64> },
    Periodic { pattern: Vec<usize> },
    Markov { transition: Vec<Vec<f64>>, initial: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelQualityProcess {
    labels: Vec<u32>,
    reception: Vec<ReceptionVector>,
    mode: QualityMode,
}

/// Mutable state of a quality process; owned by a single trial.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QualityState {
    slot: u64,
    current: Option<usize>,
}

impl ChannelQualityProcess {
    pub fn new(
        labels: Vec<u32>,
        reception: Vec<ReceptionVector>,
        mode: QualityMode,
    ) -> Result<Self, ChannelError> {
        let n = labels.len();
        if n == 0 {
            return Err(ChannelError::EmptySupport);
        }
        if reception.len() != n {
            return Err(ChannelError::SupportMismatch { support: n, got: reception.len() });
        }
        match &mode {
            QualityMode::Iid { frequencies } => {
                if frequencies.len() != n {
                    return Err(ChannelError::SupportMismatch { support: n, got: frequencies.len() });
                }
                if frequencies.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
                    return Err(ChannelError::BadFrequencies);
                }
                let s: f64 = frequencies.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(ChannelError::BadFrequencies);
                }
            }
            QualityMode::Periodic { pattern } => {
                if pattern.is_empty() {
                    return Err(ChannelError::EmptyPattern);
                }
                if pattern.iter().any(|&c| c >= n) {
                    return Err(ChannelError::UnknownQuality);
                }
            }
            QualityMode::Markov { transition, initial } => {
                if transition.len() != n || *initial >= n {
                    return Err(ChannelError::SupportMismatch { support: n, got: transition.len() });
                }
                for row in transition {
                    if row.len() != n || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(ChannelError::BadTransition);
                    }
                    if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                        return Err(ChannelError::BadTransition);
                    }
                }
            }
        }
        Ok(Self { labels, reception, mode })
    }

    /// A process that always reports the same quality.
    pub fn constant(label: u32, p: ReceptionVector) -> Self {
        Self {
            labels: vec![label],
            reception: vec![p],
            mode: QualityMode::Iid { frequencies: vec![1.0] },
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, quality: usize) -> u32 {
        self.labels[quality]
    }

    pub fn reception(&self, quality: usize) -> &ReceptionVector {
        &self.reception[quality]
    }

    pub fn receptions(&self) -> &[ReceptionVector] {
        &self.reception
    }

    pub fn mode(&self) -> &QualityMode {
        &self.mode
    }

    pub fn initial_state(&self) -> QualityState {
        QualityState::default()
    }

    /// Advances the process by one slot and returns the quality index for that slot.
    pub fn next_quality<R: Rng + ?Sized>(&self, state: &mut QualityState, rng: &mut R) -> usize {
        state.slot += 1;
        let c = match &self.mode {
            QualityMode::Iid { frequencies } => {
                if frequencies.len() == 1 {
                    0
                } else {
                    categorical(frequencies, rng.random::<f64>())
                }
            }
            QualityMode::Periodic { pattern } => {
                pattern[((state.slot - 1) % pattern.len() as u64) as usize]
            }
            QualityMode::Markov { transition, initial } => match state.current {
                None => *initial,
                Some(prev) => categorical(&transition[prev], rng.random::<f64>()),
            },
        };
        state.current = Some(c);
        c
    }
}

fn categorical(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalDistribution {
    /// At most one packet per slot per session.
    Bernoulli,
    /// Binomial(cap, R/cap) packets per slot: bounded support, mean R.
    Batch,
    /// Poisson arrivals in continuous time, `rate` packets per second.
    PoissonTime,
}

/// Per-session packet arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalProcess {
    rates: [f64; 2],
    distribution: ArrivalDistribution,
    batch_cap: u32,
}

pub const DEFAULT_BATCH_CAP: u32 = 4;

impl ArrivalProcess {
    pub fn new(
        rates: [f64; 2],
        distribution: ArrivalDistribution,
        batch_cap: u32,
    ) -> Result<Self, ChannelError> {
        for r in rates {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(ChannelError::BadRate(r));
            }
            match distribution {
                ArrivalDistribution::Bernoulli if r > 1.0 => return Err(ChannelError::BadRate(r)),
                ArrivalDistribution::Batch if batch_cap == 0 || r > batch_cap as f64 => {
                    return Err(ChannelError::BadRate(r))
                }
                _ => {}
            }
        }
        Ok(Self { rates, distribution, batch_cap })
    }

    pub fn rates(&self) -> [f64; 2] {
        self.rates
    }

    pub fn distribution(&self) -> ArrivalDistribution {
        self.distribution
    }

    /// Mean number of arrivals per session over a step of the given duration.
    pub fn mean(&self, duration: f64) -> [f64; 2] {
        match self.distribution {
            ArrivalDistribution::PoissonTime => [self.rates[0] * duration, self.rates[1] * duration],
            _ => self.rates,
        }
    }

    /// Arrivals during one step. Slotted distributions ignore `duration`.
    pub fn sample<R: Rng + ?Sized>(&self, duration: f64, rng: &mut R) -> [u32; 2] {
        let mut out = [0u32; 2];
        for (slot, rate) in out.iter_mut().zip(self.rates) {
            *slot = match self.distribution {
                ArrivalDistribution::Bernoulli => rng.random_bool(rate) as u32,
                ArrivalDistribution::Batch => {
                    let p = rate / self.batch_cap as f64;
                    Binomial::new(self.batch_cap as u64, p)
                        .map(|b| b.sample(rng) as u32)
                        .unwrap_or(0)
                }
                ArrivalDistribution::PoissonTime => {
                    let lambda = rate * duration;
                    if lambda > 0.0 {
                        Poisson::new(lambda).map(|d| d.sample(rng) as u32).unwrap_or(0)
                    } else {
                        0
                    }
                }
            };
        }
        out
    }
}

/// Independent random streams of one trial. Schemes sharing a seed see the same
/// channel-quality and arrival sample paths.
#[derive(Debug, Clone)]
pub struct TrialRng {
    pub channel: ChaCha8Rng,
    pub arrivals: ChaCha8Rng,
    pub service: ChaCha8Rng,
}

impl TrialRng {
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self { channel: stream(1), arrivals: stream(2), service: stream(3) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frequency_of<F: Fn(ReceptionStatus) -> bool>(p: &ReceptionVector, n: usize, f: F) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..n).filter(|_| f(p.sample(&mut rng))).count() as f64 / n as f64
    }

    #[test]
    fn iid_uniform_two_qualities() {
        let p = ReceptionVector::from_array([0.0, 0.5, 0.5, 0.0]).unwrap();
        let q = ReceptionVector::from_array([0.0, 0.0, 0.0, 1.0]).unwrap();
        let proc_ = ChannelQualityProcess::new(
            vec![1, 2],
            vec![p, q],
            QualityMode::Iid { frequencies: vec![0.5, 0.5] },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut st = proc_.initial_state();
        let n = 1_000_000;
        let ones = (0..n).filter(|_| proc_.next_quality(&mut st, &mut rng) == 0).count();
        let f = ones as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.002, "{f}");
    }

    #[test]
    fn periodic_wraps_after_twelve() {
        let p = ReceptionVector::from_array([0.0, 0.0, 0.0, 1.0]).unwrap();
        let pattern: Vec<usize> = [1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4].iter().map(|c| c - 1).collect();
        let proc_ = ChannelQualityProcess::new(
            vec![1, 2, 3, 4],
            vec![p; 4],
            QualityMode::Periodic { pattern },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = proc_.initial_state();
        let labels: Vec<u32> =
            (0..13).map(|_| proc_.label(proc_.next_quality(&mut st, &mut rng))).collect();
        assert_eq!(labels[..12], [1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4]);
        assert_eq!(labels[12], 1);
    }

    #[test]
    fn degenerate_support() {
        let p = ReceptionVector::independent(0.3, 0.4).unwrap();
        let proc_ = ChannelQualityProcess::constant(9, p);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = proc_.initial_state();
        assert!((0..1000).all(|_| proc_.next_quality(&mut st, &mut rng) == 0));
    }

    #[test]
    fn markov_follows_transitions() {
        let p = ReceptionVector::independent(0.5, 0.5).unwrap();
        // deterministic alternation
        let proc_ = ChannelQualityProcess::new(
            vec![0, 1],
            vec![p, p],
            QualityMode::Markov { transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]], initial: 1 },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut st = proc_.initial_state();
        let seq: Vec<usize> = (0..5).map(|_| proc_.next_quality(&mut st, &mut rng)).collect();
        assert_eq!(seq, vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn sampling_extremes() {
        let always_both = ReceptionVector::from_array([0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(frequency_of(&always_both, 10_000, |s| s == ReceptionStatus::Both), 1.0);
        let never = ReceptionVector::from_array([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(frequency_of(&never, 10_000, |s| s == ReceptionStatus::None), 1.0);
        assert_eq!(always_both.status_from_uniform(0.0), ReceptionStatus::Both);
        assert_eq!(always_both.status_from_uniform(0.999_999_9), ReceptionStatus::Both);
    }

    #[test]
    fn split_vector_half_and_half() {
        let p = ReceptionVector::from_array([0.0, 0.5, 0.5, 0.0]).unwrap();
        let f = frequency_of(&p, 100_000, |s| s == ReceptionStatus::D1Only);
        assert!((f - 0.5).abs() < 0.005, "{f}");
    }

    #[test]
    fn empirical_frequencies_within_four_sigma() {
        let p = ReceptionVector::from_array([0.14, 0.06, 0.56, 0.24]).unwrap();
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[p.sample(&mut rng) as usize] += 1;
        }
        for (i, s) in ReceptionStatus::ALL.iter().enumerate() {
            let pi = p.prob(*s);
            let f = counts[i] as f64 / n as f64;
            let sigma = (pi * (1.0 - pi) / n as f64).sqrt();
            assert!((f - pi).abs() <= 4.0 * sigma, "{s:?}: {f} vs {pi}");
        }
    }

    #[test]
    fn marginals_match_worked_example() {
        let m = ReceptionVector::independent(0.5, 0.7).unwrap().marginals();
        assert!((m.either - 0.85).abs() < 1e-12);
        assert!((m.d1 - 0.5).abs() < 1e-12 && (m.d2 - 0.7).abs() < 1e-12);
        let m = ReceptionVector::independent(2.0 / 3.0, 1.0 / 3.0).unwrap().marginals();
        assert!((m.either - 7.0 / 9.0).abs() < 1e-12);
        let m = ReceptionVector::from_array([1.0, 0.0, 0.0, 0.0]).unwrap().marginals();
        assert_eq!((m.d1, m.d2, m.either), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            ReceptionVector::from_array([0.1, 0.2, 0.3, 0.3]),
            Err(ChannelError::ProbabilitySum(_))
        ));
        assert!(ReceptionVector::from_array([-0.1, 0.4, 0.4, 0.3]).is_err());
        assert!(ReceptionVector::independent(1.2, 0.3).is_err());
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = ReceptionVector::independent(0.5, 0.5).unwrap();
        let proc_ = ChannelQualityProcess::new(
            vec![1, 2, 3],
            vec![p; 3],
            QualityMode::Iid { frequencies: vec![0.2, 0.3, 0.5] },
        )
        .unwrap();
        let draw = |seed| {
            let mut rng = TrialRng::new(seed);
            let mut st = proc_.initial_state();
            (0..500).map(|_| proc_.next_quality(&mut st, &mut rng.channel)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn arrival_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        for dist in [ArrivalDistribution::Bernoulli, ArrivalDistribution::Batch] {
            let a = ArrivalProcess::new([0.3, 0.7], dist, DEFAULT_BATCH_CAP).unwrap();
            let mut sum = [0u64; 2];
            for _ in 0..n {
                let s = a.sample(1.0, &mut rng);
                assert!(s.iter().all(|&x| x <= DEFAULT_BATCH_CAP));
                sum[0] += s[0] as u64;
                sum[1] += s[1] as u64;
            }
            for (i, r) in [0.3, 0.7].iter().enumerate() {
                let m = sum[i] as f64 / n as f64;
                assert!((m - r).abs() < 0.01, "{dist:?} {m}");
            }
        }
        let zero = ArrivalProcess::new([0.0, 0.0], ArrivalDistribution::PoissonTime, 1).unwrap();
        assert_eq!(zero.sample(5.0, &mut rng), [0, 0]);
        assert!(ArrivalProcess::new([1.5, 0.0], ArrivalDistribution::Bernoulli, 1).is_err());
    }
}
