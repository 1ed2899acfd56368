//! Generic (0,1) random stochastic processing network and the deficit
//! max-weight scheduler that drives it.
//!
//! Queues are indexed `0..K`, input activities `0..M`, service activities
//! `0..N`. A service vector activates at most one service activity, so the
//! scheduler's decision is an `Option<usize>` where `None` is the all-zero
//! vector.

use rand::Rng;

use crate::error::SpnError;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ServiceMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, SpnError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SpnError::Dimension("ragged matrix rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |r| self.get(r, c))
    }
}

/// Static description of a (0,1) random SPN with one expected-matrix pair per
/// channel quality.
#[derive(Debug, Clone, PartialEq)]
pub struct SpnInstance {
    input: Vec<Vec<u32>>,
    in_sets: Vec<Vec<usize>>,
    out_sets: Vec<Vec<usize>>,
    conditions: Vec<(ServiceMatrix, ServiceMatrix)>,
}

impl SpnInstance {
    /// `input` is the K×M arrival matrix; `conditions[c]` is `(B̄in(c), B̄out(c))`.
    pub fn new(
        input: Vec<Vec<u32>>,
        in_sets: Vec<Vec<usize>>,
        out_sets: Vec<Vec<usize>>,
        conditions: Vec<(ServiceMatrix, ServiceMatrix)>,
    ) -> Result<Self, SpnError> {
        let k = input.len();
        let n = in_sets.len();
        if out_sets.len() != n {
            return Err(SpnError::Dimension(format!(
                "{} input sets vs {} output sets",
                n,
                out_sets.len()
            )));
        }
        let m = input.first().map_or(0, Vec::len);
        if input.iter().any(|row| row.len() != m) {
            return Err(SpnError::Dimension("ragged input matrix".into()));
        }
        if in_sets.iter().chain(&out_sets).flatten().any(|&q| q >= k) {
            return Err(SpnError::Dimension("queue index out of range".into()));
        }
        for (b_in, b_out) in &conditions {
            for mat in [b_in, b_out] {
                if mat.rows() != k || mat.cols() != n {
                    return Err(SpnError::Dimension(format!(
                        "expected {k}x{n} service matrix, got {}x{}",
                        mat.rows(),
                        mat.cols()
                    )));
                }
            }
            for a in 0..n {
                for q in 0..k {
                    let (vi, vo) = (b_in.get(q, a), b_out.get(q, a));
                    let bad_in = !(0.0..=1.0).contains(&vi) || (vi != 0.0 && !in_sets[a].contains(&q));
                    let bad_out =
                        !(0.0..=1.0).contains(&vo) || (vo != 0.0 && !out_sets[a].contains(&q));
                    if bad_in || bad_out {
                        return Err(SpnError::Pattern { queue: q, activity: a });
                    }
                }
            }
        }
        let inst = Self { input, in_sets, out_sets, conditions };
        if inst.has_cycle() {
            return Err(SpnError::Cyclic);
        }
        Ok(inst)
    }

    fn has_cycle(&self) -> bool {
        let k = self.queues();
        let mut succ = vec![Vec::new(); k];
        for (ins, outs) in self.in_sets.iter().zip(&self.out_sets) {
            for &a in ins {
                succ[a].extend(outs.iter().copied());
            }
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        fn visit(v: usize, succ: &[Vec<usize>], mark: &mut [u8]) -> bool {
            mark[v] = 1;
            for &w in &succ[v] {
                if mark[w] == 1 || (mark[w] == 0 && visit(w, succ, mark)) {
                    return true;
                }
            }
            mark[v] = 2;
            false
        }
        let mut mark = vec![0u8; k];
        (0..k).any(|v| mark[v] == 0 && visit(v, &succ, &mut mark))
    }

    pub fn queues(&self) -> usize {
        self.input.len()
    }

    pub fn input_activities(&self) -> usize {
        self.input.first().map_or(0, Vec::len)
    }

    pub fn service_activities(&self) -> usize {
        self.in_sets.len()
    }

    pub fn conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn in_set(&self, n: usize) -> &[usize] {
        &self.in_sets[n]
    }

    pub fn out_set(&self, n: usize) -> &[usize] {
        &self.out_sets[n]
    }

    pub fn b_in(&self, c: usize) -> &ServiceMatrix {
        &self.conditions[c].0
    }

    pub fn b_out(&self, c: usize) -> &ServiceMatrix {
        &self.conditions[c].1
    }

    /// Every input-queue entry is strictly positive under every condition.
    pub fn inputs_positive(&self) -> bool {
        self.conditions.iter().all(|(b_in, _)| {
            self.in_sets.iter().enumerate().all(|(n, ks)| ks.iter().all(|&k| b_in.get(k, n) > 0.0))
        })
    }

    /// `A·a` as integers.
    pub fn arrival_vector(&self, a: &[u32]) -> Vec<i64> {
        self.input
            .iter()
            .map(|row| row.iter().zip(a).map(|(&x, &y)| x as i64 * y as i64).sum())
            .collect()
    }

    /// Expected consumption and production of activity `n` under condition `c`.
    pub fn expected_column(&self, c: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        (self.b_in(c).column(n).collect(), self.b_out(c).column(n).collect())
    }
}

/// `d = (B̄in − B̄out)ᵀ q`.
pub fn back_pressure(q: &[f64], b_in: &ServiceMatrix, b_out: &ServiceMatrix) -> Vec<f64> {
    (0..b_in.cols())
        .map(|n| (0..b_in.rows()).map(|k| (b_in.get(k, n) - b_out.get(k, n)) * q[k]).sum())
        .collect()
}

/// Index of the largest strictly positive pressure, lowest index on ties.
pub fn argmax_positive(d: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (n, &v) in d.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((n, v));
        }
    }
    best.map(|(n, _)| n)
}

/// DMW preferred service activity, `None` for the all-zero vector.
pub fn preferred_vector(
    q: &[f64],
    b_in: &ServiceMatrix,
    b_out: &ServiceMatrix,
) -> Result<Option<usize>, SpnError> {
    if q.len() != b_in.rows() || b_in.rows() != b_out.rows() || b_in.cols() != b_out.cols() {
        return Err(SpnError::Dimension(format!(
            "q has {} entries, matrices are {}x{} and {}x{}",
            q.len(),
            b_in.rows(),
            b_in.cols(),
            b_out.rows(),
            b_out.cols()
        )));
    }
    Ok(argmax_positive(&back_pressure(q, b_in, b_out)))
}

/// Which counter family feeds the back-pressure computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMode {
    Virtual,
    #[default]
    InterVirtual,
}

/// 0/1 realized consumption and production of the preferred activity, per queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub consumed: Vec<u8>,
    pub produced: Vec<u8>,
}

impl Realization {
    pub fn idle(k: usize) -> Self {
        Self { consumed: vec![0; k], produced: vec![0; k] }
    }
}

/// Independent Bernoulli draw of every edge of activity `n` under condition `c`.
pub fn sample_realization<R: Rng + ?Sized>(
    inst: &SpnInstance,
    c: usize,
    n: usize,
    rng: &mut R,
) -> Realization {
    let (b_in, b_out) = inst.expected_column(c, n);
    let mut draw = |p: f64| (rng.random::<f64>() < p) as u8;
    Realization {
        consumed: b_in.into_iter().map(&mut draw).collect(),
        produced: b_out.into_iter().map(&mut draw).collect(),
    }
}

/// `Q_inter_k ← (Q_inter_k − μ_out,k)⁺ + μ_in,k`.
pub fn step_inter_actual(q_inter: &mut [i64], mu_out: &[i64], mu_in: &[i64]) {
    for ((q, o), i) in q_inter.iter_mut().zip(mu_out).zip(mu_in) {
        *q = (*q - o).max(0) + i;
    }
}

/// The four queue-length families plus null-activity counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpnCounters {
    /// Expected-value virtual queues; may go negative.
    pub q: Vec<f64>,
    /// Realization-driven virtual queues; may go negative.
    pub q_inter: Vec<i64>,
    /// Clamped intermediate queues, never negative.
    pub q_inter_actual: Vec<i64>,
    /// Actual queue lengths.
    pub actual: Vec<u64>,
    pub null_activity: Vec<u64>,
}

impl SpnCounters {
    pub fn new(k: usize) -> Self {
        Self {
            q: vec![0.0; k],
            q_inter: vec![0; k],
            q_inter_actual: vec![0; k],
            actual: vec![0; k],
            null_activity: vec![0; k],
        }
    }

    /// Counter family used for pressure, as reals.
    pub fn pressure_source(&self, mode: PressureMode) -> Vec<f64> {
        match mode {
            PressureMode::Virtual => self.q.clone(),
            PressureMode::InterVirtual => self.q_inter.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn actual_as_f64(&self) -> Vec<f64> {
        self.actual.iter().map(|&v| v as f64).collect()
    }

    /// `q += A·a + (B̄out − B̄in)·x*`, regardless of feasibility.
    pub fn step_virtual(
        &mut self,
        inst: &SpnInstance,
        c: usize,
        arrivals: &[i64],
        preferred: Option<usize>,
    ) {
        for (k, a) in arrivals.iter().enumerate() {
            self.q[k] += *a as f64;
        }
        if let Some(n) = preferred {
            for k in 0..self.q.len() {
                self.q[k] += inst.b_out(c).get(k, n) - inst.b_in(c).get(k, n);
            }
        }
    }

    /// `q_inter += A·a + (Bout − Bin)·x*` with realized matrices.
    pub fn step_inter_virtual(&mut self, arrivals: &[i64], realized: &Realization) {
        for k in 0..self.q_inter.len() {
            self.q_inter[k] +=
                arrivals[k] + realized.produced[k] as i64 - realized.consumed[k] as i64;
        }
    }

    /// Counts queues of the preferred activity whose clamped intermediate
    /// length falls short of the realized consumption. Must run before the
    /// intermediate update of the same slot.
    pub fn record_null_activity(
        &mut self,
        inst: &SpnInstance,
        preferred: Option<usize>,
        realized: &Realization,
    ) {
        let Some(n) = preferred else { return };
        for &k in inst.in_set(n) {
            if self.q_inter_actual[k] < realized.consumed[k] as i64 {
                self.null_activity[k] += 1;
            }
        }
    }

    /// Actual queues: arrivals only when idle-by-infeasibility, otherwise the
    /// executed movement too.
    pub fn step_actual(&mut self, arrivals: &[i64], executed: Option<&Realization>) {
        for k in 0..self.actual.len() {
            let mut v = self.actual[k] as i64 + arrivals[k];
            if let Some(r) = executed {
                v += r.produced[k] as i64 - r.consumed[k] as i64;
            }
            assert!(v >= 0, "actual queue {k} went negative");
            self.actual[k] = v as u64;
        }
    }

    /// One full slot of bookkeeping in the order the definitions require.
    /// `realized` is the draw for the preferred activity (idle if none);
    /// `feasible` tells whether it was actually executed.
    pub fn advance(
        &mut self,
        inst: &SpnInstance,
        c: usize,
        arrivals: &[i64],
        preferred: Option<usize>,
        realized: &Realization,
        feasible: bool,
    ) {
        self.record_null_activity(inst, preferred, realized);
        self.step_inter_virtual(arrivals, realized);
        let mu_out: Vec<i64> = realized.consumed.iter().map(|&v| v as i64).collect();
        let mu_in: Vec<i64> =
            realized.produced.iter().zip(arrivals).map(|(&v, a)| v as i64 + a).collect();
        step_inter_actual(&mut self.q_inter_actual, &mu_out, &mu_in);
        self.step_virtual(inst, c, arrivals, preferred);
        self.step_actual(arrivals, (feasible && preferred.is_some()).then_some(realized));
    }

    /// Activity `n` can run on the actual queues.
    pub fn is_feasible(&self, inst: &SpnInstance, n: usize) -> bool {
        inst.in_set(n).iter().all(|&k| self.actual[k] >= 1)
    }

    pub fn backlog(&self) -> u64 {
        self.actual.iter().sum()
    }
}
