use proptest::prelude::*;

use incsim_core::channel::ArrivalDistribution;
use incsim_core::engine::{run_trial, write_series_csv, MetricsSeries};
use incsim_core::presets;
use incsim_core::scenario::{ComboSpec, ModeName, RateAdaptationSpec, ReceptionSpec, Scenario, Scheme};
use incsim_core::spn::PressureMode;

fn scheme() -> impl Strategy<Value = Scheme> {
    prop_oneof![
        Just(Scheme::SevenOp),
        Just(Scheme::FiveOpBp),
        Just(Scheme::FiveOpPriority),
        Just(Scheme::Routing),
    ]
}

fn unit_vector() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.01f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum();
        let mut p = w.map(|v| v / s);
        // Absorb rounding so the entries sum to one within validation tolerance.
        p[3] = 1.0 - p[0] - p[1] - p[2];
        p
    })
}

/// A short four-quality scenario with random reception, load and scheme.
fn scenario() -> impl Strategy<Value = Scenario> {
    (
        scheme(),
        prop::collection::vec(unit_vector(), 1..4),
        prop::array::uniform2(0.0f64..0.6),
        any::<u64>(),
        prop_oneof![Just(PressureMode::Virtual), Just(PressureMode::InterVirtual)],
        any::<bool>(),
    )
        .prop_map(|(scheme, quality, rates, seed, pressure, batch)| {
            let mut s = presets::fig8b().scenarios[0].clone();
            let n = quality.len();
            let ch = s.channel.as_mut().unwrap();
            ch.support = (1..=n as u32).collect();
            ch.frequencies = Some(vec![1.0 / n as f64; n]);
            ch.quality = quality.into_iter().map(ReceptionSpec::vector).collect();
            s.scheme = scheme;
            s.pressure = pressure;
            s.arrivals.rates = rates;
            if batch {
                s.arrivals.distribution = ArrivalDistribution::Batch;
            }
            s.seed = seed;
            s.horizon = 3000.0;
            s.options.sample_stride = 10;
            s.options.decodability_every = 50;
            s.options.strict = true;
            s
        })
}

fn csv(m: &MetricsSeries) -> Vec<u8> {
    let mut out = Vec::new();
    write_series_csv(&mut out, m).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_same_series(s in scenario()) {
        let a = run_trial(&s).unwrap();
        let b = run_trial(&s).unwrap();
        prop_assert_eq!(csv(&a), csv(&b));
        prop_assert_eq!(a.delays, b.delays);
    }

    /// Arrivals equal deliveries plus what is still inside the network, at
    /// every sample; counts never decrease and delays are non-negative.
    #[test]
    fn arrivals_are_accounted(s in scenario()) {
        let m = run_trial(&s).unwrap();
        prop_assert!(m.integrity.is_clean(), "{:?}", m.integrity);
        let mut last = [0u64; 2];
        for x in &m.samples {
            let l = x.lengths;
            let inside = (l.iter().sum::<usize>() + l[4]) as u64;
            prop_assert_eq!(x.arrived[0] + x.arrived[1], x.delivered[0] + x.delivered[1] + inside);
            prop_assert!(x.delivered[0] >= last[0] && x.delivered[1] >= last[1]);
            last = x.delivered;
        }
        prop_assert!(m.delays.iter().all(|&d| d >= 0.0));
        prop_assert_eq!(m.delays.len() as u64, m.delivered[0] + m.delivered[1]);
    }

    /// Every scheme sees the same channel qualities and arrivals under one seed.
    #[test]
    fn schemes_share_sample_paths(s in scenario()) {
        let runs: Vec<MetricsSeries> = [Scheme::SevenOp, Scheme::FiveOpBp, Scheme::FiveOpPriority, Scheme::Routing]
            .into_iter()
            .map(|k| run_trial(&Scenario { scheme: k, ..s.clone() }).unwrap())
            .collect();
        for r in &runs[1..] {
            prop_assert_eq!(r.samples.len(), runs[0].samples.len());
            for (a, b) in r.samples.iter().zip(&runs[0].samples) {
                prop_assert_eq!(a.quality, b.quality);
                prop_assert_eq!(a.arrived, b.arrived);
            }
        }
    }

    /// One unit-length combo carrying the channel's own vectors reproduces the
    /// plain slotted run step for step.
    #[test]
    fn single_combo_matches_plain(s in scenario()) {
        let per_quality = s.channel.as_ref().unwrap().quality.iter().map(|q| q.p.unwrap()).collect();
        let ra = Scenario {
            rate_adaptation: Some(RateAdaptationSpec {
                arrival_mode: s.arrivals.distribution,
                combo: vec![ComboSpec { duration: 1.0, p: None, independent: None, per_quality: Some(per_quality) }],
            }),
            ..s.clone()
        };
        prop_assert_eq!(csv(&run_trial(&s).unwrap()), csv(&run_trial(&ra).unwrap()));
    }

    #[test]
    fn scenario_text_round_trips(s in scenario(), label in proptest::option::of("[a-z_]{1,12}"), theta in 0.0f64..2.0) {
        let s = Scenario { label, theta, ..s };
        prop_assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }
}

#[test]
fn zero_arrivals_leave_queues_empty() {
    for scheme in [Scheme::SevenOp, Scheme::FiveOpBp, Scheme::FiveOpPriority, Scheme::Routing] {
        let mut s = presets::fig7().scenarios[1].clone();
        s.scheme = scheme;
        s.theta = 0.0;
        s.horizon = 2000.0;
        let m = run_trial(&s).unwrap();
        assert!(m.samples.iter().all(|x| x.backlog == 0), "{scheme:?}");
        assert_eq!(m.delivered, [0, 0]);
    }
}

#[test]
fn markov_channel_round_trips_and_runs() {
    let mut s = presets::fig8b().scenarios[0].clone();
    let ch = s.channel.as_mut().unwrap();
    ch.mode = ModeName::Markov;
    ch.frequencies = None;
    ch.transition = Some(vec![vec![0.7, 0.1, 0.1, 0.1]; 4]);
    ch.initial = Some(4);
    s.horizon = 2000.0;
    s.theta = 0.6;
    s.options.sample_stride = 1;
    assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    let m = run_trial(&s).unwrap();
    assert!(m.integrity.is_clean());
    assert_eq!(m.samples[1].step, 1);
    assert_eq!(m.samples[1].quality, 3, "first slot starts from the initial label");
    let in_zero = m.samples[1..].iter().filter(|x| x.quality == 0).count() as f64 / 2000.0;
    assert!((in_zero - 0.7).abs() < 0.05, "stationary share of quality 0: {in_zero}");
}
