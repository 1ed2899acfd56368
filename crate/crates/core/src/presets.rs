//! Built-in experiment settings.

use crate::channel::ArrivalDistribution;
use crate::scenario::{
    ArrivalSpec, ChannelSpec, ComboSpec, ModeName, Options, RateAdaptationSpec, ReceptionSpec,
    Scenario, Scheme, SCHEMA_VERSION,
};
use crate::spn::PressureMode;

/// A family of scenarios swept over a common θ grid.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub scenarios: Vec<Scenario>,
    pub thetas: Vec<f64>,
    /// Reference sum rates drawn as vertical markers.
    pub capacities: Vec<(&'static str, f64)>,
}

pub const PRESET_NAMES: [&str; 7] = ["fig7", "fig8a", "fig8b", "fig8c", "fig9", "fig10", "table3"];

/// Reception vectors of the four-quality channel.
pub const FOUR_QUALITY: [[f64; 4]; 4] = [
    [0.14, 0.06, 0.56, 0.24],
    [0.14, 0.56, 0.06, 0.24],
    [0.04, 0.16, 0.16, 0.64],
    [0.49, 0.21, 0.21, 0.09],
];

pub const RA_COMBOS: [(f64, [f64; 4]); 2] =
    [(1.0, [0.005, 0.095, 0.045, 0.855]), (1.0 / 3.0, [0.48, 0.32, 0.12, 0.08])];

/// Proportional-fair rate point of the rate-adaptation channel, packets/second.
pub const RA_FAIR_POINT: [f64; 2] = [0.6508, 0.5245];

pub fn preset(name: &str) -> Option<Preset> {
    Some(match name {
        "fig7" => fig7(),
        "fig8a" => fig8a(),
        "fig8b" => fig8b(),
        "fig8c" => fig8c(),
        "fig9" => fig9(),
        "fig10" => fig10(),
        "table3" => table3(),
        _ => return None,
    })
}

fn base(name: &str, scheme: Scheme, channel: ChannelSpec, rates: [f64; 2]) -> Scenario {
    Scenario {
        version: SCHEMA_VERSION,
        name: name.to_string(),
        label: None,
        scheme,
        pressure: PressureMode::InterVirtual,
        seed: 1,
        horizon: 1e5,
        theta: 1.0,
        channel: Some(channel),
        arrivals: ArrivalSpec {
            rates,
            distribution: ArrivalDistribution::Bernoulli,
            batch_cap: crate::channel::DEFAULT_BATCH_CAP,
        },
        rate_adaptation: None,
        options: Options::default(),
    }
}

fn labelled(mut s: Scenario, label: &str) -> Scenario {
    s.label = Some(label.to_string());
    s
}

pub fn fig7_channel() -> ChannelSpec {
    ChannelSpec {
        support: vec![1, 2],
        mode: ModeName::Iid,
        frequencies: Some(vec![0.5, 0.5]),
        pattern: None,
        transition: None,
        initial: None,
        quality: vec![ReceptionSpec::vector([0.0, 0.5, 0.5, 0.0]), ReceptionSpec::vector([0.0, 0.0, 0.0, 1.0])],
    }
}

pub fn four_quality_channel(frequencies: [f64; 4]) -> ChannelSpec {
    ChannelSpec {
        support: vec![1, 2, 3, 4],
        mode: ModeName::Iid,
        frequencies: Some(frequencies.to_vec()),
        pattern: None,
        transition: None,
        initial: None,
        quality: FOUR_QUALITY.iter().map(|p| ReceptionSpec::vector(*p)).collect(),
    }
}

pub fn periodic_channel() -> ChannelSpec {
    ChannelSpec {
        mode: ModeName::Periodic,
        frequencies: None,
        pattern: Some(vec![1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4]),
        ..four_quality_channel([0.25; 4])
    }
}

/// θ values whose sum rate `θ·(r1+r2)` runs from `lo` to `hi` in `steps` increments.
fn sum_grid(lo: f64, hi: f64, steps: usize, rate_sum: f64) -> Vec<f64> {
    (0..=steps).map(|i| (lo + (hi - lo) * i as f64 / steps as f64) / rate_sum).collect()
}

pub fn fig7() -> Preset {
    let seven = base("fig7", Scheme::SevenOp, fig7_channel(), [1.0, 1.0]);
    let mut seven_virtual = labelled(seven.clone(), "seven_op_virtual");
    seven_virtual.pressure = PressureMode::Virtual;
    Preset {
        name: "fig7",
        scenarios: vec![
            seven_virtual,
            seven.clone(),
            Scenario { scheme: Scheme::FiveOpBp, ..seven.clone() },
            Scenario { scheme: Scheme::Routing, ..seven },
        ],
        thetas: sum_grid(0.6, 1.1, 10, 2.0),
        capacities: vec![("seven_op", 1.0), ("five_op", 0.875), ("routing", 0.75)],
    }
}

fn four_quality_preset(name: &'static str, channel: ChannelSpec, caps: (f64, f64)) -> Preset {
    let seven = base(name, Scheme::SevenOp, channel, [1.0, 1.0]);
    Preset {
        name,
        scenarios: vec![
            seven.clone(),
            Scenario { scheme: Scheme::FiveOpPriority, ..seven.clone() },
            Scenario { scheme: Scheme::Routing, ..seven },
        ],
        thetas: sum_grid(0.5, 0.85, 14, 2.0),
        capacities: vec![("seven_op", caps.0), ("routing", caps.1)],
    }
}

pub fn fig8a() -> Preset {
    four_quality_preset("fig8a", four_quality_channel([0.15, 0.15, 0.35, 0.35]), (0.716, 0.625))
}

pub fn fig8b() -> Preset {
    four_quality_preset("fig8b", four_quality_channel([0.25; 4]), (0.748, 0.675))
}

pub fn fig8c() -> Preset {
    let mut p = four_quality_preset("fig8c", periodic_channel(), (0.748, 0.675));
    p.capacities.clear();
    p
}

/// Uniform four-quality channel with session 1 ten times as heavy as session 2.
pub fn fig9() -> Preset {
    let seven = base("fig9", Scheme::SevenOp, four_quality_channel([0.25; 4]), [1.0, 0.1]);
    Preset {
        name: "fig9",
        scenarios: vec![
            seven.clone(),
            Scenario { scheme: Scheme::FiveOpPriority, ..seven.clone() },
            Scenario { scheme: Scheme::Routing, ..seven },
        ],
        thetas: sum_grid(0.4, 0.8, 16, 1.1),
        capacities: vec![],
    }
}

pub fn ra_scenario(scheme: Scheme, combos: &[usize], label: &str) -> Scenario {
    Scenario {
        version: SCHEMA_VERSION,
        name: "fig10".to_string(),
        label: Some(label.to_string()),
        scheme,
        pressure: PressureMode::InterVirtual,
        seed: 1,
        horizon: 1e5,
        theta: 1.0,
        channel: None,
        arrivals: ArrivalSpec {
            rates: RA_FAIR_POINT,
            distribution: ArrivalDistribution::PoissonTime,
            batch_cap: crate::channel::DEFAULT_BATCH_CAP,
        },
        rate_adaptation: Some(RateAdaptationSpec {
            arrival_mode: ArrivalDistribution::PoissonTime,
            combo: combos
                .iter()
                .map(|&i| ComboSpec {
                    duration: RA_COMBOS[i].0,
                    p: Some(RA_COMBOS[i].1),
                    independent: None,
                    per_quality: None,
                })
                .collect(),
        }),
        options: Options::default(),
    }
}

pub fn fig10() -> Preset {
    Preset {
        name: "fig10",
        scenarios: vec![
            ra_scenario(Scheme::SevenOp, &[0, 1], "adaptive"),
            ra_scenario(Scheme::Routing, &[0, 1], "routing_ra"),
            ra_scenario(Scheme::FiveOpBp, &[0], "conservative"),
            ra_scenario(Scheme::FiveOpBp, &[1], "aggressive"),
        ],
        thetas: (0..=10).map(|i| 0.6 + 0.05 * i as f64).collect(),
        capacities: vec![
            ("adaptive", RA_FAIR_POINT[0] + RA_FAIR_POINT[1]),
            ("routing_ra", 1.0446),
            ("conservative", 0.9503),
            ("aggressive", 0.9102),
        ],
    }
}

/// Seven-operation runs at 90% and 95% of the sum capacity for the settings
/// with published delay and buffer figures.
pub fn table3() -> Preset {
    let settings = [
        ("fig7", fig7_channel(), 1.0),
        ("fig8a", four_quality_channel([0.15, 0.15, 0.35, 0.35]), 0.716),
        ("fig8b", four_quality_channel([0.25; 4]), 0.748),
    ];
    let mut scenarios = Vec::new();
    for (name, channel, cap) in settings {
        for load in [0.90, 0.95] {
            let mut s = base(name, Scheme::SevenOp, channel.clone(), [cap / 2.0, cap / 2.0]);
            s.label = Some(format!("{name}_{:.0}", load * 100.0));
            s.theta = load;
            scenarios.push(s);
        }
    }
    Preset { name: "table3", scenarios, thetas: vec![], capacities: vec![] }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            for s in &p.scenarios {
                s.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
                assert_eq!(&Scenario::from_toml(&s.to_toml()).unwrap(), s, "{name}");
            }
        }
        assert!(preset("fig11").is_none());
    }

    #[test]
    fn four_quality_first_vector() {
        let b = fig8a().scenarios[0].build().unwrap();
        assert_eq!(b.channel.len(), 4);
        assert_eq!(b.channel.reception(0).as_array(), [0.14, 0.06, 0.56, 0.24]);
    }

    #[test]
    fn uneven_rates() {
        let s = &fig9().scenarios[0];
        assert_eq!(s.arrivals.rates[0], 10.0 * s.arrivals.rates[1]);
        match &s.channel.as_ref().unwrap().frequencies {
            Some(f) => assert_eq!(f, &vec![0.25; 4]),
            None => panic!("frequencies missing"),
        }
    }
}
