#![allow(dead_code)]

use std::collections::BTreeMap;

use mgflex_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random instance with T <= 3, K <= 2, at most `max_binaries` commitment
/// binaries and 1 to 5 scenarios.
pub fn tiny_instance(seed: u64, max_binaries: usize) -> ValidatedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let raw = draw(&mut rng);
        let bins = raw.grid.periods() * (raw.units.len() + 2 * raw.storages.len())
            + raw.adjustable.iter().map(|d| d.end - d.start + 1).sum::<usize>();
        if bins > max_binaries {
            continue;
        }
        match validate_instance(raw) {
            Ok(v) => return v,
            Err(e) => panic!("generator produced an invalid instance: {e}"),
        }
    }
}

fn round2(x: f64) -> f64 {
    (x * 4.0).round() / 4.0
}

fn draw(rng: &mut ChaCha8Rng) -> MicrogridInstance {
    let periods = rng.gen_range(1..=3);
    let subperiods = rng.gen_range(1..=2);
    let grid = TimeGrid::new(periods, subperiods).unwrap();
    let n = grid.horizon();

    let units = (0..rng.gen_range(1..=2))
        .map(|i| {
            let p_max = round2(rng.gen_range(1.0..4.0));
            let p_min = round2(rng.gen_range(0.0..p_max / 2.0));
            let on = rng.gen_bool(0.5);
            let slope1 = rng.gen_range(10.0..60.0_f64).round();
            let slope2 = slope1 + rng.gen_range(0.0..30.0_f64).round();
            let mid = round2(p_max / 2.0).max(0.25);
            let no_load = rng.gen_range(0.0..20.0_f64).round();
            DispatchableUnit {
                id: format!("g{}", i + 1),
                p_min,
                p_max,
                ramp_up: round2(rng.gen_range(p_min.max(0.5)..=p_max.max(0.5))),
                ramp_down: round2(rng.gen_range(p_min.max(0.5)..=p_max.max(0.5))),
                min_up: rng.gen_range(1..=2),
                min_down: rng.gen_range(1..=2),
                cost: CostCurve {
                    breakpoints: vec![
                        (0.0, no_load),
                        (mid, no_load + slope1 * mid),
                        (p_max, no_load + slope1 * mid + slope2 * (p_max - mid)),
                    ],
                },
                startup_cost: if rng.gen_bool(0.3) { 15.0 } else { 0.0 },
                shutdown_cost: 0.0,
                initial_status: if on { rng.gen_range(1..=2) } else { -rng.gen_range(1..=2) },
                initial_power: if on { p_min.max(round2(p_max / 3.0)) } else { 0.0 },
            }
        })
        .collect();

    let storages = if rng.gen_bool(0.6) {
        let cap = round2(rng.gen_range(1.0..3.0));
        vec![StorageUnit {
            id: "ess".into(),
            charge_min: if rng.gen_bool(0.3) { 0.25 } else { 0.0 },
            charge_max: round2(rng.gen_range(0.5..1.5)),
            discharge_min: 0.0,
            discharge_max: round2(rng.gen_range(0.5..1.5)),
            energy_min: 0.0,
            energy_max: cap,
            initial_energy: round2(cap / 2.0),
            efficiency: 0.9,
            min_charge: rng.gen_range(1..=2),
            min_discharge: 1,
            terminal: if rng.gen_bool(0.3) {
                TerminalPolicy::AtLeastInitial
            } else {
                TerminalPolicy::None
            },
        }]
    } else {
        vec![]
    };

    let adjustable = if rng.gen_bool(0.5) {
        let start = rng.gen_range(1..=periods);
        let end = rng.gen_range(start..=periods);
        let hours = (end - start + 1) as f64;
        vec![AdjustableLoad {
            id: "ev".into(),
            d_min: 0.25,
            d_max: 1.0,
            start,
            end,
            energy: round2(rng.gen_range(0.25..=hours)),
            min_on: 1,
        }]
    } else {
        vec![]
    };

    let load: Vec<f64> = (0..n).map(|_| round2(rng.gen_range(0.5..3.0))).collect();
    let pros: Vec<f64> = (0..n).map(|_| round2(rng.gen_range(-1.0..2.0))).collect();
    let k_island = rng.gen_range(0..=2.min(n));
    let stride = n.div_ceil(4).max(1);
    let flex = match rng.gen_range(0..3) {
        0 => FlexibilitySpec::default(),
        1 => FlexibilitySpec::limits(round2(rng.gen_range(0.0..2.0)), round2(rng.gen_range(0.5..3.0))),
        _ => FlexibilitySpec {
            delta1: Some(round2(rng.gen_range(0.0..1.0))),
            delta2: None,
            enforce_while_islanded: false,
        },
    };
    MicrogridInstance {
        name: "tiny".into(),
        grid,
        units,
        storages,
        adjustable,
        fixed_series: vec![
            FixedSeries {
                id: "load".into(),
                kind: SeriesKind::FixedLoad,
                values: load,
            },
            FixedSeries {
                id: "pros".into(),
                kind: SeriesKind::ProsumerNetLoad,
                values: pros,
            },
        ],
        prices: MarketPrice {
            rho: (0..periods).map(|_| rng.gen_range(20.0..80.0_f64).round()).collect(),
        },
        pm_max: round2(rng.gen_range(1.0..4.0)),
        voll: 1000.0,
        flex,
        previous_utility_power: None,
        islanding_k: k_island,
        psi_base: if k_island == 0 { 1.0 } else { 0.9 },
        scenario_stride: stride,
        psi_overrides: BTreeMap::new(),
        allow_curtailment: true,
    }
}

/// Grid-exchange series built step by step, each step drawn uniformly
/// inside the envelope's interval for that step.
pub fn sample_inside(env: &FlexibilityEnvelope, grid: TimeGrid, rng: &mut impl Rng) -> Vec<f64> {
    let draw = |rng: &mut dyn rand::RngCore, low: f64, up: f64| {
        if up > low {
            rng.gen_range(low..=up)
        } else {
            low
        }
    };
    let mut pm = Vec::with_capacity(grid.horizon());
    pm.push(match env.first {
        Some(i) => draw(rng, i.low, i.up),
        None => draw(rng, -5.0, 5.0),
    });
    for p in 1..grid.horizon() {
        let (t, k) = grid.tk(p);
        let step = if k > 1 {
            env.intra.iter().find(|b| b.t == t && b.k == k).map(|b| b.bound)
        } else {
            env.inter.iter().find(|b| b.t == t).map(|b| b.bound)
        };
        let delta = match step {
            Some(i) => draw(rng, i.low, i.up),
            None => draw(rng, -5.0, 5.0),
        };
        pm.push(pm[p - 1] + delta);
    }
    pm
}

/// Largest amount by which the feeder series `pu` exceeds its ramp limits.
pub fn feeder_excess(pu: &[f64], grid: TimeGrid, flex: &FlexibilitySpec, previous: Option<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..grid.horizon() {
        let (t, k) = grid.tk(p);
        let (prev, limit) = if k > 1 {
            (Some(pu[p - 1]), flex.delta1)
        } else if t > 1 {
            (Some(pu[p - 1]), flex.delta2)
        } else {
            (previous, flex.delta2)
        };
        if let (Some(prev), Some(limit)) = (prev, limit) {
            worst = worst.max((pu[p] - prev).abs() - limit);
        }
    }
    worst
}

/// `PM + sum of prosumer profiles`, recomputed here from raw series.
pub fn feeder_series(inst: &MicrogridInstance, pm: &[f64]) -> Vec<f64> {
    let mut pu = pm.to_vec();
    for s in inst.fixed_series.iter().filter(|s| s.kind == SeriesKind::ProsumerNetLoad) {
        for (a, b) in pu.iter_mut().zip(&s.values) {
            *a += b;
        }
    }
    pu
}
