use std::io::Write;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;
use crate::instance::{FixedSeries, MicrogridInstance, SeriesKind};

/// Summed prosumer net load per sub-period, flat `(t, k)` order. May be negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetLoadSeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl NetLoadSeries {
    pub fn at(&self, t: usize, k: usize) -> f64 {
        self.values[self.grid.flat(t, k)]
    }
}

/// Closed interval on a change of grid exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub up: f64,
}

impl Interval {
    fn around(limit: f64, shift: f64) -> Self {
        Self {
            low: -limit - shift,
            up: limit - shift,
        }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.low - tol && x <= self.up + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntraBound {
    pub t: usize,
    /// 2..=K
    pub k: usize,
    pub bound: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterBound {
    /// 2..=T
    pub t: usize,
    pub bound: Interval,
}

/// Bounds on the microgrid's grid-exchange steps that keep the feeder
/// within its ramp limits.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct FlexibilityEnvelope {
    /// Bounds on `PM[t,k] - PM[t,k-1]`.
    pub intra: Vec<IntraBound>,
    /// Bounds on `PM[t,1] - PM[t-1,K]`.
    pub inter: Vec<InterBound>,
    /// Bounds on `PM[1,1]` itself, from the previous day's feeder power.
    pub first: Option<Interval>,
}

impl FlexibilityEnvelope {
    pub fn is_empty(&self) -> bool {
        self.intra.is_empty() && self.inter.is_empty() && self.first.is_none()
    }

    /// Writes `t,k,kind,low,up`; inter-hour rows carry `k = 1`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CoreError::Internal(format!("envelope dump: {e}"));
        w.write_record(["t", "k", "kind", "low", "up"]).map_err(err)?;
        if let Some(b) = self.first {
            w.write_record(["1", "1", "initial", &b.low.to_string(), &b.up.to_string()])
                .map_err(err)?;
        }
        for b in &self.inter {
            w.write_record([
                b.t.to_string(),
                "1".into(),
                "inter".into(),
                b.bound.low.to_string(),
                b.bound.up.to_string(),
            ])
            .map_err(err)?;
        }
        for b in &self.intra {
            w.write_record([
                b.t.to_string(),
                b.k.to_string(),
                "intra".into(),
                b.bound.low.to_string(),
                b.bound.up.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| CoreError::Internal(e.to_string()))
    }
}

/// Elementwise sum of the given profiles; zeros when `profiles` is empty.
pub fn aggregate_prosumers(grid: TimeGrid, profiles: &[&FixedSeries]) -> Result<NetLoadSeries> {
    let mut values = vec![0.0; grid.horizon()];
    for p in profiles {
        if p.values.len() != values.len() {
            return Err(CoreError::InvalidArgument(format!(
                "profile {} has {} values, expected {}",
                p.id,
                p.values.len(),
                values.len()
            )));
        }
        for (acc, v) in values.iter_mut().zip(&p.values) {
            *acc += v;
        }
    }
    Ok(NetLoadSeries { grid, values })
}

pub fn intra_hour_envelope(agg: &NetLoadSeries, delta1: f64) -> Result<Vec<IntraBound>> {
    if !(delta1 >= 0.0) {
        return Err(CoreError::InvalidArgument(format!("delta1 must be >= 0, got {delta1}")));
    }
    let g = agg.grid;
    let mut out = Vec::with_capacity(g.periods() * g.subperiods().saturating_sub(1));
    for t in 1..=g.periods() {
        for k in 2..=g.subperiods() {
            let step = agg.at(t, k) - agg.at(t, k - 1);
            out.push(IntraBound {
                t,
                k,
                bound: Interval::around(delta1, step),
            });
        }
    }
    Ok(out)
}

pub fn inter_hour_envelope(agg: &NetLoadSeries, delta2: f64) -> Result<Vec<InterBound>> {
    if !(delta2 >= 0.0) {
        return Err(CoreError::InvalidArgument(format!("delta2 must be >= 0, got {delta2}")));
    }
    let g = agg.grid;
    let k_last = g.subperiods();
    Ok((2..=g.periods())
        .map(|t| InterBound {
            t,
            bound: Interval::around(delta2, agg.at(t, 1) - agg.at(t - 1, k_last)),
        })
        .collect())
}

/// The envelope for an instance's flexibility limits; empty when none are set.
pub fn build_envelope(inst: &MicrogridInstance) -> Result<FlexibilityEnvelope> {
    let profiles: Vec<&FixedSeries> = inst.series(SeriesKind::ProsumerNetLoad).collect();
    let agg = aggregate_prosumers(inst.grid, &profiles)?;
    let mut env = FlexibilityEnvelope::default();
    if let Some(d1) = inst.flex.delta1 {
        env.intra = intra_hour_envelope(&agg, d1)?;
    }
    if let Some(d2) = inst.flex.delta2 {
        env.inter = inter_hour_envelope(&agg, d2)?;
        if let Some(prev) = inst.previous_utility_power {
            // |PM[1,1] + agg[1,1] - prev| <= delta2
            env.first = Some(Interval::around(d2, agg.at(1, 1) - prev));
        }
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(grid: TimeGrid, values: Vec<f64>) -> NetLoadSeries {
        NetLoadSeries { grid, values }
    }

    fn profile(values: Vec<f64>) -> FixedSeries {
        FixedSeries {
            id: "p".into(),
            kind: SeriesKind::ProsumerNetLoad,
            values,
        }
    }

    #[test]
    fn aggregation() {
        let g = TimeGrid::new(1, 2).unwrap();
        let a = profile(vec![1.0, 1.0]);
        let b = profile(vec![2.5, 2.5]);
        assert_eq!(aggregate_prosumers(g, &[&a, &b]).unwrap().values, vec![3.5, 3.5]);
        assert_eq!(aggregate_prosumers(g, &[]).unwrap().values, vec![0.0, 0.0]);
        assert_eq!(aggregate_prosumers(g, &[&a]).unwrap().values, a.values);
        let short = profile(vec![1.0]);
        assert!(aggregate_prosumers(g, &[&a, &short]).is_err());
    }

    #[test]
    fn intra_substitution() {
        let g = TimeGrid::new(1, 2).unwrap();
        let e = intra_hour_envelope(&series(g, vec![3.0, 3.5]), 1.0).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].bound, Interval { low: -1.5, up: 0.5 });

        let e = intra_hour_envelope(&series(g, vec![3.0, 3.5]), 0.0).unwrap();
        assert_eq!(e[0].bound, Interval { low: -0.5, up: -0.5 });

        let e = intra_hour_envelope(&series(g, vec![2.0, 2.0]), 0.7).unwrap();
        assert_eq!(e[0].bound, Interval { low: -0.7, up: 0.7 });

        assert!(intra_hour_envelope(&series(g, vec![2.0, 2.0]), -0.1).is_err());
    }

    #[test]
    fn inter_substitution() {
        let g = TimeGrid::new(2, 1).unwrap();
        let e = inter_hour_envelope(&series(g, vec![4.0, 5.5]), 2.0).unwrap();
        assert_eq!((e[0].t, e[0].bound), (2, Interval { low: -3.5, up: 0.5 }));

        let e = inter_hour_envelope(&series(g, vec![4.0, 4.0]), 0.0).unwrap();
        assert_eq!(e[0].bound, Interval { low: 0.0, up: 0.0 });

        let pm_max = 10.0;
        let e = inter_hour_envelope(&series(g, vec![-3.0, 7.0]), 1e6).unwrap();
        assert!(e[0].bound.low <= -2.0 * pm_max && e[0].bound.up >= 2.0 * pm_max);

        assert!(inter_hour_envelope(&series(g, vec![0.0, 0.0]), -1.0).is_err());
    }

    #[test]
    fn first_hour_needs_previous_power() {
        let mut inst = crate::instance::tests::sample();
        assert!(build_envelope(&inst).unwrap().first.is_none());
        inst.previous_utility_power = Some(2.0);
        let env = build_envelope(&inst).unwrap();
        // agg[1,1] = 1.0, so PM[1,1] + 1 must stay within 2 of 2.0.
        assert_eq!(env.first, Some(Interval { low: -1.0, up: 3.0 }));
    }

    #[test]
    fn csv_dump_shape() {
        let inst = crate::instance::tests::sample();
        let env = build_envelope(&inst).unwrap();
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,k,kind,low,up");
        assert_eq!(lines.len(), 1 + env.intra.len() + env.inter.len());
    }
}
