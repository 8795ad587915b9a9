use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::grid::TimeGrid;

/// An islanding window: sub-periods `start..start+length`, 1-based global positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub start: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub psi: f64,
    /// `None` for the grid-connected scenario.
    pub window: Option<Window>,
}

impl Scenario {
    /// Islanding indicator `w` at zero-based flat index `p`: 1 connected, 0 islanded.
    pub fn connected(&self, p: usize) -> bool {
        match self.window {
            None => true,
            Some(w) => !(w.start - 1..w.start - 1 + w.length).contains(&p),
        }
    }
}

/// Scenario 0 is grid-connected; the rest each island one window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSet {
    pub grid: TimeGrid,
    pub k_island: usize,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn psi(&self, s: usize) -> f64 {
        self.scenarios[s].psi
    }

    pub fn w(&self, p: usize, s: usize) -> bool {
        self.scenarios[s].connected(p)
    }

    /// Writes `s,psi,start,length`; the base scenario has `start` 0 and `length` 0.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| CoreError::Internal(format!("scenario dump: {e}"));
        w.write_record(["s", "psi", "start", "length"]).map_err(err)?;
        for (s, sc) in self.scenarios.iter().enumerate() {
            let (start, len) = sc.window.map_or((0, 0), |w| (w.start, w.length));
            w.write_record([s.to_string(), sc.psi.to_string(), start.to_string(), len.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| CoreError::Internal(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOptions {
    /// Keep islanding starts 1, 1+stride, 1+2*stride, ...
    pub stride: usize,
    /// Probability pinned by islanding start position; others share the rest.
    pub overrides: BTreeMap<usize, f64>,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            overrides: BTreeMap::new(),
        }
    }
}

/// Base scenario plus one islanding scenario per start position.
pub fn generate_scenarios(grid: TimeGrid, k_island: usize, psi_base: f64) -> Result<ScenarioSet> {
    generate_scenarios_with(grid, k_island, psi_base, &ScenarioOptions::default())
}

pub fn generate_scenarios_with(
    grid: TimeGrid,
    k_island: usize,
    psi_base: f64,
    opts: &ScenarioOptions,
) -> Result<ScenarioSet> {
    let horizon = grid.horizon();
    let bad = |m: String| Err(CoreError::InvalidArgument(m));
    if k_island > horizon {
        return bad(format!("k_island {k_island} exceeds the {horizon} sub-periods"));
    }
    if !(psi_base > 0.0 && psi_base <= 1.0) {
        return bad(format!("psi_base must lie in (0, 1], got {psi_base}"));
    }
    if opts.stride == 0 {
        return bad("stride must be >= 1".into());
    }
    if k_island == 0 {
        return Ok(ScenarioSet {
            grid,
            k_island,
            scenarios: vec![Scenario {
                psi: 1.0,
                window: None,
            }],
        });
    }
    if psi_base >= 1.0 {
        return bad("psi_base must be < 1 when islanding scenarios exist".into());
    }

    let starts: Vec<usize> = (1..=horizon).step_by(opts.stride).collect();
    for &s in opts.overrides.keys() {
        if !starts.contains(&s) {
            return bad(format!("probability override for start {s}, which is not generated"));
        }
    }
    let pinned: f64 = opts.overrides.values().sum();
    let free = starts.len() - opts.overrides.len();
    let remaining = 1.0 - psi_base - pinned;
    if opts.overrides.values().any(|&p| !(p > 0.0)) || remaining < -1e-12 || (free > 0 && remaining <= 0.0) {
        return bad(format!(
            "probability overrides sum to {pinned}, leaving {remaining} for {free} scenarios"
        ));
    }
    let share = if free > 0 { remaining / free as f64 } else { 0.0 };

    let mut scenarios = Vec::with_capacity(starts.len() + 1);
    scenarios.push(Scenario {
        psi: psi_base,
        window: None,
    });
    for start in starts {
        scenarios.push(Scenario {
            psi: opts.overrides.get(&start).copied().unwrap_or(share),
            window: Some(Window {
                start,
                length: k_island.min(horizon - start + 1),
            }),
        });
    }
    Ok(ScenarioSet {
        grid,
        k_island,
        scenarios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_day_ten_minute_count() {
        let g = TimeGrid::new(24, 6).unwrap();
        let set = generate_scenarios(g, 4, 0.9).unwrap();
        assert_eq!(set.len(), 145);
        assert_eq!(set.scenarios[1].window, Some(Window { start: 1, length: 4 }));
        assert_eq!(set.scenarios[144].window, Some(Window { start: 144, length: 1 }));
    }

    #[test]
    fn no_islanding() {
        let g = TimeGrid::new(24, 6).unwrap();
        let set = generate_scenarios(g, 0, 0.9).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.psi(0), 1.0);
    }

    #[test]
    fn hand_enumerated_small_grid() {
        let g = TimeGrid::new(2, 2).unwrap();
        let set = generate_scenarios(g, 2, 0.8).unwrap();
        assert_eq!(set.len(), 5);
        let islanded: Vec<Vec<usize>> = (1..5)
            .map(|s| (0..4).filter(|&p| !set.w(p, s)).map(|p| p + 1).collect())
            .collect();
        assert_eq!(islanded, vec![vec![1, 2], vec![2, 3], vec![3, 4], vec![4]]);
        for s in 1..5 {
            assert!((set.psi(s) - 0.05).abs() < 1e-15);
        }
        assert!((0..4).all(|p| set.w(p, 0)));
    }

    #[test]
    fn stride_renormalizes() {
        let g = TimeGrid::new(24, 6).unwrap();
        let opts = ScenarioOptions {
            stride: 12,
            ..Default::default()
        };
        let set = generate_scenarios_with(g, 4, 0.9, &opts).unwrap();
        assert_eq!(set.len(), 13);
        let total: f64 = set.scenarios.iter().map(|s| s.psi).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(set.scenarios[2].window.unwrap().start, 13);
    }

    #[test]
    fn overrides_pin_probabilities() {
        let g = TimeGrid::new(1, 4).unwrap();
        let opts = ScenarioOptions {
            stride: 1,
            overrides: [(2, 0.04)].into_iter().collect(),
        };
        let set = generate_scenarios_with(g, 1, 0.9, &opts).unwrap();
        assert_eq!(set.psi(2), 0.04);
        assert!((set.psi(1) - 0.02).abs() < 1e-15);
        let too_much = ScenarioOptions {
            stride: 1,
            overrides: [(2, 0.2)].into_iter().collect(),
        };
        assert!(generate_scenarios_with(g, 1, 0.9, &too_much).is_err());
    }

    #[test]
    fn invalid_arguments() {
        let g = TimeGrid::new(1, 2).unwrap();
        assert!(generate_scenarios(g, 3, 0.9).is_err());
        assert!(generate_scenarios(g, 1, 1.0).is_err());
        assert!(generate_scenarios(g, 1, 0.0).is_err());
    }
}
