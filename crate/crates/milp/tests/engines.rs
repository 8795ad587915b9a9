use mgflex_milp::*;
use proptest::prelude::*;

fn random_model(seed: &[(i8, i8, i8)], n_bin: usize, rows: &[(Vec<i8>, i8, u8)]) -> MilpModel {
    let mut m = MilpModel::new("rand");
    for (j, &(c, lo, hi)) in seed.iter().enumerate() {
        let kind = if j < n_bin { ColumnKind::Binary } else { ColumnKind::Continuous };
        let (l, u) = if kind == ColumnKind::Binary {
            (0.0, 1.0)
        } else {
            let a = lo as f64 / 4.0;
            let b = a + (hi.unsigned_abs() as f64) / 2.0;
            (a, b)
        };
        m.add_column(format!("c{j}"), l, u, c as f64 / 3.0, kind);
    }
    for (i, (coefs, rhs, sense)) in rows.iter().enumerate() {
        let sense = match sense % 3 {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let terms: Vec<(usize, f64)> = coefs
            .iter()
            .enumerate()
            .take(seed.len())
            .map(|(j, &a)| (j, a as f64 / 2.0))
            .collect();
        if terms.iter().all(|&(_, a)| a == 0.0) {
            continue;
        }
        m.add_row(format!("r{i}"), terms, sense, *rhs as f64 / 2.0);
    }
    m
}

fn enumerate(m: &MilpModel) -> Option<f64> {
    let bins: Vec<usize> = m.binaries().collect();
    let dense = DenseSimplex::default();
    let mut best: Option<f64> = None;
    for mask in 0..(1u32 << bins.len()) {
        let fix: Vec<(usize, f64)> = bins
            .iter()
            .enumerate()
            .map(|(k, &j)| (j, ((mask >> k) & 1) as f64))
            .collect();
        let lp = dense.open(m).solve(&fix);
        if lp.is_optimal() {
            best = Some(best.map_or(lp.objective, |b: f64| b.min(lp.objective)));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn dense_and_sparse_relaxations_agree(
        cols in prop::collection::vec((-9i8..9, -8i8..4, 1i8..12), 2..7),
        rows in prop::collection::vec((prop::collection::vec(-4i8..5, 7), -10i8..14, 0u8..3), 1..6),
    ) {
        let m = random_model(&cols, 0, &rows);
        let a = DenseSimplex::default().open(&m).solve(&[]);
        let b = SparseSimplex.open(&m).solve(&[]);
        prop_assert_eq!(a.status, b.status);
        if a.is_optimal() {
            prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()),
                "{} vs {}", a.objective, b.objective);
            let v = m.max_violation(&a.values);
            prop_assert!(v.row <= 1e-7 && v.bound <= 1e-9);
        }
    }

    #[test]
    fn branch_and_bound_matches_enumeration(
        cols in prop::collection::vec((-9i8..9, -8i8..4, 1i8..12), 3..8),
        n_bin in 1usize..5,
        rows in prop::collection::vec((prop::collection::vec(-4i8..5, 8), -10i8..14, 0u8..3), 1..6),
        depth_first in any::<bool>(),
        pseudo in any::<bool>(),
    ) {
        let n_bin = n_bin.min(cols.len());
        let m = random_model(&cols, n_bin, &rows);
        let expect = enumerate(&m);
        let opts = SolveOptions {
            rel_gap: 1e-9,
            node_order: if depth_first { NodeOrder::DepthFirst } else { NodeOrder::BestBound },
            branching: if pseudo { Branching::PseudoCost } else { Branching::MostFractional },
            ..Default::default()
        };
        let r = solve_milp(&m, &opts);
        match expect {
            None => prop_assert_eq!(r.status, SolveStatus::Infeasible),
            Some(e) => {
                prop_assert_eq!(r.status, SolveStatus::OptimalWithinGap);
                let o = r.objective.unwrap();
                prop_assert!((o - e).abs() <= 1e-6 * (1.0 + e.abs()), "bnb {} vs enum {}", o, e);
                prop_assert!(r.root_bound.unwrap() <= o + 1e-7);
            }
        }
    }

    #[test]
    fn mps_round_trip(
        cols in prop::collection::vec((-9i8..9, -8i8..4, 1i8..12), 1..8),
        n_bin in 0usize..3,
        rows in prop::collection::vec((prop::collection::vec(-4i8..5, 8), -10i8..14, 0u8..3), 1..6),
    ) {
        let m = random_model(&cols, n_bin.min(cols.len()), &rows);
        let a = write_mps(&m).text;
        let parsed = parse_mps(a.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &m);
        prop_assert_eq!(write_mps(&parsed).text, a);
    }
}
