use proptest::prelude::*;

use surfdeform::code::Extent;
use surfdeform::layout::{area_sites, block_probability, choose_delta_d, sample_defect_events, DefectModel, Layout, LayoutKind};
use surfdeform::router::{generate_tasks, route, run_tasks, schedule_step, DeformCache, Occupancy, Tile, TileGrid};

fn adjacent(a: Tile, b: Tile) -> bool {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_probability_is_monotone(d in 3usize..40, dd in 0usize..12, scale in 0.1f64..20.0) {
        let m = DefectModel::<f64>::nominal().with_rate_scale(scale);
        let p = block_probability(d, dd, &m);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(block_probability(d, dd + 1, &m) <= p);
        prop_assert!(block_probability(d + 2, dd, &m) >= p);
    }

    #[test]
    fn chosen_budget_is_tight(d in 3usize..40, scale in 0.1f64..10.0, alpha in 1e-4f64..0.5) {
        let m = DefectModel::<f64>::nominal().with_rate_scale(scale);
        let dd = choose_delta_d(d, &m, alpha).unwrap();
        prop_assert!(block_probability(d, dd, &m) < alpha);
        prop_assert!(dd == 0 || block_probability(d, dd - 1, &m) >= alpha);
    }

    #[test]
    fn events_are_reproducible_and_in_area(seed in any::<u64>(), w in 3i32..15, scale in 1.0f64..200.0) {
        let m = DefectModel::<f64>::nominal().with_rate_scale(scale);
        let area = Extent { top: 0, bottom: w - 1, left: 0, right: w - 1 };
        let a = sample_defect_events(&m, 5000, &area, seed);
        let sites = area_sites(&area);
        prop_assert_eq!(&a, &sample_defect_events(&m, 5000, &area, seed));
        for e in &a {
            prop_assert!(e.region.contains(&e.epicenter));
            prop_assert!(e.region.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(e.region.iter().all(|s| sites.binary_search(s).is_ok()));
        }
    }

    #[test]
    fn routes_are_free_contiguous_chains(n in 2usize..10, kind in 0usize..3, a in 0usize..10, b in 0usize..10) {
        prop_assume!(a < n && b < n && a != b);
        let kind = [LayoutKind::Ours, LayoutKind::Q3de, LayoutKind::LatticeSurgery][kind];
        let layout = Layout::grid(n, 5, 2, kind);
        let tiles = TileGrid::new(&layout);
        let req = surfdeform::router::RoutingRequest { control: a, target: b };
        let path = route(&layout, &tiles, &req, &Occupancy::default()).expect("pristine grid is connected");
        prop_assert!(tiles.z_faces(&layout, a).contains(&path[0]));
        prop_assert!(tiles.x_faces(&layout, b).contains(path.last().unwrap()));
        prop_assert!(path.iter().all(|t| tiles.passable(*t)));
        prop_assert!(path.windows(2).all(|w| adjacent(w[0], w[1])));
    }

    #[test]
    fn a_step_commits_disjoint_routes(n in 4usize..16, seed in any::<u64>()) {
        let layout = Layout::grid(n, 5, 2, LayoutKind::Ours);
        let tiles = TileGrid::new(&layout);
        let tasks = generate_tasks(&layout, 1, n / 2, None, seed).unwrap();
        let step = schedule_step(&layout, &tiles, &tasks[0]);
        prop_assert!(!step.executed.is_empty());
        let mut seen = std::collections::BTreeSet::new();
        let mut patches = std::collections::BTreeSet::new();
        for (i, path) in &step.executed {
            let r = tasks[0][*i];
            prop_assert!(patches.insert(r.control) && patches.insert(r.target));
            for t in path {
                prop_assert!(seen.insert(*t), "tile {:?} used twice", t);
            }
        }
    }

    #[test]
    fn quiet_layouts_match_lattice_surgery(n in 4usize..12, seed in any::<u64>()) {
        let ours = Layout::grid(n, 5, 0, LayoutKind::Ours);
        let ls = Layout::grid(n, 5, 0, LayoutKind::LatticeSurgery);
        let tasks = generate_tasks(&ls, 2, n / 2, None, seed).unwrap();
        let a = run_tasks(&ours, &tasks, &[], 0, 500, &DeformCache::new(5, 0));
        let b = run_tasks(&ls, &tasks, &[], 0, 500, &DeformCache::new(5, 0));
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.ops_completed, a.ops_total);
    }
}
