use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use surfdeform::code::{validate_generators, validate_meas, Extent, Side};
use surfdeform::deform::{
    adaptive_enlarge, baseline_ascs, deform_cycle, random_defects, remove_defects, DefectSet, DeformationResult,
};
use surfdeform::distance::{brute_force_distance, distance};
use surfdeform::gf2::Span;
use surfdeform::instructions::{dataq_rm, layer_sites, patchq_add, syndromeq_rm};
use surfdeform::{build_rotated_code, CodePatch, Error, LatticeCoord, Pauli, PauliString};

fn assert_valid(p: &CodePatch) {
    let g = validate_generators(p);
    assert!(g.ok, "generators: {:?}", g.violations);
    let m = validate_meas(p);
    assert!(m.ok, "meas: {:?}", m.violations);
}

fn no_support_on_disabled(p: &CodePatch) -> bool {
    p.meas().all(|op| op.support().all(|q| p.is_active(p.coord_of(q))))
}

fn meas_span(p: &CodePatch) -> Span {
    Span::from_ops(p.meas())
}

fn same_span(a: &CodePatch, b: &CodePatch) -> bool {
    let (sa, sb) = (meas_span(a), meas_span(b));
    sa.rank() == sb.rank() && a.meas().all(|o| sb.contains(o))
}

#[test]
fn pristine_counts_and_boundaries() {
    for d in 2..=7 {
        let p = build_rotated_code(d).unwrap();
        assert_valid(&p);
        let n = d * d;
        assert_eq!(Span::from_ops(&p.generators.stabilizers).rank(), n - 1);
        assert_eq!(p.stab_set.len(), n - 1);
        let b = p.boundaries();
        assert_eq!(b.len(), 4);
        // perimeter qubits, corners counted on both adjacent sides
        let total: usize = b.iter().map(|x| x.qubits.len()).sum();
        assert_eq!(total, 4 * d);
        let order = [Side::Top, Side::Right, Side::Bottom, Side::Left];
        for k in 0..4 {
            let a = b.iter().find(|x| x.side == order[k]).unwrap();
            let c = b.iter().find(|x| x.side == order[(k + 1) % 4]).unwrap();
            assert_ne!(a.kind, c.kind);
        }
    }
}

/// A removal either succeeds or reports that the logical qubit was lost.
fn unless_broken(r: surfdeform::Result<DeformationResult>) -> Option<DeformationResult> {
    match r {
        Ok(r) => Some(r),
        Err(Error::CodeBroken(_)) => None,
        Err(e) => panic!("removal failed: {e}"),
    }
}

fn single_site_s2g(p: &CodePatch, r: i32, c: i32, x: bool) -> Option<CodePatch> {
    let g = p.single(LatticeCoord::data(r, c), if x { Pauli::X } else { Pauli::Z }).ok()?;
    let mut q = p.clone();
    q.apply_s2g(&g).ok()?;
    Some(q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn atomic_steps_keep_validators_green(steps in prop::collection::vec((0i32..4, 0i32..4, any::<bool>()), 1..5)) {
        let mut p = build_rotated_code(4).unwrap();
        for (r, c, x) in steps {
            if let Some(q) = single_site_s2g(&p, r, c, x) {
                assert_valid(&q);
                p = q;
            }
        }
        // fixing every measured gauge that still has a partner keeps validity
        while let Some(g) = p.gauge_set.iter().find(|g| p.gauge_set.iter().any(|h| !h.commutes_with(g))).cloned() {
            p.apply_g2s(&g, 1).unwrap();
            assert_valid(&p);
        }
    }

    #[test]
    fn fixing_the_demoted_stabilizer_restores_meas(r in 0i32..4, c in 0i32..4, x in any::<bool>()) {
        let p = build_rotated_code(4).unwrap();
        let g = p.single(LatticeCoord::data(r, c), if x { Pauli::X } else { Pauli::Z }).unwrap();
        let mut q = p.clone();
        let ins = q.apply_s2g(&g).unwrap();
        assert_valid(&q);
        if let [s] = ins.demoted.as_slice() {
            q.apply_g2s(s, 1).unwrap();
            assert_valid(&q);
            prop_assert!(same_span(&p, &q));
        }
    }

    #[test]
    fn independent_s2g_calls_commute(a in (0i32..5, 0i32..5), b in (0i32..5, 0i32..5), xa in any::<bool>(), xb in any::<bool>()) {
        let p = build_rotated_code(5).unwrap();
        let ga = p.single(LatticeCoord::data(a.0, a.1), if xa { Pauli::X } else { Pauli::Z }).unwrap();
        let gb = p.single(LatticeCoord::data(b.0, b.1), if xb { Pauli::X } else { Pauli::Z }).unwrap();
        let anti = |g: &PauliString| -> Vec<PauliString> {
            p.stab_set.iter().filter(|s| !s.commutes_with(g)).cloned().collect()
        };
        let independent = a != b
            && anti(&ga).iter().all(|s| s.commutes_with(&gb))
            && anti(&gb).iter().all(|s| s.commutes_with(&ga));
        prop_assume!(independent);
        let mut ab = p.clone();
        ab.apply_s2g(&ga).unwrap();
        ab.apply_s2g(&gb).unwrap();
        let mut ba = p.clone();
        ba.apply_s2g(&gb).unwrap();
        ba.apply_s2g(&ga).unwrap();
        prop_assert!(same_span(&ab, &ba));
        prop_assert_eq!(ab.stab_set.len(), ba.stab_set.len());
        prop_assert_eq!(ab.gauge_set.len(), ba.gauge_set.len());
    }
}

#[test]
fn composite_expansions_replay_exactly() {
    let p = build_rotated_code(5).unwrap();
    let cases = [
        dataq_rm(&p, LatticeCoord::data(2, 2)).unwrap(),
        syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap(),
        patchq_add(&p, Side::Bottom, &layer_sites(&p, Side::Bottom)).unwrap(),
    ];
    for (post, ins) in cases {
        let mut replayed = p.clone();
        replayed.apply_steps(&ins.expansion).unwrap();
        assert_eq!(replayed, post, "{}", ins.header());
        assert_valid(&post);
        assert!(no_support_on_disabled(&post));
    }
}

#[test]
fn disjoint_interior_removals_commute() {
    let p = build_rotated_code(6).unwrap();
    let q = LatticeCoord::data(1, 1);
    let s = LatticeCoord::plaquette(3, 3);
    let (a, _) = dataq_rm(&p, q).unwrap();
    let (ab, _) = syndromeq_rm(&a, s).unwrap();
    let (b, _) = syndromeq_rm(&p, s).unwrap();
    let (ba, _) = dataq_rm(&b, q).unwrap();
    assert!(same_span(&ab, &ba));
    assert_eq!(ab.stab_set.len(), ba.stab_set.len());
    assert_eq!(ab.gauge_set.len(), ba.gauge_set.len());
    assert_eq!(ab.disabled, ba.disabled);
    assert_eq!(distance(&ab).unwrap(), distance(&ba).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn removal_matches_the_exhaustive_distance(seed in any::<u64>(), k in 1usize..4) {
        let p = build_rotated_code(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defects = random_defects(&p, k, &mut rng);
        for res in [remove_defects(&p, &defects), baseline_ascs(&p, &defects)] {
            let Some(res) = unless_broken(res) else { continue };
            assert_valid(&res.patch);
            prop_assert!(no_support_on_disabled(&res.patch));
            let (dx, dz) = res.distance_after;
            let (ox, oz) = brute_force_distance(&res.patch, 5);
            prop_assert_eq!(Some(dx), ox);
            prop_assert_eq!(Some(dz), oz);
            let replayed = res.schedule.replay(&p).unwrap();
            prop_assert_eq!(&replayed, &res.patch);
        }
    }

    #[test]
    fn surf_removal_dominates_ascs(seed in any::<u64>(), k in 1usize..6) {
        let p = build_rotated_code(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defects = random_defects(&p, k, &mut rng);
        let min = |r| unless_broken(r).map_or(0, |r| r.min_distance());
        prop_assert!(min(remove_defects(&p, &defects)) >= min(baseline_ascs(&p, &defects)));
    }

    #[test]
    fn enlargement_restores_or_flags(seed in any::<u64>(), k in 1usize..4) {
        let p = build_rotated_code(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let defects = random_defects(&p, k, &mut rng);
        let Some(removed) = unless_broken(remove_defects(&p, &defects)) else { return Ok(()) };
        let grown = adaptive_enlarge(&removed.patch, &removed.skipped, 5, 4).unwrap();
        assert_valid(&grown.patch);
        let (dx, dz) = distance(&grown.patch).unwrap();
        prop_assert_eq!((dx, dz), grown.distance_after);
        if !grown.budget_exceeded {
            prop_assert!(dx >= 5 && dz >= 5);
        }
        // no new defects: a second round leaves the patch alone
        let again = deform_cycle(&[(0, grown.patch.clone())], &[], 5, 4).unwrap();
        if !grown.budget_exceeded {
            prop_assert_eq!(&again[0].1.patch, &grown.patch);
            prop_assert!(again[0].1.schedule.is_empty());
        }
    }

    #[test]
    fn layers_never_shrink_and_removals_never_grow(r in 1i32..4, c in 1i32..4, side in 0usize..4) {
        let p = build_rotated_code(5).unwrap();
        let (q, _) = dataq_rm(&p, LatticeCoord::data(r, c)).unwrap();
        let (px, pz) = distance(&p).unwrap();
        let (qx, qz) = distance(&q).unwrap();
        prop_assert!(qx <= px && qz <= pz);
        let side = [Side::Top, Side::Bottom, Side::Left, Side::Right][side];
        let (g, _) = patchq_add(&q, side, &layer_sites(&q, side)).unwrap();
        assert_valid(&g);
        let (gx, gz) = distance(&g).unwrap();
        prop_assert!(gx >= qx && gz >= qz);
    }
}

#[test]
fn transposed_rectangles_swap_distances() {
    for (h, w) in [(3, 5), (4, 7), (2, 6)] {
        let a = CodePatch::rectangle(Extent { top: 0, bottom: h - 1, left: 0, right: w - 1 });
        let b = CodePatch::rectangle(Extent { top: 0, bottom: w - 1, left: 0, right: h - 1 });
        let (ax, az) = distance(&a).unwrap();
        let (bx, bz) = distance(&b).unwrap();
        assert_eq!((ax, az), (bz, bx));
    }
}

#[test]
fn pristine_distances_match_the_oracle() {
    for d in 2..=5 {
        let p = build_rotated_code(d).unwrap();
        assert_eq!(distance(&p).unwrap(), (d, d));
        assert_eq!(brute_force_distance(&p, d), (Some(d), Some(d)));
    }
    let empty = DefectSet::new();
    let p = build_rotated_code(5).unwrap();
    assert_eq!(remove_defects(&p, &empty).unwrap().patch, p);
}
