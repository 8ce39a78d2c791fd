use proptest::prelude::*;
use proptest::strategy::Strategy as _;

use super::Strategy;
use super::*;
use crate::synth::{self, Motion, SynthSpec};

fn cfg_with_ratio(ratio: f64) -> PipelineConfig {
    PipelineConfig {
        mask_ratio: ratio,
        ..PipelineConfig::default()
    }
}

/// A ratio whose rounded target is exactly `count` of `n`.
fn ratio_for(count: usize, n: usize) -> f64 {
    (count as f64 + 0.2) / n as f64
}

fn per_frame(grid: &TokenGrid, cells: &[(usize, usize)]) -> TokenSet {
    TokenSet::from_indices(
        grid.len(),
        (0..grid.frames).flat_map(|t| cells.iter().map(move |&(r, c)| grid.index(t, r, c))),
    )
}

fn window_tokens(grid: &TokenGrid, w: TemporalWindow) -> TokenSet {
    TokenSet::from_indices(grid.len(), (w.start..w.start + w.len).flat_map(|t| grid.frame_range(t)))
}

fn check_partition(plan: &MaskPlan) {
    let visible = plan.visible();
    assert_eq!(visible.len() + plan.masked.len(), plan.grid.len());
    assert!(visible.is_disjoint(&plan.masked));
    assert!(plan.decoder_targets.is_subset(&plan.masked));
}

#[test]
fn random_mask_counts() {
    let small = TokenGrid::new(1, 2, 5);
    assert_eq!(random_mask(&small, 0.9, 3).masked.len(), 9);
    let full = TokenGrid::new(16, 14, 14);
    let plan = random_mask(&full, 0.9, 3);
    assert_eq!(plan.masked.len(), 2822);
    assert_eq!(plan.decoder_targets, plan.masked);
    assert_eq!(plan.ratio_bp, 8999);
    check_partition(&plan);
}

#[test]
fn random_mask_is_deterministic_and_seed_sensitive() {
    let grid = TokenGrid::new(16, 14, 14);
    assert_eq!(random_mask(&grid, 0.9, 11), random_mask(&grid, 0.9, 11));
    assert_ne!(random_mask(&grid, 0.9, 11).masked, random_mask(&grid, 0.9, 12).masked);
}

#[test]
fn tube_mask_masks_whole_tubes() {
    let grid = TokenGrid::new(3, 2, 2);
    let plan = tube_mask(&grid, 0.5, 9);
    assert_eq!(plan.masked.len(), 6);
    let cells_at = |t: usize| -> Vec<usize> {
        plan.masked
            .iter()
            .filter(|&i| grid.coord(i).t == t)
            .map(|i| i - grid.frame_range(t).start)
            .collect()
    };
    assert_eq!(cells_at(0).len(), 2);
    assert_eq!(cells_at(0), cells_at(1));
    assert_eq!(cells_at(0), cells_at(2));
}

#[test]
fn tube_mask_quantizes_per_cell() {
    let grid = TokenGrid::new(16, 14, 14);
    let plan = tube_mask(&grid, 0.9, 1);
    assert_eq!(plan.masked.len() / 16, 176);
    assert_eq!(plan.masked.len(), 2816);
}

#[test]
fn temporal_window_is_centred() {
    let cfg = PipelineConfig::default();
    let g16 = TokenGrid::new(16, 2, 2);
    assert_eq!(temporal_window(&g16, 0.25), TemporalWindow { start: 6, len: 4 });
    let g2 = TokenGrid::new(2, 2, 2);
    assert_eq!(temporal_window(&g2, 0.25), TemporalWindow { start: 0, len: 1 });
    assert_eq!(temporal_window(&g16, 1e-9).len, 1);
    assert_eq!(temporal_window(&g16, 1.0), TemporalWindow { start: 0, len: 16 });

    let plan = temporal_mask(random_mask(&g16, 0.1, 0), &cfg);
    let w = plan.temporal_window.unwrap();
    assert!(window_tokens(&g16, w).is_subset(&plan.masked));
}

#[test]
fn align_ratio_examples() {
    let grid = TokenGrid::new(1, 2, 2);
    let empty = MaskPlan::new(grid, Strategy::Random, TokenSet::empty(4), TokenSet::empty(4), 0);
    let aligned = align_ratio(empty, 0.5, 3);
    assert_eq!(aligned.masked.len(), 2);
    assert_eq!(aligned.trace.alignment_steps, 2);

    let grid = TokenGrid::new(2, 3, 3);
    let at_target = random_mask(&grid, 0.5, 4);
    let again = align_ratio(at_target.clone(), 0.5, 99);
    assert_eq!(again, at_target);
    assert_eq!(again.trace.alignment_steps, 0);
}

#[test]
fn align_ratio_restricts_decoder_targets() {
    let grid = TokenGrid::new(2, 4, 4);
    let plan = random_mask(&grid, 0.9, 2);
    let shrunk = align_ratio(plan, 0.3, 5);
    assert_eq!(shrunk.masked.len(), 10);
    assert_eq!(shrunk.decoder_targets, shrunk.masked);
    assert_eq!(shrunk.ratio_bp, 3125);
}

#[test]
fn running_cell_examples() {
    let grid = TokenGrid::new(2, 2, 2);
    let none = MaskPlan::new(grid, Strategy::Random, TokenSet::empty(8), TokenSet::empty(8), 0);
    let subset = running_cell_decoder_subset(&none);
    assert_eq!(subset.len(), 4);
    // Enumerate parities directly.
    let even: Vec<usize> = (0..2)
        .flat_map(|t| (0..2).flat_map(move |r| (0..2).map(move |c| (t, r, c))))
        .filter(|(t, r, c)| (t + r + c) % 2 == 0)
        .map(|(t, r, c)| t * 4 + r * 2 + c)
        .collect();
    assert_eq!(subset.iter().collect::<Vec<_>>(), even);

    let one = TokenSet::from_indices(8, 1..8);
    let single = MaskPlan::new(grid, Strategy::Random, one.clone(), one, 0);
    assert_eq!(running_cell_decoder_subset(&single).iter().collect::<Vec<_>>(), vec![0]);

    let big = TokenGrid::new(4, 6, 6);
    let all = MaskPlan::new(big, Strategy::Random, TokenSet::empty(144), TokenSet::empty(144), 0);
    assert_eq!(running_cell_decoder_subset(&all).len(), 72);
}

fn disjoint_blobs(grid: &TokenGrid) -> RegionTokens {
    let mut regions = RegionTokens::empty(grid.len());
    regions.left_hand = per_frame(grid, &[(1, 1), (1, 2), (2, 1), (2, 2)]);
    regions.right_hand = per_frame(grid, &[(1, 5), (1, 6), (2, 5), (2, 6)]);
    regions
}

#[test]
fn disjoint_hands_reserve_one_side_before_alignment() {
    let grid = TokenGrid::new(4, 4, 8);
    let regions = disjoint_blobs(&grid);
    let window = temporal_window(&grid, 0.25);
    let outside = window_tokens(&grid, window).complement();
    // Three unwindowed frames keep four hand tokens each.
    let cfg = cfg_with_ratio(ratio_for(grid.len() - 12, grid.len()));
    for seed in 0..20 {
        let plan = st_mask_two_handed(&grid, &regions, Strategy::StHandArm, &cfg, seed).unwrap();
        assert_eq!(plan.trace.alignment_steps, 0);
        let Some(MaskBranch::SideReserve(side)) = plan.trace.branch else {
            panic!("expected side reserve, got {:?}", plan.trace.branch);
        };
        assert_eq!(plan.visible(), regions.hand(side).intersection(&outside));
        assert!(regions.hand(side.opposite()).is_subset(&plan.masked));
        assert_eq!(plan.direction, None);
        assert_eq!(plan.decoder_targets, regions.hands().intersection(&plan.masked));
    }
}

#[test]
fn overlapping_hands_mask_the_near_half() {
    let grid = TokenGrid::new(4, 3, 8);
    let row: Vec<(usize, usize)> = (1..7).map(|c| (1, c)).collect();
    let hands = per_frame(&grid, &row);
    let mut regions = RegionTokens::empty(grid.len());
    regions.left_hand = hands.clone();
    regions.right_hand = hands;
    let window = temporal_window(&grid, 0.25);
    let outside = window_tokens(&grid, window).complement();
    let cfg = cfg_with_ratio(ratio_for(grid.len() - 9, grid.len()));
    let forced = ForcedDraws {
        direction: Some(Direction::Left),
        side: None,
    };
    let plan = st_mask_two_handed_with(&grid, &regions, Strategy::StHandArm, &cfg, 4, forced).unwrap();
    assert_eq!(plan.trace.branch, Some(MaskBranch::Directional));
    assert_eq!(plan.trace.overlap, Some(1.0));
    assert_eq!(plan.direction, Some(Direction::Left));
    assert_eq!(plan.trace.alignment_steps, 0);
    let rightmost = per_frame(&grid, &[(1, 4), (1, 5), (1, 6)]);
    assert_eq!(plan.visible(), rightmost.intersection(&outside));
    let leftmost = per_frame(&grid, &[(1, 1), (1, 2), (1, 3)]);
    assert!(leftmost.is_subset(&plan.masked));
}

#[test]
fn overlap_exactly_at_threshold_reserves_a_side() {
    let grid = TokenGrid::new(2, 2, 8);
    let mut regions = RegionTokens::empty(grid.len());
    regions.left_hand = per_frame(&grid, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
    regions.right_hand = per_frame(&grid, &[(0, 4), (0, 5), (0, 6), (0, 7)]);
    // Per side 8 tokens over two frames, 2 shared: ratio 0.25.
    let plan = st_mask_two_handed(&grid, &regions, Strategy::StHandArm, &PipelineConfig::default(), 0).unwrap();
    assert_eq!(plan.trace.overlap, Some(0.25));
    assert!(matches!(plan.trace.branch, Some(MaskBranch::SideReserve(_))));
}

#[test]
fn one_handed_row_ties_break_by_position() {
    let grid = TokenGrid::new(4, 3, 8);
    let mut regions = RegionTokens::empty(grid.len());
    regions.right_hand = per_frame(&grid, &[(1, 2), (1, 3), (1, 4), (1, 5)]);
    regions.right_arm = per_frame(&grid, &[(0, 6), (0, 7)]);
    regions.left_arm = per_frame(&grid, &[(2, 0)]);
    let window = temporal_window(&grid, 0.25);
    let outside = window_tokens(&grid, window).complement();
    // Visible per unwindowed frame: two hand tokens and two arm tokens.
    let cfg = cfg_with_ratio(ratio_for(grid.len() - 12, grid.len()));
    for (lean, kept_hand, masked_hand) in [
        (Side::Left, [(1, 4), (1, 5)], [(1, 2), (1, 3)]),
        (Side::Right, [(1, 2), (1, 3)], [(1, 4), (1, 5)]),
    ] {
        let forced = ForcedDraws {
            direction: Some(Direction::Top),
            side: Some(lean),
        };
        let plan = st_mask_one_handed_with(&grid, &regions, Side::Right, Strategy::StHandArm, &cfg, 8, forced).unwrap();
        assert_eq!(plan.trace.branch, Some(MaskBranch::OneHanded(Side::Right)));
        assert_eq!(plan.trace.alignment_steps, 0);
        let kept = per_frame(&grid, &kept_hand).union(&per_frame(&grid, &[(0, 6), (0, 7)]));
        assert_eq!(plan.visible(), kept.intersection(&outside), "lean {lean:?}");
        assert!(per_frame(&grid, &masked_hand).is_subset(&plan.masked));
        // The static arm is filler and stays masked.
        assert!(regions.left_arm.is_subset(&plan.masked));
    }
}

#[test]
fn one_handed_upper_arm_split() {
    let grid = TokenGrid::new(2, 4, 4);
    let arm = per_frame(&grid, &[(0, 0), (1, 0), (2, 0)]);
    let upper = upper_arm(&grid, &arm);
    assert_eq!(upper, per_frame(&grid, &[(0, 0), (1, 0)]));
    let flat = per_frame(&grid, &[(3, 1), (3, 2)]);
    assert_eq!(upper_arm(&grid, &flat), flat);
}

#[test]
fn one_handed_without_hand_tokens_is_an_error() {
    let grid = TokenGrid::new(2, 2, 2);
    let mut regions = RegionTokens::empty(grid.len());
    regions.left_hand = per_frame(&grid, &[(0, 0)]);
    let err = st_mask_one_handed(
        &grid,
        &regions,
        Side::Right,
        Strategy::StHandArm,
        &PipelineConfig::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::EmptyRegions));
    let err = st_mask_two_handed(
        &grid,
        &RegionTokens::empty(8),
        Strategy::StHandOnly,
        &PipelineConfig::default(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, Error::EmptyRegions));
}

#[test]
fn directional_halves_orders_by_depth() {
    let grid = TokenGrid::new(1, 4, 4);
    let tokens = TokenSet::from_indices(16, [grid.index(0, 0, 3), grid.index(0, 1, 0), grid.index(0, 3, 2)]);
    let (near, far) = directional_halves(&grid, &tokens, Direction::Bottom, Side::Left);
    assert_eq!(
        near.iter().collect::<Vec<_>>(),
        vec![grid.index(0, 1, 0), grid.index(0, 3, 2)]
    );
    assert_eq!(far.iter().collect::<Vec<_>>(), vec![grid.index(0, 0, 3)]);
    let (near, _) = directional_halves(&grid, &tokens, Direction::Right, Side::Left);
    assert_eq!(
        near.iter().collect::<Vec<_>>(),
        vec![grid.index(0, 0, 3), grid.index(0, 3, 2)]
    );
}

#[test]
fn depth_ties_break_from_the_lean_side() {
    let grid = TokenGrid::new(1, 2, 4);
    let row = TokenSet::from_indices(8, (0..4).map(|c| grid.index(0, 1, c)));
    let (near, _) = directional_halves(&grid, &row, Direction::Top, Side::Left);
    assert_eq!(
        near.iter().collect::<Vec<_>>(),
        vec![grid.index(0, 1, 0), grid.index(0, 1, 1)]
    );
    let (near, _) = directional_halves(&grid, &row, Direction::Top, Side::Right);
    assert_eq!(
        near.iter().collect::<Vec<_>>(),
        vec![grid.index(0, 1, 2), grid.index(0, 1, 3)]
    );
}

fn synth_bundle(motion: Motion, seed: u64) -> ClipBundle {
    synth::clip(&SynthSpec {
        seed,
        ..SynthSpec::new(format!("clip{seed}"), motion)
    })
}

#[test]
fn generate_two_handed_roster() {
    let cfg = PipelineConfig::default();
    let bundle = synth_bundle(Motion::TwoHanded, 1);
    let analysis = analyze(&bundle, &cfg).unwrap();
    let plans = generate(&bundle, &cfg).unwrap();
    let tags: Vec<Strategy> = plans.iter().map(|p| p.strategy).collect();
    assert_eq!(tags, vec![Strategy::Tube, Strategy::StHandArm, Strategy::StHandOnly]);
    assert!(plans[1].decoder_targets.is_subset(&analysis.regions.hand_arm()));
    assert!(!plans[1].decoder_targets.is_disjoint(&analysis.regions.arms()));
    assert!(plans[2].decoder_targets.is_subset(&analysis.regions.hands()));
    for plan in &plans[1..] {
        assert_eq!(plan.masked.len(), 2822);
        check_partition(plan);
    }
    // Seeds mix the clip id in.
    let cs = clip_seed(cfg.seed, "clip1");
    assert_eq!(plans[0].seed, Stream::VideoTube.seed(cs));
}

#[test]
fn generate_one_handed_uses_moving_side() {
    let cfg = PipelineConfig::default();
    for side in [Side::Left, Side::Right] {
        let bundle = synth_bundle(Motion::OneHanded(side), 2);
        let analysis = analyze(&bundle, &cfg).unwrap();
        let plan = plan_stream(&analysis, Stream::VideoSt, &cfg, 5).unwrap();
        assert_eq!(plan.trace.branch, Some(MaskBranch::OneHanded(side)));
    }
}

#[test]
fn generate_no_hands_falls_back_to_tubes() {
    let bundle = synth_bundle(Motion::NoHands, 3);
    let cfg = PipelineConfig::default();
    let plans = generate(&bundle, &cfg).unwrap();
    assert_eq!(plans.len(), 3);
    for plan in &plans {
        assert_eq!(plan.strategy, Strategy::Tube);
    }
    assert_eq!(plans[1].trace.branch, Some(MaskBranch::NoHandsFallback));
    let strict = PipelineConfig {
        no_hands_fallback: false,
        ..cfg
    };
    assert!(matches!(generate(&bundle, &strict), Err(Error::EmptyRegions)));
}

#[test]
fn stream_seeds_differ() {
    let seeds: Vec<u64> = Stream::ALL.iter().map(|s| s.seed(42)).collect();
    assert_ne!(seeds[0], seeds[1]);
    assert_ne!(seeds[1], seeds[2]);
    assert_eq!(Stream::from_name("keypoint-st"), Some(Stream::KeypointSt));
    assert_eq!(Stream::VideoSt.seed(0), fnv1a(b"video-st"));
}

#[test]
fn enum_codes_round_trip() {
    for s in [
        Strategy::Random,
        Strategy::Tube,
        Strategy::StHandArm,
        Strategy::StHandOnly,
    ] {
        assert_eq!(Strategy::from_code(s as u8), Some(s));
        assert_eq!(Strategy::from_name(s.name()), Some(s));
    }
    assert_eq!(Strategy::from_code(4), None);
    for d in Direction::ALL {
        assert_eq!(Direction::from_code(d as u8), Some(d));
        assert_eq!(Direction::from_name(d.name()), Some(d));
        assert_eq!(d.mirrored().mirrored(), d);
    }
}

#[test]
fn smsk_bytes_match_hand_layout() {
    let grid = TokenGrid::new(1, 1, 3);
    let plan = MaskPlan {
        grid,
        strategy: Strategy::StHandOnly,
        masked: TokenSet::from_indices(3, [0, 2]),
        decoder_targets: TokenSet::from_indices(3, [2]),
        ratio_bp: 6667,
        direction: Some(Direction::Right),
        temporal_window: Some(TemporalWindow { start: 0, len: 1 }),
        seed: 0x0102030405060708,
        trace: PlanTrace::default(),
    };
    let mut expected = b"SMSK".to_vec();
    expected.extend([1, 0, 3, 1, 0, 1, 0, 3, 0]);
    expected.extend(6667u16.to_le_bytes());
    expected.extend([8, 7, 6, 5, 4, 3, 2, 1, 3, 0, 0, 1, 0]);
    expected.extend([2, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0]);
    expected.extend([1, 0, 0, 0, 2, 0, 0, 0]);
    assert_eq!(plan.to_bytes(), expected);
    assert_eq!(MaskPlan::from_bytes(&expected).unwrap(), plan);

    let none = MaskPlan {
        direction: None,
        temporal_window: None,
        ..plan
    };
    let bytes = none.to_bytes();
    assert_eq!(&bytes[23..28], &[255, 255, 255, 255, 255]);
}

#[test]
fn smsk_decode_rejects_malformed_input() {
    let plan = random_mask(&TokenGrid::new(2, 2, 2), 0.5, 1);
    let good = plan.to_bytes();
    let reject = |bytes: &[u8]| matches!(MaskPlan::from_bytes(bytes), Err(Error::Format { .. }));

    let mut magic = good.clone();
    magic[0] = b'X';
    assert!(reject(&magic));
    let mut version = good.clone();
    version[4] = 2;
    assert!(reject(&version));
    assert!(reject(&good[..good.len() - 1]));
    let mut trailing = good.clone();
    trailing.push(0);
    assert!(reject(&trailing));
    let mut strategy = good.clone();
    strategy[6] = 9;
    assert!(reject(&strategy));

    // Swap the first two masked indices so the list is descending.
    let mut unordered = good.clone();
    let first = 32;
    let (a, b) = (
        unordered[first..first + 4].to_vec(),
        unordered[first + 4..first + 8].to_vec(),
    );
    unordered[first..first + 4].copy_from_slice(&b);
    unordered[first + 4..first + 8].copy_from_slice(&a);
    assert!(reject(&unordered));

    let mut stray = plan.clone();
    stray.decoder_targets = plan.visible();
    assert!(reject(&stray.to_bytes()));
}

#[test]
fn text_rendering_round_trips() {
    let bundle = synth_bundle(Motion::TwoHanded, 5);
    for plan in generate(&bundle, &PipelineConfig::default()).unwrap() {
        let text = plan.to_text();
        assert!(text.starts_with("SMSK 1\n"));
        assert_eq!(text.lines().count(), 7 + plan.masked.len());
        assert_eq!(MaskPlan::from_text(&text).unwrap(), plan);
    }
    assert!(MaskPlan::from_text("SMSK 1\nstrategy bogus\n").is_err());
}

#[test]
fn flip_equivariance_on_synthetic_clips() {
    let cfg = PipelineConfig::default();
    for (motion, seed) in [
        (Motion::TwoHanded, 1),
        (Motion::OneHanded(Side::Left), 2),
        (Motion::OneHanded(Side::Right), 3),
    ] {
        let bundle = synth_bundle(motion, seed);
        let a = analyze(&bundle, &cfg).unwrap();
        let m = analyze(&bundle.mirrored(), &cfg).unwrap();
        assert_eq!(m.handedness, a.handedness.mirrored());
        assert_eq!(m.regions, a.regions.mirrored(&a.grid));
        for stream in [Stream::VideoSt, Stream::KeypointSt] {
            for (d, s) in Direction::ALL
                .into_iter()
                .flat_map(|d| [(d, Side::Left), (d, Side::Right)])
            {
                let forced = ForcedDraws {
                    direction: Some(d),
                    side: Some(s),
                };
                let mirrored_forced = ForcedDraws {
                    direction: Some(d.mirrored()),
                    side: Some(s.opposite()),
                };
                let p = plan_stream_with(&a, stream, &cfg, 17, forced).unwrap();
                let q = plan_stream_with(&m, stream, &cfg, 17, mirrored_forced).unwrap();
                assert_eq!(q.masked, a.grid.mirror_set(&p.masked), "{motion:?} {stream:?} {d:?}");
                assert_eq!(q.decoder_targets, a.grid.mirror_set(&p.decoder_targets));
                assert_eq!(q.direction, p.direction.map(Direction::mirrored));
            }
        }
    }
}

fn arb_regions(grid: TokenGrid) -> impl proptest::strategy::Strategy<Value = RegionTokens> {
    let n = grid.len();
    let set = move || proptest::collection::vec(0..n, 0..n / 2);
    (set(), set(), set(), set()).prop_map(move |(lh, rh, la, ra)| RegionTokens {
        left_hand: TokenSet::from_indices(n, lh),
        right_hand: TokenSet::from_indices(n, rh),
        left_arm: TokenSet::from_indices(n, la),
        right_arm: TokenSet::from_indices(n, ra),
    })
}

fn arb_case() -> impl proptest::strategy::Strategy<Value = (TokenGrid, RegionTokens)> {
    (1usize..5, 1usize..5, 1usize..6)
        .prop_map(|(f, r, c)| TokenGrid::new(2 * f, r, c))
        .prop_flat_map(|g| (Just(g), arb_regions(g)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn st_plans_hold_invariants(
        (grid, regions) in arb_case(),
        ratio in 0.5f64..0.99,
        seed in any::<u64>(),
        one_handed in any::<bool>(),
        hand_only in any::<bool>(),
    ) {
        let cfg = cfg_with_ratio(ratio);
        let strategy = if hand_only { Strategy::StHandOnly } else { Strategy::StHandArm };
        let planned = if one_handed {
            st_mask_one_handed(&grid, &regions, Side::Left, strategy, &cfg, seed)
        } else {
            st_mask_two_handed(&grid, &regions, strategy, &cfg, seed)
        };
        let needs = if one_handed { regions.left_hand.clone() } else { regions.hands() };
        let plan = match planned {
            Err(Error::EmptyRegions) => { prop_assert!(needs.is_empty()); return Ok(()); }
            other => other.unwrap(),
        };
        check_partition(&plan);
        prop_assert_eq!(plan.masked.len(), round_count(ratio, grid.len()));
        let region = if hand_only { regions.hands() } else { regions.hand_arm() };
        prop_assert!(plan.decoder_targets.is_subset(&region));
        prop_assert_eq!(plan.decoder_targets.clone(), region.intersection(&plan.masked));
        let w = plan.temporal_window.unwrap();
        prop_assert!(w.start + w.len <= grid.frames);
        prop_assert!(window_tokens(&grid, w).is_subset(&plan.masked));
        prop_assert!(plan.trace.alignment_steps <= grid.len());
        let again = if one_handed {
            st_mask_one_handed(&grid, &regions, Side::Left, strategy, &cfg, seed)
        } else {
            st_mask_two_handed(&grid, &regions, strategy, &cfg, seed)
        };
        prop_assert_eq!(again.unwrap().to_bytes(), plan.to_bytes());
    }

    #[test]
    fn st_plans_are_flip_equivariant(
        (grid, regions) in arb_case(),
        seed in any::<u64>(),
        d in 0usize..4,
        right in any::<bool>(),
        one_handed in any::<bool>(),
    ) {
        let cfg = PipelineConfig::default();
        let (d, s) = (Direction::ALL[d], if right { Side::Right } else { Side::Left });
        let forced = ForcedDraws { direction: Some(d), side: Some(s) };
        let flipped = ForcedDraws { direction: Some(d.mirrored()), side: Some(s.opposite()) };
        let mirrored = regions.mirrored(&grid);
        let (p, q) = if one_handed {
            (
                st_mask_one_handed_with(&grid, &regions, Side::Left, Strategy::StHandArm, &cfg, seed, forced),
                st_mask_one_handed_with(&grid, &mirrored, Side::Right, Strategy::StHandArm, &cfg, seed, flipped),
            )
        } else {
            (
                st_mask_two_handed_with(&grid, &regions, Strategy::StHandArm, &cfg, seed, forced),
                st_mask_two_handed_with(&grid, &mirrored, Strategy::StHandArm, &cfg, seed, flipped),
            )
        };
        match (p, q) {
            (Ok(p), Ok(q)) => {
                prop_assert_eq!(q.masked, grid.mirror_set(&p.masked));
                prop_assert_eq!(q.decoder_targets, grid.mirror_set(&p.decoder_targets));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one side failed"),
        }
    }

    #[test]
    fn baselines_hold_invariants(
        f in 1usize..6, r in 1usize..8, c in 1usize..8,
        ratio in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        let grid = TokenGrid::new(f, r, c);
        let random = random_mask(&grid, ratio, seed);
        check_partition(&random);
        prop_assert_eq!(random.masked.len(), round_count(ratio, grid.len()));
        let tube = tube_mask(&grid, ratio, seed);
        check_partition(&tube);
        prop_assert_eq!(tube.masked.len(), round_count(ratio, grid.cells()) * f);
        let aligned = align_ratio(tube.clone(), ratio, seed);
        prop_assert_eq!(aligned.masked.len(), round_count(ratio, grid.len()));
        prop_assert_eq!(
            aligned.trace.alignment_steps,
            tube.masked.len().abs_diff(aligned.masked.len())
        );
    }

    #[test]
    fn plan_bytes_round_trip(
        f in 1usize..5, r in 1usize..6, c in 1usize..6,
        ratio in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let grid = TokenGrid::new(f, r, c);
        let mut plan = temporal_mask(random_mask(&grid, ratio, seed), &PipelineConfig::default());
        plan.direction = Direction::from_code((seed % 5) as u8);
        prop_assert_eq!(MaskPlan::from_bytes(&plan.to_bytes()).unwrap(), plan.clone());
        prop_assert_eq!(MaskPlan::from_text(&plan.to_text()).unwrap(), plan);
    }
}
