use std::collections::BTreeSet;

use lpoi_core::losses::{dpo_loss, listwise_loss};
use lpoi_core::surrogate::{list_scores, PolicyKind, PreferenceFeatures, ToyPolicy, TrainerConfig};
use lpoi_core::synthbench::{
    build_lists, caption, chair_metrics, default_vocab, gen_scenes, prepare, run_ablation, BenchConfig, CaptionRecord,
};
use lpoi_core::Hyperparams;
use proptest::prelude::*;

fn bench(scenes: usize, list_size: usize, epochs: usize) -> BenchConfig {
    BenchConfig {
        scenes,
        holdout: 0.2,
        data_seed: 0,
        trainer: TrainerConfig::new(Hyperparams::new(0.1, 0.0, list_size).unwrap(), epochs, 0),
        workers: 2,
    }
}

#[test]
fn every_label_appears_in_a_hundred_scenes() {
    let set = gen_scenes(100, 7, &default_vocab()).unwrap();
    let seen: BTreeSet<&str> = set.scenes.iter().flat_map(|s| s.labels()).collect();
    assert_eq!(seen.len(), 12);
}

#[test]
fn visibility_projection_is_a_perfect_captioner() {
    for seed in [1, 2, 3] {
        let set = gen_scenes(50, seed, &default_vocab()).unwrap();
        let mut params = vec![0.0; 10];
        params[0] = 0.5;
        let oracle = ToyPolicy::from_params(PolicyKind::Linear, 9, params).unwrap();
        let captions: Vec<CaptionRecord> = set
            .scenes
            .iter()
            .map(|s| caption(&oracle, s, &set.vocab).unwrap())
            .collect();
        let m = chair_metrics(&captions, &set.scenes).unwrap();
        assert_eq!((m.chair_i, m.chair_s, m.coverage), (0.0, 0.0, 1.0));
    }
}

proptest! {
    #[test]
    fn metrics_stay_in_unit_interval(seed in 0u64..1000, picks in prop::collection::vec(prop::collection::vec(0usize..12, 0..8), 1..10)) {
        let set = gen_scenes(picks.len(), seed, &default_vocab()).unwrap();
        let captions: Vec<CaptionRecord> = set
            .scenes
            .iter()
            .zip(&picks)
            .map(|(s, p)| CaptionRecord {
                scene_id: s.id.clone(),
                mentions: p.iter().map(|&i| set.vocab[i].clone()).collect(),
            })
            .collect();
        let m = chair_metrics(&captions, &set.scenes).unwrap();
        for v in [m.chair_i, m.chair_s, m.coverage] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn two_image_lists_reduce_to_pairwise_preference() {
    let set = gen_scenes(6, 4, &default_vocab()).unwrap();
    let records = build_lists(&set, 2, 4, 1).unwrap();
    let p = ToyPolicy::random(PolicyKind::Linear, 8, 1, 0.5);
    let r = ToyPolicy::random(PolicyKind::Linear, 8, 2, 0.5);
    for rec in &records {
        assert_eq!(rec.ranked.fractions, vec![0.0, 1.0]);
        let f = PreferenceFeatures::from_record(rec, 8).unwrap();
        let s = list_scores(&p, &r, &f, 0.1).unwrap();
        let list = listwise_loss(&s).unwrap().value;
        assert_eq!(list.to_bits(), dpo_loss(s[0], s[1]).unwrap().value.to_bits());
    }
}

#[test]
fn ablation_rows_are_ordered_and_reproducible() {
    let template = bench(40, 3, 4);
    let a = run_ablation(&template, &[4, 3], &[9, 5], 3).unwrap();
    let b = run_ablation(&template, &[4, 3], &[9, 5], 1).unwrap();
    assert_eq!(a, b);
    let keys: Vec<(usize, u64)> = a.iter().map(|r| (r.list_size, r.seed)).collect();
    assert_eq!(keys, [(3, 5), (3, 9), (4, 5), (4, 9)]);
    assert!(a.iter().all(|r| r.is_valid()));
    assert!(run_ablation(&template, &[3], &[], 1).is_err());
}

#[test]
fn holdout_split_is_disjoint() {
    let data = prepare(&bench(50, 3, 1)).unwrap();
    assert_eq!(data.test.len(), 10);
    assert_eq!(data.train.len(), 40);
    assert_eq!(data.test_scenes.len(), 10);
    let ids: BTreeSet<&str> = data.test_scenes.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids.len(), 10);
}
