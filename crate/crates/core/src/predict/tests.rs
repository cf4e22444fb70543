use super::*;
use crate::dataset::{generate_synthetic, Dataset, Partition, SyntheticSpec};
use crate::network::build_knn;
use crate::weights::{make_cluster, make_random};

fn settings(ks: &[usize], b: u32) -> EvalSettings {
    EvalSettings {
        k_grid: ks.to_vec(),
        replicates: b,
        ..Default::default()
    }
}

fn cc_input(ds: &Dataset, label: usize) -> CcInput<'_> {
    CcInput {
        train: ds.attributes(Partition::Training),
        train_labels: &ds.labels(Partition::Training)[label],
        eval: ds.attributes(Partition::Validation),
        eval_labels: &ds.labels(Partition::Validation)[label],
    }
}

fn job(node: u32, correct: u32, total: u32) -> JobResult {
    JobResult { node, k: 5, replicate: 0, correct, total, cost: 10 }
}

#[test]
fn precision_arithmetic() {
    assert_eq!(precision(&[job(0, 1, 1), job(1, 1, 1)]).unwrap(), 1.0);
    assert_eq!(precision(&[job(0, 0, 1)]).unwrap(), 0.0);
    let r = [job(0, 1, 1), job(1, 1, 1), job(2, 0, 1), job(3, 1, 1)];
    assert_eq!(precision(&r).unwrap(), 0.75);
    assert_eq!(correct_count(&r), 3);
    assert!(precision(&[]).is_err());
    assert_eq!(correct_count(&[]), 0);
}

#[test]
fn cluster_weighting_noise_free_is_perfect() {
    let ds = generate_synthetic(&SyntheticSpec::planted(120, 3, 0.9, 0.0, 1)).unwrap();
    let e = build_knn(ds.attributes(Partition::Training), 120 * 6);
    let w = make_cluster(&e, 0, None);
    for label in 0..3 {
        let run = run_cc(cc_input(&ds, label), &w, "knn/cluster", &settings(&[5, 25], 2)).unwrap();
        assert!(run.skipped.is_empty());
        assert_eq!(precision(&run.results).unwrap(), 1.0);
    }
}

#[test]
fn random_weighting_without_structure_is_near_base_rate() {
    // two blocks drawn uniformly: attributes carry no label signal
    let ds = generate_synthetic(&SyntheticSpec::planted(200, 2, 0.5, 0.0, 3)).unwrap();
    let w = make_random(200);
    let run = run_cc(cc_input(&ds, 0), &w, "random", &settings(&[25, 50], 3)).unwrap();
    let p = precision(&run.results).unwrap();
    assert!((p - 0.5).abs() <= 0.1, "{p}");
}

#[test]
fn k_beyond_community_trains_on_whole_community() {
    let ds = generate_synthetic(&SyntheticSpec::planted(30, 3, 0.9, 0.0, 2)).unwrap();
    let e = build_knn(ds.attributes(Partition::Training), 30 * 4);
    let w = make_cluster(&e, 0, None);
    let run = run_cc(cc_input(&ds, 0), &w, "m", &settings(&[150], 1)).unwrap();
    assert!(!run.results.is_empty());
}

#[test]
fn removing_a_node_leaves_others_unchanged() {
    let ds = generate_synthetic(&SyntheticSpec::planted(90, 3, 0.8, 0.1, 4)).unwrap();
    let w = make_random(90);
    let s = settings(&[10, 25], 2);
    let full = run_cc(cc_input(&ds, 1), &w, "random", &s).unwrap();
    let mut fewer = ds.labels(Partition::Validation)[1].clone();
    let dropped = *fewer.positives.iter().next().unwrap();
    fewer.positives.remove(&dropped);
    let input = CcInput { eval_labels: &fewer, ..cc_input(&ds, 1) };
    let part = run_cc(input, &w, "random", &s).unwrap();
    let kept: Vec<JobResult> = full.results.iter().filter(|r| r.node != dropped).copied().collect();
    assert_eq!(kept, part.results);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let ds = generate_synthetic(&SyntheticSpec::planted(60, 2, 0.8, 0.1, 5)).unwrap();
    let w = make_random(60);
    let s = settings(&[5, 10], 2);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_cc(cc_input(&ds, 0), &w, "r", &s).unwrap());
    let b = four.install(|| run_cc(cc_input(&ds, 0), &w, "r", &s).unwrap());
    assert_eq!(a, b);
}

#[test]
fn empty_positive_set_is_rejected() {
    let ds = generate_synthetic(&SyntheticSpec::planted(30, 3, 0.9, 0.0, 2)).unwrap();
    let empty = LabelSet { name: "none".into(), positives: Default::default() };
    let input = CcInput { eval_labels: &empty, ..cc_input(&ds, 0) };
    assert!(run_cc(input, &make_random(30), "r", &settings(&[5], 1)).is_err());
}

#[test]
fn triangle_egonet_is_balanced() {
    // 0-1-2 triangle plus spokes 0-3 and 0-4
    let (e, _) = EdgeSet::from_pairs(5, [(0, 1), (1, 2), (0, 2), (0, 3), (0, 4)], false);
    let ego = egonet(&e, 0);
    assert_eq!(ego, vec![0, 1, 2, 3, 4]);
    let (pos, neg) = egonet_pairs(&e, &ego, &mut rng_from(1));
    assert_eq!(pos.len(), 5);
    // only 5 non-adjacent pairs exist: (1,3) (1,4) (2,3) (2,4) (3,4)
    assert_eq!(neg.len(), 5);
    let (tri, _) = EdgeSet::from_pairs(3, [(0, 1), (1, 2), (0, 2)], false);
    let (pos, neg) = egonet_pairs(&tri, &egonet(&tri, 0), &mut rng_from(1));
    assert_eq!((pos.len(), neg.len()), (3, 0));
}

#[test]
fn pair_differences() {
    let a = SparseVec::from_pairs(vec![(1, 2.0), (3, 1.0)]);
    let b = SparseVec::from_pairs(vec![(1, 5.0), (4, 1.0)]);
    assert_eq!(pair_difference(&a, &a, PairFeature::Absolute).nnz(), 0);
    assert_eq!(
        pair_difference(&a, &b, PairFeature::Absolute).entries(),
        &[(1, 3.0), (3, 1.0), (4, 1.0)]
    );
    assert_eq!(
        pair_difference(&a, &b, PairFeature::Signed).entries(),
        &[(1, -3.0), (3, 1.0), (4, -1.0)]
    );
}

#[test]
fn planted_intra_pairs_differ_less() {
    let spec = SyntheticSpec::planted(60, 3, 0.9, 0.0, 6);
    let ds = generate_synthetic(&spec).unwrap();
    let comm = crate::dataset::planted_communities(&spec);
    let a = ds.attributes(Partition::Training);
    let (mut intra, mut cross) = (Vec::new(), Vec::new());
    for u in 0..60u32 {
        for v in u + 1..60 {
            let n = pair_difference(a.row(u), a.row(v), PairFeature::Absolute).norm();
            if comm[u as usize] == comm[v as usize] { intra.push(n) } else { cross.push(n) }
        }
    }
    assert!(stats::mean(&intra).unwrap() < stats::mean(&cross).unwrap());
}

#[test]
fn link_prediction_runs_and_balances() {
    let ds = generate_synthetic(&SyntheticSpec::planted(80, 2, 0.9, 0.0, 7)).unwrap();
    let train = ds.attributes(Partition::Training);
    let eval = ds.attributes(Partition::Testing);
    let input = LpInput {
        train,
        train_edges: &build_knn(train, 80 * 5),
        eval,
        eval_edges: &build_knn(eval, 80 * 5),
    };
    let nodes: Vec<u32> = (0..80).collect();
    let run = run_lp(input, &nodes, "knn/egonet", &settings(&[5], 2)).unwrap();
    assert_eq!(run.results.len() + run.skipped.len(), 160);
    let p = precision(&run.results).unwrap();
    assert!(p > 0.5, "{p}");
    assert!(run.results.iter().all(|r| r.k == 0 && r.total > 0));
    let empty = EdgeSet::empty(80, true);
    assert!(run_lp(LpInput { train_edges: &empty, ..input }, &nodes, "x", &settings(&[5], 1)).is_err());
}

#[test]
fn bootstrap_summary_flags() {
    let mut run = TaskRun { model_id: "m".into(), label: "l".into(), results: vec![job(0, 1, 1)], skipped: vec![] };
    let s = bootstrap_eval(&run).unwrap();
    assert!(s.cv_undefined);
    assert_eq!(s.cv_precision, 0.0);
    run.results.push(JobResult { replicate: 1, ..job(0, 1, 1) });
    let s = bootstrap_eval(&run).unwrap();
    assert!(!s.cv_undefined);
    assert_eq!((s.cv_precision, s.cv_cost), (0.0, 0.0));
}

#[test]
fn node_efficiency_uses_replicate_medians() {
    let r = |k, replicate, correct, cost| JobResult { node: 3, k, replicate, correct, total: 1, cost };
    let run = TaskRun {
        model_id: "m".into(),
        label: "l".into(),
        results: vec![r(5, 0, 1, 100), r(5, 1, 0, 300), r(5, 2, 1, 200), r(10, 0, 1, 50), r(10, 1, 1, 70), r(10, 2, 1, 60)],
        skipped: vec![],
    };
    let n = node_efficiencies(&run).unwrap();
    assert_eq!(n.len(), 1);
    assert_eq!(n[0].kappa, 10);
    assert_eq!(n[0].cost, 60.0);
    assert_eq!(n[0].efficiency, 1.0 / 60.0);
}
