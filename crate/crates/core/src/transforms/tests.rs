use super::*;
use crate::metrics::accuracy;
use ndarray::array;
use proptest::prelude::*;
use rand::Rng as _;

fn fast_base() -> BaseConfig {
    BaseConfig {
        linear: LinearConfig {
            epochs: 200,
            learning_rate: 1.0,
            ..LinearConfig::default()
        },
        threshold: 0.5,
    }
}

fn random_dataset(n: usize, d: usize, l: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    let y = Array2::from_shape_fn((n, l), |(i, j)| {
        u8::from(x[[i, j % d]] + 0.3 * rng.random::<f64>() > 0.6)
    });
    Dataset::from_arrays("rand", x, y).unwrap()
}

/// Constant-output softmax predicting `class` among `classes`.
fn constant_softmax(d: usize, classes: Vec<usize>, class: usize) -> SoftmaxModel {
    let mut w = Array2::zeros((classes.len(), d + 1));
    let row = classes.iter().position(|&c| c == class).unwrap();
    w[[row, d]] = 1.0;
    SoftmaxModel::from_weights(w, classes).unwrap()
}

fn logistic(w: &[f64]) -> LogisticModel {
    LogisticModel::from_weights(Array1::from(w.to_vec())).unwrap()
}

#[test]
fn zero_weight_br_predicts_all_ones_at_half() {
    let m = MlcModel::new(2, 2, 0.5, Members::Br(vec![logistic(&[0.0, 0.0, 0.0]); 2])).unwrap();
    assert_eq!(m.predict(array![0.3, 0.7].view()).unwrap(), vec![1, 1]);
}

#[test]
fn br_on_independent_labels() {
    let mut rng = rng_from_seed(3);
    let x = Array2::from_shape_simple_fn((200, 4), || rng.random::<f64>());
    let y = Array2::from_shape_fn((200, 2), |(i, j)| {
        u8::from(x[[i, 2 * j]] + x[[i, 2 * j + 1]] > 1.0)
    });
    let ds = Dataset::from_arrays("indep", x, y).unwrap();
    let (train, test) = (
        ds.select_rows(&(0..100).collect::<Vec<_>>()).unwrap(),
        ds.select_rows(&(100..200).collect::<Vec<_>>()).unwrap(),
    );
    let m = fit_br(&train, &fast_base()).unwrap();
    let acc = accuracy(
        test.labels(),
        m.predict_batch(test.features()).unwrap().view(),
    )
    .unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn duplicated_label_columns_give_identical_models() {
    let ds = random_dataset(30, 3, 1, 4);
    let y = concatenate(Axis(1), &[ds.labels(), ds.labels()]).unwrap();
    let ds2 = Dataset::from_arrays("dup", ds.features().to_owned(), y).unwrap();
    let Members::Br(models) = fit_br(&ds2, &fast_base()).unwrap().members().clone() else {
        unreachable!()
    };
    assert_eq!(models[0], models[1]);
}

#[test]
fn cc_uses_truth_in_training() {
    let ds = random_dataset(40, 3, 3, 5);
    let order = vec![2, 0, 1];
    let m = fit_cc(&ds, &order, &fast_base()).unwrap();
    let Members::Cc(chain) = m.members() else {
        unreachable!()
    };
    let aug = concatenate(
        Axis(1),
        &[
            ds.features(),
            ds.labels()
                .column(2)
                .insert_axis(Axis(1))
                .mapv(f64::from)
                .view(),
        ],
    )
    .unwrap();
    let direct = fit_logistic(aug.view(), ds.labels().column(0), &fast_base().linear).unwrap();
    assert_eq!(chain.links[1], direct);
}

#[test]
fn cc_feeds_thresholded_predecessors() {
    // Link 0 (label 1) outputs σ(2) ≈ 0.88; link 1 must then see a hard 1.
    let chain = Chain::new(
        vec![1, 0],
        vec![logistic(&[0.0, 2.0]), logistic(&[0.0, 10.0, -5.0])],
        1,
    )
    .unwrap();
    let (probs, trace) = chain.predict_with_trace(array![0.0].view(), 0.5).unwrap();
    assert_eq!(trace[0], array![0.0]);
    assert_eq!(trace[1], array![0.0, 1.0]);
    let s = |a: f64| 1.0 / (1.0 + (-a).exp());
    assert!((probs[1] - s(2.0)).abs() < 1e-15);
    assert!((probs[0] - s(5.0)).abs() < 1e-15);
}

#[test]
fn cc_rejects_bad_orders() {
    let ds = random_dataset(10, 2, 3, 6);
    assert!(fit_cc(&ds, &[0, 0, 1], &fast_base()).is_err());
    assert!(fit_cc(&ds, &[0, 1], &fast_base()).is_err());
    assert!(fit_cc(&ds, &[0, 1, 3], &fast_base()).is_err());
}

#[test]
fn cc_exploits_label_dependency() {
    // y1 = [x0 > .5]; y2 = y1 AND [x1 > .5] is linear in (x1, y1) but not in x.
    let mut rng = rng_from_seed(7);
    let x = Array2::from_shape_simple_fn((400, 2), || rng.random::<f64>());
    let y = Array2::from_shape_fn((400, 2), |(i, j)| {
        let y1 = x[[i, 0]] > 0.5;
        u8::from(if j == 0 { y1 } else { y1 && x[[i, 1]] > 0.5 })
    });
    let ds = Dataset::from_arrays("and", x, y).unwrap();
    let train = ds.select_rows(&(0..200).collect::<Vec<_>>()).unwrap();
    let test = ds.select_rows(&(200..400).collect::<Vec<_>>()).unwrap();
    let base = BaseConfig {
        linear: LinearConfig {
            epochs: 2000,
            learning_rate: 2.0,
            l2: 0.0,
        },
        threshold: 0.5,
    };
    let br = fit_br(&train, &base).unwrap();
    let cc = fit_cc(&train, &[0, 1], &base).unwrap();
    let a_br = accuracy(
        test.labels(),
        br.predict_batch(test.features()).unwrap().view(),
    )
    .unwrap();
    let a_cc = accuracy(
        test.labels(),
        cc.predict_batch(test.features()).unwrap().view(),
    )
    .unwrap();
    assert!(a_cc > a_br, "cc {a_cc} br {a_br}");
}

#[test]
fn single_label_cc_equals_br() {
    let ds = random_dataset(30, 3, 1, 8);
    let br = fit_br(&ds, &fast_base()).unwrap();
    let cc = fit_cc(&ds, &[0], &fast_base()).unwrap();
    assert_eq!(
        br.predict_batch(ds.features()).unwrap(),
        cc.predict_batch(ds.features()).unwrap()
    );
}

#[test]
fn one_chain_ecc_equals_cc() {
    let ds = random_dataset(30, 3, 4, 9);
    let ecc = fit_ecc(&ds, 1, &fast_base(), 77).unwrap();
    let cc = fit_cc(&ds, &ecc_chain_order(4, 77, 0), &fast_base()).unwrap();
    assert_eq!(
        ecc.predict_batch(ds.features()).unwrap(),
        cc.predict_batch(ds.features()).unwrap()
    );
}

#[test]
fn ecc_orders_are_seeded_permutations() {
    let a: Vec<_> = (0..10).map(|i| ecc_chain_order(6, 1, i)).collect();
    assert!(a.iter().all(|o| check_permutation(o, 6).is_ok()));
    assert_eq!(
        a,
        (0..10)
            .map(|i| ecc_chain_order(6, 1, i))
            .collect::<Vec<_>>()
    );
    assert!(a.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn ecc_is_invariant_to_member_order_and_unanimity() {
    let ds = random_dataset(40, 3, 4, 10);
    let m = fit_ecc(&ds, 7, &fast_base(), 3).unwrap();
    let Members::Ecc(chains) = m.members().clone() else {
        unreachable!()
    };
    let mut rev = chains.clone();
    rev.reverse();
    let m2 = MlcModel::new(3, 4, 0.5, Members::Ecc(rev)).unwrap();
    assert_eq!(
        m.predict_batch(ds.features()).unwrap(),
        m2.predict_batch(ds.features()).unwrap()
    );
    assert!(m
        .scores_batch(ds.features())
        .unwrap()
        .iter()
        .all(|v| (0.0..=1.0).contains(v)));

    for t in [0.1, 0.5, 0.9] {
        let one = MlcModel::new(3, 4, t, Members::Cc(chains[0].clone())).unwrap();
        let same = MlcModel::new(3, 4, t, Members::Ecc(vec![chains[0].clone(); 5])).unwrap();
        assert_eq!(
            one.predict_batch(ds.features()).unwrap(),
            same.predict_batch(ds.features()).unwrap()
        );
    }
}

#[test]
fn lp_decodes_against_hand_table() {
    let x = array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 0.0]];
    let y = array![[0u8, 1], [1, 0], [1, 1], [0, 1]];
    let ds = Dataset::from_arrays("lp4", x.clone(), y).unwrap();
    let m = fit_lp(&ds, &fast_base()).unwrap();
    let Members::Lp(lp) = m.members() else {
        unreachable!()
    };
    assert_eq!(lp.labelsets, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    let table = [[0u8, 1], [1, 0], [1, 1]];
    for row in x.rows() {
        let w = lp.model.weights();
        let scores: Vec<f64> = (0..3)
            .map(|c| w[[c, 0]] * row[0] + w[[c, 1]] * row[1] + w[[c, 2]])
            .collect();
        let best = (0..3).fold(0, |b, c| if scores[c] > scores[b] { c } else { b });
        assert_eq!(m.predict(row).unwrap(), table[best].to_vec());
    }
}

#[test]
fn lp_single_labelset_and_closed_world() {
    let ds = random_dataset(30, 3, 3, 11);
    let same = Dataset::from_arrays(
        "one",
        ds.features().to_owned(),
        Array2::from_elem((30, 3), 0u8) + array![1u8, 0, 1],
    )
    .unwrap();
    let m = fit_lp(&same, &fast_base()).unwrap();
    let probe = random_dataset(20, 3, 1, 12);
    assert!(m
        .predict_batch(probe.features())
        .unwrap()
        .rows()
        .into_iter()
        .all(|r| r == array![1u8, 0, 1]));

    let m = fit_lp(&ds, &fast_base()).unwrap();
    let seen: std::collections::BTreeSet<Vec<u8>> =
        ds.labels().rows().into_iter().map(|r| r.to_vec()).collect();
    for r in m.predict_batch(probe.features()).unwrap().rows() {
        assert!(seen.contains(&r.to_vec()));
    }
}

#[test]
fn rakel_full_subset_equals_lp() {
    let ds = random_dataset(50, 4, 4, 13);
    let lp = fit_lp(&ds, &fast_base()).unwrap();
    let rk = fit_rakel(&ds, 4, 1, &fast_base(), 5).unwrap();
    assert_eq!(
        lp.predict_batch(ds.features()).unwrap(),
        rk.predict_batch(ds.features()).unwrap()
    );
}

#[test]
fn rakel_default_ensemble_size_and_errors() {
    let ds = random_dataset(30, 3, 6, 14);
    let m = fit(
        &ds,
        &MlcConfig {
            base: fast_base(),
            ..MlcConfig::new(MlcKind::Rakel)
        },
        1,
    )
    .unwrap();
    let Members::Rakel { sets, k, .. } = m.members() else {
        unreachable!()
    };
    assert_eq!((*k, sets.len()), (3, 12));
    assert!(sets.iter().all(|s| s.labels.len() == 3));
    assert!(matches!(
        fit_rakel(&ds, 7, 1, &fast_base(), 0),
        Err(Error::Argument(_))
    ));
}

#[test]
fn rakel_uncovered_labels_predict_zero() {
    let ds = random_dataset(30, 3, 5, 15);
    let m = fit_rakel(&ds, 1, 2, &fast_base(), 2).unwrap();
    let Members::Rakel { uncovered, .. } = m.members() else {
        unreachable!()
    };
    assert_eq!(uncovered.len(), 3);
    let p = m.predict_batch(ds.features()).unwrap();
    for &j in uncovered {
        assert!(p.column(j).iter().all(|&v| v == 0));
    }
}

#[test]
fn fw_two_labels_decode_argmax() {
    let ds = random_dataset(40, 3, 2, 16);
    let m = fit_fw(&ds, &fast_base()).unwrap();
    let Members::Fw(pairs) = m.members() else {
        unreachable!()
    };
    assert_eq!(pairs.len(), 1);
    for row in ds.features().rows() {
        let c = pairs[0].model.predict_class(row).unwrap();
        assert_eq!(m.predict(row).unwrap(), vec![(c >> 1) as u8, (c & 1) as u8]);
    }
    assert!(fit_fw(&random_dataset(10, 2, 1, 0), &fast_base()).is_err());
}

#[test]
fn fw_pair_count() {
    let m = fit_fw(&random_dataset(30, 2, 5, 17), &fast_base()).unwrap();
    assert_eq!(m.n_base_models(), 10);
}

#[test]
fn fw_unanimous_eleven() {
    let pairs: Vec<PairModel> = vec![(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .map(|pair| PairModel {
            pair,
            model: constant_softmax(1, vec![0, 1, 2, 3], 3),
        })
        .collect();
    for t in [0.1, 0.5, 0.99] {
        let m = MlcModel::new(1, 3, t, Members::Fw(pairs.clone())).unwrap();
        assert_eq!(m.predict(array![0.2].view()).unwrap(), vec![1, 1, 1]);
    }
}

#[test]
fn fw_vote_tally_matches_enumeration() {
    let pair_ids = [(0usize, 1usize), (0, 2), (1, 2)];
    for code in 0..64usize {
        let classes: Vec<usize> = (0..3).map(|p| (code >> (2 * p)) & 3).collect();
        let pairs = pair_ids
            .iter()
            .zip(&classes)
            .map(|(&pair, &c)| PairModel {
                pair,
                model: constant_softmax(1, vec![0, 1, 2, 3], c),
            })
            .collect();
        let m = MlcModel::new(1, 3, 0.5, Members::Fw(pairs)).unwrap();
        let mut tally = [0u32; 3];
        for (&(j, k), &c) in pair_ids.iter().zip(&classes) {
            tally[j] += (c >> 1) as u32;
            tally[k] += (c & 1) as u32;
        }
        let expected: Vec<u8> = tally
            .iter()
            .map(|&v| u8::from(f64::from(v) / 2.0 >= 0.5))
            .collect();
        assert_eq!(
            m.predict(array![0.0].view()).unwrap(),
            expected,
            "code {code}"
        );
    }
}

#[test]
fn dimension_mismatch_is_reported() {
    let ds = random_dataset(20, 3, 2, 18);
    let m = fit_br(&ds, &fast_base()).unwrap();
    assert!(matches!(
        m.predict(array![0.1].view()),
        Err(Error::Dimension { .. })
    ));
    assert!(m.predict_batch(Array2::zeros((2, 4)).view()).is_err());
}

#[test]
fn threshold_outside_unit_interval_is_rejected() {
    let ds = random_dataset(10, 2, 2, 19);
    for t in [0.0, 1.0, -0.2, f64::NAN] {
        assert!(fit_br(
            &ds,
            &BaseConfig {
                threshold: t,
                ..fast_base()
            }
        )
        .is_err());
    }
}

#[test]
fn model_json_round_trip() {
    let ds = random_dataset(30, 3, 4, 20);
    let m = fit_rakel(&ds, 2, 3, &fast_base(), 1).unwrap();
    let back: MlcModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn outputs_are_binary_length_l_and_reproducible(
        seed in 0u64..1000,
        kind in prop_oneof![
            Just(MlcKind::Br), Just(MlcKind::Cc), Just(MlcKind::Ecc),
            Just(MlcKind::Lp), Just(MlcKind::Rakel), Just(MlcKind::Fw)
        ],
    ) {
        let ds = random_dataset(20, 3, 3, seed);
        let cfg = MlcConfig {
            base: BaseConfig { linear: LinearConfig { epochs: 30, ..LinearConfig::default() }, threshold: 0.5 },
            n_chains: 3,
            ..MlcConfig::new(kind)
        };
        let a = fit(&ds, &cfg, seed).unwrap();
        let b = fit(&ds, &cfg, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let p = a.predict_batch(ds.features()).unwrap();
        prop_assert_eq!(p.dim(), (20, 3));
        prop_assert!(p.iter().all(|&v| v <= 1));
    }
}
