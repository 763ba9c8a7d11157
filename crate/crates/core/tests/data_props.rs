use std::collections::{BTreeSet, HashSet};

use ilnrs::data::{
    kfold_by_il, read_records, sample_pairs, validation_split, write_records, Dataset, ILKey, IonRole, IonVocabulary,
    LoadOptions, Property, PropertyRecord, Scaler,
};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};
use proptest::prelude::*;

fn records_for(ils: &[ILKey], reps: usize) -> Vec<PropertyRecord> {
    ils.iter()
        .flat_map(|&il| {
            (0..reps).map(move |k| PropertyRecord {
                il,
                property: Property::Density,
                temperature: 290.0 + k as f64,
                pressure: 1.0,
                value: 1000.0 + k as f64,
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_ils(nc in 4usize..30, na in 3usize..12, apc in 1usize..3, reps in 1usize..4, k in 2usize..11, seed: u64) {
        let apc = apc.min(na);
        let ils = sample_pairs(nc, na, apc, seed).unwrap();
        prop_assume!(ils.len() >= k);
        let records = records_for(&ils, reps);
        let plan = kfold_by_il(&records, k, seed).unwrap();
        let mut seen = HashSet::new();
        let mut total = 0;
        for f in 0..k {
            let (train, test) = plan.split(&records, f);
            prop_assert_eq!(train.len() + test.len(), records.len());
            let train_ils: HashSet<ILKey> = train.iter().map(|&i| records[i].il).collect();
            let test_ils: HashSet<ILKey> = test.iter().map(|&i| records[i].il).collect();
            prop_assert!(train_ils.is_disjoint(&test_ils));
            prop_assert!(!test_ils.is_empty());
            for il in &test_ils {
                prop_assert!(seen.insert(*il), "IL in two test folds");
            }
            total += test_ils.len();
        }
        prop_assert_eq!(total, ils.len());
        prop_assert_eq!(plan.fold_sizes().iter().sum::<usize>(), ils.len());
    }

    #[test]
    fn stratified_sampling(nc in 1usize..40, na in 1usize..40, apc in 1usize..40, seed: u64) {
        let apc = apc.min(na);
        let pairs = sample_pairs(nc, na, apc, seed).unwrap();
        prop_assert_eq!(pairs.len(), nc * apc);
        let set: HashSet<ILKey> = pairs.iter().copied().collect();
        prop_assert_eq!(set.len(), pairs.len());
        for c in 0..nc {
            prop_assert_eq!(pairs.iter().filter(|k| k.cation == c).count(), apc);
        }
        prop_assert!(pairs.iter().all(|k| k.anion < na));
    }

    #[test]
    fn validation_split_is_a_partition(n in 1usize..200, fraction in 0.01f64..0.99, seed: u64) {
        let ils: BTreeSet<ILKey> = (0..n).map(|i| ILKey::new(i, i % 7)).collect();
        let (train, val) = validation_split(&ils, fraction, seed);
        prop_assert!(train.is_disjoint(&val));
        prop_assert_eq!(train.len() + val.len(), n);
    }

    #[test]
    fn scaler_round_trips(values in prop::collection::vec(-1e6f64..1e6, 2..50)) {
        let s = Scaler::fit(&values).unwrap();
        for &v in &values {
            let back = s.inverse(s.transform(v));
            prop_assert!((back - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }

    #[test]
    fn records_csv_round_trip(rows in prop::collection::vec((0usize..5, 0usize..4, 0usize..5, 250.0f64..400.0, 0.5f64..100.0, -1e4f64..1e4), 0..40)) {
        let cations = IonVocabulary::from_names(IonRole::Cation, ["[C4mim]+", "N,N-dimethyl", "C\"q\"", "c3", "c4"]).unwrap();
        let anions = IonVocabulary::synthetic(IonRole::Anion, 4);
        let mut ds = Dataset::with_vocabularies(cations.clone(), anions.clone());
        for (c, a, p, t, pr, v) in rows {
            ds.records.push(PropertyRecord { il: ILKey::new(c, a), property: Property::ALL[p], temperature: t, pressure: pr, value: v });
        }
        let mut buf = Vec::new();
        write_records(&mut buf, &ds).unwrap();
        let opts = LoadOptions { fixed_vocabulary: true, ..LoadOptions::default() };
        let back = read_records(buf.as_slice(), Dataset::with_vocabularies(cations, anions), opts).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn fingerprint_tracks_order(names in prop::collection::btree_set("[a-z]{1,6}", 2..10)) {
        let names: Vec<String> = names.into_iter().collect();
        let v = IonVocabulary::from_names(IonRole::Cation, names.iter()).unwrap();
        let mut rev = names.clone();
        rev.reverse();
        let r = IonVocabulary::from_names(IonRole::Cation, rev.iter()).unwrap();
        prop_assert_ne!(v.fingerprint(), r.fingerprint());
        prop_assert_eq!(v.fingerprint(), IonVocabulary::from_names(IonRole::Cation, names.iter()).unwrap().fingerprint());
    }
}

#[test]
fn benchmark_sets_never_share_ils() {
    for seed in 0..20 {
        let plan = SamplingPlan {
            num_cations: 30 + seed as usize,
            num_anions: 10,
            anions_per_cation: 4,
            experimental_ils: 25,
            ..SamplingPlan::default()
        };
        let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &plan).unwrap();
        assert!(bench.pretrain.il_set().is_disjoint(&bench.experimental_ils()));
        let more = bench.pretrain_pairs(10, &HashSet::new()).unwrap();
        assert!(more.iter().all(|il| !bench.experimental_ils().contains(il)));
    }
}

#[test]
fn generation_is_bitwise_deterministic() {
    let plan = SamplingPlan {
        num_cations: 30,
        num_anions: 10,
        anions_per_cation: 3,
        experimental_ils: 20,
        ..SamplingPlan::default()
    };
    let a = emit_datasets(&OracleConfig::default().with_seed(3), &plan).unwrap();
    let b = emit_datasets(&OracleConfig::default().with_seed(3), &plan).unwrap();
    let bits = |d: &Dataset| d.records.iter().map(|r| r.value.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.pretrain), bits(&b.pretrain));
    assert_eq!(bits(&a.experimental), bits(&b.experimental));
    assert_eq!(a, b);
}
