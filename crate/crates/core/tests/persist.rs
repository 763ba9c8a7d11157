use std::sync::{Arc, OnceLock};

use ilnrs::data::{IonRole, IonVocabulary, Property};
use ilnrs::model::{build_finetune, build_pretrain, FinetuneConfig, FinetuneModel, PretrainConfig};
use ilnrs::persist::{
    from_bytes, load_encoder, load_finetune, load_model, save_encoder, save_finetune, to_bytes, SavedModel,
};
use ilnrs::Error;
use proptest::prelude::*;

fn vocabs() -> (IonVocabulary, IonVocabulary) {
    (
        IonVocabulary::synthetic(IonRole::Cation, 9),
        IonVocabulary::synthetic(IonRole::Anion, 5),
    )
}

fn model(property: Property) -> FinetuneModel {
    let encoder = build_pretrain(
        PretrainConfig::new(Property::LnViscosity).with_widths(24, 2, 10),
        (9, 5),
        1,
    )
    .unwrap()
    .export_encoder();
    build_finetune(Arc::new(encoder), FinetuneConfig::new(property).with_head_width(50), 2).unwrap()
}

fn artifact() -> &'static Vec<u8> {
    static BYTES: OnceLock<Vec<u8>> = OnceLock::new();
    BYTES.get_or_init(|| {
        let (c, a) = vocabs();
        to_bytes(&SavedModel::Finetune(model(Property::Density)), &c, &a).unwrap()
    })
}

#[test]
fn file_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let (c, a) = vocabs();
    for property in Property::ALL {
        let m = model(property);
        let path = dir.path().join(format!("{property}.ilnrs"));
        save_finetune(&path, &m, &c, &a).unwrap();
        let back = load_finetune(&path).unwrap();
        assert_eq!(back.model, m);
        let ids: Vec<usize> = (0..45).collect();
        let ci: Vec<usize> = ids.iter().map(|i| i / 5).collect();
        let ai: Vec<usize> = ids.iter().map(|i| i % 5).collect();
        let t: Vec<f64> = ids.iter().map(|&i| 275.0 + 3.1 * i as f64).collect();
        let p: Vec<f64> = ids.iter().map(|&i| 1.0 + 2.0 * i as f64).collect();
        let x = m.predict(&ci, &ai, &t, &p).unwrap();
        let y = back.model.predict(&ci, &ai, &t, &p).unwrap();
        assert!(x.iter().zip(&y).all(|(u, v)| u.to_bits() == v.to_bits()));
    }
    let enc_path = dir.path().join("enc.ilnrs");
    let m = model(Property::Density);
    save_encoder(&enc_path, m.encoder(), &c, &a).unwrap();
    assert_eq!(&load_encoder(&enc_path).unwrap().model, m.encoder().as_ref());
    assert!(matches!(load_model(&enc_path).unwrap().model, SavedModel::Encoder(_)));
    assert!(matches!(load_finetune(&enc_path), Err(Error::Kind { .. })));
    assert!(matches!(
        load_model(dir.path().join("missing.ilnrs")),
        Err(Error::Io(_))
    ));
    // Only the artifacts themselves are left behind.
    let names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names.len(), 6);
}

#[test]
fn wrong_vocabulary_is_rejected() {
    let (c, a) = vocabs();
    let art = from_bytes(artifact()).unwrap();
    art.check_vocabularies(&c, &a).unwrap();
    let mut names: Vec<String> = c.names().to_vec();
    names.swap(0, 1);
    let permuted = IonVocabulary::from_names(IonRole::Cation, names).unwrap();
    assert!(matches!(
        art.check_vocabularies(&permuted, &a),
        Err(Error::Fingerprint { .. })
    ));
}

proptest! {
    #[test]
    fn truncation_is_rejected(keep in 0usize..1_000_000) {
        let bytes = artifact();
        let keep = keep % bytes.len();
        prop_assert!(from_bytes(&bytes[..keep]).is_err());
    }

    #[test]
    fn any_flipped_bit_is_rejected(pos in 0usize..1_000_000, bit in 0u8..8) {
        let mut bytes = artifact().clone();
        let pos = pos % bytes.len();
        bytes[pos] ^= 1 << bit;
        prop_assert!(from_bytes(&bytes).is_err());
    }

    #[test]
    fn appended_bytes_are_rejected(extra in prop::collection::vec(any::<u8>(), 1..64)) {
        let mut bytes = artifact().clone();
        bytes.extend(extra);
        prop_assert!(from_bytes(&bytes).is_err());
    }
}
