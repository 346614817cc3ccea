use std::io::Write;

use zoner_core::corpus::{split_corpus, Corpus, DatasetSplit, Obituary, SplitConfig};
use zoner_core::models::{train, ModelError, ModelType, Network, TrainConfig, ZoneModel};
use zoner_core::synthetic::{marker, marker_corpus};
use zoner_core::Zone;

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        hidden: 6,
        channels: 8,
        min_freq: 1,
        ..TrainConfig::default()
    }
}

fn toy() -> (Corpus, DatasetSplit) {
    let corpus = marker_corpus(96, 3, 2..=5, 7);
    let split = split_corpus(&corpus, &SplitConfig::default()).unwrap();
    (corpus, split)
}

/// Every output probability of `model` on `doc`, as raw bits.
fn output_bits(model: &ZoneModel, doc: &Obituary) -> Vec<u32> {
    match &model.network {
        Network::Cnn(cnn) => doc
            .sentences
            .iter()
            .flat_map(|s| cnn.predict_proba(&model.vocabulary.encode(&s.tokens)).unwrap())
            .map(f32::to_bits)
            .collect(),
        Network::BiLstm(net) => {
            let ids: Vec<usize> = doc
                .sentences
                .iter()
                .flat_map(|s| model.vocabulary.encode(&s.tokens))
                .collect();
            net.predict_proba(&ids)
                .unwrap()
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect()
        }
    }
}

fn embeddings_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "12 4").unwrap();
    for (i, z) in Zone::ALL.iter().enumerate() {
        let row: Vec<String> = (0..4)
            .map(|j| format!("{:.3}", ((i * 4 + j) as f64 * 0.37).sin()))
            .collect();
        writeln!(f, "{} {}", marker(*z), row.join(" ")).unwrap();
    }
    for w in ["the", "of", "and", "."] {
        writeln!(f, "{w} 0.05 -0.05 0.1 0.0").unwrap();
    }
    f.flush().unwrap();
    f
}

#[test]
fn same_seed_gives_identical_history_and_parameters() {
    let (corpus, split) = toy();
    for model_type in [ModelType::Cnn, ModelType::BiLstmBow] {
        let (a, ha) = train(model_type, &corpus, &split, &small_config()).unwrap();
        let (b, hb) = train(model_type, &corpus, &split, &small_config()).unwrap();
        assert_eq!(serde_json::to_string(&ha).unwrap(), serde_json::to_string(&hb).unwrap());
        assert_eq!(a.to_checkpoint_json(), b.to_checkpoint_json());
    }
}

#[test]
fn other_seed_changes_the_run() {
    let (corpus, split) = toy();
    let (_, ha) = train(ModelType::Cnn, &corpus, &split, &small_config()).unwrap();
    let cfg = TrainConfig {
        seed: 14,
        ..small_config()
    };
    let (_, hb) = train(ModelType::Cnn, &corpus, &split, &cfg).unwrap();
    assert_ne!(ha.epochs, hb.epochs);
}

#[test]
fn checkpoint_round_trip_is_bit_identical() {
    let (corpus, split) = toy();
    let emb = embeddings_file();
    for model_type in ModelType::ALL {
        let cfg = TrainConfig {
            epochs: 2,
            embeddings: model_type.needs_embeddings().then(|| emb.path().to_path_buf()),
            ..small_config()
        };
        let (model, _) = train(model_type, &corpus, &split, &cfg).unwrap();
        let json = model.to_checkpoint_json();
        let loaded = ZoneModel::from_checkpoint_json(&json).unwrap();
        assert_eq!(loaded.to_checkpoint_json(), json, "{model_type}");
        for doc in corpus.obituaries() {
            assert_eq!(
                output_bits(&model, doc),
                output_bits(&loaded, doc),
                "{model_type} {}",
                doc.id
            );
            assert_eq!(
                model.predict_document(doc).unwrap(),
                loaded.predict_document(doc).unwrap()
            );
        }
    }
}

#[test]
fn prediction_has_one_zone_per_sentence() {
    let (corpus, split) = toy();
    let emb = embeddings_file();
    for model_type in ModelType::ALL {
        let cfg = TrainConfig {
            epochs: 1,
            embeddings: model_type.needs_embeddings().then(|| emb.path().to_path_buf()),
            ..small_config()
        };
        let (model, history) = train(model_type, &corpus, &split, &cfg).unwrap();
        assert_eq!(history.epochs.len(), 1);
        for doc in corpus.obituaries() {
            assert_eq!(model.predict_document(doc).unwrap().len(), doc.sentences.len());
        }
    }
}

#[test]
fn cnn_prediction_ignores_other_sentences() {
    let (corpus, split) = toy();
    let (model, _) = train(ModelType::Cnn, &corpus, &split, &small_config()).unwrap();
    let doc = &corpus.obituaries()[0];
    let before = model.predict_document(doc).unwrap();
    let mut texts: Vec<(String, Option<Zone>)> = doc.sentences.iter().map(|s| (s.text.clone(), s.gold)).collect();
    for (i, t) in texts.iter_mut().enumerate().skip(1) {
        t.0 = format!("completely different words number {i} here.");
    }
    texts.push(("An extra sentence mkfi.".into(), None));
    let edited = Obituary::from_sentences(doc.id.clone(), doc.source.clone(), None, texts).unwrap();
    let after = model.predict_document(&edited).unwrap();
    assert_eq!(before[0], after[0]);
}

#[test]
fn embedding_models_require_a_table() {
    let (corpus, split) = toy();
    for model_type in [ModelType::BiLstmW2v, ModelType::BiLstmCrf] {
        assert!(matches!(
            train(model_type, &corpus, &split, &small_config()),
            Err(ModelError::Config(_))
        ));
    }
}

#[test]
fn empty_validation_part_is_rejected() {
    let (corpus, mut split) = toy();
    split.val.clear();
    assert!(train(ModelType::Cnn, &corpus, &split, &small_config()).is_err());
}

#[test]
fn empty_document_is_rejected_at_prediction() {
    let (corpus, split) = toy();
    let (model, _) = train(
        ModelType::Cnn,
        &corpus,
        &split,
        &TrainConfig {
            epochs: 1,
            ..small_config()
        },
    )
    .unwrap();
    let mut doc = corpus.obituaries()[0].clone();
    doc.sentences.clear();
    assert!(model.predict_document(&doc).is_err());
}
