use std::fs::OpenOptions;
use std::io::Write;

use zoner_core::Zone;
use zoner_service::{AnnotationStore, StoreError};

fn fill(store: &mut AnnotationStore, n: usize) {
    for i in 0..n {
        let zone = Zone::ALL[i % Zone::COUNT];
        store
            .submit(&format!("doc{}", i % 4), i / 4, ["a", "b"][i % 2], zone, 1)
            .unwrap();
        if i % 3 == 0 {
            store
                .submit(&format!("doc{}", i % 4), i / 4, ["a", "b"][i % 2], Zone::Other, 2)
                .unwrap();
        }
    }
}

#[test]
fn replay_rebuilds_the_same_index() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut store = AnnotationStore::open(&path).unwrap();
    fill(&mut store, 40);
    let index = store.index().clone();
    let export = store.export_jsonl();
    // No shutdown step exists: dropping the handle is all a kill leaves behind.
    drop(store);
    let replayed = AnnotationStore::open(&path).unwrap();
    assert_eq!(replayed.index(), &index);
    assert_eq!(replayed.export_jsonl(), export);
    assert_eq!(replayed.records().count(), 40);
    assert_eq!(replayed.log_len(), 40 + 14);
}

#[test]
fn torn_final_line_is_dropped_and_the_log_stays_appendable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut store = AnnotationStore::open(&path).unwrap();
    fill(&mut store, 5);
    let export = store.export_jsonl();
    drop(store);
    let mut f = OpenOptions::new().append(true).open(&path).unwrap();
    f.write_all(br#"{"doc_id":"doc9","sentence_idx":0,"annot"#).unwrap();
    drop(f);

    let mut store = AnnotationStore::open(&path).unwrap();
    assert_eq!(store.export_jsonl(), export);
    store.submit("doc9", 0, "a", Zone::Gratitude, 1).unwrap();
    drop(store);
    let store = AnnotationStore::open(&path).unwrap();
    assert_eq!(store.records().count(), 6);
    assert!(std::fs::read_to_string(&path)
        .unwrap()
        .lines()
        .all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn complete_record_without_newline_is_kept() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    std::fs::write(
        &path,
        r#"{"doc_id":"d","sentence_idx":0,"annotator":"a","label":"FA","rev":1,"ts":"2024-01-01T00:00:00Z"}"#,
    )
    .unwrap();
    let mut store = AnnotationStore::open(&path).unwrap();
    assert_eq!(store.get("d", 0, "a").unwrap().label, Zone::Family);
    store.submit("d", 0, "a", Zone::Characteristics, 2).unwrap();
    drop(store);
    assert_eq!(AnnotationStore::open(&path).unwrap().get("d", 0, "a").unwrap().rev, 2);
}

#[test]
fn corrupt_middle_line_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    std::fs::write(&path, "not json\n{}\n").unwrap();
    match AnnotationStore::open(&path) {
        Err(StoreError::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("{other:?}"),
    }
}
