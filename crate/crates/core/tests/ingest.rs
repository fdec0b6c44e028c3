use std::io::Cursor;

use adaptir_core::corpus::{ingest_corpus, parse_corpus, parse_queries, write_jsonl};
use adaptir_core::{Error, UnitMode};

const CORPUS: &str = r#"{"id": "b", "title": "B", "text": "Second doc.\n\nIt has two paragraphs."}
{"id": "a", "title": "A", "text": "First doc, one paragraph."}

{"id": "c", "title": "", "text": "  \n\nlead blank\n \nthen two more\n\n\nand three"}
"#;

#[test]
fn units_follow_file_order() {
    let docs = parse_corpus(Cursor::new(CORPUS), UnitMode::Document).unwrap();
    let ids: Vec<_> = docs.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["b", "a", "c"]);
    let paras = parse_corpus(Cursor::new(CORPUS), UnitMode::Paragraph).unwrap();
    let ids: Vec<_> = paras.iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["b#0", "b#1", "a#0", "c#0", "c#1", "c#2"]);
    assert_eq!(paras[4].text, "then two more");
}

#[test]
fn ingestion_round_trips_through_jsonl() {
    let docs = parse_corpus(Cursor::new(CORPUS), UnitMode::Document).unwrap();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &docs).unwrap();
    let again = parse_corpus(Cursor::new(&buf), UnitMode::Document).unwrap();
    assert_eq!(docs, again);
    let mut buf2 = Vec::new();
    write_jsonl(&mut buf2, &again).unwrap();
    assert_eq!(buf, buf2);
}

#[test]
fn bad_records_name_their_line() {
    let dup = format!(
        "{CORPUS}{}\n",
        r#"{"id": "a", "title": "", "text": "again"}"#
    );
    match parse_corpus(Cursor::new(dup), UnitMode::Document) {
        Err(Error::DuplicateId { line: 5, id }) => assert_eq!(id, "a"),
        other => panic!("{other:?}"),
    }
    let broken = "{\"id\": \"x\", \"title\": \"\", \"text\": \"ok\"}\n{\"id\": 3}\n";
    assert!(matches!(
        parse_corpus(Cursor::new(broken), UnitMode::Document),
        Err(Error::MalformedLine { line: 2, .. })
    ));
    let queries = "{\"id\": \"q\", \"question\": \"who\", \"answers\": []}\n";
    assert!(parse_queries(Cursor::new(queries)).is_err());
}

#[test]
fn missing_file_error_names_path() {
    let err = ingest_corpus("/definitely/not/here.jsonl", UnitMode::Document).unwrap_err();
    assert!(err.to_string().contains("/definitely/not/here.jsonl"));
}
