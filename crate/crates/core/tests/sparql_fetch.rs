mod common;

use chrono::NaiveDate;
use common::server::{FixtureServer, Reply};
use m2t::realizer::{fetch_many, fetch_triples, Endpoint, FetchOptions, RealizerError};
use m2t::MrSchema;

fn bindings(rows: &[(&str, &str, &str, &str)]) -> String {
    let b: Vec<serde_json::Value> = rows
        .iter()
        .map(|(s, sl, o, ol)| {
            serde_json::json!({
                "s": {"type": "uri", "value": format!("http://www.wikidata.org/entity/{s}")},
                "sLabel": {"type": "literal", "value": sl},
                "o": {"type": "uri", "value": format!("http://www.wikidata.org/entity/{o}")},
                "oLabel": {"type": "literal", "value": ol},
            })
        })
        .collect();
    serde_json::json!({"head": {"vars": ["s", "sLabel", "o", "oLabel"]}, "results": {"bindings": b}}).to_string()
}

fn sparql_server() -> FixtureServer {
    FixtureServer::start(|_, _| {
        Reply::json(bindings(&[
            ("Q1", "Scream", "Q2", "Liev Schreiber"),
            ("Q3", "Planet of the Apes", "Q4", "Felix Silla"),
            ("Q5", "", "Q6", "Nobody"),
        ]))
    })
}

fn opts(dir: &std::path::Path, day: u32) -> FetchOptions {
    FetchOptions {
        date: NaiveDate::from_ymd_opt(2024, 3, day).unwrap(),
        ..FetchOptions::new(dir)
    }
}

#[test]
fn fetch_records_then_replays_when_the_endpoint_is_down() {
    let schema = MrSchema::builtin();
    let cache = tempfile::tempdir().unwrap();
    let server = sparql_server();
    let endpoint = Endpoint::parse(&format!("{}/sparql", server.url));

    let live = fetch_triples(
        "cast member",
        10,
        &endpoint,
        &schema,
        &opts(cache.path(), 1),
    )
    .unwrap();
    assert_eq!(live.len(), 2);
    assert_eq!(
        (live[0].subject(), live[0].relation(), live[0].object()),
        ("Scream", "cast member", "Liev Schreiber")
    );
    assert_eq!(live[0].object_id(), Some("Q2"));

    let req = &server.requests()[0];
    assert_eq!(req.method, "GET");
    assert!(req.target.starts_with("/sparql?"));
    assert!(req.target.contains("P161"), "{}", req.target);
    assert!(
        req.target.contains("LIMIT+10") || req.target.contains("LIMIT%2010"),
        "{}",
        req.target
    );

    // Same day: served from cache without a request.
    fetch_triples(
        "cast member",
        10,
        &endpoint,
        &schema,
        &opts(cache.path(), 1),
    )
    .unwrap();
    assert_eq!(server.request_count(), 1);

    drop(server);
    let later = fetch_triples(
        "cast member",
        10,
        &endpoint,
        &schema,
        &opts(cache.path(), 9),
    )
    .unwrap();
    assert_eq!(later, live);

    let err = fetch_triples("genre", 10, &endpoint, &schema, &opts(cache.path(), 9)).unwrap_err();
    assert!(
        matches!(err, RealizerError::EndpointUnavailable(_)),
        "{err:?}"
    );
}

#[test]
fn limit_and_unknown_relation() {
    let schema = MrSchema::builtin();
    let cache = tempfile::tempdir().unwrap();
    let server = sparql_server();
    let endpoint = Endpoint::parse(&server.url);
    assert_eq!(
        fetch_triples("cast member", 1, &endpoint, &schema, &opts(cache.path(), 1))
            .unwrap()
            .len(),
        1
    );
    let err = fetch_triples(
        "favourite colour",
        1,
        &endpoint,
        &schema,
        &opts(cache.path(), 1),
    )
    .unwrap_err();
    assert!(matches!(err, RealizerError::UnmappedRelation(_)));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn fetch_many_keeps_input_order() {
    let schema = MrSchema::builtin();
    let cache = tempfile::tempdir().unwrap();
    let server = sparql_server();
    let endpoint = Endpoint::parse(&server.url);
    let relations: Vec<String> = ["cast member", "nonsense", "director", "genre"]
        .map(String::from)
        .to_vec();
    let results = fetch_many(&relations, 5, &endpoint, &schema, &opts(cache.path(), 1), 3);
    assert_eq!(results.len(), 4);
    assert!(results[0].is_ok() && results[2].is_ok() && results[3].is_ok());
    assert!(matches!(
        results[1],
        Err(RealizerError::UnmappedRelation(_))
    ));
    assert_eq!(server.request_count(), 3);
    assert_eq!(results[2].as_ref().unwrap()[0].relation(), "director");
}
