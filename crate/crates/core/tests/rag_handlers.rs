use std::sync::Arc;

use kennel_core::rag::{
    CompositeHandler, IdentityHandler, KeywordHandler, KnowledgeSourceConfig, RagChatter,
    RagHandler, WebSearchHandler,
};
use kennel_core::retrieval::{DocumentChunk, InvertedIndex};
use kennel_core::testing::{closed_port_url, fixtures_dir, StubReply, StubServer};
use kennel_core::{
    Chatter, ErrorKind, MemoryCache, Message, MockProvider, PromptParameters, ProviderChatter,
    SessionId,
};
use serde_json::Value;

fn sid() -> SessionId {
    SessionId::new("s").unwrap()
}

fn params() -> PromptParameters {
    PromptParameters::new("m")
}

fn web_fixture() -> Value {
    let text = std::fs::read_to_string(fixtures_dir().join("web_search/two_results.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn cat_index() -> InvertedIndex {
    let mut idx = InvertedIndex::new();
    for (d, t) in [("d1", "cat sat"), ("d2", "dog sat"), ("d3", "cat cat")] {
        idx.add(vec![DocumentChunk::new(d, 0, t)]).unwrap();
    }
    idx
}

#[test]
fn web_search_maps_results_in_order() {
    let fx = web_fixture();
    let stub = StubServer::start().with_reply(StubReply::ok(fx["response"].to_string()));
    let handler = WebSearchHandler::new(format!("{}/search", stub.url())).with_api_key("tvly-key");
    let msgs = [Message::user("what is feature envy")];
    let chunks = handler.get_chunks(&sid(), &params(), &msgs).unwrap();

    let req = &stub.requests()[0];
    assert_eq!(req.path, "/search");
    assert_eq!(
        serde_json::from_str::<Value>(&req.body).unwrap(),
        fx["request"]
    );
    assert_eq!(req.header("Authorization"), Some("Bearer tvly-key"));

    let expect = fx["expect"].as_array().unwrap();
    assert_eq!(chunks.len(), expect.len());
    for (c, e) in chunks.iter().zip(expect) {
        assert_eq!(c.source, e["source"].as_str().unwrap());
        assert_eq!(c.score, e["score"].as_f64());
        assert_eq!(
            c.metadata.get("title").map(String::as_str),
            e["title"].as_str()
        );
    }
    assert_eq!(msgs[0].content, "what is feature envy");
}

#[test]
fn web_search_empty_and_failures() {
    let stub = StubServer::start().with_reply(StubReply::ok(r#"{"results":[]}"#));
    let handler = WebSearchHandler::new(stub.url());
    assert!(handler
        .get_chunks(&sid(), &params(), &[Message::user("q")])
        .unwrap()
        .is_empty());

    let stub = StubServer::start().with_fallback(StubReply::status(500, "upstream down"));
    let err = WebSearchHandler::new(stub.url())
        .get_chunks(&sid(), &params(), &[Message::user("q")])
        .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Rag);
    assert!(err.retryable());

    let stub = StubServer::start().with_fallback(StubReply::status(401, "bad key tvly-secret"));
    let err = WebSearchHandler::new(stub.url())
        .with_api_key("tvly-secret")
        .get_chunks(&sid(), &params(), &[Message::user("q")])
        .unwrap_err();
    assert!(!err.retryable());
    assert!(!err.to_string().contains("tvly-secret"));

    let err = WebSearchHandler::new(closed_port_url())
        .get_chunks(&sid(), &params(), &[Message::user("q")])
        .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Rag);

    let stub = StubServer::start().with_reply(StubReply::ok("<html>"));
    let err = WebSearchHandler::new(stub.url())
        .get_chunks(&sid(), &params(), &[Message::user("q")])
        .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Rag);
}

#[test]
fn keyword_handler_follows_retrieval_ranking() {
    let handler = KeywordHandler::from_index(cat_index()).with_top_k(2);
    let msgs = vec![Message::user("cat")];
    let before = msgs.clone();
    let chunks = handler.get_chunks(&sid(), &params(), &msgs).unwrap();
    assert_eq!(msgs, before);
    let got: Vec<_> = chunks
        .iter()
        .map(|c| (c.source.as_str(), c.text.as_str()))
        .collect();
    assert_eq!(got, [("d3", "cat cat"), ("d1", "cat sat")]);
    assert_eq!(chunks[0].metadata["chunk_index"], "0");

    assert!(handler
        .get_chunks(&sid(), &params(), &[Message::user("zebra")])
        .unwrap()
        .is_empty());
    let err = handler
        .get_chunks(
            &sid(),
            &params(),
            &[Message::user("cat"), Message::assistant("x")],
        )
        .unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Rag);
}

#[test]
fn composite_mixes_keyword_and_web_with_partial_failure() {
    let fx = web_fixture();
    let stub = StubServer::start().with_reply(StubReply::ok(fx["response"].to_string()));
    let composite = CompositeHandler::new(vec![
        Arc::new(KeywordHandler::from_index(cat_index())),
        Arc::new(WebSearchHandler::new(closed_port_url())),
        Arc::new(WebSearchHandler::new(stub.url())),
    ])
    .unwrap()
    .with_top_k(3);
    let chunks = composite
        .get_chunks(&sid(), &params(), &[Message::user("cat")])
        .unwrap();
    let sources: Vec<_> = chunks.iter().map(|c| c.source.as_str()).collect();
    assert_eq!(
        sources,
        [
            "d3",
            "d1",
            "https://refactoring.example/smells/feature-envy"
        ]
    );
}

#[test]
fn identity_wrapping_order_is_unobservable() {
    let run = |depth: usize| {
        let mock = Arc::new(MockProvider::echo());
        let base: Arc<dyn Chatter> = Arc::new(ProviderChatter::new(
            mock.clone(),
            Arc::new(MemoryCache::new()),
            params(),
        ));
        let mut chatter = base;
        for _ in 0..depth {
            chatter = Arc::new(RagChatter::new(chatter, Arc::new(IdentityHandler)));
        }
        let texts: Vec<_> = ["a", "b"]
            .iter()
            .map(|p| chatter.bark(&sid(), p, None).unwrap().text)
            .collect();
        (texts, mock.received())
    };
    let (t0, r0) = run(0);
    let (t2, r2) = run(2);
    assert_eq!(t0, t2);
    let strip = |r: Vec<Vec<Message>>| {
        r.into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|m| (m.role, m.content))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(r0), strip(r2));
}

#[test]
fn source_config_builds_working_keyword_chatter() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.json");
    cat_index().save(&path).unwrap();
    let cfg: KnowledgeSourceConfig = serde_json::from_value(serde_json::json!({
        "kind": "keyword_corpus", "top_k": 1, "settings": {"index_path": path}
    }))
    .unwrap();
    let handler = cfg
        .build_handler(&mut |p| Ok(Arc::new(std::sync::RwLock::new(InvertedIndex::load(p)?))))
        .unwrap()
        .unwrap();
    let mock = Arc::new(MockProvider::echo());
    let inner = Arc::new(ProviderChatter::new(
        mock.clone(),
        Arc::new(MemoryCache::new()),
        params(),
    ));
    let turn = RagChatter::new(inner, handler)
        .bark_turn(&sid(), "cat", None)
        .unwrap();
    assert_eq!(turn.chunks.len(), 1);
    assert_eq!(turn.chunks[0].source, "d3");
}
