use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use kennel_core::testing::{closed_port_url, StubReply, StubServer};
use kennel_core::{ProviderConfig, ProviderKind, RetryPolicy};
use kennel_service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Api {
    state: Arc<AppState>,
    _dir: Option<tempfile::TempDir>,
}

impl Api {
    fn mock() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let state = AppState::open(ServiceConfig::mock(dir.path())).unwrap();
        Self {
            state,
            _dir: Some(dir),
        }
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, _, body) = self.raw(method, uri, body.map(|b| b.to_string())).await;
        let value = if body.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&body).unwrap()
        };
        (status, value)
    }

    async fn raw(
        &self,
        method: Method,
        uri: &str,
        body: Option<String>,
    ) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .header(header::ORIGIN, "http://localhost:5173")
            .body(body.map(Body::from).unwrap_or_else(Body::empty))
            .unwrap();
        let resp = router(self.state.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        (status, headers, bytes.to_vec())
    }

    async fn chat(&self, session: &str, prompt: &str) -> (StatusCode, Value) {
        self.call(
            Method::POST,
            &format!("/api/sessions/{session}/messages"),
            Some(json!({"prompt": prompt})),
        )
        .await
    }
}

#[tokio::test]
async fn chat_without_source_echoes() {
    let api = Api::mock();
    let (status, body) = api.chat("s1", "hi").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["text"], "echo: hi");
    assert_eq!(body["finish_reason"], "stop");
    assert_eq!(body["chunks_used"], json!([]));

    let (status, body) = api.chat("s1", "").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["kind"], "invalid_input");

    let (status, _, _) = api
        .raw(
            Method::POST,
            "/api/sessions/s1/messages",
            Some("{not json".into()),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn chat_params_are_validated_and_defaulted() {
    let api = Api::mock();
    let (status, body) = api
        .call(
            Method::POST,
            "/api/sessions/p/messages",
            Some(json!({"prompt": "x", "params": {"temperature": 0.3}})),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let (status, _) = api
        .call(
            Method::POST,
            "/api/sessions/p/messages",
            Some(json!({"prompt": "x", "params": {"temperature": 9.0}})),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn history_mirrors_turns() {
    let api = Api::mock();
    let (status, body) = api
        .call(Method::GET, "/api/sessions/nobody/history", None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, json!({"messages": []}));

    for i in 0..10 {
        api.chat("h", &format!("turn {i}")).await;
    }
    let (_, body) = api.call(Method::GET, "/api/sessions/h/history", None).await;
    let msgs = body["messages"].as_array().unwrap();
    assert_eq!(msgs.len(), 20);
    for (i, pair) in msgs.chunks(2).enumerate() {
        assert_eq!(pair[0]["role"], "user");
        assert_eq!(pair[0]["content"], format!("turn {i}"));
        assert_eq!(pair[1]["content"], format!("echo: turn {i}"));
        assert!(pair[0]["created_at"].is_string());
    }
}

#[tokio::test]
async fn knowledge_source_round_trip_and_validation() {
    let api = Api::mock();
    let (_, body) = api.call(Method::GET, "/api/knowledge-source", None).await;
    assert_eq!(body["kind"], "none");

    let cfg = json!({"kind": "keyword_corpus", "top_k": 3, "settings": {"index_path": "/tmp/kennel-nonexistent/corpus.json"}});
    let (status, put) = api
        .call(Method::PUT, "/api/knowledge-source", Some(cfg))
        .await;
    assert_eq!(status, StatusCode::OK, "{put}");
    let (_, got) = api.call(Method::GET, "/api/knowledge-source", None).await;
    assert_eq!(got, put);
    assert_eq!(
        got["settings"]["index_path"],
        "/tmp/kennel-nonexistent/corpus.json"
    );
    assert_eq!(got["top_k"], 3);

    for bad in [
        json!({"kind": "none", "template": "{context} only"}),
        json!({"kind": "vector_db"}),
        json!({"kind": "web_search", "settings": {}}),
    ] {
        let (status, body) = api
            .call(Method::PUT, "/api/knowledge-source", Some(bad))
            .await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(body["kind"], "invalid_input");
    }
    let (_, still) = api.call(Method::GET, "/api/knowledge-source", None).await;
    assert_eq!(still, put, "rejected PUT leaves the active source alone");

    let (status, _) = api
        .call(
            Method::PUT,
            "/api/knowledge-source",
            Some(json!({"kind": "none"})),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, body) = api.chat("n", "cat").await;
    assert_eq!(body["chunks_used"], json!([]));
}

#[tokio::test]
async fn ingestion_feeds_keyword_source() {
    let api = Api::mock();
    let corpus = api.state.config().corpus_index_path();
    let cfg = json!({"kind": "keyword_corpus", "top_k": 2, "settings": {"index_path": corpus}});
    assert_eq!(
        api.call(Method::PUT, "/api/knowledge-source", Some(cfg))
            .await
            .0,
        StatusCode::OK
    );

    for (doc, text) in [("d1", "cat sat"), ("d2", "dog sat"), ("d3", "cat cat")] {
        let (status, body) = api
            .call(
                Method::POST,
                "/api/documents",
                Some(json!({"doc_id": doc, "text": text})),
            )
            .await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, json!({"doc_id": doc, "chunks": 1, "replaced": false}));
    }
    let (_, body) = api.chat("k", "cat").await;
    let used: Vec<_> = body["chunks_used"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["source"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(used, ["d3", "d1"]);
    let top = body["chunks_used"][0]["score"].as_f64().unwrap();
    assert!((top - 1.6f64.ln() * 1.375).abs() < 1e-9);
    assert!(body["text"].as_str().unwrap().contains("[d3]\ncat cat"));

    let (_, hist) = api.call(Method::GET, "/api/sessions/k/history", None).await;
    assert_eq!(hist["messages"][0]["content"], "cat");

    let (_, body) = api
        .call(
            Method::POST,
            "/api/documents",
            Some(json!({"doc_id": "d3", "text": "bird song"})),
        )
        .await;
    assert_eq!(body["replaced"], true);
    let (status, _) = api.call(Method::DELETE, "/api/documents/d1", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = api
        .call(Method::DELETE, "/api/documents/never-seen", None)
        .await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, body) = api.chat("k2", "cat").await;
    assert_eq!(body["chunks_used"], json!([]));

    let saved = kennel_core::retrieval::InvertedIndex::load(&corpus).unwrap();
    assert_eq!(saved.document_count(), 2);
}

#[tokio::test]
async fn long_document_is_chunked() {
    let api = Api::mock();
    let text: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
    let (_, body) = api
        .call(
            Method::POST,
            "/api/documents",
            Some(json!({"doc_id": "long", "text": text.join(" ")})),
        )
        .await;
    assert_eq!(body["chunks"], 2);
    for bad in [
        json!({"doc_id": "", "text": "x"}),
        json!({"doc_id": "e", "text": "  ..."}),
    ] {
        let (status, _) = api.call(Method::POST, "/api/documents", Some(bad)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
    }
}

#[tokio::test]
async fn web_search_key_is_redacted_and_preserved() {
    let search = StubServer::start().with_fallback(StubReply::ok(
        r#"{"results":[{"title":"t","url":"https://u","content":"ctx","score":0.5}]}"#,
    ));
    let api = Api::mock();
    let cfg = json!({"kind": "web_search", "settings": {"endpoint": search.url(), "api_key": "tvly-very-secret"}});
    let (_, put) = api
        .call(Method::PUT, "/api/knowledge-source", Some(cfg))
        .await;
    assert_eq!(put["settings"]["api_key"], "[REDACTED]");
    let (_, got) = api.call(Method::GET, "/api/knowledge-source", None).await;
    assert!(!got.to_string().contains("tvly-very-secret"));

    // the UI sends back what it was shown
    let (status, _) = api
        .call(Method::PUT, "/api/knowledge-source", Some(got))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, body) = api.chat("w", "question").await;
    assert_eq!(
        body["chunks_used"],
        json!([{"source": "https://u", "score": 0.5}])
    );
    assert_eq!(
        search.requests().last().unwrap().header("Authorization"),
        Some("Bearer tvly-very-secret")
    );

    let orphan = json!({"kind": "web_search", "settings": {"endpoint": "http://other", "api_key": "[REDACTED]"}});
    let (status, _) = api
        .call(Method::PUT, "/api/knowledge-source", Some(orphan))
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn provider_failures_map_to_502_without_secrets() {
    let stub = StubServer::start().with_fallback(StubReply::status(401, "bad key sk-live-123"));
    let dir = tempfile::tempdir().unwrap();
    let provider = ProviderConfig::new(stub.url(), "m")
        .with_api_key("sk-live-123")
        .with_retry(RetryPolicy::none());
    let state = AppState::open(ServiceConfig::new(
        ProviderKind::OpenAICompatible,
        provider,
        dir.path(),
    ))
    .unwrap();
    let api = Api {
        state,
        _dir: Some(dir),
    };
    let (status, _, body) = api
        .raw(
            Method::POST,
            "/api/sessions/x/messages",
            Some(r#"{"prompt":"hi"}"#.into()),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    let text = String::from_utf8(body).unwrap();
    assert!(!text.contains("sk-live-123"), "{text}");
    assert!(text.contains(r#""kind":"provider""#));

    let dir = tempfile::tempdir().unwrap();
    let provider = ProviderConfig::new(closed_port_url(), "m").with_retry(RetryPolicy::none());
    let state = AppState::open(ServiceConfig::new(
        ProviderKind::Ollama,
        provider,
        dir.path(),
    ))
    .unwrap();
    let api = Api {
        state,
        _dir: Some(dir),
    };
    let (status, body) = api.chat("x", "hi").await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(body["kind"], "network");
    let (_, hist) = api.call(Method::GET, "/api/sessions/x/history", None).await;
    assert_eq!(hist["messages"], json!([]));
}

#[tokio::test]
async fn source_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::open(ServiceConfig::mock(dir.path())).unwrap();
    let corpus = state.config().corpus_index_path();
    state.ingest("d", "persisted words").unwrap();
    state
        .set_source(kennel_core::rag::KnowledgeSourceConfig::keyword_corpus(
            &corpus,
        ))
        .unwrap();
    drop(state);

    let again = AppState::open(ServiceConfig::mock(dir.path())).unwrap();
    assert_eq!(again.source().index_paths(), vec![corpus.as_path()]);
    let reply = again.chat("r", "persisted", None).unwrap();
    assert_eq!(reply.chunks_used.len(), 1);
}

#[tokio::test]
async fn health_presets_and_cors() {
    let api = Api::mock();
    let (status, headers, body) = api.raw(Method::GET, "/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, br#"{"status":"ok"}"#);
    assert!(headers.contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
    let (_, presets) = api.call(Method::GET, "/api/presets", None).await;
    assert!(presets["presets"].as_array().unwrap().len() >= 3);
}

#[tokio::test]
async fn static_dir_is_served_as_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let www = dir.path().join("www");
    std::fs::create_dir_all(&www).unwrap();
    std::fs::write(www.join("index.html"), "<h1>kennel</h1>").unwrap();
    let mut config = ServiceConfig::mock(dir.path().join("cache"));
    config.static_dir = Some(www);
    let api = Api {
        state: AppState::open(config).unwrap(),
        _dir: Some(dir),
    };
    let (status, _, body) = api.raw(Method::GET, "/index.html", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<h1>kennel</h1>");
}
