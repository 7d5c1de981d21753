use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::Duration;

use kennel_core::providers::{MockProvider, MockReply};
use kennel_core::rag::{IdentityHandler, RagChatter};
use kennel_core::{
    chatter::strictly_alternating, BarkAsync, BarkCallback, BarkError, CacheService, ChatResponse,
    Chatter, ErrorKind, FileSystemCache, MemoryCache, Message, PromptParameters, Provider,
    ProviderChatter, ProviderKind, Result, Role, SessionId,
};

fn sid(s: &str) -> SessionId {
    SessionId::new(s).unwrap()
}

fn chatter_with(provider: Arc<dyn Provider>, cache: Arc<dyn CacheService>) -> Arc<ProviderChatter> {
    Arc::new(ProviderChatter::new(
        provider,
        cache,
        PromptParameters::new("m"),
    ))
}

/// Echo provider that fails every `every`-th call.
struct Flaky {
    calls: AtomicUsize,
    every: usize,
}

impl Provider for Flaky {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn base_url(&self) -> &str {
        "mock://flaky"
    }

    fn complete(&self, messages: &[Message], params: &PromptParameters) -> Result<ChatResponse> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if n % self.every == 0 {
            return Err(BarkError::provider(503, "injected"));
        }
        MockProvider::echo().complete(messages, params)
    }
}

#[test]
fn two_sessions_keep_separate_histories() {
    let chatter = chatter_with(Arc::new(MockProvider::echo()), Arc::new(MemoryCache::new()));
    assert_eq!(
        chatter.bark(&sid("s1"), "hi", None).unwrap().text,
        "echo: hi"
    );
    chatter.bark(&sid("s1"), "again", None).unwrap();
    chatter.bark(&sid("s2"), "other", None).unwrap();
    assert_eq!(chatter.history().load_history(&sid("s1")).unwrap().len(), 4);
    assert_eq!(chatter.history().load_history(&sid("s2")).unwrap().len(), 2);
    assert_eq!(
        chatter.bark(&sid("s1"), "", None).unwrap_err().kind(),
        ErrorKind::InvalidInput
    );
}

#[test]
fn assemble_messages_concatenates() {
    let chatter = chatter_with(Arc::new(MockProvider::echo()), Arc::new(MemoryCache::new()));
    let s = sid("s");
    let p = PromptParameters::new("m");
    let got = chatter.assemble_messages(&s, "hi", &p).unwrap();
    assert_eq!(got.len(), 1);
    let sys = p.clone().with_system_prompt("be brief");
    let got = chatter.assemble_messages(&s, "hi", &sys).unwrap();
    assert_eq!(
        (got[0].role, got[0].content.as_str()),
        (Role::System, "be brief")
    );

    chatter.bark(&s, "u1", Some(&sys)).unwrap();
    let history = chatter.history().load_history(&s).unwrap();
    assert!(history.iter().all(|m| m.role != Role::System));
    let got = chatter.assemble_messages(&s, "p2", &p).unwrap();
    let mut want = history.clone();
    want.push(Message::user("p2"));
    assert!(got.iter().zip(&want).all(|(a, b)| a.same_turn(b)));
    assert_eq!(got.len(), want.len());
}

#[test]
fn parameter_defaulting() {
    let mock = Arc::new(MockProvider::echo());
    let defaults = PromptParameters::new("dflt").with_temperature(0.4);
    let chatter =
        ProviderChatter::new(mock.clone(), Arc::new(MemoryCache::new()), defaults.clone())
            .with_response_cache(true);
    chatter.bark(&sid("a"), "x", None).unwrap();
    chatter.bark(&sid("b"), "x", Some(&defaults)).unwrap();
    assert_eq!(
        mock.calls(),
        1,
        "explicit defaults hit the same cache entry"
    );
}

#[test]
fn fault_injection_and_interleaved_soak() {
    let dir = tempfile::tempdir().unwrap();
    let cache: Arc<dyn CacheService> = Arc::new(FileSystemCache::open(dir.path()).unwrap());
    let chatter = chatter_with(
        Arc::new(Flaky {
            calls: AtomicUsize::new(0),
            every: 7,
        }),
        cache.clone(),
    );
    let successes: Arc<Mutex<BTreeMap<String, usize>>> = Arc::default();
    std::thread::scope(|scope| {
        for t in 0..10 {
            let chatter = chatter.clone();
            let successes = successes.clone();
            scope.spawn(move || {
                for i in 0..100 {
                    // threads hop across sessions so turns interleave
                    let s = sid(&format!("soak-{}", (t + i) % 10));
                    match chatter.bark(&s, &format!("t{t} i{i}"), None) {
                        Ok(_) => *successes.lock().unwrap().entry(s.to_string()).or_default() += 1,
                        Err(e) => assert_eq!(e, BarkError::provider(503, "injected")),
                    }
                }
            });
        }
    });
    let successes = successes.lock().unwrap();
    let mut total = 0;
    for i in 0..10 {
        let s = sid(&format!("soak-{i}"));
        let h = cache.load_history(&s).unwrap();
        assert!(strictly_alternating(&h));
        assert_eq!(h.len(), 2 * successes.get(s.as_str()).copied().unwrap_or(0));
        total += h.len() / 2;
        let reloaded = FileSystemCache::open(dir.path())
            .unwrap()
            .load_history(&s)
            .unwrap();
        assert_eq!(reloaded, h);
    }
    assert_eq!(total, 1000 - 1000 / 7);
}

#[test]
fn failed_turn_leaves_history_untouched() {
    let mock = Arc::new(MockProvider::scripted([
        MockReply::from("ok"),
        MockReply::Fail(BarkError::Network("down".into())),
        MockReply::from("ok again"),
    ]));
    let chatter = chatter_with(mock, Arc::new(MemoryCache::new()));
    let s = sid("s");
    chatter.bark(&s, "one", None).unwrap();
    assert!(chatter.bark(&s, "two", None).is_err());
    assert_eq!(chatter.history().load_history(&s).unwrap().len(), 2);
    chatter.bark(&s, "three", None).unwrap();
    let h = chatter.history().load_history(&s).unwrap();
    let contents: Vec<_> = h.iter().map(|m| m.content.as_str()).collect();
    assert_eq!(contents, ["one", "ok", "three", "ok again"]);
}

struct Counting {
    fired: Arc<AtomicUsize>,
    live: Arc<AtomicUsize>,
    seen: Arc<Mutex<HashSet<usize>>>,
    id: usize,
}

impl Counting {
    fn new(
        id: usize,
        fired: &Arc<AtomicUsize>,
        live: &Arc<AtomicUsize>,
        seen: &Arc<Mutex<HashSet<usize>>>,
    ) -> Self {
        live.fetch_add(1, Ordering::SeqCst);
        Self {
            fired: fired.clone(),
            live: live.clone(),
            seen: seen.clone(),
            id,
        }
    }

    fn record(&self) {
        self.fired.fetch_add(1, Ordering::SeqCst);
        assert!(
            self.seen.lock().unwrap().insert(self.id),
            "duplicate callback {}",
            self.id
        );
    }
}

impl Drop for Counting {
    fn drop(&mut self) {
        self.live.fetch_sub(1, Ordering::SeqCst);
    }
}

impl BarkCallback for Counting {
    fn on_response(self: Box<Self>, _: ChatResponse) {
        self.record();
    }

    fn on_error(self: Box<Self>, _: BarkError) {
        self.record();
    }
}

#[test]
fn hundred_async_calls_fire_exactly_once() {
    let chatter = chatter_with(
        Arc::new(MockProvider::echo().with_latency(Duration::from_millis(2))),
        Arc::new(MemoryCache::new()),
    );
    let fired = Arc::new(AtomicUsize::new(0));
    let live = Arc::new(AtomicUsize::new(0));
    let seen = Arc::new(Mutex::new(HashSet::new()));
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let prompt = if i % 10 == 9 {
                String::new()
            } else {
                format!("p{i}")
            };
            chatter.bark_async(
                &sid(&format!("s{}", i % 10)),
                prompt,
                None,
                Counting::new(i, &fired, &live, &seen),
            )
        })
        .collect();
    for h in handles {
        h.join();
    }
    assert_eq!(fired.load(Ordering::SeqCst), 100);
    assert_eq!(seen.lock().unwrap().len(), 100);
    assert_eq!(live.load(Ordering::SeqCst), 0);
    assert_eq!(chatter.sessions().active_sessions(), 0);
    for i in 0..9 {
        assert_eq!(
            chatter
                .history()
                .load_history(&sid(&format!("s{i}")))
                .unwrap()
                .len(),
            20
        );
    }
    assert!(chatter
        .history()
        .load_history(&sid("s9"))
        .unwrap()
        .is_empty());
}

#[test]
fn ten_sessions_async_each_get_one_turn() {
    let chatter = chatter_with(Arc::new(MockProvider::echo()), Arc::new(MemoryCache::new()));
    let (tx, rx) = mpsc::channel();
    let handles: Vec<_> = (0..10)
        .map(|i| {
            let tx = tx.clone();
            chatter.bark_async(
                &sid(&format!("s{i}")),
                "hi",
                None,
                move |r: Result<ChatResponse>| {
                    tx.send((i, r.map(|r| r.text))).unwrap();
                },
            )
        })
        .collect();
    drop(tx);
    let got: Vec<_> = rx.iter().collect();
    handles.into_iter().for_each(|h| h.join());
    assert_eq!(got.len(), 10);
    assert!(got.iter().all(|(_, r)| r.as_deref() == Ok("echo: hi")));
    for i in 0..10 {
        assert_eq!(
            chatter
                .history()
                .load_history(&sid(&format!("s{i}")))
                .unwrap()
                .len(),
            2
        );
    }
}

#[test]
fn same_session_async_runs_in_initiation_order() {
    let chatter = chatter_with(
        Arc::new(MockProvider::echo().with_latency(Duration::from_millis(1))),
        Arc::new(MemoryCache::new()),
    );
    let s = sid("ordered");
    let handles: Vec<_> = (0..20)
        .map(|i| chatter.bark_async(&s, format!("m{i}"), None, |_: Result<ChatResponse>| {}))
        .collect();
    handles.into_iter().for_each(|h| h.join());
    let h = chatter.history().load_history(&s).unwrap();
    let prompts: Vec<_> = h.iter().step_by(2).map(|m| m.content.clone()).collect();
    let want: Vec<_> = (0..20).map(|i| format!("m{i}")).collect();
    assert_eq!(prompts, want);
}

#[test]
fn sync_and_async_paths_agree() {
    let sync = chatter_with(Arc::new(MockProvider::echo()), Arc::new(MemoryCache::new()));
    let asy = chatter_with(Arc::new(MockProvider::echo()), Arc::new(MemoryCache::new()));
    let s = sid("s");
    for p in ["a", "b", "c"] {
        let a = sync.bark(&s, p, None).unwrap();
        let (tx, rx) = mpsc::channel();
        asy.bark_async(&s, p, None, move |r: Result<ChatResponse>| {
            tx.send(r).unwrap()
        })
        .join();
        let b = rx.recv().unwrap().unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.raw, b.raw);
    }
    let ha = sync.history().load_history(&s).unwrap();
    let hb = asy.history().load_history(&s).unwrap();
    assert!(ha.iter().zip(&hb).all(|(x, y)| x.same_turn(y)) && ha.len() == hb.len());
}

#[test]
fn response_cache_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mock = Arc::new(MockProvider::echo());
    let chatter = ProviderChatter::new(
        mock.clone(),
        Arc::new(FileSystemCache::open(dir.path()).unwrap()),
        PromptParameters::new("m"),
    )
    .with_response_cache(true);
    chatter.bark(&sid("a"), "same", None).unwrap();
    chatter.bark(&sid("b"), "same", None).unwrap();
    assert_eq!(mock.calls(), 1);
    chatter
        .bark(
            &sid("c"),
            "same",
            Some(&PromptParameters::new("m").with_top_p(0.5)),
        )
        .unwrap();
    assert_eq!(mock.calls(), 2);
    // same prompt, longer history
    chatter.bark(&sid("a"), "same", None).unwrap();
    assert_eq!(mock.calls(), 3);

    let off = Arc::new(MockProvider::echo());
    let plain = ProviderChatter::new(
        off.clone(),
        Arc::new(MemoryCache::new()),
        PromptParameters::new("m"),
    );
    plain.bark(&sid("a"), "same", None).unwrap();
    plain.bark(&sid("b"), "same", None).unwrap();
    assert_eq!(off.calls(), 2, "cache is off by default");
}

#[test]
fn torn_tail_recovery_returns_complete_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cache = FileSystemCache::open(dir.path()).unwrap();
    let s = sid("torn/session id");
    let chatter = chatter_with(
        Arc::new(MockProvider::echo()),
        Arc::new(FileSystemCache::open(dir.path()).unwrap()),
    );
    for p in ["a", "b"] {
        chatter.bark(&s, p, None).unwrap();
    }
    let path = cache.session_path(&s);
    assert!(path
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("torn%2Fsession%20id"));
    let complete = cache.load_history(&s).unwrap();
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap();
    std::io::Write::write_all(&mut f, br#"{"role":"user","conte"#).unwrap();
    drop(f);

    let report = cache.load_history_report(&s).unwrap();
    assert_eq!(report.messages, complete);
    assert!(report.torn_tail.is_some());
    assert_eq!(
        cache.read_history(&s).unwrap().torn_tail,
        None,
        "file repaired"
    );
    chatter.bark(&s, "c", None).unwrap();
    assert_eq!(cache.load_history(&s).unwrap().len(), 6);
}

#[test]
fn decorated_identity_matches_plain_over_randomized_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let plain = chatter_with(
        Arc::new(MockProvider::echo()),
        Arc::new(FileSystemCache::open(dir.path().join("plain")).unwrap()),
    );
    let inner = chatter_with(
        Arc::new(MockProvider::echo()),
        Arc::new(FileSystemCache::open(dir.path().join("rag")).unwrap()),
    );
    let rag = RagChatter::new(inner, Arc::new(IdentityHandler));
    let mut seed = 0x9E37_79B9_7F4A_7C15u64;
    let s = sid("s");
    for _ in 0..20 {
        seed ^= seed << 13;
        seed ^= seed >> 7;
        seed ^= seed << 17;
        let prompt = format!("prompt {seed:x} ünïcode {}", seed % 97);
        let a = plain.bark(&s, &prompt, None).unwrap();
        let b = rag.bark(&s, &prompt, None).unwrap();
        assert_eq!(a.text, b.text);
        assert_eq!(a.raw.as_str(), b.raw.as_str());
    }
    let strip = |h: Vec<Message>| {
        h.into_iter()
            .map(|m| serde_json::json!({"role": m.role, "content": m.content}).to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        strip(plain.history().load_history(&s).unwrap()),
        strip(rag.history().load_history(&s).unwrap())
    );
}
