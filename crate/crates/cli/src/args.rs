use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "kennel",
    version,
    about = "Vendor-neutral LLM chat, retrieval and review tools"
)]
pub struct Cli {
    #[command(flatten)]
    pub provider: ProviderArgs,

    /// Directory holding session histories and cached responses.
    #[arg(
        long,
        global = true,
        env = "KENNEL_CACHE_DIR",
        default_value = ".kennel"
    )]
    pub cache_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ProviderArgs {
    /// openai (any OpenAI-compatible endpoint, including gemini), ollama, router or mock.
    #[arg(long, global = true, env = "KENNEL_PROVIDER", default_value = "openai")]
    pub provider: String,

    /// Overrides the provider's default base URL.
    #[arg(long, global = true, env = "KENNEL_BASE_URL")]
    pub base_url: Option<String>,

    /// Name of the environment variable holding the API key. KENNEL_API_KEY
    /// is read when unset.
    #[arg(long, global = true)]
    pub api_key_env: Option<String>,

    #[arg(long, global = true, env = "KENNEL_MODEL")]
    pub model: Option<String>,

    /// Extra request header, `Name: value`. Repeatable.
    #[arg(long = "header", global = true, value_name = "NAME: VALUE")]
    pub headers: Vec<String>,

    /// Request timeout in seconds.
    #[arg(long, global = true, default_value_t = 60)]
    pub timeout: u64,

    /// JSON array of canned replies for the mock provider; implies
    /// `--provider mock`. Entries are strings or `{"status": 503, "body": "..."}`.
    #[arg(long, global = true)]
    pub mock_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    #[arg(long)]
    pub temperature: Option<f64>,

    #[arg(long)]
    pub max_tokens: Option<u32>,

    #[arg(long)]
    pub top_p: Option<f64>,

    /// System prompt sent with every turn (not stored in history).
    #[arg(long)]
    pub system: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interactive chat. `/history` prints the session, `/quit` exits.
    Chat {
        #[arg(long, default_value = "default")]
        session: String,

        /// Keyword index used to ground every turn.
        #[arg(long)]
        rag_index: Option<PathBuf>,

        #[arg(long, default_value_t = kennel_core::rag::DEFAULT_TOP_K)]
        top_k: usize,

        #[command(flatten)]
        sampling: SamplingArgs,
    },

    /// Builds a keyword index from every .txt and .md file under a directory.
    Index {
        dir: PathBuf,

        #[arg(long, short)]
        out: PathBuf,

        #[arg(long, default_value_t = 256)]
        max_tokens: usize,

        #[arg(long, default_value_t = 32)]
        overlap: usize,
    },

    /// Reviews source files against a rules file and prints a JSON report.
    Review {
        /// Plain-text review rules. A `metrics: a, b, c` line fixes the score names.
        #[arg(long)]
        rules: PathBuf,

        #[arg(required = true)]
        sources: Vec<PathBuf>,

        #[command(flatten)]
        sampling: SamplingArgs,
    },

    /// Runs the HTTP service until interrupted.
    Serve {
        #[arg(long, env = "KENNEL_LISTEN", default_value = kennel_service::DEFAULT_LISTEN)]
        listen: String,

        /// Knowledge source store. Defaults to `{cache-dir}/knowledge_source.json`.
        #[arg(long)]
        source_store: Option<PathBuf>,

        /// Index fed by document uploads. Defaults to `{cache-dir}/corpus.json`.
        #[arg(long)]
        corpus_index: Option<PathBuf>,

        /// Directory of static files (the built web UI) served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,

        /// Allowed CORS origin. Any origin when unset.
        #[arg(long)]
        cors_origin: Option<String>,

        /// Reuse stored replies for identical requests.
        #[arg(long)]
        response_cache: bool,
    },
}
