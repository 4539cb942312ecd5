use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use hkg_core::corpus::Corpus;
use hkg_core::hkg::Hkg;
use hkg_core::quality::QualityReport;
use hkg_core::store::{self, EventLog};

use crate::{ServerConfig, ServerError};

pub struct GraphEntry {
    pub id: String,
    pub content_hash: String,
    pub hkg: Hkg,
    pub report: Option<QualityReport>,
}

/// Interaction state of one client session.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub session_id: String,
    pub graph_id: String,
    /// Visible detail nodes per document, created on first expand.
    pub visible: BTreeMap<String, BTreeSet<String>>,
    pub created_at_ms: u128,
}

pub struct AppState {
    pub graphs: BTreeMap<String, GraphEntry>,
    pub corpus: Option<Corpus>,
    pub hide_threshold: u64,
    pub(crate) log: Mutex<EventLog>,
    pub(crate) sessions: Mutex<HashMap<String, Arc<Mutex<SessionState>>>>,
}

const HKG_SUFFIX: &str = ".hkg.json";

impl AppState {
    /// Reads every `<id>.hkg.json` in the artifacts directory, the optional
    /// `<id>.report.json` next to it, and `corpus.json` when present.
    pub fn load(config: &ServerConfig) -> Result<Self, ServerError> {
        let dir = &config.artifacts;
        let entries = std::fs::read_dir(dir).map_err(|source| ServerError::Io {
            path: dir.clone(),
            source,
        })?;
        let mut names: Vec<String> = entries
            .filter_map(Result::ok)
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.ends_with(HKG_SUFFIX))
            .collect();
        names.sort();
        let mut graphs = BTreeMap::new();
        for name in names {
            let id = name.trim_end_matches(HKG_SUFFIX).to_string();
            let (hkg, content_hash) = store::load_with_hash::<Hkg>(dir.join(&name))?;
            let report_path = dir.join(format!("{id}.report.json"));
            let report = if report_path.exists() {
                Some(store::load::<QualityReport>(&report_path)?)
            } else {
                None
            };
            log::info!("loaded graph `{id}` ({content_hash})");
            graphs.insert(
                id.clone(),
                GraphEntry {
                    id,
                    content_hash,
                    hkg,
                    report,
                },
            );
        }
        if graphs.is_empty() {
            return Err(ServerError::NoArtifacts(dir.clone()));
        }
        let corpus_path = dir.join("corpus.json");
        let corpus = if corpus_path.exists() {
            Some(store::load::<Corpus>(&corpus_path)?)
        } else {
            log::warn!("{} not found; document text is unavailable", corpus_path.display());
            None
        };
        AppState::new(graphs, corpus, config.hide_threshold, &config.log_path())
    }

    pub fn new(
        graphs: BTreeMap<String, GraphEntry>,
        corpus: Option<Corpus>,
        hide_threshold: u64,
        log_path: &Path,
    ) -> Result<Self, ServerError> {
        Ok(AppState {
            graphs,
            corpus,
            hide_threshold,
            log: Mutex::new(EventLog::open(log_path)?),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    /// The graph new sessions use when none is requested.
    pub fn default_graph(&self) -> &str {
        if self.graphs.contains_key("gold") {
            "gold"
        } else {
            self.graphs.keys().next().expect("at least one graph")
        }
    }

    pub(crate) fn create_session(&self, graph_id: &str) -> String {
        let session_id = uuid::Uuid::new_v4().to_string();
        let created_at_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis());
        let state = SessionState {
            session_id: session_id.clone(),
            graph_id: graph_id.to_string(),
            visible: BTreeMap::new(),
            created_at_ms,
        };
        self.sessions
            .lock()
            .expect("session table poisoned")
            .insert(session_id.clone(), Arc::new(Mutex::new(state)));
        session_id
    }

    pub(crate) fn session(&self, id: &str) -> Option<Arc<Mutex<SessionState>>> {
        self.sessions
            .lock()
            .expect("session table poisoned")
            .get(id)
            .cloned()
    }

    pub fn document_body(&self, doc_id: &str) -> Option<&hkg_core::corpus::Document> {
        self.corpus.as_ref()?.document(doc_id)
    }
}
