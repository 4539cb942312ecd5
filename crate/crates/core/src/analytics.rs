//! Log-derived interaction measures: node clicks (NC), edge clicks (EC),
//! document views (V), document view time (VT), per-view dwell fractions and
//! the task-length view-usage heatmap.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::exec::Execution;

/// Bins in the default heatmap: one per percent of task length.
pub const HEATMAP_BINS: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("session `{0}` has no TaskStart event")]
    MissingTaskStart(String),
    #[error("session `{0}` has no TaskEnd event after TaskStart")]
    MissingTaskEnd(String),
    #[error("session `{0}` has zero duration")]
    ZeroDuration(String),
    #[error("events are not sorted by t_ms (at {0} ms)")]
    NotSorted(u64),
    #[error("events from several sessions passed as one (`{0}` and `{1}`)")]
    MixedSessions(String, String),
    #[error("unknown view `{0}`")]
    InvalidView(String),
    #[error("no sessions to aggregate")]
    Empty,
    #[error("heatmap needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    NodeClick,
    EdgeClick,
    SnippetView,
    ViewArticle,
    ViewArticleEnd,
    LayerEnter,
    LayerExit,
    TaskStart,
    TaskEnd,
    /// A kind this version does not know; kept verbatim.
    Other(String),
}

impl EventKind {
    pub fn as_str(&self) -> &str {
        match self {
            EventKind::NodeClick => "NodeClick",
            EventKind::EdgeClick => "EdgeClick",
            EventKind::SnippetView => "SnippetView",
            EventKind::ViewArticle => "ViewArticle",
            EventKind::ViewArticleEnd => "ViewArticleEnd",
            EventKind::LayerEnter => "LayerEnter",
            EventKind::LayerExit => "LayerExit",
            EventKind::TaskStart => "TaskStart",
            EventKind::TaskEnd => "TaskEnd",
            EventKind::Other(s) => s,
        }
    }
}

impl From<String> for EventKind {
    fn from(s: String) -> Self {
        match s.as_str() {
            "NodeClick" => EventKind::NodeClick,
            "EdgeClick" => EventKind::EdgeClick,
            "SnippetView" => EventKind::SnippetView,
            "ViewArticle" => EventKind::ViewArticle,
            "ViewArticleEnd" => EventKind::ViewArticleEnd,
            "LayerEnter" => EventKind::LayerEnter,
            "LayerExit" => EventKind::LayerExit,
            "TaskStart" => EventKind::TaskStart,
            "TaskEnd" => EventKind::TaskEnd,
            _ => EventKind::Other(s),
        }
    }
}

impl From<EventKind> for String {
    fn from(k: EventKind) -> Self {
        k.as_str().to_string()
    }
}

impl Serialize for EventKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(EventKind::from)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum View {
    Global,
    MiniMap,
    Detailed,
}

impl View {
    pub const ALL: [View; 3] = [View::Global, View::MiniMap, View::Detailed];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(name: &str) -> Result<View, AnalyticsError> {
        match name {
            "Global" => Ok(View::Global),
            "MiniMap" => Ok(View::MiniMap),
            "Detailed" => Ok(View::Detailed),
            other => Err(AnalyticsError::InvalidView(other.to_string())),
        }
    }
}

/// One logged interaction. Serializes to the event-log line schema with
/// keys in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session: String,
    /// Milliseconds since session start.
    pub t_ms: u64,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Map<String, Value>,
}

impl InteractionEvent {
    pub fn new(session: impl Into<String>, t_ms: u64, kind: EventKind) -> Self {
        InteractionEvent {
            session: session.into(),
            t_ms,
            kind,
            payload: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn view(&self) -> Result<Option<View>, AnalyticsError> {
        match self.payload.get("view") {
            None => Ok(None),
            Some(Value::String(s)) => View::parse(s).map(Some),
            Some(other) => Err(AnalyticsError::InvalidView(other.to_string())),
        }
    }

    pub fn doc(&self) -> Option<&str> {
        self.payload.get("doc").and_then(Value::as_str)
    }

    /// Checks that any `view` field names one of the known views.
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        self.view().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session: String,
    pub nc: u64,
    pub ec: u64,
    pub v: u64,
    pub vt_s: f64,
    pub duration_s: f64,
    /// Seconds spent in each view; empty when no view time was logged.
    pub view_seconds: BTreeMap<View, f64>,
    /// Share of total view time per view; empty when no view time was logged.
    pub view_fractions: BTreeMap<View, f64>,
    /// `HEATMAP_BINS` rows of per-view dwell fractions, columns in
    /// [`View::ALL`] order.
    pub heatmap: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy)]
struct Task {
    start: u64,
    end: u64,
}

fn check_session(events: &[InteractionEvent]) -> Result<String, AnalyticsError> {
    let session = events.first().map(|e| e.session.clone()).unwrap_or_default();
    let mut last = 0;
    for e in events {
        if e.session != session {
            return Err(AnalyticsError::MixedSessions(session, e.session.clone()));
        }
        if e.t_ms < last {
            return Err(AnalyticsError::NotSorted(e.t_ms));
        }
        last = e.t_ms;
    }
    Ok(session)
}

fn task_bounds(session: &str, events: &[InteractionEvent]) -> Result<Task, AnalyticsError> {
    let start_at = events
        .iter()
        .position(|e| e.kind == EventKind::TaskStart)
        .ok_or_else(|| AnalyticsError::MissingTaskStart(session.to_string()))?;
    let end = events[start_at..]
        .iter()
        .find(|e| e.kind == EventKind::TaskEnd)
        .ok_or_else(|| AnalyticsError::MissingTaskEnd(session.to_string()))?;
    Ok(Task {
        start: events[start_at].t_ms,
        end: end.t_ms,
    })
}

/// Reconstructs non-overlapping view dwell intervals, clipped to the task.
fn view_intervals(
    events: &[InteractionEvent],
    task: Task,
) -> Result<Vec<(View, u64, u64)>, AnalyticsError> {
    let mut out = Vec::new();
    let mut current: Option<(View, u64)> = None;
    let mut close = |cur: &mut Option<(View, u64)>, t: u64| {
        if let Some((v, from)) = cur.take() {
            let (a, b) = (from.max(task.start), t.min(task.end));
            if b > a {
                out.push((v, a, b));
            }
        }
    };
    for e in events {
        if e.t_ms > task.end {
            break;
        }
        match e.kind {
            EventKind::LayerEnter => {
                let Some(view) = e.view()? else {
                    log::warn!("LayerEnter at {} ms has no view", e.t_ms);
                    continue;
                };
                close(&mut current, e.t_ms);
                current = Some((view, e.t_ms));
            }
            EventKind::LayerExit => {
                let view = e.view()?;
                match current {
                    Some((v, _)) if view.is_none() || view == Some(v) => close(&mut current, e.t_ms),
                    _ => log::warn!("LayerExit at {} ms does not match the current view", e.t_ms),
                }
            }
            EventKind::TaskEnd => break,
            _ => {}
        }
    }
    close(&mut current, task.end);
    Ok(out)
}

/// Total length of the union of article-view intervals, in milliseconds.
fn article_time_ms(events: &[InteractionEvent], task: Task) -> u64 {
    let mut open: Vec<(Option<&str>, u64)> = Vec::new();
    let mut intervals: Vec<(u64, u64)> = Vec::new();
    for e in events {
        if e.t_ms > task.end {
            break;
        }
        match e.kind {
            EventKind::ViewArticle => open.push((e.doc(), e.t_ms)),
            EventKind::ViewArticleEnd => {
                let idx = match e.doc() {
                    Some(d) => open.iter().rposition(|(od, _)| *od == Some(d)),
                    None => open.len().checked_sub(1),
                };
                match idx {
                    Some(i) => {
                        let (_, from) = open.remove(i);
                        intervals.push((from, e.t_ms));
                    }
                    None => log::warn!("ViewArticleEnd at {} ms without an open view", e.t_ms),
                }
            }
            EventKind::TaskEnd => break,
            _ => {}
        }
    }
    intervals.extend(open.into_iter().map(|(_, from)| (from, task.end)));
    intervals.retain(|(a, b)| b > a);
    intervals.sort_unstable();

    let mut total = 0;
    let mut cur: Option<(u64, u64)> = None;
    for (a, b) in intervals {
        cur = match cur {
            Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                total += cb - ca;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((a, b)) = cur {
        total += b - a;
    }
    total
}

fn bin_matrix(intervals: &[(View, u64, u64)], task: Task, bins: usize) -> Vec<[f64; 3]> {
    let duration = (task.end - task.start) as f64;
    let width = duration / bins as f64;
    let mut rows = vec![[0.0; 3]; bins];
    for &(view, a, b) in intervals {
        let (a, b) = ((a - task.start) as f64, (b - task.start) as f64);
        let first = ((a / width).floor() as usize).min(bins - 1);
        let last = ((b / width).ceil() as usize).min(bins);
        for (i, row) in rows.iter_mut().enumerate().take(last).skip(first) {
            let lo = width * i as f64;
            let hi = if i + 1 == bins { duration } else { width * (i + 1) as f64 };
            let overlap = b.min(hi) - a.max(lo);
            if overlap > 0.0 {
                row[view.index()] += overlap / (hi - lo);
            }
        }
    }
    rows
}

/// Splits the task into `bins` equal intervals; each cell holds the fraction
/// of that interval spent in a view, apportioning straddled transitions.
pub fn heatmap(events: &[InteractionEvent], bins: usize) -> Result<Vec<[f64; 3]>, AnalyticsError> {
    if bins == 0 {
        return Err(AnalyticsError::NoBins);
    }
    let session = check_session(events)?;
    let task = task_bounds(&session, events)?;
    if task.end <= task.start {
        return Err(AnalyticsError::ZeroDuration(session));
    }
    Ok(bin_matrix(&view_intervals(events, task)?, task, bins))
}

/// Computes the per-session measures from one session's events.
///
/// Article views still open at TaskEnd are truncated there; overlapping
/// article views count once.
pub fn session_metrics(events: &[InteractionEvent]) -> Result<SessionMetrics, AnalyticsError> {
    let session = check_session(events)?;
    let task = task_bounds(&session, events)?;
    if task.end <= task.start {
        return Err(AnalyticsError::ZeroDuration(session));
    }

    let (mut nc, mut ec, mut v) = (0, 0, 0);
    for e in events {
        e.validate()?;
        match &e.kind {
            EventKind::NodeClick => nc += 1,
            EventKind::EdgeClick => ec += 1,
            EventKind::ViewArticle => v += 1,
            EventKind::Other(k) => log::warn!("skipping unknown event kind `{k}`"),
            _ => {}
        }
    }

    let intervals = view_intervals(events, task)?;
    let mut dwell_ms = [0u64; 3];
    for &(view, a, b) in &intervals {
        dwell_ms[view.index()] += b - a;
    }
    let total: u64 = dwell_ms.iter().sum();
    let (mut view_seconds, mut view_fractions) = (BTreeMap::new(), BTreeMap::new());
    if total > 0 {
        for view in View::ALL {
            let ms = dwell_ms[view.index()];
            view_seconds.insert(view, ms as f64 / 1000.0);
            view_fractions.insert(view, ms as f64 / total as f64);
        }
    }

    Ok(SessionMetrics {
        session,
        nc,
        ec,
        v,
        vt_s: article_time_ms(events, task) as f64 / 1000.0,
        duration_s: (task.end - task.start) as f64 / 1000.0,
        view_seconds,
        view_fractions,
        heatmap: bin_matrix(&intervals, task, HEATMAP_BINS),
    })
}

/// Groups a mixed log by session id, preserving event order.
pub fn group_by_session(events: Vec<InteractionEvent>) -> BTreeMap<String, Vec<InteractionEvent>> {
    let mut out: BTreeMap<String, Vec<InteractionEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.session.clone()).or_default().push(e);
    }
    out
}

/// Computes metrics for many sessions.
pub fn session_metrics_batch(
    sessions: &[Vec<InteractionEvent>],
    exec: Execution,
) -> Vec<Result<SessionMetrics, AnalyticsError>> {
    exec.map(sessions, |events| session_metrics(events))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for one value.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        Summary { mean, std }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2} ({:.2})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub sessions: usize,
    /// Set when only one session was aggregated, so every std is 0.
    pub single_session: bool,
    pub nc: Summary,
    pub ec: Summary,
    pub v: Summary,
    pub vt_s: Summary,
    pub duration_s: Summary,
    /// Over sessions that logged any view time.
    pub view_fractions: BTreeMap<View, Summary>,
}

/// Mean and sample standard deviation of every per-session measure.
pub fn aggregate(metrics: &[SessionMetrics]) -> Result<AggregateReport, AnalyticsError> {
    if metrics.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let field = |f: fn(&SessionMetrics) -> f64| {
        Summary::of(&metrics.iter().map(f).collect::<Vec<_>>())
    };
    let with_views: Vec<&SessionMetrics> =
        metrics.iter().filter(|m| !m.view_fractions.is_empty()).collect();
    let mut view_fractions = BTreeMap::new();
    if !with_views.is_empty() {
        for view in View::ALL {
            let xs: Vec<f64> = with_views.iter().map(|m| m.view_fractions[&view]).collect();
            view_fractions.insert(view, Summary::of(&xs));
        }
    }
    Ok(AggregateReport {
        sessions: metrics.len(),
        single_session: metrics.len() == 1,
        nc: field(|m| m.nc as f64),
        ec: field(|m| m.ec as f64),
        v: field(|m| m.v as f64),
        vt_s: field(|m| m.vt_s),
        duration_s: field(|m| m.duration_s),
        view_fractions,
    })
}

/// Renders rows of per-view time shares as a percentage table.
pub fn format_view_shares(rows: &[(&str, [f64; 3])]) -> String {
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(4);
    let mut out = format!(
        "{:label_w$} | {:>10} | {:>10} | {:>12}\n",
        "", "GlobalView", "MiniMap", "DetailedView"
    );
    for (label, shares) in rows {
        out.push_str(&format!(
            "{:label_w$} | {:>9.2}% | {:>9.2}% | {:>11.2}%\n",
            label,
            shares[0] * 100.0,
            shares[1] * 100.0,
            shares[2] * 100.0
        ));
    }
    out
}

/// One CSV row per session.
pub fn write_csv<W: Write>(metrics: &[SessionMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "session", "nc", "ec", "v", "vt_s", "duration_s", "global", "minimap", "detailed",
    ])?;
    for m in metrics {
        let frac = |v: View| m.view_fractions.get(&v).copied().unwrap_or(0.0).to_string();
        w.write_record([
            m.session.clone(),
            m.nc.to_string(),
            m.ec.to_string(),
            m.v.to_string(),
            m.vt_s.to_string(),
            m.duration_s.to_string(),
            frac(View::Global),
            frac(View::MiniMap),
            frac(View::Detailed),
        ])?;
    }
    w.flush()?;
    Ok(())
}
