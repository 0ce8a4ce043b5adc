//! Loaders and serializers for the personal dataset: calendar JSON,
//! conversation logs (JSONL), and question/golden-answer pairs.
//!
//! All loaders are pure functions over the file contents; every error value
//! carries the file path plus a JSON pointer or line number.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Number (1-12) for an English month name, if it is one.
pub fn month_number(name: &str) -> Option<u32> {
    MONTH_NAMES
        .iter()
        .position(|m| m.eq_ignore_ascii_case(name))
        .map(|i| i as u32 + 1)
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}{}: {message}", .line.map(|l| format!(", line {l}")).unwrap_or_default())]
    MalformedJson {
        path: String,
        line: Option<usize>,
        message: String,
    },
    #[error("schema violation in {path} at {pointer}: {message}")]
    SchemaViolation {
        path: String,
        pointer: String,
        message: String,
    },
    #[error("duplicate QA pair id {id:?} in {path}")]
    DuplicateId { path: String, id: String },
}

fn read_file(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DataError::FileNotFound(path.display().to_string())
        } else {
            DataError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })
}

/// Event time: either a 24h "HH:MM - HH:MM" range or the literal "All day".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventTime {
    AllDay,
    Range { start: String, end: String },
}

impl EventTime {
    fn parse_hhmm(s: &str) -> Option<(u32, u32)> {
        let bytes = s.as_bytes();
        if bytes.len() != 5 || bytes[2] != b':' {
            return None;
        }
        let h: u32 = s[0..2].parse().ok()?;
        let m: u32 = s[3..5].parse().ok()?;
        if h > 23 || m > 59 {
            return None;
        }
        Some((h, m))
    }
}

impl FromStr for EventTime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "All day" {
            return Ok(EventTime::AllDay);
        }
        let parts: Vec<&str> = s.split(" - ").collect();
        if parts.len() == 2 {
            if let (Some(start), Some(end)) = (
                EventTime::parse_hhmm(parts[0]),
                EventTime::parse_hhmm(parts[1]),
            ) {
                if start <= end {
                    return Ok(EventTime::Range {
                        start: parts[0].to_string(),
                        end: parts[1].to_string(),
                    });
                }
                return Err(format!("time range start after end: {s:?}"));
            }
        }
        Err(format!(
            "time must be \"HH:MM - HH:MM\" or \"All day\", got {s:?}"
        ))
    }
}

impl fmt::Display for EventTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventTime::AllDay => f.write_str("All day"),
            EventTime::Range { start, end } => write!(f, "{start} - {end}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CalendarEvent {
    pub title: String,
    pub date: NaiveDate,
    pub time: EventTime,
}

/// Events under one month key, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonthGroup {
    pub name: String,
    pub events: Vec<CalendarEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Calendar {
    /// Original top-level key, e.g. "AlexCalendar2024".
    pub key: String,
    /// Derived from the key prefix before "Calendar".
    pub owner: String,
    pub months: Vec<MonthGroup>,
}

impl Calendar {
    pub fn events(&self) -> impl Iterator<Item = (&str, &CalendarEvent)> {
        self.months
            .iter()
            .flat_map(|m| m.events.iter().map(move |e| (m.name.as_str(), e)))
    }

    pub fn event_count(&self) -> usize {
        self.months.iter().map(|m| m.events.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationMessage {
    pub conversation_id: String,
    pub seq: usize,
    pub sender: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub golden_answer: String,
}

fn expect_str<'a>(
    value: &'a Value,
    path: &Path,
    pointer: &str,
) -> Result<&'a str, DataError> {
    value.as_str().ok_or_else(|| DataError::SchemaViolation {
        path: path.display().to_string(),
        pointer: pointer.to_string(),
        message: "expected a string".to_string(),
    })
}

fn schema_err(path: &Path, pointer: &str, message: impl Into<String>) -> DataError {
    DataError::SchemaViolation {
        path: path.display().to_string(),
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

/// Load a calendar file shaped like the bundled fixtures: a top-level object
/// with a single "<Owner>Calendar<Year>" key mapping month names to event
/// arrays of `{"event", "date", "time"}`.
pub fn load_calendar(path: impl AsRef<Path>) -> Result<Calendar, DataError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let root: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedJson {
            path: path.display().to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;

    if root.len() != 1 {
        return Err(schema_err(
            path,
            "",
            format!("expected exactly one calendar key, found {}", root.len()),
        ));
    }
    let (key, months_val) = root.iter().next().expect("len checked");
    let owner = match key.find("Calendar") {
        Some(i) if i > 0 => key[..i].to_string(),
        _ => {
            return Err(schema_err(
                path,
                &format!("/{key}"),
                "calendar key must be \"<owner>Calendar...\"",
            ))
        }
    };

    let months_obj = months_val
        .as_object()
        .ok_or_else(|| schema_err(path, &format!("/{key}"), "expected an object of months"))?;

    let mut months = Vec::new();
    for (month_name, events_val) in months_obj {
        let month_ptr = format!("/{key}/{month_name}");
        let month_num = month_number(month_name)
            .ok_or_else(|| schema_err(path, &month_ptr, "not a month name"))?;
        let events_arr = events_val
            .as_array()
            .ok_or_else(|| schema_err(path, &month_ptr, "expected an array of events"))?;

        let mut events = Vec::new();
        for (i, ev) in events_arr.iter().enumerate() {
            let ev_ptr = format!("{month_ptr}/{i}");
            let obj = ev
                .as_object()
                .ok_or_else(|| schema_err(path, &ev_ptr, "expected an event object"))?;

            for field in obj.keys() {
                if !matches!(field.as_str(), "event" | "date" | "time") {
                    log::warn!(
                        "{}: ignoring unknown field {:?} at {}",
                        path.display(),
                        field,
                        ev_ptr
                    );
                }
            }

            let title = expect_str(
                obj.get("event")
                    .ok_or_else(|| schema_err(path, &ev_ptr, "missing \"event\""))?,
                path,
                &format!("{ev_ptr}/event"),
            )?;
            if title.is_empty() {
                return Err(schema_err(path, &format!("{ev_ptr}/event"), "empty title"));
            }

            let date_str = expect_str(
                obj.get("date")
                    .ok_or_else(|| schema_err(path, &ev_ptr, "missing \"date\""))?,
                path,
                &format!("{ev_ptr}/date"),
            )?;
            let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|_| {
                schema_err(
                    path,
                    &format!("{ev_ptr}/date"),
                    format!("invalid calendar date {date_str:?}"),
                )
            })?;
            if date.month() != month_num {
                return Err(schema_err(
                    path,
                    &format!("{ev_ptr}/date"),
                    format!("date {date_str} is not in {month_name}"),
                ));
            }

            let time_str = expect_str(
                obj.get("time")
                    .ok_or_else(|| schema_err(path, &ev_ptr, "missing \"time\""))?,
                path,
                &format!("{ev_ptr}/time"),
            )?;
            let time = time_str
                .parse::<EventTime>()
                .map_err(|m| schema_err(path, &format!("{ev_ptr}/time"), m))?;

            events.push(CalendarEvent {
                title: title.to_string(),
                date,
                time,
            });
        }
        months.push(MonthGroup {
            name: month_name.clone(),
            events,
        });
    }

    Ok(Calendar {
        key: key.clone(),
        owner,
        months,
    })
}

/// Serialize a calendar back to the file shape accepted by [`load_calendar`].
pub fn calendar_to_json(cal: &Calendar) -> Value {
    let mut months = serde_json::Map::new();
    for group in &cal.months {
        let events: Vec<Value> = group
            .events
            .iter()
            .map(|e| {
                let mut obj = serde_json::Map::new();
                obj.insert("event".into(), Value::String(e.title.clone()));
                obj.insert(
                    "date".into(),
                    Value::String(e.date.format("%Y-%m-%d").to_string()),
                );
                obj.insert("time".into(), Value::String(e.time.to_string()));
                Value::Object(obj)
            })
            .collect();
        months.insert(group.name.clone(), Value::Array(events));
    }
    let mut root = serde_json::Map::new();
    root.insert(cal.key.clone(), Value::Object(months));
    Value::Object(root)
}

/// Load line-delimited conversation messages. `seq` is assigned by line order
/// within each conversation; output is grouped and ordered by
/// `(conversation_id, seq)`.
pub fn load_conversations(path: impl AsRef<Path>) -> Result<Vec<ConversationMessage>, DataError> {
    let path = path.as_ref();
    let text = read_file(path)?;

    let malformed = |line: usize, message: String| DataError::MalformedJson {
        path: path.display().to_string(),
        line: Some(line),
        message,
    };

    let mut groups: BTreeMap<String, Vec<ConversationMessage>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(line).map_err(|e| malformed(lineno, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| malformed(lineno, "expected a JSON object".into()))?;

        for field in obj.keys() {
            if !matches!(field.as_str(), "conversation_id" | "sender" | "text") {
                log::warn!(
                    "{}: ignoring unknown field {:?} at line {}",
                    path.display(),
                    field,
                    lineno
                );
            }
        }

        let get_str = |field: &str| -> Result<&str, DataError> {
            obj.get(field)
                .and_then(Value::as_str)
                .ok_or_else(|| malformed(lineno, format!("missing string field {field:?}")))
        };
        let conversation_id = get_str("conversation_id")?;
        let sender = get_str("sender")?;
        let msg_text = get_str("text")?;
        if conversation_id.is_empty() || sender.is_empty() || msg_text.is_empty() {
            return Err(malformed(
                lineno,
                "conversation_id, sender, and text must be non-empty".into(),
            ));
        }

        let group = groups.entry(conversation_id.to_string()).or_default();
        group.push(ConversationMessage {
            conversation_id: conversation_id.to_string(),
            seq: group.len(),
            sender: sender.to_string(),
            text: msg_text.to_string(),
        });
    }

    for (id, msgs) in &groups {
        if !(10..=20).contains(&msgs.len()) {
            log::warn!(
                "{}: conversation {:?} has {} messages, expected 10 to 20",
                path.display(),
                id,
                msgs.len()
            );
        }
    }

    Ok(groups.into_values().flatten().collect())
}

/// Serialize messages back to JSONL in the given order.
pub fn conversations_to_jsonl(messages: &[ConversationMessage]) -> String {
    let mut out = String::new();
    for m in messages {
        let mut obj = serde_json::Map::new();
        obj.insert("conversation_id".into(), Value::String(m.conversation_id.clone()));
        obj.insert("sender".into(), Value::String(m.sender.clone()));
        obj.insert("text".into(), Value::String(m.text.clone()));
        out.push_str(&Value::Object(obj).to_string());
        out.push('\n');
    }
    out
}

/// Load question/golden-answer pairs from a JSON array, rejecting duplicate ids.
pub fn load_qa_pairs(path: impl AsRef<Path>) -> Result<Vec<QAPair>, DataError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let pairs: Vec<QAPair> =
        serde_json::from_str(&text).map_err(|e| DataError::MalformedJson {
            path: path.display().to_string(),
            line: Some(e.line()),
            message: e.to_string(),
        })?;

    let mut seen = std::collections::HashSet::new();
    for (i, pair) in pairs.iter().enumerate() {
        if pair.question.is_empty() || pair.golden_answer.is_empty() {
            return Err(schema_err(
                path,
                &format!("/{i}"),
                "question and golden_answer must be non-empty",
            ));
        }
        if !seen.insert(pair.id.clone()) {
            return Err(DataError::DuplicateId {
                path: path.display().to_string(),
                id: pair.id.clone(),
            });
        }
    }
    Ok(pairs)
}

pub fn qa_pairs_to_json(pairs: &[QAPair]) -> String {
    serde_json::to_string_pretty(pairs).expect("QA pairs serialize")
}
