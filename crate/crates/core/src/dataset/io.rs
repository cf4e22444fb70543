use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{Event, EventLog, IdMap, ItemGroups};
use crate::error::{Error, Result};

/// Column names and delimiter of an activity log.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFormat {
    /// `None` detects comma or tab from the header row.
    pub delimiter: Option<u8>,
    pub node: String,
    pub item: String,
    pub value: String,
    pub timestamp: String,
}

impl Default for ColumnFormat {
    fn default() -> Self {
        ColumnFormat {
            delimiter: None,
            node: "node".into(),
            item: "item".into(),
            value: "value".into(),
            timestamp: "timestamp".into(),
        }
    }
}

fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().next().unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a delimited `node,item,value,timestamp` log, remapping node and item
/// ids to dense indices in first-appearance order.
pub fn load_events(path: &Path, format: &ColumnFormat) -> Result<EventLog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Ok(EventLog::default());
    }
    let delimiter = format.delimiter.unwrap_or_else(|| detect_delimiter(&text));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
    };
    let (c_node, c_item, c_value, c_time) = (
        column(&format.node)?,
        column(&format.item)?,
        column(&format.value)?,
        column(&format.timestamp)?,
    );

    let mut log = EventLog::default();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |c: usize| {
            record
                .get(c)
                .ok_or_else(|| parse_err(path, line, format!("missing field {}", c + 1)))
        };
        let value: f64 = field(c_value)?
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value `{}`", record.get(c_value).unwrap_or(""))))?;
        if !value.is_finite() {
            return Err(parse_err(path, line, "non-finite value"));
        }
        if value < 0.0 {
            return Err(parse_err(path, line, format!("negative value {value}")));
        }
        let timestamp: i64 = field(c_time)?.parse().map_err(|_| {
            parse_err(path, line, format!("bad timestamp `{}`", record.get(c_time).unwrap_or("")))
        })?;
        let node = log.nodes.intern(field(c_node)?);
        let item = log.items.intern(field(c_item)?);
        log.events.push(Event {
            node,
            item,
            value,
            timestamp,
        });
    }
    Ok(log)
}

/// Reads `group,item[,weight]` rows. Items are original ids resolved against
/// `items`; unknown items are skipped. With `top_n`, each group keeps its
/// `top_n` heaviest items (ties by dense id).
pub fn load_item_groups(path: &Path, items: &IdMap, top_n: Option<usize>) -> Result<ItemGroups> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(&text))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut weighted: BTreeMap<String, Vec<(f64, u32)>> = BTreeMap::new();
    let mut skipped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let (Some(group), Some(item)) = (record.get(0), record.get(1)) else {
            return Err(parse_err(path, line, "expected `group,item`"));
        };
        let weight = match record.get(2) {
            Some(w) if !w.is_empty() => w
                .parse::<f64>()
                .map_err(|_| parse_err(path, line, format!("bad weight `{w}`")))?,
            _ => 1.0,
        };
        let entry = weighted.entry(group.to_owned()).or_default();
        match items.lookup(item) {
            Some(id) => entry.push((weight, id)),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::info!("{}: skipped {skipped} group rows with items absent from the log", path.display());
    }
    Ok(weighted
        .into_iter()
        .map(|(g, mut members)| {
            members.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            if let Some(n) = top_n {
                members.truncate(n);
            }
            (g, members.into_iter().map(|(_, id)| id).collect())
        })
        .collect())
}

/// Writes the `original_id,dense_id` sidecar.
pub fn write_id_map(path: &Path, map: &IdMap) -> Result<()> {
    let mut out = String::from("original_id,dense_id\n");
    for dense in 0..map.len() as u32 {
        let original = map.original(dense).unwrap_or_default();
        if original.contains([',', '"', '\n']) {
            out.push_str(&format!("\"{}\",{dense}\n", original.replace('"', "\"\"")));
        } else {
            out.push_str(&format!("{original},{dense}\n"));
        }
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
