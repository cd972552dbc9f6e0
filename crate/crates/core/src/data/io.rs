//! Line-delimited JSON files.
//!
//! Every file starts with one header line, `#` followed by a JSON object carrying at
//! least `schema` and `version`. Each following non-empty line is one JSON record.
//! Readers ignore unknown fields in records.
//!
//! | schema             | record fields                                                          |
//! |--------------------|------------------------------------------------------------------------|
//! | `sidcoord.catalog` | `item_key`, `content_embedding`, `sids`, `latent_cluster`, `idiosyncratic_bias` |
//! | `sidcoord.log`     | `user_key`, `target`, `history`, `label`, `timestamp`, `engagement`    |
//! | `sidcoord.stats`   | `item_key`, `exposures`, `clicks`, `likes`, `shares`, `comments`       |
//!
//! The stats header additionally carries `window` (null for the whole log).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{DataError, Example, Item, ItemCounts, ItemKey, ItemStats};

pub const CATALOG_SCHEMA: &str = "sidcoord.catalog";
pub const LOG_SCHEMA: &str = "sidcoord.log";
pub const STATS_SCHEMA: &str = "sidcoord.stats";
pub const SCHEMA_VERSION: u64 = 1;

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.display().to_string(), source }
}

fn malformed(path: &Path, line: usize, reason: impl ToString) -> DataError {
    DataError::Malformed { path: path.display().to_string(), line, reason: reason.to_string() }
}

fn write_jsonl<T: Serialize>(path: &Path, header: Value, records: impl IntoIterator<Item = T>) -> Result<(), DataError> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "# {header}").map_err(io_err(path))?;
    for r in records {
        let line = serde_json::to_string(&r).map_err(|e| malformed(path, 0, e))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<(Value, Vec<T>), DataError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(f).lines();
    let first = lines
        .next()
        .ok_or_else(|| malformed(path, 1, "missing schema header"))?
        .map_err(io_err(path))?;
    let header: Value = first
        .strip_prefix('#')
        .ok_or_else(|| malformed(path, 1, "header line must start with '#'"))
        .and_then(|h| serde_json::from_str(h.trim()).map_err(|e| malformed(path, 1, e)))?;
    if header.get("schema").and_then(Value::as_str) != Some(schema) {
        return Err(malformed(path, 1, format!("expected schema {schema}, found {}", header["schema"])));
    }
    match header.get("version").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        other => return Err(malformed(path, 1, format!("unsupported schema version {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| malformed(path, i + 2, e))?;
        out.push(rec);
    }
    Ok((header, out))
}

fn header(schema: &str) -> Value {
    json!({ "schema": schema, "version": SCHEMA_VERSION })
}

pub fn write_catalog(path: &Path, items: &[Item]) -> Result<(), DataError> {
    write_jsonl(path, header(CATALOG_SCHEMA), items)
}

pub fn read_catalog(path: &Path) -> Result<Vec<Item>, DataError> {
    let (_, items): (_, Vec<Item>) = read_jsonl(path, CATALOG_SCHEMA)?;
    for (i, item) in items.iter().enumerate() {
        if item.content_embedding.iter().any(|x| !x.is_finite()) {
            return Err(malformed(path, i + 2, "non-finite content embedding"));
        }
    }
    Ok(items)
}

pub fn write_log(path: &Path, log: &[Example]) -> Result<(), DataError> {
    write_jsonl(path, header(LOG_SCHEMA), log)
}

pub fn read_log(path: &Path) -> Result<Vec<Example>, DataError> {
    let (_, log): (_, Vec<Example>) = read_jsonl(path, LOG_SCHEMA)?;
    if let Some(i) = log.iter().position(|e| e.label > 1) {
        return Err(malformed(path, i + 2, format!("label must be 0 or 1, got {}", log[i].label)));
    }
    Ok(log)
}

#[derive(Serialize, Deserialize)]
struct StatsRecord {
    item_key: ItemKey,
    #[serde(flatten)]
    counts: ItemCounts,
}

pub fn write_stats(path: &Path, stats: &ItemStats) -> Result<(), DataError> {
    let mut h = header(STATS_SCHEMA);
    h["window"] = json!(stats.window);
    write_jsonl(path, h, stats.counts.iter().map(|(&item_key, &counts)| StatsRecord { item_key, counts }))
}

pub fn read_stats(path: &Path) -> Result<ItemStats, DataError> {
    let (h, records): (_, Vec<StatsRecord>) = read_jsonl(path, STATS_SCHEMA)?;
    let window = h.get("window").and_then(Value::as_u64);
    Ok(ItemStats { window, counts: records.into_iter().map(|r| (r.item_key, r.counts)).collect() })
}
