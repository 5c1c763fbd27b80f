//! Deterministic line-oriented dump of the logical tables.
//!
//! One record per line: the table name followed by every column in schema
//! order, tab-separated. Rows are sorted by primary key and tables appear in
//! foreign-key order, so the same state always yields the same bytes.
//! `\N` is NULL; backslash, tab, CR and LF inside text are escaped.

use std::fmt::Write as _;

use rusqlite::types::{Value, ValueRef};
use rusqlite::{params_from_iter, Transaction};

use super::schema::LOGICAL_TABLES;
use super::{count, Store, StoreError, StoreResult};

pub const EXPORT_HEADER: &str = "# esem-export 1";

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn unescape(field: &str) -> Result<Option<String>, String> {
    if field == "\\N" {
        return Ok(None);
    }
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(Some(out))
}

fn column_count(tx: &Transaction<'_>, table: &str) -> StoreResult<usize> {
    Ok(count(tx, &format!("SELECT COUNT(*) FROM pragma_table_info('{table}')"), [])? as usize)
}

fn check_aggregates(tx: &Transaction<'_>) -> StoreResult<()> {
    let mismatched = count(
        tx,
        "SELECT COUNT(*) FROM attendancebook a WHERE \
         a.present_count <> (SELECT COUNT(*) FROM presenthours p WHERE p.seminar_id = a.seminar_id AND p.user_id = a.user_id AND p.present = 1) \
         OR a.absent_count <> (SELECT COUNT(*) FROM presenthours p WHERE p.seminar_id = a.seminar_id AND p.user_id = a.user_id AND p.present = 0)",
        [],
    )?;
    let missing = count(
        tx,
        "SELECT COUNT(*) FROM usersseminars e WHERE NOT EXISTS \
         (SELECT 1 FROM attendancebook a WHERE a.seminar_id = e.seminar_id AND a.user_id = e.user_id)",
        [],
    )?;
    if mismatched + missing > 0 {
        return Err(StoreError::Corrupt(format!(
            "{mismatched} attendance summaries disagree with their entries, {missing} enrollments lack a summary"
        )));
    }
    Ok(())
}

impl Store {
    pub fn export_logical(&self) -> StoreResult<String> {
        self.read(|tx| {
            let mut out = String::new();
            out.push_str(EXPORT_HEADER);
            out.push('\n');
            for (table, order) in LOGICAL_TABLES {
                let mut stmt = tx.prepare(&format!("SELECT * FROM {table} ORDER BY {order}"))?;
                let ncols = stmt.column_count();
                let mut rows = stmt.query([])?;
                while let Some(row) = rows.next()? {
                    out.push_str(table);
                    for i in 0..ncols {
                        out.push('\t');
                        match row.get_ref(i)? {
                            ValueRef::Null => out.push_str("\\N"),
                            ValueRef::Integer(v) => write!(out, "{v}").expect("write to String"),
                            ValueRef::Real(v) => write!(out, "{v:?}").expect("write to String"),
                            ValueRef::Text(t) => escape(&String::from_utf8_lossy(t), &mut out),
                            ValueRef::Blob(_) => {
                                return Err(StoreError::Corrupt(format!("unexpected blob value in {table}")))
                            }
                        }
                    }
                    out.push('\n');
                }
            }
            Ok(out)
        })
    }

    /// Loads a dump into an empty database. The whole import is one
    /// transaction; constraint violations abort it.
    pub fn import_logical(&self, dump: &str) -> StoreResult<()> {
        self.write(|tx| {
            for (table, _) in LOGICAL_TABLES {
                if count(tx, &format!("SELECT COUNT(*) FROM {table}"), [])? > 0 {
                    return Err(StoreError::Conflict("import target database is not empty".into()));
                }
            }
            let mut lines = dump.lines().enumerate();
            match lines.next() {
                Some((_, EXPORT_HEADER)) => {}
                _ => {
                    return Err(StoreError::Import {
                        line: 1,
                        message: format!("expected header {EXPORT_HEADER:?}"),
                    })
                }
            }
            let mut widths = std::collections::HashMap::new();
            for (table, _) in LOGICAL_TABLES {
                widths.insert(table, column_count(tx, table)?);
            }
            for (idx, line) in lines {
                let lineno = idx + 1;
                let err = |message: String| StoreError::Import { line: lineno, message };
                let mut fields = line.split('\t');
                let table = fields.next().unwrap_or_default();
                let Some(&width) = widths.get(table) else {
                    return Err(err(format!("unknown table {table:?}")));
                };
                let values: Vec<Value> = fields
                    .map(|f| unescape(f).map(|v| v.map_or(Value::Null, Value::Text)))
                    .collect::<Result<_, _>>()
                    .map_err(err)?;
                if values.len() != width {
                    return Err(err(format!("{table} expects {width} columns, found {}", values.len())));
                }
                let placeholders = vec!["?"; width].join(", ");
                tx.execute(&format!("INSERT INTO {table} VALUES ({placeholders})"), params_from_iter(values))
                    .map_err(|e| err(e.to_string()))?;
            }
            check_aggregates(tx)
        })
    }

    /// Recomputes every attendance summary from its entries and reports any
    /// disagreement.
    pub fn verify_aggregates(&self) -> StoreResult<()> {
        self.read(check_aggregates)
    }
}
