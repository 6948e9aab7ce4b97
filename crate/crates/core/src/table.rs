//! Strict CSV reading and writing shared by the rubric, roster, log and grade sheet.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct Table {
    pub header: Vec<String>,
    /// (1-based line where the record starts, fields)
    pub records: Vec<(usize, Vec<String>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

pub(crate) fn read_table(text: &str) -> Result<Table> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedTable(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect::<Vec<_>>();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::MalformedTable("missing header row".into()));
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::MalformedTable(e.to_string()))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, records })
}

pub(crate) fn write_table<I, R, S>(header: &[S], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
    S: AsRef<[u8]>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    // Writing to a Vec cannot fail.
    w.write_record(header).expect("in-memory csv write");
    for row in rows {
        w.write_record(row).expect("in-memory csv write");
    }
    let bytes = w.into_inner().expect("in-memory csv flush");
    String::from_utf8(bytes).expect("csv output of utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_malformed() {
        let err = read_table("a,b\n1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::MalformedTable(_)));
    }

    #[test]
    fn quoted_fields_keep_newlines() {
        let t = read_table("a,b\n\"x\ny\",2\n").unwrap();
        assert_eq!(t.records[0].1[0], "x\ny");
        assert_eq!(t.records[0].0, 2);
    }

    #[test]
    fn bom_is_ignored() {
        let t = read_table("\u{feff}a,b\n1,2\n").unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
    }
}
