use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;

use super::{parse_message, Dataset, Provenance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub warnings: Vec<String>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Dataset, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let (mut ds, report) = read_corpus(BufReader::new(file))?;
    if ds.is_empty() {
        return Err(Error::NoRecords {
            path: path.to_path_buf(),
        });
    }
    ds.provenance.source = Some(path.to_path_buf());
    Ok((ds, report))
}

/// Reads JSONL records in order. Blank lines are skipped; bad records are
/// reported, not fatal.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<(Dataset, LoadReport)> {
    let mut messages = Vec::new();
    let mut report = LoadReport::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_message(&line, line_no) {
            Ok(parsed) => {
                report.warnings.extend(parsed.warnings);
                messages.push(parsed.message);
            }
            Err(Error::Record { line, reason }) => {
                warn!("rejected corpus line {line}: {reason}");
                report.rejected.push(Rejection { line, reason });
            }
            Err(e) => return Err(e),
        }
    }
    report.accepted = messages.len();
    Ok((Dataset::new(messages, Provenance::default()), report))
}

pub fn write_corpus<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    for m in &ds.messages {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n").map_err(|e| Error::io("<corpus stream>", e))?;
    }
    Ok(())
}

pub fn save_corpus(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_lines_two_labels() {
        let src =
            "{\"text\":\"a\",\"label\":\"x\"}\n{\"text\":\"b\",\"label\":\"y\"}\n\n{\"text\":\"c\",\"label\":\"x\"}\n";
        let (ds, report) = read_corpus(src.as_bytes()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.label_set, vec!["x", "y"]);
        assert!(report.rejected.is_empty());
    }

    #[test]
    fn one_malformed_line_among_ten() {
        let mut src = String::new();
        for i in 0..10 {
            if i == 6 {
                src.push_str("{\"text\":\"broken\"\n");
            } else {
                src.push_str(&format!("{{\"text\":\"m{i}\",\"label\":\"l{}\"}}\n", i % 2));
            }
        }
        let (ds, report) = read_corpus(src.as_bytes()).unwrap();
        assert_eq!(ds.len(), 9);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].line, 7);
        assert_eq!(ds.messages[6].text, "m7");
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.jsonl");
        std::fs::write(&p, "\n{\"text\":\"x\"}\n").unwrap();
        assert!(matches!(load_corpus(&p), Err(Error::NoRecords { .. })));
        assert!(matches!(load_corpus(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
