//! Streaming ingestion of citation event logs.
//!
//! Both inputs are tab-separated, one record per line:
//! the manifest holds `item_id<TAB>publication_year`, the event log holds
//! `cited_id<TAB>citing_year`. Blank lines and lines starting with `#` are
//! ignored. Records that do not parse are skipped and counted.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use dlam_core::data::{check_year, CitationEvent, HistoryBuilder, IngestReport, PopularityHistory};

use crate::error::{Error, Result};

/// How many skipped lines are kept verbatim for the report.
const SAMPLE_LIMIT: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileReport {
    pub path: PathBuf,
    pub records: u64,
    pub skipped: u64,
    /// First few skipped lines as `(line number, reason)`.
    pub samples: Vec<(usize, String)>,
}

impl FileReport {
    fn skip(&mut self, line: usize, reason: String) {
        self.skipped += 1;
        if self.samples.len() < SAMPLE_LIMIT {
            self.samples.push((line, reason));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub histories: Vec<PopularityHistory>,
    pub report: IngestReport,
    pub manifest: FileReport,
    pub events: FileReport,
}

fn parse_record(line: &str) -> std::result::Result<(&str, i32), String> {
    let mut fields = line.split('\t');
    let (Some(id), Some(year), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err("expected 2 tab-separated fields".into());
    };
    let id = id.trim();
    if id.is_empty() {
        return Err("empty item id".into());
    }
    let year: i32 = year
        .trim()
        .parse()
        .map_err(|_| format!("invalid year `{}`", year.trim()))?;
    check_year(year).map_err(|e| e.to_string())?;
    Ok((id, year))
}

fn for_each_record<R: BufRead>(
    reader: R,
    path: &Path,
    mut f: impl FnMut(&str, i32),
) -> Result<FileReport> {
    let mut report = FileReport {
        path: path.to_path_buf(),
        ..FileReport::default()
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_record(line) {
            Ok((id, year)) => {
                report.records += 1;
                f(id, year);
            }
            Err(reason) => report.skip(i + 1, reason),
        }
    }
    Ok(report)
}

/// Aggregates readers already opened on a manifest and an event log.
pub fn ingest_readers<M: BufRead, E: BufRead>(
    manifest: M,
    manifest_path: &Path,
    events: E,
    events_path: &Path,
    last_year: Option<i32>,
) -> Result<Ingested> {
    let mut builder = HistoryBuilder::new();
    let manifest_report = for_each_record(manifest, manifest_path, |id, year| {
        builder.add_item(id, year).expect("year already checked");
    })?;
    let events_report = for_each_record(events, events_path, |id, year| {
        let ev = CitationEvent::new(id, year).expect("year already checked");
        builder.add_event(&ev);
    })?;
    let (histories, mut report) = builder.finish(last_year);
    report.malformed = manifest_report.skipped + events_report.skipped;
    Ok(Ingested {
        histories,
        report,
        manifest: manifest_report,
        events: events_report,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn ingest_files(manifest: &Path, events: &Path, last_year: Option<i32>) -> Result<Ingested> {
    ingest_readers(open(manifest)?, manifest, open(events)?, events, last_year)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(manifest: &str, events: &str) -> Ingested {
        ingest_readers(
            manifest.as_bytes(),
            Path::new("m"),
            events.as_bytes(),
            Path::new("e"),
            None,
        )
        .unwrap()
    }

    #[test]
    fn empty_input_gives_empty_cache() {
        let out = run("", "");
        assert!(out.histories.is_empty());
        assert_eq!(out.report, IngestReport::default());
    }

    #[test]
    fn bad_line_is_skipped_and_counted() {
        let out = run("a\t2000\nb\t2001\n", "a\t2001\nnonsense\na\t2002\nb\t1999\nz\t2002\n");
        assert_eq!(out.events.skipped, 1);
        assert_eq!(out.events.samples[0].0, 2);
        assert_eq!(out.report.malformed, 1);
        assert_eq!(out.report.accepted, 2);
        assert_eq!(out.report.before_publication, 1);
        assert_eq!(out.report.unknown_item, 1);
        assert_eq!(out.histories[0].yearly(), &[0, 1, 1]);
        assert_eq!(out.histories[1].yearly(), &[0, 0]);
    }

    #[test]
    fn out_of_range_years_are_malformed() {
        let out = run("a\t1066\nb\t2000\n", "b\t3000\nb\t2000\n");
        assert_eq!(out.manifest.skipped, 1);
        assert_eq!(out.events.skipped, 1);
        assert_eq!(out.histories.len(), 1);
    }

    #[test]
    fn comments_and_crlf_are_tolerated() {
        let out = run("# id\tyear\r\na\t2000\r\n", "a\t2000\r\n\r\n");
        assert_eq!(out.report.accepted, 1);
        assert_eq!(out.report.malformed, 0);
    }
}
