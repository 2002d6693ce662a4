//! CSV import and export for traces.
//!
//! Two files describe a trace:
//!
//! - events:  header `dataset_id,week,count`
//! - metas:   header `dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas`
//!
//! Both are UTF-8 with LF line endings. Lines starting with `#` are
//! comments; the exporter writes one carrying `horizon=<N>` (plus whatever
//! extra annotation the caller supplies) so a round trip preserves the
//! horizon even when the last weeks are quiet. Imports without such a
//! comment fall back to `max event week + 1`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{AccessEvent, DatasetMeta, Trace, TraceError};

/// Reads and validates a trace from an events CSV and a metas CSV.
pub fn import_trace(events_path: &Path, metas_path: &Path) -> Result<Trace, TraceError> {
    let events_text = fs::read_to_string(events_path)?;
    let metas_text = fs::read_to_string(metas_path)?;
    let (events, horizon_comment) = parse_events(&events_text, events_path)?;
    let metas = parse_metas(&metas_text, metas_path)?;
    let horizon = horizon_comment.unwrap_or_else(|| {
        events.iter().map(|e| e.week + 1).max().unwrap_or(0).max(
            metas.iter().map(|m| m.creation_week + 1).max().unwrap_or(0),
        )
    });
    Trace::new(events, metas, horizon)
}

/// Writes `events.csv` and `metas.csv` for a trace.
///
/// Each file starts with a comment line `# horizon=<N>` to which `extra`
/// (e.g. a config digest and seed) is appended verbatim.
pub fn export_trace(
    trace: &Trace,
    events_path: &Path,
    metas_path: &Path,
    extra: Option<&str>,
) -> Result<(), TraceError> {
    let comment = match extra {
        Some(s) => format!("# horizon={} {}\n", trace.horizon_weeks(), s),
        None => format!("# horizon={}\n", trace.horizon_weeks()),
    };

    let mut out = String::new();
    out.push_str(&comment);
    out.push_str("dataset_id,week,count\n");
    for e in trace.events() {
        out.push_str(&format!("{},{},{}\n", e.dataset_id, e.week, e.count));
    }
    write_atomic(events_path, &out)?;

    let mut out = String::new();
    out.push_str(&comment);
    out.push_str("dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\n");
    for m in trace.metas() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.dataset_id, m.creation_week, m.dtype, m.extension, m.size_bytes, m.initial_replicas
        ));
    }
    write_atomic(metas_path, &out)?;
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Scans leading comment lines for a `horizon=<N>` token.
fn comment_horizon(text: &str) -> Option<u32> {
    for line in text.lines() {
        if !line.starts_with('#') {
            break;
        }
        for token in line.trim_start_matches('#').split_whitespace() {
            if let Some(v) = token.strip_prefix("horizon=") {
                return v.parse().ok();
            }
        }
    }
    None
}

fn parse_events(text: &str, path: &Path) -> Result<(Vec<AccessEvent>, Option<u32>), TraceError> {
    let horizon = comment_horizon(text);
    let mut reader = csv_reader(text);
    check_header(&mut reader, path, &["dataset_id", "week", "count"])?;
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fail = |msg: String| TraceError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if record.len() != 3 {
            return Err(fail(format!("expected 3 fields, got {}", record.len())));
        }
        let week: u32 = record[1]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad week {:?}: {e}", &record[1])))?;
        let count: u64 = record[2]
            .trim()
            .parse()
            .map_err(|e| fail(format!("bad count {:?}: {e}", &record[2])))?;
        events.push(AccessEvent {
            dataset_id: record[0].trim().to_string(),
            week,
            count,
        });
    }
    Ok((events, horizon))
}

fn parse_metas(text: &str, path: &Path) -> Result<Vec<DatasetMeta>, TraceError> {
    let mut reader = csv_reader(text);
    check_header(
        &mut reader,
        path,
        &["dataset_id", "creation_week", "dtype", "extension", "size_bytes", "initial_replicas"],
    )?;
    let mut metas = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fail = |msg: String| TraceError::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        if record.len() != 6 {
            return Err(fail(format!("expected 6 fields, got {}", record.len())));
        }
        let num = |i: usize, name: &str| -> Result<u64, TraceError> {
            record[i]
                .trim()
                .parse()
                .map_err(|e| fail(format!("bad {name} {:?}: {e}", &record[i])))
        };
        metas.push(DatasetMeta {
            dataset_id: record[0].trim().to_string(),
            creation_week: num(1, "creation_week")? as u32,
            dtype: num(2, "dtype")? as u32,
            extension: num(3, "extension")? as u32,
            size_bytes: num(4, "size_bytes")?,
            initial_replicas: num(5, "initial_replicas")? as u32,
        });
    }
    Ok(metas)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(
    reader: &mut csv::Reader<&[u8]>,
    path: &Path,
    expected: &[&str],
) -> Result<(), TraceError> {
    let headers = reader.headers().map_err(|e| csv_error(path, &e))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(TraceError::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("bad header {:?}, expected {:?}", got.join(","), expected.join(",")),
        });
    }
    Ok(())
}

fn csv_error(path: &Path, e: &csv::Error) -> TraceError {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    TraceError::Parse {
        path: path.display().to_string(),
        line,
        msg: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn imports_and_merges() {
        let dir = tempfile::tempdir().unwrap();
        let events = write(
            dir.path(),
            "events.csv",
            "dataset_id,week,count\nd1,3,2\nd1,3,1\nd2,0,4\n",
        );
        let metas = write(
            dir.path(),
            "metas.csv",
            "dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\n\
             d1,0,0,1,100,2\nd2,0,1,0,50,1\n",
        );
        let t = import_trace(&events, &metas).unwrap();
        assert_eq!(t.metas().len(), 2);
        assert_eq!(t.events().len(), 2);
        assert_eq!(t.events_for("d1")[0].count, 3);
        // No horizon comment: inferred as max week + 1.
        assert_eq!(t.horizon_weeks(), 4);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let events = write(dir.path(), "events.csv", "dataset_id,week,count\nd1,notaweek,2\n");
        let metas = write(
            dir.path(),
            "metas.csv",
            "dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\nd1,0,0,0,10,1\n",
        );
        let err = import_trace(&events, &metas).unwrap_err();
        match err {
            TraceError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn referential_error_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        let events = write(dir.path(), "events.csv", "dataset_id,week,count\nmissing,1,1\n");
        let metas = write(
            dir.path(),
            "metas.csv",
            "dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\nd1,0,0,0,10,1\n",
        );
        assert!(matches!(
            import_trace(&events, &metas).unwrap_err(),
            TraceError::UnknownDataset(_)
        ));
    }

    #[test]
    fn export_import_round_trip_preserves_horizon() {
        let t = Trace::new(
            vec![AccessEvent { dataset_id: "a".into(), week: 2, count: 7 }],
            vec![DatasetMeta {
                dataset_id: "a".into(),
                creation_week: 0,
                dtype: 1,
                extension: 2,
                size_bytes: 10,
                initial_replicas: 3,
            }],
            30,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ev = dir.path().join("events.csv");
        let me = dir.path().join("metas.csv");
        export_trace(&t, &ev, &me, Some("digest=abc seed=1")).unwrap();
        let back = import_trace(&ev, &me).unwrap();
        assert_eq!(t, back);
        assert_eq!(back.horizon_weeks(), 30);
    }

    #[test]
    fn rejects_wrong_header() {
        let dir = tempfile::tempdir().unwrap();
        let events = write(dir.path(), "events.csv", "id,week,count\n");
        let metas = write(
            dir.path(),
            "metas.csv",
            "dataset_id,creation_week,dtype,extension,size_bytes,initial_replicas\n",
        );
        assert!(matches!(
            import_trace(&events, &metas).unwrap_err(),
            TraceError::Parse { line: 1, .. }
        ));
    }
}
