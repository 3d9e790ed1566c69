//! Line-oriented trace files.
//!
//! ```text
//! # video_id observer_id source t_ms x y
//! clip01 p7 mouse 0 0.500000 0.500000
//! clip01 p7 mouse 20 0.512300 0.498100
//! ```
//!
//! Fields are separated by whitespace, coordinates are written with six
//! decimals and lines starting with `#` are comments. Consecutive samples of
//! one `(video, observer, source)` trace must not go back in time.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::{FixationTrace, Source, TimedPoint};

pub const HEADER: &str = "# video_id observer_id source t_ms x y";

type TraceKey = (String, String, Source);

/// Parses a trace file. Traces come back ordered by video, observer, then
/// source.
pub fn parse_traces(text: &str) -> Result<Vec<FixationTrace>> {
    let mut grouped: BTreeMap<TraceKey, Vec<TimedPoint>> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let source: Source = fields[2].parse().map_err(|e: Error| err(e.to_string()))?;
        let t_ms: u64 = fields[3].parse().map_err(|_| err(format!("bad timestamp `{}`", fields[3])))?;
        let coord = |s: &str, name: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(format!("bad {name} coordinate `{s}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("{name} = {v} outside [0, 1]")));
            }
            Ok(v)
        };
        let x = coord(fields[4], "x")?;
        let y = coord(fields[5], "y")?;

        let samples = grouped
            .entry((fields[0].to_string(), fields[1].to_string(), source))
            .or_default();
        if samples.last().is_some_and(|prev| prev.t_ms > t_ms) {
            return Err(err(format!(
                "timestamp {t_ms} precedes the previous sample of observer `{}` on `{}`",
                fields[1], fields[0]
            )));
        }
        samples.push(TimedPoint { t_ms, x, y });
    }
    grouped
        .into_iter()
        .map(|((video, observer, source), samples)| FixationTrace::new(observer, video, source, samples))
        .collect()
}

/// Serializes traces grouped by video, then observer.
pub fn write_traces<'a>(traces: impl IntoIterator<Item = &'a FixationTrace>) -> String {
    let mut sorted: Vec<&FixationTrace> = traces.into_iter().collect();
    sorted.sort_by(|a, b| {
        (&a.video_id, &a.observer_id, a.source).cmp(&(&b.video_id, &b.observer_id, b.source))
    });
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for t in sorted {
        for s in t.samples() {
            let _ = writeln!(out, "{} {} {} {} {:.6} {:.6}", t.video_id, t.observer_id, t.source, s.t_ms, s.x, s.y);
        }
    }
    out
}

/// Rounds a coordinate to the file's six-decimal granularity.
pub fn quantize_coordinate(v: f64) -> f64 {
    format!("{v:.6}").parse().expect("formatted float parses")
}

/// Ids become whitespace-separated fields, so they must be non-empty and
/// free of whitespace and a leading `#`.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('#') && !id.chars().any(char::is_whitespace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_groups() {
        let text = "# comment\nv1 a mouse 0 0.1 0.2\n\nv1 a mouse 20 0.3 0.4\nv0 b eye 5 1 0\n";
        let traces = parse_traces(text).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].video_id, "v0");
        assert_eq!(traces[0].source, Source::Eye);
        assert_eq!(traces[1].samples().len(), 2);
        assert_eq!(traces[1].samples()[1], TimedPoint { t_ms: 20, x: 0.3, y: 0.4 });
    }

    #[test]
    fn reports_line_numbers() {
        let mut text = String::from(HEADER);
        text.push('\n');
        for i in 0..15 {
            text.push_str(&format!("v o mouse {} 0.5 0.5\n", i * 10));
        }
        text.push_str("v o mouse 200 0.5\n");
        match parse_traces(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 17),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_traces("v o mouse 0 1.2 0.5"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_traces("v o pen 0 0.2 0.5"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            parse_traces("v o eye 10 0.2 0.5\nv o eye 5 0.2 0.5"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_file_has_no_traces() {
        assert!(parse_traces("").unwrap().is_empty());
        assert!(parse_traces(&write_traces([])).unwrap().is_empty());
    }

    #[test]
    fn ids() {
        assert!(valid_id("clip_01"));
        assert!(!valid_id("a b"));
        assert!(!valid_id(""));
        assert!(!valid_id("#x"));
    }
}
