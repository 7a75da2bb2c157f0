//! XES event-log parsing.
//!
//! Reads the subset of XES (IEEE 1849) that workflow engines emit for
//! execution traces: `log`, `trace` and `event` elements with `string`
//! and `date` attributes. `concept:name` names traces and events;
//! `time:timestamp` carries an RFC 3339 instant converted to epoch
//! seconds. All other attributes are preserved verbatim in document
//! order, which is how the `ph:*` provenance annotations travel.

use indexmap::IndexMap;

use quick_xml::events::Event as XmlEvent;
use quick_xml::Reader;
use thiserror::Error;

use super::LogEvent;

#[derive(Debug, Error)]
pub enum XesError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("event #{0} has no concept:name")]
    MissingConceptName(usize),
    #[error("event #{0} has no time:timestamp")]
    MissingTimestamp(usize),
    #[error("event #{index}: bad time:timestamp {value:?}: {detail}")]
    BadTimestamp {
        index: usize,
        value: String,
        detail: String,
    },
}

/// One parsed trace: its id (the trace's `concept:name`, empty when
/// absent), trace-level attributes, and events in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub trace_id: String,
    pub attributes: IndexMap<String, String>,
    pub events: Vec<LogEvent>,
}

fn attr_of(
    element: &quick_xml::events::BytesStart<'_>,
    name: &str,
) -> Result<Option<String>, XesError> {
    for attr in element.attributes() {
        let attr = attr.map_err(|e| XesError::MalformedXml(e.to_string()))?;
        if attr.key.as_ref() == name.as_bytes() {
            let value = attr
                .unescape_value()
                .map_err(|e| XesError::MalformedXml(e.to_string()))?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn parse_rfc3339(value: &str, index: usize) -> Result<u64, XesError> {
    let parsed = chrono::DateTime::parse_from_rfc3339(value).map_err(|e| XesError::BadTimestamp {
        index,
        value: value.to_string(),
        detail: e.to_string(),
    })?;
    u64::try_from(parsed.timestamp()).map_err(|_| XesError::BadTimestamp {
        index,
        value: value.to_string(),
        detail: "pre-epoch timestamps are not representable".into(),
    })
}

/// Parse an XES document into traces with their events.
///
/// Every `event` must carry `concept:name` and `time:timestamp`.
/// Unknown attributes are preserved. Events outside any trace are
/// rejected as malformed.
pub fn parse_xes(document: &[u8]) -> Result<Vec<Trace>, XesError> {
    let mut reader = Reader::from_reader(document);
    reader.config_mut().trim_text(true);

    let mut traces: Vec<Trace> = Vec::new();
    let mut current_trace: Option<Trace> = None;
    let mut current_event: Option<IndexMap<String, String>> = None;
    let mut event_index = 0usize;
    let mut saw_log = false;
    let mut buf = Vec::new();

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| XesError::MalformedXml(format!("{e} at byte {}", reader.buffer_position())))?;
        match event {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let is_empty = matches!(event, XmlEvent::Empty(_));
                match e.name().as_ref() {
                    b"log" => {
                        saw_log = true;
                    }
                    b"trace" => {
                        if !saw_log {
                            return Err(XesError::MalformedXml("trace outside of a log".into()));
                        }
                        if current_trace.is_some() {
                            return Err(XesError::MalformedXml("nested trace".into()));
                        }
                        let trace = Trace {
                            trace_id: String::new(),
                            attributes: IndexMap::new(),
                            events: Vec::new(),
                        };
                        if is_empty {
                            traces.push(trace);
                        } else {
                            current_trace = Some(trace);
                        }
                    }
                    b"event" => {
                        if current_trace.is_none() {
                            return Err(XesError::MalformedXml(
                                "event outside of a trace".into(),
                            ));
                        }
                        if is_empty {
                            // An empty event can never carry concept:name.
                            return Err(XesError::MissingConceptName(event_index));
                        }
                        current_event = Some(IndexMap::new());
                    }
                    b"string" | b"date" | b"int" | b"float" | b"boolean" | b"id" => {
                        let key = attr_of(e, "key")?.unwrap_or_default();
                        let value = attr_of(e, "value")?.unwrap_or_default();
                        if let Some(attrs) = current_event.as_mut() {
                            attrs.insert(key, value);
                        } else if let Some(trace) = current_trace.as_mut() {
                            trace.attributes.insert(key, value);
                        }
                        // Log-level attributes (extensions, globals) are
                        // irrelevant here and skipped.
                        if !is_empty {
                            let mut depth = 1;
                            let mut skip_buf = Vec::new();
                            while depth > 0 {
                                match reader.read_event_into(&mut skip_buf).map_err(|e| {
                                    XesError::MalformedXml(e.to_string())
                                })? {
                                    XmlEvent::Start(_) => depth += 1,
                                    XmlEvent::End(_) => depth -= 1,
                                    XmlEvent::Eof => {
                                        return Err(XesError::MalformedXml(
                                            "unexpected EOF in attribute".into(),
                                        ))
                                    }
                                    _ => {}
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(ref e) => match e.name().as_ref() {
                b"event" => {
                    let attrs = current_event.take().ok_or_else(|| {
                        XesError::MalformedXml("stray </event>".into())
                    })?;
                    let trace = current_trace.as_mut().expect("event inside trace");
                    let concept_name = attrs
                        .get("concept:name")
                        .cloned()
                        .ok_or(XesError::MissingConceptName(event_index))?;
                    let time_raw = attrs
                        .get("time:timestamp")
                        .cloned()
                        .ok_or(XesError::MissingTimestamp(event_index))?;
                    let time = parse_rfc3339(&time_raw, event_index)?;
                    trace.events.push(LogEvent {
                        trace_id: trace.trace_id.clone(),
                        concept_name,
                        time,
                        attributes: attrs,
                    });
                    event_index += 1;
                }
                b"trace" => {
                    let mut trace = current_trace.take().ok_or_else(|| {
                        XesError::MalformedXml("stray </trace>".into())
                    })?;
                    trace.trace_id = trace
                        .attributes
                        .get("concept:name")
                        .cloned()
                        .unwrap_or_default();
                    for event in &mut trace.events {
                        event.trace_id = trace.trace_id.clone();
                    }
                    traces.push(trace);
                }
                _ => {}
            },
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if !saw_log {
        return Err(XesError::MalformedXml("no <log> element".into()));
    }
    if current_trace.is_some() || current_event.is_some() {
        return Err(XesError::MalformedXml("unclosed trace or event".into()));
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TRACES: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="case-1"/>
    <string key="ph:choreography" value="chor-1"/>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2023-11-14T22:13:20Z"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2023-11-14T22:13:21Z"/>
      <string key="custom" value="kept"/>
    </event>
    <event>
      <string key="concept:name" value="C"/>
      <date key="time:timestamp" value="2023-11-14T22:13:22Z"/>
    </event>
  </trace>
  <trace>
    <string key="concept:name" value="case-2"/>
    <event>
      <string key="concept:name" value="A"/>
      <date key="time:timestamp" value="2023-11-14T22:14:00Z"/>
    </event>
    <event>
      <string key="concept:name" value="B"/>
      <date key="time:timestamp" value="2023-11-14T22:14:01Z"/>
    </event>
    <event>
      <string key="concept:name" value="C"/>
      <date key="time:timestamp" value="2023-11-14T22:14:02Z"/>
    </event>
  </trace>
</log>"#;

    #[test]
    fn parses_traces_and_events_in_order() {
        let traces = parse_xes(TWO_TRACES.as_bytes()).unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].trace_id, "case-1");
        assert_eq!(traces[0].events.len(), 3);
        assert_eq!(traces[1].events.len(), 3);
        assert_eq!(traces[0].events[0].concept_name, "A");
        assert_eq!(traces[0].events[0].time, 1_700_000_000);
        assert_eq!(traces[0].attributes.get("ph:choreography").unwrap(), "chor-1");
        // Unknown attributes preserved.
        assert_eq!(traces[0].events[1].attributes.get("custom").unwrap(), "kept");
    }

    #[test]
    fn empty_log_is_empty_list() {
        let traces = parse_xes(b"<log/>").unwrap();
        assert!(traces.is_empty());
    }

    #[test]
    fn missing_concept_name_is_reported() {
        let doc = r#"<log><trace><event>
            <date key="time:timestamp" value="2023-11-14T22:13:20Z"/>
        </event></trace></log>"#;
        assert!(matches!(
            parse_xes(doc.as_bytes()),
            Err(XesError::MissingConceptName(0))
        ));
    }

    #[test]
    fn missing_timestamp_is_reported() {
        let doc = r#"<log><trace><event>
            <string key="concept:name" value="A"/>
        </event></trace></log>"#;
        assert!(matches!(
            parse_xes(doc.as_bytes()),
            Err(XesError::MissingTimestamp(0))
        ));
    }

    #[test]
    fn malformed_xml_is_rejected() {
        assert!(matches!(
            parse_xes(b"<log><trace></log>"),
            Err(XesError::MalformedXml(_))
        ));
        assert!(matches!(
            parse_xes(b"<trace><event/></trace>"),
            Err(XesError::MalformedXml(_))
        ));
    }

    #[test]
    fn bad_timestamp_is_reported() {
        let doc = r#"<log><trace><event>
            <string key="concept:name" value="A"/>
            <date key="time:timestamp" value="yesterday"/>
        </event></trace></log>"#;
        assert!(matches!(
            parse_xes(doc.as_bytes()),
            Err(XesError::BadTimestamp { .. })
        ));
    }
}
