//! XML encoding of post-editing logs.
//!
//! ```xml
//! <pelog version="1">
//!   <segment id="s1">
//!     <event kind="focus" t="1000"/>
//!     <event kind="keystroke" t="1200" key="a" edit="insert"/>
//!     <event kind="keystroke" t="1300" key="Ctrl+V" edit="paste" chars="12"/>
//!     <event kind="mouse" t="1400" action="click"/>
//!     <event kind="confirm" t="9000"/>
//!   </segment>
//! </pelog>
//! ```
//!
//! Timestamps are UTC epoch milliseconds. Each maximal run of consecutive
//! events for one segment becomes one `<segment>` element, so interleaved
//! streams keep their order.

use adaptmt_core::pelog::{check_order, Edit, EventKind, LogEvent};
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};

pub const PELOG_VERSION: &str = "1";

fn xml_safe(s: &str) -> Result<()> {
    let bad = s.chars().find(|&c| {
        (c < ' ' && !matches!(c, '\t' | '\n' | '\r')) || c == '\u{FFFE}' || c == '\u{FFFF}'
    });
    match bad {
        Some(c) => Err(Error::Invalid(format!("character U+{:04X} cannot be stored in XML", c as u32))),
        None => Ok(()),
    }
}

/// Escapes markup characters plus the whitespace an XML parser would
/// otherwise normalize inside attribute values.
fn attr(s: &str) -> Result<String> {
    xml_safe(s)?;
    Ok(quick_xml::escape::escape(s)
        .replace('\t', "&#9;")
        .replace('\n', "&#10;")
        .replace('\r', "&#13;"))
}

fn edit_attrs(edit: Edit) -> String {
    match edit {
        Edit::Insert => r#" edit="insert""#.into(),
        Edit::Delete => r#" edit="delete""#.into(),
        Edit::Navigate => r#" edit="navigate""#.into(),
        Edit::Paste(n) => format!(r#" edit="paste" chars="{n}""#),
    }
}

/// Serializes an event stream; fails if any segment's timestamps decrease.
pub fn write_log(events: &[LogEvent]) -> Result<String> {
    check_order(events)?;
    if events.is_empty() {
        return Ok(format!("<pelog version=\"{PELOG_VERSION}\"/>\n"));
    }
    let mut out = format!("<pelog version=\"{PELOG_VERSION}\">\n");
    let mut open: Option<&str> = None;
    for e in events {
        if open != Some(e.segment_id.as_str()) {
            if open.is_some() {
                out.push_str("  </segment>\n");
            }
            out.push_str(&format!("  <segment id=\"{}\">\n", attr(&e.segment_id)?));
            open = Some(&e.segment_id);
        }
        out.push_str(&format!("    <event kind=\"{}\" t=\"{}\"", e.kind.name(), e.t_ms));
        match &e.kind {
            EventKind::Keystroke { key, edit } => {
                out.push_str(&format!(" key=\"{}\"{}", attr(key)?, edit_attrs(*edit)));
            }
            EventKind::Mouse { action } => out.push_str(&format!(" action=\"{}\"", attr(action)?)),
            EventKind::Focus | EventKind::Confirm => {}
        }
        out.push_str("/>\n");
    }
    out.push_str("  </segment>\n</pelog>\n");
    Ok(out)
}

/// Parsed events plus notes about content that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLog {
    pub events: Vec<LogEvent>,
    pub warnings: Vec<String>,
}

struct Parser<'a> {
    input: &'a str,
    reader: Reader<&'a [u8]>,
    warnings: Vec<String>,
}

impl<'a> Parser<'a> {
    fn line(&self) -> usize {
        let pos = (self.reader.buffer_position() as usize).min(self.input.len());
        self.input.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Xml {
            line: self.line(),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<Event<'a>> {
        match self.reader.read_event() {
            Ok(e) => Ok(e),
            Err(e) => {
                let pos = (self.reader.error_position() as usize).min(self.input.len());
                let line = self.input.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1;
                Err(Error::Xml {
                    line,
                    message: e.to_string(),
                })
            }
        }
    }

    fn attrs(&self, e: &BytesStart<'_>, known: &[&str]) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|x| self.err(x.to_string()))?;
            let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            let value = a.unescape_value().map_err(|x| self.err(x.to_string()))?;
            out.push((key, value.into_owned()));
        }
        Ok(out.into_iter().filter(|(k, _)| known.contains(&k.as_str()) || k.starts_with("xmlns")).collect())
    }

    fn warn_unknown_attrs(&mut self, e: &BytesStart<'_>, known: &[&str]) {
        for a in e.attributes().flatten() {
            let k = String::from_utf8_lossy(a.key.as_ref()).into_owned();
            if !known.contains(&k.as_str()) {
                let line = self.line();
                self.warnings.push(format!("line {line}: ignored attribute `{k}`"));
            }
        }
    }

    /// Skips an unknown element and everything inside it.
    fn skip(&mut self, e: &BytesStart<'_>, empty: bool) -> Result<()> {
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let line = self.line();
        self.warnings.push(format!("line {line}: ignored element <{name}>"));
        if !empty {
            let end = e.to_end().into_owned();
            self.reader
                .read_to_end(end.name())
                .map_err(|x| self.err(format!("inside <{name}>: {x}")))?;
        }
        Ok(())
    }

    fn event(&mut self, e: &BytesStart<'_>, segment: &str) -> Result<Option<LogEvent>> {
        const KNOWN: [&str; 6] = ["kind", "t", "key", "edit", "chars", "action"];
        self.warn_unknown_attrs(e, &KNOWN);
        let attrs = self.attrs(e, &KNOWN)?;
        let get = |k: &str| attrs.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
        let need = |k: &str| get(k).ok_or_else(|| self.err(format!("<event> lacks `{k}`")));
        let t_ms: u64 = need("t")?.parse().map_err(|_| self.err("`t` must be epoch milliseconds"))?;
        let kind = match need("kind")? {
            "focus" => EventKind::Focus,
            "confirm" => EventKind::Confirm,
            "mouse" => EventKind::Mouse {
                action: need("action")?.into(),
            },
            "keystroke" => {
                let edit = match need("edit")? {
                    "insert" => Edit::Insert,
                    "delete" => Edit::Delete,
                    "navigate" => Edit::Navigate,
                    "paste" => Edit::Paste(
                        need("chars")?
                            .parse()
                            .map_err(|_| self.err("`chars` must be a count"))?,
                    ),
                    other => return Err(self.err(format!("unknown edit `{other}`"))),
                };
                EventKind::Keystroke {
                    key: need("key")?.into(),
                    edit,
                }
            }
            other => {
                let line = self.line();
                self.warnings.push(format!("line {line}: ignored event kind `{other}`"));
                return Ok(None);
            }
        };
        Ok(Some(LogEvent {
            segment_id: segment.into(),
            t_ms,
            kind,
        }))
    }

    fn run(mut self) -> Result<ParsedLog> {
        let mut events = Vec::new();
        // Prolog: declarations, comments and whitespace before the root.
        let (root, empty_root) = loop {
            match self.next()? {
                Event::Start(e) => break (e, false),
                Event::Empty(e) => break (e, true),
                Event::Eof => return Err(self.err("no <pelog> element")),
                Event::Text(t) if !t.iter().all(u8::is_ascii_whitespace) => {
                    return Err(self.err("text before the root element"));
                }
                _ => {}
            }
        };
        if root.name().as_ref() != b"pelog" {
            return Err(self.err("root element must be <pelog>"));
        }
        self.warn_unknown_attrs(&root, &["version"]);
        let version = self
            .attrs(&root, &["version"])?
            .into_iter()
            .next()
            .map(|(_, v)| v)
            .ok_or_else(|| self.err("<pelog> lacks `version`"))?;
        if version != PELOG_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if !empty_root {
            let mut segment: Option<String> = None;
            loop {
                let (e, empty) = match self.next()? {
                    Event::Start(e) => (e, false),
                    Event::Empty(e) => (e, true),
                    Event::End(e) => match e.name().as_ref() {
                        b"segment" if segment.is_some() => {
                            segment = None;
                            continue;
                        }
                        b"pelog" if segment.is_none() => break,
                        other => {
                            return Err(self.err(format!("unexpected </{}>", String::from_utf8_lossy(other))));
                        }
                    },
                    Event::Text(t) => {
                        if !t.iter().all(u8::is_ascii_whitespace) {
                            let line = self.line();
                            self.warnings.push(format!("line {line}: ignored text"));
                        }
                        continue;
                    }
                    Event::Eof => return Err(self.err("unexpected end of file (truncated log)")),
                    _ => continue,
                };
                match (e.name().as_ref(), &segment) {
                    (b"segment", None) => {
                        self.warn_unknown_attrs(&e, &["id"]);
                        let id = self
                            .attrs(&e, &["id"])?
                            .into_iter()
                            .next()
                            .map(|(_, v)| v)
                            .ok_or_else(|| self.err("<segment> lacks `id`"))?;
                        // An empty-element segment holds no events.
                        if !empty {
                            segment = Some(id);
                        }
                    }
                    (b"event", Some(seg)) => {
                        let seg = seg.clone();
                        if let Some(ev) = self.event(&e, &seg)? {
                            events.push(ev);
                        }
                        if !empty {
                            let end = e.to_end().into_owned();
                            self.reader.read_to_end(end.name()).map_err(|x| self.err(x.to_string()))?;
                        }
                    }
                    _ => self.skip(&e, empty)?,
                }
            }
        }
        loop {
            match self.next()? {
                Event::Eof => break,
                Event::Text(t) if t.iter().all(u8::is_ascii_whitespace) => {}
                Event::Comment(_) | Event::PI(_) => {}
                _ => return Err(self.err("content after the root element")),
            }
        }
        check_order(&events)?;
        Ok(ParsedLog {
            events,
            warnings: self.warnings,
        })
    }
}

/// Parses a pelog document. Unknown elements, attributes and event kinds
/// are skipped and reported in [`ParsedLog::warnings`].
pub fn parse_log(xml: &str) -> Result<ParsedLog> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().check_end_names = true;
    Parser {
        input: xml,
        reader,
        warnings: Vec::new(),
    }
    .run()
}
