//! Post-editing effort logs: keystroke, mouse, focus and confirm events per
//! segment, and the effort figures aggregated from them. The XML encoding
//! lives in the `adaptmt` crate.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// What a keystroke did to the target text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Insert,
    Delete,
    /// Pasted `n` characters in one operation.
    Paste(usize),
    /// Cursor movement or other key without a text change.
    Navigate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Focus,
    Keystroke { key: String, edit: Edit },
    Mouse { action: String },
    Confirm,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Focus => "focus",
            EventKind::Keystroke { .. } => "keystroke",
            EventKind::Mouse { .. } => "mouse",
            EventKind::Confirm => "confirm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub segment_id: String,
    /// UTC epoch milliseconds.
    pub t_ms: u64,
    pub kind: EventKind,
}

impl LogEvent {
    pub fn new(segment_id: &str, t_ms: u64, kind: EventKind) -> Self {
        LogEvent {
            segment_id: segment_id.into(),
            t_ms,
            kind,
        }
    }
}

/// Checks that timestamps never decrease within any one segment.
pub fn check_order(events: &[LogEvent]) -> Result<()> {
    let mut last: BTreeMap<&str, u64> = BTreeMap::new();
    for e in events {
        let prev = last.entry(e.segment_id.as_str()).or_insert(e.t_ms);
        if e.t_ms < *prev {
            return Err(Error::OutOfOrder(e.segment_id.clone()));
        }
        *prev = e.t_ms;
    }
    Ok(())
}

/// Final state of a segment, as needed for effort ratios.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentText {
    pub id: String,
    pub source: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentEffort {
    pub segment_id: String,
    pub keystroke_count: u64,
    pub mouse_count: u64,
    /// Confirm time minus first focus time.
    pub editing_ms: u64,
    /// False when the focus or confirm event is missing (or the confirm
    /// precedes the focus); `editing_ms` is then 0.
    pub timing_complete: bool,
    pub source_char_count: u64,
    pub final_target_char_count: u64,
}

impl SegmentEffort {
    pub fn editing_seconds(&self) -> f64 {
        self.editing_ms as f64 / 1000.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EffortTotals {
    pub keystroke_count: u64,
    pub mouse_count: u64,
    pub editing_ms: u64,
    pub source_char_count: u64,
    pub final_target_char_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffortReport {
    pub segments: Vec<SegmentEffort>,
    pub totals: EffortTotals,
}

impl EffortReport {
    pub fn mean_seconds_per_segment(&self) -> f64 {
        if self.segments.is_empty() {
            0.0
        } else {
            self.totals.editing_ms as f64 / 1000.0 / self.segments.len() as f64
        }
    }

    pub fn keystrokes_per_target_char(&self) -> f64 {
        if self.totals.final_target_char_count == 0 {
            0.0
        } else {
            self.totals.keystroke_count as f64 / self.totals.final_target_char_count as f64
        }
    }

    /// Tab-separated table: header, one row per segment, a totals row.
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("segment\tkeystrokes\tmouse\tediting_s\ttiming\tsource_chars\ttarget_chars\n");
        for s in &self.segments {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.3}\t{}\t{}\t{}\n",
                s.segment_id,
                s.keystroke_count,
                s.mouse_count,
                s.editing_seconds(),
                if s.timing_complete { "ok" } else { "incomplete" },
                s.source_char_count,
                s.final_target_char_count
            ));
        }
        let t = &self.totals;
        out.push_str(&format!(
            "total\t{}\t{}\t{:.3}\t-\t{}\t{}\n",
            t.keystroke_count,
            t.mouse_count,
            t.editing_ms as f64 / 1000.0,
            t.source_char_count,
            t.final_target_char_count
        ));
        out.push_str(&format!(
            "# mean_s_per_segment={:.3} keystrokes_per_target_char={:.3}\n",
            self.mean_seconds_per_segment(),
            self.keystrokes_per_target_char()
        ));
        out
    }
}

/// Aggregates per-segment effort, in the order of `segments`.
pub fn compute_effort(events: &[LogEvent], segments: &[SegmentText]) -> Result<EffortReport> {
    let index: BTreeMap<&str, usize> = segments.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut rows: Vec<SegmentEffort> = segments
        .iter()
        .map(|s| SegmentEffort {
            segment_id: s.id.clone(),
            keystroke_count: 0,
            mouse_count: 0,
            editing_ms: 0,
            timing_complete: false,
            source_char_count: s.source.chars().count() as u64,
            final_target_char_count: s.target.chars().count() as u64,
        })
        .collect();
    let mut first_focus: Vec<Option<u64>> = alloc::vec![None; segments.len()];
    let mut confirm: Vec<Option<u64>> = alloc::vec![None; segments.len()];
    for e in events {
        let &i = index
            .get(e.segment_id.as_str())
            .ok_or_else(|| Error::UnknownSegment(e.segment_id.clone()))?;
        match e.kind {
            EventKind::Focus => {
                first_focus[i].get_or_insert(e.t_ms);
            }
            EventKind::Keystroke { .. } => rows[i].keystroke_count += 1,
            EventKind::Mouse { .. } => rows[i].mouse_count += 1,
            EventKind::Confirm => confirm[i] = Some(e.t_ms),
        }
    }
    let mut totals = EffortTotals::default();
    for (i, row) in rows.iter_mut().enumerate() {
        if let (Some(f), Some(c)) = (first_focus[i], confirm[i]) {
            if c >= f {
                row.editing_ms = c - f;
                row.timing_complete = true;
            }
        }
        totals.keystroke_count += row.keystroke_count;
        totals.mouse_count += row.mouse_count;
        totals.editing_ms += row.editing_ms;
        totals.source_char_count += row.source_char_count;
        totals.final_target_char_count += row.final_target_char_count;
    }
    Ok(EffortReport { segments: rows, totals })
}
