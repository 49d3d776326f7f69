//! Text format for scenario-grid descriptions: flat `key = value` lines
//! under `[dataset]`, one `[class]` section per classification target, and
//! an optional `[partial_subject]` section. `#` starts a comment. Every
//! parse error carries the offending line number.

use jcas_core::csi::{MotionClass, Orientation, USABLE_TX_BEAMS};
use jcas_core::preprocess::{ClassSpec, DatasetKind, DatasetSpec, PartialSubject};

use crate::error::CliError;

pub fn kind_name(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::Dataset1 => "1",
        DatasetKind::Dataset2V1 => "2v1",
        DatasetKind::Dataset2V2 => "2v2",
        DatasetKind::Dataset2V3 => "2v3",
    }
}

pub fn parse_kind(s: &str) -> Option<DatasetKind> {
    match s {
        "1" => Some(DatasetKind::Dataset1),
        "2v1" => Some(DatasetKind::Dataset2V1),
        "2v2" => Some(DatasetKind::Dataset2V2),
        "2v3" => Some(DatasetKind::Dataset2V3),
        _ => None,
    }
}

fn orientation_name(o: Option<Orientation>) -> &'static str {
    match o {
        Some(Orientation::Frontal) => "frontal",
        Some(Orientation::Orthogonal) => "orthogonal",
        None => "any",
    }
}

/// Canonical text for a grid description; `parse_spec` inverts it.
pub fn spec_text(spec: &DatasetSpec) -> String {
    let mut out = String::new();
    let list = |xs: &[usize]| {
        xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
    };
    out.push_str("[dataset]\n");
    out.push_str(&format!("kind = {}\n", kind_name(spec.which)));
    out.push_str(&format!("unstack = {}\n", spec.unstack));
    out.push_str(&format!("reported_fs = {}\n", spec.reported_fs));
    out.push_str(&format!("fs_collect = {}\n", spec.fs_collect));
    out.push_str(&format!("duration = {}\n", spec.duration));
    out.push_str(&format!("squat_motions = {}..{}\n", spec.squat_motions.0, spec.squat_motions.1));
    match spec.snr_threshold {
        Some(db) => out.push_str(&format!("snr_threshold_db = {db}\n")),
        None => out.push_str("snr_threshold_db = off\n"),
    }
    out.push_str(&format!("beam_clutter = {}\n", spec.beam_clutter));
    out.push_str(&format!("tx_beams = {}\n", list(&spec.tx_beams)));
    let subjects: Vec<usize> = spec.subjects.iter().map(|&s| s as usize).collect();
    out.push_str(&format!("subjects = {}\n", list(&subjects)));
    for c in &spec.classes {
        out.push_str("\n[class]\n");
        out.push_str(&format!("motion = {}\n", c.class.as_str()));
        out.push_str(&format!("orientation = {}\n", orientation_name(c.orientation)));
        out.push_str(&format!("reps = {}\n", c.reps));
    }
    if let Some(p) = &spec.partial_subject {
        out.push_str("\n[partial_subject]\n");
        out.push_str(&format!("subject = {}\n", p.subject_id));
        out.push_str(&format!("tx_beam = {}\n", p.tx_beam));
        out.push_str(&format!("orientation = {}\n", orientation_name(Some(p.orientation))));
        let classes: Vec<String> =
            p.classes.iter().map(|(c, r)| format!("{}:{r}", c.as_str())).collect();
        out.push_str(&format!("classes = {}\n", classes.join(" ")));
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> CliError {
    CliError::SpecLine { line, msg: msg.into() }
}

/// `(line, key, value)` triples of one section.
type Section = Vec<(usize, String, String)>;

struct Sections {
    dataset: Option<(usize, Section)>,
    classes: Vec<(usize, Section)>,
    partial: Option<(usize, Section)>,
}

fn split_sections(text: &str) -> Result<Sections, CliError> {
    let mut out = Sections { dataset: None, classes: Vec::new(), partial: None };
    let mut current: Option<(&str, usize, Section)> = None;
    let close = |cur: Option<(&str, usize, Section)>, out: &mut Sections| match cur {
        Some(("dataset", line, s)) => out.dataset = Some((line, s)),
        Some(("class", line, s)) => out.classes.push((line, s)),
        Some(("partial_subject", line, s)) => out.partial = Some((line, s)),
        Some(_) | None => {}
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| err(line_no, "unclosed section header"))?;
            let name = match name {
                "dataset" | "class" | "partial_subject" => name,
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            if name == "dataset" && out.dataset.is_some() {
                return Err(err(line_no, "duplicate [dataset] section"));
            }
            if name == "partial_subject" && out.partial.is_some() {
                return Err(err(line_no, "duplicate [partial_subject] section"));
            }
            let prev = current.take();
            close(prev, &mut out);
            current = Some((match name {
                "dataset" => "dataset",
                "class" => "class",
                _ => "partial_subject",
            }, line_no, Vec::new()));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, "expected `key = value`"))?;
        let section = current
            .as_mut()
            .ok_or_else(|| err(line_no, "key outside any section"))?;
        section.2.push((line_no, key.trim().to_string(), value.trim().to_string()));
    }
    close(current, &mut out);
    Ok(out)
}

/// One section's keys with required-lookup and leftover detection.
struct Keys {
    header_line: usize,
    name: &'static str,
    entries: Section,
    used: Vec<bool>,
}

impl Keys {
    fn new(name: &'static str, header_line: usize, entries: Section) -> Result<Self, CliError> {
        for (i, (line, key, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(_, k, _)| k == key) {
                return Err(err(*line, format!("duplicate key `{key}`")));
            }
        }
        let used = vec![false; entries.len()];
        Ok(Keys { header_line, name, entries, used })
    }

    fn require(&mut self, key: &str) -> Result<(usize, String), CliError> {
        for (i, (line, k, v)) in self.entries.iter().enumerate() {
            if k == key {
                self.used[i] = true;
                return Ok((*line, v.clone()));
            }
        }
        Err(err(self.header_line, format!("[{}] is missing key `{key}`", self.name)))
    }

    fn finish(self) -> Result<(), CliError> {
        for (i, (line, key, _)) in self.entries.iter().enumerate() {
            if !self.used[i] {
                return Err(err(*line, format!("unknown key `{key}` in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| err(line, format!("bad {key} value `{v}`")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(err(line, format!("{key} must be true or false, got `{v}`"))),
    }
}

fn parse_orientation(line: usize, v: &str) -> Result<Option<Orientation>, CliError> {
    match v {
        "frontal" => Ok(Some(Orientation::Frontal)),
        "orthogonal" => Ok(Some(Orientation::Orthogonal)),
        "any" => Ok(None),
        _ => Err(err(line, format!("orientation must be frontal, orthogonal, or any, got `{v}`"))),
    }
}

fn parse_motion(line: usize, v: &str) -> Result<MotionClass, CliError> {
    MotionClass::parse(v).ok_or_else(|| err(line, format!("unknown motion class `{v}`")))
}

fn check_beam(line: usize, beam: usize) -> Result<usize, CliError> {
    if USABLE_TX_BEAMS.contains(&beam) {
        Ok(beam)
    } else {
        Err(err(
            line,
            format!(
                "tx beam {beam} outside usable range {}-{}",
                USABLE_TX_BEAMS.start(),
                USABLE_TX_BEAMS.end()
            ),
        ))
    }
}

pub fn parse_spec(text: &str) -> Result<DatasetSpec, CliError> {
    let sections = split_sections(text)?;
    let (ds_line, ds_entries) =
        sections.dataset.ok_or_else(|| err(1, "missing [dataset] section"))?;
    let mut ds = Keys::new("dataset", ds_line, ds_entries)?;

    let (line, v) = ds.require("kind")?;
    let which = parse_kind(&v).ok_or_else(|| {
        err(line, format!("kind must be one of 1, 2v1, 2v2, 2v3, got `{v}`"))
    })?;
    let (line, v) = ds.require("unstack")?;
    let unstack = parse_bool(line, "unstack", &v)?;
    let (line, v) = ds.require("reported_fs")?;
    let reported_fs: f64 = parse_num(line, "reported_fs", &v)?;
    let (line, v) = ds.require("fs_collect")?;
    let fs_collect: f64 = parse_num(line, "fs_collect", &v)?;
    let (line, v) = ds.require("duration")?;
    let duration: f64 = parse_num(line, "duration", &v)?;
    let (line, v) = ds.require("squat_motions")?;
    let squat_motions = match v.split_once("..") {
        Some((lo, hi)) => (
            parse_num::<u32>(line, "squat_motions", lo)?,
            parse_num::<u32>(line, "squat_motions", hi)?,
        ),
        None => {
            let n: u32 = parse_num(line, "squat_motions", &v)?;
            (n, n)
        }
    };
    if squat_motions.0 > squat_motions.1 {
        return Err(err(line, format!("empty squat_motions range {}..{}", squat_motions.0, squat_motions.1)));
    }
    let (line, v) = ds.require("snr_threshold_db")?;
    let snr_threshold = if v == "off" {
        None
    } else {
        Some(parse_num::<f64>(line, "snr_threshold_db", &v)?)
    };
    let (line, v) = ds.require("beam_clutter")?;
    let beam_clutter = parse_bool(line, "beam_clutter", &v)?;
    let (line, v) = ds.require("tx_beams")?;
    let mut tx_beams = Vec::new();
    for tok in v.split_whitespace() {
        tx_beams.push(check_beam(line, parse_num(line, "tx_beams", tok)?)?);
    }
    if tx_beams.is_empty() {
        return Err(err(line, "tx_beams lists no beams"));
    }
    let (line, v) = ds.require("subjects")?;
    let mut subjects = Vec::new();
    for tok in v.split_whitespace() {
        subjects.push(parse_num::<u32>(line, "subjects", tok)?);
    }
    if subjects.is_empty() {
        return Err(err(line, "subjects lists no participants"));
    }
    ds.finish()?;

    if sections.classes.is_empty() {
        return Err(err(ds_line, "spec declares no [class] sections"));
    }
    let mut classes = Vec::new();
    for (header, entries) in sections.classes {
        let mut sec = Keys::new("class", header, entries)?;
        let (line, v) = sec.require("motion")?;
        let class = parse_motion(line, &v)?;
        let (line, v) = sec.require("orientation")?;
        let orientation = parse_orientation(line, &v)?;
        let (line, v) = sec.require("reps")?;
        let reps: usize = parse_num(line, "reps", &v)?;
        if reps == 0 {
            return Err(err(line, "reps must be at least 1"));
        }
        sec.finish()?;
        classes.push(ClassSpec { class, orientation, reps });
    }

    let partial_subject = match sections.partial {
        None => None,
        Some((header, entries)) => {
            let mut sec = Keys::new("partial_subject", header, entries)?;
            let (line, v) = sec.require("subject")?;
            let subject_id: u32 = parse_num(line, "subject", &v)?;
            let (line, v) = sec.require("tx_beam")?;
            let tx_beam = check_beam(line, parse_num(line, "tx_beam", &v)?)?;
            let (line, v) = sec.require("orientation")?;
            let orientation = parse_orientation(line, &v)?
                .ok_or_else(|| err(line, "partial subject needs a fixed orientation"))?;
            let (line, v) = sec.require("classes")?;
            let mut list = Vec::new();
            for tok in v.split_whitespace() {
                let (name, reps) = tok
                    .split_once(':')
                    .ok_or_else(|| err(line, format!("expected motion:reps, got `{tok}`")))?;
                list.push((parse_motion(line, name)?, parse_num::<usize>(line, "reps", reps)?));
            }
            if list.is_empty() {
                return Err(err(line, "partial subject lists no classes"));
            }
            sec.finish()?;
            Some(PartialSubject { subject_id, tx_beam, orientation, classes: list })
        }
    };

    Ok(DatasetSpec {
        which,
        unstack,
        reported_fs,
        classes,
        tx_beams,
        subjects,
        partial_subject,
        fs_collect,
        duration,
        squat_motions,
        snr_threshold,
        beam_clutter,
    })
}
