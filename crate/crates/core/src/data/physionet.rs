//! Reading and writing the PhysioNet 2012 set-a directory layout: one
//! `<RecordID>.txt` per patient (`Time,Parameter,Value` lines) plus an
//! `Outcomes*.txt` table keyed by `RecordID`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::record::{time_series_index, Domain, Measurement, PatientRecord, DESCRIPTORS};
use crate::error::{Error, Result};

/// Records whose files parsed but could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRecord {
    pub file: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDirectory {
    pub records: Vec<PatientRecord>,
    pub skipped: Vec<SkippedRecord>,
}

/// Record file contents before the outcome is joined in.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub record_id: String,
    pub age: Option<f64>,
    pub gender: Option<f64>,
    pub height: Option<f64>,
    pub weight: Option<f64>,
    pub icu_type: Option<i64>,
    pub measurements: Vec<Measurement>,
}

fn parse_err(file: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// `HH:MM` to minutes since admission.
pub fn parse_time(s: &str) -> Option<u32> {
    let (h, m) = s.split_once(':')?;
    let h: u32 = h.trim().parse().ok()?;
    let m: u32 = m.trim().parse().ok()?;
    (m < 60).then_some(h * 60 + m)
}

pub fn format_time(minute: u32) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}

/// The `-1` sentinel and negative values are unknown.
fn known(v: f64) -> Option<f64> {
    (v >= 0.0 && v.is_finite()).then_some(v)
}

pub fn parse_record_text(file: &Path, text: &str) -> Result<RawRecord> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim().eq_ignore_ascii_case("Time,Parameter,Value") => {}
        Some((_, h)) => return Err(parse_err(file, 1, format!("unexpected header `{h}`"))),
        None => return Err(parse_err(file, 1, "empty record file")),
    }
    let mut rec = RawRecord {
        record_id: String::new(),
        age: None,
        gender: None,
        height: None,
        weight: None,
        icu_type: None,
        measurements: Vec::new(),
    };
    let mut in_descriptors = true;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (Some(time), Some(param), Some(value)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(parse_err(
                file,
                line_no,
                format!("expected HH:MM,PARAM,VALUE, got `{line}`"),
            ));
        };
        let minute = parse_time(time)
            .ok_or_else(|| parse_err(file, line_no, format!("bad time `{time}`")))?;
        let param = param.trim();
        let raw_value = value.trim();
        if param == "RecordID" {
            rec.record_id = raw_value.to_string();
            continue;
        }
        let v: f64 = raw_value
            .parse()
            .map_err(|_| parse_err(file, line_no, format!("bad value `{raw_value}`")))?;
        // Descriptors come first; a later `Weight` is a time-series value.
        if in_descriptors && DESCRIPTORS.contains(&param) {
            match param {
                "Age" => rec.age = known(v),
                "Gender" => rec.gender = known(v).filter(|g| *g == 0.0 || *g == 1.0),
                "Height" => rec.height = known(v),
                "ICUType" => rec.icu_type = Some(v as i64),
                "Weight" => rec.weight = known(v),
                _ => unreachable!(),
            }
            continue;
        }
        in_descriptors = false;
        let p = time_series_index(param)
            .ok_or_else(|| parse_err(file, line_no, format!("unknown parameter `{param}`")))?;
        if let Some(value) = known(v) {
            rec.measurements.push(Measurement {
                minute,
                param: p,
                value,
            });
        }
    }
    if rec.record_id.is_empty() {
        rec.record_id = file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    Ok(rec)
}

/// `RecordID -> In-hospital_death` from an outcomes table.
pub fn parse_outcomes(file: &Path, text: &str) -> Result<HashMap<String, bool>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(file, 1, "empty outcomes file"))?
        .1;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let id_col = cols
        .iter()
        .position(|c| *c == "RecordID")
        .ok_or_else(|| parse_err(file, 1, "no RecordID column"))?;
    let death_col = cols
        .iter()
        .position(|c| *c == "In-hospital_death")
        .ok_or_else(|| parse_err(file, 1, "no In-hospital_death column"))?;
    let mut out = HashMap::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (Some(id), Some(death)) = (fields.get(id_col), fields.get(death_col)) else {
            return Err(parse_err(file, idx + 1, "short outcomes row"));
        };
        let death = match *death {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(file, idx + 1, format!("bad outcome `{other}`"))),
        };
        out.insert(id.to_string(), death);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a set-a style directory. Record files are visited in name order.
pub fn parse_physionet(dir: &Path) -> Result<ParsedDirectory> {
    let listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut record_files = Vec::new();
    let mut outcome_files = Vec::new();
    for entry in listing {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if name.starts_with("Outcomes") {
            outcome_files.push(path);
        } else {
            record_files.push(path);
        }
    }
    if record_files.is_empty() {
        return Err(Error::data(format!("no record files in {}", dir.display())));
    }
    if outcome_files.is_empty() {
        return Err(Error::data(format!(
            "no Outcomes*.txt file in {}",
            dir.display()
        )));
    }
    record_files.sort();
    outcome_files.sort();
    let mut outcomes = HashMap::new();
    for f in &outcome_files {
        outcomes.extend(parse_outcomes(f, &read(f)?)?);
    }

    let mut records = Vec::with_capacity(record_files.len());
    let mut skipped = Vec::new();
    for file in record_files {
        let raw = parse_record_text(&file, &read(&file)?)?;
        let Some(domain) = raw.icu_type.and_then(Domain::from_icu_type) else {
            skipped.push(SkippedRecord {
                file,
                reason: "missing or unknown ICUType".into(),
            });
            continue;
        };
        let outcome = *outcomes.get(&raw.record_id).ok_or_else(|| {
            Error::data(format!(
                "no outcome for record {} ({})",
                raw.record_id,
                file.display()
            ))
        })?;
        records.push(PatientRecord {
            patient_id: raw.record_id,
            age: raw.age,
            gender: raw.gender,
            height: raw.height,
            weight: raw.weight,
            domain,
            measurements: raw.measurements,
            outcome,
        });
    }
    Ok(ParsedDirectory { records, skipped })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-1".to_string(), |x| format!("{x}"))
}

pub fn format_record(record: &PatientRecord) -> String {
    let mut s = String::from("Time,Parameter,Value\n");
    let _ = writeln!(s, "00:00,RecordID,{}", record.patient_id);
    let _ = writeln!(s, "00:00,Age,{}", fmt_opt(record.age));
    let _ = writeln!(s, "00:00,Gender,{}", fmt_opt(record.gender));
    let _ = writeln!(s, "00:00,Height,{}", fmt_opt(record.height));
    let _ = writeln!(s, "00:00,ICUType,{}", record.domain.icu_type());
    let _ = writeln!(s, "00:00,Weight,{}", fmt_opt(record.weight));
    for m in &record.measurements {
        let _ = writeln!(
            s,
            "{},{},{}",
            format_time(m.minute),
            m.param_name(),
            m.value
        );
    }
    s
}

/// Writes records in the same layout [`parse_physionet`] reads.
pub fn write_physionet(dir: &Path, records: &[PatientRecord]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut outcomes =
        String::from("RecordID,SAPS-I,SOFA,Length_of_stay,Survival,In-hospital_death\n");
    for r in records {
        let path = dir.join(format!("{}.txt", r.patient_id));
        fs::write(&path, format_record(r)).map_err(|e| Error::io(&path, e))?;
        let _ = writeln!(
            outcomes,
            "{},-1,-1,-1,-1,{}",
            r.patient_id,
            u8::from(r.outcome)
        );
    }
    let path = dir.join("Outcomes-a.txt");
    fs::write(&path, outcomes).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "Time,Parameter,Value
00:00,RecordID,132539
00:00,Age,54
00:00,Gender,0
00:00,Height,-1
00:00,ICUType,4
00:00,Weight,-1
00:07,GCS,15
00:07,HR,88
01:37,Weight,72.5
02:00,Lactate,-1
";

    #[test]
    fn reads_descriptors_and_measurements() {
        let r = parse_record_text(Path::new("132539.txt"), SAMPLE).unwrap();
        assert_eq!(r.record_id, "132539");
        assert_eq!(
            (r.age, r.gender, r.height, r.weight),
            (Some(54.0), Some(0.0), None, None)
        );
        assert_eq!(r.icu_type, Some(4));
        assert_eq!(r.measurements.len(), 3);
        assert_eq!(
            r.measurements[1],
            Measurement {
                minute: 7,
                param: time_series_index("HR").unwrap(),
                value: 88.0
            }
        );
        // Weight after the descriptor block is a time series value.
        assert_eq!(r.measurements[2].param_name(), "Weight");
        assert_eq!(r.measurements[2].minute, 97);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "Time,Parameter,Value\n00:00,RecordID,1\n00:07;HR;88\n";
        match parse_record_text(Path::new("1.txt"), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_parameter_rejected() {
        let text = "Time,Parameter,Value\n00:00,RecordID,1\n00:10,Foo,3\n";
        assert!(matches!(
            parse_record_text(Path::new("1.txt"), text),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn outcomes_by_column_name() {
        let text = "RecordID,SAPS-I,SOFA,Length_of_stay,Survival,In-hospital_death\n132539,6,1,5,-1,0\n132540,16,8,8,-1,1\n";
        let m = parse_outcomes(Path::new("Outcomes-a.txt"), text).unwrap();
        assert_eq!(m["132539"], false);
        assert_eq!(m["132540"], true);
    }

    #[test]
    fn time_format_round_trips() {
        for m in [0, 7, 59, 60, 61, 2879, 2880] {
            assert_eq!(parse_time(&format_time(m)), Some(m));
        }
        assert_eq!(parse_time("01:75"), None);
    }
}
