//! JSON Lines trajectory files: a header line, then one trajectory per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::types::Trajectory;
use super::SimError;

pub const TRAJECTORY_FORMAT: &str = "inspire-traj";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formulation: Option<String>,
    /// Effective configuration that produced the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl DatasetHeader {
    pub fn new(format: &str) -> Self {
        Self { format: format.into(), version: FORMAT_VERSION, formulation: None, config: None }
    }
}

/// Writes the header and every record, one JSON document per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut out: W, header: &DatasetHeader, records: &[T]) -> Result<(), SimError> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a file written by [`write_jsonl`], checking the header's format tag and version.
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(
    input: R,
    expected_format: &str,
) -> Result<(DatasetHeader, Vec<T>), SimError> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| SimError::Format("empty file".into()))??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    if header.format != expected_format {
        return Err(SimError::Format(format!("expected format {expected_format:?}, found {:?}", header.format)));
    }
    if header.version != FORMAT_VERSION {
        return Err(SimError::Format(format!("unsupported version {}", header.version)));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| SimError::Format(format!("line {}: {e}", i + 2)))?;
        records.push(record);
    }
    Ok((header, records))
}

pub fn write_trajectories<W: Write>(out: W, header: &DatasetHeader, trajs: &[Trajectory]) -> Result<(), SimError> {
    write_jsonl(out, header, trajs)
}

pub fn read_trajectories<R: BufRead>(input: R) -> Result<(DatasetHeader, Vec<Trajectory>), SimError> {
    read_jsonl(input, TRAJECTORY_FORMAT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{generate_demonstrations, SceneGenConfig};

    #[test]
    fn header_and_field_names() {
        let trajs = generate_demonstrations(2, &SceneGenConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectories(&mut buf, &DatasetHeader::new(TRAJECTORY_FORMAT), &trajs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), r#"{"format":"inspire-traj","version":1}"#);
        let rec: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert!(rec["task"]["instruction"].is_array());
        assert!(rec["steps"][0]["scene"]["gripper_position"].is_object());
        assert!(rec["steps"][0]["action"].is_string());
        let (_, back) = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(back, trajs);
    }

    #[test]
    fn wrong_format_rejected() {
        let data = b"{\"format\":\"other\",\"version\":1}\n";
        assert!(matches!(read_trajectories(&data[..]), Err(SimError::Format(_))));
    }
}
