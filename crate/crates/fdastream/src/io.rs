//! JSON-lines block records.
//!
//! One block per line:
//! `{"block_id": 1, "subjects": [{"t": [0.2, 0.8], "y": [1.0, 2.0]}]}`.
//! Blank lines are skipped.

use std::io::BufRead;

use fdastream_core::{Block, FdaError, GridSpec, Subject};
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectRecord {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub block_id: u64,
    pub subjects: Vec<SubjectRecord>,
}

/// Parses and validates one line; `line_no` is used in error messages.
pub fn parse_block(line: &str, line_no: usize, domain: &GridSpec) -> Result<Block> {
    let parse = |msg: String| IoError::Parse { line: line_no, msg };
    let rec: BlockRecord = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
    let subjects = rec
        .subjects
        .into_iter()
        .enumerate()
        .map(|(i, s)| Subject::new(s.t, s.y).map_err(|e| parse(format!("subject {i}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let block = Block::new(rec.block_id, subjects).map_err(|e| parse(e.to_string()))?;
    block.check_domain(domain).map_err(|cause| match cause {
        FdaError::Domain { .. } => IoError::Domain {
            line: line_no,
            cause,
        },
        other => parse(other.to_string()),
    })?;
    Ok(block)
}

/// Canonical single-line form (subjects and measurements in sorted order).
pub fn serialize_block(block: &Block) -> String {
    let c = block.canonical();
    let rec = BlockRecord {
        block_id: c.block_id,
        subjects: c
            .subjects
            .into_iter()
            .map(|s| SubjectRecord {
                t: s.times,
                y: s.values,
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("finite block serializes")
}

/// Iterator over the blocks of a JSON-lines stream.
pub struct BlockReader<R> {
    input: R,
    domain: GridSpec,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> BlockReader<R> {
    pub fn new(input: R, domain: GridSpec) -> Self {
        BlockReader {
            input,
            domain,
            line_no: 0,
            buf: String::new(),
        }
    }
}

impl<R: BufRead> Iterator for BlockReader<R> {
    type Item = Result<Block>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            return Some(parse_block(line, self.line_no, &self.domain));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example() {
        let d = GridSpec::unit_curve();
        let b = parse_block(
            r#"{"block_id":1,"subjects":[{"t":[0.2,0.8],"y":[1.0,2.0]}]}"#,
            1,
            &d,
        )
        .unwrap();
        assert_eq!(b.block_id, 1);
        assert_eq!(b.n_subjects(), 1);
        assert_eq!(b.subjects[0].len(), 2);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let d = GridSpec::unit_curve();
        let e = parse_block(
            r#"{"block_id":1,"subjects":[{"t":[0.2],"y":[1.0,2.0]}]}"#,
            7,
            &d,
        )
        .unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 7, .. }), "{e}");
        let e = parse_block(
            r#"{"block_id":1,"subjects":[{"t":[1.2],"y":[1.0]}]}"#,
            3,
            &d,
        )
        .unwrap_err();
        assert!(matches!(e, IoError::Domain { line: 3, .. }), "{e}");
        assert!(matches!(
            parse_block("{", 2, &d),
            Err(IoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let d = GridSpec::unit_curve();
        let line =
            r#"{"block_id":4,"subjects":[{"t":[0.9,0.1],"y":[3.0,-1.5]},{"t":[0.05],"y":[2.0]}]}"#;
        let once = serialize_block(&parse_block(line, 1, &d).unwrap());
        assert_eq!(
            once,
            r#"{"block_id":4,"subjects":[{"t":[0.05],"y":[2.0]},{"t":[0.1,0.9],"y":[-1.5,3.0]}]}"#
        );
        assert_eq!(serialize_block(&parse_block(&once, 1, &d).unwrap()), once);
    }

    #[test]
    fn reader_skips_blank_lines() {
        let d = GridSpec::unit_curve();
        let text = "\n{\"block_id\":1,\"subjects\":[{\"t\":[0.5],\"y\":[1.0]}]}\n\n{\"block_id\":2,\"subjects\":[{\"t\":[0.5],\"y\":[1.0]}]}\n";
        let blocks: Vec<_> = BlockReader::new(text.as_bytes(), d)
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(blocks.len(), 2);
        let bad = "{\"block_id\":1,\"subjects\":[]}\n";
        let e = BlockReader::new(bad.as_bytes(), d)
            .next()
            .unwrap()
            .unwrap_err();
        assert!(matches!(e, IoError::Parse { line: 1, .. }));
    }
}
