//! Plain-text and CSV file formats.
//!
//! - Sequence files: one sequence per line.
//! - Corpus files: one family per block (seed first, then members), blocks
//!   separated by a blank line.
//! - Pool CSV: header `sequence,y`.
//! - Trajectory CSV: header `step,method,replicate,proposed,y,best_so_far,elapsed_ms`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::optimizer::{Method, StepRecord};
use crate::seq_model::{Alphabet, CloneStream, Sequence};

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => parse_error(path, 1, 1, "file is not valid UTF-8"),
        _ => Error::Io(e),
    })
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::MalformedInput(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fails with [`Error::WouldOverwrite`] if `path` exists and `force` is off.
pub fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if !force && path.exists() {
        return Err(Error::WouldOverwrite(path.to_path_buf()));
    }
    Ok(())
}

pub fn parse_sequences(text: &str, alphabet: &Alphabet, path: &Path) -> Result<Vec<Sequence>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let seq = alphabet
            .parse(line)
            .map_err(|(c, m)| parse_error(path, i + 1, c, m))?;
        out.push(seq);
    }
    Ok(out)
}

pub fn format_sequences(seqs: &[Sequence], alphabet: &Alphabet) -> String {
    let mut s = String::new();
    for x in seqs {
        s.push_str(&alphabet.format(x));
        s.push('\n');
    }
    s
}

pub fn read_sequences(path: &Path, alphabet: &Alphabet) -> Result<Vec<Sequence>> {
    parse_sequences(&read_text(path)?, alphabet, path)
}

pub fn parse_corpus(text: &str, alphabet: &Alphabet, path: &Path) -> Result<Vec<CloneStream>> {
    let mut families = Vec::new();
    let mut current: Option<CloneStream> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            families.extend(current.take());
            continue;
        }
        let seq = alphabet
            .parse(line)
            .map_err(|(c, m)| parse_error(path, i + 1, c, m))?;
        match current.as_mut() {
            Some(stream) => stream.members.push(seq),
            None => current = Some(CloneStream::new(seq)),
        }
    }
    families.extend(current);
    Ok(families)
}

pub fn format_corpus(families: &[CloneStream], alphabet: &Alphabet) -> String {
    let mut s = String::new();
    for (i, fam) in families.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        for x in fam.sequences() {
            s.push_str(&alphabet.format(x));
            s.push('\n');
        }
    }
    s
}

pub fn read_corpus(path: &Path, alphabet: &Alphabet) -> Result<Vec<CloneStream>> {
    parse_corpus(&read_text(path)?, alphabet, path)
}

pub fn parse_pool_csv(
    text: &str,
    alphabet: &Alphabet,
    path: &Path,
) -> Result<Vec<(Sequence, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| parse_error(path, line, 1, e.to_string()))?;
        if rec.len() != 2 {
            return Err(parse_error(
                path,
                line,
                1,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        if i == 0 {
            if &rec[0] != "sequence" || &rec[1] != "y" {
                return Err(parse_error(path, 1, 1, "expected header `sequence,y`"));
            }
            continue;
        }
        let seq = alphabet
            .parse(&rec[0])
            .map_err(|(c, m)| parse_error(path, line, c, m))?;
        let y_col = rec[0].chars().count() + 2;
        let y: f64 = rec[1].trim().parse().map_err(|_| {
            parse_error(
                path,
                line,
                y_col,
                format!("cannot parse value {:?}", &rec[1]),
            )
        })?;
        if !y.is_finite() {
            return Err(parse_error(path, line, y_col, "value must be finite"));
        }
        out.push((seq, y));
    }
    Ok(out)
}

pub fn format_pool_csv(pool: &[(Sequence, f64)], alphabet: &Alphabet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["sequence", "y"])?;
    for (x, y) in pool {
        w.write_record([alphabet.format(x), format!("{y:?}")])?;
    }
    into_string(w)
}

pub fn read_pool_csv(path: &Path, alphabet: &Alphabet) -> Result<Vec<(Sequence, f64)>> {
    parse_pool_csv(&read_text(path)?, alphabet, path)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// One trajectory row as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub method: Method,
    pub replicate: usize,
    pub proposed: Sequence,
    pub y: f64,
    pub best_so_far: f64,
    pub elapsed_ms: f64,
}

impl TrajectoryRow {
    pub fn from_record(r: &StepRecord, replicate: usize) -> Self {
        TrajectoryRow {
            step: r.step,
            method: r.method,
            replicate,
            proposed: r.sequence.clone(),
            y: r.y,
            best_so_far: r.best_so_far,
            elapsed_ms: r.elapsed_ms,
        }
    }
}

const TRAJECTORY_HEADER: [&str; 7] = [
    "step",
    "method",
    "replicate",
    "proposed",
    "y",
    "best_so_far",
    "elapsed_ms",
];

pub fn format_trajectory_csv(rows: &[TrajectoryRow], alphabet: &Alphabet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            r.method.name().to_string(),
            r.replicate.to_string(),
            alphabet.format(&r.proposed),
            format!("{:?}", r.y),
            format!("{:?}", r.best_so_far),
            format!("{:?}", r.elapsed_ms),
        ])?;
    }
    into_string(w)
}

pub fn parse_trajectory_csv(
    text: &str,
    alphabet: &Alphabet,
    path: &Path,
) -> Result<Vec<TrajectoryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| parse_error(path, line, 1, e.to_string()))?;
        if i == 0 {
            if rec.iter().ne(TRAJECTORY_HEADER) {
                return Err(parse_error(path, 1, 1, "unexpected trajectory header"));
            }
            continue;
        }
        if rec.len() != TRAJECTORY_HEADER.len() {
            return Err(parse_error(path, line, 1, "wrong number of fields"));
        }
        let col = |k: usize| {
            rec.iter()
                .take(k)
                .map(|f| f.chars().count() + 1)
                .sum::<usize>()
                + 1
        };
        let num = |k: usize| -> Result<f64> {
            rec[k]
                .parse()
                .map_err(|_| parse_error(path, line, col(k), format!("bad number {:?}", &rec[k])))
        };
        let int = |k: usize| -> Result<usize> {
            rec[k]
                .parse()
                .map_err(|_| parse_error(path, line, col(k), format!("bad integer {:?}", &rec[k])))
        };
        out.push(TrajectoryRow {
            step: int(0)?,
            method: rec[1].parse().map_err(|_| {
                parse_error(path, line, col(1), format!("unknown method {:?}", &rec[1]))
            })?,
            replicate: int(2)?,
            proposed: alphabet
                .parse(&rec[3])
                .map_err(|(c, m)| parse_error(path, line, col(3) + c - 1, m))?,
            y: num(4)?,
            best_so_far: num(5)?,
            elapsed_ms: num(6)?,
        });
    }
    Ok(out)
}

pub fn read_trajectory_csv(path: &Path, alphabet: &Alphabet) -> Result<Vec<TrajectoryRow>> {
    parse_trajectory_csv(&read_text(path)?, alphabet, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_round_trip() {
        let a = Alphabet::new(3).unwrap();
        let fam = |s: &[u16], m: &[&[u16]]| {
            CloneStream::new(Sequence::new(s.to_vec()))
                .with_members(m.iter().map(|x| Sequence::new(x.to_vec())).collect())
        };
        let corpus = vec![fam(&[0, 1], &[&[1, 1], &[2, 0]]), fam(&[2, 2], &[])];
        let text = format_corpus(&corpus, &a);
        assert_eq!(parse_corpus(&text, &a, Path::new("c")).unwrap(), corpus);
    }

    #[test]
    fn pool_errors_name_line_and_column() {
        let a = Alphabet::new(3).unwrap();
        let err =
            parse_pool_csv("sequence,y\n0 1,2.0\n0 7,1.0\n", &a, Path::new("p.csv")).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
