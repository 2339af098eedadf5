//! Checkpoints (CBOR) and profile datasets (CSV with `#` metadata lines).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{ProfileEntry, ProfileRecord};
use crate::window::WindowSnapshot;

pub const CHECKPOINT_FORMAT: u32 = 1;
pub const PROFILE_FORMAT: u32 = 1;
pub const PROFILE_COLUMNS: [&str; 4] = ["t", "x", "sz", "in_window"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub step: usize,
    pub window: WindowSnapshot,
    pub reference: WindowSnapshot,
}

impl Checkpoint {
    pub fn new(step: usize, window: WindowSnapshot, reference: WindowSnapshot) -> Self {
        Self { format_version: CHECKPOINT_FORMAT, step, window, reference }
    }
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// truncated checkpoint behind.
pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("cbor.tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        ciborium::into_writer(ck, &mut out).map_err(|e| Error::Format(format!("checkpoint encode: {e}")))?;
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ck: Checkpoint = ciborium::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if ck.format_version != CHECKPOINT_FORMAT {
        return Err(Error::Format(format!(
            "{}: checkpoint format {} (expected {CHECKPOINT_FORMAT})",
            path.display(),
            ck.format_version
        )));
    }
    Ok(ck)
}

/// Generic CBOR helpers for cached values.
pub fn write_cbor<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        ciborium::into_writer(value, &mut out).map_err(|e| Error::Format(format!("encode: {e}")))?;
        out.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_cbor<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    ciborium::from_reader(BufReader::new(File::open(path)?)).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Streams profile records as `t,x,sz,in_window` rows.
pub struct ProfileWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> ProfileWriter<W> {
    /// `metadata` lines are written verbatim after a `# ` prefix.
    pub fn new(mut inner: W, metadata: &[String]) -> Result<Self> {
        writeln!(inner, "# profile_format_version: {PROFILE_FORMAT}")?;
        writeln!(inner, "# columns: t [1/J], x [sites from quench], sz [hbar], in_window [0/1]")?;
        for line in metadata {
            writeln!(inner, "# {line}")?;
        }
        let mut out = csv::Writer::from_writer(inner);
        out.write_record(PROFILE_COLUMNS)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, record: &ProfileRecord) -> Result<()> {
        let t = record.t.to_string();
        for e in &record.entries {
            self.out.write_record([t.as_str(), &e.x.to_string(), &e.sz.to_string(), if e.in_window { "1" } else { "0" }])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn write_profiles(path: &Path, records: &[ProfileRecord], metadata: &[String]) -> Result<()> {
    let mut w = ProfileWriter::new(BufWriter::new(File::create(path)?), metadata)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()?.flush()?;
    Ok(())
}

/// Parses a profile dataset; consecutive rows sharing `t` form one record.
pub fn read_profiles_from<R: Read>(input: R) -> Result<Vec<ProfileRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = reader.headers()?.clone();
    for col in PROFILE_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Format(format!("profile dataset is missing column `{col}`")));
        }
    }
    if headers.iter().collect::<Vec<_>>() != PROFILE_COLUMNS {
        return Err(Error::Format(format!("profile columns {:?}, expected {PROFILE_COLUMNS:?}", headers)));
    }
    let mut records: Vec<ProfileRecord> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| Error::Format(format!("row {}: bad {what} `{}`", line + 1, row.iter().collect::<Vec<_>>().join(",")));
        let t: f64 = field(0).parse().map_err(|_| bad("t"))?;
        let x: i64 = field(1).parse().map_err(|_| bad("x"))?;
        let sz: f64 = field(2).parse().map_err(|_| bad("sz"))?;
        let in_window = match field(3) {
            "1" => true,
            "0" => false,
            _ => return Err(bad("in_window")),
        };
        let entry = ProfileEntry { x, sz, in_window };
        match records.last_mut() {
            Some(r) if r.t == t => r.entries.push(entry),
            _ => records.push(ProfileRecord { t, entries: vec![entry] }),
        }
    }
    Ok(records)
}

pub fn read_profiles(path: &Path) -> Result<Vec<ProfileRecord>> {
    read_profiles_from(BufReader::new(File::open(path)?))
}
