//! On-disk layout:
//!
//! ```text
//! <data_dir>/channels.json     array of channel metadata
//! <data_dir>/feed_<id>.jsonl   one FeedEntry per line, append-only
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::model::{Channel, FeedEntry};
use crate::{Error, Result};

pub const CHANNELS_FILE: &str = "channels.json";

pub fn feed_path(dir: &Path, channel_id: u64) -> PathBuf {
    dir.join(format!("feed_{channel_id}.jsonl"))
}

/// Replaces `channels.json` atomically (write to a temp file, then rename).
pub fn write_channels(dir: &Path, channels: &[Channel], fsync: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{CHANNELS_FILE}.tmp"));
    {
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, channels)?;
        f.write_all(b"\n")?;
        if fsync {
            f.sync_all()?;
        }
    }
    fs::rename(&tmp, dir.join(CHANNELS_FILE))?;
    Ok(())
}

pub fn read_channels(dir: &Path) -> Result<Vec<Channel>> {
    let path = dir.join(CHANNELS_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| Error::Corrupt {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Append handle for one channel's feed file.
#[derive(Debug)]
pub struct FeedWriter {
    file: File,
    fsync: bool,
}

impl FeedWriter {
    pub fn open(path: &Path, fsync: bool) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file, fsync })
    }

    pub fn append(&mut self, entry: &FeedEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        if self.fsync {
            self.file.sync_data()?;
        }
        Ok(())
    }
}

/// Reads a feed file.
///
/// A final line that does not parse (a write torn by a crash) is cut off
/// the file and a warning is logged. Damage anywhere else is an error.
pub fn read_feed(path: &Path) -> Result<Vec<FeedEntry>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let corrupt = |message: String| Error::Corrupt {
        file: path.display().to_string(),
        message,
    };

    let mut reader = BufReader::new(File::open(path)?);
    let mut entries: Vec<FeedEntry> = Vec::new();
    let mut good_len: u64 = 0;
    let mut line_no = 0;
    let mut buf = Vec::new();
    let mut torn_at: Option<usize> = None;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if let Some(bad) = torn_at {
            return Err(corrupt(format!("unparsable line {bad} is followed by more data")));
        }
        let text = String::from_utf8_lossy(&buf);
        let complete = buf.ends_with(b"\n");
        match serde_json::from_str::<FeedEntry>(text.trim_end()) {
            Ok(e) if complete => {
                let expected = entries.len() as u64 + 1;
                if e.entry_id != expected {
                    return Err(corrupt(format!(
                        "line {line_no}: entry_id {} where {expected} was expected",
                        e.entry_id
                    )));
                }
                entries.push(e);
                good_len += n as u64;
            }
            _ if text.trim().is_empty() && complete => good_len += n as u64,
            _ => torn_at = Some(line_no),
        }
    }

    if let Some(bad) = torn_at {
        log::warn!(
            "{}: dropping torn trailing line {bad}, {} entries recovered",
            path.display(),
            entries.len()
        );
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(good_len)?;
        let mut f = f;
        f.seek(SeekFrom::End(0))?;
        f.sync_all()?;
    }
    Ok(entries)
}
