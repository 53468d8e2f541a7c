//! Small file helpers shared by the corpus, lexicon and review modules.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Writes `bytes` to a sibling temp file, syncs it, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("serializable record");
        buf.push(b'\n');
    }
    buf
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    write_atomic(path, &to_jsonl(items))
}

/// Reads a JSON-lines file, failing on the first malformed line with its number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), n + 1))
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads `id<TAB>text` lines into (id, text) pairs, in file order.
pub fn read_tsv_pairs(path: &Path) -> io::Result<Vec<(String, String)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').ok_or_else(|| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: expected id<TAB>text", path.display(), n + 1))
        })?;
        out.push((id.to_string(), text.to_string()));
    }
    Ok(out)
}

pub fn tsv_pairs_to_bytes<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Vec<u8> {
    let mut buf = Vec::new();
    for (id, text) in pairs {
        buf.extend_from_slice(id.as_bytes());
        buf.push(b'\t');
        buf.extend_from_slice(text.as_bytes());
        buf.push(b'\n');
    }
    buf
}
