//! The `SEMORAN1` named-array container.
//!
//! Layout: 8-byte magic `SEMORAN1`, little-endian `u32` format version,
//! then zero or more entries until EOF. Each entry is
//! `name_len: u16 | name: utf8 | rank: u8 | dims: u32 * rank | payload: f32 * prod(dims)`,
//! all little-endian. Round-trips are bit-exact; integer metadata rides in
//! payloads bit-cast to `f32` (the reader never transforms values).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"SEMORAN1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected \"SEMORAN1\"")]
    BadMagic,
    #[error("unsupported container version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated container while reading {0}")]
    Truncated(&'static str),
    #[error("entry name is not valid UTF-8")]
    BadName,
    #[error("duplicate entry name {0:?}")]
    DuplicateEntry(String),
    #[error("entry {0:?} missing")]
    MissingEntry(String),
    #[error("entry {name:?} has dims {got:?}, expected {expected:?}")]
    WrongDims {
        name: String,
        expected: Vec<u32>,
        got: Vec<u32>,
    },
    #[error("entry {0:?} payload overflows addressable size")]
    Oversized(String),
}

pub type Result<T> = std::result::Result<T, ContainerError>;

/// One named array: dims plus row-major `f32` payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Entry {
    pub fn scalar(v: f32) -> Self {
        Entry {
            dims: vec![],
            data: vec![v],
        }
    }

    pub fn vec1(data: Vec<f32>) -> Self {
        Entry {
            dims: vec![data.len() as u32],
            data,
        }
    }

    /// Stores a `u64` bit-cast into two `f32` slots (hi, lo).
    pub fn from_u64_bits(v: u64) -> Self {
        Entry {
            dims: vec![2],
            data: vec![f32::from_bits((v >> 32) as u32), f32::from_bits(v as u32)],
        }
    }

    pub fn as_u64_bits(&self) -> Option<u64> {
        if self.data.len() != 2 {
            return None;
        }
        Some(((self.data[0].to_bits() as u64) << 32) | self.data[1].to_bits() as u64)
    }

    pub fn as_scalar(&self) -> Option<f32> {
        if self.data.len() == 1 {
            Some(self.data[0])
        } else {
            None
        }
    }
}

/// An ordered set of named arrays. Entries serialize in name order so the
/// byte stream is canonical.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    entries: BTreeMap<String, Entry>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, entry: Entry) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(ContainerError::DuplicateEntry(name.to_string()));
        }
        self.entries.insert(name.to_string(), entry);
        Ok(())
    }

    pub fn insert_scalar(&mut self, name: &str, v: f32) -> Result<()> {
        self.insert(name, Entry::scalar(v))
    }

    pub fn insert_u64(&mut self, name: &str, v: u64) -> Result<()> {
        self.insert(name, Entry::from_u64_bits(v))
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .get(name)
            .ok_or_else(|| ContainerError::MissingEntry(name.to_string()))
    }

    pub fn scalar(&self, name: &str) -> Result<f32> {
        self.get(name)?.as_scalar().ok_or_else(|| ContainerError::WrongDims {
            name: name.to_string(),
            expected: vec![],
            got: self.get(name).map(|e| e.dims.clone()).unwrap_or_default(),
        })
    }

    pub fn u64_bits(&self, name: &str) -> Result<u64> {
        self.get(name)?.as_u64_bits().ok_or_else(|| ContainerError::WrongDims {
            name: name.to_string(),
            expected: vec![2],
            got: self.get(name).map(|e| e.dims.clone()).unwrap_or_default(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for (name, entry) in &self.entries {
            let name_bytes = name.as_bytes();
            w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
            w.write_all(name_bytes)?;
            w.write_all(&[entry.dims.len() as u8])?;
            for d in &entry.dims {
                w.write_all(&d.to_le_bytes())?;
            }
            let expected: usize = entry.dims.iter().map(|&d| d as usize).product();
            debug_assert_eq!(expected, entry.data.len());
            let mut buf = Vec::with_capacity(entry.data.len() * 4);
            for v in &entry.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        read_exact_or(r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let mut ver = [0u8; 4];
        read_exact_or(r, &mut ver, "version")?;
        let version = u32::from_le_bytes(ver);
        if version != FORMAT_VERSION {
            return Err(ContainerError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }

        let mut out = Container::new();
        loop {
            let mut len_buf = [0u8; 2];
            match r.read(&mut len_buf[..1])? {
                0 => break, // clean EOF between entries
                _ => read_exact_or(r, &mut len_buf[1..], "entry name length")?,
            }
            let name_len = u16::from_le_bytes(len_buf) as usize;
            let mut name_buf = vec![0u8; name_len];
            read_exact_or(r, &mut name_buf, "entry name")?;
            let name = String::from_utf8(name_buf).map_err(|_| ContainerError::BadName)?;

            let mut rank = [0u8; 1];
            read_exact_or(r, &mut rank, "entry rank")?;
            let mut dims = Vec::with_capacity(rank[0] as usize);
            for _ in 0..rank[0] {
                let mut d = [0u8; 4];
                read_exact_or(r, &mut d, "entry dims")?;
                dims.push(u32::from_le_bytes(d));
            }
            let count = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
                .ok_or_else(|| ContainerError::Oversized(name.clone()))?;
            let mut payload = vec![0u8; count.checked_mul(4).ok_or_else(|| ContainerError::Oversized(name.clone()))?];
            read_exact_or(r, &mut payload, "entry payload")?;
            let data = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            out.insert(&name, Entry { dims, data })?;
        }
        Ok(out)
    }

    /// Atomic save: write to `<path>.tmp`, then rename over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            self.write_to(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write cannot fail");
        buf
    }
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &'static str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            ContainerError::Truncated(what)
        } else {
            ContainerError::Io(e)
        }
    })
}
