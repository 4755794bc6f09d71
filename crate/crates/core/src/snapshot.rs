//! Versioned binary snapshots of a loaded graph.
//!
//! The layout is little-endian and fully determined by the graph contents,
//! so the same graph always serializes to the same bytes. Lookup indexes are
//! rebuilt on load rather than stored.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::store::{GraphConfig, KnowledgeGraph, StoreError, TermId, Triple};

pub const GRAPH_MAGIC: &[u8; 4] = b"KGQS";
pub const GRAPH_VERSION: u16 = 1;

pub fn write_snapshot(kg: &KnowledgeGraph, mut out: impl Write) -> io::Result<()> {
    out.write_all(GRAPH_MAGIC)?;
    out.write_all(&GRAPH_VERSION.to_le_bytes())?;
    write_str(&mut out, &kg.config().label_predicate)?;
    write_str(&mut out, &kg.config().type_predicate)?;

    write_u32(&mut out, kg.term_count() as u32)?;
    for id in kg.term_ids() {
        write_str(&mut out, kg.term(id))?;
    }

    let label_entries: u32 =
        kg.term_ids().map(|id| kg.labels_of(id).len() as u32).sum();
    write_u32(&mut out, label_entries)?;
    for id in kg.term_ids() {
        for label in kg.labels_of(id) {
            write_u32(&mut out, id.0)?;
            write_str(&mut out, label)?;
        }
    }

    write_u64(&mut out, kg.triple_count() as u64)?;
    for t in kg.triples() {
        write_u32(&mut out, t.subject.0)?;
        write_u32(&mut out, t.predicate.0)?;
        write_u32(&mut out, t.object.0)?;
    }
    Ok(())
}

pub fn save_snapshot(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_snapshot(kg, &mut out)?;
    out.flush()
}

pub fn read_snapshot(mut input: impl Read) -> Result<KnowledgeGraph, StoreError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != GRAPH_MAGIC {
        return Err(StoreError::Snapshot("unrecognized magic bytes".into()));
    }
    let version = read_u16(&mut input)?;
    if version != GRAPH_VERSION {
        return Err(StoreError::Snapshot(format!(
            "unsupported version {version} (expected {GRAPH_VERSION})"
        )));
    }
    let config = GraphConfig {
        label_predicate: read_str(&mut input)?,
        type_predicate: read_str(&mut input)?,
    };

    let term_count = read_u32(&mut input)? as usize;
    let mut terms = Vec::with_capacity(term_count);
    for _ in 0..term_count {
        terms.push(read_str(&mut input)?);
    }

    let label_entries = read_u32(&mut input)? as usize;
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); term_count];
    for _ in 0..label_entries {
        let id = read_u32(&mut input)? as usize;
        if id >= term_count {
            return Err(StoreError::Snapshot(format!("label references term {id} out of range")));
        }
        labels[id].push(read_str(&mut input)?);
    }

    let triple_count = read_u64(&mut input)? as usize;
    let mut triples = Vec::with_capacity(triple_count);
    for _ in 0..triple_count {
        let s = read_u32(&mut input)?;
        let p = read_u32(&mut input)?;
        let o = read_u32(&mut input)?;
        for id in [s, p, o] {
            if id as usize >= term_count {
                return Err(StoreError::Snapshot(format!(
                    "triple references term {id} out of range"
                )));
            }
        }
        triples.push(Triple { subject: TermId(s), predicate: TermId(p), object: TermId(o) });
    }

    Ok(KnowledgeGraph::from_parts(config, terms, triples, labels))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<KnowledgeGraph, StoreError> {
    read_snapshot(BufReader::new(File::open(path)?))
}

/// True when the file begins with the graph snapshot magic.
pub fn is_snapshot(path: impl AsRef<Path>) -> io::Result<bool> {
    let mut magic = [0u8; 4];
    let mut f = File::open(path)?;
    match f.read_exact(&mut magic) {
        Ok(()) => Ok(&magic == GRAPH_MAGIC),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Ok(false),
        Err(e) => Err(e),
    }
}

pub(crate) fn write_u32(mut out: impl Write, v: u32) -> io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

pub(crate) fn write_u64(mut out: impl Write, v: u64) -> io::Result<()> {
    out.write_all(&v.to_le_bytes())
}

pub(crate) fn write_f64(mut out: impl Write, v: f64) -> io::Result<()> {
    out.write_all(&v.to_bits().to_le_bytes())
}

pub(crate) fn write_str(mut out: impl Write, s: &str) -> io::Result<()> {
    write_u32(&mut out, s.len() as u32)?;
    out.write_all(s.as_bytes())
}

pub(crate) fn read_u16(mut input: impl Read) -> Result<u16, StoreError> {
    let mut b = [0u8; 2];
    input.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

pub(crate) fn read_u32(mut input: impl Read) -> Result<u32, StoreError> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(mut input: impl Read) -> Result<u64, StoreError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64(mut input: impl Read) -> Result<f64, StoreError> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_bits(u64::from_le_bytes(b)))
}

pub(crate) fn read_str(mut input: impl Read) -> Result<String, StoreError> {
    let len = read_u32(&mut input)? as usize;
    let mut buf = vec![0u8; len];
    input.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| StoreError::Snapshot("invalid UTF-8 string".into()))
}
