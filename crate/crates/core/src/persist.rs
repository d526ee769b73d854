//! Versioned model files.
//!
//! Layout:
//!
//! ```text
//! DISDF-MODEL
//! version <u32>
//! sha256 <64 hex digits of the body>
//! length <body length in bytes>
//! <blank line>
//! <body>
//! ```
//!
//! The body is a sequence of sections, each a 4-byte tag followed by a
//! little-endian `u64` payload length. `CONF` holds the training config in
//! its text form, `META` the mode and class names, and one `LEVL` section
//! per cascade level holds forests, weights and trees. Floats are stored as
//! their IEEE-754 bit patterns, so a loaded model predicts bit-identically.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::cascade::{CascadeModel, LevelModel, Mode};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::forest::{is_on_simplex, ForestKind, ForestModel, WeightVector, SIMPLEX_TOL};
use crate::tree::{Node, TreeKind, TreeModel};

pub const MAGIC: &str = "DISDF-MODEL";
pub const FORMAT_VERSION: u32 = 1;

const TAG_CONFIG: &[u8; 4] = b"CONF";
const TAG_META: &[u8; 4] = b"META";
const TAG_LEVEL: &[u8; 4] = b"LEVL";

pub fn save_model(model: &CascadeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CascadeModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn to_bytes(model: &CascadeModel) -> Vec<u8> {
    let mut body = Vec::new();
    section(&mut body, TAG_CONFIG, |w| w.extend_from_slice(model.config().to_text().as_bytes()));
    section(&mut body, TAG_META, |w| {
        put_u8(w, mode_code(model.mode()));
        put_u64(w, model.class_names().len() as u64);
        for name in model.class_names() {
            put_u64(w, name.len() as u64);
            w.extend_from_slice(name.as_bytes());
        }
    });
    for level in model.levels() {
        section(&mut body, TAG_LEVEL, |w| write_level(w, level));
    }

    let digest = Sha256::digest(&body);
    let mut out = format!(
        "{MAGIC}\nversion {FORMAT_VERSION}\nsha256 {}\nlength {}\n\n",
        hex(&digest),
        body.len()
    )
    .into_bytes();
    out.extend_from_slice(&body);
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<CascadeModel> {
    let (header, body) = split_header(bytes)?;
    let mut lines = header.lines();
    if lines.next() != Some(MAGIC) {
        return Err(Error::BadMagic);
    }
    let version: u32 = header_field(lines.next(), "version")?
        .parse()
        .map_err(|_| Error::Malformed("unreadable version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let checksum = header_field(lines.next(), "sha256")?.to_string();
    let length: usize = header_field(lines.next(), "length")?
        .parse()
        .map_err(|_| Error::Malformed("unreadable body length".into()))?;
    if body.len() != length || hex(&Sha256::digest(body)) != checksum {
        return Err(Error::ChecksumMismatch);
    }

    let mut r = Reader { buf: body, pos: 0 };
    let config_text = r.section(TAG_CONFIG)?;
    let config = TrainConfig::from_text(
        std::str::from_utf8(config_text).map_err(|_| Error::Malformed("config is not UTF-8".into()))?,
    )?;
    let mut meta = Reader {
        buf: r.section(TAG_META)?,
        pos: 0,
    };
    let mode = mode_from_code(meta.u8()?)?;
    let num_classes = meta.len()?;
    let class_names = (0..num_classes)
        .map(|_| {
            let n = meta.len()?;
            String::from_utf8(meta.take(n)?.to_vec()).map_err(|_| Error::Malformed("class name is not UTF-8".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    meta.finish()?;

    let mut levels = Vec::new();
    while !r.at_end() {
        let mut lr = Reader {
            buf: r.section(TAG_LEVEL)?,
            pos: 0,
        };
        levels.push(read_level(&mut lr, num_classes)?);
        lr.finish()?;
    }
    CascadeModel::new(levels, mode, class_names, config)
}

fn split_header(bytes: &[u8]) -> Result<(&str, &[u8])> {
    if !bytes.starts_with(MAGIC.as_bytes()) {
        return Err(Error::BadMagic);
    }
    let end = bytes
        .windows(2)
        .position(|w| w == b"\n\n")
        .ok_or_else(|| Error::Malformed("header is not terminated".into()))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| Error::Malformed("header is not UTF-8".into()))?;
    Ok((header, &bytes[end + 2..]))
}

fn header_field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Malformed(format!("missing header field {key}")))
}

fn mode_code(mode: Mode) -> u8 {
    match mode {
        Mode::DisDf => 0,
        Mode::Baseline => 1,
    }
}

fn mode_from_code(code: u8) -> Result<Mode> {
    match code {
        0 => Ok(Mode::DisDf),
        1 => Ok(Mode::Baseline),
        c => Err(Error::Malformed(format!("unknown mode code {c}"))),
    }
}

fn forest_code(kind: ForestKind) -> u8 {
    match kind {
        ForestKind::Random => 0,
        ForestKind::CompletelyRandom => 1,
    }
}

fn tree_code(kind: TreeKind) -> u8 {
    match kind {
        TreeKind::RandomSplitSearch => 0,
        TreeKind::CompletelyRandom => 1,
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], fill: impl FnOnce(&mut Vec<u8>)) {
    let mut payload = Vec::new();
    fill(&mut payload);
    out.extend_from_slice(tag);
    put_u64(out, payload.len() as u64);
    out.extend_from_slice(&payload);
}

fn put_u8(w: &mut Vec<u8>, v: u8) {
    w.push(v);
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_bits().to_le_bytes());
}

fn write_level(w: &mut Vec<u8>, level: &LevelModel) {
    put_u64(w, level.forests().len() as u64);
    for forest in level.forests() {
        put_u8(w, forest_code(forest.kind()));
        put_u64(w, forest.num_trees() as u64);
        for &v in forest.weights().as_slice() {
            put_f64(w, v);
        }
        for tree in forest.trees() {
            put_u8(w, tree_code(tree.kind()));
            put_u64(w, tree.input_dim() as u64);
            put_u64(w, tree.nodes().len() as u64);
            for node in tree.nodes() {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        put_u8(w, 0);
                        put_u64(w, *feature as u64);
                        put_f64(w, *threshold);
                        put_u64(w, *left as u64);
                        put_u64(w, *right as u64);
                    }
                    Node::Leaf { dist } => {
                        put_u8(w, 1);
                        dist.iter().for_each(|&p| put_f64(w, p));
                    }
                }
            }
        }
    }
}

fn read_level(r: &mut Reader<'_>, num_classes: usize) -> Result<LevelModel> {
    let num_forests = r.len()?;
    let mut forests = Vec::with_capacity(num_forests.min(1024));
    for _ in 0..num_forests {
        let kind = match r.u8()? {
            0 => ForestKind::Random,
            1 => ForestKind::CompletelyRandom,
            c => return Err(Error::Malformed(format!("unknown forest kind {c}"))),
        };
        let num_trees = r.len()?;
        let weights = (0..num_trees).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if weights.is_empty() || !is_on_simplex(&weights, SIMPLEX_TOL) {
            return Err(Error::Malformed("forest weights are off the simplex".into()));
        }
        let mut trees = Vec::with_capacity(num_trees.min(1 << 16));
        for _ in 0..num_trees {
            trees.push(read_tree(r, num_classes)?);
        }
        forests.push(ForestModel::from_parts(trees, kind, WeightVector::from_simplex(weights))?);
    }
    LevelModel::new(forests)
}

fn read_tree(r: &mut Reader<'_>, num_classes: usize) -> Result<TreeModel> {
    let kind = match r.u8()? {
        0 => TreeKind::RandomSplitSearch,
        1 => TreeKind::CompletelyRandom,
        c => return Err(Error::Malformed(format!("unknown tree kind {c}"))),
    };
    let input_dim = r.len()?;
    let num_nodes = r.len()?;
    let mut nodes = Vec::with_capacity(num_nodes.min(1 << 20));
    for _ in 0..num_nodes {
        let node = match r.u8()? {
            0 => Node::Split {
                feature: r.len()?,
                threshold: r.f64()?,
                left: r.len()?,
                right: r.len()?,
            },
            1 => Node::Leaf {
                dist: (0..num_classes).map(|_| r.f64()).collect::<Result<Vec<_>>>()?.into(),
            },
            c => return Err(Error::Malformed(format!("unknown node tag {c}"))),
        };
        nodes.push(node);
    }
    TreeModel::from_nodes(nodes, input_dim, num_classes, kind)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Malformed("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Malformed("length overflows usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        self.u64().map(f64::from_bits)
    }

    fn section(&mut self, tag: &[u8; 4]) -> Result<&'a [u8]> {
        let found = self.take(4)?;
        if found != tag {
            return Err(Error::Malformed(format!(
                "expected section {}, found {}",
                String::from_utf8_lossy(tag),
                String::from_utf8_lossy(found)
            )));
        }
        let n = self.len()?;
        self.take(n)
    }

    fn at_end(&self) -> bool {
        self.pos == self.buf.len()
    }

    fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(Error::Malformed("trailing bytes in section".into()))
        }
    }
}
