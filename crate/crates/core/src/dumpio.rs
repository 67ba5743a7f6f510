//! Binary dump container shared by activation, hidden-state, embedding and
//! similarity files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! [4  magic "CPRB"][4 version u32][8 metadata length u64][metadata, UTF-8 JSON]
//! [offset table: per layer 8 offset u64 + 8 length u64 + 4 CRC32 u32]
//! [payloads: per layer, row-major f32 or f16]
//! ```
//!
//! Offsets are absolute file positions. Each layer can be read and verified
//! on its own.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingSet;
use crate::matrix::{MatrixMeta, SimilarityMatrix, YearGrid};
use crate::neurons::ActivationTensor;
use crate::probes::{HiddenStateBatch, LayerSource};
use crate::years::{Condition, PairMode, PairSet, StimulusTemplate, YearRange};

pub const MAGIC: [u8; 4] = *b"CPRB";
pub const VERSION: u32 = 1;
const TABLE_ENTRY_BYTES: u64 = 20;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("bad magic {0:?}, not a dump file")]
    BadMagic([u8; 4]),
    #[error("unknown dump version {0}")]
    UnknownVersion(u32),
    #[error("checksum mismatch in layer {layer}")]
    Checksum { layer: u32 },
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("layer {0} not in dump")]
    NoSuchLayer(u32),
    #[error("truncated dump: {0}")]
    Truncated(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpKind {
    Activations,
    HiddenStates,
    Embeddings,
    Similarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    Float32,
    Float16,
}

impl ElementType {
    pub fn size(&self) -> u64 {
        match self {
            ElementType::Float32 => 4,
            ElementType::Float16 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub id: u32,
    pub rows: u64,
    pub cols: u64,
}

/// Pair-index description for hidden-state dumps: rows refer to
/// `indices` within the pair set enumerated over `range` and `mode`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub range: YearRange,
    pub mode: PairMode,
    pub indices: Vec<usize>,
}

impl PairSpec {
    pub fn pair_set(&self) -> PairSet {
        PairSet::enumerate(self.range, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub element_type: ElementType,
    pub byte_order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stimuli: Option<Vec<i32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PairSpec>,
    pub layers: Vec<LayerShape>,
    /// Free-form provenance, e.g. the activation hook point or template.
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl DumpHeader {
    pub fn new(kind: DumpKind, model: impl Into<String>, element_type: ElementType) -> Self {
        Self {
            kind,
            model: model.into(),
            condition: None,
            element_type,
            byte_order: "little".into(),
            stimuli: None,
            pairs: None,
            layers: Vec::new(),
            notes: BTreeMap::new(),
        }
    }

    fn validate(&self) -> Result<(), DumpError> {
        if self.byte_order != "little" {
            return Err(DumpError::Metadata(format!("byte order {:?} unsupported", self.byte_order)));
        }
        if self.element_type == ElementType::Float16 && self.kind != DumpKind::HiddenStates {
            return Err(DumpError::Metadata(format!(
                "float16 is only allowed for hidden-state dumps, not {:?}",
                self.kind
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &self.layers {
            if !seen.insert(l.id) {
                return Err(DumpError::Metadata(format!("layer {} listed twice", l.id)));
            }
        }
        if let Some(stimuli) = &self.stimuli {
            if let Some(l) = self.layers.iter().find(|l| l.rows != stimuli.len() as u64) {
                return Err(DumpError::Shape(format!(
                    "layer {} has {} rows for {} stimuli",
                    l.id,
                    l.rows,
                    stimuli.len()
                )));
            }
        }
        if let Some(pairs) = &self.pairs {
            if let Some(l) = self.layers.iter().find(|l| l.rows != pairs.indices.len() as u64) {
                return Err(DumpError::Shape(format!(
                    "layer {} has {} rows for {} pairs",
                    l.id,
                    l.rows,
                    pairs.indices.len()
                )));
            }
        }
        Ok(())
    }

    fn payload_len(&self, shape: &LayerShape) -> u64 {
        shape.rows * shape.cols * self.element_type.size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerData {
    F32(Vec<f32>),
    F16(Vec<f16>),
}

impl LayerData {
    pub fn len(&self) -> usize {
        match self {
            LayerData::F32(v) => v.len(),
            LayerData::F16(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element_type(&self) -> ElementType {
        match self {
            LayerData::F32(_) => ElementType::Float32,
            LayerData::F16(_) => ElementType::Float16,
        }
    }

    /// Widened copy; f16 values convert exactly.
    pub fn to_f32(&self) -> Vec<f32> {
        match self {
            LayerData::F32(v) => v.clone(),
            LayerData::F16(v) => v.iter().map(|h| h.to_f32()).collect(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        match self {
            LayerData::F32(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            LayerData::F16(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
        }
    }

    fn from_bytes(ty: ElementType, bytes: &[u8]) -> Self {
        match ty {
            ElementType::Float32 => LayerData::F32(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            ElementType::Float16 => LayerData::F16(
                bytes
                    .chunks_exact(2)
                    .map(|c| f16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TableEntry {
    offset: u64,
    length: u64,
    crc: u32,
}

/// Writes a dump, pulling one layer at a time from `provider` (called in
/// header layer order). A layer whose type or element count disagrees with
/// the header aborts the write.
pub fn write_dump<W, F>(mut w: W, header: &DumpHeader, mut provider: F) -> Result<(), DumpError>
where
    W: Write + Seek,
    F: FnMut(&LayerShape) -> Result<LayerData, DumpError>,
{
    header.validate()?;
    let meta = serde_json::to_vec(header).map_err(|e| DumpError::Metadata(e.to_string()))?;
    let start = w.stream_position()?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)?;
    let table_pos = w.stream_position()?;
    let mut offset = table_pos + TABLE_ENTRY_BYTES * header.layers.len() as u64 - start;
    let mut table = Vec::with_capacity(header.layers.len());
    for shape in &header.layers {
        let length = header.payload_len(shape);
        table.push(TableEntry {
            offset,
            length,
            crc: 0,
        });
        offset += length;
    }
    write_table(&mut w, &table)?;
    for (shape, entry) in header.layers.iter().zip(table.iter_mut()) {
        let data = provider(shape)?;
        if data.element_type() != header.element_type {
            return Err(DumpError::Shape(format!(
                "layer {} supplied as {:?}, header declares {:?}",
                shape.id,
                data.element_type(),
                header.element_type
            )));
        }
        if data.len() as u64 != shape.rows * shape.cols {
            return Err(DumpError::Shape(format!(
                "layer {} has {} elements, header declares {}x{}",
                shape.id,
                data.len(),
                shape.rows,
                shape.cols
            )));
        }
        let bytes = data.to_bytes();
        entry.crc = crc32fast::hash(&bytes);
        w.write_all(&bytes)?;
    }
    let end = w.stream_position()?;
    w.seek(SeekFrom::Start(table_pos))?;
    write_table(&mut w, &table)?;
    w.seek(SeekFrom::Start(end))?;
    w.flush()?;
    Ok(())
}

fn write_table<W: Write>(w: &mut W, table: &[TableEntry]) -> Result<(), DumpError> {
    for e in table {
        w.write_all(&e.offset.to_le_bytes())?;
        w.write_all(&e.length.to_le_bytes())?;
        w.write_all(&e.crc.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_dump_file<F>(path: impl AsRef<Path>, header: &DumpHeader, provider: F) -> Result<(), DumpError>
where
    F: FnMut(&LayerShape) -> Result<LayerData, DumpError>,
{
    let file = File::create(path)?;
    write_dump(BufWriter::new(file), header, provider)
}

/// Random-access reader; layers are loaded and checksummed on demand.
pub struct DumpReader<R> {
    inner: R,
    header: DumpHeader,
    table: Vec<TableEntry>,
    base: u64,
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), DumpError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => DumpError::Truncated(what.to_string()),
        _ => DumpError::Io(e),
    })
}

impl<R: Read + Seek> DumpReader<R> {
    pub fn open(mut inner: R) -> Result<Self, DumpError> {
        let base = inner.stream_position()?;
        let mut magic = [0u8; 4];
        read_exact_or(&mut inner, &mut magic, "magic")?;
        if magic != MAGIC {
            return Err(DumpError::BadMagic(magic));
        }
        let mut b4 = [0u8; 4];
        read_exact_or(&mut inner, &mut b4, "version")?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(DumpError::UnknownVersion(version));
        }
        let mut b8 = [0u8; 8];
        read_exact_or(&mut inner, &mut b8, "metadata length")?;
        let meta_len = u64::from_le_bytes(b8);
        if meta_len > 1 << 32 {
            return Err(DumpError::Metadata(format!("metadata length {meta_len} implausible")));
        }
        let mut meta = vec![0u8; meta_len as usize];
        read_exact_or(&mut inner, &mut meta, "metadata")?;
        let header: DumpHeader =
            serde_json::from_slice(&meta).map_err(|e| DumpError::Metadata(e.to_string()))?;
        header.validate()?;
        let mut table = Vec::with_capacity(header.layers.len());
        for shape in &header.layers {
            let mut entry = [0u8; 20];
            read_exact_or(&mut inner, &mut entry, "offset table")?;
            let e = TableEntry {
                offset: u64::from_le_bytes(entry[0..8].try_into().expect("8 bytes")),
                length: u64::from_le_bytes(entry[8..16].try_into().expect("8 bytes")),
                crc: u32::from_le_bytes(entry[16..20].try_into().expect("4 bytes")),
            };
            let expect = header.payload_len(shape);
            if e.length != expect {
                return Err(DumpError::Shape(format!(
                    "layer {} payload is {} bytes, shape {}x{} needs {expect}",
                    shape.id, e.length, shape.rows, shape.cols
                )));
            }
            table.push(e);
        }
        Ok(Self {
            inner,
            header,
            table,
            base,
        })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    pub fn layer_ids(&self) -> Vec<u32> {
        self.header.layers.iter().map(|l| l.id).collect()
    }

    pub fn layer_shape(&self, layer: u32) -> Option<LayerShape> {
        self.header.layers.iter().copied().find(|l| l.id == layer)
    }

    /// Reads and checksums a single layer. A short read (truncated file)
    /// surfaces as a checksum failure for that layer.
    pub fn read_layer(&mut self, layer: u32) -> Result<LayerData, DumpError> {
        let pos = self
            .header
            .layers
            .iter()
            .position(|l| l.id == layer)
            .ok_or(DumpError::NoSuchLayer(layer))?;
        let entry = self.table[pos];
        self.inner.seek(SeekFrom::Start(self.base + entry.offset))?;
        let mut bytes = Vec::with_capacity(entry.length as usize);
        (&mut self.inner).take(entry.length).read_to_end(&mut bytes)?;
        if bytes.len() as u64 != entry.length || crc32fast::hash(&bytes) != entry.crc {
            return Err(DumpError::Checksum { layer });
        }
        Ok(LayerData::from_bytes(self.header.element_type, &bytes))
    }

    /// Verifies every layer's checksum.
    pub fn validate(&mut self) -> Result<(), DumpError> {
        for id in self.layer_ids() {
            self.read_layer(id)?;
        }
        Ok(())
    }
}

pub fn open_dump(path: impl AsRef<Path>) -> Result<DumpReader<BufReader<File>>, DumpError> {
    DumpReader::open(BufReader::new(File::open(path)?))
}

// ---- typed helpers ------------------------------------------------------

pub const NOTE_HOOK: &str = "hook";
pub const NOTE_TEMPLATE: &str = "template";

pub fn write_activations(
    path: impl AsRef<Path>,
    model: &str,
    tensors: &[ActivationTensor],
    notes: BTreeMap<String, String>,
) -> Result<(), DumpError> {
    let first = tensors
        .first()
        .ok_or_else(|| DumpError::Shape("no activation layers".into()))?;
    if tensors.iter().any(|t| t.condition != first.condition || t.years != first.years) {
        return Err(DumpError::Shape("activation layers disagree on condition or stimuli".into()));
    }
    let mut header = DumpHeader::new(DumpKind::Activations, model, ElementType::Float32);
    header.condition = Some(first.condition);
    header.stimuli = Some(first.years.clone());
    header.layers = tensors
        .iter()
        .map(|t| LayerShape {
            id: t.layer,
            rows: t.n_stimuli() as u64,
            cols: t.n_neurons as u64,
        })
        .collect();
    header.notes = notes;
    let mut iter = tensors.iter();
    write_dump_file(path, &header, |_| {
        Ok(LayerData::F32(iter.next().expect("one tensor per layer").values.clone()))
    })
}

pub fn read_activations<R: Read + Seek>(reader: &mut DumpReader<R>) -> Result<Vec<ActivationTensor>, crate::Error> {
    let header = reader.header().clone();
    if header.kind != DumpKind::Activations {
        return Err(DumpError::Metadata(format!("expected an activation dump, found {:?}", header.kind)).into());
    }
    let condition = header
        .condition
        .ok_or_else(|| DumpError::Metadata("activation dump lacks a condition".into()))?;
    let years = header
        .stimuli
        .clone()
        .ok_or_else(|| DumpError::Metadata("activation dump lacks a stimulus list".into()))?;
    header
        .layers
        .iter()
        .map(|shape| {
            let data = reader.read_layer(shape.id)?;
            ActivationTensor::new(shape.id, condition, years.clone(), shape.cols as usize, data.to_f32())
        })
        .collect()
}

pub fn write_hidden_states(
    path: impl AsRef<Path>,
    model: &str,
    pairs: PairSpec,
    batches: &[HiddenStateBatch],
    element_type: ElementType,
) -> Result<(), DumpError> {
    if batches.iter().any(|b| b.pair_indices != pairs.indices) {
        return Err(DumpError::Shape("batch rows do not follow the pair spec".into()));
    }
    let mut header = DumpHeader::new(DumpKind::HiddenStates, model, element_type);
    header.layers = batches
        .iter()
        .map(|b| LayerShape {
            id: b.layer,
            rows: b.rows() as u64,
            cols: b.dim as u64,
        })
        .collect();
    header.pairs = Some(pairs);
    let mut iter = batches.iter();
    write_dump_file(path, &header, |_| {
        let b = iter.next().expect("one batch per layer");
        Ok(match element_type {
            ElementType::Float32 => LayerData::F32(b.values.clone()),
            ElementType::Float16 => LayerData::F16(b.values.iter().map(|&v| f16::from_f32(v)).collect()),
        })
    })
}

/// Hidden-state dump exposed as a streaming [`LayerSource`].
pub struct HiddenStateDump<R> {
    reader: DumpReader<R>,
    pairs: PairSpec,
}

impl<R: Read + Seek> HiddenStateDump<R> {
    pub fn new(reader: DumpReader<R>) -> Result<Self, DumpError> {
        if reader.header().kind != DumpKind::HiddenStates {
            return Err(DumpError::Metadata(format!(
                "expected a hidden-state dump, found {:?}",
                reader.header().kind
            )));
        }
        let pairs = reader
            .header()
            .pairs
            .clone()
            .ok_or_else(|| DumpError::Metadata("hidden-state dump lacks a pair spec".into()))?;
        Ok(Self { reader, pairs })
    }

    pub fn pair_spec(&self) -> &PairSpec {
        &self.pairs
    }

    pub fn header(&self) -> &DumpHeader {
        self.reader.header()
    }
}

impl<R: Read + Seek> LayerSource for HiddenStateDump<R> {
    fn layer_ids(&self) -> Vec<u32> {
        self.reader.layer_ids()
    }

    fn load_layer(&mut self, layer: u32) -> crate::Result<HiddenStateBatch> {
        let shape = self.reader.layer_shape(layer).ok_or(DumpError::NoSuchLayer(layer))?;
        let data = self.reader.read_layer(layer)?;
        HiddenStateBatch::new(layer, self.pairs.indices.clone(), shape.cols as usize, data.to_f32())
    }
}

pub fn write_embeddings(path: impl AsRef<Path>, set: &EmbeddingSet) -> Result<(), DumpError> {
    let mut header = DumpHeader::new(DumpKind::Embeddings, set.model.clone(), ElementType::Float32);
    header.condition = Some(Condition::Year);
    header.stimuli = Some(set.range.years().collect());
    header.layers = vec![LayerShape {
        id: 0,
        rows: set.vectors.len() as u64,
        cols: set.dim as u64,
    }];
    header.notes.insert(NOTE_TEMPLATE.into(), set.template.0.clone());
    write_dump_file(path, &header, |_| {
        Ok(LayerData::F32(set.vectors.iter().flatten().map(|&v| v as f32).collect()))
    })
}

fn contiguous_range(years: &[i32]) -> Result<YearRange, DumpError> {
    let (Some(&a), Some(&b)) = (years.first(), years.last()) else {
        return Err(DumpError::Metadata("empty stimulus list".into()));
    };
    let range = YearRange::new(a, b).map_err(|e| DumpError::Metadata(e.to_string()))?;
    if years.iter().copied().ne(range.years()) {
        return Err(DumpError::Metadata("stimulus list is not a contiguous year range".into()));
    }
    Ok(range)
}

pub fn read_embeddings<R: Read + Seek>(reader: &mut DumpReader<R>) -> Result<EmbeddingSet, crate::Error> {
    let header = reader.header().clone();
    if header.kind != DumpKind::Embeddings {
        return Err(DumpError::Metadata(format!("expected an embedding dump, found {:?}", header.kind)).into());
    }
    let years = header
        .stimuli
        .ok_or_else(|| DumpError::Metadata("embedding dump lacks a stimulus list".into()))?;
    let range = contiguous_range(&years)?;
    let shape = *header
        .layers
        .first()
        .ok_or_else(|| DumpError::Metadata("embedding dump has no layer".into()))?;
    let data = reader.read_layer(shape.id)?.to_f32();
    let vectors = data
        .chunks(shape.cols as usize)
        .map(|c| c.iter().map(|&v| f64::from(v)).collect())
        .collect();
    let template = header
        .notes
        .get(NOTE_TEMPLATE)
        .map(|t| StimulusTemplate(t.clone()))
        .unwrap_or_default();
    EmbeddingSet::new(header.model, template, range, vectors)
}

/// Similarity matrices as a single f32 layer, missing cells stored as NaN.
pub fn write_similarity(path: impl AsRef<Path>, s: &SimilarityMatrix) -> Result<(), DumpError> {
    let mut header = DumpHeader::new(DumpKind::Similarity, s.meta.model.clone(), ElementType::Float32);
    header.condition = Some(s.meta.condition);
    header.stimuli = Some(s.range().years().collect());
    let n = s.range().len() as u64;
    header.layers = vec![LayerShape { id: 0, rows: n, cols: n }];
    write_dump_file(path, &header, |_| {
        Ok(LayerData::F32(
            s.grid().cells().iter().map(|c| c.map(|v| v as f32).unwrap_or(f32::NAN)).collect(),
        ))
    })
}

pub fn read_similarity<R: Read + Seek>(reader: &mut DumpReader<R>) -> Result<SimilarityMatrix, crate::Error> {
    let header = reader.header().clone();
    if header.kind != DumpKind::Similarity {
        return Err(DumpError::Metadata(format!("expected a similarity dump, found {:?}", header.kind)).into());
    }
    let years = header
        .stimuli
        .ok_or_else(|| DumpError::Metadata("similarity dump lacks a stimulus list".into()))?;
    let range = contiguous_range(&years)?;
    let cells = reader
        .read_layer(0)?
        .to_f32()
        .into_iter()
        .map(|v| (!v.is_nan()).then_some(f64::from(v)))
        .collect();
    let meta = MatrixMeta::new(header.model, header.condition.unwrap_or(Condition::Year));
    SimilarityMatrix::new(YearGrid::from_cells(range, cells)?, meta)
}
