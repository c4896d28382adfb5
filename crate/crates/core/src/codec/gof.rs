//! `.gof` container: one group of frames per file.
//!
//! The byte layout is documented field by field in `docs/bitstream.md`.
//! All integers and floats are little-endian.

use std::io::{Read, Seek, SeekFrom};

use rayon::prelude::*;

use super::freq::{build_freq_table, FrequencyTable};
use super::quantize::{dequantize_grid, quantize_grid, QuantizedGrid};
use super::range::{range_decode, range_encode};
use crate::error::{ensure, Error, Result};
use crate::field::{
    Aabb, FeatureGrid, FrameField, FrameKind, FrameRepresentation, MultiResBasis, ShadingNetwork,
};
use crate::rate::{EntropyModel, EntropyModelSet, QuantConfig};

pub const MAGIC: [u8; 4] = *b"GOFR";
pub const VERSION: u16 = 1;

/// A trained group: keyframe `{B_1, C_1}` followed by residual frames
/// `{R_t, C_t}`, plus the shared network and entropy models.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GofRepresentation {
    /// Global index of the keyframe in the sequence (0-based).
    pub first_frame: usize,
    pub net: ShadingNetwork,
    /// Models of the keyframe grids.
    pub models: EntropyModelSet,
    /// Models shared by every residual frame. When absent, residual frames
    /// are coded with the keyframe models. Only allowed with more than one
    /// frame.
    pub residual_models: Option<EntropyModelSet>,
    pub frames: Vec<FrameRepresentation>,
}

impl GofRepresentation {
    pub fn keyframe(&self) -> &FrameRepresentation {
        &self.frames[0]
    }

    /// The model set coding frame `t` (0-based within the group).
    pub fn models_for(&self, t: usize) -> &EntropyModelSet {
        models_for(&self.models, self.residual_models.as_ref(), t)
    }

    /// Renderable field of frame `t` (0-based within the group).
    pub fn frame_field(&self, t: usize) -> Result<FrameField> {
        let f = self.frames.get(t).ok_or_else(|| {
            Error::Structure(format!("frame {t} outside group of {}", self.frames.len()))
        })?;
        FrameField::new(f, &self.keyframe().basis, &self.net)
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            !self.frames.is_empty(),
            Structure,
            "a group needs at least one frame"
        );
        let key = &self.frames[0];
        for (i, f) in self.frames.iter().enumerate() {
            ensure!(
                f.frame_index == i + 1,
                Structure,
                "frame {} carries index {}",
                i + 1,
                f.frame_index
            );
            ensure!(
                f.basis.same_shape(&key.basis) && f.coeff.same_shape(&key.coeff),
                Structure,
                "frame {} grid shapes differ from the keyframe",
                i + 1
            );
        }
        ensure!(
            self.residual_models.is_none() || self.frames.len() > 1,
            Structure,
            "residual entropy models given for a group without residual frames"
        );
        for set in std::iter::once(&self.models).chain(&self.residual_models) {
            ensure!(
                set.basis.len() == key.basis.level_count(),
                Structure,
                "{} basis levels but {} basis entropy models",
                key.basis.level_count(),
                set.basis.len()
            );
            for (g, m) in key.grids().zip(set.iter()) {
                ensure!(
                    g.channels() == m.channels(),
                    Structure,
                    "grid with {} channels paired with a {}-channel entropy model",
                    g.channels(),
                    m.channels()
                );
            }
        }
        ensure!(
            self.net.feature_width() == key.basis.total_channels(),
            Structure,
            "network expects {} features, basis provides {}",
            self.net.feature_width(),
            key.basis.total_channels()
        );
        Ok(())
    }
}

use crate::rate::ProbabilityModel;

fn models_for<'a>(
    key: &'a EntropyModelSet,
    residual: Option<&'a EntropyModelSet>,
    t: usize,
) -> &'a EntropyModelSet {
    match (t, residual) {
        (0, _) | (_, None) => key,
        (_, Some(r)) => r,
    }
}

/// Per-grid coding statistics gathered while encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridStats {
    pub elements: usize,
    pub alphabet: usize,
    pub min_q: i64,
    /// Range-coded bytes, excluding the 8-byte per-grid framing.
    pub payload_bytes: usize,
    /// `-sum log2 pmf` at the integer symbols (the rate estimate).
    pub estimated_bits: f64,
    /// Cross-entropy of the symbols under the quantized frequency tables.
    pub table_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofBitstream {
    pub bytes: Vec<u8>,
    pub header_len: usize,
    /// `(offset, length)` of every frame chunk, framing included.
    pub chunks: Vec<(u64, u32)>,
    /// `stats[t][g]`: grid `g` of frame `t` in coding order.
    pub stats: Vec<Vec<GridStats>>,
}

impl GofBitstream {
    /// Wraps a stored stream after checking its header. Coding statistics
    /// are only known to the encoder, so `stats` is empty.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let header = parse_header(&mut std::io::Cursor::new(&bytes))?;
        let end = header
            .chunks
            .iter()
            .map(|&(o, l)| o + l as u64)
            .max()
            .unwrap_or(0);
        ensure!(
            end <= bytes.len() as u64,
            Format,
            "stream truncated: chunks end at byte {end}, stream has {}",
            bytes.len()
        );
        Ok(GofBitstream {
            bytes,
            header_len: header.header_len,
            chunks: header.chunks,
            stats: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn chunk_len(&self, t: usize) -> usize {
        self.chunks[t].1 as usize
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, v: &[f64]) {
        for &x in v {
            self.0.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    /// Model count (0 when absent), then per model: channels, dims, params.
    fn models(&mut self, set: Option<&EntropyModelSet>) -> Result<()> {
        let Some(set) = set else {
            self.u16(0);
            return Ok(());
        };
        self.u16(to_u16(set.len())?);
        for m in set.iter() {
            self.u32(to_u32(m.channels())?);
            self.u8(m.dims().len() as u8);
            for &d in m.dims() {
                self.u8(d as u8);
            }
            self.f32s(m.params());
        }
        Ok(())
    }

    fn shape(&mut self, res: [usize; 3], channels: usize) -> Result<()> {
        for r in res {
            self.u32(to_u32(r)?);
        }
        self.u32(to_u32(channels)?);
        Ok(())
    }
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Range(format!("{v} does not fit in 32 bits")))
}

fn to_u16(v: usize) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Range(format!("{v} does not fit in 16 bits")))
}

fn tables_for(model: &EntropyModel, alphabet: usize, min_q: i64) -> Result<Vec<FrequencyTable>> {
    (0..model.channels())
        .map(|c| build_freq_table(model, c, alphabet, min_q))
        .collect()
}

/// Quantizes and codes one grid. Returns `(alphabet, coded bytes, stats)`.
fn code_grid(g: &QuantizedGrid, model: &EntropyModel) -> Result<(Vec<u8>, GridStats)> {
    let alphabet = g.alphabet();
    let tables = tables_for(model, alphabet, g.min_q)?;
    let coded = range_encode(&g.symbols, &tables)?;
    let table_bits = g
        .symbols
        .iter()
        .enumerate()
        .map(|(e, &s)| tables[e % tables.len()].bits(s as usize))
        .sum();
    let stats = GridStats {
        elements: g.symbols.len(),
        alphabet,
        min_q: g.min_q,
        payload_bytes: coded.len(),
        estimated_bits: g.estimated_bits(model)?,
        table_bits,
    };
    Ok((coded, stats))
}

/// Network and models as stored (f32 precision).
fn stored_params(
    gof: &GofRepresentation,
) -> (ShadingNetwork, EntropyModelSet, Option<EntropyModelSet>) {
    let mut net = gof.net.clone();
    net.round_to_f32();
    let mut models = gof.models.clone();
    models.round_to_f32();
    let residual = gof.residual_models.clone().map(|mut m| {
        m.round_to_f32();
        m
    });
    (net, models, residual)
}

pub fn encode_gof(gof: &GofRepresentation, q: QuantConfig) -> Result<GofBitstream> {
    gof.validate()?;
    let (net, models, residual) = stored_params(gof);
    let key = gof.keyframe();
    let n_grids = key.basis.level_count() + 1;

    // Quantize and code every grid; grids are independent.
    let jobs: Vec<(usize, usize)> = (0..gof.frames.len())
        .flat_map(|t| (0..n_grids).map(move |g| (t, g)))
        .collect();
    let coded = jobs
        .par_iter()
        .map(|&(t, g)| {
            let grid = gof.frames[t].grids().nth(g).expect("grid index");
            let qg = quantize_grid(grid, q)?;
            let model = models_for(&models, residual.as_ref(), t)
                .iter()
                .nth(g)
                .expect("model index");
            let (bytes, stats) = code_grid(&qg, model)?;
            Ok((qg.alphabet(), bytes, stats))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut chunks_bytes = Vec::with_capacity(gof.frames.len());
    let mut stats = Vec::with_capacity(gof.frames.len());
    for t in 0..gof.frames.len() {
        let mut payload = Writer(Vec::new());
        let mut st = Vec::with_capacity(n_grids);
        for g in 0..n_grids {
            let (alphabet, bytes, s) = &coded[t * n_grids + g];
            payload.u32(to_u32(*alphabet)?);
            payload.u32(to_u32(bytes.len())?);
            payload.0.extend_from_slice(bytes);
            st.push(*s);
        }
        let mut chunk = Writer(Vec::with_capacity(payload.0.len() + 8));
        chunk.u32(to_u32(payload.0.len())?);
        chunk.u32(crc32fast::hash(&payload.0));
        chunk.0.extend_from_slice(&payload.0);
        chunks_bytes.push(chunk.0);
        stats.push(st);
    }

    let mut h = Writer(Vec::new());
    h.0.extend_from_slice(&MAGIC);
    h.u16(VERSION);
    h.u32(to_u32(gof.frames.len())?);
    h.u32(to_u32(gof.first_frame)?);
    h.f64(q.q());
    let b = key.basis.bounds();
    b.min.iter().chain(&b.max).for_each(|&v| h.f64(v));
    h.u16(to_u16(key.basis.level_count())?);
    for (res, ch) in key.basis.shapes() {
        h.shape(res, ch)?;
    }
    h.shape(key.coeff.res(), key.coeff.channels())?;

    h.u8(net.sh_degree() as u8);
    h.u16(to_u16(net.sizes().len())?);
    for &s in net.sizes() {
        h.u32(to_u32(s)?);
    }
    h.f32s(net.params());

    h.models(Some(&models))?;
    h.models(residual.as_ref())?;

    for st in &stats {
        for s in st {
            h.i64(s.min_q);
        }
    }
    // Chunk table: header size is known once the table and CRC are accounted for.
    let table_len = gof.frames.len() * 12;
    let header_len = h.0.len() + table_len + 4;
    let mut offset = header_len as u64;
    let mut chunks = Vec::with_capacity(chunks_bytes.len());
    for c in &chunks_bytes {
        h.u64(offset);
        h.u32(to_u32(c.len())?);
        chunks.push((offset, c.len() as u32));
        offset += c.len() as u64;
    }
    let crc = crc32fast::hash(&h.0);
    h.u32(crc);
    debug_assert_eq!(h.0.len(), header_len);

    let mut bytes = h.0;
    for c in chunks_bytes {
        bytes.extend_from_slice(&c);
    }
    Ok(GofBitstream {
        bytes,
        header_len,
        chunks,
        stats,
    })
}

/// Everything stored ahead of the chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct GofHeader {
    pub frame_count: usize,
    pub first_frame: usize,
    pub q: QuantConfig,
    pub bounds: Aabb,
    pub level_shapes: Vec<([usize; 3], usize)>,
    pub coeff_shape: ([usize; 3], usize),
    pub net: ShadingNetwork,
    pub models: EntropyModelSet,
    pub residual_models: Option<EntropyModelSet>,
    /// `min_q[t][g]`.
    pub min_q: Vec<Vec<i64>>,
    pub chunks: Vec<(u64, u32)>,
    pub header_len: usize,
}

struct Parser<'r, R: Read> {
    r: &'r mut R,
    seen: Vec<u8>,
}

impl<R: Read> Parser<'_, R> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let start = self.seen.len();
        self.seen.resize(start + n, 0);
        self.r
            .read_exact(&mut self.seen[start..])
            .map_err(|_| Error::Format("bitstream header truncated".into()))?;
        Ok(&self.seen[start..])
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.arr::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.arr()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.arr()?))
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        ensure!(n <= 1 << 28, Format, "implausible parameter count {n}");
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
    fn models(&mut self, levels: usize) -> Result<Option<EntropyModelSet>> {
        let n = self.u16()? as usize;
        if n == 0 {
            return Ok(None);
        }
        ensure!(
            n == levels + 1,
            Format,
            "{n} entropy models for {levels} levels"
        );
        let mut models = Vec::with_capacity(n);
        for _ in 0..n {
            let ch = self.u32()? as usize;
            let nd = self.u8()? as usize;
            let dims = (0..nd)
                .map(|_| Ok(self.u8()? as usize))
                .collect::<Result<Vec<_>>>()?;
            let probe =
                EntropyModel::with_dims(1, &dims).map_err(|e| Error::Format(e.to_string()))?;
            let params = self.f32s(ch * probe.params_per_channel())?;
            models.push(
                EntropyModel::from_params(ch, dims, params)
                    .map_err(|e| Error::Format(e.to_string()))?,
            );
        }
        let coeff = models.pop().unwrap();
        Ok(Some(EntropyModelSet {
            basis: models,
            coeff,
        }))
    }

    fn shape(&mut self) -> Result<([usize; 3], usize)> {
        let r = [
            self.u32()? as usize,
            self.u32()? as usize,
            self.u32()? as usize,
        ];
        Ok((r, self.u32()? as usize))
    }
}

fn parse_header<R: Read>(r: &mut R) -> Result<GofHeader> {
    let mut p = Parser {
        r,
        seen: Vec::new(),
    };
    let magic: [u8; 4] = p.arr()?;
    ensure!(magic == MAGIC, Format, "not a .gof stream (bad magic)");
    let version = p.u16()?;
    ensure!(
        version == VERSION,
        Format,
        "unsupported .gof version {version} (expected {VERSION})"
    );
    let frame_count = p.u32()? as usize;
    ensure!(frame_count >= 1, Format, "group with no frames");
    let first_frame = p.u32()? as usize;
    let q = QuantConfig::new(p.f64()?).map_err(|e| Error::Format(e.to_string()))?;
    let min = [p.f64()?, p.f64()?, p.f64()?];
    let max = [p.f64()?, p.f64()?, p.f64()?];
    let bounds = Aabb::new(min, max).map_err(|e| Error::Format(e.to_string()))?;
    let levels = p.u16()? as usize;
    let level_shapes = (0..levels).map(|_| p.shape()).collect::<Result<Vec<_>>>()?;
    let coeff_shape = p.shape()?;

    let sh = p.u8()? as usize;
    let n_sizes = p.u16()? as usize;
    let sizes = (0..n_sizes)
        .map(|_| Ok(p.u32()? as usize))
        .collect::<Result<Vec<_>>>()?;
    ensure!(n_sizes >= 2, Format, "network with {n_sizes} layers");
    let count: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let net = ShadingNetwork::from_params(sizes, sh, p.f32s(count)?)
        .map_err(|e| Error::Format(e.to_string()))?;

    let models = p
        .models(levels)?
        .ok_or_else(|| Error::Format("keyframe entropy models missing".into()))?;
    let residual_models = p.models(levels)?;
    ensure!(
        residual_models.is_none() || frame_count > 1,
        Format,
        "residual entropy models in a group without residual frames"
    );

    let min_q = (0..frame_count)
        .map(|_| (0..=levels).map(|_| p.i64()).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let chunks = (0..frame_count)
        .map(|_| Ok((p.u64()?, p.u32()?)))
        .collect::<Result<Vec<_>>>()?;
    let expect = crc32fast::hash(&p.seen);
    let crc = p.u32()?;
    ensure!(crc == expect, Format, "header checksum mismatch");
    Ok(GofHeader {
        frame_count,
        first_frame,
        q,
        bounds,
        level_shapes,
        coeff_shape,
        net,
        models,
        residual_models,
        min_q,
        chunks,
        header_len: p.seen.len(),
    })
}

/// Random-access decoder: reads the header once, then only the chunks a
/// requested frame needs (its own and the keyframe's).
pub struct GofReader<R: Read + Seek> {
    inner: R,
    header: GofHeader,
    keyframe: Option<FrameRepresentation>,
}

impl<R: Read + Seek> GofReader<R> {
    pub fn open(mut inner: R) -> Result<Self> {
        inner
            .seek(SeekFrom::Start(0))
            .map_err(|e| Error::Format(format!("seek failed: {e}")))?;
        let header = parse_header(&mut inner)?;
        Ok(GofReader {
            inner,
            header,
            keyframe: None,
        })
    }

    pub fn header(&self) -> &GofHeader {
        &self.header
    }

    pub fn frame_count(&self) -> usize {
        self.header.frame_count
    }

    fn read_chunk(&mut self, t: usize) -> Result<Vec<u8>> {
        let (offset, len) = self.header.chunks[t];
        ensure!(len >= 8, Format, "chunk {t} too short");
        self.inner
            .seek(SeekFrom::Start(offset))
            .map_err(|e| Error::Format(format!("seek failed: {e}")))?;
        let mut buf = vec![0u8; len as usize];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| Error::Format(format!("chunk {t} truncated")))?;
        let plen = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
        let crc = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        ensure!(plen + 8 == buf.len(), Format, "chunk {t} length mismatch");
        ensure!(
            crc32fast::hash(&buf[8..]) == crc,
            Format,
            "chunk {t} checksum mismatch"
        );
        buf.drain(..8);
        Ok(buf)
    }

    fn decode_chunk(&mut self, t: usize) -> Result<FrameRepresentation> {
        let payload = self.read_chunk(t)?;
        let h = &self.header;
        let shapes: Vec<([usize; 3], usize)> = h
            .level_shapes
            .iter()
            .copied()
            .chain(std::iter::once(h.coeff_shape))
            .collect();
        let models: Vec<&EntropyModel> = models_for(&h.models, h.residual_models.as_ref(), t)
            .iter()
            .collect();
        let mut pos = 0usize;
        let mut grids = Vec::with_capacity(shapes.len());
        for (g, &(res, ch)) in shapes.iter().enumerate() {
            ensure!(
                pos + 8 <= payload.len(),
                Format,
                "grid {g} of chunk {t} truncated"
            );
            let alphabet = u32::from_le_bytes(payload[pos..pos + 4].try_into().unwrap()) as usize;
            let n = u32::from_le_bytes(payload[pos + 4..pos + 8].try_into().unwrap()) as usize;
            pos += 8;
            ensure!(
                pos + n <= payload.len(),
                Format,
                "grid {g} of chunk {t} truncated"
            );
            ensure!(
                (1..=super::freq::FREQ_TOTAL as usize).contains(&alphabet),
                Format,
                "grid {g} of chunk {t}: bad alphabet size {alphabet}"
            );
            let min_q = h.min_q[t][g];
            let tables = tables_for(models[g], alphabet, min_q)?;
            let count = res[0] * res[1] * res[2] * ch;
            let symbols = range_decode(&payload[pos..pos + n], &tables, count)?;
            pos += n;
            let qg = QuantizedGrid {
                res,
                channels: ch,
                bounds: h.bounds,
                q: h.q,
                min_q,
                symbols,
            };
            grids.push(dequantize_grid(&qg)?);
        }
        ensure!(pos == payload.len(), Format, "chunk {t} has trailing bytes");
        let coeff: FeatureGrid = grids.pop().unwrap();
        let basis = MultiResBasis::new(grids)?;
        let kind = if t == 0 {
            FrameKind::Keyframe
        } else {
            FrameKind::Residual
        };
        FrameRepresentation::new(kind, basis, coeff, t + 1)
    }

    /// Dequantized frame `t` (0-based within the group).
    pub fn frame(&mut self, t: usize) -> Result<FrameRepresentation> {
        ensure!(
            t < self.header.frame_count,
            Structure,
            "frame {t} outside group of {}",
            self.header.frame_count
        );
        if t == 0 {
            if self.keyframe.is_none() {
                self.keyframe = Some(self.decode_chunk(0)?);
            }
            return Ok(self.keyframe.clone().unwrap());
        }
        self.decode_chunk(t)
    }

    /// Renderable field of frame `t`: decodes the keyframe (once) and chunk `t`.
    pub fn frame_field(&mut self, t: usize) -> Result<FrameField> {
        let key = self.frame(0)?;
        let f = if t == 0 { key.clone() } else { self.frame(t)? };
        FrameField::new(&f, &key.basis, &self.header.net)
    }

    /// Decodes every frame.
    pub fn decode_all(&mut self) -> Result<GofRepresentation> {
        let frames = (0..self.header.frame_count)
            .map(|t| self.frame(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(GofRepresentation {
            first_frame: self.header.first_frame,
            net: self.header.net.clone(),
            models: self.header.models.clone(),
            residual_models: self.header.residual_models.clone(),
            frames,
        })
    }
}

pub fn decode_gof(bytes: &[u8]) -> Result<GofRepresentation> {
    GofReader::open(std::io::Cursor::new(bytes))?.decode_all()
}

/// The group a decoder reconstructs, without going through bytes:
/// every grid quantized at `q`, network and models at f32 precision.
pub fn reconstruct_gof(gof: &GofRepresentation, q: QuantConfig) -> Result<GofRepresentation> {
    gof.validate()?;
    let (net, models, residual_models) = stored_params(gof);
    let frames = gof
        .frames
        .iter()
        .map(|f| {
            let levels = f
                .basis
                .levels()
                .iter()
                .map(|g| super::quantize::reconstruct_grid(g, q))
                .collect::<Result<Vec<_>>>()?;
            FrameRepresentation::new(
                f.kind,
                MultiResBasis::new(levels)?,
                super::quantize::reconstruct_grid(&f.coeff, q)?,
                f.frame_index,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GofRepresentation {
        first_frame: gof.first_frame,
        net,
        models,
        residual_models,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;
    use std::io::Cursor;
    use std::rc::Rc;

    pub(crate) fn random_gof(rng: &mut ChaCha8Rng, frames: usize) -> GofRepresentation {
        let bounds = Aabb::cube(1.0);
        let shapes = [([2, 3, 2], 2), ([3, 4, 3], 1)];
        let mk_basis = |rng: &mut ChaCha8Rng, amp: f64| {
            MultiResBasis::new(
                shapes
                    .iter()
                    .map(|&(r, c)| FeatureGrid::uniform(r, c, bounds, amp, rng).unwrap())
                    .collect(),
            )
            .unwrap()
        };
        let key = FrameRepresentation::new(
            FrameKind::Keyframe,
            mk_basis(rng, 0.8),
            FeatureGrid::uniform([3, 2, 2], 3, bounds, 0.8, rng).unwrap(),
            1,
        )
        .unwrap();
        let mut fs = vec![key];
        for t in 1..frames {
            fs.push(
                FrameRepresentation::new(
                    FrameKind::Residual,
                    mk_basis(rng, 0.1),
                    FeatureGrid::uniform([3, 2, 2], 3, bounds, 0.8, rng).unwrap(),
                    t + 1,
                )
                .unwrap(),
            );
        }
        let net = ShadingNetwork::new(3, &[8], 2, 0.5, rng).unwrap();
        let mk_models = |rng: &mut ChaCha8Rng| {
            let mut models = EntropyModelSet::new(&[2, 1], 3).unwrap();
            for m in models.iter_mut() {
                let jitter: Vec<f64> = (0..m.param_count())
                    .map(|_| rng.gen_range(-0.3..0.3))
                    .collect();
                m.update_params(|p| p.iter_mut().zip(&jitter).for_each(|(a, b)| *a += b));
            }
            models
        };
        let models = mk_models(rng);
        let residual_models = (frames > 1).then(|| mk_models(rng));
        GofRepresentation {
            first_frame: 0,
            net,
            models,
            residual_models,
            frames: fs,
        }
    }

    #[test]
    fn roundtrip_matches_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gof = random_gof(&mut rng, 4);
        let q = QuantConfig::new(5.0).unwrap();
        let bs = encode_gof(&gof, q).unwrap();
        let dec = decode_gof(&bs.bytes).unwrap();
        assert_eq!(dec, reconstruct_gof(&gof, q).unwrap());
        let total: usize = bs.header_len + bs.chunks.iter().map(|c| c.1 as usize).sum::<usize>();
        assert_eq!(total, bs.len());
        let stored = GofBitstream::from_bytes(bs.bytes.clone()).unwrap();
        assert_eq!(
            (stored.header_len, &stored.chunks),
            (bs.header_len, &bs.chunks)
        );
        assert!(GofBitstream::from_bytes(bs.bytes[..bs.len() - 1].to_vec()).is_err());
    }

    #[test]
    fn single_frame_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gof = random_gof(&mut rng, 1);
        let bs = encode_gof(&gof, QuantConfig::new(2.0).unwrap()).unwrap();
        assert_eq!(bs.chunks.len(), 1);
        let dec = decode_gof(&bs.bytes).unwrap();
        assert_eq!(dec.frames.len(), 1);
        let field = dec.frame_field(0).unwrap();
        let cam = crate::render::Camera::look_at(
            crate::render::Intrinsics {
                fx: 6.0,
                fy: 6.0,
                cx: 3.0,
                cy: 3.0,
                width: 6,
                height: 6,
            },
            [0.0, 0.0, 3.0],
            [0.0; 3],
            [0.0, 1.0, 0.0],
        )
        .unwrap();
        let cfg = crate::render::RenderConfig {
            samples: 8,
            ..Default::default()
        };
        crate::render::render_image(&field, &cam, &cfg).unwrap();
    }

    #[test]
    fn bad_magic_and_version() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gof = random_gof(&mut rng, 2);
        let bs = encode_gof(&gof, QuantConfig::new(1.0).unwrap()).unwrap();
        let mut b = bs.bytes.clone();
        b[0] = b'X';
        assert!(matches!(decode_gof(&b), Err(Error::Format(_))));
        let mut b = bs.bytes.clone();
        b[4] = 9;
        assert!(matches!(decode_gof(&b), Err(Error::Format(ref m)) if m.contains("version")));
    }

    #[test]
    fn corruption_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gof = random_gof(&mut rng, 3);
        let bs = encode_gof(&gof, QuantConfig::new(5.0).unwrap()).unwrap();
        for pos in [20, bs.header_len - 2, bs.header_len + 9, bs.len() - 1] {
            let mut b = bs.bytes.clone();
            b[pos] ^= 0x40;
            assert!(decode_gof(&b).is_err(), "flip at {pos} undetected");
        }
        assert!(decode_gof(&bs.bytes[..bs.len() - 3]).is_err());
    }

    /// Records every byte range read through it.
    struct Traced {
        inner: Cursor<Vec<u8>>,
        log: Rc<RefCell<Vec<(u64, usize)>>>,
    }

    impl Read for Traced {
        fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
            let pos = self.inner.position();
            let n = self.inner.read(buf)?;
            self.log.borrow_mut().push((pos, n));
            Ok(n)
        }
    }

    impl Seek for Traced {
        fn seek(&mut self, p: SeekFrom) -> std::io::Result<u64> {
            self.inner.seek(p)
        }
    }

    #[test]
    fn random_access_touches_only_needed_chunks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gof = random_gof(&mut rng, 5);
        let bs = encode_gof(&gof, QuantConfig::new(10.0).unwrap()).unwrap();
        let expect = decode_gof(&bs.bytes).unwrap();
        for t in 1..5 {
            let log = Rc::new(RefCell::new(Vec::new()));
            let mut r = GofReader::open(Traced {
                inner: Cursor::new(bs.bytes.clone()),
                log: log.clone(),
            })
            .unwrap();
            let f = r.frame(t).unwrap();
            r.frame(0).unwrap();
            assert_eq!(f, expect.frames[t]);
            let allowed = |a: u64, n: usize| {
                let end = a + n as u64;
                let inside = |(o, l): (u64, u32)| a >= o && end <= o + l as u64;
                end <= bs.header_len as u64 || inside(bs.chunks[0]) || inside(bs.chunks[t])
            };
            for &(a, n) in log.borrow().iter() {
                assert!(
                    allowed(a, n),
                    "frame {t}: read {a}+{n} outside header/key/chunk"
                );
            }
        }
    }

    #[test]
    fn payload_tracks_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gof = random_gof(&mut rng, 2);
        let bs = encode_gof(&gof, QuantConfig::new(10.0).unwrap()).unwrap();
        for s in bs.stats.iter().flatten() {
            assert!((s.payload_bytes * 8) as f64 <= s.table_bits + 32.0, "{s:?}");
        }
    }
}
