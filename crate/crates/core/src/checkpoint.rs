//! Checkpoint archives: one gzip stream holding a magic tag, the network
//! configuration as TOML, free-form metadata text, and named weight sets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use strokeseg_autograd::{Dims, Tensor};

use crate::adapt::teacher_config;
use crate::config::NetworkConfig;
use crate::error::{CoreError, Result};
use crate::network::NetworkWeights;

const MAGIC: &[u8; 8] = b"STRKSEG\x01";

/// Weight set written by supervised training.
pub const MODEL: &str = "model";
pub const STUDENT: &str = "student";
pub const TEACHER: &str = "teacher";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    /// Training configuration snapshot or other provenance text.
    pub meta: String,
    pub sets: BTreeMap<String, BTreeMap<String, Tensor>>,
}

impl Checkpoint {
    pub fn single(weights: &NetworkWeights, meta: impl Into<String>) -> Self {
        let sets = BTreeMap::from([(MODEL.to_string(), weights.params.clone())]);
        Self { config: weights.config.clone(), meta: meta.into(), sets }
    }

    pub fn mean_teacher(student: &NetworkWeights, teacher: &NetworkWeights, meta: impl Into<String>) -> Self {
        let sets = BTreeMap::from([(STUDENT.to_string(), student.params.clone()), (TEACHER.to_string(), teacher.params.clone())]);
        Self { config: student.config.clone(), meta: meta.into(), sets }
    }

    /// The weights used for prediction: the teacher when present, else the
    /// single model.
    pub fn inference_weights(&self) -> Result<NetworkWeights> {
        if let Some(p) = self.sets.get(TEACHER) {
            return NetworkWeights::from_params(teacher_config(&self.config), p.clone());
        }
        self.weights(MODEL)
    }

    pub fn weights(&self, set: &str) -> Result<NetworkWeights> {
        let p = self.sets.get(set).ok_or_else(|| CoreError::KeyMismatch(format!("no weight set {set:?}")))?;
        let config = if set == TEACHER { teacher_config(&self.config) } else { self.config.clone() };
        NetworkWeights::from_params(config, p.clone())
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CoreError + '_ {
    move |source| CoreError::Io { path: path.display().to_string(), source }
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(s.len() as u64)?;
    w.write_all(s.as_bytes())
}

fn read_str(r: &mut impl Read) -> std::io::Result<String> {
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let config = toml::to_string(&ckpt.config).map_err(|e| CoreError::Config(e.to_string()))?;
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = GzEncoder::new(BufWriter::new(file), Compression::fast());
    let mut body = || -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        write_str(&mut w, &config)?;
        write_str(&mut w, &ckpt.meta)?;
        w.write_u32::<LittleEndian>(ckpt.sets.len() as u32)?;
        for (set, params) in &ckpt.sets {
            write_str(&mut w, set)?;
            w.write_u32::<LittleEndian>(params.len() as u32)?;
            for (name, t) in params {
                write_str(&mut w, name)?;
                for d in t.dims().as_array() {
                    w.write_u64::<LittleEndian>(d as u64)?;
                }
                for v in t.data() {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
        }
        Ok(())
    };
    body().map_err(io_err(path))?;
    w.finish().and_then(|mut b| b.flush()).map_err(io_err(path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bad = |reason: String| CoreError::Checkpoint { path: path.display().to_string(), reason };
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = GzDecoder::new(BufReader::new(file));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| bad(e.to_string()))?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint archive".into()));
    }
    let mut body = || -> std::io::Result<(String, String, BTreeMap<String, BTreeMap<String, Tensor>>)> {
        let config = read_str(&mut r)?;
        let meta = read_str(&mut r)?;
        let mut sets = BTreeMap::new();
        for _ in 0..r.read_u32::<LittleEndian>()? {
            let set = read_str(&mut r)?;
            let mut params = BTreeMap::new();
            for _ in 0..r.read_u32::<LittleEndian>()? {
                let name = read_str(&mut r)?;
                let mut dims = [0usize; 5];
                for d in &mut dims {
                    *d = r.read_u64::<LittleEndian>()? as usize;
                }
                let dims = Dims::from_array(dims);
                let mut data = vec![0.0; dims.numel()];
                r.read_f64_into::<LittleEndian>(&mut data)?;
                let t = Tensor::new(dims, data).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
                params.insert(name, t);
            }
            sets.insert(set, params);
        }
        Ok((config, meta, sets))
    };
    let (config, meta, sets) = body().map_err(|e| bad(e.to_string()))?;
    let config: NetworkConfig = toml::from_str(&config).map_err(|e| bad(e.to_string()))?;
    let ckpt = Checkpoint { config, meta, sets };
    for set in ckpt.sets.keys() {
        ckpt.weights(set)?;
    }
    Ok(ckpt)
}
