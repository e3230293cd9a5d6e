//! Versioned binary checkpoints: model config, named f32 tensors, optimizer
//! state, iteration counter and data-stream position. All integers and
//! floats are little-endian, so files are byte-stable across platforms of
//! the same endianness.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use lenxfer_core::model::{AdamHyper, Mat, OptimizerState};
use lenxfer_core::{ModelConfig, ModelParams, PosMode};

const MAGIC: &[u8; 8] = b"LXFCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug)]
pub enum CheckpointError {
    Io(io::Error),
    /// Truncated or structurally invalid file.
    Corrupt(&'static str),
    VersionMismatch {
        found: u32,
        expected: u32,
    },
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "checkpoint io: {e}"),
            CheckpointError::Corrupt(what) => write!(f, "corrupt checkpoint: {what}"),
            CheckpointError::VersionMismatch { found, expected } => {
                write!(f, "checkpoint version {found}, this build reads {expected}")
            }
        }
    }
}

impl std::error::Error for CheckpointError {}

impl From<io::Error> for CheckpointError {
    fn from(e: io::Error) -> Self {
        CheckpointError::Io(e)
    }
}

/// Everything needed to resume a run exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub opt: OptimizerState<f32>,
    /// Completed training iterations.
    pub iter: u64,
    pub data_seed: u64,
    pub model_seed: u64,
}

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.0.write_all(&v.to_le_bytes())
    }
    fn str(&mut self, s: &str) -> io::Result<()> {
        self.u32(s.len() as u32)?;
        self.0.write_all(s.as_bytes())
    }
    fn mat(&mut self, m: &Mat<f32>) -> io::Result<()> {
        self.u32(m.rows as u32)?;
        self.u32(m.cols as u32)?;
        for &x in &m.data {
            self.0.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let mut buf = [0u8; N];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| CheckpointError::Corrupt("unexpected end of file"))?;
        Ok(buf)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let len = self.u32()? as usize;
        if len > 1 << 16 {
            return Err(CheckpointError::Corrupt("oversized string"));
        }
        let mut buf = vec![0u8; len];
        self.0
            .read_exact(&mut buf)
            .map_err(|_| CheckpointError::Corrupt("unexpected end of file"))?;
        String::from_utf8(buf).map_err(|_| CheckpointError::Corrupt("non-utf8 string"))
    }
    fn mat_into(&mut self, m: &mut Mat<f32>) -> Result<(), CheckpointError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        if rows != m.rows || cols != m.cols {
            return Err(CheckpointError::Corrupt("tensor shape mismatch"));
        }
        for x in m.data.iter_mut() {
            *x = f32::from_le_bytes(self.bytes()?);
        }
        Ok(())
    }
}

fn write_params<W: Write>(w: &mut Writer<W>, p: &ModelParams<f32>) -> io::Result<()> {
    w.u32(p.tensor_count() as u32)?;
    for idx in 0..p.tensor_count() {
        w.str(&p.tensor_name(idx))?;
        w.mat(p.tensor(idx))?;
    }
    Ok(())
}

fn read_params<R: Read>(
    r: &mut Reader<R>,
    config: &ModelConfig,
) -> Result<ModelParams<f32>, CheckpointError> {
    let mut p = ModelParams::<f32>::zeros(config);
    let count = r.u32()? as usize;
    if count != p.tensor_count() {
        return Err(CheckpointError::Corrupt("tensor count mismatch"));
    }
    for idx in 0..count {
        let name = r.str()?;
        if name != p.tensor_name(idx) {
            return Err(CheckpointError::Corrupt("tensor name mismatch"));
        }
        r.mat_into(p.tensor_mut(idx))?;
    }
    Ok(p)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let tmp = path.with_extension("tmp");
    {
        let file = fs::File::create(&tmp)?;
        let mut w = Writer(io::BufWriter::new(file));
        w.0.write_all(MAGIC)?;
        w.u32(VERSION)?;

        let c = &ckpt.params.config;
        w.u32(c.layers as u32)?;
        w.u32(c.heads as u32)?;
        w.u32(c.embed_dim as u32)?;
        w.u32(c.vocab_size as u32)?;
        w.u32(c.max_seq_len as u32)?;
        w.u32(match c.pos_mode {
            PosMode::Rope => 0,
            PosMode::Nope => 1,
        })?;
        w.f64(c.rope_base)?;
        w.u32(c.mlp_hidden as u32)?;
        w.f64(c.rms_eps)?;

        w.u64(ckpt.iter)?;
        w.u64(ckpt.data_seed)?;
        w.u64(ckpt.model_seed)?;
        w.u64(ckpt.opt.step)?;
        w.f64(ckpt.opt.hyper.beta1)?;
        w.f64(ckpt.opt.hyper.beta2)?;
        w.f64(ckpt.opt.hyper.eps)?;
        w.f64(ckpt.opt.hyper.weight_decay)?;

        write_params(&mut w, &ckpt.params)?;
        write_params(&mut w, &ckpt.opt.m)?;
        write_params(&mut w, &ckpt.opt.v)?;
        w.0.write_all(MAGIC)?; // end marker for truncation detection
        w.0.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let file = fs::File::open(path)?;
    let mut r = Reader(io::BufReader::new(file));
    let magic: [u8; 8] = r.bytes()?;
    if &magic != MAGIC {
        return Err(CheckpointError::Corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }

    let layers = r.u32()? as usize;
    let heads = r.u32()? as usize;
    let embed_dim = r.u32()? as usize;
    let vocab_size = r.u32()? as usize;
    let max_seq_len = r.u32()? as usize;
    let pos_mode = match r.u32()? {
        0 => PosMode::Rope,
        1 => PosMode::Nope,
        _ => return Err(CheckpointError::Corrupt("bad position mode")),
    };
    let rope_base = r.f64()?;
    let mlp_hidden = r.u32()? as usize;
    let rms_eps = r.f64()?;
    let config = ModelConfig {
        layers,
        heads,
        embed_dim,
        vocab_size,
        max_seq_len,
        pos_mode,
        rope_base,
        mlp_hidden,
        rms_eps,
    };
    config
        .validate()
        .map_err(|_| CheckpointError::Corrupt("invalid config"))?;

    let iter = r.u64()?;
    let data_seed = r.u64()?;
    let model_seed = r.u64()?;
    let opt_step = r.u64()?;
    let hyper = AdamHyper {
        beta1: r.f64()?,
        beta2: r.f64()?,
        eps: r.f64()?,
        weight_decay: r.f64()?,
    };

    let params = read_params(&mut r, &config)?;
    let m = read_params(&mut r, &config)?;
    let v = read_params(&mut r, &config)?;
    let tail: [u8; 8] = r.bytes()?;
    if &tail != MAGIC {
        return Err(CheckpointError::Corrupt("missing end marker"));
    }

    Ok(Checkpoint {
        params,
        opt: OptimizerState {
            m,
            v,
            step: opt_step,
            hyper,
        },
        iter,
        data_seed,
        model_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lenxfer_core::model::init_params;

    fn sample_checkpoint() -> Checkpoint {
        let mut config = ModelConfig::sized(2, 2, 16);
        config.vocab_size = 11;
        let params: ModelParams<f32> = init_params(&config, 3);
        let mut opt = OptimizerState::new(&params, AdamHyper::default());
        opt.step = 17;
        *opt.m.embed.at_mut(1, 2) = 0.5;
        Checkpoint {
            params,
            opt,
            iter: 42,
            data_seed: 7,
            model_seed: 3,
        }
    }

    #[test]
    fn round_trip_is_bitwise_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        let ckpt = sample_checkpoint();
        save_checkpoint(&ckpt, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, ckpt);
        // and the file itself is stable
        let bytes1 = std::fs::read(&path).unwrap();
        save_checkpoint(&ckpt, &path).unwrap();
        assert_eq!(bytes1, std::fs::read(&path).unwrap());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Corrupt(_))
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&sample_checkpoint(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 99; // version field follows the magic
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn garbage_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::Corrupt(_))
        ));
    }
}
