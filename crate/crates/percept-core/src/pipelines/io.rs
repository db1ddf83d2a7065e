//! Model persistence.
//!
//! Layout (integers and floats little-endian):
//!
//! ```text
//! "PRCP"  magic
//! u32     format version (1)
//! str     task tag ("eye" | "fer" | "speaker")
//! u32 n + u32 dims...           input shape
//! u32 count, then per layer     u8 kind tag + kind fields
//! u32 count, then per label     str name
//! u32 count, then per tensor    str name, u32 ndim, u32 dims..., f32 data
//! ```
//!
//! `str` is a u32 byte length plus UTF-8 bytes. Parameter tensors are named
//! `layer{idx}.{name}`; speaker models add reserved `frontend.config` and
//! `scaler.{mean,std}.{hi,lo}` tensors carrying the MFCC geometry and the
//! standard scaler. Scaler values are stored as f32 pairs (value, residue)
//! so the reconstructed f64s match the training run's exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use crate::audio::{FeatureScaler, MfccConfig};
use crate::nn::{LayerParams, LayerSpec, Padding, LSTM_GATES};
use crate::tensor::Tensor;

use super::{PipelineError, SpeakerFrontend, Task, TrainedModel};

pub const MODEL_MAGIC: [u8; 4] = *b"PRCP";
pub const MODEL_VERSION: u32 = 1;

const MAX_STR: usize = 1 << 16;
const MAX_RANK: usize = 8;
const MAX_ELEMENTS: usize = 1 << 28;

/// Split an f64 into an f32 pair that reconstructs via [`join_f64`] with at
/// most ~2^-49 relative error.
pub(crate) fn split_f64(x: f64) -> (f32, f32) {
    let hi = x as f32;
    let lo = (x - f64::from(hi)) as f32;
    (hi, lo)
}

pub(crate) fn join_f64(hi: f32, lo: f32) -> f64 {
    f64::from(hi) + f64::from(lo)
}

/// The nearest value to `x` exactly representable as an f32 pair.
pub(crate) fn snap_f64(x: f64) -> f64 {
    let (hi, lo) = split_f64(x);
    join_f64(hi, lo)
}

/// Round the fractional fields through f32, the precision the model file
/// stores them at. Applied before featurization so a training run and a
/// reloaded model share the exact frame geometry.
pub fn quantize_mfcc(cfg: &MfccConfig) -> MfccConfig {
    MfccConfig {
        frame_len_ms: f64::from(cfg.frame_len_ms as f32),
        hop_ms: f64::from(cfg.hop_ms as f32),
        fmin: f64::from(cfg.fmin as f32),
        fmax: cfg.fmax.map(|v| f64::from(v as f32)),
        ..cfg.clone()
    }
}

// ---------------------------------------------------------------- writing

fn write_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

fn write_dims(w: &mut impl Write, dims: &[usize]) -> std::io::Result<()> {
    write_u32(w, dims.len() as u32)?;
    for &d in dims {
        write_u32(w, d as u32)?;
    }
    Ok(())
}

fn write_tensor(w: &mut impl Write, name: &str, dims: &[usize], data: &[f32]) -> std::io::Result<()> {
    write_str(w, name)?;
    write_dims(w, dims)?;
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_spec(w: &mut impl Write, spec: &LayerSpec) -> std::io::Result<()> {
    match *spec {
        LayerSpec::Conv2D {
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
        } => {
            w.write_all(&[0])?;
            for v in [out_channels, kernel_h, kernel_w, stride] {
                write_u32(w, v as u32)?;
            }
            w.write_all(&[matches!(padding, Padding::Same) as u8])?;
        }
        LayerSpec::MaxPool2D { pool_h, pool_w } => {
            w.write_all(&[1])?;
            write_u32(w, pool_h as u32)?;
            write_u32(w, pool_w as u32)?;
        }
        LayerSpec::Dense { units } => {
            w.write_all(&[2])?;
            write_u32(w, units as u32)?;
        }
        LayerSpec::ReLU => w.write_all(&[3])?,
        LayerSpec::Softmax => w.write_all(&[4])?,
        LayerSpec::Dropout { rate } => {
            w.write_all(&[5])?;
            w.write_all(&rate.to_le_bytes())?;
        }
        LayerSpec::BatchNorm { momentum, epsilon } => {
            w.write_all(&[6])?;
            w.write_all(&momentum.to_le_bytes())?;
            w.write_all(&epsilon.to_le_bytes())?;
        }
        LayerSpec::Flatten => w.write_all(&[7])?,
        LayerSpec::Lstm {
            units,
            return_sequence,
        } => {
            w.write_all(&[8])?;
            write_u32(w, units as u32)?;
            w.write_all(&[return_sequence as u8])?;
        }
    }
    Ok(())
}

fn frontend_config_values(f: &SpeakerFrontend) -> [f32; 8] {
    [
        f.mfcc.frame_len_ms as f32,
        f.mfcc.hop_ms as f32,
        f.mfcc.n_mels as f32,
        f.mfcc.n_coeffs as f32,
        f.mfcc.fft_size.map_or(0.0, |v| v as f32),
        f.mfcc.fmin as f32,
        f.mfcc.fmax.map_or(-1.0, |v| v as f32),
        f.frames as f32,
    ]
}

/// Serialize a model. The model is validated first; an inconsistent one is
/// rejected rather than written.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<(), PipelineError> {
    model.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&MODEL_MAGIC)?;
    write_u32(&mut w, MODEL_VERSION)?;
    write_str(&mut w, model.task.as_str())?;
    write_dims(&mut w, &model.input_shape)?;

    write_u32(&mut w, model.specs.len() as u32)?;
    for spec in &model.specs {
        write_spec(&mut w, spec)?;
    }

    write_u32(&mut w, model.label_names.len() as u32)?;
    for name in &model.label_names {
        write_str(&mut w, name)?;
    }

    let named: Vec<(String, &Tensor)> = model
        .params
        .iter()
        .enumerate()
        .flat_map(|(idx, p)| {
            p.named()
                .into_iter()
                .map(move |(name, t)| (format!("layer{idx}.{name}"), t))
        })
        .collect();
    let reserved = if model.frontend.is_some() { 5 } else { 0 };
    write_u32(&mut w, (named.len() + reserved) as u32)?;
    for (name, tensor) in named {
        write_tensor(&mut w, &name, tensor.dims(), tensor.data())?;
    }
    if let Some(frontend) = &model.frontend {
        write_tensor(&mut w, "frontend.config", &[8], &frontend_config_values(frontend))?;
        let n = frontend.scaler.mean.len();
        for (name, values) in [
            ("scaler.mean", &frontend.scaler.mean),
            ("scaler.std", &frontend.scaler.std),
        ] {
            let (hi, lo): (Vec<f32>, Vec<f32>) = values.iter().map(|&v| split_f64(v)).unzip();
            write_tensor(&mut w, &format!("{name}.hi"), &[n], &hi)?;
            write_tensor(&mut w, &format!("{name}.lo"), &[n], &lo)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- reading

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<(), PipelineError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            PipelineError::Truncated
        } else {
            PipelineError::Io(e)
        }
    })
}

fn read_u8(r: &mut impl Read) -> Result<u8, PipelineError> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32, PipelineError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32, PipelineError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_str(r: &mut impl Read) -> Result<String, PipelineError> {
    let len = read_u32(r)? as usize;
    if len > MAX_STR {
        return Err(PipelineError::Corrupt(format!(
            "string length {len} exceeds {MAX_STR}"
        )));
    }
    let mut buf = vec![0u8; len];
    read_exact(r, &mut buf)?;
    String::from_utf8(buf).map_err(|_| PipelineError::Corrupt("non-UTF-8 string".into()))
}

fn read_dims(r: &mut impl Read) -> Result<Vec<usize>, PipelineError> {
    let ndim = read_u32(r)? as usize;
    if ndim > MAX_RANK {
        return Err(PipelineError::Corrupt(format!("rank {ndim} exceeds {MAX_RANK}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(read_u32(r)? as usize);
    }
    Ok(dims)
}

fn read_tensor(r: &mut impl Read) -> Result<(String, Tensor), PipelineError> {
    let name = read_str(r)?;
    let dims = read_dims(r)?;
    let len: usize = dims.iter().product();
    if len > MAX_ELEMENTS {
        return Err(PipelineError::Corrupt(format!(
            "tensor '{name}' claims {len} elements"
        )));
    }
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(read_f32(r)?);
    }
    match Tensor::from_vec(dims, data) {
        Ok(t) => Ok((name, t)),
        Err(e) => Err(PipelineError::Corrupt(format!("tensor '{name}': {e}"))),
    }
}

fn read_spec(r: &mut impl Read) -> Result<LayerSpec, PipelineError> {
    let tag = read_u8(r)?;
    Ok(match tag {
        0 => LayerSpec::Conv2D {
            out_channels: read_u32(r)? as usize,
            kernel_h: read_u32(r)? as usize,
            kernel_w: read_u32(r)? as usize,
            stride: read_u32(r)? as usize,
            padding: if read_u8(r)? == 1 {
                Padding::Same
            } else {
                Padding::Valid
            },
        },
        1 => LayerSpec::MaxPool2D {
            pool_h: read_u32(r)? as usize,
            pool_w: read_u32(r)? as usize,
        },
        2 => LayerSpec::Dense {
            units: read_u32(r)? as usize,
        },
        3 => LayerSpec::ReLU,
        4 => LayerSpec::Softmax,
        5 => LayerSpec::Dropout { rate: read_f32(r)? },
        6 => LayerSpec::BatchNorm {
            momentum: read_f32(r)?,
            epsilon: read_f32(r)?,
        },
        7 => LayerSpec::Flatten,
        8 => LayerSpec::Lstm {
            units: read_u32(r)? as usize,
            return_sequence: read_u8(r)? == 1,
        },
        other => {
            return Err(PipelineError::Corrupt(format!("unknown layer tag {other}")))
        }
    })
}

fn take(
    tensors: &mut HashMap<String, Tensor>,
    name: &str,
) -> Result<Tensor, PipelineError> {
    tensors
        .remove(name)
        .ok_or_else(|| PipelineError::Corrupt(format!("missing tensor '{name}'")))
}

fn take4(
    tensors: &mut HashMap<String, Tensor>,
    idx: usize,
    prefix: &str,
) -> Result<[Tensor; 4], PipelineError> {
    let mut out = Vec::with_capacity(4);
    for gate in LSTM_GATES {
        out.push(take(tensors, &format!("layer{idx}.{prefix}_{gate}"))?);
    }
    Ok(out.try_into().expect("four gates"))
}

fn assemble_params(
    specs: &[LayerSpec],
    tensors: &mut HashMap<String, Tensor>,
) -> Result<Vec<LayerParams>, PipelineError> {
    specs
        .iter()
        .enumerate()
        .map(|(idx, spec)| {
            Ok(match spec {
                LayerSpec::Conv2D { .. } => LayerParams::Conv2D {
                    kernels: take(tensors, &format!("layer{idx}.kernels"))?,
                    bias: take(tensors, &format!("layer{idx}.bias"))?,
                },
                LayerSpec::Dense { .. } => LayerParams::Dense {
                    weight: take(tensors, &format!("layer{idx}.weight"))?,
                    bias: take(tensors, &format!("layer{idx}.bias"))?,
                },
                LayerSpec::BatchNorm { .. } => LayerParams::BatchNorm {
                    gamma: take(tensors, &format!("layer{idx}.gamma"))?,
                    beta: take(tensors, &format!("layer{idx}.beta"))?,
                    running_mean: take(tensors, &format!("layer{idx}.running_mean"))?,
                    running_var: take(tensors, &format!("layer{idx}.running_var"))?,
                },
                LayerSpec::Lstm { .. } => LayerParams::Lstm {
                    w: take4(tensors, idx, "w")?,
                    u: take4(tensors, idx, "u")?,
                    b: take4(tensors, idx, "b")?,
                },
                _ => LayerParams::None,
            })
        })
        .collect()
}

fn scaler_column(
    tensors: &mut HashMap<String, Tensor>,
    name: &str,
) -> Result<Vec<f64>, PipelineError> {
    let hi = take(tensors, &format!("{name}.hi"))?;
    let lo = take(tensors, &format!("{name}.lo"))?;
    if hi.dims() != lo.dims() {
        return Err(PipelineError::Corrupt(format!("'{name}' pair shape mismatch")));
    }
    Ok(hi
        .data()
        .iter()
        .zip(lo.data())
        .map(|(&h, &l)| join_f64(h, l))
        .collect())
}

fn decode_frontend(
    tensors: &mut HashMap<String, Tensor>,
) -> Result<SpeakerFrontend, PipelineError> {
    let config = take(tensors, "frontend.config")?;
    let v = config.data();
    if v.len() != 8 {
        return Err(PipelineError::Corrupt(format!(
            "frontend.config holds {} values, expected 8",
            v.len()
        )));
    }
    let mfcc = MfccConfig {
        frame_len_ms: f64::from(v[0]),
        hop_ms: f64::from(v[1]),
        n_mels: v[2] as usize,
        n_coeffs: v[3] as usize,
        fft_size: (v[4] > 0.0).then(|| v[4] as usize),
        fmin: f64::from(v[5]),
        fmax: (v[6] >= 0.0).then(|| f64::from(v[6])),
    };
    Ok(SpeakerFrontend {
        mfcc,
        frames: v[7] as usize,
        scaler: FeatureScaler {
            mean: scaler_column(tensors, "scaler.mean")?,
            std: scaler_column(tensors, "scaler.std")?,
        },
    })
}

/// Read a model back. Fails with distinct errors for a wrong magic, an
/// unsupported version, truncation, and structural inconsistencies; never
/// returns a partially-loaded model.
pub fn load_model(path: &Path) -> Result<TrainedModel, PipelineError> {
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if magic != MODEL_MAGIC {
        return Err(PipelineError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != MODEL_VERSION {
        return Err(PipelineError::UnsupportedVersion(version));
    }
    let task_tag = read_str(&mut r)?;
    let task = Task::parse(&task_tag)
        .map_err(|_| PipelineError::Corrupt(format!("unknown task tag '{task_tag}'")))?;
    let input_shape = read_dims(&mut r)?;

    let n_specs = read_u32(&mut r)? as usize;
    let mut specs = Vec::with_capacity(n_specs.min(1024));
    for _ in 0..n_specs {
        specs.push(read_spec(&mut r)?);
    }

    let n_labels = read_u32(&mut r)? as usize;
    let mut label_names = Vec::with_capacity(n_labels.min(1024));
    for _ in 0..n_labels {
        label_names.push(read_str(&mut r)?);
    }

    let n_tensors = read_u32(&mut r)? as usize;
    let mut tensors = HashMap::new();
    for _ in 0..n_tensors {
        let (name, tensor) = read_tensor(&mut r)?;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(PipelineError::Corrupt(format!("duplicate tensor '{name}'")));
        }
    }
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(PipelineError::Corrupt("trailing data after tensors".into()));
    }

    let params = assemble_params(&specs, &mut tensors)?;
    let frontend = match task {
        Task::Speaker => Some(decode_frontend(&mut tensors)?),
        _ => None,
    };
    if let Some(name) = tensors.keys().next() {
        return Err(PipelineError::Corrupt(format!("unexpected tensor '{name}'")));
    }

    let model = TrainedModel {
        task,
        input_shape,
        specs,
        params,
        label_names,
        frontend,
    };
    model.validate()?;
    Ok(model)
}
