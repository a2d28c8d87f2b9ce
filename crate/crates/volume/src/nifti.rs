//! NIfTI-1 single-file (`.nii`, `.nii.gz`) reading and writing.
//!
//! Reading accepts either byte order and the common integer and float
//! datatypes, applies `scl_slope`/`scl_inter`, and takes the affine from the
//! sform, then the qform, then the pixdim diagonal. Writing always produces
//! little-endian files with an sform: float32 for real images, uint8 for masks.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{BigEndian, ByteOrder, LittleEndian};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Result, VolumeError};
use crate::grid::VoxelGrid;
use crate::linalg::{self, Mat4};
use crate::orient;
use crate::volume::{BinaryMask, ProbabilityMap, Volume};

const HEADER_SIZE: usize = 348;
const DATA_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_INT32: i16 = 8;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_INT8: i16 = 256;
const DT_UINT16: i16 = 512;
const DT_UINT32: i16 = 768;
const DT_INT64: i16 = 1024;
const DT_UINT64: i16 = 1280;

/// Voxel payload of something that can be written as NIfTI.
pub enum Payload<'a> {
    Real(&'a [f64]),
    Binary(&'a [u8]),
}

pub trait NiftiImage {
    fn grid(&self) -> &VoxelGrid;
    fn payload(&self) -> Payload<'_>;
}

impl NiftiImage for Volume {
    fn grid(&self) -> &VoxelGrid {
        Volume::grid(self)
    }
    fn payload(&self) -> Payload<'_> {
        Payload::Real(self.data())
    }
}

impl NiftiImage for ProbabilityMap {
    fn grid(&self) -> &VoxelGrid {
        ProbabilityMap::grid(self)
    }
    fn payload(&self) -> Payload<'_> {
        Payload::Real(self.data())
    }
}

impl NiftiImage for BinaryMask {
    fn grid(&self) -> &VoxelGrid {
        BinaryMask::grid(self)
    }
    fn payload(&self) -> Payload<'_> {
        Payload::Binary(self.data())
    }
}

struct RawImage {
    grid: VoxelGrid,
    data: Vec<f64>,
}

/// Loads a 3D image exactly as stored (no reorientation).
pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let raw = read_raw(path.as_ref())?;
    Volume::new(raw.grid, raw.data)
}

/// Loads a 3D image and reorders its axes to LAS.
pub fn load_volume_las(path: impl AsRef<Path>) -> Result<Volume> {
    orient::volume_to_las(&load_volume(path)?)
}

/// Loads a mask; every stored value must be exactly 0 or 1 after scaling.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let raw = read_raw(path.as_ref())?;
    let mut data = Vec::with_capacity(raw.data.len());
    for (index, &v) in raw.data.iter().enumerate() {
        if v == 0.0 {
            data.push(0);
        } else if v == 1.0 {
            data.push(1);
        } else {
            return Err(VolumeError::NotBinary { index, value: v });
        }
    }
    BinaryMask::new(raw.grid, data)
}

pub fn load_probability(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let raw = read_raw(path.as_ref())?;
    ProbabilityMap::new(raw.grid, raw.data)
}

/// Writes `.nii` or, when the path ends in `.gz`, gzip-compressed `.nii.gz`.
pub fn save_volume<I: NiftiImage + ?Sized>(image: &I, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(image.grid(), image.payload());
    let io = |source| VolumeError::Io { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(io)?;
    let mut writer = std::io::BufWriter::new(file);
    if is_gz_path(path) {
        let mut enc = GzEncoder::new(writer, Compression::fast());
        enc.write_all(&bytes).map_err(io)?;
        enc.finish().map_err(io)?.flush().map_err(io)?;
    } else {
        writer.write_all(&bytes).map_err(io)?;
        writer.flush().map_err(io)?;
    }
    Ok(())
}

fn is_gz_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

fn encode(grid: &VoxelGrid, payload: Payload<'_>) -> Vec<u8> {
    let (datatype, bitpix, body_len) = match &payload {
        Payload::Real(d) => (DT_FLOAT32, 32i16, d.len() * 4),
        Payload::Binary(d) => (DT_UINT8, 8i16, d.len()),
    };
    let mut buf = vec![0u8; DATA_OFFSET + body_len];
    let h = &mut buf[..HEADER_SIZE];
    LittleEndian::write_i32(&mut h[0..4], HEADER_SIZE as i32);
    h[38] = b'r';
    let shape = grid.shape();
    let dims = [3i16, shape[0] as i16, shape[1] as i16, shape[2] as i16, 1, 1, 1, 1];
    for (i, d) in dims.iter().enumerate() {
        LittleEndian::write_i16(&mut h[40 + 2 * i..], *d);
    }
    LittleEndian::write_i16(&mut h[70..], datatype);
    LittleEndian::write_i16(&mut h[72..], bitpix);
    let spacing = grid.spacing();
    let pixdim = [1.0f32, spacing[0] as f32, spacing[1] as f32, spacing[2] as f32, 0.0, 0.0, 0.0, 0.0];
    for (i, p) in pixdim.iter().enumerate() {
        LittleEndian::write_f32(&mut h[76 + 4 * i..], *p);
    }
    LittleEndian::write_f32(&mut h[108..], DATA_OFFSET as f32);
    LittleEndian::write_f32(&mut h[112..], 1.0);
    LittleEndian::write_f32(&mut h[116..], 0.0);
    h[123] = 2; // mm
    // sform_code 2: aligned to another image's space
    LittleEndian::write_i16(&mut h[254..], 2);
    let a = grid.affine();
    for (row, off) in [(0usize, 280usize), (1, 296), (2, 312)] {
        for j in 0..4 {
            LittleEndian::write_f32(&mut h[off + 4 * j..], a[row][j] as f32);
        }
    }
    h[344..348].copy_from_slice(b"n+1\0");
    let body = &mut buf[DATA_OFFSET..];
    match payload {
        Payload::Real(d) => {
            for (i, v) in d.iter().enumerate() {
                LittleEndian::write_f32(&mut body[4 * i..], *v as f32);
            }
        }
        Payload::Binary(d) => body.copy_from_slice(d),
    }
    buf
}

fn read_raw(path: &Path) -> Result<RawImage> {
    let io = |source| VolumeError::Io { path: path.to_path_buf(), source };
    let raw = fs::read(path).map_err(io)?;
    let bytes = if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out).map_err(io)?;
        out
    } else {
        raw
    };
    if bytes.len() < HEADER_SIZE {
        return Err(format_err(path, format!("file has {} bytes, header needs 348", bytes.len())));
    }
    if LittleEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode::<LittleEndian>(path, &bytes)
    } else if BigEndian::read_i32(&bytes[0..4]) == HEADER_SIZE as i32 {
        decode::<BigEndian>(path, &bytes)
    } else {
        Err(format_err(path, "sizeof_hdr is not 348 in either byte order".into()))
    }
}

fn format_err(path: &Path, reason: String) -> VolumeError {
    VolumeError::Format { path: PathBuf::from(path), reason }
}

fn decode<E: ByteOrder>(path: &Path, bytes: &[u8]) -> Result<RawImage> {
    let h = &bytes[..HEADER_SIZE];
    match &h[344..348] {
        b"n+1\0" => {}
        b"ni1\0" => return Err(format_err(path, "two-file (.hdr/.img) NIfTI is not supported".into())),
        m => return Err(format_err(path, format!("bad magic {m:?}"))),
    }
    let dim: Vec<i64> = (0..8).map(|i| E::read_i16(&h[40 + 2 * i..]) as i64).collect();
    let ndim = dim[0];
    if !(1..=7).contains(&ndim) {
        return Err(format_err(path, format!("dim[0] = {ndim}")));
    }
    let dims: Vec<usize> = (1..=ndim as usize).map(|i| dim[i].max(0) as usize).collect();
    // Trailing singleton dimensions are tolerated: a 64x64x32x1 image is 3D.
    let effective = dims.iter().rposition(|&d| d > 1).map_or(0, |p| p + 1);
    if ndim < 3 || effective > 3 || dims.iter().take(3).any(|&d| d == 0) {
        return Err(VolumeError::NotThreeD { path: path.to_path_buf(), ndim: ndim as usize, dims });
    }
    let shape = [dims[0], dims[1], dims[2]];
    let datatype = E::read_i16(&h[70..]);
    let pixdim: Vec<f64> = (0..8).map(|i| E::read_f32(&h[76 + 4 * i..]) as f64).collect();
    let vox_offset = E::read_f32(&h[108..]) as usize;
    let slope = E::read_f32(&h[112..]) as f64;
    let inter = E::read_f32(&h[116..]) as f64;
    let (slope, inter) = if slope == 0.0 || !slope.is_finite() { (1.0, 0.0) } else { (slope, inter) };

    let affine = header_affine::<E>(h, &pixdim);
    let grid = VoxelGrid::new(shape, affine).map_err(|e| format_err(path, e.to_string()))?;

    let n = grid.len();
    let size = match datatype {
        DT_UINT8 | DT_INT8 => 1,
        DT_INT16 | DT_UINT16 => 2,
        DT_INT32 | DT_UINT32 | DT_FLOAT32 => 4,
        DT_FLOAT64 | DT_INT64 | DT_UINT64 => 8,
        other => return Err(format_err(path, format!("unsupported datatype {other}"))),
    };
    let start = vox_offset.max(HEADER_SIZE);
    let end = start + n * size;
    if bytes.len() < end {
        return Err(format_err(path, format!("data truncated: need {end} bytes, have {}", bytes.len())));
    }
    let body = &bytes[start..end];
    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let b = &body[i * size..];
        let v = match datatype {
            DT_UINT8 => b[0] as f64,
            DT_INT8 => b[0] as i8 as f64,
            DT_INT16 => E::read_i16(b) as f64,
            DT_UINT16 => E::read_u16(b) as f64,
            DT_INT32 => E::read_i32(b) as f64,
            DT_UINT32 => E::read_u32(b) as f64,
            DT_FLOAT32 => E::read_f32(b) as f64,
            DT_FLOAT64 => E::read_f64(b),
            DT_INT64 => E::read_i64(b) as f64,
            _ => E::read_u64(b) as f64,
        };
        let v = v * slope + inter;
        if !v.is_finite() {
            return Err(VolumeError::NonFiniteFile { path: path.to_path_buf(), index: i });
        }
        data.push(v);
    }
    Ok(RawImage { grid, data })
}

fn header_affine<E: ByteOrder>(h: &[u8], pixdim: &[f64]) -> Mat4 {
    let qform_code = E::read_i16(&h[252..]);
    let sform_code = E::read_i16(&h[254..]);
    if sform_code > 0 {
        let mut m = linalg::identity();
        for (row, off) in [(0usize, 280usize), (1, 296), (2, 312)] {
            for j in 0..4 {
                m[row][j] = E::read_f32(&h[off + 4 * j..]) as f64;
            }
        }
        return m;
    }
    if qform_code > 0 {
        let b = E::read_f32(&h[256..]) as f64;
        let c = E::read_f32(&h[260..]) as f64;
        let d = E::read_f32(&h[264..]) as f64;
        let offset = [
            E::read_f32(&h[268..]) as f64,
            E::read_f32(&h[272..]) as f64,
            E::read_f32(&h[276..]) as f64,
        ];
        let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
        let r = [
            [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
            [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
            [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - c * c - b * b],
        ];
        let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
        let scale = [pixdim[1], pixdim[2], qfac * pixdim[3]];
        let mut m = linalg::identity();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[i][j] * scale[j];
            }
            m[i][3] = offset[i];
        }
        return m;
    }
    let mut spacing = [1.0; 3];
    for (i, s) in spacing.iter_mut().enumerate() {
        if pixdim[i + 1] > 0.0 {
            *s = pixdim[i + 1];
        }
    }
    linalg::diag(spacing)
}
