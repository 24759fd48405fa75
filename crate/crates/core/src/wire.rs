//! Canonical message serialization.
//!
//! Every message that crosses an agent boundary has one binary layout, so
//! byte counts are well-defined for the communication-cost analysis:
//!
//! ```text
//! header:  u16 schema version | u16 sender | u16 counterpart | u32 step
//! vector:  u32 len  | len f64
//! matrix:  u32 rows | u32 cols | rows*cols f64, row-major
//! ```
//!
//! All integers and floats are little-endian; floats are carried bit-exact.
//! A JSON encoding of the same structs is available for debugging via
//! [`to_debug_json`].

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::ci::CiPoseMessage;
use crate::error::{Error, Result};
use crate::imdcl::{LandmarkMessage, MeasurementAnnouncement, UpdateMessage, UpdatePayload};
use crate::AgentId;

/// Version stamped into every header; decoding rejects anything else.
pub const SCHEMA_VERSION: u16 = 1;

/// Header length in bytes.
pub const HEADER_LEN: usize = 10;

const TAG_FACTORS: u8 = 0;
const TAG_GAIN_LIST: u8 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn with_header(sender: AgentId, counterpart: AgentId, step: u32) -> Self {
        let mut w = Writer { buf: Vec::new() };
        w.put_u16(SCHEMA_VERSION);
        w.put_u16(sender);
        w.put_u16(counterpart);
        w.put_u32(step);
        w
    }

    fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn put_vec(&mut self, v: &DVector<f64>) {
        self.put_u32(v.len() as u32);
        for x in v.iter() {
            self.put_f64(*x);
        }
    }

    fn put_mat(&mut self, m: &DMatrix<f64>) {
        self.put_u32(m.nrows() as u32);
        self.put_u32(m.ncols() as u32);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.put_f64(m[(i, j)]);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

/// Limit on decoded matrix/vector extents; anything larger is corrupt.
const MAX_DIM: u32 = 4096;

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Decode { reason: String::from("message truncated") });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn get_u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn get_u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn get_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn get_f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn get_vec(&mut self) -> Result<DVector<f64>> {
        let n = self.get_u32()?;
        if n > MAX_DIM {
            return Err(Error::Decode { reason: alloc::format!("vector length {n} out of range") });
        }
        let mut v = DVector::zeros(n as usize);
        for k in 0..n as usize {
            v[k] = self.get_f64()?;
        }
        Ok(v)
    }

    fn get_mat(&mut self) -> Result<DMatrix<f64>> {
        let rows = self.get_u32()?;
        let cols = self.get_u32()?;
        if rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::Decode {
                reason: alloc::format!("matrix shape {rows}x{cols} out of range"),
            });
        }
        let mut m = DMatrix::zeros(rows as usize, cols as usize);
        for i in 0..rows as usize {
            for j in 0..cols as usize {
                m[(i, j)] = self.get_f64()?;
            }
        }
        Ok(m)
    }

    fn header(&mut self) -> Result<(AgentId, AgentId, u32)> {
        let version = self.get_u16()?;
        if version != SCHEMA_VERSION {
            return Err(Error::Decode {
                reason: alloc::format!("schema version {version}, expected {SCHEMA_VERSION}"),
            });
        }
        let sender = self.get_u16()?;
        let counterpart = self.get_u16()?;
        let step = self.get_u32()?;
        Ok((sender, counterpart, step))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Decode {
                reason: alloc::format!("{} trailing bytes", self.buf.len() - self.pos),
            });
        }
        Ok(())
    }
}

pub fn encode_announcement(msg: &MeasurementAnnouncement) -> Vec<u8> {
    let mut w = Writer::with_header(msg.master, 0, msg.step);
    w.put_u32(msg.landmark_count);
    w.buf
}

pub fn decode_announcement(buf: &[u8]) -> Result<MeasurementAnnouncement> {
    let mut r = Reader::new(buf);
    let (master, _counterpart, step) = r.header()?;
    let landmark_count = r.get_u32()?;
    r.finish()?;
    Ok(MeasurementAnnouncement { master, landmark_count, step })
}

pub fn encode_landmark(msg: &LandmarkMessage) -> Vec<u8> {
    let mut w = Writer::with_header(msg.sender, msg.master, msg.step);
    w.put_vec(&msg.x);
    w.put_mat(&msg.phi);
    w.put_mat(&msg.cov);
    w.put_u32(msg.own_row.len() as u32);
    for (uid, block) in &msg.own_row {
        w.put_u16(*uid);
        w.put_mat(block);
    }
    w.buf
}

pub fn decode_landmark(buf: &[u8]) -> Result<LandmarkMessage> {
    let mut r = Reader::new(buf);
    let (sender, master, step) = r.header()?;
    let x = r.get_vec()?;
    let phi = r.get_mat()?;
    let cov = r.get_mat()?;
    let count = r.get_u32()?;
    if count > MAX_DIM {
        return Err(Error::Decode { reason: String::from("own-row count out of range") });
    }
    let mut own_row = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let uid = r.get_u16()?;
        let block = r.get_mat()?;
        own_row.push((uid, block));
    }
    r.finish()?;
    Ok(LandmarkMessage { sender, master, step, x, phi, cov, own_row })
}

pub fn encode_update(msg: &UpdateMessage) -> Vec<u8> {
    let mut w = Writer::with_header(msg.master, msg.landmark, msg.step);
    w.put_vec(&msg.rbar);
    match &msg.payload {
        UpdatePayload::Factors { gamma_a, gamma_b, t_b, t_a } => {
            w.put_u8(TAG_FACTORS);
            w.put_mat(gamma_a);
            w.put_mat(gamma_b);
            w.put_mat(t_b);
            w.put_mat(t_a);
        }
        UpdatePayload::GainList { gammas } => {
            w.put_u8(TAG_GAIN_LIST);
            w.put_u32(gammas.len() as u32);
            for (uid, g) in gammas {
                w.put_u16(*uid);
                w.put_mat(g);
            }
        }
    }
    w.buf
}

pub fn decode_update(buf: &[u8]) -> Result<UpdateMessage> {
    let mut r = Reader::new(buf);
    let (master, landmark, step) = r.header()?;
    let rbar = r.get_vec()?;
    let payload = match r.get_u8()? {
        TAG_FACTORS => {
            let gamma_a = r.get_mat()?;
            let gamma_b = r.get_mat()?;
            let t_b = r.get_mat()?;
            let t_a = r.get_mat()?;
            UpdatePayload::Factors { gamma_a, gamma_b, t_b, t_a }
        }
        TAG_GAIN_LIST => {
            let count = r.get_u32()?;
            if count > MAX_DIM {
                return Err(Error::Decode { reason: String::from("gain count out of range") });
            }
            let mut gammas = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let uid = r.get_u16()?;
                let g = r.get_mat()?;
                gammas.push((uid, g));
            }
            UpdatePayload::GainList { gammas }
        }
        tag => {
            return Err(Error::Decode { reason: alloc::format!("unknown payload tag {tag}") });
        }
    };
    r.finish()?;
    Ok(UpdateMessage { master, landmark, step, rbar, payload })
}

pub fn encode_ci_pose(msg: &CiPoseMessage) -> Vec<u8> {
    let mut w = Writer::with_header(msg.sender, msg.receiver, msg.step);
    w.put_vec(&msg.x);
    w.put_mat(&msg.cov);
    w.buf
}

pub fn decode_ci_pose(buf: &[u8]) -> Result<CiPoseMessage> {
    let mut r = Reader::new(buf);
    let (sender, receiver, step) = r.header()?;
    let x = r.get_vec()?;
    let cov = r.get_mat()?;
    r.finish()?;
    Ok(CiPoseMessage { sender, receiver, step, x, cov })
}

/// JSON rendering of any wire message, for logs and debugging; the binary
/// layout above remains the canonical interchange form.
pub fn to_debug_json<T: serde::Serialize>(msg: &T) -> Result<String> {
    serde_json::to_string(msg).map_err(|e| Error::Decode { reason: alloc::format!("{e}") })
}
