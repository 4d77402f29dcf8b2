//! Named trainable parameters with gradient accumulators and a binary
//! checkpoint format (versioned header + manifest + little-endian blocks).

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Value precision for stored/serialized parameters and graph arithmetic.
/// `Single` emulates 32-bit arithmetic by rounding every op output through
/// f32; gradient checks require `Double`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    pub fn byte_width(self) -> u8 {
        match self {
            Precision::Double => 8,
            Precision::Single => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Vec<f64>,
    pub trainable: bool,
}

/// All parameters of a model, in registration order. Names are unique.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Param>,
    by_name: HashMap<String, ParamId>,
    pub precision: Precision,
}

impl Default for Precision {
    fn default() -> Self {
        Precision::Double
    }
}

impl ParamStore {
    pub fn new(precision: Precision) -> Self {
        ParamStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
            precision,
        }
    }

    pub fn register(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter name: {name}"
        );
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "parameter {name}: shape {shape:?} vs data length {}",
            data.len()
        );
        let id = ParamId(self.entries.len());
        let n = data.len();
        self.entries.push(Param {
            name: name.to_string(),
            shape,
            data,
            grad: vec![0.0; n],
            trainable: true,
        });
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.entries[id.0].trainable = trainable;
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Total scalar count across all parameters.
    pub fn n_scalars(&self) -> usize {
        self.entries.iter().map(|p| p.data.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Scales every gradient in place (e.g. by 1/batch).
    pub fn scale_grad(&mut self, s: f64) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|p| p.grad.iter().all(|g| g.is_finite()))
    }

    /// Snapshot of all parameter values, for best-checkpoint retention.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|p| p.data.clone()).collect()
    }

    pub fn restore(&mut self, snap: &[Vec<f64>]) {
        assert_eq!(snap.len(), self.entries.len());
        for (p, s) in self.entries.iter_mut().zip(snap) {
            p.data.copy_from_slice(s);
        }
    }

    // ── checkpoint I/O ─────────────────────────────────────────────────

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.push(self.precision.byte_width());
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for p in &self.entries {
            let name = p.name.as_bytes();
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name);
            buf.push(p.trainable as u8);
            buf.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
            for d in &p.shape {
                buf.extend_from_slice(&(*d as u32).to_le_bytes());
            }
        }
        for p in &self.entries {
            match self.precision {
                Precision::Double => {
                    for v in &p.data {
                        buf.extend_from_slice(&v.to_le_bytes());
                    }
                }
                Precision::Single => {
                    for v in &p.data {
                        buf.extend_from_slice(&(*v as f32).to_le_bytes());
                    }
                }
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        f.write_all(&buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    /// Loads values into an already-built store; names and shapes must match.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut r = Cursor { bytes: &bytes, pos: 0 };
        let magic = r.take(MAGIC.len())?;
        if magic != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}"
            )));
        }
        let width = r.u8()?;
        if width != 4 && width != 8 {
            return Err(Error::Checkpoint(format!("bad precision byte {width}")));
        }
        let count = r.u32()? as usize;
        if count != self.entries.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {count} parameters, model has {}",
                self.entries.len()
            )));
        }
        let mut manifest = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Checkpoint("non-utf8 parameter name".into()))?;
            let trainable = r.u8()? != 0;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            manifest.push((name, shape, trainable));
        }
        for (i, (name, shape, _)) in manifest.iter().enumerate() {
            let p = &self.entries[i];
            if p.name != *name || p.shape != *shape {
                return Err(Error::Checkpoint(format!(
                    "parameter {i}: expected {} {:?}, found {} {:?}",
                    p.name, p.shape, name, shape
                )));
            }
        }
        for i in 0..count {
            let n = self.entries[i].data.len();
            let mut vals = Vec::with_capacity(n);
            if width == 8 {
                for _ in 0..n {
                    vals.push(f64::from_le_bytes(
                        r.take(8)?.try_into().expect("8 bytes"),
                    ));
                }
            } else {
                for _ in 0..n {
                    vals.push(f32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes")) as f64);
                }
            }
            self.entries[i].data = vals;
        }
        Ok(())
    }
}

const MAGIC: &[u8] = b"DBVMCKPT";
const FORMAT_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_and_lookup() {
        let mut s = ParamStore::new(Precision::Double);
        let id = s.register("a.w", vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.id("a.w"), Some(id));
        assert_eq!(s.n_scalars(), 4);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new(Precision::Double);
        s.register("p", vec![1], vec![0.0]);
        s.register("p", vec![1], vec![0.0]);
    }

    #[test]
    fn checkpoint_round_trip_f64() {
        let dir = std::env::temp_dir().join(format!("ckpt_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.ckpt");

        let mut s = ParamStore::new(Precision::Double);
        s.register("w", vec![2], vec![0.125, -3.5]);
        s.register("b", vec![1], vec![7.75]);
        s.save(&path).unwrap();

        let mut t = ParamStore::new(Precision::Double);
        t.register("w", vec![2], vec![0.0, 0.0]);
        t.register("b", vec![1], vec![0.0]);
        t.load(&path).unwrap();
        assert_eq!(t.get(ParamId(0)).data, vec![0.125, -3.5]);
        assert_eq!(t.get(ParamId(1)).data, vec![7.75]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn checkpoint_shape_mismatch_detected() {
        let dir = std::env::temp_dir().join(format!("ckpt_test2_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.ckpt");

        let mut s = ParamStore::new(Precision::Double);
        s.register("w", vec![2], vec![1.0, 2.0]);
        s.save(&path).unwrap();

        let mut t = ParamStore::new(Precision::Double);
        t.register("w", vec![3], vec![0.0; 3]);
        assert!(t.load(&path).is_err());
        std::fs::remove_dir_all(&dir).ok();
    }
}
