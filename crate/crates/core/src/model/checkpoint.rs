//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//! `magic[8] | version u32 | count u64 | count × (name_len u32 | name | rank u32 | dims u64×rank | data f32×numel)`.
//! Integer state (step counters, RNG words) is stored as f32 tensors of
//! 16-bit chunks, which f32 represents exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use stripepaint_tensor::{OptimState, VarMap};

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"STRPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    entries: BTreeMap<String, Entry>,
}

pub fn u64_to_f32s(v: u64) -> [f32; 4] {
    std::array::from_fn(|i| ((v >> (16 * i)) & 0xffff) as f32)
}

pub fn f32s_to_u64(c: &[f32]) -> Result<u64> {
    if c.len() != 4
        || c.iter()
            .any(|&x| !(0.0..=65535.0).contains(&x) || x.fract() != 0.0)
    {
        return Err(Error::Checkpoint("malformed integer entry".into()));
    }
    Ok(c.iter()
        .enumerate()
        .fold(0u64, |acc, (i, &x)| acc | ((x as u64) << (16 * i))))
}

fn join(prefix: &str, name: &str) -> String {
    format!("{prefix}.{name}")
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        dims: &[usize],
        data: Vec<f32>,
    ) -> Result<()> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Checkpoint(format!(
                "{name}: {} values for dims {dims:?}",
                data.len()
            )));
        }
        self.entries.insert(
            name,
            Entry {
                dims: dims.to_vec(),
                data,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    fn require(&self, name: &str) -> Result<&Entry> {
        self.get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing entry {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn insert_u64(&mut self, name: impl Into<String>, v: u64) -> Result<()> {
        self.insert(name, &[4], u64_to_f32s(v).to_vec())
    }

    pub fn get_u64(&self, name: &str) -> Result<u64> {
        f32s_to_u64(&self.require(name)?.data)
    }

    /// Stores bytes one per value (used for the run configuration text).
    pub fn insert_bytes(&mut self, name: impl Into<String>, bytes: &[u8]) -> Result<()> {
        self.insert(
            name,
            &[bytes.len()],
            bytes.iter().map(|&b| f32::from(b)).collect(),
        )
    }

    pub fn get_bytes(&self, name: &str) -> Result<Vec<u8>> {
        self.require(name)?
            .data
            .iter()
            .map(|&x| {
                if (0.0..=255.0).contains(&x) && x.fract() == 0.0 {
                    Ok(x as u8)
                } else {
                    Err(Error::Checkpoint(format!("{name} is not a byte string")))
                }
            })
            .collect()
    }

    /// Copies every variable as `prefix.name`.
    pub fn insert_vars(&mut self, prefix: &str, vars: &VarMap) -> Result<()> {
        for (name, var) in vars.iter() {
            let t = var.get();
            self.insert(join(prefix, name), t.dims(), t.to_vec())?;
        }
        Ok(())
    }

    /// Overwrites every variable from `prefix.name`; missing entries and
    /// shape mismatches are errors.
    pub fn restore_vars(&self, prefix: &str, vars: &VarMap) -> Result<()> {
        for (name, _) in vars.iter() {
            let key = join(prefix, name);
            let e = self.require(&key)?;
            vars.assign(name, e.data.clone(), &e.dims)
                .map_err(|err| Error::Checkpoint(format!("{key}: {err}")))?;
        }
        Ok(())
    }

    pub fn insert_optim(&mut self, prefix: &str, state: &OptimState) -> Result<()> {
        self.insert_u64(join(prefix, "step"), state.step)?;
        for (name, m) in &state.first {
            self.insert(join(prefix, &format!("m.{name}")), &[m.len()], m.clone())?;
        }
        for (name, v) in &state.second {
            self.insert(join(prefix, &format!("v.{name}")), &[v.len()], v.clone())?;
        }
        Ok(())
    }

    pub fn restore_optim(&self, prefix: &str) -> Result<OptimState> {
        let mut state = OptimState {
            step: self.get_u64(&join(prefix, "step"))?,
            ..OptimState::default()
        };
        let (m, v) = (join(prefix, "m."), join(prefix, "v."));
        for (name, e) in &self.entries {
            if let Some(rest) = name.strip_prefix(&m) {
                state.first.insert(rest.to_string(), e.data.clone());
            } else if let Some(rest) = name.strip_prefix(&v) {
                state.second.insert(rest.to_string(), e.data.clone());
            }
        }
        Ok(state)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (name, e) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(e.dims.len() as u32).to_le_bytes());
            for &d in &e.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &e.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(
                "not a checkpoint file (bad magic)".into(),
            ));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let count = r.u64()?;
        let mut ck = Checkpoint::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let dims = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&n| n <= (bytes.len() - r.pos) / 4)
                .ok_or_else(|| {
                    Error::Checkpoint(format!("{name}: dims {dims:?} exceed the file"))
                })?;
            let data = r
                .take(numel * 4)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            ck.insert(name, &dims, data)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(
                "trailing bytes after the last entry".into(),
            ));
        }
        Ok(ck)
    }

    /// Writes through a temporary file and renames it into place, so a failed
    /// write never clobbers an existing checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        fs::write(&tmp, self.to_bytes()).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(&tmp, e)
        })?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use stripepaint_tensor::{Rng, Tensor};

    use super::*;

    #[test]
    fn integers_round_trip() {
        for v in [0, 1, 65535, 65536, u64::MAX, 0x0123_4567_89ab_cdef] {
            assert_eq!(f32s_to_u64(&u64_to_f32s(v)).unwrap(), v);
        }
        assert!(f32s_to_u64(&[0.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn bytes_round_trip() {
        let mut ck = Checkpoint::new();
        ck.insert("w", &[2, 3], (0..6).map(|i| i as f32 * 0.1).collect())
            .unwrap();
        ck.insert("s", &[], vec![7.0]).unwrap();
        ck.insert_bytes("meta.config", b"a = 1\n").unwrap();
        ck.insert_u64("step", 123_456_789).unwrap();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.get_bytes("meta.config").unwrap(), b"a = 1\n");
        assert_eq!(back.get_u64("step").unwrap(), 123_456_789);
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let mut ck = Checkpoint::new();
        ck.insert("w", &[4], vec![1.0; 4]).unwrap();
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }

    #[test]
    fn vars_and_optimizer_state_restore() {
        let mut vars = VarMap::new();
        vars.insert(
            "a.weight",
            Tensor::randn(&[3, 2], 1.0, &mut Rng::new(0)).unwrap(),
        )
        .unwrap();
        let mut state = OptimState {
            step: 5,
            ..OptimState::default()
        };
        state.first.insert("a.weight".into(), vec![0.5; 6]);
        state.second.insert("a.weight".into(), vec![0.25; 6]);
        let mut ck = Checkpoint::new();
        ck.insert_vars("g", &vars).unwrap();
        ck.insert_optim("opt_g", &state).unwrap();

        let mut other = VarMap::new();
        other
            .insert("a.weight", Tensor::zeros(&[3, 2]).unwrap())
            .unwrap();
        ck.restore_vars("g", &other).unwrap();
        assert_eq!(
            other.get("a.weight").unwrap().get().data(),
            vars.get("a.weight").unwrap().get().data()
        );
        assert_eq!(ck.restore_optim("opt_g").unwrap(), state);

        let mut wrong = VarMap::new();
        wrong
            .insert("a.weight", Tensor::zeros(&[2, 3]).unwrap())
            .unwrap();
        assert!(ck.restore_vars("g", &wrong).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bin");
        let mut ck = Checkpoint::new();
        ck.insert("x", &[1], vec![3.5]).unwrap();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
        assert!(!dir.path().join("ck.bin.tmp").exists());
    }
}
