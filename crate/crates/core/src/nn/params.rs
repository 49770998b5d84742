use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::autograd::{Graph, Scalar, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CWPM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Zero-mean normal with the given standard deviation.
    Normal(f64),
}

/// A declared parameter: slash-separated block path, shape, initializer.
#[derive(Clone, Debug)]
pub struct ParamSpec {
    pub path: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(path: impl Into<String>, shape: &[usize], init: Init) -> Self {
        ParamSpec {
            path: path.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Named parameter tensors, ordered by path.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore {
            params: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn init(specs: &[ParamSpec], rng: &mut Rng) -> Self {
        let mut store = ParamStore::new();
        for spec in specs {
            let n = spec.numel();
            let data: Vec<T> = match spec.init {
                Init::Zeros => vec![T::zero(); n],
                Init::Constant(c) => vec![T::of(c); n],
                Init::Normal(std) => (0..n)
                    .map(|_| T::of(std * rng.sample::<f64, _>(StandardNormal)))
                    .collect(),
            };
            store.insert(
                spec.path.clone(),
                Tensor::new(spec.shape.clone(), data).expect("spec shape is valid"),
            );
        }
        store
    }

    pub fn insert(&mut self, path: impl Into<String>, t: Tensor<T>) {
        self.params.insert(path.into(), t);
    }

    pub fn get(&self, path: &str) -> Option<&Tensor<T>> {
        self.params.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Entries whose path starts with `prefix/`, with the prefix removed.
    pub fn subtree(&self, prefix: &str) -> Self {
        let lead = format!("{prefix}/");
        ParamStore {
            params: self
                .params
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&lead).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Copies every entry of `other` in under `prefix/`.
    pub fn graft(&mut self, prefix: &str, other: &Self) {
        for (k, v) in &other.params {
            self.params.insert(format!("{prefix}/{k}"), v.clone());
        }
    }

    /// Registers every tensor on `graph`, as differentiable leaves when
    /// `trainable`, otherwise as constants.
    pub fn bind<'g>(&self, graph: &'g Graph<T>, trainable: bool) -> Bound<'g, T> {
        let vars = self
            .params
            .iter()
            .map(|(k, v)| {
                let var = if trainable {
                    graph.leaf(v.clone())
                } else {
                    graph.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        Bound { vars }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for (path, t) in &self.params {
            let bytes = path.as_bytes();
            w.write_all(&(bytes.len() as u32).to_le_bytes())?;
            w.write_all(bytes)?;
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for &v in t.data() {
                w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut reader = Counting { inner: r, offset: 0 };
        let mut magic = [0u8; 4];
        reader.exact(&mut magic, "checkpoint magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: format!("bad checkpoint magic {magic:?}"),
            });
        }
        let version = reader.u32("format version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                offset: 4,
                msg: format!("unsupported checkpoint version {version}"),
            });
        }
        let mut store = ParamStore::new();
        loop {
            let mut len = [0u8; 4];
            let got = reader.fill(&mut len)?;
            if got == 0 {
                break;
            }
            if got < 4 {
                return Err(reader.truncated("path length"));
            }
            let len = u32::from_le_bytes(len) as usize;
            let mut path = vec![0u8; len];
            reader.exact(&mut path, "path")?;
            let path = String::from_utf8(path).map_err(|_| Error::Format {
                offset: reader.offset,
                msg: "parameter path is not UTF-8".into(),
            })?;
            let rank = reader.u32("rank")? as usize;
            if rank == 0 || rank > crate::autograd::MAX_RANK {
                return Err(Error::Format {
                    offset: reader.offset,
                    msg: format!("rank {rank} out of range"),
                });
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(reader.u32("dimension")? as usize);
            }
            let n: usize = dims.iter().product();
            let mut raw = vec![0u8; 4 * n];
            reader.exact(&mut raw, "payload")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
                .collect();
            store.insert(path, Tensor::new(dims, data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(Error::at_path(path))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(Error::at_path(path))?;
        Self::read_from(&mut BufReader::new(file))
    }
}

struct Counting<'a, R> {
    inner: &'a mut R,
    offset: u64,
}

impl<R: Read> Counting<'_, R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<usize> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..])? {
                0 => break,
                k => got += k,
            }
        }
        self.offset += got as u64;
        Ok(got)
    }

    fn truncated(&self, what: &str) -> Error {
        Error::Format {
            offset: self.offset,
            msg: format!("file ends inside {what}"),
        }
    }

    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        if self.fill(buf)? < buf.len() {
            return Err(self.truncated(what));
        }
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }
}

/// Parameters registered on one graph.
pub struct Bound<'g, T> {
    vars: BTreeMap<String, Var<'g, T>>,
}

impl<'g, T: Scalar> Bound<'g, T> {
    pub fn get(&self, path: &str) -> Result<Var<'g, T>> {
        self.vars
            .get(path)
            .copied()
            .ok_or_else(|| Error::invalid(format!("missing parameter `{path}`")))
    }

    pub fn vars(&self) -> Vec<Var<'g, T>> {
        self.vars.values().copied().collect()
    }

    pub fn paths(&self) -> impl Iterator<Item = &String> {
        self.vars.keys()
    }
}
