//! Graph files and a shared cache of built graphs.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use dcc_core::{build_graph, ConfusabilityGraph};

#[derive(Debug, thiserror::Error)]
pub enum GraphFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: dcc_core::Error },
}

pub fn write_graph(path: &Path, g: &ConfusabilityGraph) -> Result<(), GraphFileError> {
    let io_err = |source| GraphFileError::Io { path: path.to_path_buf(), source };
    let tmp = path.with_extension("partial");
    fs::write(&tmp, g.to_bytes()).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn read_graph(path: &Path) -> Result<ConfusabilityGraph, GraphFileError> {
    let bytes = fs::read(path).map_err(|source| GraphFileError::Io { path: path.to_path_buf(), source })?;
    ConfusabilityGraph::from_bytes(&bytes).map_err(|source| GraphFileError::Format { path: path.to_path_buf(), source })
}

/// Builds each `(n, s)` graph once. With a directory, graphs are also
/// loaded from and saved to `g{n}_{s}.dccg` files there, which is what
/// external evaluators read.
#[derive(Debug, Default)]
pub struct GraphCache {
    dir: Option<PathBuf>,
    graphs: Mutex<HashMap<(usize, usize), Arc<ConfusabilityGraph>>>,
}

impl GraphCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), graphs: Mutex::default() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn file_name(n: usize, s: usize) -> String {
        format!("g{n}_{s}.dccg")
    }

    pub fn get(&self, n: usize, s: usize) -> anyhow::Result<Arc<ConfusabilityGraph>> {
        if let Some(g) = self.graphs.lock().expect("graph cache poisoned").get(&(n, s)) {
            return Ok(Arc::clone(g));
        }
        let g = Arc::new(self.load_or_build(n, s)?);
        let mut graphs = self.graphs.lock().expect("graph cache poisoned");
        Ok(Arc::clone(graphs.entry((n, s)).or_insert(g)))
    }

    /// Path of the graph file, written on first request. `None` without a directory.
    pub fn path(&self, n: usize, s: usize) -> anyhow::Result<Option<PathBuf>> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(Self::file_name(n, s));
        if !path.exists() {
            let g = self.get(n, s)?;
            write_graph(&path, &g)?;
        }
        Ok(Some(path))
    }

    fn load_or_build(&self, n: usize, s: usize) -> anyhow::Result<ConfusabilityGraph> {
        if let Some(dir) = &self.dir {
            let path = dir.join(Self::file_name(n, s));
            if path.exists() {
                let g = read_graph(&path)?;
                if (g.n(), g.s()) != (n, s) {
                    anyhow::bail!("{}: holds the ({}, {}) graph", path.display(), g.n(), g.s());
                }
                return Ok(g);
            }
            let g = build_graph(n, s)?;
            write_graph(&path, &g)?;
            return Ok(g);
        }
        Ok(build_graph(n, s)?)
    }
}
