use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Provenance block written at the top of every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata<'a> {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub version: &'static str,
    pub config: &'a RunConfig,
}

impl<'a> Metadata<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            command: config.task.name(),
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION"),
            config,
        }
    }
}

pub struct OutputDir<'a> {
    dir: PathBuf,
    meta: Metadata<'a>,
}

impl<'a> OutputDir<'a> {
    pub fn create(config: &'a RunConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.out_dir)
            .with_context(|| format!("creating output directory {}", config.out_dir.display()))?;
        Ok(Self {
            dir: config.out_dir.clone(),
            meta: Metadata::new(config),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn open(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        Ok((path, BufWriter::new(file)))
    }

    /// `{"metadata": ..., "result": ...}`, pretty-printed.
    pub fn write_json<T: Serialize>(&self, name: &str, result: &T) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Doc<'m, 'c, T> {
            metadata: &'m Metadata<'c>,
            result: &'m T,
        }
        let (path, mut w) = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, &Doc { metadata: &self.meta, result })?;
        writeln!(w)?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// CSV preceded by `# key: value` comment lines.
    pub fn write_csv<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<PathBuf> {
        let (path, mut w) = self.open(name)?;
        write_header(&mut w, &self.meta)?;
        let mut csv = csv::Writer::from_writer(w);
        for row in rows {
            csv.serialize(row)?;
        }
        csv.flush().with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn write_header<W: Write>(w: &mut W, meta: &Metadata) -> Result<()> {
    writeln!(w, "# command: {}", meta.command)?;
    writeln!(w, "# config_hash: {}", meta.config_hash)?;
    writeln!(w, "# seed: {}", meta.seed)?;
    writeln!(w, "# version: {}", meta.version)?;
    writeln!(w, "# config: {}", serde_json::to_string(meta.config)?)?;
    Ok(())
}

pub fn announce(path: &Path) {
    eprintln!("wrote {}", path.display());
}
