//! Output directory bookkeeping and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use baker_core::Result;
use serde::Serialize;

pub struct OutputDir {
    dir: PathBuf,
    written: Vec<PathBuf>,
    started: Instant,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    config: &'a C,
    threads: usize,
    outputs: Vec<String>,
    wall_time_s: f64,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Create `name` in the output directory and hand a buffered writer to `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        body(&mut w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// Write `manifest.json` and return every file produced, manifest last.
    pub fn finish<C: Serialize>(mut self, config: &C) -> Result<Vec<PathBuf>> {
        let outputs = self
            .written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: baker_core::VERSION,
            config,
            threads: rayon::current_num_threads(),
            outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        self.write("manifest.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest)?;
            writeln!(w)?;
            Ok(())
        })?;
        Ok(self.written)
    }
}
