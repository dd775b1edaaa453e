//! Output files are staged as `<name>.partial` and renamed into place only
//! once the whole subcommand has succeeded.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

pub struct Outputs {
    dir: PathBuf,
    staged: Vec<(PathBuf, PathBuf)>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            staged: Vec::new(),
        }
    }

    /// Staged file with the metadata line already written.
    pub fn raw(&mut self, name: &str, meta: &str) -> io::Result<BufWriter<File>> {
        fs::create_dir_all(&self.dir)?;
        let target = self.dir.join(name);
        let partial = self.dir.join(format!("{name}.partial"));
        let mut w = BufWriter::new(File::create(&partial)?);
        self.staged.push((partial, target));
        writeln!(w, "{meta}")?;
        Ok(w)
    }

    pub fn csv(&mut self, name: &str, meta: &str) -> io::Result<csv::Writer<BufWriter<File>>> {
        Ok(csv::Writer::from_writer(self.raw(name, meta)?))
    }

    pub fn commit(&mut self) -> io::Result<()> {
        for (partial, target) in &self.staged {
            fs::rename(partial, target)?;
        }
        self.staged.clear();
        Ok(())
    }

    pub fn discard(&mut self) {
        for (partial, target) in self.staged.drain(..) {
            let _ = fs::remove_file(partial);
            let _ = fs::remove_file(target);
        }
    }
}
