//! Outputs are written to a hidden directory inside `--out` and only moved
//! into place once the whole command has succeeded.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    created_out: bool,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> io::Result<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out)?;
        let dir = out.join(format!(".staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Staging {
            out: out.to_path_buf(),
            dir,
            created_out,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Writes `contents` to `rel` (a `/`-separated path) inside the stage.
    pub fn write(&mut self, rel: &str, contents: &str) -> io::Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
        self.files.push(rel.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Moves every staged file into the output directory.
    pub fn commit(mut self) -> io::Result<Vec<PathBuf>> {
        let mut placed = Vec::with_capacity(self.files.len());
        for rel in &self.files {
            let target = self.out.join(rel);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(self.dir.join(rel), &target)?;
            placed.push(target);
        }
        self.committed = true;
        fs::remove_dir_all(&self.dir)?;
        Ok(placed)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let _ = fs::remove_dir_all(&self.dir);
        if self.created_out {
            // only succeeds when nothing else ended up there
            let _ = fs::remove_dir(&self.out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_moves_files() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("o");
        let mut s = Staging::new(&out).unwrap();
        s.write("a.csv", "x\n").unwrap();
        s.write("seed_1/b.csv", "y\n").unwrap();
        assert!(!out.join("a.csv").exists());
        s.commit().unwrap();
        assert_eq!(fs::read_to_string(out.join("seed_1/b.csv")).unwrap(), "y\n");
        assert_eq!(fs::read_dir(&out).unwrap().count(), 2);
    }

    #[test]
    fn dropping_cleans_up() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("fresh");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write("a.csv", "x\n").unwrap();
        }
        assert!(!out.exists());

        let kept = tmp.path().join("kept");
        fs::create_dir(&kept).unwrap();
        fs::write(kept.join("old.csv"), "old\n").unwrap();
        {
            let mut s = Staging::new(&kept).unwrap();
            s.write("old.csv", "new\n").unwrap();
        }
        assert_eq!(fs::read_to_string(kept.join("old.csv")).unwrap(), "old\n");
        assert_eq!(fs::read_dir(&kept).unwrap().count(), 1);
    }
}
