//! File names under the run directory.

use std::path::{Path, PathBuf};

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn data(&self, name: &str) -> PathBuf {
        self.root.join("data").join(format!("{name}.csv"))
    }

    /// Full source sample of `tag`.
    pub fn source_points(&self, tag: &str) -> PathBuf {
        self.data(tag)
    }

    pub fn source_pairs(&self, tag: &str) -> PathBuf {
        self.data(&format!("{tag}_pairs"))
    }

    pub fn unpaired_rel(tag: &str) -> String {
        format!("data/{tag}_unpaired_target.csv")
    }

    pub fn latents_rel(tag: &str) -> String {
        format!("latents/{tag}.csv")
    }

    pub fn target(&self) -> PathBuf {
        self.data("target")
    }

    pub fn test_input(&self, tag: &str) -> PathBuf {
        self.data(&format!("test_{tag}"))
    }

    /// Aligned test inputs of every source, columns `<tag>.x*`.
    pub fn test_inputs(&self) -> PathBuf {
        self.data("test_inputs")
    }

    pub fn test_ground_truth(&self) -> PathBuf {
        self.data("test_ground_truth")
    }

    pub fn reference(&self) -> PathBuf {
        self.data("reference")
    }

    pub fn mixture(&self) -> PathBuf {
        self.root.join("mixture.json")
    }

    pub fn model(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.json"))
    }

    pub fn source_model(&self, tag: &str) -> PathBuf {
        self.model(&format!("source_{tag}"))
    }

    pub fn losses(&self, name: &str) -> PathBuf {
        self.root.join("losses").join(format!("{name}.csv"))
    }

    pub fn bench(&self, name: &str) -> PathBuf {
        self.root.join("bench").join(name)
    }
}
