//! JSONL dataset dumps: one record per instance with fields input, target,
//! task, length.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use lenxfer_core::rng::train_example_rng;
use lenxfer_core::tasks::sample_instance;
use lenxfer_core::TaskId;

use crate::manifest::RunManifest;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Record {
    pub input: String,
    pub target: String,
    pub task: String,
    pub length: u32,
}

/// Writes `n` instances of (task, length) drawn from the seeded stream, one
/// JSON object per line, plus a sidecar manifest.
pub fn generate_jsonl(
    task: TaskId,
    length: u32,
    n: u64,
    seed: u64,
    path: &Path,
    command: &str,
) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    for i in 0..n {
        let mut rng = train_example_rng(seed, i);
        let inst = sample_instance(task, length, &mut rng).map_err(anyhow::Error::msg)?;
        let record = Record {
            input: inst.input,
            target: inst.target,
            task: task.name().into(),
            length: inst.length,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    if let Some(dir) = path.parent() {
        let mut manifest = RunManifest::new(
            command,
            &format!("task = \"{}\"\nlength = {length}\nn = {n}\nseed = {seed}\n", task.name()),
            seed,
            0,
        );
        manifest.complete = true;
        manifest.artifacts = vec![path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default()];
        let sidecar = dir.join(format!(
            "{}.manifest.json",
            path.file_stem().map(|f| f.to_string_lossy()).unwrap_or_default()
        ));
        std::fs::write(&sidecar, serde_json::to_string_pretty(&manifest)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_commands_produce_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        generate_jsonl(TaskId::ReverseAdd, 8, 3, 1, &p1, "test").unwrap();
        generate_jsonl(TaskId::ReverseAdd, 8, 3, 1, &p2, "test").unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let text = std::fs::read_to_string(&p1).unwrap();
        assert_eq!(text.lines().count(), 3);
        let rec: Record = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(rec.task, "reverse_add");
        assert!(rec.input.ends_with('='));
        assert!(dir.path().join("a.manifest.json").exists());
    }

    #[test]
    fn different_seed_changes_content() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.jsonl");
        let p2 = dir.path().join("b.jsonl");
        generate_jsonl(TaskId::StringCopy, 6, 5, 1, &p1, "test").unwrap();
        generate_jsonl(TaskId::StringCopy, 6, 5, 2, &p2, "test").unwrap();
        assert_ne!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
