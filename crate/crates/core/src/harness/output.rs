//! In-memory artifacts, flushed to disk by a single writer after a run succeeds.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

impl Artifact {
    pub fn csv<I, R>(name: impl Into<String>, header: &[&str], rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let name = name.into();
        let csv_err = |e: csv::Error| Error::Contract(format!("csv encoding of {name}: {e}"));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let contents = w
            .into_inner()
            .map_err(|e| Error::Contract(format!("csv encoding of {name}: {e}")))?;
        Ok(Self { name, contents })
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Result<Self> {
        let name = name.into();
        let mut contents = serde_json::to_vec_pretty(value)
            .map_err(|e| Error::Contract(format!("json encoding of {name}: {e}")))?;
        contents.push(b'\n');
        Ok(Self { name, contents })
    }
}

/// Formats a float with the shortest representation that round-trips.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Writes artifacts in order; returns their paths.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| Error::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let a = Artifact::csv("t.csv", &["x", "y"], vec![vec![num(1.0), num(0.5)], vec![num(2.0), num(1e-20)]]).unwrap();
        assert_eq!(String::from_utf8(a.contents).unwrap(), "x,y\n1.0,0.5\n2.0,1e-20\n");
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = Artifact::json("r.json", &serde_json::json!({"a": 1})).unwrap();
        let paths = write_all(&dir.path().join("sub"), &[a]).unwrap();
        assert_eq!(std::fs::read_to_string(&paths[0]).unwrap(), "{\n  \"a\": 1\n}\n");
    }
}
