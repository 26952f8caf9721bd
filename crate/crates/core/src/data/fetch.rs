use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{Error, Result};

/// Public host of the TU benchmark archives.
pub const DEFAULT_BASE_URL: &str = "https://www.chrsmrrs.com/graphkerneldatasets";

/// Datasets the fetcher knows, with the optional files each archive must
/// contain beyond the three mandatory ones.
pub const KNOWN_DATASETS: &[(&str, &[&str])] = &[
    ("ENZYMES", &["node_labels", "node_attributes"]),
    ("PROTEINS", &["node_labels", "node_attributes"]),
    ("DD", &["node_labels"]),
    ("NCI1", &["node_labels"]),
    ("NCI109", &["node_labels"]),
    ("Mutagenicity", &["node_labels"]),
    ("MUTAG", &["node_labels"]),
];

const MANDATORY: &[&str] = &["A", "graph_indicator", "graph_labels"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    /// Directory holding `<name>_A.txt` and friends.
    pub path: PathBuf,
    pub cache_hit: bool,
}

fn manifest(name: &str) -> Result<Vec<String>> {
    let (_, extra) = KNOWN_DATASETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::UnknownDataset(name.to_string()))?;
    Ok(MANDATORY
        .iter()
        .chain(extra.iter())
        .map(|suffix| format!("{name}_{suffix}.txt"))
        .collect())
}

fn missing_files(dir: &Path, files: &[String]) -> Vec<String> {
    files
        .iter()
        .filter(|f| !dir.join(f).is_file())
        .cloned()
        .collect()
}

/// Ensures `<cache>/<name>/` holds the dataset, downloading
/// `<base_url>/<name>.zip` when it does not. A populated cache is returned
/// without touching the network.
pub fn fetch_dataset(
    name: &str,
    base_url: &str,
    cache_dir: impl AsRef<Path>,
) -> Result<FetchOutcome> {
    let files = manifest(name)?;
    let target = cache_dir.as_ref().join(name);
    if missing_files(&target, &files).is_empty() {
        return Ok(FetchOutcome {
            path: target,
            cache_hit: true,
        });
    }

    let url = format!("{}/{name}.zip", base_url.trim_end_matches('/'));
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(600))
        .build()
        .map_err(|e| Error::Transport(e.to_string()))?;
    let resp = client
        .get(&url)
        .send()
        .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;
    if !resp.status().is_success() {
        return Err(Error::Transport(format!(
            "GET {url}: HTTP {}",
            resp.status()
        )));
    }
    let bytes = resp
        .bytes()
        .map_err(|e| Error::Transport(format!("GET {url}: {e}")))?;

    unpack(&bytes, name, &target)?;
    let missing = missing_files(&target, &files);
    if !missing.is_empty() {
        return Err(Error::Format {
            file: format!("{name}.zip"),
            line: None,
            msg: format!("archive lacks {}", missing.join(", ")),
        });
    }
    Ok(FetchOutcome {
        path: target,
        cache_hit: false,
    })
}

/// Extracts every `<name>_*.txt` member (at any directory depth) into
/// `target`, flattening paths.
fn unpack(bytes: &[u8], name: &str, target: &Path) -> Result<()> {
    let bad_zip = |e: zip::result::ZipError| Error::Format {
        file: format!("{name}.zip"),
        line: None,
        msg: e.to_string(),
    };
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(bad_zip)?;
    fs::create_dir_all(target).map_err(|e| Error::io(target, e))?;
    let prefix = format!("{name}_");
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(bad_zip)?;
        if entry.is_dir() {
            continue;
        }
        let Some(file_name) = Path::new(entry.name())
            .file_name()
            .and_then(|f| f.to_str())
            .map(str::to_owned)
        else {
            continue;
        };
        if !file_name.starts_with(&prefix) || !file_name.ends_with(".txt") {
            continue;
        }
        let mut contents = Vec::with_capacity(entry.size() as usize);
        entry
            .read_to_end(&mut contents)
            .map_err(|e| Error::io(entry.name().to_owned(), e))?;
        let out = target.join(&file_name);
        fs::write(&out, contents).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}
