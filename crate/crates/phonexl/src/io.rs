//! Reading and writing the text formats.

use std::fs;
use std::path::Path;

use phonexl_core::corpus::{parse_dataset, write_dataset, Dataset, Role, TagSet, Vocabulary, ABSENT};
use phonexl_core::dictionary::{parse_muse, BilingualDictionary};
use phonexl_core::transcription::TableSet;

use crate::error::Error;

pub fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

/// Writes `bytes`, creating parent directories.
pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Error> {
    let io = |source| Error::Io {
        path: path.into(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

pub fn create_dir(path: &Path) -> Result<(), Error> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

pub fn load_dataset(path: &Path, tags: &TagSet, role: Role) -> Result<Dataset, Error> {
    parse_dataset(&read(path)?, tags, role).map_err(|e| Error::parse(path, e))
}

/// Loads a corpus whose tag inventory is not known in advance; labels are
/// collected in order of first appearance. An unlabelled corpus gets the
/// single tag `O`.
pub fn load_dataset_any(path: &Path) -> Result<Dataset, Error> {
    let text = read(path)?;
    let mut labels = scan_labels(&text);
    if labels.is_empty() {
        labels.push("O".into());
    }
    let tags = TagSet::new(labels);
    parse_dataset(&text, &tags, Role::Train).map_err(|e| Error::parse(path, e))
}

fn scan_labels(text: &str) -> Vec<String> {
    let mut seen = Vec::new();
    for l in text.lines().filter(|l| !l.starts_with('#')) {
        if let Some(label) = l.split('\t').nth(2) {
            if label != ABSENT && !seen.iter().any(|s: &String| s == label) {
                seen.push(label.to_string());
            }
        }
    }
    seen
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<(), Error> {
    write(path, write_dataset(dataset))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary, Error> {
    Vocabulary::parse(&read(path)?).map_err(|e| Error::parse(path, e))
}

pub fn load_dictionary(path: &Path) -> Result<BilingualDictionary, Error> {
    BilingualDictionary::parse_tsv(&read(path)?).map_err(|e| Error::parse(path, e))
}

pub fn load_muse(path: &Path) -> Result<Vec<(String, String)>, Error> {
    parse_muse(&read(path)?).map_err(|e| Error::parse(path, e))
}

/// Bundled tables, overridden by every `<lang>.<stage>.tsv` in `dir`.
pub fn load_tables(dir: Option<&Path>) -> Result<TableSet, Error> {
    let mut set = TableSet::bundled();
    let Some(dir) = dir else {
        return Ok(set);
    };
    let io = |source| Error::Io {
        path: dir.into(),
        source,
    };
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    names.sort();
    for name in names {
        let is_table = [".roman.tsv", ".ipa.tsv", ".latin-ipa.tsv"]
            .iter()
            .any(|s| name.ends_with(s));
        if is_table {
            let path = dir.join(&name);
            set.load_named(&name, &read(&path)?)
                .map_err(|e| Error::parse(&path, e))?;
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_collected_in_order() {
        let text = "# lang = zh\na\t_\tB-PER\nb\t_\tO\n\n# lang = zh\nc\t_\tB-PER\nd\t_\t_\n";
        assert_eq!(scan_labels(text), ["B-PER", "O"]);
    }

    #[test]
    fn table_dir_overrides_bundled() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("vi.ipa.tsv"), "a\tɐ\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let set = load_tables(Some(dir.path())).unwrap();
        let vi = phonexl_core::Lang::vi();
        assert!(set.to_ipa("a", &vi).unwrap().to_column().starts_with("ɐ"));
        assert!(set.to_ipa("b", &vi).is_err());
    }
}
