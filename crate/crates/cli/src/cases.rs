//! Case layout: `<dir>/<case>/<case>-<suffix><extension>`.

use std::fs;
use std::path::{Path, PathBuf};

use gliofuse_core::CaseId;

use crate::error::{CliError, CliResult};

pub fn case_file(dir: &Path, case: &CaseId, suffix: &str, extension: &str) -> PathBuf {
    dir.join(case.as_str()).join(format!("{case}-{suffix}{extension}"))
}

/// Case directories directly under `dir`, sorted by name. Hidden entries are ignored.
pub fn discover_cases(dir: &Path) -> CliResult<Vec<CaseId>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut cases = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        if !entry.path().is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        cases.push(CaseId::new(name)?);
    }
    cases.sort();
    Ok(cases)
}

/// Cases under `dir` that have a `suffix` file.
pub fn cases_with(dir: &Path, suffix: &str, extension: &str) -> CliResult<Vec<CaseId>> {
    Ok(discover_cases(dir)?
        .into_iter()
        .filter(|c| case_file(dir, c, suffix, extension).is_file())
        .collect())
}

pub fn ensure_case_dir(dir: &Path, case: &CaseId) -> CliResult<()> {
    let d = dir.join(case.as_str());
    fs::create_dir_all(&d).map_err(|e| CliError::Io(format!("{}: {e}", d.display())))
}
