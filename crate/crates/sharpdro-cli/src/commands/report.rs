//! `report`: merge result tables from several run directories.

use std::path::{Path, PathBuf};

use crate::manifest::RunManifest;
use crate::output::{write_text, RESULT_HEADER};
use crate::CliError;

pub fn run(out: &Path, runs: &[PathBuf], force: bool) -> Result<(), CliError> {
    if runs.is_empty() {
        return Err(CliError::Usage("report needs at least one run directory".to_string()));
    }

    let mut merged = String::from(RESULT_HEADER);
    merged.push('\n');
    let mut tool_version: Option<String> = None;

    for dir in runs {
        let manifest = RunManifest::load(dir)?;
        match &tool_version {
            None => tool_version = Some(manifest.tool_version.clone()),
            Some(v) if *v != manifest.tool_version => {
                if !force {
                    return Err(CliError::Usage(format!(
                        "tool version mismatch: {} was produced by {}, expected {} \
                         (pass --force to merge anyway)",
                        dir.display(),
                        manifest.tool_version,
                        v
                    )));
                }
            }
            _ => {}
        }

        // a run directory holds either results.csv (train) or compare.csv
        let candidates = [dir.join("results.csv"), dir.join("compare.csv")];
        let path = candidates
            .iter()
            .find(|p| p.exists())
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{} holds neither results.csv nor compare.csv",
                    dir.display()
                ))
            })?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("reading {}: {e}", path.display()), None))?;
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header == RESULT_HEADER => {}
            _ => {
                return Err(CliError::Usage(format!(
                    "{} does not carry the expected result header",
                    path.display()
                )))
            }
        }
        for line in lines {
            merged.push_str(line);
            merged.push('\n');
        }
    }

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display()), None))?;
        }
    }
    write_text(out, &merged)?;
    println!("merged {} run directories into {}", runs.len(), out.display());
    Ok(())
}
