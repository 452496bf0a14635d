use std::path::Path;

use crate::failure::Failure;

pub fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(|e| Failure::other(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::other(format!("{}: {e}", path.display())))
}
