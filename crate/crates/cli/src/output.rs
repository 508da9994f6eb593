use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hdgstokes::CsrMatrix;
use serde::Serialize;

use crate::CliError;

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

pub fn write_matrix(dir: &Path, name: &str, a: &CsrMatrix) -> Result<(), CliError> {
    a.write_matrix_market(BufWriter::new(File::create(dir.join(name))?))?;
    Ok(())
}

/// Writes a vector as an `n x 1` coordinate matrix.
pub fn write_vector(dir: &Path, name: &str, v: &[f64]) -> Result<(), CliError> {
    let rows: Vec<usize> = (0..v.len()).collect();
    let a = CsrMatrix::from_triplets(v.len(), 1, &rows, &vec![0; v.len()], v);
    write_matrix(dir, name, &a)
}
