use pyo3::prelude::*;

#[pymodule]
fn sparsedom_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
