//! CSV serialization: grid functions, lemma reports, piece-norm tables,
//! sparse families and kernels. Floats print with Rust's shortest
//! round-trip formatting, so identical runs produce identical bytes.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::cube::DyadicCube;
use crate::cz::LemmaRow;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::norms::AklTable;
use crate::sparse::SparseFamily;

/// `dim,<d>` / `log_size,<J>` header, then `index,re,im` rows.
pub fn grid_function_to_csv(f: &GridFunction) -> String {
    let mut s = String::new();
    s.push_str(&format!("dim,{}\n", f.dim()));
    s.push_str(&format!("log_size,{}\n", f.log_size()));
    s.push_str("index,re,im\n");
    for (i, v) in f.values().iter().enumerate() {
        s.push_str(&format!("{},{},{}\n", i, v.re, v.im));
    }
    s
}

pub fn grid_function_from_csv(text: &str) -> Result<GridFunction> {
    let mut dim: Option<u8> = None;
    let mut log_size: Option<u32> = None;
    let mut values: Vec<(usize, Complex64)> = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "index,re,im" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        match parts.as_slice() {
            ["dim", v] => dim = v.trim().parse().ok(),
            ["log_size", v] => log_size = v.trim().parse().ok(),
            [i, re, im] => {
                let idx: usize =
                    i.trim().parse().map_err(|e| Error::Parse(format!("index: {e}")))?;
                let re: f64 = re.trim().parse().map_err(|e| Error::Parse(format!("re: {e}")))?;
                let im: f64 = im.trim().parse().map_err(|e| Error::Parse(format!("im: {e}")))?;
                values.push((idx, Complex64::new(re, im)));
            }
            _ => return Err(Error::Parse(format!("unrecognized line: {line}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse("missing dim".into()))?;
    let log_size = log_size.ok_or_else(|| Error::Parse("missing log_size".into()))?;
    let mut f = GridFunction::zero(dim, log_size);
    for (i, v) in values {
        if i >= f.len() {
            return Err(Error::Parse(format!("index {i} out of range")));
        }
        f.values_mut()[i] = v;
    }
    Ok(f)
}

/// `lemma,context,measured,bound,pass` rows.
pub fn lemma_rows_to_csv(rows: &[LemmaRow]) -> String {
    let mut s = String::from("lemma,context,measured,bound,pass\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.lemma,
            r.context.replace(',', ";"),
            r.measured,
            r.bound,
            r.pass
        ));
    }
    s
}

/// `k,ell,lower,upper,method_lower,method_upper` rows.
pub fn akl_table_to_csv(t: &AklTable) -> String {
    let mut s = String::new();
    s.push_str(&format!("p,{}\nr,{}\nq,{}\n", t.p, t.r, t.q));
    s.push_str("k,ell,lower,upper,method_lower,method_upper\n");
    for ((k, ell), est) in &t.entries {
        s.push_str(&format!(
            "{},{},{},{},{:?},{:?}\n",
            k, ell, est.lower, est.upper, est.method_lower, est.method_upper
        ));
    }
    s
}

/// `corner0,corner1,log_side,subtree_mass,budget` rows.
pub fn sparse_family_to_csv(f: &SparseFamily) -> String {
    let mut s = String::new();
    s.push_str(&format!("gamma,{}\n", f.gamma));
    s.push_str("corner0,corner1,log_side,subtree_mass,budget\n");
    for (q, mass, budget) in &f.packing_certificate {
        s.push_str(&format!("{},{},{},{},{}\n", q.corner[0], q.corner[1], q.log_side, mass, budget));
    }
    s
}

/// Decomposition summary: per-generation cube counts and coefficient
/// statistics.
pub fn atomic_summary_to_csv(dec: &crate::atomic::AtomicDecomposition) -> String {
    let mut s = String::from("mu,cubes,hosts,gamma_max,gamma_l2\n");
    let mut mus: Vec<i32> = dec.subatoms.iter().map(|x| x.mu).collect();
    mus.sort_unstable();
    mus.dedup();
    for mu in mus {
        let cubes = dec.subatoms.iter().filter(|x| x.mu == mu).count();
        let hosts: std::collections::BTreeSet<DyadicCube> = dec
            .subatoms
            .iter()
            .filter(|x| x.mu == mu)
            .map(|x| x.host)
            .collect();
        let mut gmax = 0.0f64;
        let mut gl2 = 0.0f64;
        for w in &hosts {
            let g = dec.gamma(w, mu);
            gmax = gmax.max(g);
            gl2 += w.volume() as f64 * g * g;
        }
        s.push_str(&format!("{},{},{},{},{}\n", mu, cubes, hosts.len(), gmax, gl2.sqrt()));
    }
    s
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn grid_function_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = GridFunction::random_gaussian(2, 3, &mut rng);
        let s = grid_function_to_csv(&f);
        let g = grid_function_from_csv(&s).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f = GridFunction::random_gaussian(1, 4, &mut rng);
        assert_eq!(grid_function_to_csv(&f), grid_function_to_csv(&f.clone()));
    }
}
