//! SDPA sparse format (".dat-s") export and import.
//!
//! The moment problem min c.y s.t. F0 + sum y_k A_k >= 0 is written in the
//! standard SDPA dual form min c.x s.t. sum x_i F_i - F0_sdpa >= 0 with
//! F_i = A_i and F0_sdpa = -F0. Entries are 1-based upper-triangle
//! (matno blkno i j value); matno 0 is the constant matrix. Comment lines
//! starting with '*' carry provenance metadata.

use super::problem::MomentProblem;
use super::solver::DenseSdp;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt::Write as _;
use std::path::Path;

/// Serialize the problem to SDPA sparse format. `comments` are written as
/// leading '*' lines (metadata such as scenario, m, level, config hash).
pub fn export_sdpa(problem: &MomentProblem, path: &Path, comments: &[String]) -> Result<()> {
    let sdp = problem.to_dense_sdp();
    let n = sdp.f0.nrows();
    let k = sdp.constraints.len();
    let mut out = String::new();
    for c in comments {
        writeln!(out, "*{c}").expect("string write");
    }
    writeln!(out, "*objective-constant {:.17e}", problem.obj_const).expect("string write");
    writeln!(out, "{k}").expect("string write");
    writeln!(out, "1").expect("string write");
    writeln!(out, "{n}").expect("string write");
    let cs: Vec<String> = sdp.c.iter().map(|v| format!("{v:.17e}")).collect();
    writeln!(out, "{}", cs.join(" ")).expect("string write");
    // constant matrix: F0_sdpa = -F0
    for i in 0..n {
        for j in i..n {
            let v = -sdp.f0[(i, j)];
            if v != 0.0 {
                writeln!(out, "0 1 {} {} {:.17e}", i + 1, j + 1, v).expect("string write");
            }
        }
    }
    for (idx, a) in sdp.constraints.iter().enumerate() {
        for &(i, j, v) in a {
            writeln!(out, "{} 1 {} {} {:.17e}", idx + 1, i + 1, j + 1, v).expect("string write");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a single-block SDPA sparse file back into the dense form
/// min c.y s.t. F0 + sum y_k A_k >= 0.
pub fn import_sdpa(path: &Path) -> Result<DenseSdp> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('*') && !l.starts_with('"'));
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| Error::Config(format!("SDPA file truncated before {what}")))
    };
    let parse_err = |what: &str, tok: &str| {
        Error::Config(format!("SDPA file: cannot parse {what} from '{tok}'"))
    };
    let k: usize = {
        let l = next("mDIM")?;
        l.split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("mDIM", l))?
    };
    let nblock: usize = {
        let l = next("nBLOCK")?;
        l.split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("nBLOCK", l))?
    };
    if nblock != 1 {
        return Err(Error::Config(format!(
            "only single-block SDPA files are supported, got nBLOCK = {nblock}"
        )));
    }
    let n: i64 = {
        let l = next("blockStruct")?;
        let cleaned: String = l
            .chars()
            .map(|c| if c == '(' || c == ')' || c == ',' || c == '{' || c == '}' { ' ' } else { c })
            .collect();
        cleaned
            .split_whitespace()
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("blockStruct", l))?
    };
    if n <= 0 {
        return Err(Error::Config("diagonal blocks are not supported".to_string()));
    }
    let n = n as usize;
    let c: Vec<f64> = {
        let l = next("c vector")?;
        let cleaned: String = l
            .chars()
            .map(|c| if c == ',' || c == '{' || c == '}' { ' ' } else { c })
            .collect();
        let vals: std::result::Result<Vec<f64>, _> =
            cleaned.split_whitespace().map(str::parse).collect();
        vals.map_err(|_| parse_err("c vector", l))?
    };
    if c.len() != k {
        return Err(Error::Config(format!(
            "SDPA c vector has {} entries, expected {k}",
            c.len()
        )));
    }
    let mut f0 = DMatrix::zeros(n, n);
    let mut constraints = vec![Vec::new(); k];
    for l in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(parse_err("entry line", l));
        }
        let matno: usize = toks[0].parse().map_err(|_| parse_err("matno", l))?;
        let blk: usize = toks[1].parse().map_err(|_| parse_err("blkno", l))?;
        let i: usize = toks[2].parse().map_err(|_| parse_err("row", l))?;
        let j: usize = toks[3].parse().map_err(|_| parse_err("col", l))?;
        let v: f64 = toks[4].parse().map_err(|_| parse_err("value", l))?;
        if blk != 1 || i == 0 || j == 0 || i > n || j > n || matno > k {
            return Err(parse_err("entry indices", l));
        }
        let (i, j) = (i.min(j) - 1, i.max(j) - 1);
        if matno == 0 {
            // file stores -F0
            f0[(i, j)] = -v;
            f0[(j, i)] = -v;
        } else {
            constraints[matno - 1].push((i, j, v));
        }
    }
    Ok(DenseSdp { f0, constraints, c })
}
