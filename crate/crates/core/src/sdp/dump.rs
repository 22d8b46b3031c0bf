//! Plain-text problem and solution dumps. Format: docs/sdp-dump.md.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::{Functional, SdpProblem, SdpSolution, SdpStatus, Sense};
use crate::error::{Error, Result};

fn write_functional(out: &mut String, f: &Functional) {
    for t in &f.terms {
        let _ = writeln!(out, "{} {} {} {:e} {:e}", t.block, t.row, t.col, t.coeff.re, t.coeff.im);
    }
}

pub fn write_problem(p: &SdpProblem) -> String {
    let mut out = String::from("sdp 1\n");
    let sense = match p.sense {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize",
    };
    let _ = writeln!(out, "sense {sense}");
    let dims: Vec<String> = p.block_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "blocks {} {}", p.block_dims.len(), dims.join(" "));
    let _ = writeln!(out, "objective {}", p.objective.terms.len());
    write_functional(&mut out, &p.objective);
    let _ = writeln!(out, "constraints {}", p.constraints.len());
    for c in &p.constraints {
        let _ = writeln!(out, "row {:e} {}", c.rhs, c.functional.terms.len());
        write_functional(&mut out, &c.functional);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        loop {
            match self.it.next() {
                None => return Err(Error::InvalidArgument("unexpected end of SDP dump".into())),
                Some((n, l)) => {
                    let l = l.split('#').next().unwrap_or("").trim();
                    if !l.is_empty() {
                        return Ok((n + 1, l.split_whitespace().collect()));
                    }
                }
            }
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, toks) = self.next()?;
        if toks[0] != kw {
            return Err(bad(n, &format!("expected `{kw}`")));
        }
        Ok((n, toks))
    }
}

fn bad(line: usize, msg: &str) -> Error {
    Error::InvalidArgument(format!("SDP dump line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&&str>) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| bad(line, "malformed number"))
}

fn read_terms(lines: &mut Lines, count: usize) -> Result<Functional> {
    let mut f = Functional::new();
    for _ in 0..count {
        let (n, t) = lines.next()?;
        if t.len() != 5 {
            return Err(bad(n, "term needs `block row col re im`"));
        }
        let coeff = Complex64::new(num(n, t.get(3))?, num(n, t.get(4))?);
        f.add(num(n, t.first())?, num(n, t.get(1))?, num(n, t.get(2))?, coeff);
    }
    Ok(f)
}

pub fn parse_problem(text: &str) -> Result<SdpProblem> {
    let mut lines = Lines { it: text.lines().enumerate() };
    let (n, t) = lines.keyword("sdp")?;
    if t.get(1) != Some(&"1") {
        return Err(bad(n, "unsupported version"));
    }
    let (n, t) = lines.keyword("sense")?;
    let sense = match t.get(1) {
        Some(&"minimize") => Sense::Minimize,
        Some(&"maximize") => Sense::Maximize,
        _ => return Err(bad(n, "sense must be minimize or maximize")),
    };
    let (n, t) = lines.keyword("blocks")?;
    let nb: usize = num(n, t.get(1))?;
    if t.len() != nb + 2 {
        return Err(bad(n, "block count does not match"));
    }
    let dims = (0..nb).map(|k| num(n, t.get(k + 2))).collect::<Result<Vec<usize>>>()?;
    let mut p = SdpProblem::new(dims, sense);
    let (n, t) = lines.keyword("objective")?;
    p.objective = read_terms(&mut lines, num(n, t.get(1))?)?;
    let (n, t) = lines.keyword("constraints")?;
    let m: usize = num(n, t.get(1))?;
    for _ in 0..m {
        let (n, t) = lines.keyword("row")?;
        let rhs: f64 = num(n, t.get(1))?;
        let f = read_terms(&mut lines, num(n, t.get(2))?)?;
        p.add_constraint(f, rhs);
    }
    lines.keyword("end")?;
    p.check()?;
    Ok(p)
}

pub fn write_solution(s: &SdpSolution) -> String {
    let status = match s.status {
        SdpStatus::Optimal => "optimal",
        SdpStatus::MaxIter => "max_iter",
        SdpStatus::Infeasible => "infeasible",
        SdpStatus::NumericalFailure => "numerical_failure",
    };
    let mut out = String::from("solution 1\n");
    let _ = writeln!(out, "status {status}");
    let _ = writeln!(out, "value {:e}", s.value);
    let _ = writeln!(out, "dual_value {:e}", s.dual_value);
    let _ = writeln!(out, "residuals {:e} {:e} {:e}", s.primal_residual, s.dual_residual, s.gap);
    let _ = writeln!(out, "iterations {}", s.iterations);
    for (k, b) in s.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {k} {}", b.nrows());
        for r in 0..b.nrows() {
            let row: Vec<String> = (0..b.ncols()).map(|c| format!("{:e} {:e}", b[(r, c)].re, b[(r, c)].im)).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    let ys: Vec<String> = s.dual_values.iter().map(|y| format!("{y:e}")).collect();
    let _ = writeln!(out, "duals {} {}", ys.len(), ys.join(" "));
    out.push_str("end\n");
    out
}
