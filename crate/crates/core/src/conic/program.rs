//! Solver-neutral conic program in the standard form
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x + c
//! subject to  b − A x ∈ K₁ × K₂ × …
//! ```
//!
//! where each `Kᵢ` is a zero cone, a nonnegative orthant, a second-order cone
//! `{(t, u) : ‖u‖ ≤ t}` or a PSD cone stored as the upper triangle of a
//! symmetric matrix in column-major order with off-diagonals scaled by √2.
//! `P` is kept as upper-triangular triplets; repeated triplets add up.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `Σ coeff·x[index] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        AffineExpr::term(index, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        AffineExpr {
            terms: vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, index: usize, coeff: f64) -> &mut Self {
        if coeff != 0.0 {
            self.terms.push((index, coeff));
        }
        self
    }

    pub fn add_expr(&mut self, other: &AffineExpr, scale: f64) -> &mut Self {
        for &(i, c) in &other.terms {
            self.add_term(i, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, s: f64) -> AffineExpr {
        let mut out = AffineExpr::constant(0.0);
        out.add_expr(self, s);
        out
    }

    pub fn plus(mut self, other: &AffineExpr) -> AffineExpr {
        self.add_expr(other, 1.0);
        self
    }

    pub fn plus_const(mut self, c: f64) -> AffineExpr {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// Dimension including the leading scalar.
    Soc(usize),
    /// Side length of the symmetric matrix.
    Psd(usize),
}

impl Cone {
    /// Number of rows the cone occupies.
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonneg(d) | Cone::Soc(d) => d,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    n_vars: usize,
    p: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    objective_constant: f64,
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new(n_vars: usize) -> Self {
        ConicProgram {
            n_vars,
            p: Vec::new(),
            q: vec![0.0; n_vars],
            objective_constant: 0.0,
            a: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn p_triplets(&self) -> &[(usize, usize, f64)] {
        &self.p
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn a_triplets(&self) -> &[(usize, usize, f64)] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    fn check_index(&self, i: usize) {
        assert!(i < self.n_vars, "variable {i} out of range ({})", self.n_vars);
    }

    /// Adds `xᵀ Q x` over the variables `idx` (`Q` symmetric).
    pub fn add_quadratic(&mut self, q: &DMatrix<f64>, idx: &[usize]) {
        assert_eq!(q.nrows(), idx.len());
        for (a, &ia) in idx.iter().enumerate() {
            self.check_index(ia);
            for (b, &ib) in idx.iter().enumerate() {
                let v = q[(a, b)];
                if v == 0.0 {
                    continue;
                }
                // P = 2Q; an upper entry stands for both symmetric halves
                if ia <= ib {
                    self.p.push((ia, ib, 2.0 * v));
                }
            }
        }
    }

    /// Adds an affine term to the objective.
    pub fn add_linear(&mut self, expr: &AffineExpr) {
        for &(i, c) in &expr.terms {
            self.check_index(i);
            self.q[i] += c;
        }
        self.objective_constant += expr.constant;
    }

    fn push_row(&mut self, expr: &AffineExpr, scale: f64) {
        let row = self.b.len();
        for &(i, c) in &expr.terms {
            self.check_index(i);
            if c != 0.0 {
                self.a.push((row, i, -c * scale));
            }
        }
        self.b.push(expr.constant * scale);
    }

    fn push_cone(&mut self, cone: Cone) {
        match (self.cones.last_mut(), cone) {
            (Some(Cone::Nonneg(d)), Cone::Nonneg(e)) => *d += e,
            (Some(Cone::Zero(d)), Cone::Zero(e)) => *d += e,
            _ => self.cones.push(cone),
        }
    }

    /// `expr = 0`.
    pub fn add_zero(&mut self, expr: &AffineExpr) {
        self.push_row(expr, 1.0);
        self.push_cone(Cone::Zero(1));
    }

    /// `expr ≥ 0`.
    pub fn add_nonneg(&mut self, expr: &AffineExpr) {
        self.push_row(expr, 1.0);
        self.push_cone(Cone::Nonneg(1));
    }

    /// `‖(e₁, …)‖ ≤ e₀`.
    pub fn add_soc(&mut self, exprs: &[AffineExpr]) {
        assert!(exprs.len() >= 2, "a second-order cone needs at least two rows");
        for e in exprs {
            self.push_row(e, 1.0);
        }
        self.push_cone(Cone::Soc(exprs.len()));
    }

    /// `M ⪰ 0` for the symmetric `side × side` matrix whose upper-triangle
    /// entry `(i, j)` is `entry(i, j)`.
    pub fn add_psd(&mut self, side: usize, mut entry: impl FnMut(usize, usize) -> AffineExpr) {
        for j in 0..side {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                let e = entry(i, j);
                self.push_row(&e, scale);
            }
        }
        self.push_cone(Cone::Psd(side));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.objective_constant;
        for (i, &qi) in self.q.iter().enumerate() {
            v += qi * x[i];
        }
        for &(i, j, p) in &self.p {
            let w = if i == j { 0.5 } else { 1.0 };
            v += w * p * x[i] * x[j];
        }
        v
    }

    /// Slack `s = b − A x`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a {
            s[r] -= v * x[c];
        }
        s
    }

    /// Largest distance of the slack from its cone, per cone block.
    pub fn cone_violations(&self, x: &[f64]) -> Vec<f64> {
        let s = self.slack(x);
        let mut out = Vec::with_capacity(self.cones.len());
        let mut at = 0;
        for cone in &self.cones {
            let block = &s[at..at + cone.rows()];
            at += cone.rows();
            let viol = match *cone {
                Cone::Zero(_) => block.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
                Cone::Nonneg(_) => block.iter().fold(0.0_f64, |a, v| a.max(-v)),
                Cone::Soc(_) => {
                    let tail = block[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                    (tail - block[0]).max(0.0)
                }
                Cone::Psd(n) => {
                    let m = unpack_psd(block, n);
                    let min = m.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &v| a.min(v));
                    (-min).max(0.0)
                }
            };
            out.push(viol);
        }
        out
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.cone_violations(x).into_iter().fold(0.0, f64::max)
    }

    /// Same program over renamed variables: old variable `i` becomes new
    /// variable `perm[i]`. A solution `y` of the result maps back through
    /// `x[i] = y[perm[i]]`.
    pub fn permute_variables(&self, perm: &[usize]) -> Result<ConicProgram> {
        if perm.len() != self.n_vars {
            return Err(Error::invalid("permutation length differs from the variable count"));
        }
        let mut seen = vec![false; self.n_vars];
        for &p in perm {
            if p >= self.n_vars || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        let mut out = self.clone();
        out.p = self
            .p
            .iter()
            .map(|&(i, j, v)| {
                let (a, b) = (perm[i], perm[j]);
                (a.min(b), a.max(b), v)
            })
            .collect();
        out.q = vec![0.0; self.n_vars];
        for (i, &qi) in self.q.iter().enumerate() {
            out.q[perm[i]] = qi;
        }
        out.a = self.a.iter().map(|&(r, c, v)| (r, perm[c], v)).collect();
        Ok(out)
    }

    /// Plain-text triplet dump, one record per line:
    ///
    /// ```text
    /// conic-program 1
    /// vars <n>
    /// rows <m>
    /// c <objective constant>
    /// P <row> <col> <value>      upper triangle, repeats add up
    /// q <index> <value>          nonzeros only
    /// A <row> <col> <value>
    /// b <row> <value>            nonzeros only
    /// cone zero|nonneg|soc <rows> | cone psd <side>
    /// ```
    ///
    /// Floats use the shortest representation that parses back exactly.
    pub fn to_triplet_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic-program 1");
        let _ = writeln!(out, "vars {}", self.n_vars);
        let _ = writeln!(out, "rows {}", self.b.len());
        let _ = writeln!(out, "c {:?}", self.objective_constant);
        for &(i, j, v) in &self.p {
            let _ = writeln!(out, "P {i} {j} {v:?}");
        }
        for (i, &v) in self.q.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = writeln!(out, "q {i} {v:?}");
        }
        for &(r, c, v) in &self.a {
            let _ = writeln!(out, "A {r} {c} {v:?}");
        }
        for (r, &v) in self.b.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = writeln!(out, "b {r} {v:?}");
        }
        for cone in &self.cones {
            let _ = match *cone {
                Cone::Zero(d) => writeln!(out, "cone zero {d}"),
                Cone::Nonneg(d) => writeln!(out, "cone nonneg {d}"),
                Cone::Soc(d) => writeln!(out, "cone soc {d}"),
                Cone::Psd(n) => writeln!(out, "cone psd {n}"),
            };
        }
        out
    }

    pub fn from_triplet_text(text: &str) -> Result<ConicProgram> {
        let bad = |line: usize, msg: &str| Error::invalid(format!("triplet text line {line}: {msg}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "conic-program 1")) => {}
            Some((n, _)) => return Err(bad(n, "unknown format tag")),
            None => return Err(bad(1, "empty input")),
        }
        let mut prog: Option<ConicProgram> = None;
        let mut rows = 0usize;
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                f.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| bad(n, "expected a number"))
            };
            let idx = |k: usize| -> Result<usize> {
                f.get(k)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| bad(n, "expected an index"))
            };
            if f[0] == "vars" {
                prog = Some(ConicProgram::new(idx(1)?));
                continue;
            }
            let p = prog.as_mut().ok_or_else(|| bad(n, "`vars` must come first"))?;
            let in_vars = |i: usize| if i < p.n_vars { Ok(i) } else { Err(bad(n, "variable index out of range")) };
            match f[0] {
                "rows" => {
                    rows = idx(1)?;
                    p.b = vec![0.0; rows];
                }
                "c" => p.objective_constant = num(1)?,
                "P" => {
                    let (i, j) = (in_vars(idx(1)?)?, in_vars(idx(2)?)?);
                    p.p.push((i, j, num(3)?));
                }
                "q" => {
                    let i = in_vars(idx(1)?)?;
                    p.q[i] = num(2)?;
                }
                "A" => {
                    let r = idx(1)?;
                    if r >= rows {
                        return Err(bad(n, "row index out of range"));
                    }
                    p.a.push((r, in_vars(idx(2)?)?, num(3)?));
                }
                "b" => {
                    let r = idx(1)?;
                    if r >= rows {
                        return Err(bad(n, "row index out of range"));
                    }
                    p.b[r] = num(2)?;
                }
                "cone" => {
                    let d = idx(2)?;
                    p.cones.push(match f.get(1).copied() {
                        Some("zero") => Cone::Zero(d),
                        Some("nonneg") => Cone::Nonneg(d),
                        Some("soc") => Cone::Soc(d),
                        Some("psd") => Cone::Psd(d),
                        _ => return Err(bad(n, "unknown cone")),
                    });
                }
                _ => return Err(bad(n, "unknown record")),
            }
        }
        let p = prog.ok_or_else(|| bad(1, "missing `vars`"))?;
        let covered: usize = p.cones.iter().map(Cone::rows).sum();
        if covered != p.b.len() {
            return Err(Error::invalid(format!(
                "cones cover {covered} rows but the program has {}",
                p.b.len()
            )));
        }
        Ok(p)
    }
}

/// Rebuilds the symmetric matrix from a scaled upper-triangle block.
pub fn unpack_psd(block: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            let v = if i == j { block[k] } else { block[k] / std::f64::consts::SQRT_2 };
            m[(i, j)] = v;
            m[(j, i)] = v;
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConicProgram {
        // min x0² + x1² − x0  s.t.  x0 + x1 ≤ 1, ‖(x0, x1)‖ ≤ 2, [[1, x0],[x0, 1]] ⪰ 0
        let mut p = ConicProgram::new(2);
        p.add_quadratic(&DMatrix::identity(2, 2), &[0, 1]);
        p.add_linear(&AffineExpr::term(0, -1.0));
        let mut e = AffineExpr::constant(1.0);
        e.add_term(0, -1.0).add_term(1, -1.0);
        p.add_nonneg(&e);
        p.add_soc(&[AffineExpr::constant(2.0), AffineExpr::var(0), AffineExpr::var(1)]);
        p.add_psd(2, |i, j| if i == j { AffineExpr::constant(1.0) } else { AffineExpr::var(0) });
        p
    }

    #[test]
    fn objective_and_slack() {
        let p = small();
        assert_eq!(p.objective_value(&[0.5, 0.0]), 0.25 - 0.5);
        assert_eq!(p.slack(&[0.25, 0.25]), vec![0.5, 2.0, 0.25, 0.25, 1.0, 0.25 * std::f64::consts::SQRT_2, 1.0]);
        assert_eq!(p.max_violation(&[0.25, 0.25]), 0.0);
        assert!(p.max_violation(&[3.0, 0.0]) > 0.0);
    }

    #[test]
    fn triplet_text_round_trips() {
        let p = small();
        let back = ConicProgram::from_triplet_text(&p.to_triplet_text()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn triplet_text_rejects_garbage() {
        assert!(ConicProgram::from_triplet_text("").is_err());
        assert!(ConicProgram::from_triplet_text("conic-program 1\nvars 1\nrows 1\nq 4 1.0\n").is_err());
        assert!(ConicProgram::from_triplet_text("conic-program 1\nvars 1\nrows 2\ncone nonneg 1\n").is_err());
    }

    #[test]
    fn permutation_preserves_values() {
        let p = small();
        let perm = [1, 0];
        let r = p.permute_variables(&perm).unwrap();
        let x = [0.3, -0.2];
        let y = [x[1], x[0]];
        assert!((p.objective_value(&x) - r.objective_value(&y)).abs() < 1e-15);
        assert_eq!(p.slack(&x), r.slack(&y));
        assert!(p.permute_variables(&[0, 0]).is_err());
    }

    #[test]
    fn adjacent_orthants_merge() {
        let mut p = ConicProgram::new(1);
        p.add_nonneg(&AffineExpr::var(0));
        p.add_nonneg(&AffineExpr::var(0));
        p.add_zero(&AffineExpr::var(0));
        assert_eq!(p.cones(), &[Cone::Nonneg(2), Cone::Zero(1)]);
    }
}
