//! Real conic encodings of the beamforming subproblems.
//!
//! Variable layout (blocks present depend on the assembly):
//!
//! * information beamformers: per user `[Re v_k; Im v_k]` (`2N` each);
//! * aggregate energy covariance `S = Σ_k V_k` as `N²` reals: the `N`
//!   diagonal entries, then `Re S_ij, Im S_ij` for each `i < j` in row order;
//! * per-user epigraph scalars: `(x_k, m_k)` for the chance surrogate, `t_k`
//!   for the worst-case bound, none for the nominal model;
//! * `γ = 1/τ` when the time-switching ratio is optimized.
//!
//! Every constraint involves the energy covariances only through their sum,
//! so a single PSD variable carries them; per-user matrices are recovered by
//! [`super::rank_one::split_energy_covariance`].

use super::program::{AffineExpr, ConicProgram};
use super::solver::{ConicSolver, SolveReport, SolveStatus};
use crate::chance::EnergyConstraint;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::linalg::{self, c64, CMat, CVec};
use crate::wmmse::SubproblemObjective;

/// Where the information beamformers come from.
#[derive(Debug, Clone)]
pub enum InfoBlock<'a> {
    /// Minimize the WMMSE quadratic over `v^I`.
    Optimize(&'a SubproblemObjective),
    /// `v^I` is fixed; only its per-BS power enters.
    FixedPower(Vec<f64>),
}

#[derive(Debug, Clone)]
pub enum EnergyBlock {
    Optimize,
    /// `S` is fixed; only its per-BS power enters.
    FixedPower(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauBlock {
    Fixed(f64),
    /// Maximize `γ = 1/τ`.
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n_users: usize,
    pub n_antennas: usize,
    pub info: Option<usize>,
    pub energy: Option<usize>,
    pub epigraph: Option<usize>,
    /// Epigraph scalars per user.
    pub epi_width: usize,
    pub gamma: Option<usize>,
    pub n_vars: usize,
}

impl Layout {
    pub fn info_var(&self, k: usize, i: usize, imag: bool) -> usize {
        let base = self.info.expect("layout has no information block");
        base + 2 * self.n_antennas * k + if imag { self.n_antennas } else { 0 } + i
    }

    /// Indices of `Re S_ij, Im S_ij` (`None` for the imaginary part on the
    /// diagonal). For `i > j` the imaginary index refers to `−Im S_ij`.
    pub fn energy_var(&self, i: usize, j: usize) -> (usize, Option<usize>) {
        let base = self.energy.expect("layout has no energy block");
        let n = self.n_antennas;
        if i == j {
            return (base + i, None);
        }
        let (a, b) = (i.min(j), i.max(j));
        let p = a * n - a * (a + 1) / 2 + (b - a - 1);
        (base + n + 2 * p, Some(base + n + 2 * p + 1))
    }

    pub fn decode_info(&self, x: &[f64]) -> Option<Vec<CVec>> {
        self.info?;
        Some(
            (0..self.n_users)
                .map(|k| {
                    CVec::from_fn(self.n_antennas, |i, _| {
                        c64(x[self.info_var(k, i, false)], x[self.info_var(k, i, true)])
                    })
                })
                .collect(),
        )
    }

    pub fn decode_energy(&self, x: &[f64]) -> Option<CMat> {
        self.energy?;
        let n = self.n_antennas;
        Some(CMat::from_fn(n, n, |i, j| {
            let (re, im) = self.energy_var(i, j);
            let im = im.map_or(0.0, |k| x[k]);
            c64(x[re], if i < j { im } else { -im })
        }))
    }

    pub fn decode_epigraph(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.epigraph {
            None => vec![Vec::new(); self.n_users],
            Some(base) => (0..self.n_users)
                .map(|k| x[base + k * self.epi_width..base + (k + 1) * self.epi_width].to_vec())
                .collect(),
        }
    }
}

/// A complex matrix whose entries are affine in the real variables.
#[derive(Debug, Clone)]
struct HermAffine {
    n: usize,
    re: Vec<AffineExpr>,
    im: Vec<AffineExpr>,
}

impl HermAffine {
    fn zeros(n: usize) -> Self {
        HermAffine {
            n,
            re: vec![AffineExpr::default(); n * n],
            im: vec![AffineExpr::default(); n * n],
        }
    }

    fn re(&self, i: usize, j: usize) -> &AffineExpr {
        &self.re[i * self.n + j]
    }

    fn im(&self, i: usize, j: usize) -> &AffineExpr {
        &self.im[i * self.n + j]
    }

    /// Entry `(a, b)` of the real embedding `[[Re, −Im], [Im, Re]]`.
    fn embedded(&self, a: usize, b: usize) -> AffineExpr {
        let n = self.n;
        match (a < n, b < n) {
            (true, true) => self.re(a, b).clone(),
            (false, false) => self.re(a - n, b - n).clone(),
            (false, true) => self.im(a - n, b).clone(),
            (true, false) => self.im(a, b - n).scaled(-1.0),
        }
    }
}

/// The `N²` Hermitian basis matrices matching the energy parameter order.
fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut b = linalg::zeros_mat(n);
        b[(i, i)] = c64(1.0, 0.0);
        basis.push(b);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut re = linalg::zeros_mat(n);
            re[(i, j)] = c64(1.0, 0.0);
            re[(j, i)] = c64(1.0, 0.0);
            let mut im = linalg::zeros_mat(n);
            im[(i, j)] = c64(0.0, 1.0);
            im[(j, i)] = c64(0.0, -1.0);
            basis.push(re);
            basis.push(im);
        }
    }
    basis
}

/// Builds the conic encodings for one instance.
pub struct Assembler<'a> {
    inst: &'a Instance,
    basis: Vec<CMat>,
    roots: Vec<CMat>,
}

/// A program together with the map from its variables back to beamformers.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub program: ConicProgram,
    pub layout: Layout,
}

/// A decoded solve.
#[derive(Debug, Clone)]
pub struct BlockSolution {
    pub v_info: Option<Vec<CVec>>,
    pub energy_cov: Option<CMat>,
    pub epigraph: Vec<Vec<f64>>,
    pub gamma: Option<f64>,
    pub report: SolveReport,
}

impl<'a> Assembler<'a> {
    pub fn new(inst: &'a Instance) -> Result<Self> {
        let n = inst.num_antennas();
        let roots = inst
            .channels
            .error_cov
            .iter()
            .map(linalg::psd_sqrt)
            .collect::<Result<Vec<_>>>()?;
        Ok(Assembler {
            inst,
            basis: hermitian_basis(n),
            roots,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.inst
    }

    /// Objective, per-BS power constraints, the per-user energy model and
    /// `S ⪰ 0`, for the chosen combination of blocks.
    pub fn assemble(&self, info: InfoBlock<'_>, energy: EnergyBlock, tau: TauBlock) -> Result<Assembly> {
        let inst = self.inst;
        let (k_users, n, n_bs) = (inst.num_users(), inst.num_antennas(), inst.num_bs());
        if let TauBlock::Fixed(t) = tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::invalid(format!("tau must lie in (0, 1), got {t}")));
            }
        }
        let info_fixed = match &info {
            InfoBlock::FixedPower(p) => {
                if p.len() != n_bs {
                    return Err(Error::invalid("fixed information power needs one entry per BS"));
                }
                true
            }
            InfoBlock::Optimize(obj) => {
                if obj.hessian.nrows() != n || obj.linear.len() != k_users {
                    return Err(Error::invalid("objective dimensions do not match the instance"));
                }
                false
            }
        };
        let energy_fixed = match &energy {
            EnergyBlock::FixedPower(p) => {
                if p.len() != n_bs {
                    return Err(Error::invalid("fixed energy power needs one entry per BS"));
                }
                true
            }
            EnergyBlock::Optimize => false,
        };
        if info_fixed && energy_fixed {
            return Err(Error::invalid("nothing left to optimize"));
        }
        if tau == TauBlock::Maximize && (!info_fixed || energy_fixed) {
            return Err(Error::invalid("tau is optimized only with fixed information and free energy beamformers"));
        }

        let mut next = 0;
        let mut take = |count: usize| {
            let at = next;
            next += count;
            at
        };
        let info_at = (!info_fixed).then(|| take(2 * n * k_users));
        let energy_at = (!energy_fixed).then(|| take(n * n));
        let epi_width = match inst.constraint {
            EnergyConstraint::Chance => 2,
            EnergyConstraint::WorstCase { .. } => 1,
            EnergyConstraint::Nominal => 0,
        };
        let epi_at = (!energy_fixed && epi_width > 0).then(|| take(epi_width * k_users));
        let gamma_at = (tau == TauBlock::Maximize).then(|| take(1));
        let layout = Layout {
            n_users: k_users,
            n_antennas: n,
            info: info_at,
            energy: energy_at,
            epigraph: epi_at,
            epi_width: if epi_at.is_some() { epi_width } else { 0 },
            gamma: gamma_at,
            n_vars: next,
        };
        let mut prog = ConicProgram::new(layout.n_vars);

        // objective
        match &info {
            InfoBlock::Optimize(obj) => {
                let q = linalg::embed_hermitian(&obj.hessian);
                for k in 0..k_users {
                    let idx: Vec<usize> = (0..2 * n).map(|i| layout.info_var(k, i % n, i >= n)).collect();
                    prog.add_quadratic(&q, &idx);
                    let mut lin = AffineExpr::default();
                    for i in 0..n {
                        let g = obj.linear[k][i];
                        lin.add_term(layout.info_var(k, i, false), -2.0 * g.re);
                        lin.add_term(layout.info_var(k, i, true), -2.0 * g.im);
                    }
                    prog.add_linear(&lin);
                }
            }
            InfoBlock::FixedPower(_) => {
                if let Some(g) = gamma_at {
                    prog.add_linear(&AffineExpr::term(g, -1.0));
                }
            }
        }

        // per-BS power
        let p = inst.power;
        for (l, block) in inst.bs_blocks.iter().enumerate() {
            let energy_power = match &energy {
                EnergyBlock::Optimize => {
                    let mut e = AffineExpr::default();
                    for i in block.clone() {
                        e.add_term(layout.energy_var(i, i).0, 1.0);
                    }
                    e
                }
                EnergyBlock::FixedPower(v) => AffineExpr::constant(v[l]),
            };
            if !energy_fixed {
                prog.add_nonneg(&energy_power.scaled(-1.0).plus_const(p.p_peak));
            }
            match (&info, tau) {
                (InfoBlock::Optimize(_), TauBlock::Fixed(t)) => {
                    let entries: Vec<AffineExpr> = (0..k_users)
                        .flat_map(|k| {
                            block
                                .clone()
                                .flat_map(move |i| [(k, i, false), (k, i, true)])
                        })
                        .map(|(k, i, im)| AffineExpr::var(layout.info_var(k, i, im)))
                        .collect();
                    let mut peak = vec![AffineExpr::constant(p.p_peak.sqrt())];
                    peak.extend(entries.iter().cloned());
                    prog.add_soc(&peak);
                    // ‖u‖² ≤ s with s = (P_BS − τ·E_l)/(1 − τ), as a rotated cone
                    let s = energy_power.scaled(-t / (1.0 - t)).plus_const(p.p_bs / (1.0 - t));
                    let mut avg = vec![s.scaled(0.5).plus_const(0.5), s.scaled(0.5).plus_const(-0.5)];
                    avg.extend(entries);
                    prog.add_soc(&avg);
                }
                (InfoBlock::FixedPower(ip), TauBlock::Fixed(t)) => {
                    let e = energy_power.scaled(-t).plus_const(p.p_bs - (1.0 - t) * ip[l]);
                    prog.add_nonneg(&e);
                }
                (InfoBlock::FixedPower(ip), TauBlock::Maximize) => {
                    // τE + (1−τ)I ≤ P_BS with τ = 1/γ, multiplied through by γ
                    let mut e = energy_power.scaled(-1.0).plus_const(ip[l]);
                    e.add_term(gamma_at.unwrap(), p.p_bs - ip[l]);
                    prog.add_nonneg(&e);
                }
                (InfoBlock::Optimize(_), TauBlock::Maximize) => unreachable!(),
            }
        }

        if !energy_fixed {
            self.energy_rows(&mut prog, &layout, tau)?;
        }
        if let Some(g) = gamma_at {
            prog.add_nonneg(&AffineExpr::var(g));
        }
        Ok(Assembly { program: prog, layout })
    }

    fn energy_matrix(&self, layout: &Layout) -> HermAffine {
        let n = layout.n_antennas;
        let mut s = HermAffine::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let (re, im) = layout.energy_var(i, j);
                s.re[i * n + j] = AffineExpr::var(re);
                if let Some(im) = im {
                    s.im[i * n + j] = AffineExpr::term(im, if i < j { 1.0 } else { -1.0 });
                }
            }
        }
        s
    }

    /// `Tr(W S)` for Hermitian `W`.
    fn trace_with(&self, layout: &Layout, w: &CMat) -> AffineExpr {
        let base = layout.energy.unwrap();
        let mut e = AffineExpr::default();
        for (p, b) in self.basis.iter().enumerate() {
            e.add_term(base + p, (w * b).trace().re);
        }
        e
    }

    fn energy_rows(&self, prog: &mut ConicProgram, layout: &Layout, tau: TauBlock) -> Result<()> {
        let inst = self.inst;
        let n = layout.n_antennas;
        let base = layout.energy.unwrap();
        let s = self.energy_matrix(layout);
        prog.add_psd(2 * n, |a, b| s.embedded(a, b));

        for k in 0..layout.n_users {
            let h = &inst.channels.h_est[k];
            let req = &inst.reqs[k];
            let root = &self.roots[k];
            // G_nominal − γ·E/η, the part shared by every model
            let mut row = self.trace_with(layout, &linalg::outer(h));
            row.constant += inst.channels.noise_power[k];
            let demand = req.e_min / req.eta;
            match tau {
                TauBlock::Fixed(t) => row.constant -= demand / t,
                TauBlock::Maximize => {
                    row.add_term(layout.gamma.unwrap(), -demand);
                }
            }
            // d = E S ĥ and D = E S E as affine maps of the parameters
            let d_coef: Vec<CVec> = self.basis.iter().map(|b| root * (b * h)).collect();
            let d_re = |i: usize| {
                let mut e = AffineExpr::default();
                for (p, c) in d_coef.iter().enumerate() {
                    e.add_term(base + p, c[i].re);
                }
                e
            };
            let d_im = |i: usize| {
                let mut e = AffineExpr::default();
                for (p, c) in d_coef.iter().enumerate() {
                    e.add_term(base + p, c[i].im);
                }
                e
            };
            match inst.constraint {
                EnergyConstraint::Nominal => prog.add_nonneg(&row),
                EnergyConstraint::WorstCase { radius } => {
                    let t = layout.epigraph.unwrap() + k;
                    row.add_term(t, -2.0 * radius);
                    prog.add_nonneg(&row);
                    let mut cone = vec![AffineExpr::var(t)];
                    for i in 0..n {
                        cone.push(d_re(i));
                        cone.push(d_im(i));
                    }
                    prog.add_soc(&cone);
                }
                EnergyConstraint::Chance => {
                    let x = layout.epigraph.unwrap() + 2 * k;
                    let m = x + 1;
                    let delta = req.delta;
                    let dm: Vec<CMat> = self.basis.iter().map(|b| root * b * root).collect();
                    let mut d_mat = HermAffine::zeros(n);
                    for i in 0..n {
                        for j in 0..n {
                            for (p, c) in dm.iter().enumerate() {
                                d_mat.re[i * n + j].add_term(base + p, c[(i, j)].re);
                                d_mat.im[i * n + j].add_term(base + p, c[(i, j)].im);
                            }
                        }
                    }
                    // Tr(D) − √(2δ)·x − δ·m + G_nominal − γE/η ≥ 0
                    for i in 0..n {
                        row.add_expr(d_mat.re(i, i), 1.0);
                    }
                    row.add_term(x, -(2.0 * delta).sqrt()).add_term(m, -delta);
                    prog.add_nonneg(&row);
                    // x ≥ ‖(vec D, √2·d)‖
                    let r2 = std::f64::consts::SQRT_2;
                    let mut cone = vec![AffineExpr::var(x)];
                    for i in 0..n {
                        cone.push(d_mat.re(i, i).clone());
                    }
                    for i in 0..n {
                        for j in i + 1..n {
                            cone.push(d_mat.re(i, j).scaled(r2));
                            cone.push(d_mat.im(i, j).scaled(r2));
                        }
                    }
                    for i in 0..n {
                        cone.push(d_re(i).scaled(r2));
                        cone.push(d_im(i).scaled(r2));
                    }
                    prog.add_soc(&cone);
                    // m·I + D ⪰ 0 and m ≥ 0
                    let mut lmi = d_mat;
                    for i in 0..n {
                        lmi.re[i * n + i].add_term(m, 1.0);
                    }
                    prog.add_psd(2 * n, |a, b| lmi.embedded(a, b));
                    prog.add_nonneg(&AffineExpr::var(m));
                }
            }
        }
        Ok(())
    }

    /// The full subproblem for fixed receivers and weights: WMMSE quadratic
    /// over `v^I`, free energy covariance, fixed `τ`.
    pub fn problem1(&self, objective: &SubproblemObjective, tau: f64) -> Result<Assembly> {
        self.assemble(InfoBlock::Optimize(objective), EnergyBlock::Optimize, TauBlock::Fixed(tau))
    }

    /// Information-only step with the energy covariance held fixed.
    pub fn info_step(&self, objective: &SubproblemObjective, tau: f64, energy_cov: &CMat) -> Result<Assembly> {
        let ep = self.inst.energy_power(energy_cov);
        self.assemble(InfoBlock::Optimize(objective), EnergyBlock::FixedPower(ep), TauBlock::Fixed(tau))
    }

    /// Energy covariance maximizing `γ = 1/τ` for fixed information
    /// beamformers, minus `trace_penalty·Tr(S)`. A small penalty keeps power
    /// out of directions that do not raise `γ`.
    pub fn energy_stage(&self, v_info: &[CVec], trace_penalty: f64) -> Result<Assembly> {
        let ip = self.inst.info_power(v_info);
        let mut asm = self.assemble(InfoBlock::FixedPower(ip), EnergyBlock::Optimize, TauBlock::Maximize)?;
        if trace_penalty != 0.0 {
            let mut e = AffineExpr::default();
            for i in 0..asm.layout.n_antennas {
                e.add_term(asm.layout.energy_var(i, i).0, trace_penalty);
            }
            asm.program.add_linear(&e);
        }
        Ok(asm)
    }

    pub fn solve(&self, assembly: &Assembly, solver: &dyn ConicSolver) -> Result<BlockSolution> {
        let sol = solver.solve(&assembly.program)?;
        let layout = &assembly.layout;
        let usable = matches!(sol.report.status, SolveStatus::Optimal | SolveStatus::Inaccurate);
        Ok(BlockSolution {
            v_info: if usable { layout.decode_info(&sol.x) } else { None },
            energy_cov: if usable {
                layout.decode_energy(&sol.x).map(|s| linalg::hermitian_part(&s))
            } else {
                None
            },
            epigraph: layout.decode_epigraph(&sol.x),
            gamma: layout.gamma.filter(|_| usable).map(|g| sol.x[g]),
            report: sol.report,
        })
    }
}

/// Real representation of a set of information beamformers in layout order.
pub fn info_to_real(v_info: &[CVec]) -> Vec<f64> {
    v_info
        .iter()
        .flat_map(|v| v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect::<Vec<_>>())
        .collect()
}

/// Energy parameters of `s` in layout order.
pub fn energy_to_real(s: &CMat) -> Vec<f64> {
    let n = s.nrows();
    let mut out: Vec<f64> = (0..n).map(|i| s[(i, i)].re).collect();
    for i in 0..n {
        for j in i + 1..n {
            out.push(s[(i, j)].re);
            out.push(s[(i, j)].im);
        }
    }
    out
}
