use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

/// Default threshold on `λ₂/λ₁` below which a matrix counts as rank one.
pub const RANK_ONE_RATIO_TOL: f64 = 1e-3;
/// Candidates drawn by Gaussian randomization.
pub const RANDOMIZATION_SAMPLES: usize = 200;
const RANDOMIZATION_SEED: u64 = 0x5EED_0001;

#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub vector: CVec,
    /// `λ₂/λ₁` of the input (0 for the zero matrix or `N = 1`).
    pub ratio: f64,
    pub fallback_used: bool,
}

/// `λ₂/λ₁` of a PSD matrix.
pub fn eigen_ratio(v: &CMat) -> f64 {
    let values = linalg::hermitian_eigen(v).values;
    match values.as_slice() {
        [l1, l2, ..] if *l1 > 0.0 => (l2.max(0.0)) / l1,
        _ => 0.0,
    }
}

/// Dominant-eigenvector extraction `√λ₁·u₁`. When `λ₂/λ₁ > ratio_tol`,
/// Gaussian randomization picks, among [`RANDOMIZATION_SAMPLES`] draws from
/// `CN(0, V)` rescaled to `Tr V`, the one whose outer product is closest to
/// `V` in Frobenius norm.
pub fn extract_rank_one(v: &CMat, ratio_tol: f64) -> Result<RankOne> {
    extract_rank_one_with(v, ratio_tol, |c| -linalg::frob_sq(&(linalg::outer(c) - v)))
}

/// As [`extract_rank_one`], with the randomization candidates ranked by
/// `score` (largest wins). Candidates have power `Tr V`.
pub fn extract_rank_one_with(v: &CMat, ratio_tol: f64, score: impl Fn(&CVec) -> f64) -> Result<RankOne> {
    if v.nrows() != v.ncols() {
        return Err(Error::invalid("rank-one extraction needs a square matrix"));
    }
    if !linalg::is_psd(v, 1e-8) {
        return Err(Error::NotPsd("rank-one extraction input".into()));
    }
    let n = v.nrows();
    let eig = linalg::hermitian_eigen(v);
    let l1 = eig.values.first().copied().unwrap_or(0.0);
    if l1 <= 0.0 {
        return Ok(RankOne {
            vector: CVec::zeros(n),
            ratio: 0.0,
            fallback_used: false,
        });
    }
    let ratio = eig.values.get(1).map_or(0.0, |l2| l2.max(0.0) / l1);
    if ratio <= ratio_tol {
        return Ok(RankOne {
            vector: eig.vectors.column(0).into_owned() * linalg::c64(l1.sqrt(), 0.0),
            ratio,
            fallback_used: false,
        });
    }
    let mut root = eig.vectors.clone();
    for (i, &l) in eig.values.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        root.column_mut(i).scale_mut(s);
    }
    let power = linalg::trace_re(v);
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOMIZATION_SEED);
    let mut best: Option<(f64, CVec)> = None;
    for _ in 0..RANDOMIZATION_SAMPLES {
        let xi = &root * linalg::sample_cn(&mut rng, n);
        let norm = linalg::norm_sq(&xi);
        if norm <= 0.0 {
            continue;
        }
        let cand = xi * linalg::c64((power / norm).sqrt(), 0.0);
        let sc = score(&cand);
        if best.as_ref().is_none_or(|(b, _)| sc > *b) {
            best = Some((sc, cand));
        }
    }
    let vector = best.map(|(_, c)| c).unwrap_or_else(|| CVec::zeros(n));
    Ok(RankOne {
        vector,
        ratio,
        fallback_used: true,
    })
}

/// Splits an aggregate energy covariance into `n_users` PSD matrices that sum
/// to it: eigencomponent `i` goes to user `i`, and components beyond the
/// `n_users`-th join user 0, which holds the dominant one. Each part is rank
/// one whenever `rank(S) ≤ n_users`. Users left over receive zero matrices.
pub fn split_energy_covariance(s: &CMat, n_users: usize) -> Result<Vec<CMat>> {
    if n_users == 0 {
        return Err(Error::invalid("no users to split the energy covariance over"));
    }
    if !linalg::is_psd(s, 1e-8) {
        return Err(Error::NotPsd("aggregate energy covariance".into()));
    }
    let n = s.nrows();
    let eig = linalg::hermitian_eigen(s);
    let mut parts = vec![linalg::zeros_mat(n); n_users];
    for (i, &l) in eig.values.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let u = eig.vectors.column(i).into_owned();
        let owner = if i < n_users { i } else { 0 };
        parts[owner] += linalg::outer(&u).scale(l);
    }
    Ok(parts.iter().map(linalg::hermitian_part).collect())
}
