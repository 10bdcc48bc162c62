//! Closed-form least-squares rigid alignment of corresponded point sets.

use super::{centroid, Mat3, Pose, Rotation, Vec3};
use crate::error::{Error, Result};

/// Relative threshold on the second singular value of the centered source
/// scatter below which the configuration counts as collinear.
const RANK_TOL: f64 = 1e-12;

/// Cross-covariance `H = Σ (src_i − s̄)(dst_i − d̄)ᵀ`.
pub fn cross_covariance(src: &[Vec3], dst: &[Vec3]) -> Mat3 {
    let sc = centroid(src);
    let dc = centroid(dst);
    src.iter()
        .zip(dst)
        .fold(Mat3::zeros(), |acc, (s, d)| acc + (s - sc) * (d - dc).transpose())
}

struct PolarSvd {
    u: Mat3,
    /// `V·D`, where `D` flips the smallest singular direction on reflection.
    v: Mat3,
    /// `D·Σ`, sorted by decreasing magnitude of the original singular values.
    sigma: [f64; 3],
}

fn polar_svd(h: &Mat3) -> PolarSvd {
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = Mat3::from_columns(&[u.column(order[0]), u.column(order[1]), u.column(order[2])]);
    let mut v = Mat3::from_columns(&[v.column(order[0]), v.column(order[1]), v.column(order[2])]);
    let mut sigma = order.map(|i| svd.singular_values[i]);
    if (v * u.transpose()).determinant() < 0.0 {
        v.column_mut(2).neg_mut();
        sigma[2] = -sigma[2];
    }
    PolarSvd { u, v, sigma }
}

/// Rotation `R = V·D·Uᵀ` minimizing `Σ ‖dst_c − R·src_c‖²` for `H = U Σ Vᵀ`.
pub fn rotation_from_covariance(h: &Mat3) -> Mat3 {
    let p = polar_svd(h);
    p.v * p.u.transpose()
}

/// Rotation together with its Jacobian: `jac[3*r + c][3*a + b] = ∂R_rc / ∂H_ab`.
///
/// `R` is the special-orthogonal polar factor of `Hᵀ`; perturbing `Hᵀ = R·P`
/// gives `dR = V′ Ω Uᵀ` with `Ω_ij = (M_ij − M_ji)/(σ′_i + σ′_j)` and
/// `M = V′ᵀ dHᵀ U`.
pub fn rotation_jacobian(h: &Mat3) -> (Mat3, [[f64; 9]; 9]) {
    let p = polar_svd(h);
    let r = p.v * p.u.transpose();
    let mut jac = [[0.0; 9]; 9];
    for a in 0..3 {
        for b in 0..3 {
            // dH = e_a e_bᵀ, so dHᵀ = e_b e_aᵀ and M = V′ᵀ e_b (Uᵀ e_a)ᵀ
            let vb = p.v.row(b).transpose();
            let ua = p.u.row(a).transpose();
            let m = vb * ua.transpose();
            let mut omega = Mat3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let denom = p.sigma[i] + p.sigma[j];
                        let denom = if denom.abs() < 1e-300 { 1e-300_f64.copysign(denom) } else { denom };
                        omega[(i, j)] = (m[(i, j)] - m[(j, i)]) / denom;
                    }
                }
            }
            let dr = p.v * omega * p.u.transpose();
            for rr in 0..3 {
                for cc in 0..3 {
                    jac[3 * rr + cc][3 * a + b] = dr[(rr, cc)];
                }
            }
        }
    }
    (r, jac)
}

fn check_rank(src: &[Vec3]) -> Result<()> {
    let c = centroid(src);
    let scatter = src
        .iter()
        .fold(Mat3::zeros(), |acc, s| acc + (s - c) * (s - c).transpose());
    let sv = scatter.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= RANK_TOL * sv[0] {
        return Err(Error::DegenerateInput(
            "source points are collinear or coincident".into(),
        ));
    }
    Ok(())
}

/// Rigid pose minimizing `Σ ‖dst_i − (R·src_i + t)‖²` with index correspondence.
pub fn least_squares_align(src: &[Vec3], dst: &[Vec3]) -> Result<Pose> {
    if src.len() != dst.len() {
        return Err(Error::ShapeMismatch { expected: src.len(), got: dst.len() });
    }
    if src.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "alignment needs at least 3 points, got {}",
            src.len()
        )));
    }
    if src.iter().chain(dst).any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }
    check_rank(src)?;
    let h = cross_covariance(src, dst);
    let r = rotation_from_covariance(&h);
    let t = centroid(dst) - r * centroid(src);
    Ok(Pose::new(Rotation::from_matrix_unchecked(r), t))
}

/// Sum of squared residuals of `pose` mapping `src` onto `dst`.
pub fn alignment_residual(pose: &Pose, src: &[Vec3], dst: &[Vec3]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| (d - pose.transform_point(s)).norm_squared())
        .sum()
}
