//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerics.

#![allow(dead_code)]

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching unit eigenvectors.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let p = a.len();
    let mut v: Vec<Vec<f64>> = (0..p).map(|i| (0..p).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..p).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if a[i][j].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[j][j] - a[i][i]) / (2.0 * a[i][j]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aik, ajk) = (a[i][k], a[j][k]);
                    a[i][k] = c * aik - s * ajk;
                    a[j][k] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (aki, akj) = (a[k][i], a[k][j]);
                    a[k][i] = c * aki - s * akj;
                    a[k][j] = s * aki + c * akj;
                }
                for row in v.iter_mut() {
                    let (vi, vj) = (row[i], row[j]);
                    row[i] = c * vi - s * vj;
                    row[j] = s * vi + c * vj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order.iter().map(|&k| (0..p).map(|r| v[r][k]).collect()).collect();
    (values, vectors)
}

/// Column z-scores with the n - 1 standard deviation; constant columns map
/// to zero.
pub fn zscore(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let p = rows[0].len();
    let mut out = rows.to_vec();
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean) * (r[j] - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        for (o, r) in out.iter_mut().zip(rows) {
            o[j] = if sd > 1e-12 * (1.0 + mean.abs()) {
                (r[j] - mean) / sd
            } else {
                0.0
            };
        }
    }
    out
}

/// Principal axes of the correlation matrix: eigenvalues (descending),
/// eigenvectors, and each eigenvalue's share of the total.
pub struct BruteForcePca {
    pub eigenvalues: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub ratios: Vec<f64>,
}

pub fn brute_force_pca(rows: &[Vec<f64>]) -> BruteForcePca {
    let z = zscore(rows);
    let n = z.len();
    let p = z[0].len();
    let cov: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| z.iter().map(|r| r[i] * r[j]).sum::<f64>() / (n - 1) as f64)
                .collect()
        })
        .collect();
    let (eigenvalues, vectors) = jacobi_eigen(cov);
    let clipped: Vec<f64> = eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    BruteForcePca {
        ratios: clipped.iter().map(|v| v / total).collect(),
        eigenvalues,
        vectors,
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Angle between the limb vectors `a - k` and `b - k`, in degrees, from the
/// cross and dot products.
pub fn angle_between(a: [f64; 3], k: [f64; 3], b: [f64; 3]) -> f64 {
    let u = [a[0] - k[0], a[1] - k[1], a[2] - k[2]];
    let w = [b[0] - k[0], b[1] - k[1], b[2] - k[2]];
    let cross = [
        u[1] * w[2] - u[2] * w[1],
        u[2] * w[0] - u[0] * w[2],
        u[0] * w[1] - u[1] * w[0],
    ];
    dot(&cross, &cross).sqrt().atan2(dot(&u, &w)).to_degrees()
}

/// Gamma at integer or half-integer arguments by exact recurrence.
fn gamma_half(twice: u32) -> f64 {
    // Gamma(twice / 2)
    let (mut x, mut g) = if twice.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (0.5, std::f64::consts::PI.sqrt())
    };
    while 2.0 * x < twice as f64 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Student t density for an integer number of degrees of freedom.
pub fn t_density(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let c = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    c * (1.0 + t * t / nu).powf(-(nu + 1.0) / 2.0)
}

/// Upper tail `P(T > t)` for `t >= 0` by composite Simpson integration of the
/// density from 0 to `t`.
pub fn t_upper_tail(t: f64, df: u32) -> f64 {
    let steps = 20_000;
    let h = t / steps as f64;
    let mut sum = t_density(0.0, df) + t_density(t, df);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * t_density(i as f64 * h, df);
    }
    0.5 - sum * h / 3.0
}

/// Paired t statistic for `post - pre`, written out long-hand.
pub fn paired_t(pre: &[f64], post: &[f64]) -> f64 {
    let n = pre.len() as f64;
    let d: Vec<f64> = pre.iter().zip(post).map(|(a, b)| b - a).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    mean / (var / n).sqrt()
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn jacobi_on_known_matrix() {
        let (vals, vecs) = jacobi_eigen(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!((dot(&vecs[0], &[1.0, 1.0]).abs() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn t_tail_matches_cauchy() {
        // df = 1: P(T > 1) = 1/4.
        assert!((t_upper_tail(1.0, 1) - 0.25).abs() < 1e-12);
    }
}
