//! Oracles shared by the integration tests.
#![allow(dead_code)]

use spikamp::free_probability::*;

/// All set partitions of {0..n-1} as block label vectors (restricted growth strings).
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            if i == 0 && b > 0 {
                break;
            }
            cur.push(b);
            rec(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        let mut cur = Vec::new();
        // labels start at 0; `max` tracks the largest label used so far
        cur.push(0);
        rec(1, n, &mut cur, 0, &mut out);
    }
    out
}

pub fn non_crossing(p: &[usize]) -> bool {
    let n = p.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    if p[a] == p[c] && p[b] == p[d] && p[a] != p[b] {
                        return false;
                    }
                }
            }
        }
    }
    true
}

pub fn blocks(p: &[usize]) -> Vec<Vec<usize>> {
    let k = p.iter().max().map_or(0, |m| m + 1);
    let mut b = vec![Vec::new(); k];
    for (i, &l) in p.iter().enumerate() {
        b[l].push(i + 1);
    }
    b
}

/// m_k = sum over NC(k) of prod kappa_|S|.
pub fn square_moment_oracle(kappa: &[f64], k: usize) -> f64 {
    set_partitions(k)
        .iter()
        .filter(|p| non_crossing(p))
        .map(|p| blocks(p).iter().map(|s| kappa[s.len() - 1]).product::<f64>())
        .sum()
}

/// m_2k = sum over NC'(2k) (even blocks) of prod kappa_|S|, with a factor gamma
/// for every block whose smallest element is even.
pub fn rect_moment_oracle(kappa2: &[f64], gamma: f64, k: usize) -> f64 {
    set_partitions(2 * k)
        .iter()
        .filter(|p| non_crossing(p))
        .map(|p| {
            let bs = blocks(p);
            if bs.iter().any(|s| s.len() % 2 == 1) {
                return 0.0;
            }
            bs.iter()
                .map(|s| {
                    let w = if s[0] % 2 == 0 { gamma } else { 1.0 };
                    w * kappa2[s.len() / 2 - 1]
                })
                .product::<f64>()
        })
        .sum()
}

pub fn interior_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| lo + (hi - lo) * i as f64 / (count + 1) as f64).collect()
}

/// Largest violation of R(w) = G^-1(w) - 1/w and R'(w) = 1/G'(G^-1(w)) + 1/w^2
/// over 10 points inside the convergence region.
pub fn square_identity_error(model: &SpectrumModel) -> f64 {
    let k = model.cumulants(DEFAULT_CUMULANT_ORDER).unwrap();
    let th = model.reference_threshold().unwrap();
    let w_max = (1.0 / th).min(model.edge_value()) * 0.8;
    let mut worst: f64 = 0.0;
    for w in interior_points(0.0, w_max, 10) {
        let z = model.invert(Inverse::Ginv, w).unwrap();
        let r = k.r_transform(w).unwrap().value;
        let gp = model.transform(Transform::Gprime, z).unwrap();
        let rp = k.r_transform_prime(w).unwrap().value;
        worst = worst.max((r - (z - 1.0 / w)).abs()).max((rp - (1.0 / gp + 1.0 / (w * w))).abs());
    }
    worst
}

/// Largest violation of gamma R^2 + (gamma + 1) R + 1 = z D^-1(z)^2 over 10 interior points.
pub fn rect_identity_error(gamma: f64) -> f64 {
    let model = SpectrumModel::uniform_squared_singular(gamma).unwrap();
    let k = model.cumulants(96).unwrap();
    let th = model.reference_threshold().unwrap();
    let z_max = (1.0 / (th * th)).min(model.edge_value()) * 0.8;
    let mut worst: f64 = 0.0;
    for z in interior_points(0.0, z_max, 10) {
        let r = k.r_transform(z).unwrap().value;
        let d_inv = model.invert(Inverse::Dinv, z).unwrap();
        let lhs = gamma * r * r + (gamma + 1.0) * r + 1.0;
        worst = worst.max((lhs - z * d_inv * d_inv).abs());
    }
    worst
}
