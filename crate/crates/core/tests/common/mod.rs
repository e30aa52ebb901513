//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use si_impute::ObservationTensor;

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_err(pred: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    norm(&diff) / norm(truth).max(f64::MIN_POSITIVE)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot = &top[col];
        for (offset, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Least squares through the normal equations `X^T X beta = X^T y`.
/// `rows` is the design in row-major order.
pub fn normal_equation_solve(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = rows[0].len();
    let mut xtx = vec![vec![0.0; n]; n];
    let mut xty = vec![0.0; n];
    for (row, yi) in rows.iter().zip(y) {
        for i in 0..n {
            xty[i] += row[i] * yi;
            for j in 0..n {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

fn average(vectors: &[&[f64]], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    for v in vectors {
        for k in 0..p {
            out[k] += v[k];
        }
    }
    out.iter().map(|s| s / vectors.len() as f64).collect()
}

/// Mean of `x^{c a'}` over every other observed action, by direct scan.
pub fn brute_mean_over_actions(t: &ObservationTensor, c: &str, a: &str) -> Option<Vec<f64>> {
    let vs: Vec<&[f64]> = t
        .entries()
        .filter(|(k, _)| k.context == c && k.action != a)
        .map(|(_, v)| v)
        .collect();
    (!vs.is_empty()).then(|| average(&vs, t.p()))
}

pub fn brute_mean_over_contexts(t: &ObservationTensor, c: &str, a: &str) -> Option<Vec<f64>> {
    let vs: Vec<&[f64]> = t
        .entries()
        .filter(|(k, _)| k.action == a && k.context != c)
        .map(|(_, v)| v)
        .collect();
    (!vs.is_empty()).then(|| average(&vs, t.p()))
}

pub fn brute_fixed_effect(t: &ObservationTensor, c: &str, a: &str, r: &str) -> Option<Vec<f64>> {
    let base = t.get(c, r)?;
    let mut shift = vec![0.0; t.p()];
    let mut n = 0usize;
    for (k, v) in t.entries() {
        if k.action == a && k.context != c {
            if let Some(vr) = t.get(&k.context, r) {
                for i in 0..t.p() {
                    shift[i] += v[i] - vr[i];
                }
                n += 1;
            }
        }
    }
    (n > 0).then(|| base.iter().zip(&shift).map(|(b, s)| b + s / n as f64).collect())
}

/// Random tensor with each pair observed with probability `density`.
pub fn random_tensor(rng: &mut impl Rng, contexts: usize, actions: usize, p: usize, density: f64) -> ObservationTensor {
    let cs: Vec<String> = (0..contexts).map(|i| format!("c{i}")).collect();
    let acts: Vec<String> = (0..actions).map(|i| format!("a{i}")).collect();
    let mut t = ObservationTensor::with_ids(p, cs.clone(), acts.clone()).unwrap();
    for c in &cs {
        for a in &acts {
            if rng.random::<f64>() < density {
                t.insert(c.as_str(), a.as_str(), (0..p).map(|_| gaussian(rng)).collect()).unwrap();
            }
        }
    }
    t
}
