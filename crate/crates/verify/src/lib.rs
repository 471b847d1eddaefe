//! Brute-force reference implementations used by the acceptance suite.
//!
//! Everything here works on nested `Vec`s with explicit loops and shares no
//! code with the tensor and tape paths it checks.

use regraph_core::graph::SiteGraph;
use regraph_core::numerics::Tensor;

pub type Matrix = Vec<Vec<f64>>;

pub fn to_rows(t: &Tensor) -> Matrix {
    (0..t.rows())
        .map(|i| (0..t.cols()).map(|j| t.get(i, j)).collect())
        .collect()
}

pub fn max_abs_diff(a: &Tensor, b: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    assert_eq!(a.rows(), b.len(), "row count");
    for (i, row) in b.iter().enumerate() {
        assert_eq!(a.cols(), row.len(), "column count");
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((a.get(i, j) - v).abs());
        }
    }
    worst
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `D^-1/2 (A + I) D^-1/2` built from the edge list and the graph's edge
/// weighting.
pub fn normalized_adjacency(g: &SiteGraph) -> Matrix {
    let n = g.len();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let weighting = g.weighting();
    for e in g.edges() {
        let w = weighting.weight(e.miles);
        a[e.i][e.j] += w;
        a[e.j][e.i] += w;
    }
    let d: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[i][j] / (d[i].sqrt() * d[j].sqrt());
        }
    }
    out
}

/// `act(N H W + b)` one output at a time.
pub fn gcn(norm: &Matrix, h: &Matrix, w: &Matrix, b: &[f64], act: fn(f64) -> f64) -> Matrix {
    let n = h.len();
    let (inp, out) = (w.len(), b.len());
    let mut result = vec![vec![0.0; out]; n];
    for i in 0..n {
        for o in 0..out {
            let mut z = b[o];
            for j in 0..n {
                for c in 0..inp {
                    z += norm[i][j] * h[j][c] * w[c][o];
                }
            }
            result[i][o] = act(z);
        }
    }
    result
}

pub fn identity(x: f64) -> f64 {
    x
}

pub fn logistic(x: f64) -> f64 {
    sigmoid(x)
}

/// `sigmoid(W x_i + sum over neighbors k of W x_k)` with neighbors taken
/// from the edge list.
pub fn structural_conv(g: &SiteGraph, x: &Matrix, w: &Matrix) -> Matrix {
    let n = g.len();
    let mut nbrs = vec![Vec::new(); n];
    for e in g.edges() {
        nbrs[e.i].push(e.j);
        nbrs[e.j].push(e.i);
    }
    let (inp, out) = (w.len(), w[0].len());
    let mut result = vec![vec![0.0; out]; n];
    for i in 0..n {
        for o in 0..out {
            let mut z = 0.0;
            for c in 0..inp {
                z += w[c][o] * x[i][c];
            }
            for &k in &nbrs[i] {
                for c in 0..inp {
                    z += w[c][o] * x[k][c];
                }
            }
            result[i][o] = sigmoid(z);
        }
    }
    result
}

/// One GRU step per row with scalar loops.
pub fn gru_step(x: &Matrix, h: &Matrix, wz: &Matrix, wr: &Matrix, wc: &Matrix) -> Matrix {
    let hid = h[0].len();
    let inp = x[0].len();
    let mut result = vec![vec![0.0; hid]; x.len()];
    for i in 0..x.len() {
        let mut r = vec![0.0; hid];
        let mut z = vec![0.0; hid];
        for o in 0..hid {
            let (mut zs, mut rs) = (0.0, 0.0);
            for c in 0..inp {
                zs += x[i][c] * wz[c][o];
                rs += x[i][c] * wr[c][o];
            }
            for c in 0..hid {
                zs += h[i][c] * wz[inp + c][o];
                rs += h[i][c] * wr[inp + c][o];
            }
            z[o] = sigmoid(zs);
            r[o] = sigmoid(rs);
        }
        for o in 0..hid {
            let mut cs = 0.0;
            for c in 0..inp {
                cs += x[i][c] * wc[c][o];
            }
            for c in 0..hid {
                cs += h[i][c] * r[c] * wc[inp + c][o];
            }
            result[i][o] = (1.0 - z[o]) * h[i][o] + z[o] * cs.tanh();
        }
    }
    result
}

/// Softmax-weighted sum of the states.
pub fn attention(scores: &[f64], states: &[Matrix]) -> Matrix {
    let total: f64 = scores.iter().map(|s| s.exp()).sum();
    let (rows, cols) = (states[0].len(), states[0][0].len());
    let mut result = vec![vec![0.0; cols]; rows];
    for (k, state) in states.iter().enumerate() {
        let w = scores[k].exp() / total;
        for i in 0..rows {
            for j in 0..cols {
                result[i][j] += w * state[i][j];
            }
        }
    }
    result
}

pub fn mse(p: &Matrix, t: &Matrix) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (pr, tr) in p.iter().zip(t) {
        for (a, b) in pr.iter().zip(tr) {
            sum += (a - b) * (a - b);
            n += 1;
        }
    }
    sum / n as f64
}

/// Percentile by rank interpolation on a sorted copy.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = p * (v.len() - 1) as f64;
    let below = rank.floor() as usize;
    if below + 1 >= v.len() {
        return v[below];
    }
    v[below] + (rank - below as f64) * (v[below + 1] - v[below])
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub mape: f64,
    pub mae_literal: f64,
    pub mape_literal: f64,
}

/// Errors over a sites x times block; MAPE terms only for sites with a
/// positive reference.
pub fn metrics(p: &Matrix, t: &Matrix, q95: &[Option<f64>]) -> Metrics {
    let (mut sq, mut abs, mut ape, mut ape_lit) = (0.0, 0.0, 0.0, 0.0);
    let (mut n, mut m) = (0usize, 0usize);
    for i in 0..p.len() {
        for j in 0..p[i].len() {
            let e = p[i][j] - t[i][j];
            sq += e * e;
            abs += e.abs();
            n += 1;
            if let Some(q) = q95[i] {
                if q > 0.0 {
                    ape += e.abs() / q;
                    ape_lit += e * e / q;
                    m += 1;
                }
            }
        }
    }
    let nf = n as f64;
    let mf = if m == 0 { 1.0 } else { m as f64 };
    Metrics {
        rmse: (sq / nf).sqrt(),
        mae: abs / nf,
        mape: 100.0 * ape / mf,
        mae_literal: sq / nf,
        mape_literal: 100.0 * ape_lit / mf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_by_hand() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert!((percentile(&[0.0, 10.0], 0.95) - 9.5).abs() < 1e-15);
        assert_eq!(percentile(&[4.0], 0.95), 4.0);
    }

    #[test]
    fn metrics_by_hand() {
        let m = metrics(&vec![vec![0.7, 0.5]], &vec![vec![0.8, 0.5]], &[Some(0.5)]);
        assert!((m.rmse - (0.01f64 / 2.0).sqrt()).abs() < 1e-15);
        assert!((m.mae - 0.05).abs() < 1e-15);
        assert!((m.mape - 10.0).abs() < 1e-12);
        assert!((m.mape_literal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_with_equal_scores_averages() {
        let a = vec![vec![1.0, 2.0]];
        let b = vec![vec![3.0, 6.0]];
        assert_eq!(attention(&[0.0, 0.0], &[a, b]), vec![vec![2.0, 4.0]]);
    }

    #[test]
    fn gru_with_zero_weights_halves_the_state() {
        let zero = vec![vec![0.0; 2]; 3];
        let out = gru_step(&vec![vec![1.0]], &vec![vec![0.4, -0.2]], &zero, &zero, &zero);
        assert_eq!(out, vec![vec![0.2, -0.1]]);
    }
}
