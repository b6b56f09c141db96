mod common;

use common::rng;
use mcrelax::project_simplex;
use rand::Rng;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Closest simplex point by grid search over the first `l − 1` coordinates,
/// then a finer search around the coarse winner.
fn grid_projection(v: &[f64]) -> Vec<f64> {
    let l = v.len();
    let mut best = (f64::INFINITY, vec![0.0; l]);
    let search = |centre: &[f64], radius: f64, step: f64, best: &mut (f64, Vec<f64>)| {
        let n = (2.0 * radius / step).round() as i64;
        let lo: Vec<f64> = centre.iter().map(|c| c - radius).collect();
        let mut idx = vec![0i64; l - 1];
        loop {
            let mut x: Vec<f64> = (0..l - 1).map(|k| lo[k] + idx[k] as f64 * step).collect();
            let rest = 1.0 - x.iter().sum::<f64>();
            if x.iter().all(|&c| c >= 0.0) && rest >= -1e-15 {
                x.push(rest.max(0.0));
                let d = dist2(&x, v);
                if d < best.0 {
                    *best = (d, x);
                }
            }
            let mut k = 0;
            loop {
                if k == l - 1 {
                    return;
                }
                idx[k] += 1;
                if idx[k] <= n {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    };
    search(&vec![0.5; l - 1], 0.5, 0.01, &mut best);
    let coarse = best.1[..l - 1].to_vec();
    search(&coarse, 0.01, 5e-5, &mut best);
    best.1
}

#[test]
fn projection_matches_grid_search() {
    let mut gen = rng(30);
    for trial in 0..100 {
        let l = 2 + trial % 2;
        let v: Vec<f64> = (0..l).map(|_| 3.0 * gen.gen::<f64>() - 1.5).collect();
        let p = project_simplex(&v).unwrap();
        let g = grid_projection(&v);
        for k in 0..l {
            assert!((p[k] - g[k]).abs() <= 2e-4, "trial {trial}: {p:?} vs {g:?}");
        }
        assert!(dist2(&p, &v) <= dist2(&g, &v) + 1e-12);
    }
}
