//! Optimality-criteria MBB solver in the style of the classic 88-line code.
//! Self-contained: own numbering (top-down nodes), own element matrix and a
//! banded Cholesky solver.

pub struct OcResult {
    pub compliance: f64,
    pub densities: Vec<f64>,
    pub iterations: usize,
}

fn element_matrix(e: f64, nu: f64) -> [[f64; 8]; 8] {
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    let idx = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let s = e / (1.0 - nu * nu);
    let mut out = [[0.0; 8]; 8];
    for r in 0..8 {
        for c in 0..8 {
            out[r][c] = s * k[idx[r][c]];
        }
    }
    out
}

struct Band {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Band {
    fn new(n: usize, bw: usize) -> Self {
        Band {
            n,
            bw,
            a: vec![0.0; n * (bw + 1)],
        }
    }
    // lower triangle, a[i][i-j]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * (self.bw + 1) + (i - j)]
    }
    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.bw + 1) + (i - j)]
    }
    fn solve(mut self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = self.get(i, j);
                for k in j0.max(j.saturating_sub(bw))..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                if i == j {
                    assert!(s > 0.0, "matrix not positive definite");
                    *self.at(i, i) = s.sqrt();
                } else {
                    *self.at(i, j) = s / self.get(j, j);
                }
            }
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in i.saturating_sub(bw)..i {
                y[i] -= self.get(i, k) * y[k];
            }
            y[i] /= self.get(i, i);
        }
        for i in (0..n).rev() {
            for k in (i + 1)..(i + bw + 1).min(n) {
                y[i] -= self.get(k, i) * y[k];
            }
            y[i] /= self.get(i, i);
        }
        y
    }
}

/// Half-MBB beam: left edge on x-rollers, bottom-right corner on a y-roller,
/// unit downward load at the top-left corner. `densities` are returned in
/// column-major order with rows counted from the top.
pub fn mbb(
    nelx: usize,
    nely: usize,
    volfrac: f64,
    penal: f64,
    rmin: f64,
    e0: f64,
    nu: f64,
) -> OcResult {
    let emin = 1e-9;
    let ke = element_matrix(1.0, nu);
    let nel = nelx * nely;
    let ndof = 2 * (nelx + 1) * (nely + 1);
    let edof: Vec<[usize; 8]> = (0..nelx)
        .flat_map(|ex| (0..nely).map(move |ey| (ex, ey)))
        .map(|(ex, ey)| {
            let n1 = (nely + 1) * ex + ey;
            let n2 = (nely + 1) * (ex + 1) + ey;
            [
                2 * n1 + 2,
                2 * n1 + 3,
                2 * n2 + 2,
                2 * n2 + 3,
                2 * n2,
                2 * n2 + 1,
                2 * n1,
                2 * n1 + 1,
            ]
        })
        .collect();
    let mut fixed = vec![false; ndof];
    for j in 0..=nely {
        fixed[2 * j] = true;
    }
    fixed[ndof - 1] = true;
    let mut map = vec![usize::MAX; ndof];
    let mut nfree = 0;
    for d in 0..ndof {
        if !fixed[d] {
            map[d] = nfree;
            nfree += 1;
        }
    }
    let mut f = vec![0.0; nfree];
    f[map[1]] = -1.0;

    // filter
    let reach = rmin.ceil() as isize - 1;
    let mut h: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nel);
    for i1 in 0..nelx as isize {
        for j1 in 0..nely as isize {
            let mut row = Vec::new();
            for i2 in (i1 - reach).max(0)..=(i1 + reach).min(nelx as isize - 1) {
                for j2 in (j1 - reach).max(0)..=(j1 + reach).min(nely as isize - 1) {
                    let dist = (((i1 - i2).pow(2) + (j1 - j2).pow(2)) as f64).sqrt();
                    let w = rmin - dist;
                    if w > 0.0 {
                        row.push((i2 as usize * nely + j2 as usize, w));
                    }
                }
            }
            h.push(row);
        }
    }
    let hs: Vec<f64> = h.iter().map(|r| r.iter().map(|p| p.1).sum()).collect();
    let filter = |x: &[f64]| -> Vec<f64> {
        h.iter()
            .zip(&hs)
            .map(|(r, s)| r.iter().map(|&(k, w)| w * x[k]).sum::<f64>() / s)
            .collect()
    };

    let mut x = vec![volfrac; nel];
    let mut phys = x.clone();
    let mut iterations = 0;
    let mut change = 1.0;
    let mut c = 0.0;
    let bw = 2 * nely + 5;
    while change > 0.01 && iterations < 2000 {
        iterations += 1;
        let stiff: Vec<f64> = phys
            .iter()
            .map(|&p| e0 * (emin + p.powf(penal) * (1.0 - emin)))
            .collect();
        let mut band = Band::new(nfree, bw);
        for (e, dofs) in edof.iter().enumerate() {
            for r in 0..8 {
                let gr = map[dofs[r]];
                if gr == usize::MAX {
                    continue;
                }
                for cc in 0..8 {
                    let gc = map[dofs[cc]];
                    if gc == usize::MAX || gc > gr {
                        continue;
                    }
                    *band.at(gr, gc) += stiff[e] * ke[r][cc];
                }
            }
        }
        let uf = band.solve(&f);
        let mut u = vec![0.0; ndof];
        for d in 0..ndof {
            if map[d] != usize::MAX {
                u[d] = uf[map[d]];
            }
        }
        let ce: Vec<f64> = edof
            .iter()
            .map(|dofs| {
                let mut s = 0.0;
                for r in 0..8 {
                    for cc in 0..8 {
                        s += u[dofs[r]] * ke[r][cc] * u[dofs[cc]];
                    }
                }
                s
            })
            .collect();
        c = (0..nel).map(|e| stiff[e] * ce[e]).sum();
        let dc_raw: Vec<f64> = (0..nel)
            .map(|e| -penal * (1.0 - emin) * e0 * phys[e].powf(penal - 1.0) * ce[e] / hs[e])
            .collect();
        let dv_raw: Vec<f64> = hs.iter().map(|s| 1.0 / s).collect();
        // transpose filter: H is symmetric
        let dc: Vec<f64> = h
            .iter()
            .map(|r| r.iter().map(|&(k, w)| w * dc_raw[k]).sum())
            .collect();
        let dv: Vec<f64> = h
            .iter()
            .map(|r| r.iter().map(|&(k, w)| w * dv_raw[k]).sum())
            .collect();
        let (mut l1, mut l2) = (0.0, 1e9);
        let mv = 0.2;
        let mut xnew = x.clone();
        while (l2 - l1) / (l1 + l2) > 1e-3 {
            let lmid = 0.5 * (l1 + l2);
            for e in 0..nel {
                let cand = x[e] * (-dc[e] / dv[e] / lmid).max(0.0).sqrt();
                xnew[e] = cand.min(x[e] + mv).min(1.0).max(x[e] - mv).max(0.0);
            }
            phys = filter(&xnew);
            if phys.iter().sum::<f64>() > volfrac * nel as f64 {
                l1 = lmid;
            } else {
                l2 = lmid;
            }
        }
        change = x
            .iter()
            .zip(&xnew)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = xnew;
    }
    OcResult {
        compliance: c,
        densities: phys,
        iterations,
    }
}
