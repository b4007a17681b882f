//! Naive reference implementations written straight from the formulas.
//! Nothing here calls into the library's numerical code.
#![allow(dead_code)]

/// Normalized returns from a price panel `[stock][day]`, using
/// `sigma = sqrt(<R^2> - <R>^2)` literally.
pub fn normalized_returns(prices: &[Vec<f64>]) -> Vec<Vec<f64>> {
    prices
        .iter()
        .map(|p| {
            let raw: Vec<f64> = (0..p.len() - 1).map(|t| p[t + 1].ln() - p[t].ln()).collect();
            let n = raw.len() as f64;
            let mut m1 = 0.0;
            let mut m2 = 0.0;
            for &x in &raw {
                m1 += x;
                m2 += x * x;
            }
            m1 /= n;
            m2 /= n;
            let sigma = (m2 - m1 * m1).sqrt();
            raw.iter().map(|x| (x - m1) / sigma).collect()
        })
        .collect()
}

/// `Q_s`, summed in `(i, j, t)` order into one accumulator.
pub fn q_static(r: &[Vec<f64>]) -> f64 {
    let n = r.len();
    let t_len = r[0].len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for t in 0..t_len {
                acc += r[i][t] * r[j][t];
            }
        }
    }
    2.0 * acc / ((n * (n - 1) * t_len) as f64)
}

pub fn q_dynamic(r: &[Vec<f64>]) -> Vec<f64> {
    let n = r.len();
    (0..r[0].len())
        .map(|t| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    acc += r[i][t] * r[j][t];
                }
            }
            2.0 * acc / ((n * (n - 1)) as f64)
        })
        .collect()
}

pub fn adjacency(r: &[Vec<f64>], t: usize, zeta: f64) -> Vec<Vec<bool>> {
    let n = r.len();
    let mut a = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = i != j && r[i][t] * r[j][t] > zeta;
        }
    }
    a
}

pub fn degrees(a: &[Vec<bool>]) -> Vec<usize> {
    a.iter().map(|row| row.iter().filter(|&&x| x).count()).collect()
}

/// Average clustering by enumerating neighbour pairs.
pub fn clustering(a: &[Vec<bool>]) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for i in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&j| a[i][j]).collect();
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut links = 0;
        for x in 0..k {
            for y in x + 1..k {
                if a[nb[x]][nb[y]] {
                    links += 1;
                }
            }
        }
        total += links as f64 / (k * (k - 1) / 2) as f64;
    }
    total / n as f64
}

/// Assortativity evaluated term by term over the edge list.
pub fn assortativity(a: &[Vec<bool>]) -> Option<f64> {
    let n = a.len();
    let k = degrees(a);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if a[i][j] {
                edges.push((k[i] as f64, k[j] as f64));
            }
        }
    }
    let m = edges.len() as f64;
    if edges.is_empty() {
        return None;
    }
    let prod = edges.iter().map(|(j, k)| j * k).sum::<f64>() / m;
    let half = edges.iter().map(|(j, k)| 0.5 * (j + k)).sum::<f64>() / m;
    let sq = edges.iter().map(|(j, k)| 0.5 * (j * j + k * k)).sum::<f64>() / m;
    let den = sq - half * half;
    if den.abs() < 1e-12 * sq.max(1.0) {
        return None;
    }
    Some((prod - half * half) / den)
}

pub struct DayRef {
    pub clustering: f64,
    pub degree: f64,
    pub assortativity: Option<f64>,
    pub degrees: Vec<usize>,
}

/// Per-day metrics for `zeta(t)`.
pub fn topology(r: &[Vec<f64>], zeta: &dyn Fn(usize) -> f64) -> Vec<DayRef> {
    (0..r[0].len())
        .map(|t| {
            let a = adjacency(r, t, zeta(t));
            let k = degrees(&a);
            DayRef {
                clustering: clustering(&a),
                degree: k.iter().sum::<usize>() as f64 / r.len() as f64,
                assortativity: assortativity(&a),
                degrees: k,
            }
        })
        .collect()
}

pub fn histogram(n: usize, days: &[DayRef]) -> Vec<u64> {
    let mut h = vec![0u64; n];
    for d in days {
        for &k in &d.degrees {
            h[k] += 1;
        }
    }
    h
}

/// Degree correlation matrix over nodes with non-constant degree. Returns
/// the kept node indices and the matrix.
pub fn degree_correlation(n: usize, days: &[DayRef]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let t_len = days.len() as f64;
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for i in 0..n {
        let series: Vec<f64> = days.iter().map(|d| d.degrees[i] as f64).collect();
        if series.iter().all(|&x| x == series[0]) {
            continue;
        }
        let mean = series.iter().sum::<f64>() / t_len;
        let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t_len;
        let sd = var.sqrt();
        kept.push(i);
        rows.push(series.iter().map(|x| (x - mean) / sd).collect::<Vec<f64>>());
    }
    let m = rows.len();
    let mut f = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..days.len() {
                acc += rows[i][t] * rows[j][t];
            }
            f[i][j] = acc / t_len;
        }
    }
    (kept, f)
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
    ev
}

/// DFA-1 fluctuation at one scale, solving the 2x2 normal equations for
/// each window explicitly.
pub fn fluctuation(series: &[f64], scale: usize) -> f64 {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut profile = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &a in series {
        acc += a - mean;
        profile.push(acc);
    }
    let windows = n / scale;
    let mut sse = 0.0;
    for w in 0..windows {
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..scale {
            let x = (w * scale + k + 1) as f64;
            let y = profile[w * scale + k];
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let s = scale as f64;
        let det = s * sxx - sx * sx;
        let slope = (s * sxy - sx * sy) / det;
        let icpt = (sy * sxx - sx * sxy) / det;
        for k in 0..scale {
            let x = (w * scale + k + 1) as f64;
            let e = profile[w * scale + k] - (icpt + slope * x);
            sse += e * e;
        }
    }
    (sse / (windows * scale) as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (sx, sy) = (lx.iter().sum::<f64>(), ly.iter().sum::<f64>());
    let sxx: f64 = lx.iter().map(|v| v * v).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| a * b).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
