use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{binomial, check_square, Mat};

const MAX_WEDGE_DIM: usize = 1000;

/// `p`-subsets of `0..n` in lexicographic order.
pub fn index_sets(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, p));
    if p > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..p).collect();
    loop {
        out.push(cur.clone());
        let mut i = p;
        while i > 0 && cur[i - 1] == n - p + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for k in i..p {
            cur[k] = cur[k - 1] + 1;
        }
    }
}

fn check_degree(n: usize, p: usize) -> Result<usize> {
    if p == 0 || p >= n {
        return Err(Error::InvalidInput(format!(
            "wedge degree {p} outside 1..={}",
            n - 1
        )));
    }
    let d = binomial(n, p);
    if d > MAX_WEDGE_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    Ok(d)
}

fn minor(a: &Mat, rows: &[usize], cols: &[usize]) -> f64 {
    let p = rows.len();
    Mat::from_fn(p, p, |i, j| a[(rows[i], cols[j])]).determinant()
}

/// Matrix of `Λ^p g` on the lexicographic basis `e_I = e_{i1} ∧ … ∧ e_{ip}`:
/// entry `(I, J)` is the minor of `g` on rows `I` and columns `J`.
pub fn wedge_representation(g: &Mat, p: usize) -> Result<Mat> {
    let n = check_square(g)?;
    let d = check_degree(n, p)?;
    let sets = index_sets(n, p);
    Ok(Mat::from_fn(d, d, |i, j| minor(g, &sets[i], &sets[j])))
}

/// Derived action `Σ_k v_1 ∧ … ∧ X v_k ∧ … ∧ v_p`.
pub fn wedge_infinitesimal(x: &Mat, p: usize) -> Result<Mat> {
    let n = check_square(x)?;
    let d = check_degree(n, p)?;
    let sets = index_sets(n, p);
    let position = |s: &[usize]| {
        sets.binary_search_by(|probe| probe.as_slice().cmp(s))
            .unwrap()
    };
    let mut out = Mat::zeros(d, d);
    for (col, set) in sets.iter().enumerate() {
        for (k, &jk) in set.iter().enumerate() {
            for i in 0..n {
                let v = x[(i, jk)];
                if v == 0.0 {
                    continue;
                }
                if i == jk {
                    out[(col, col)] += v;
                    continue;
                }
                if set.contains(&i) {
                    continue;
                }
                let mut replaced = set.clone();
                replaced[k] = i;
                // moving i to its sorted slot passes the members between jk and i
                let (lo, hi) = (jk.min(i), jk.max(i));
                let crossings = set.iter().filter(|&&s| s > lo && s < hi).count();
                let sign = if crossings % 2 == 0 { 1.0 } else { -1.0 };
                replaced.sort_unstable();
                out[(position(&replaced), col)] += sign * v;
            }
        }
    }
    Ok(out)
}

/// Coordinates of `b_1 ∧ … ∧ b_p` for the columns of `b` (the `p x p`
/// minors on lexicographic row sets).
pub fn wedge_of_columns(b: &Mat) -> Result<DVector<f64>> {
    let (n, p) = b.shape();
    if p == 0 || p > n {
        return Err(Error::InvalidInput(format!(
            "cannot wedge {p} vectors in dimension {n}"
        )));
    }
    let d = binomial(n, p);
    if d > MAX_WEDGE_DIM {
        return Err(Error::DimensionTooLarge(d));
    }
    let cols: Vec<usize> = (0..p).collect();
    Ok(DVector::from_iterator(
        d,
        index_sets(n, p).iter().map(|rows| minor(b, rows, &cols)),
    ))
}
