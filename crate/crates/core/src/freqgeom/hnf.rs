//! Row-style Hermite normal form over the integers, with the unimodular
//! transform, used for resonance lattices and integer kernels.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HnfResult {
    /// Nonzero rows of the Hermite normal form (pivots positive, entries
    /// above each pivot reduced into `[0, pivot)`).
    pub basis: Vec<Vec<i64>>,
    /// Unimodular transform rows whose image is zero: a basis of the
    /// integer left kernel of the input.
    pub kernel: Vec<Vec<i64>>,
}

fn overflow() -> Error {
    Error::Numerical("integer overflow in Hermite normal form".into())
}

fn axpy(dst: &mut [i128], q: i128, src: &[i128]) -> Result<()> {
    for (d, s) in dst.iter_mut().zip(src) {
        *d = d
            .checked_sub(q.checked_mul(*s).ok_or_else(overflow)?)
            .ok_or_else(overflow)?;
    }
    Ok(())
}

/// Hermite normal form of the row lattice spanned by `rows` (all of equal length).
pub fn hermite_normal_form(rows: &[Vec<i64>]) -> Result<HnfResult> {
    let m = rows.len();
    if m == 0 {
        return Ok(HnfResult {
            basis: Vec::new(),
            kernel: Vec::new(),
        });
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config("rows of unequal length".into()));
    }
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut u: Vec<Vec<i128>> = (0..m)
        .map(|i| (0..m).map(|j| i128::from(i == j)).collect())
        .collect();
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == m {
            break;
        }
        loop {
            let best = (pivot_row..m)
                .filter(|&i| a[i][col] != 0)
                .min_by_key(|&i| a[i][col].abs());
            let Some(p) = best else { break };
            a.swap(pivot_row, p);
            u.swap(pivot_row, p);
            let mut done = true;
            for i in pivot_row + 1..m {
                if a[i][col] != 0 {
                    let q = a[i][col].div_euclid(a[pivot_row][col]);
                    let (src_a, src_u) = (a[pivot_row].clone(), u[pivot_row].clone());
                    axpy(&mut a[i], q, &src_a)?;
                    axpy(&mut u[i], q, &src_u)?;
                    if a[i][col] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        if a[pivot_row][col] == 0 {
            continue;
        }
        if a[pivot_row][col] < 0 {
            a[pivot_row].iter_mut().for_each(|x| *x = -*x);
            u[pivot_row].iter_mut().for_each(|x| *x = -*x);
        }
        let pv = a[pivot_row][col];
        let (src_a, src_u) = (a[pivot_row].clone(), u[pivot_row].clone());
        for i in 0..pivot_row {
            let q = a[i][col].div_euclid(pv);
            if q != 0 {
                axpy(&mut a[i], q, &src_a)?;
                axpy(&mut u[i], q, &src_u)?;
            }
        }
        pivot_row += 1;
    }
    let to64 = |r: &Vec<i128>| -> Result<Vec<i64>> {
        r.iter()
            .map(|&x| i64::try_from(x).map_err(|_| overflow()))
            .collect()
    };
    Ok(HnfResult {
        basis: a[..pivot_row].iter().map(to64).collect::<Result<_>>()?,
        kernel: u[pivot_row..].iter().map(to64).collect::<Result<_>>()?,
    })
}

/// Integer vectors `n` with `sum_i n_i * columns[i] = 0`, as an integer basis.
pub fn integer_kernel(columns: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    Ok(hermite_normal_form(columns)?.kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_reduction() {
        let h = hermite_normal_form(&[vec![2, 2], vec![-1, -1], vec![4, 4]]).unwrap();
        assert_eq!(h.basis, vec![vec![1, 1]]);
        assert_eq!(h.kernel.len(), 2);
    }

    #[test]
    fn full_lattice_is_identity() {
        let h = hermite_normal_form(&[vec![1, 0], vec![0, 1], vec![1, 1], vec![-1, 0]]).unwrap();
        assert_eq!(h.basis, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn kernel_vectors_annihilate() {
        let cols = vec![vec![2, 4, 6], vec![1, 2, 3], vec![0, 1, 5]];
        let k = integer_kernel(&cols).unwrap();
        assert_eq!(k.len(), 1);
        for kv in &k {
            for j in 0..3 {
                let s: i64 = kv.iter().zip(&cols).map(|(a, c)| a * c[j]).sum();
                assert_eq!(s, 0);
            }
        }
    }

    #[test]
    fn independent_columns_have_empty_kernel() {
        assert!(integer_kernel(&[vec![1, 0], vec![0, 1]])
            .unwrap()
            .is_empty());
        assert!(integer_kernel(&[vec![3, -2]]).unwrap().is_empty());
    }
}
