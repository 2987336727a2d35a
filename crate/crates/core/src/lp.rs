//! Exact rational linear programming: a dense two-phase simplex with Bland's
//! rule, over free variables with affine equality and inequality constraints.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// `coeffs · x + constant`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Affine {
    pub coeffs: Vec<BigRational>,
    pub constant: BigRational,
}

impl Affine {
    pub fn eval(&self, x: &[BigRational]) -> BigRational {
        self.coeffs.iter().zip(x).fold(self.constant.clone(), |acc, (a, v)| acc + a * v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Finite(BigRational),
    /// Direction along which the objective improves without limit.
    Unbounded(Vec<BigRational>),
}

/// Feasible region `{x : eqs(x) = 0, ineqs(x) ≥ 0}` prepared for repeated optimization.
pub struct Polyhedron {
    n: usize,
    rows: Vec<Vec<BigRational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Polyhedron {
    /// Runs phase one; `None` when the region is empty.
    pub fn new(n: usize, eqs: &[Affine], ineqs: &[Affine]) -> Option<Self> {
        // Columns: x⁺ (n), x⁻ (n), slacks (ineqs), artificials (rows).
        let k = ineqs.len();
        let m = eqs.len() + k;
        let structural = 2 * n + k;
        let cols = structural + m;
        let mut rows = Vec::with_capacity(m);
        for (r, a) in eqs.iter().chain(ineqs).enumerate() {
            let mut row = vec![BigRational::zero(); cols + 1];
            for j in 0..n {
                row[j] = a.coeffs[j].clone();
                row[n + j] = -&a.coeffs[j];
            }
            if r >= eqs.len() {
                row[2 * n + (r - eqs.len())] = BigRational::from_integer((-1).into());
            }
            row[cols] = -&a.constant;
            if row[cols].is_negative() {
                for v in row.iter_mut() {
                    *v = -&*v;
                }
            }
            row[structural + r] = BigRational::from_integer(1.into());
            rows.push(row);
        }
        let basis: Vec<usize> = (structural..cols).collect();
        let mut p = Polyhedron { n, rows, basis, cols };
        let mut cost = vec![BigRational::zero(); cols];
        for c in cost.iter_mut().skip(structural) {
            *c = BigRational::from_integer(1.into());
        }
        p.iterate(&cost, cols).expect("phase one is bounded below");
        let value: BigRational =
            p.basis.iter().zip(&p.rows).filter(|(&b, _)| b >= structural).map(|(_, r)| r[cols].clone()).sum();
        if value.is_positive() {
            return None;
        }
        // Drive remaining artificials out of the basis or drop redundant rows.
        let mut r = 0;
        while r < p.rows.len() {
            if p.basis[r] >= structural {
                match (0..structural).find(|&j| !p.rows[r][j].is_zero()) {
                    Some(j) => p.pivot(r, j),
                    None => {
                        p.rows.remove(r);
                        p.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        p.cols = structural;
        for row in p.rows.iter_mut() {
            let rhs = row[cols].clone();
            row.truncate(structural);
            row.push(rhs);
        }
        Some(p)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let inv = self.rows[r][j].recip();
        for v in self.rows[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[j].is_zero() {
                continue;
            }
            let f = row[j].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = j;
    }

    /// Minimizes `cost` over columns `< allowed`; `Err(ray)` when unbounded.
    fn iterate(&mut self, cost: &[BigRational], allowed: usize) -> Result<(), Vec<BigRational>> {
        let rhs = self.rows.first().map(|r| r.len() - 1).unwrap_or(0);
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut red = cost[j].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if !row[j].is_zero() && !cost[b].is_zero() {
                        red -= &cost[b] * &row[j];
                    }
                }
                if red.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else { return Ok(()) };
            let mut leave: Option<(usize, BigRational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[j].is_positive() {
                    let ratio = &row[rhs] / &row[j];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((i, _)) => self.pivot(i, j),
                None => {
                    let mut ray = vec![BigRational::zero(); self.cols.max(allowed)];
                    ray[j] = BigRational::from_integer(1.into());
                    for (row, &b) in self.rows.iter().zip(&self.basis) {
                        if b < ray.len() {
                            ray[b] = -&row[j];
                        }
                    }
                    return Err(ray);
                }
            }
        }
    }

    fn point(&self) -> Vec<BigRational> {
        let rhs = self.cols;
        let mut x = vec![BigRational::zero(); self.n];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n {
                x[b] += &row[rhs];
            } else if b < 2 * self.n {
                x[b - self.n] -= &row[rhs];
            }
        }
        x
    }

    /// A feasible point of the region.
    pub fn feasible_point(&self) -> Vec<BigRational> {
        self.point()
    }

    /// Minimum (or maximum) of `objective · x` over the region.
    pub fn optimize(&self, objective: &[BigRational], maximize: bool) -> Bound {
        let mut work = Polyhedron { n: self.n, rows: self.rows.clone(), basis: self.basis.clone(), cols: self.cols };
        let mut cost = vec![BigRational::zero(); self.cols];
        for (j, c) in objective.iter().enumerate() {
            let c = if maximize { -c } else { c.clone() };
            cost[self.n + j] = -&c;
            cost[j] = c;
        }
        match work.iterate(&cost, self.cols) {
            Ok(()) => {
                let x = work.point();
                Bound::Finite(objective.iter().zip(&x).map(|(a, v)| a * v).sum())
            }
            Err(ray) => {
                let dir = (0..self.n).map(|j| &ray[j] - &ray[self.n + j]).collect();
                Bound::Unbounded(dir)
            }
        }
    }
}
