use crate::error::{Error, Result};

/// Outcome of summing `sum_n A^n b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    /// Sup-norm of every term, starting with `||b||`.
    pub term_norms: Vec<f64>,
    pub converged: bool,
}

impl SeriesReport {
    pub fn terms(&self) -> usize {
        self.term_norms.len()
    }

    pub fn last_norm(&self) -> f64 {
        self.term_norms.last().copied().unwrap_or(0.0)
    }
}

/// One term of the series, handed to the caller's visitor.
pub struct SeriesTerm<'a> {
    pub index: usize,
    pub values: &'a [f64],
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sums the successive-approximation series `F = sum_n F^n`, `F^0 = base`,
/// `F^{n+1} = A F^n`, stopping once `||F^n||_inf <= tol`.
pub(crate) fn sum_series<A, V>(
    base: Vec<f64>,
    mut apply: A,
    tol: f64,
    max_terms: usize,
    mut visit: V,
) -> Result<(Vec<f64>, SeriesReport)>
where
    A: FnMut(&[f64], &mut [f64]),
    V: FnMut(SeriesTerm<'_>),
{
    let mut sum = base.clone();
    let mut term = base;
    let mut next = vec![0.0; term.len()];
    let mut norms = vec![sup_norm(&term)];
    visit(SeriesTerm {
        index: 0,
        values: &term,
    });
    let mut n = 0;
    while norms[n] > tol {
        if n + 1 >= max_terms {
            return Err(Error::NoConvergence {
                iterations: n + 1,
                residual: norms[n],
            });
        }
        apply(&term, &mut next);
        std::mem::swap(&mut term, &mut next);
        n += 1;
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        norms.push(sup_norm(&term));
        visit(SeriesTerm {
            index: n,
            values: &term,
        });
    }
    Ok((
        sum,
        SeriesReport {
            term_norms: norms,
            converged: true,
        },
    ))
}

/// Plain fixed-point iteration `F <- base + A F` from `init`; returns the
/// iterate and the number of sweeps.
pub(crate) fn fixed_point<A>(
    base: &[f64],
    init: Vec<f64>,
    mut apply: A,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let mut cur = init;
    let mut next = vec![0.0; cur.len()];
    for it in 1..=max_iter {
        apply(&cur, &mut next);
        let mut diff = 0.0f64;
        for ((nx, b), c) in next.iter_mut().zip(base).zip(&cur) {
            *nx += b;
            diff = diff.max((*nx - c).abs());
        }
        std::mem::swap(&mut cur, &mut next);
        if diff <= tol {
            return Ok((cur, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // A = strictly lower shift scaled by 1/2: the series terminates.
    fn shift(x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        for i in 1..x.len() {
            out[i] = 0.5 * x[i - 1];
        }
    }

    #[test]
    fn nilpotent_series_terminates() {
        let (sum, rep) = sum_series(vec![1.0, 0.0, 0.0], shift, 1e-12, 10, |_| {}).unwrap();
        assert_eq!(sum, vec![1.0, 0.5, 0.25]);
        assert_eq!(rep.term_norms, vec![1.0, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn series_and_fixed_point_agree() {
        let base = vec![1.0, -2.0, 0.5, 3.0];
        let (sum, _) = sum_series(base.clone(), shift, 1e-14, 50, |_| {}).unwrap();
        let (fp, _) = fixed_point(&base, vec![0.0; 4], shift, 1e-14, 50).unwrap();
        for (a, b) in sum.iter().zip(&fp) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let grow = |x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = 2.0 * v;
            }
        };
        let err = sum_series(vec![1.0], grow, 1e-12, 5, |_| {}).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }
}
