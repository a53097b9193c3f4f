//! Partial Bell polynomials and the Faà di Bruno formula.

use crate::error::{Error, Result};

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Partial Bell polynomial `B_{n,l}(x_1, …, x_{n-l+1})` by exhaustive
/// enumeration of the index tuples `(j_1, …)` with `Σ j_i = l` and
/// `Σ i·j_i = n`.
pub fn bell_polynomial(n: usize, l: usize, xs: &[f64]) -> Result<f64> {
    if l == 0 || l > n {
        return Err(Error::InvalidArgument(format!(
            "Bell polynomial needs 1 <= l <= n, got n = {n}, l = {l}"
        )));
    }
    let m = n - l + 1;
    if xs.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            got: xs.len(),
        });
    }
    let mut js = vec![0usize; m];
    let mut total = 0.0;
    enumerate(1, l, n, &mut js, &mut |js| {
        let mut term = factorial(n);
        for (idx, &j) in js.iter().enumerate() {
            let i = idx + 1;
            term *= (xs[idx] / factorial(i)).powi(j as i32) / factorial(j);
        }
        total += term;
    });
    Ok(total)
}

fn enumerate<F: FnMut(&[usize])>(
    i: usize,
    parts_left: usize,
    weight_left: usize,
    js: &mut Vec<usize>,
    visit: &mut F,
) {
    if i > js.len() {
        if parts_left == 0 && weight_left == 0 {
            visit(js);
        }
        return;
    }
    let max_j = parts_left.min(weight_left / i);
    for j in 0..=max_j {
        js[i - 1] = j;
        enumerate(i + 1, parts_left - j, weight_left - i * j, js, visit);
    }
    js[i - 1] = 0;
}

/// All partial Bell polynomials `B_{n,l}` for `0 <= l <= n <= n_max`,
/// evaluated by the recurrence
/// `B_{n,l} = Σ_i C(n-1, i-1) x_i B_{n-i, l-1}`.
#[derive(Debug, Clone)]
pub struct BellTable {
    n_max: usize,
    values: Vec<f64>,
}

impl BellTable {
    /// `xs[i - 1]` holds `x_i`; at least `n_max` entries are needed.
    pub fn new(xs: &[f64], n_max: usize) -> Result<Self> {
        if xs.len() < n_max {
            return Err(Error::LengthMismatch {
                expected: n_max,
                got: xs.len(),
            });
        }
        let w = n_max + 1;
        let mut values = vec![0.0; w * w];
        values[0] = 1.0;
        for n in 1..=n_max {
            for l in 1..=n {
                let mut acc = 0.0;
                for i in 1..=(n - l + 1) {
                    acc += binomial(n - 1, i - 1) * xs[i - 1] * values[(n - i) * w + (l - 1)];
                }
                values[n * w + l] = acc;
            }
        }
        Ok(BellTable { n_max, values })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn get(&self, n: usize, l: usize) -> f64 {
        if n > self.n_max || l > n {
            return 0.0;
        }
        self.values[n * (self.n_max + 1) + l]
    }
}

/// `(f∘g)^{(r)}(x)` from `outer = [f'(g(x)), …, f^{(r)}(g(x))]` and
/// `inner = [g'(x), …, g^{(r)}(x)]`.
pub fn faa_di_bruno(outer: &[f64], inner: &[f64]) -> Result<f64> {
    if outer.len() != inner.len() {
        return Err(Error::LengthMismatch {
            expected: outer.len(),
            got: inner.len(),
        });
    }
    let r = outer.len();
    if r == 0 {
        return Err(Error::InvalidArgument(
            "Faà di Bruno needs at least one derivative".into(),
        ));
    }
    let table = BellTable::new(inner, r)?;
    Ok((1..=r).map(|l| outer[l - 1] * table.get(r, l)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(bell_polynomial(1, 1, &[2.5]).unwrap(), 2.5);
        assert_eq!(bell_polynomial(3, 2, &[2.0, 5.0]).unwrap(), 30.0);
        let v = bell_polynomial(4, 2, &[2.0, 3.0, 7.0]).unwrap();
        assert_eq!(v, 4.0 * 2.0 * 7.0 + 3.0 * 9.0);
        assert!(bell_polynomial(2, 3, &[]).is_err());
        assert!(bell_polynomial(3, 2, &[1.0]).is_err());
    }

    #[test]
    fn chain_rule_and_square_of_cube() {
        assert_eq!(faa_di_bruno(&[3.0], &[4.0]).unwrap(), 12.0);
        // f(y) = y^2, g(x) = x^3 at x = 1
        assert_eq!(faa_di_bruno(&[2.0, 2.0], &[3.0, 6.0]).unwrap(), 30.0);
        assert_eq!(faa_di_bruno(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert!(faa_di_bruno(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bell_numbers_from_unit_arguments() {
        let t = BellTable::new(&[1.0; 6], 6).unwrap();
        let bell: Vec<f64> = (0..=6).map(|n| (0..=n).map(|l| t.get(n, l)).sum()).collect();
        assert_eq!(bell, vec![1.0, 1.0, 2.0, 5.0, 15.0, 52.0, 203.0]);
    }

    proptest! {
        #[test]
        fn recurrence_matches_enumeration(xs in prop::collection::vec(-2.0f64..2.0, 8)) {
            let t = BellTable::new(&xs, 8).unwrap();
            for n in 1..=8 {
                for l in 1..=n {
                    let e = bell_polynomial(n, l, &xs[..n - l + 1]).unwrap();
                    let r = t.get(n, l);
                    prop_assert!((e - r).abs() <= 1e-9 * (1.0 + e.abs()));
                }
            }
        }
    }
}
