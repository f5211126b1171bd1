//! Exact polynomial fits in one integer parameter.

use doa_core::rat::Rat;

/// Coefficients, constant term first.
pub type Polynomial = Vec<Rat>;

pub fn eval(p: &[Rat], x: i64) -> Rat {
    let x = Rat::int(x);
    p.iter().rev().fold(Rat::ZERO, |acc, c| &(&acc * &x) + c)
}

/// Interpolating polynomial through `pts` (distinct abscissae).
fn lagrange(pts: &[(i64, i64)]) -> Polynomial {
    let mut out = vec![Rat::ZERO; pts.len()];
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        // basis polynomial ∏_{j≠i} (x - xj)/(xi - xj)
        let mut basis = vec![Rat::ONE];
        let mut denom = Rat::ONE;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut next = vec![Rat::ZERO; basis.len() + 1];
            for (k, b) in basis.iter().enumerate() {
                next[k + 1] = &next[k + 1] + b;
                next[k] = &next[k] - &(b * &Rat::int(xj));
            }
            basis = next;
            denom = &denom * &Rat::int(xi - xj);
        }
        let f = &Rat::int(yi) / &denom;
        for (k, b) in basis.iter().enumerate() {
            out[k] = &out[k] + &(b * &f);
        }
    }
    while out.len() > 1 && out.last().is_some_and(|c| c.is_zero()) {
        out.pop();
    }
    out
}

/// Lowest-degree polynomial through every point but the last, accepted only
/// if it also reproduces the held-out last point.
pub fn fit(pts: &[(i64, i64)]) -> Option<Polynomial> {
    let (held, train) = pts.split_last()?;
    if train.is_empty() {
        return None;
    }
    for d in 0..train.len() {
        let p = lagrange(&train[..=d]);
        if train.iter().chain(std::iter::once(held)).all(|&(x, y)| eval(&p, x) == Rat::int(y)) {
            return Some(p);
        }
    }
    None
}

/// `n^2 - 3n`, `2`, `1/2n^2 - 1/2n`.
pub fn format(p: &[Rat], var: &str) -> String {
    let mut s = String::new();
    for (k, c) in p.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let neg = c.is_negative();
        let a = c.abs();
        if s.is_empty() {
            if neg {
                s.push('-');
            }
        } else {
            s.push_str(if neg { " - " } else { " + " });
        }
        let mono = match k {
            0 => String::new(),
            1 => var.to_string(),
            _ => format!("{var}^{k}"),
        };
        if k == 0 || !a.is_one() {
            s.push_str(&a.to_string());
        }
        s.push_str(&mono);
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn einstein_degree() {
        let pts: Vec<(i64, i64)> = (4..=8).map(|n| (n, n * (n - 3))).collect();
        assert_eq!(format(&fit(&pts).unwrap(), "n"), "n^2 - 3n");
    }

    #[test]
    fn constant() {
        assert_eq!(format(&fit(&[(3, 2), (4, 2), (5, 2)]).unwrap(), "n"), "2");
    }

    #[test]
    fn rational_coefficients() {
        let pts: Vec<(i64, i64)> = (2..=6).map(|n| (n, n * (n - 1) / 2)).collect();
        assert_eq!(format(&fit(&pts).unwrap(), "n"), "1/2n^2 - 1/2n");
    }

    #[test]
    fn held_out_point_rejects() {
        // quadratic through the first three, wrong at the fourth
        assert!(fit(&[(1, 1), (2, 4), (3, 9), (4, 17)]).is_none());
    }
}
