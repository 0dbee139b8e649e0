//! Bessel functions of the first kind, integer order.

/// Arguments up to this magnitude use the ascending series.
pub const SERIES_LIMIT: f64 = 10.0;

/// `J_n(x)` for integer `n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    if n < 0 {
        let v = bessel_j(-n, x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    if x <= SERIES_LIMIT {
        ascending_series(n as u32, x)
    } else {
        miller(n as u32, x)
    }
}

fn ascending_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    if half == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    // (x/2)^n / n!
    let mut term = (1..=n).fold(1.0, |acc, k| acc * half / k as f64);
    let q = -half * half;
    let mut sum = term;
    for k in 0..400u32 {
        let denom = ((k + 1) * (k + 1 + n)) as f64;
        term *= q / denom;
        sum += term;
        if term.abs() < 1e-14 * 1e-3 && denom > half * half {
            break;
        }
    }
    sum
}

/// Backward recurrence normalized with `J_0 + 2 sum_k J_{2k} = 1`.
fn miller(n: u32, x: f64) -> f64 {
    let top = n.max(x.ceil() as u32);
    let mut m = top + 20 + (40.0 * top as f64).sqrt() as u32;
    m += m % 2;
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut result = 0.0;
    let mut norm = 0.0;
    let two_over_x = 2.0 / x;
    let mut k = m;
    while k > 0 {
        // cur = J_k, next = J_{k+1}; produce J_{k-1}
        let prev = (k as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            result *= 1e-250;
            norm *= 1e-250;
        }
        if k == n {
            result = cur;
        }
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * cur;
        }
    }
    norm += cur;
    result / norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(2, 5.0) - 0.046_565_116_277_752_2).abs() < 1e-13);
        assert!((bessel_j(0, 20.0) - 0.167_024_664_340_583).abs() < 1e-12);
    }

    #[test]
    fn zero_argument() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_j(2, 0.0), 0.0);
    }

    #[test]
    fn symmetry_relations() {
        for &x in &[0.3, 2.5, 7.0, 14.0] {
            assert!((bessel_j(-3, x) + bessel_j(3, x)).abs() < 1e-14);
            assert!((bessel_j(-2, x) - bessel_j(2, x)).abs() < 1e-14);
            assert!((bessel_j(1, -x) + bessel_j(1, x)).abs() < 1e-14);
        }
    }

    #[test]
    fn branches_agree_near_the_switch() {
        for n in 0..6 {
            let s = ascending_series(n, 9.999);
            let m = miller(n, 9.999);
            assert!((s - m).abs() < 1e-11, "n={n}: {s} vs {m}");
        }
    }

    #[test]
    fn three_term_recurrence_holds() {
        for &x in &[0.7, 3.3, 12.0, 25.0] {
            for n in 1..8 {
                let lhs = bessel_j(n - 1, x) + bessel_j(n + 1, x);
                let rhs = 2.0 * n as f64 / x * bessel_j(n, x);
                assert!((lhs - rhs).abs() < 1e-11);
            }
        }
    }
}
