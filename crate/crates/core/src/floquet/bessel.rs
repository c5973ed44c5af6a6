//! Bessel functions of the first kind for integer order.

/// Below this argument the power series converges without cancellation trouble.
const SERIES_LIMIT: f64 = 1.0;

/// `J_n(x)` for integer `n ≥ 0`; absolute error below 1e-12 for `|x| ≤ 50`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 1 { -v } else { v };
    }
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < SERIES_LIMIT {
        return series(n, x);
    }
    bessel_j_upto(n, x)[n as usize]
}

/// `[J_0(x), …, J_nmax(x)]` from one backward recurrence.
pub fn bessel_j_upto(nmax: u32, x: f64) -> Vec<f64> {
    let nmax = nmax as usize;
    if x < 0.0 {
        let mut v = bessel_j_upto(nmax as u32, -x);
        v.iter_mut().skip(1).step_by(2).for_each(|j| *j = -*j);
        return v;
    }
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return v;
    }
    if x < SERIES_LIMIT {
        return (0..=nmax as u32).map(|n| series(n, x)).collect();
    }
    miller(nmax, x)
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / k as f64;
    }
    let q = -half * half;
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + n as f64));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || term == 0.0 {
            return sum;
        }
    }
}

/// Miller's backward recurrence normalised by `J_0 + 2 Σ J_2k = 1`.
fn miller(nmax: usize, x: f64) -> Vec<f64> {
    let top = (nmax as f64).max(x);
    let mut m = top as usize + 20 + (40.0 * top).sqrt() as usize;
    m += m % 2;
    let mut out = vec![0.0; nmax + 1];
    let (mut jp, mut j) = (0.0, 1e-30);
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        // j holds J_k, jp holds J_{k+1}; step down to J_{k-1}
        let jm = 2.0 * k as f64 / x * j - jp;
        jp = j;
        j = jm;
        if k - 1 <= nmax {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    norm += j;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        for n in 1..8 {
            assert_eq!(bessel_j(n, 0.0), 0.0);
        }
    }

    #[test]
    fn tabulated_points() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(0, 10.0) - -0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((bessel_j(1, 10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
    }

    #[test]
    fn series_and_recurrence_agree_at_the_seam() {
        for n in 0..10 {
            let a = series(n, 1.0);
            let b = miller(n as usize, 1.0)[n as usize];
            assert!((a - b).abs() < 1e-15, "n={n}: {a} vs {b}");
        }
    }

    #[test]
    fn odd_orders_flip_sign() {
        assert_eq!(bessel_j(3, -2.5), -bessel_j(3, 2.5));
        assert_eq!(bessel_j(2, -2.5), bessel_j(2, 2.5));
        let v = bessel_j_upto(4, -2.5);
        assert!((v[1] + bessel_j(1, 2.5)).abs() < 1e-15);
    }
}
