//! Deterministic primality for u64.

/// Miller–Rabin with the witness set {2,…,37}, which is exact for all
/// 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Smallest prime ≥ lo, if any fits in u64.
pub fn next_prime_at_least(lo: u64) -> Option<u64> {
    let mut n = lo.max(2);
    loop {
        if is_prime_u64(n) {
            return Some(n);
        }
        n = n.checked_add(1)?;
    }
}

/// Smallest prime in [lo, hi], if one exists.
pub fn prime_in_range(lo: u64, hi: u64) -> Option<u64> {
    next_prime_at_least(lo).filter(|&p| p <= hi)
}
