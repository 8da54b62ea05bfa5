use num_bigint::BigUint;

/// Worst-case number of k-subsets of genes with n nodes over m types:
/// C(m^n * 2^(n*n), k).
pub fn search_space_size(m: u32, n: u32, k: u32) -> BigUint {
    let genes = BigUint::from(m).pow(n) * BigUint::from(2u32).pow(n * n);
    binomial(&genes, k)
}

fn binomial(n: &BigUint, k: u32) -> BigUint {
    let k_big = BigUint::from(k);
    if &k_big > n {
        return BigUint::ZERO;
    }
    // running product stays an exact binomial at every step
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * (n - BigUint::from(i)) / BigUint::from(i + 1);
    }
    acc
}
