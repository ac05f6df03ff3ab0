//! Reference networks.

use super::{Mechanism, ReactionNetwork};
use crate::scalar::Coefficient;

/// Electron/hole pair annihilation `e + h <=> 0`, charges `(-1, +1)`.
pub fn pair_annihilation<T: Coefficient>(rate: T, reference: [T; 2]) -> ReactionNetwork<T> {
    ReactionNetwork::new(
        vec!["e".into(), "h".into()],
        vec![-1, 1],
        reference.to_vec(),
        vec![Mechanism::new(vec![1, 1], vec![0, 0], rate)],
    )
    .expect("pair annihilation is neutral")
}

/// Electrons, holes and excitons (`z = (-1, 1, 0)`) with seven mechanisms:
///
/// | h | a         | b         | kind                       |
/// |---|-----------|-----------|----------------------------|
/// | 1 | (1, 1, 0) | (0, 0, 0) | electron-hole recombination |
/// | 2 | (1, 1, 0) | (0, 0, 1) | exciton formation          |
/// | 3 | (1, 1, 0) | (1, 1, 1) | Auger                      |
/// | 4 | (1, 0, 0) | (2, 1, 0) | Auger                      |
/// | 5 | (1, 0, 0) | (1, 0, 1) | scattering                 |
/// | 6 | (0, 1, 0) | (1, 2, 0) | Auger                      |
/// | 7 | (0, 1, 0) | (0, 1, 1) | scattering                 |
pub fn exciton_network<T: Coefficient>(rates: [T; 7], reference: [T; 3]) -> ReactionNetwork<T> {
    const TABLE: [([u32; 3], [u32; 3]); 7] = [
        ([1, 1, 0], [0, 0, 0]),
        ([1, 1, 0], [0, 0, 1]),
        ([1, 1, 0], [1, 1, 1]),
        ([1, 0, 0], [2, 1, 0]),
        ([1, 0, 0], [1, 0, 1]),
        ([0, 1, 0], [1, 2, 0]),
        ([0, 1, 0], [0, 1, 1]),
    ];
    let mechanisms = TABLE
        .iter()
        .zip(rates)
        .map(|((a, b), k)| Mechanism::new(a.to_vec(), b.to_vec(), k))
        .collect();
    ReactionNetwork::new(
        vec!["e".into(), "h".into(), "ex".into()],
        vec![-1, 1, 0],
        reference.to_vec(),
        mechanisms,
    )
    .expect("exciton network is neutral")
}

/// Seven-carrier activator network: electrons `e`, holes `h`, self-trapped
/// holes `sth`, activators that captured an electron `a-` or a hole `a+`,
/// self-trapped excitons `ste` and excited activators `a*`.
///
/// Nine mechanisms, all of order at most two on either side:
/// pair creation `0 <=> e + h`, hole self-trapping `h <=> sth`,
/// `e + sth <=> ste`, `ste <=> 0`, `e + a+ <=> a*`, `h + a- <=> a*`,
/// `a* <=> 0`, hole capture `h <=> a+` and electron capture `e <=> a-`.
pub fn activator_network<T: Coefficient>(rates: [T; 9], reference: [T; 7]) -> ReactionNetwork<T> {
    // species order: e, h, sth, a-, a+, ste, a*
    const TABLE: [([u32; 7], [u32; 7]); 9] = [
        ([0, 0, 0, 0, 0, 0, 0], [1, 1, 0, 0, 0, 0, 0]),
        ([0, 1, 0, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0, 0]),
        ([1, 0, 1, 0, 0, 0, 0], [0, 0, 0, 0, 0, 1, 0]),
        ([0, 0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 0, 0]),
        ([1, 0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 0, 0, 1]),
        ([0, 1, 0, 1, 0, 0, 0], [0, 0, 0, 0, 0, 0, 1]),
        ([0, 0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 0, 0, 0]),
        ([0, 1, 0, 0, 0, 0, 0], [0, 0, 0, 0, 1, 0, 0]),
        ([1, 0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0, 0]),
    ];
    let mechanisms = TABLE
        .iter()
        .zip(rates)
        .map(|((a, b), k)| Mechanism::new(a.to_vec(), b.to_vec(), k))
        .collect();
    ReactionNetwork::new(
        ["e", "h", "sth", "a-", "a+", "ste", "a*"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        vec![-1, 1, 1, -1, 1, 0, 0],
        reference.to_vec(),
        mechanisms,
    )
    .expect("activator network is neutral")
}
