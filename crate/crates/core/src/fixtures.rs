//! Small named structures used throughout the tests, the acceptance suite
//! and the command line tool.

use crate::hom::add_singletons;
use crate::structures::{Elem, RelStructure, Relation};

fn rel(size: usize, arity: usize, tuples: Vec<Vec<Elem>>) -> Relation {
    Relation::new(size, arity, tuples).expect("fixture tuples are in range")
}

fn structure(size: usize, rels: Vec<(&str, Relation)>) -> RelStructure {
    RelStructure::new(size, rels).expect("fixture is well formed")
}

/// Complete loopless graph `K_n` with symmetric edge relation `E`.
pub fn clique(n: usize) -> RelStructure {
    let mut t = Vec::new();
    for a in 0..n as Elem {
        for b in 0..n as Elem {
            if a != b {
                t.push(vec![a, b]);
            }
        }
    }
    structure(n, vec![("E", rel(n, 2, t))])
}

/// Undirected path `0 – 1 – … – n-1` with symmetric edge relation `E`.
pub fn path(n: usize) -> RelStructure {
    let mut t = Vec::new();
    for a in 1..n as Elem {
        t.push(vec![a - 1, a]);
        t.push(vec![a, a - 1]);
    }
    structure(n, vec![("E", rel(n, 2, t))])
}

pub fn order_relation() -> Relation {
    rel(2, 2, vec![vec![0, 0], vec![0, 1], vec![1, 1]])
}

/// `({0,1}; le)`.
pub fn boolean_order() -> RelStructure {
    structure(2, vec![("le", order_relation())])
}

/// `x ⊕ y ⊕ z = 0` on `{0,1}`.
pub fn xor_relation() -> Relation {
    affine_relation(0)
}

fn affine_relation(parity: Elem) -> Relation {
    let mut t = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                if x ^ y ^ z == parity {
                    t.push(vec![x, y, z]);
                }
            }
        }
    }
    rel(2, 3, t)
}

pub fn one_in_three_relation() -> Relation {
    rel(2, 3, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]])
}

pub fn nae_relation() -> Relation {
    let mut t = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                if !(x == y && y == z) {
                    t.push(vec![x, y, z]);
                }
            }
        }
    }
    rel(2, 3, t)
}

pub fn disequality_relation() -> Relation {
    rel(2, 2, vec![vec![0, 1], vec![1, 0]])
}

/// `({0,1}; le, {0}, {1})`.
pub fn boolean_order_with_constants() -> RelStructure {
    add_singletons(&boolean_order())
}

/// `({0,1}; xor, {0}, {1})`.
pub fn boolean_affine_with_constants() -> RelStructure {
    add_singletons(&structure(2, vec![("xor", xor_relation())]))
}

/// `({0,1}; one_in_three, {0}, {1})`, whose polymorphisms are projections.
pub fn projection_test_structure() -> RelStructure {
    add_singletons(&structure(2, vec![("one_in_three", one_in_three_relation())]))
}

/// Boolean structures with both singletons plus one or two relations from
/// `le`, `xor`, `one_in_three`, `nae`, `neq`.
pub fn boolean_corpus() -> Vec<(String, RelStructure)> {
    let base: Vec<(&str, Relation)> = vec![
        ("le", order_relation()),
        ("xor", xor_relation()),
        ("one_in_three", one_in_three_relation()),
        ("nae", nae_relation()),
        ("neq", disequality_relation()),
    ];
    let mut out = Vec::new();
    for (i, (name, r)) in base.iter().enumerate() {
        out.push((
            name.to_string(),
            add_singletons(&structure(2, vec![(name, r.clone())])),
        ));
        for (other, s) in &base[i + 1..] {
            out.push((
                format!("{name}+{other}"),
                add_singletons(&structure(2, vec![(name, r.clone()), (other, s.clone())])),
            ));
        }
    }
    out
}

/// Elements of `Z_2^2` are coded as `2a + b` for `(a, b)`; vector addition
/// is then bitwise xor of codes.
fn hepp_sum_relation(target: Elem) -> Relation {
    let mut t = Vec::new();
    for x in 0..4 {
        for y in 0..4 {
            for z in 0..4 {
                if x ^ y ^ z == target {
                    t.push(vec![x, y, z]);
                }
            }
        }
    }
    rel(4, 3, t)
}

/// The structure on `Z_2^2` with the four ternary sum relations `Rab`
/// (`x + y + z = (a,b)`) and the four singletons `Cab`.
pub fn hepp_a() -> RelStructure {
    let mut rels = Vec::new();
    let names = ["00", "01", "10", "11"];
    for (code, n) in names.iter().enumerate() {
        rels.push((format!("R{n}"), hepp_sum_relation(code as Elem)));
    }
    for (code, n) in names.iter().enumerate() {
        rels.push((format!("C{n}"), rel(4, 1, vec![vec![code as Elem]])));
    }
    RelStructure::new(4, rels).expect("fixture is well formed")
}

/// The reduct of [`hepp_a`] to `R00, R10, C00, C10`, renamed to the
/// signature `R0, R1, C0, C1` of [`hepp_b`].
pub fn hepp_a_prime() -> RelStructure {
    hepp_a()
        .reduct(&["R00", "R10", "C00", "C10"])
        .and_then(|r| r.rename(&[("R00", "R0"), ("R10", "R1"), ("C00", "C0"), ("C10", "C1")]))
        .expect("fixture is well formed")
}

/// `(Z_2; R0, R1, {0}, {1})` with `Ra = {x + y + z = a}`.
pub fn hepp_b() -> RelStructure {
    structure(
        2,
        vec![
            ("R0", affine_relation(0)),
            ("R1", affine_relation(1)),
            ("C0", rel(2, 1, vec![vec![0]])),
            ("C1", rel(2, 1, vec![vec![1]])),
        ],
    )
}

fn partition_relation(size: usize, blocks: &[&[Elem]]) -> Relation {
    let mut t = Vec::new();
    for block in blocks {
        for &x in *block {
            for &y in *block {
                t.push(vec![x, y]);
            }
        }
    }
    rel(size, 2, t)
}

/// Labels of the Day structure's partitions, printed 1-based.
pub const DAY_PARTITIONS: [(&str, &str); 3] =
    [("alpha", "12|34"), ("beta", "13|24"), ("gamma", "12|3|4")];

/// Four elements with the equivalence relations of the partitions
/// `12|34`, `13|24` and `12|3|4` (stored 0-based).
pub fn day_structure() -> RelStructure {
    structure(
        4,
        vec![
            ("alpha", partition_relation(4, &[&[0, 1], &[2, 3]])),
            ("beta", partition_relation(4, &[&[0, 2], &[1, 3]])),
            ("gamma", partition_relation(4, &[&[0, 1], &[2], &[3]])),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hepp_relations_have_sixteen_tuples() {
        let a = hepp_a();
        assert_eq!(a.size(), 4);
        assert_eq!(a.signature().len(), 8);
        for name in ["R00", "R01", "R10", "R11"] {
            assert_eq!(a.relation(name).unwrap().len(), 16);
        }
        assert!(a.relation("R10").unwrap().contains(&[2, 0, 0]));
        assert!(a.relation("R11").unwrap().contains(&[1, 2, 0]));
    }

    #[test]
    fn day_relations_are_equivalences() {
        let d = day_structure();
        for (_, r) in d.iter() {
            for x in 0..4 {
                assert!(r.contains(&[x, x]));
                for y in 0..4 {
                    assert_eq!(r.contains(&[x, y]), r.contains(&[y, x]));
                    for z in 0..4 {
                        if r.contains(&[x, y]) && r.contains(&[y, z]) {
                            assert!(r.contains(&[x, z]));
                        }
                    }
                }
            }
        }
        assert_eq!(d.relation("gamma").unwrap().len(), 6);
    }

    #[test]
    fn corpus_size() {
        assert_eq!(boolean_corpus().len(), 15);
    }
}
