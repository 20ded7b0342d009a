#![allow(dead_code)]

use finclone::{Elem, RelStructure, Relation};
use proptest::prelude::*;

/// All `base^len` tuples in lexicographic order.
pub fn all_tuples(base: usize, len: usize) -> Vec<Vec<Elem>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..base as Elem).map(move |x| {
                    let mut t = t.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn relation_from_mask(base: usize, arity: usize, mask: &[bool]) -> Relation {
    let tuples: Vec<Vec<Elem>> = all_tuples(base, arity)
        .into_iter()
        .zip(mask)
        .filter(|(_, &keep)| keep)
        .map(|(t, _)| t)
        .collect();
    Relation::new(base, arity, tuples).unwrap()
}

/// Random structures on at most `max_size` elements with one or two
/// relations of arity at most `max_arity`.
pub fn arb_structure(max_size: usize, max_arity: usize) -> impl Strategy<Value = RelStructure> {
    (1..=max_size, prop::collection::vec(1..=max_arity, 1..=2)).prop_flat_map(|(size, arities)| {
        let masks: Vec<_> = arities
            .iter()
            .map(|&k| prop::collection::vec(any::<bool>(), size.pow(k as u32)))
            .collect();
        (Just(size), Just(arities), masks).prop_map(|(size, arities, masks)| {
            let rels = arities
                .iter()
                .zip(&masks)
                .enumerate()
                .map(|(i, (&k, m))| (format!("R{i}"), relation_from_mask(size, k, m)));
            RelStructure::new(size, rels).unwrap()
        })
    })
}

/// A random structure over a fixed signature `R0/a0, R1/a1, …`.
pub fn arb_with_signature(size: usize, arities: Vec<usize>) -> impl Strategy<Value = RelStructure> {
    let masks: Vec<_> = arities
        .iter()
        .map(|&k| prop::collection::vec(any::<bool>(), size.pow(k as u32)))
        .collect();
    masks.prop_map(move |masks| {
        let rels = arities
            .iter()
            .zip(&masks)
            .enumerate()
            .map(|(i, (&k, m))| (format!("R{i}"), relation_from_mask(size, k, m)));
        RelStructure::new(size, rels).unwrap()
    })
}

/// Naive homomorphism test.
pub fn brute_is_hom(map: &[Elem], c: &RelStructure, a: &RelStructure) -> bool {
    c.iter().all(|(name, r)| {
        let target = a.relation(name).unwrap();
        r.iter()
            .all(|t| target.contains(&t.iter().map(|&x| map[x as usize]).collect::<Vec<_>>()))
    })
}

/// Every homomorphism `c → a` by enumerating all maps.
pub fn brute_homs(c: &RelStructure, a: &RelStructure) -> Vec<Vec<Elem>> {
    all_tuples(a.size(), c.size())
        .into_iter()
        .filter(|m| brute_is_hom(m, c, a))
        .collect()
}

/// Every `n`-ary polymorphism table by enumerating all tables.
pub fn brute_polymorphisms(a: &RelStructure, n: usize) -> Vec<Vec<Elem>> {
    let args = all_tuples(a.size(), n);
    all_tuples(a.size(), args.len())
        .into_iter()
        .filter(|table| {
            a.iter().all(|(_, r)| {
                let rows: Vec<&[Elem]> = r.iter().collect();
                all_tuples(rows.len(), n).iter().all(|pick| {
                    let image: Vec<Elem> = (0..r.arity())
                        .map(|j| {
                            let arg: Vec<Elem> = pick.iter().map(|&row| rows[row as usize][j]).collect();
                            table[args.iter().position(|x| *x == arg).unwrap()]
                        })
                        .collect();
                    r.contains(&image)
                })
            })
        })
        .collect()
}
