//! Reflections of operations along a pair of maps `h1: B → A`, `h2: A → B`.

use serde::{Deserialize, Serialize};

use crate::clone::OperationTable;
use crate::error::{Error, Result};
use crate::identities::Assignment;
use crate::structures::Elem;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionMaps {
    a_size: usize,
    b_size: usize,
    h1: Vec<Elem>,
    h2: Vec<Elem>,
}

impl ReflectionMaps {
    /// `h1` is indexed by elements of `B`, `h2` by elements of `A`.
    pub fn new(a_size: usize, b_size: usize, h1: Vec<Elem>, h2: Vec<Elem>) -> Result<Self> {
        if a_size == 0 || b_size == 0 {
            return Err(Error::invalid("reflection domains must be nonempty"));
        }
        if h1.len() != b_size || h2.len() != a_size {
            return Err(Error::invalid("reflection maps must be total on their domains"));
        }
        if let Some(&x) = h1.iter().find(|&&x| x as usize >= a_size) {
            return Err(Error::OutOfRange {
                element: x as u64,
                size: a_size,
            });
        }
        if let Some(&x) = h2.iter().find(|&&x| x as usize >= b_size) {
            return Err(Error::OutOfRange {
                element: x as u64,
                size: b_size,
            });
        }
        Ok(ReflectionMaps { a_size, b_size, h1, h2 })
    }

    /// Like [`ReflectionMaps::new`], additionally requiring `h2 ∘ h1 = id`.
    pub fn retraction(a_size: usize, b_size: usize, h1: Vec<Elem>, h2: Vec<Elem>) -> Result<Self> {
        let maps = Self::new(a_size, b_size, h1, h2)?;
        if !maps.is_retraction() {
            return Err(Error::invalid("h2 after h1 is not the identity on B"));
        }
        Ok(maps)
    }

    pub fn identity(size: usize) -> Self {
        let id: Vec<Elem> = (0..size as Elem).collect();
        ReflectionMaps {
            a_size: size,
            b_size: size,
            h1: id.clone(),
            h2: id,
        }
    }

    pub fn is_retraction(&self) -> bool {
        self.h1.iter().enumerate().all(|(b, &a)| self.h2[a as usize] as usize == b)
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn b_size(&self) -> usize {
        self.b_size
    }

    pub fn h1(&self) -> &[Elem] {
        &self.h1
    }

    pub fn h2(&self) -> &[Elem] {
        &self.h2
    }
}

/// `(x_1, …, x_n) ↦ h2(f(h1(x_1), …, h1(x_n)))`.
pub fn reflect_operation(f: &OperationTable, maps: &ReflectionMaps) -> Result<OperationTable> {
    if f.domain_size() != maps.a_size {
        return Err(Error::invalid(format!(
            "operation on {} elements, reflection expects {}",
            f.domain_size(),
            maps.a_size
        )));
    }
    OperationTable::from_fn(maps.b_size, f.arity(), |xs| {
        let args: Vec<Elem> = xs.iter().map(|&x| maps.h1[x as usize]).collect();
        maps.h2[f.eval(&args) as usize]
    })
}

/// Reflects every operation; duplicates are dropped, first occurrence kept.
pub fn reflect_operations(ops: &[OperationTable], maps: &ReflectionMaps) -> Result<Vec<OperationTable>> {
    let mut out: Vec<OperationTable> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for f in ops {
        let g = reflect_operation(f, maps)?;
        if seen.insert(g.clone()) {
            out.push(g);
        }
    }
    Ok(out)
}

/// Reflects each operation of an assignment of symbols.
pub fn reflect_assignment(asg: &Assignment, maps: &ReflectionMaps) -> Result<Assignment> {
    asg.iter()
        .map(|(k, f)| Ok((k.clone(), reflect_operation(f, maps)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clone::boolean;

    #[test]
    fn identity_maps_fix_operations() {
        let ops = vec![boolean::min(), boolean::majority()];
        assert_eq!(reflect_operations(&ops, &ReflectionMaps::identity(2)).unwrap(), ops);
    }

    #[test]
    fn hepp_sum_reflects_to_xor() {
        let sum = OperationTable::from_fn(4, 3, |x| x[0] ^ x[1] ^ x[2]).unwrap();
        // h1: x ↦ (x, 0) = 2x, h2: (a, b) ↦ a
        let maps = ReflectionMaps::retraction(4, 2, vec![0, 2], vec![0, 0, 1, 1]).unwrap();
        assert_eq!(reflect_operation(&sum, &maps).unwrap(), boolean::minority());
    }

    #[test]
    fn constant_h2_gives_constants() {
        let maps = ReflectionMaps::new(2, 3, vec![0, 1, 1], vec![2, 2]).unwrap();
        let out = reflect_operations(&[boolean::min(), boolean::max()], &maps).unwrap();
        assert_eq!(out, vec![OperationTable::constant(3, 2, 2).unwrap()]);
    }

    #[test]
    fn range_violations() {
        assert!(ReflectionMaps::new(2, 2, vec![0, 2], vec![0, 1]).is_err());
        assert!(ReflectionMaps::new(2, 2, vec![0], vec![0, 1]).is_err());
        assert!(ReflectionMaps::retraction(2, 2, vec![0, 0], vec![0, 1]).is_err());
        let maps = ReflectionMaps::identity(3);
        assert!(reflect_operation(&boolean::min(), &maps).is_err());
    }
}
