//! Verification of user-supplied pp-interpretations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::pp::{evaluate_pp, PPFormula};
use crate::error::{Error, Result};
use crate::structures::{Elem, RelStructure};

/// A partial surjection `f: A^n → B` with pp-definitions of its domain,
/// its kernel and the preimages of the relations of `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PpInterpretation {
    pub dimension: usize,
    pub domain: PPFormula,
    pub kernel: PPFormula,
    /// One formula per relation of `B`, in signature order.
    pub relations: Vec<(String, PPFormula)>,
    pub map: Vec<(Vec<Elem>, Elem)>,
}

/// Checks that `interp` is a pp-interpretation of `b` in `a`: every
/// formula defines exactly the required preimage.
pub fn check_pp_interpretation(a: &RelStructure, b: &RelStructure, interp: &PpInterpretation) -> Result<bool> {
    let n = interp.dimension;
    if n == 0 {
        return Err(Error::invalid("interpretation dimension must be positive"));
    }
    if interp.domain.free_vars != n || interp.kernel.free_vars != 2 * n {
        return Err(Error::invalid("domain or kernel formula has the wrong number of free variables"));
    }
    let mut f: HashMap<&[Elem], Elem> = HashMap::new();
    let mut preimages: Vec<u64> = vec![0; b.size()];
    for (t, y) in &interp.map {
        if t.len() != n || t.iter().any(|&x| x as usize >= a.size()) || *y as usize >= b.size() {
            return Err(Error::invalid("interpretation map entry out of range"));
        }
        if f.insert(t.as_slice(), *y).is_some() {
            return Err(Error::Duplicate {
                what: "interpretation map entry",
                detail: format!("{t:?}"),
            });
        }
        preimages[*y as usize] += 1;
    }
    if preimages.contains(&0) {
        return Ok(false);
    }
    let domain = evaluate_pp(a, &interp.domain)?;
    if domain.len() != f.len() || !domain.iter().all(|t| f.contains_key(t)) {
        return Ok(false);
    }
    let kernel = evaluate_pp(a, &interp.kernel)?;
    let kernel_size: u64 = preimages.iter().map(|p| p * p).sum();
    let kernel_ok = kernel.len() as u64 == kernel_size
        && kernel.iter().all(|t| match (f.get(&t[..n]), f.get(&t[n..])) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        });
    if !kernel_ok {
        return Ok(false);
    }
    if interp.relations.len() != b.signature().len() {
        return Ok(false);
    }
    for ((name, phi), (bname, rel)) in interp.relations.iter().zip(b.iter()) {
        if name != bname || phi.free_vars != rel.arity() * n {
            return Ok(false);
        }
        let defined = evaluate_pp(a, phi)?;
        let expected: u64 = rel
            .iter()
            .map(|t| t.iter().map(|&y| preimages[y as usize]).product::<u64>())
            .sum();
        let all_inside = defined.iter().all(|t| {
            let image: Option<Vec<Elem>> = t.chunks_exact(n).map(|c| f.get(c).copied()).collect();
            image.is_some_and(|img| rel.contains(&img))
        });
        if defined.len() as u64 != expected || !all_inside {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::parse_pp_formula;
    use crate::fixtures;

    fn phi(text: &str) -> PPFormula {
        parse_pp_formula(text).unwrap().1
    }

    #[test]
    fn identity_interpretation() {
        let a = fixtures::boolean_order();
        let interp = PpInterpretation {
            dimension: 1,
            domain: phi("d(x) := true;"),
            kernel: phi("k(x,y) := x = y;"),
            relations: vec![("le".into(), phi("le(x,y) := le(x,y);"))],
            map: vec![(vec![0], 0), (vec![1], 1)],
        };
        assert!(check_pp_interpretation(&a, &a, &interp).unwrap());
        let mut wrong = interp.clone();
        wrong.relations[0].1 = phi("le(x,y) := le(y,x);");
        assert!(!check_pp_interpretation(&a, &a, &wrong).unwrap());
    }

    #[test]
    fn kernel_must_match() {
        // Collapsing Z_2^2 onto its first coordinate has an 8-pair kernel.
        let a = fixtures::hepp_a();
        let b = RelStructure::new(2, Vec::<(&str, crate::Relation)>::new()).unwrap();
        let mut q = PpInterpretation {
            dimension: 1,
            domain: phi("d(x) := true;"),
            kernel: phi("k(x,y) := x = y;"),
            relations: vec![],
            map: (0..4).map(|x| (vec![x], x >> 1)).collect(),
        };
        assert!(!check_pp_interpretation(&a, &b, &q).unwrap());
        q.kernel = phi("k(x,y) := true;");
        assert!(!check_pp_interpretation(&a, &b, &q).unwrap());
        q.map = (0..4).map(|x| (vec![x], 0)).collect();
        let one = RelStructure::new(1, Vec::<(&str, crate::Relation)>::new()).unwrap();
        assert!(check_pp_interpretation(&a, &one, &q).unwrap());
    }
}
