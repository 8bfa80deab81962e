//! Binding constraints for lifted planning: a union-find over plan
//! variables tracking codesignation classes, bound constants, excluded
//! constants, and pairwise non-codesignation.

use crate::ground::GroundStore;
use crate::pddl::{ObjId, Term, TypeId, VarId};
use std::collections::BTreeSet;

#[derive(Clone, Debug, PartialEq, Eq)]
struct ClassInfo {
    ty: TypeId,
    bound: Option<ObjId>,
    excluded: BTreeSet<ObjId>,
    /// Roots of classes this class must never codesignate with.
    distinct: BTreeSet<u32>,
}

/// A consistent set of binding constraints. Refinements clone the set and
/// apply one constraint; failed constraints return None and leave the
/// original untouched.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BindingSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    info: Vec<ClassInfo>,
}

impl BindingSet {
    pub fn new() -> BindingSet {
        BindingSet::default()
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Allocates a fresh plan variable of the given type.
    pub fn alloc(&mut self, ty: TypeId) -> VarId {
        let v = self.parent.len() as u32;
        self.parent.push(v);
        self.size.push(1);
        self.info.push(ClassInfo {
            ty,
            bound: None,
            excluded: BTreeSet::new(),
            distinct: BTreeSet::new(),
        });
        v
    }

    pub fn find(&self, v: VarId) -> u32 {
        let mut r = v;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        r
    }

    /// Replaces a variable by its bound constant when one is known.
    pub fn resolve(&self, t: Term) -> Term {
        match t {
            Term::Obj(o) => Term::Obj(o),
            Term::Var(v) => match self.info[self.find(v) as usize].bound {
                Some(o) => Term::Obj(o),
                None => Term::Var(v),
            },
        }
    }

    pub fn class_type(&self, v: VarId) -> TypeId {
        self.info[self.find(v) as usize].ty
    }

    /// The constants a variable may still take.
    pub fn possible_values(&self, v: VarId, store: &GroundStore) -> Vec<ObjId> {
        let root = self.find(v) as usize;
        let info = &self.info[root];
        if let Some(o) = info.bound {
            return vec![o];
        }
        store
            .objects_of(info.ty)
            .iter()
            .copied()
            .filter(|o| !info.excluded.contains(o))
            .collect()
    }

    pub fn is_excluded(&self, v: VarId, o: ObjId) -> bool {
        self.info[self.find(v) as usize].excluded.contains(&o)
    }

    fn intersect_types(store: &GroundStore, a: TypeId, b: TypeId) -> Option<TypeId> {
        if store.domain.is_subtype(a, b) {
            Some(a)
        } else if store.domain.is_subtype(b, a) {
            Some(b)
        } else {
            None
        }
    }

    fn obj_fits(&self, store: &GroundStore, o: ObjId, ty: TypeId) -> bool {
        store.domain.is_subtype(store.problem.object_type(&store.domain, o), ty)
    }

    fn bind_root(&mut self, store: &GroundStore, root: u32, o: ObjId) -> bool {
        let info = &self.info[root as usize];
        match info.bound {
            Some(b) => return b == o,
            None => {
                if info.excluded.contains(&o) || !self.obj_fits(store, o, info.ty) {
                    return false;
                }
            }
        }
        self.info[root as usize].bound = Some(o);
        let distinct: Vec<u32> = self.info[root as usize].distinct.iter().copied().collect();
        for d in distinct {
            match self.info[d as usize].bound {
                Some(b) if b == o => return false,
                Some(_) => {}
                None => {
                    self.info[d as usize].excluded.insert(o);
                }
            }
        }
        true
    }

    fn union_roots(&mut self, store: &GroundStore, a: u32, b: u32) -> bool {
        if a == b {
            return true;
        }
        if self.info[a as usize].distinct.contains(&b) {
            return false;
        }
        let (keep, gone) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        let ty = match Self::intersect_types(store, self.info[keep as usize].ty, self.info[gone as usize].ty) {
            Some(t) => t,
            None => return false,
        };
        let gone_info = self.info[gone as usize].clone();
        {
            let keep_info = &mut self.info[keep as usize];
            keep_info.ty = ty;
            match (keep_info.bound, gone_info.bound) {
                (Some(x), Some(y)) if x != y => return false,
                (None, Some(y)) => keep_info.bound = Some(y),
                _ => {}
            }
            keep_info.excluded.extend(gone_info.excluded.iter().copied());
            if let Some(b) = keep_info.bound {
                if keep_info.excluded.contains(&b) {
                    return false;
                }
            }
        }
        for d in gone_info.distinct {
            self.info[d as usize].distinct.remove(&gone);
            self.info[d as usize].distinct.insert(keep);
            self.info[keep as usize].distinct.insert(d);
        }
        self.parent[gone as usize] = keep;
        self.size[keep as usize] += self.size[gone as usize];
        if let Some(b) = self.info[keep as usize].bound {
            // Re-run constant propagation against the merged distinct set.
            let distinct: Vec<u32> = self.info[keep as usize].distinct.iter().copied().collect();
            for d in distinct {
                match self.info[d as usize].bound {
                    Some(x) if x == b => return false,
                    Some(_) => {}
                    None => {
                        self.info[d as usize].excluded.insert(b);
                    }
                }
            }
        }
        true
    }

    /// Adds the codesignation constraint `a = b`, returning the refined set
    /// or None when inconsistent.
    pub fn unify(&self, store: &GroundStore, a: Term, b: Term) -> Option<BindingSet> {
        match (a, b) {
            (Term::Obj(x), Term::Obj(y)) => {
                if x == y {
                    Some(self.clone())
                } else {
                    None
                }
            }
            (Term::Var(v), Term::Obj(o)) | (Term::Obj(o), Term::Var(v)) => {
                let mut next = self.clone();
                let root = next.find(v);
                if next.bind_root(store, root, o) {
                    Some(next)
                } else {
                    None
                }
            }
            (Term::Var(v), Term::Var(w)) => {
                let mut next = self.clone();
                let (ra, rb) = (next.find(v), next.find(w));
                if next.union_roots(store, ra, rb) {
                    Some(next)
                } else {
                    None
                }
            }
        }
    }

    /// Adds the non-codesignation constraint `a != b`.
    pub fn separate(&self, store: &GroundStore, a: Term, b: Term) -> Option<BindingSet> {
        let _ = store;
        match (a, b) {
            (Term::Obj(x), Term::Obj(y)) => {
                if x != y {
                    Some(self.clone())
                } else {
                    None
                }
            }
            (Term::Var(v), Term::Obj(o)) | (Term::Obj(o), Term::Var(v)) => {
                let root = self.find(v);
                match self.info[root as usize].bound {
                    Some(b) => {
                        if b != o {
                            Some(self.clone())
                        } else {
                            None
                        }
                    }
                    None => {
                        let mut next = self.clone();
                        next.info[root as usize].excluded.insert(o);
                        Some(next)
                    }
                }
            }
            (Term::Var(v), Term::Var(w)) => {
                let (ra, rb) = (self.find(v), self.find(w));
                if ra == rb {
                    return None;
                }
                if let (Some(x), Some(y)) =
                    (self.info[ra as usize].bound, self.info[rb as usize].bound)
                {
                    return if x != y { Some(self.clone()) } else { None };
                }
                let mut next = self.clone();
                next.info[ra as usize].distinct.insert(rb);
                next.info[rb as usize].distinct.insert(ra);
                if let Some(x) = next.info[ra as usize].bound {
                    next.info[rb as usize].excluded.insert(x);
                }
                if let Some(y) = next.info[rb as usize].bound {
                    next.info[ra as usize].excluded.insert(y);
                }
                Some(next)
            }
        }
    }

    pub fn can_unify(&self, store: &GroundStore, a: Term, b: Term) -> bool {
        self.unify(store, a, b).is_some()
    }

    /// Unifies two argument lists pairwise; lists must have equal length.
    pub fn unify_all(&self, store: &GroundStore, xs: &[Term], ys: &[Term]) -> Option<BindingSet> {
        debug_assert_eq!(xs.len(), ys.len());
        let mut cur = self.clone();
        for (&x, &y) in xs.iter().zip(ys) {
            cur = cur.unify(store, x, y)?;
        }
        Some(cur)
    }

    pub fn approx_bytes(&self) -> usize {
        let mut n = self.parent.len() * 8;
        for info in &self.info {
            n += 24 + (info.excluded.len() + info.distinct.len()) * 8;
        }
        n
    }
}
