//! A spec bundled with lazily built bases, conformance profiles, and memo
//! tables for the coproducts. All state is behind locks, so a context can be
//! shared freely across threads.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::algebra::{Degree, LinComb, Q};
use crate::coproducts::{self, CutTerm, Structure};
use crate::error::{Error, Result};
use crate::rules::{
    enumerate_circ, filter_minus, strongly_conforms, EquationSpec, Flavor, RootProfiles,
    SubcriticalReport, TreeBasis,
};
use crate::trees::{DegreeMode, DegreeParams, Forest, Tree};

type DpMemo = RwLock<HashMap<(Tree, u8), Arc<LinComb<(Tree, Tree)>>>>;
type CutMemo = RwLock<HashMap<(Tree, u8), Arc<Vec<CutTerm>>>>;
type TreeMemo = RwLock<HashMap<(Tree, u8), Arc<LinComb<Tree>>>>;
type ForestMemo = RwLock<HashMap<(Tree, u8), Arc<LinComb<Forest>>>>;

pub struct Context {
    spec: EquationSpec,
    params: DegreeParams,
    subcritical: OnceLock<SubcriticalReport>,
    circ: OnceLock<TreeBasis>,
    circ_ex: OnceLock<TreeBasis>,
    minus: OnceLock<TreeBasis>,
    minus_ex: OnceLock<TreeBasis>,
    plus: OnceLock<TreeBasis>,
    plus_ex: OnceLock<TreeBasis>,
    profiles: OnceLock<RootProfiles>,
    pub(crate) dp_memo: DpMemo,
    pub(crate) cut_memo: CutMemo,
    pub(crate) ap_memo: TreeMemo,
    pub(crate) am_memo: ForestMemo,
}

impl Context {
    pub fn new(spec: EquationSpec) -> Context {
        let params = spec.degree_params();
        Context {
            spec,
            params,
            subcritical: OnceLock::new(),
            circ: OnceLock::new(),
            circ_ex: OnceLock::new(),
            minus: OnceLock::new(),
            minus_ex: OnceLock::new(),
            plus: OnceLock::new(),
            plus_ex: OnceLock::new(),
            profiles: OnceLock::new(),
            dp_memo: RwLock::new(HashMap::new()),
            cut_memo: RwLock::new(HashMap::new()),
            ap_memo: TreeMemo::new(HashMap::new()),
            am_memo: ForestMemo::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &EquationSpec {
        &self.spec
    }

    pub fn params(&self) -> &DegreeParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn degree(&self, t: &Tree, mode: DegreeMode) -> Degree {
        t.degree(&self.params, mode)
    }

    pub fn subcritical(&self) -> &SubcriticalReport {
        self.subcritical
            .get_or_init(|| crate::rules::subcritical_check(&self.spec))
    }

    fn require_subcritical(&self) -> Result<()> {
        if self.subcritical().subcritical {
            Ok(())
        } else {
            Err(Error::NotSubcritical)
        }
    }

    pub fn basis(&self, flavor: Flavor) -> Result<&TreeBasis> {
        match flavor {
            Flavor::Circ => self.circ(),
            Flavor::CircEx => self.circ_ex(),
            Flavor::Minus => self.minus(),
            Flavor::MinusEx => self.minus_ex(),
            Flavor::Plus => self.plus(),
            Flavor::PlusEx => self.plus_ex(),
        }
    }

    pub fn circ(&self) -> Result<&TreeBasis> {
        self.require_subcritical()?;
        if let Some(b) = self.circ.get() {
            return Ok(b);
        }
        let basis = match load_cached_basis(&self.spec, Flavor::Circ) {
            Some(b) => b,
            None => {
                let b = enumerate_circ(&self.spec)?;
                store_cached_basis(&self.spec, &b);
                b
            }
        };
        Ok(self.circ.get_or_init(|| basis))
    }

    /// All contraction images of conforming trees along negative-forest
    /// extractions, within the cutoffs.
    pub fn circ_ex(&self) -> Result<&TreeBasis> {
        if let Some(b) = self.circ_ex.get() {
            return Ok(b);
        }
        let circ = self.circ()?;
        let basis = match load_cached_basis(&self.spec, Flavor::CircEx) {
            Some(b) => b,
            None => {
                let mut trees: Vec<Tree> = Vec::new();
                for t in circ.iter() {
                    for term in coproducts::negative_cuts(self, t, Structure::Reduced)?.iter() {
                        trees.push(term.contracted.clone());
                    }
                }
                let b = TreeBasis::new(Flavor::CircEx, trees);
                store_cached_basis(&self.spec, &b);
                b
            }
        };
        Ok(self.circ_ex.get_or_init(|| basis))
    }

    pub fn minus(&self) -> Result<&TreeBasis> {
        if let Some(b) = self.minus.get() {
            return Ok(b);
        }
        let b = filter_minus(&self.spec, self.circ()?, Flavor::Minus);
        Ok(self.minus.get_or_init(|| b))
    }

    pub fn minus_ex(&self) -> Result<&TreeBasis> {
        if let Some(b) = self.minus_ex.get() {
            return Ok(b);
        }
        let b = filter_minus(&self.spec, self.circ_ex()?, Flavor::MinusEx);
        Ok(self.minus_ex.get_or_init(|| b))
    }

    /// The positive-algebra test basis: the unit, the unit-direction
    /// polynomials, and every right factor the positive coproduct produces
    /// on the conforming basis — exactly the elements recentring ever uses.
    pub fn plus(&self) -> Result<&TreeBasis> {
        if let Some(b) = self.plus.get() {
            return Ok(b);
        }
        let b = self.plus_from_right_factors(Structure::Reduced, Flavor::Plus)?;
        Ok(self.plus.get_or_init(|| b))
    }

    pub fn plus_ex(&self) -> Result<&TreeBasis> {
        if let Some(b) = self.plus_ex.get() {
            return Ok(b);
        }
        let b = self.plus_from_right_factors(Structure::Extended, Flavor::PlusEx)?;
        Ok(self.plus_ex.get_or_init(|| b))
    }

    fn plus_from_right_factors(&self, st: Structure, flavor: Flavor) -> Result<TreeBasis> {
        let inner = match st {
            Structure::Reduced => self.circ()?,
            Structure::Extended => self.circ_ex()?,
        };
        let mut trees: Vec<Tree> = vec![Tree::unit(self.spec.dim)];
        for i in 0..self.spec.dim {
            trees.push(Tree::poly_tree(crate::algebra::MultiIndex::unit(
                self.spec.dim,
                i,
            )));
        }
        for t in inner.iter() {
            let cp = coproducts::delta_plus(self, t, coproducts::PlusDomain::Model, st)?;
            for ((_, r), _) in cp.iter() {
                trees.push(r.clone());
            }
        }
        Ok(TreeBasis::new(flavor, trees))
    }

    /// Root profiles of the extended conforming basis, backing the local
    /// membership test.
    pub fn profiles(&self) -> Result<&RootProfiles> {
        if let Some(p) = self.profiles.get() {
            return Ok(p);
        }
        let p = RootProfiles::from_basis(self.circ_ex()?);
        Ok(self.profiles.get_or_init(|| p))
    }

    /// Strong conformance for reduced trees.
    pub fn conforms(&self, t: &Tree) -> bool {
        strongly_conforms(t, &self.spec.rule)
    }

    /// Extended conformance via the local profile characterization; errors
    /// when the query lies outside the enumerated kernel-edge cutoff.
    pub fn extended_conforms(&self, t: &Tree) -> Result<bool> {
        if t.kernel_edge_count() > self.spec.cutoffs.max_kernel_edges {
            return Err(Error::CutoffExceeded(format!(
                "tree with {} kernel edges queried against a basis enumerated to {}",
                t.kernel_edge_count(),
                self.spec.cutoffs.max_kernel_edges
            )));
        }
        Ok(self.profiles()?.conforms(t))
    }

    /// Conformance in the structure at hand.
    pub fn conforms_in(&self, t: &Tree, st: Structure) -> Result<bool> {
        match st {
            Structure::Reduced => Ok(t.is_reduced() && self.conforms(t)),
            Structure::Extended => self.extended_conforms(t),
        }
    }

    /// Projection onto the conforming span: drops every non-conforming tree.
    pub fn project_conforming(&self, x: &LinComb<Tree>, st: Structure) -> Result<LinComb<Tree>> {
        let mut out = LinComb::new();
        for (t, c) in x.iter() {
            if self.conforms_in(t, st)? {
                out.add_term(t.clone(), c.clone());
            }
        }
        Ok(out)
    }
}

/// τ!-weighted inner product, re-exported here for convenience.
pub fn inner(a: &LinComb<Tree>, b: &LinComb<Tree>) -> Q {
    crate::trees::inner_product(a, b)
}

// ---------------------------------------------------------------------------
// Optional on-disk basis cache (REGCALC_CACHE_DIR)
// ---------------------------------------------------------------------------

const CACHE_VERSION: &str = "regcalc-basis-v1";

fn cache_path(spec: &EquationSpec, flavor: Flavor) -> Option<std::path::PathBuf> {
    let dir = std::env::var_os("REGCALC_CACHE_DIR")?;
    Some(std::path::Path::new(&dir).join(format!("{}-{}.basis", spec.fingerprint(), flavor)))
}

fn load_cached_basis(spec: &EquationSpec, flavor: Flavor) -> Option<TreeBasis> {
    let path = cache_path(spec, flavor)?;
    let data = std::fs::read_to_string(path).ok()?;
    let mut lines = data.lines();
    if lines.next()? != CACHE_VERSION {
        return None;
    }
    let mut trees = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        trees.push(crate::trees::parse_tree(line, spec.dim).ok()?);
    }
    Some(TreeBasis::new(flavor, trees))
}

fn store_cached_basis(spec: &EquationSpec, basis: &TreeBasis) {
    if let Some(path) = cache_path(spec, basis.flavor) {
        let mut out = String::from(CACHE_VERSION);
        out.push('\n');
        for t in basis.iter() {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        if let Some(parent) = path.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        let _ = std::fs::write(path, out);
    }
}
