//! Symbolic non-linearities: polynomials in jet coordinates `Y[t,p]` and
//! formal function atoms `f^(α)(coordinates)`, with the formal derivatives
//! `D_o`, the polynomial-lift derivatives `∂^k`, the pre-Lie products, and
//! the obey check against a rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::Zero;

use crate::algebra::{parse_q, q_one, Atom, MultiIndex, PolyQ, Q};
use crate::error::ParseError;
use crate::rules::Rule;
use crate::trees::{EdgeKind, EdgeType};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Factor {
    /// Evaluation of one jet coordinate.
    Coord(EdgeType),
    /// A formal smooth function of fixed coordinate arguments, carrying the
    /// multi-index of derivatives taken so far (one slot per argument).
    Fn {
        name: String,
        args: Vec<EdgeType>,
        order: Vec<u32>,
    },
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Coord(e) => {
                let name = match e.kind {
                    EdgeKind::Kernel => "I",
                    EdgeKind::Noise => "Xi",
                };
                if e.deriv.is_zero() {
                    write!(f, "Y[{name}]")
                } else {
                    write!(f, "Y[{name},{}]", e.deriv)
                }
            }
            Factor::Fn { name, args, order } => {
                if order.iter().all(|&o| o == 0) {
                    write!(f, "{name}(")?;
                } else if order.len() == 1 {
                    write!(f, "{name}^({})(", order[0])?;
                } else {
                    let parts: Vec<String> = order.iter().map(|o| o.to_string()).collect();
                    write!(f, "{name}^({})(", parts.join(","))?;
                }
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", Factor::Coord(a.clone()))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A sorted monomial of factors with exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NTerm(Vec<(Factor, u32)>);

impl NTerm {
    pub fn one() -> Self {
        NTerm(Vec::new())
    }

    pub fn factor(f: Factor) -> Self {
        NTerm(vec![(f, 1)])
    }

    pub fn mul(&self, other: &NTerm) -> NTerm {
        let mut map: BTreeMap<&Factor, u32> = BTreeMap::new();
        for (f, e) in self.0.iter().chain(&other.0) {
            *map.entry(f).or_insert(0) += e;
        }
        NTerm(map.into_iter().map(|(f, e)| (f.clone(), e)).collect())
    }

    pub fn factors(&self) -> &[(Factor, u32)] {
        &self.0
    }
}

impl fmt::Display for NTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (fac, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{fac}")?;
            } else {
                write!(f, "{fac}^{e}")?;
            }
        }
        Ok(())
    }
}

/// A non-linearity: a finite ℚ-linear combination of monomials in the
/// coordinates and formal function atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NonlinExpr(BTreeMap<NTerm, Q>);

impl NonlinExpr {
    pub fn zero() -> Self {
        NonlinExpr(BTreeMap::new())
    }

    pub fn constant(c: Q) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(NTerm::one(), c);
        }
        NonlinExpr(m)
    }

    pub fn one() -> Self {
        NonlinExpr::constant(q_one())
    }

    pub fn coord(e: EdgeType) -> Self {
        NonlinExpr::from_term(NTerm::factor(Factor::Coord(e)), q_one())
    }

    pub fn from_term(t: NTerm, c: Q) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert(t, c);
        }
        NonlinExpr(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&NTerm, &Q)> {
        self.0.iter()
    }

    pub fn add_term(&mut self, t: NTerm, c: Q) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.0.entry(t) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &NonlinExpr) -> NonlinExpr {
        let mut out = self.clone();
        for (t, c) in &other.0 {
            out.add_term(t.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> NonlinExpr {
        NonlinExpr(self.0.iter().map(|(t, c)| (t.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &NonlinExpr) -> NonlinExpr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &NonlinExpr) -> NonlinExpr {
        let mut out = NonlinExpr::zero();
        for (t1, c1) in &self.0 {
            for (t2, c2) in &other.0 {
                out.add_term(t1.mul(t2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, c: &Q) -> NonlinExpr {
        if c.is_zero() {
            return NonlinExpr::zero();
        }
        NonlinExpr(self.0.iter().map(|(t, x)| (t.clone(), x * c)).collect())
    }

    /// The coordinates this expression depends on, including formal
    /// function arguments.
    pub fn coord_support(&self) -> BTreeSet<EdgeType> {
        let mut out = BTreeSet::new();
        for t in self.0.keys() {
            for (f, _) in t.factors() {
                match f {
                    Factor::Coord(e) => {
                        out.insert(e.clone());
                    }
                    Factor::Fn { args, .. } => out.extend(args.iter().cloned()),
                }
            }
        }
        out
    }

    /// Formal partial derivative with respect to one coordinate: power rule
    /// on coordinate factors, chain rule raising the derivative order of
    /// formal functions when the coordinate matches an argument.
    pub fn d(&self, o: &EdgeType) -> NonlinExpr {
        let mut out = NonlinExpr::zero();
        for (term, coeff) in &self.0 {
            for (i, (factor, exp)) in term.factors().iter().enumerate() {
                let others = |new: Option<(Factor, u32)>| -> NTerm {
                    let mut acc = NTerm::one();
                    for (j, (f, e)) in term.factors().iter().enumerate() {
                        let (f, e) = if j == i {
                            match &new {
                                Some((nf, ne)) => (nf.clone(), *ne),
                                None => continue,
                            }
                        } else {
                            (f.clone(), *e)
                        };
                        if e > 0 {
                            acc = acc.mul(&NTerm(vec![(f, e)]));
                        }
                    }
                    acc
                };
                match factor {
                    Factor::Coord(e) if e == o => {
                        let mut rest = others(Some((factor.clone(), exp - 1)));
                        if exp - 1 == 0 {
                            rest = others(None);
                        }
                        out.add_term(rest, coeff * crate::algebra::qi(*exp as i64));
                    }
                    Factor::Coord(_) => {}
                    Factor::Fn { name, args, order } => {
                        for (ai, arg) in args.iter().enumerate() {
                            if arg == o {
                                let mut raised = order.clone();
                                raised[ai] += 1;
                                let nf = Factor::Fn {
                                    name: name.clone(),
                                    args: args.clone(),
                                    order: raised,
                                };
                                // f^e ↦ e f^{e−1} f' — the derivative factor
                                // joins the monomial.
                                let mut rest = others(Some((factor.clone(), exp - 1)));
                                if exp - 1 == 0 {
                                    rest = others(None);
                                }
                                let rest = rest.mul(&NTerm::factor(nf));
                                out.add_term(rest, coeff * crate::algebra::qi(*exp as i64));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `∂^{e_i} F = Σ_p Y[I, p+e_i] · D_{(I,p)} F`, the lift of the spatial
    /// derivative; the sum runs over the kernel coordinates F depends on.
    pub fn partial_dir(&self, i: usize, dim: usize) -> NonlinExpr {
        let mut out = NonlinExpr::zero();
        for p in self
            .coord_support()
            .into_iter()
            .filter(|e| e.kind == EdgeKind::Kernel)
        {
            let d = self.d(&p);
            if d.is_zero() {
                continue;
            }
            let raised = EdgeType::kernel(p.deriv.add(&MultiIndex::unit(dim, i)));
            out = out.add(&NonlinExpr::coord(raised).mul(&d));
        }
        out
    }

    /// `∂^k` by composition over the directions.
    pub fn partial(&self, k: &MultiIndex) -> NonlinExpr {
        let mut acc = self.clone();
        for (i, &c) in k.entries().iter().enumerate() {
            for _ in 0..c {
                acc = acc.partial_dir(i, k.dim());
            }
        }
        acc
    }

    /// Evaluation at the jet origin: kernel coordinates become `u_p` atoms,
    /// noise coordinates vanish, formal functions become opaque derivative
    /// atoms.
    pub fn eval_origin(&self) -> PolyQ {
        let mut out = PolyQ::zero();
        'terms: for (term, coeff) in &self.0 {
            let mut mono = crate::algebra::poly::Monomial::one();
            for (f, e) in term.factors() {
                let atom = match f {
                    Factor::Coord(et) => match et.kind {
                        EdgeKind::Noise => continue 'terms,
                        EdgeKind::Kernel => Atom::Coeff(et.deriv.clone()),
                    },
                    Factor::Fn { name, order, .. } => Atom::Deriv {
                        name: name.clone(),
                        order: order.clone(),
                    },
                };
                for _ in 0..*e {
                    mono = mono.mul(&crate::algebra::poly::Monomial::atom(atom.clone()));
                }
            }
            out.add_term(mono, coeff.clone());
        }
        out
    }
}

/// Pre-Lie product `F ◁_p G = F · D_{(I,p)} G`.
pub fn prelie(f: &NonlinExpr, g: &NonlinExpr, p: &MultiIndex) -> NonlinExpr {
    f.mul(&g.d(&EdgeType::kernel(p.clone())))
}

/// Does every derivative combination outside the rule vanish? Checks all
/// coordinate multisets up to `max_order` over the support; true is
/// conservative in the stated sense (vanishing verified up to that order).
pub fn obeys(f: &NonlinExpr, rule: &Rule, max_order: usize) -> bool {
    let support: Vec<EdgeType> = f.coord_support().into_iter().collect();
    let mut stack: Vec<(Vec<EdgeType>, NonlinExpr, usize)> =
        vec![(Vec::new(), f.clone(), 0)];
    while let Some((multiset, expr, start)) = stack.pop() {
        if !multiset.is_empty() && !expr.is_zero() && !rule.contains(&multiset) {
            return false;
        }
        if multiset.len() == max_order || expr.is_zero() {
            continue;
        }
        for (i, o) in support.iter().enumerate().skip(start) {
            let mut m = multiset.clone();
            m.push(o.clone());
            m.sort();
            stack.push((m, expr.d(o), i));
        }
    }
    true
}

impl fmt::Display for NonlinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, (t, c)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if t == &NTerm::one() {
                write!(f, "{}", crate::algebra::format_q(c))?;
            } else if c == &q_one() {
                write!(f, "{t}")?;
            } else {
                write!(f, "{}*{t}", crate::algebra::format_q(c))?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    dim: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(msg, self.pos)
    }

    fn index(&mut self) -> Result<MultiIndex, ParseError> {
        if !self.eat("(") {
            return Err(self.err("expected `(`"));
        }
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.rest().starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected an integer"));
            }
            entries.push(self.src[start..self.pos].parse().unwrap());
            if self.eat(",") {
                continue;
            }
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            break;
        }
        if entries.len() != self.dim {
            return Err(self.err(format!(
                "multi-index of length {} in dimension {}",
                entries.len(),
                self.dim
            )));
        }
        Ok(MultiIndex::new(entries))
    }

    fn coordinate(&mut self) -> Result<EdgeType, ParseError> {
        if !self.eat("Y[") {
            return Err(self.err("expected a coordinate `Y[...]`"));
        }
        let kind = if self.eat("Xi") {
            EdgeKind::Noise
        } else if self.eat("I") {
            EdgeKind::Kernel
        } else {
            return Err(self.err("expected `I` or `Xi`"));
        };
        let deriv = if self.eat(",") {
            self.index()?
        } else {
            MultiIndex::zero(self.dim)
        };
        if !self.eat("]") {
            return Err(self.err("expected `]`"));
        }
        Ok(EdgeType { kind, deriv })
    }

    fn number(&mut self) -> Result<Q, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_digit() || c == '/')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        parse_q(&self.src[start..self.pos]).map_err(|e| ParseError::new(e.message, start))
    }

    fn atom(&mut self) -> Result<NonlinExpr, ParseError> {
        self.skip_ws();
        if self.eat("(") {
            let e = self.expr()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(e);
        }
        if self.rest().starts_with("Y[") {
            return Ok(NonlinExpr::coord(self.coordinate()?));
        }
        if self.rest().starts_with(|c: char| c.is_ascii_digit()) {
            return Ok(NonlinExpr::constant(self.number()?));
        }
        // Formal function call: ident '(' coordinate, ... ')'.
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a factor"));
        }
        let name = self.src[start..self.pos].to_string();
        if !self.eat("(") {
            return Err(self.err("expected `(` after function name"));
        }
        let mut args = vec![self.coordinate()?];
        while self.eat(",") {
            args.push(self.coordinate()?);
        }
        if !self.eat(")") {
            return Err(self.err("expected `)`"));
        }
        let order = vec![0; args.len()];
        Ok(NonlinExpr::from_term(
            NTerm::factor(Factor::Fn { name, args, order }),
            q_one(),
        ))
    }

    fn power(&mut self) -> Result<NonlinExpr, ParseError> {
        let base = self.atom()?;
        if self.eat("^") {
            self.skip_ws();
            let start = self.pos;
            while self.rest().starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected an exponent"));
            }
            let e: u32 = self.src[start..self.pos].parse().unwrap();
            let mut acc = NonlinExpr::one();
            for _ in 0..e {
                acc = acc.mul(&base);
            }
            return Ok(acc);
        }
        Ok(base)
    }

    fn term(&mut self) -> Result<NonlinExpr, ParseError> {
        let mut acc = self.power()?;
        while self.eat("*") {
            acc = acc.mul(&self.power()?);
        }
        Ok(acc)
    }

    fn expr(&mut self) -> Result<NonlinExpr, ParseError> {
        let mut acc = if self.eat("-") {
            self.term()?.neg()
        } else {
            self.term()?
        };
        loop {
            if self.eat("+") {
                acc = acc.add(&self.term()?);
            } else if self.eat("-") {
                acc = acc.sub(&self.term()?);
            } else {
                break;
            }
        }
        Ok(acc)
    }
}

/// Parses a non-linearity in dimension `dim`.
pub fn parse_nonlin(src: &str, dim: usize) -> Result<NonlinExpr, ParseError> {
    let mut c = Cursor { src, pos: 0, dim };
    c.skip_ws();
    if c.rest() == "0" {
        return Ok(NonlinExpr::zero());
    }
    let e = c.expr()?;
    c.skip_ws();
    if c.pos != c.src.len() {
        return Err(c.err("trailing input after expression"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::qi;
    use crate::rules::{RuleClause, Slot};

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    fn phi4() -> NonlinExpr {
        parse_nonlin("Y[I]^3 + Y[Xi]", 4).unwrap()
    }

    fn coord_i(dim: usize) -> EdgeType {
        EdgeType::kernel(MultiIndex::zero(dim))
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_nonlin("0", 4).unwrap(), NonlinExpr::zero());
        let g = parse_nonlin(
            "f(Y[I]) + g(Y[I])*Y[I,(1,0)]^2 + h(Y[I])*Y[I,(1,0)] + k(Y[I])*Y[Xi]",
            2,
        )
        .unwrap();
        assert_eq!(g.terms().count(), 4);
        assert!(parse_nonlin("Y[I", 4).is_err());
    }

    #[test]
    fn derivatives() {
        let f = phi4();
        // D_Ξ F = 1.
        let d = f.d(&EdgeType::noise(mi(&[0; 4])));
        assert_eq!(d, NonlinExpr::one());
        // D_I² F = 6 Y[I].
        let d2 = f.d(&coord_i(4)).d(&coord_i(4));
        assert_eq!(d2, NonlinExpr::coord(coord_i(4)).scale(&qi(6)));
        // Chain rule: D_I f(Y[I]) = f^(1)(Y[I]).
        let g = parse_nonlin("f(Y[I])", 4).unwrap();
        let dg = g.d(&coord_i(4));
        assert_eq!(dg.terms().count(), 1);
        let (t, c) = dg.terms().next().unwrap();
        assert_eq!(c, &qi(1));
        match &t.factors()[0].0 {
            Factor::Fn { order, .. } => assert_eq!(order, &vec![1]),
            _ => panic!("expected a function factor"),
        }
    }

    #[test]
    fn partial_lift() {
        // ∂^{e_1}(Y[I]³) = 3 Y[I]² Y[I,(1,0,0,0)].
        let f = parse_nonlin("Y[I]^3", 4).unwrap();
        let p = f.partial_dir(0, 4);
        let expected = parse_nonlin("3*Y[I]^2*Y[I,(1,0,0,0)]", 4).unwrap();
        assert_eq!(p, expected);
        // No kernel dependence: ∂ of Y[Xi] vanishes.
        let noise = parse_nonlin("Y[Xi]", 4).unwrap();
        assert!(noise.partial_dir(0, 4).is_zero());
        // Commutativity on a mixed expression.
        let g = parse_nonlin("f(Y[I])*Y[I,(1,0)]^2", 2).unwrap();
        let a = g.partial_dir(0, 2).partial_dir(1, 2);
        let b = g.partial_dir(1, 2).partial_dir(0, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn prelie_identity_instances() {
        let f = parse_nonlin("Y[I]^2", 4).unwrap();
        let g = parse_nonlin("Y[I]^3 + Y[Xi]", 4).unwrap();
        let h = parse_nonlin("f(Y[I])", 4).unwrap();
        let p = mi(&[0; 4]);
        let q = mi(&[0; 4]);
        // 1 ◁_0 Y[I]³ = 3 Y[I]².
        assert_eq!(
            prelie(&NonlinExpr::one(), &g, &p),
            parse_nonlin("3*Y[I]^2", 4).unwrap()
        );
        // F ◁_p const = 0.
        assert!(prelie(&f, &NonlinExpr::constant(qi(5)), &p).is_zero());
        // Associator symmetry.
        let lhs = prelie(&f, &prelie(&g, &h, &q), &p).sub(&prelie(&prelie(&f, &g, &p), &h, &q));
        let rhs = prelie(&g, &prelie(&f, &h, &p), &q).sub(&prelie(&prelie(&g, &f, &q), &h, &p));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn obey_checks() {
        let phi4_rule = Rule::new(vec![
            RuleClause::new(vec![Slot {
                edge: EdgeType::kernel(mi(&[0; 4])),
                max: Some(3),
            }])
            .unwrap(),
            RuleClause::new(vec![Slot {
                edge: EdgeType::noise(mi(&[0; 4])),
                max: Some(1),
            }])
            .unwrap(),
        ]);
        assert!(obeys(&phi4(), &phi4_rule, 5));
        // Y[Xi]² fails: D_Ξ² ≠ 0 but {Ξ,Ξ} is not allowed.
        let bad = parse_nonlin("Y[Xi]^2", 4).unwrap();
        assert!(!obeys(&bad, &phi4_rule, 5));
    }

    #[test]
    fn origin_evaluation() {
        let f = parse_nonlin("Y[I]^3 + Y[Xi] + 2*f(Y[I])", 4).unwrap();
        let v = f.eval_origin();
        // Y[Xi] vanishes; Y[I]³ becomes u(0,0,0,0)³; f becomes an atom.
        assert_eq!(v.terms().count(), 2);
    }
}
