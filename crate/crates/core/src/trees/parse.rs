//! Text syntax for trees:
//!
//! ```text
//! tree   := factor ('*' factor)*
//! factor := '1'
//!         | 'E^{' degree '}'
//!         | 'X^' index
//!         | 'Xi' ('_' index)?
//!         | 'I' ('_' index)? '[' tree ']'
//!         | 'J_' index '[X^' index ']'          (enlarged space only)
//! index  := '(' int (',' int)* ')'
//! ```
//!
//! Printing is canonical, so `parse(print(t)) == t`.

use std::fmt;

use crate::algebra::{Degree, MultiIndex};
use crate::error::ParseError;

use super::btree::BTree;
use super::tree::{EdgeKind, Tree};

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), ParseError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(ParseError::new(format!("expected `{token}`"), self.pos))
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(msg, self.pos)
    }

    fn index(&mut self, dim: usize) -> Result<MultiIndex, ParseError> {
        self.expect("(")?;
        let mut entries = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            while self.rest().starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a non-negative integer"));
            }
            let v: u32 = self.src[start..self.pos]
                .parse()
                .map_err(|_| self.err("integer out of range"))?;
            entries.push(v);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            break;
        }
        if entries.len() != dim {
            return Err(self.err(format!(
                "multi-index of length {} in dimension {dim}",
                entries.len()
            )));
        }
        Ok(MultiIndex::new(entries))
    }

    fn degree(&mut self) -> Result<Degree, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self
            .rest()
            .starts_with(|c: char| c.is_ascii_digit() || "+-/k".contains(c))
        {
            self.pos += 1;
        }
        self.src[start..self.pos]
            .parse::<Degree>()
            .map_err(|e| ParseError::new(e.message, start + e.position))
    }
}

fn parse_factor(c: &mut Cursor, dim: usize) -> Result<Tree, ParseError> {
    c.skip_ws();
    if c.eat("1") {
        return Ok(Tree::unit(dim));
    }
    if c.eat("E^{") {
        let d = c.degree()?;
        c.expect("}")?;
        return Ok(Tree::ext_unit(dim, d));
    }
    if c.eat("X^") {
        let k = c.index(dim)?;
        return Ok(Tree::poly_tree(k));
    }
    if c.eat("Xi") {
        let l = if c.eat("_") {
            c.index(dim)?
        } else {
            MultiIndex::zero(dim)
        };
        return Ok(Tree::noise(l));
    }
    if c.eat("I") {
        let m = if c.eat("_") {
            c.index(dim)?
        } else {
            MultiIndex::zero(dim)
        };
        c.expect("[")?;
        let inner = parse_product(c, dim)?;
        c.expect("]")?;
        return Ok(Tree::kernel(m, inner));
    }
    Err(c.err("expected a tree factor"))
}

fn parse_product(c: &mut Cursor, dim: usize) -> Result<Tree, ParseError> {
    let mut acc = parse_factor(c, dim)?;
    while c.eat("*") {
        acc = acc.product(&parse_factor(c, dim)?);
    }
    Ok(acc)
}

/// Parses a tree literal in dimension `dim`.
pub fn parse_tree(src: &str, dim: usize) -> Result<Tree, ParseError> {
    let mut c = Cursor::new(src);
    let t = parse_product(&mut c, dim)?;
    c.skip_ws();
    if c.pos != c.src.len() {
        return Err(c.err("trailing input after tree literal"));
    }
    Ok(t)
}

fn parse_bfactor(c: &mut Cursor, dim: usize) -> Result<BTree, ParseError> {
    c.skip_ws();
    if c.eat("J_") {
        let s = c.index(dim)?;
        c.expect("[")?;
        c.expect("X^")?;
        let t = c.index(dim)?;
        c.expect("]")?;
        if !s.leq(&t) || s == t {
            return Err(c.err("slot decoration requires s ≤ t and s ≠ t"));
        }
        return Ok(BTree::jdeco(s, t));
    }
    if c.eat("1") {
        return Ok(BTree::unit(dim));
    }
    if c.eat("E^{") {
        let d = c.degree()?;
        c.expect("}")?;
        return Ok(BTree::unit(dim).with_root_ext(d));
    }
    if c.eat("Xi") {
        let l = if c.eat("_") {
            c.index(dim)?
        } else {
            MultiIndex::zero(dim)
        };
        return Ok(BTree::noise(l));
    }
    if c.eat("I") {
        let m = if c.eat("_") {
            c.index(dim)?
        } else {
            MultiIndex::zero(dim)
        };
        c.expect("[")?;
        let inner = parse_bproduct(c, dim)?;
        c.expect("]")?;
        return Ok(BTree::kernel(m, inner));
    }
    Err(c.err("expected an enlarged-space tree factor"))
}

fn parse_bproduct(c: &mut Cursor, dim: usize) -> Result<BTree, ParseError> {
    let mut acc = parse_bfactor(c, dim)?;
    while c.eat("*") {
        acc = acc.product(&parse_bfactor(c, dim)?);
    }
    Ok(acc)
}

/// Parses an enlarged-space tree literal (accepts `J_s[X^t]` factors).
pub fn parse_btree(src: &str, dim: usize) -> Result<BTree, ParseError> {
    let mut c = Cursor::new(src);
    let t = parse_bproduct(&mut c, dim)?;
    c.skip_ws();
    if c.pos != c.src.len() {
        return Err(c.err("trailing input after tree literal"));
    }
    Ok(t)
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.ext().is_zero() {
            parts.push(format!("E^{{{}}}", self.ext()));
        }
        if !self.poly().is_zero() {
            parts.push(format!("X^{}", self.poly()));
        }
        for (e, t) in self.children() {
            match e.kind {
                EdgeKind::Noise => parts.push(format!("{e}")),
                EdgeKind::Kernel => {
                    let name = if e.deriv.is_zero() {
                        "I".to_string()
                    } else {
                        format!("I_{}", e.deriv)
                    };
                    parts.push(format!("{name}[{t}]"));
                }
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        // Ψ³ from three planted noises.
        let t = parse_tree("I[Xi]*I[Xi]*I[Xi]", 4).unwrap();
        assert_eq!(t.kernel_edge_count(), 3);
        assert_eq!(t.children().len(), 3);

        let t = parse_tree("E^{-1-2k}*X^(1,0,0,0)", 4).unwrap();
        assert_eq!(t.ext(), &"-1-2k".parse::<Degree>().unwrap());
        assert_eq!(t.poly().entries(), &[1, 0, 0, 0]);
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "I_(0,0,0,1)[X^(0,0,0,2)*Xi]",
            "I[Xi]*I[Xi]*I[Xi]",
            "E^{-1-2k}*X^(1,0,0,0)",
            "X^(0,1,0,0)*Xi_(1,0,0,0)*I[1]",
            "1",
        ] {
            let t = parse_tree(s, 4).unwrap();
            let printed = t.to_string();
            assert_eq!(parse_tree(&printed, 4).unwrap(), t, "printing {s}");
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_tree("I[Xi", 4).unwrap_err();
        assert!(err.position > 0);
        assert!(parse_tree("X^(1,0)", 4).is_err()); // dimension mismatch
        assert!(parse_tree("I[Xi]]", 4).is_err()); // trailing input
    }

    #[test]
    fn btree_round_trip() {
        let s = "J_(1,0)[X^(2,0)]*I[J_(0,0)[X^(0,1)]*Xi]";
        let b = parse_btree(s, 2).unwrap();
        assert_eq!(parse_btree(&b.to_string(), 2).unwrap(), b);
        assert!(parse_btree("J_(1,0)[X^(1,0)]", 2).is_err()); // s = t
    }
}
