//! Expression trees over `{+, -, *, sin, cos}`, stored in postfix order.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(u16),
    Add,
    Sub,
    Mul,
    Sin,
    Cos,
}

impl Node {
    #[inline]
    pub fn arity(self) -> usize {
        match self {
            Node::Const(_) | Node::Var(_) => 0,
            Node::Sin | Node::Cos => 1,
            Node::Add | Node::Sub | Node::Mul => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Node::Add => "+",
            Node::Sub => "-",
            Node::Mul => "*",
            Node::Sin => "sin",
            Node::Cos => "cos",
            Node::Const(_) | Node::Var(_) => "",
        }
    }
}

/// A symbolic expression. Nodes are kept in postfix order so that every
/// subtree is a contiguous slice ending at its root.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    nodes: Vec<Node>,
}

impl Expr {
    /// Builds an expression from postfix nodes, checking that they form
    /// exactly one tree.
    pub fn from_postfix(nodes: Vec<Node>) -> Result<Self> {
        let mut depth: isize = 0;
        for n in &nodes {
            depth -= n.arity() as isize;
            if depth < 0 {
                return invalid("postfix sequence underflows");
            }
            depth += 1;
        }
        if depth != 1 {
            return invalid("postfix sequence does not form a single tree");
        }
        Ok(Self { nodes })
    }

    pub(crate) fn from_postfix_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(Self::from_postfix(nodes.clone()).is_ok());
        Self { nodes }
    }

    pub fn var(i: usize) -> Self {
        Self { nodes: vec![Node::Var(i as u16)] }
    }

    pub fn constant(c: f64) -> Self {
        Self { nodes: vec![Node::Const(c)] }
    }

    fn binary(a: Expr, b: Expr, op: Node) -> Self {
        let mut nodes = a.nodes;
        nodes.extend(b.nodes);
        nodes.push(op);
        Self { nodes }
    }

    fn unary(a: Expr, op: Node) -> Self {
        let mut nodes = a.nodes;
        nodes.push(op);
        Self { nodes }
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Self::binary(a, b, Node::Add)
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Self::binary(a, b, Node::Sub)
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Self::binary(a, b, Node::Mul)
    }

    pub fn sin(a: Expr) -> Self {
        Self::unary(a, Node::Sin)
    }

    pub fn cos(a: Expr) -> Self {
        Self::unary(a, Node::Cos)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut [Node] {
        &mut self.nodes
    }

    /// Node count: operators plus leaves.
    pub fn complexity(&self) -> usize {
        self.nodes.len()
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| if let Node::Var(i) = n { Some(*i as usize) } else { None })
            .max()
    }

    pub fn uses_var(&self, i: usize) -> bool {
        self.nodes.iter().any(|n| *n == Node::Var(i as u16))
    }

    pub fn constants(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| if let Node::Const(c) = n { Some(*c) } else { None })
    }

    /// Start index of the subtree rooted at `root`.
    pub fn subtree_start(&self, root: usize) -> usize {
        let mut need = 1usize;
        let mut i = root + 1;
        while need > 0 {
            i -= 1;
            need = need - 1 + self.nodes[i].arity();
        }
        i
    }

    /// Replaces the subtree rooted at `root` by `with`.
    pub fn replace_subtree(&self, root: usize, with: &[Node]) -> Expr {
        let start = self.subtree_start(root);
        let mut nodes = Vec::with_capacity(self.nodes.len() - (root + 1 - start) + with.len());
        nodes.extend_from_slice(&self.nodes[..start]);
        nodes.extend_from_slice(with);
        nodes.extend_from_slice(&self.nodes[root + 1..]);
        Expr { nodes }
    }

    pub fn subtree(&self, root: usize) -> &[Node] {
        &self.nodes[self.subtree_start(root)..=root]
    }

    /// Evaluates on one input row, checking variable indices first.
    pub fn eval(&self, input: &[f64]) -> Result<f64> {
        if let Some(m) = self.max_var() {
            if m >= input.len() {
                return invalid(format!("expression reads x{m} but input has {} entries", input.len()));
            }
        }
        Ok(self.eval_unchecked(input))
    }

    pub fn eval_unchecked(&self, input: &[f64]) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for n in &self.nodes {
            let v = match *n {
                Node::Const(c) => c,
                Node::Var(i) => input[i as usize],
                Node::Sin => {
                    let a = stack.pop().unwrap();
                    a.sin()
                }
                Node::Cos => {
                    let a = stack.pop().unwrap();
                    a.cos()
                }
                Node::Add | Node::Sub | Node::Mul => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    match n {
                        Node::Add => a + b,
                        Node::Sub => a - b,
                        _ => a * b,
                    }
                }
            };
            stack.push(v);
        }
        stack.pop().unwrap()
    }

    fn write_prefix(&self, root: usize, out: &mut String) -> usize {
        use std::fmt::Write;
        let node = self.nodes[root];
        match node {
            Node::Const(c) => {
                let _ = write!(out, "{c:?}");
                root
            }
            Node::Var(i) => {
                let _ = write!(out, "x{i}");
                root
            }
            Node::Sin | Node::Cos => {
                out.push('(');
                out.push_str(node.symbol());
                out.push(' ');
                let start = self.write_prefix(root - 1, out);
                out.push(')');
                start
            }
            Node::Add | Node::Sub | Node::Mul => {
                let right_start = self.subtree_start(root - 1);
                out.push('(');
                out.push_str(node.symbol());
                out.push(' ');
                let start = self.write_prefix(right_start - 1, out);
                out.push(' ');
                self.write_prefix(root - 1, out);
                out.push(')');
                start
            }
        }
    }

    /// Prefix s-expression, e.g. `(+ x0 (* 0.02 x3))`.
    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_prefix(self.nodes.len() - 1, &mut s);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0, out: Vec::new() };
        p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr { nodes: p.out })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    out: Vec<Node>,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn atom(&mut self) -> &str {
        let rest = &self.src[self.pos..];
        let end = rest.find(|c: char| c.is_whitespace() || c == '(' || c == ')').unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn expr(&mut self) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b')') => Err(self.err("unexpected `)`")),
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let at = self.pos;
                let op = match self.atom() {
                    "+" => Node::Add,
                    "-" => Node::Sub,
                    "*" => Node::Mul,
                    "sin" => Node::Sin,
                    "cos" => Node::Cos,
                    "" => return Err(Error::Parse { pos: at, msg: "missing operator".into() }),
                    other => {
                        return Err(Error::Parse { pos: at, msg: format!("operator `{other}` not allowed") })
                    }
                };
                for _ in 0..op.arity() {
                    self.expr()?;
                }
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err(format!("expected `)` closing `{}`", op.symbol())));
                }
                self.pos += 1;
                self.out.push(op);
                Ok(())
            }
            Some(_) => {
                let at = self.pos;
                let tok = self.atom();
                let node = if let Some(idx) = tok.strip_prefix('x') {
                    idx.parse::<u16>()
                        .map(Node::Var)
                        .map_err(|_| Error::Parse { pos: at, msg: format!("bad variable `{tok}`") })?
                } else {
                    let c = tok
                        .parse::<f64>()
                        .map_err(|_| Error::Parse { pos: at, msg: format!("bad token `{tok}`") })?;
                    if !c.is_finite() {
                        return Err(Error::Parse { pos: at, msg: "non-finite constant".into() });
                    }
                    Node::Const(c)
                };
                self.out.push(node);
                Ok(())
            }
        }
    }
}
