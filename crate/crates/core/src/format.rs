//! The `rtree v1` text format.
//!
//! ```text
//! rtree v1
//! # comments run to the end of the line
//! vertex v0
//! vertex v1 atom 0.5
//! vertex v2 open
//! edge v0 v1 1.0
//! edge v1 v2 2.5 density 3
//! root v0
//! ```
//!
//! Vertices may also be introduced by the edges that use them. Missing
//! densities default to 1 and missing atoms to 0. A comment of the form
//! `#@ generator kary <k> <c> <first_edge>` records that the tree is a
//! truncation of a k-ary generator; it is kept across round trips.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::classify::GeneratorSpec;
use crate::error::{Error, Result};
use crate::measure::SpeedMeasure;
use crate::scalar::Scalar;
use crate::tree::{Edge, TreeSpec, VertexId};

pub const HEADER: &str = "rtree v1";
const GENERATOR_TAG: &str = "#@ generator kary";

/// A parsed tree file.
#[derive(Clone, Debug)]
pub struct TreeFile<S> {
    pub tree: TreeSpec<S>,
    pub measure: SpeedMeasure<S>,
    pub generator: Option<GeneratorSpec<S>>,
}

impl<S: Scalar> PartialEq for TreeFile<S> {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree && self.measure == other.measure && self.generator == other.generator
    }
}

fn err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &code[s..i], column: code[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &code[s..], column: code[..s].chars().count() + 1 });
    }
    out
}

fn number<S: Scalar>(line: usize, tok: &Token<'_>, what: &str) -> Result<S> {
    let x: f64 = tok
        .text
        .parse()
        .map_err(|_| err(line, tok.column, format!("expected a number for {what}, found {:?}", tok.text)))?;
    if !x.is_finite() {
        return Err(err(line, tok.column, format!("{what} must be finite")));
    }
    Ok(S::of(x))
}

struct Builder<S> {
    names: Vec<String>,
    index: HashMap<String, VertexId>,
    declared: Vec<bool>,
    open: Vec<bool>,
    atom: Vec<S>,
    edges: Vec<Edge<S>>,
    density: Vec<S>,
}

impl<S: Scalar> Builder<S> {
    fn vertex(&mut self, name: &str) -> VertexId {
        if let Some(&v) = self.index.get(name) {
            return v;
        }
        let v = VertexId(self.names.len());
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), v);
        self.declared.push(false);
        self.open.push(false);
        self.atom.push(S::zero());
        v
    }
}

/// Parses the text of a tree file.
pub fn parse<S: Scalar>(text: &str) -> Result<TreeFile<S>> {
    let mut b = Builder {
        names: Vec::new(),
        index: HashMap::new(),
        declared: Vec::new(),
        open: Vec::new(),
        atom: Vec::new(),
        edges: Vec::new(),
        density: Vec::new(),
    };
    let mut header = false;
    let mut root: Option<(VertexId, usize)> = None;
    let mut generator = None;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        last_line = ln;
        let trimmed = raw.trim_start();
        if let Some(rest) = trimmed.strip_prefix(GENERATOR_TAG) {
            generator = Some(parse_generator::<S>(ln, raw, rest)?);
            continue;
        }
        let toks = tokens(raw);
        let Some(first) = toks.first() else { continue };
        if !header {
            if toks.len() == 2 && toks[0].text == "rtree" && toks[1].text == "v1" {
                header = true;
                continue;
            }
            return Err(err(ln, first.column, format!("expected header {HEADER:?}")));
        }
        match first.text {
            "vertex" => {
                let name = toks.get(1).ok_or_else(|| err(ln, first.column, "vertex needs an id"))?;
                let v = b.vertex(name.text);
                if b.declared[v.0] {
                    return Err(err(ln, name.column, format!("vertex {:?} declared twice", name.text)));
                }
                b.declared[v.0] = true;
                let mut k = 2;
                while k < toks.len() {
                    match toks[k].text {
                        "atom" => {
                            let t = toks.get(k + 1).ok_or_else(|| err(ln, toks[k].column, "atom needs a value"))?;
                            let a: S = number(ln, t, "atom")?;
                            if a < S::zero() {
                                return Err(err(ln, t.column, "atom must be nonnegative"));
                            }
                            b.atom[v.0] = a;
                            k += 2;
                        }
                        "open" => {
                            b.open[v.0] = true;
                            k += 1;
                        }
                        other => return Err(err(ln, toks[k].column, format!("unknown keyword {other:?}"))),
                    }
                }
            }
            "edge" => {
                if toks.len() < 4 {
                    return Err(err(ln, first.column, "edge needs two ids and a length"));
                }
                let u = b.vertex(toks[1].text);
                let v = b.vertex(toks[2].text);
                let length: S = number(ln, &toks[3], "length")?;
                if !(length > S::zero()) {
                    return Err(err(ln, toks[3].column, format!("edge length must be positive, found {}", toks[3].text)));
                }
                let mut density = S::one();
                let mut k = 4;
                while k < toks.len() {
                    match toks[k].text {
                        "density" => {
                            let t = toks.get(k + 1).ok_or_else(|| err(ln, toks[k].column, "density needs a value"))?;
                            density = number(ln, t, "density")?;
                            if density < S::zero() {
                                return Err(err(ln, t.column, "density must be nonnegative"));
                            }
                            k += 2;
                        }
                        other => return Err(err(ln, toks[k].column, format!("unknown keyword {other:?}"))),
                    }
                }
                b.edges.push(Edge { u, v, length });
                b.density.push(density);
            }
            "root" => {
                let name = toks.get(1).ok_or_else(|| err(ln, first.column, "root needs an id"))?;
                if toks.len() > 2 {
                    return Err(err(ln, toks[2].column, "unexpected token after root id"));
                }
                if root.is_some() {
                    return Err(err(ln, first.column, "root given twice"));
                }
                root = Some((b.vertex(name.text), ln));
            }
            other => return Err(err(ln, first.column, format!("unknown keyword {other:?}"))),
        }
    }
    if !header {
        return Err(err(last_line.max(1), 1, format!("missing header {HEADER:?}")));
    }
    let (root, root_line) = root.ok_or_else(|| err(last_line.max(1), 1, "missing root line"))?;
    let Builder { names, open, atom, edges, density, .. } = b;
    let tree = TreeSpec::from_parts(names, open, edges, root).map_err(|e| match e {
        Error::InvalidTree(m) => err(root_line, 1, m),
        other => other,
    })?;
    let measure = SpeedMeasure::new(&tree, density, atom).map_err(|e| match e {
        Error::InvalidMeasure(m) => err(root_line, 1, m),
        other => other,
    })?;
    Ok(TreeFile { tree, measure, generator })
}

fn parse_generator<S: Scalar>(ln: usize, raw: &str, rest: &str) -> Result<GeneratorSpec<S>> {
    let base = raw.len() - rest.len();
    let toks = tokens(rest);
    let col = |t: &Token<'_>| raw[..base].chars().count() + t.column;
    if toks.len() != 3 {
        return Err(err(ln, 1, "generator metadata needs k, c and the first edge length"));
    }
    let k: usize = toks[0]
        .text
        .parse()
        .map_err(|_| err(ln, col(&toks[0]), "branching number must be a positive integer"))?;
    let c: S = number(ln, &toks[1], "length ratio").map_err(|_| err(ln, col(&toks[1]), "bad length ratio"))?;
    let first: S = number(ln, &toks[2], "first edge").map_err(|_| err(ln, col(&toks[2]), "bad first edge length"))?;
    let g = GeneratorSpec { k, c, first_edge: first };
    g.validate().map_err(|e| err(ln, 1, e.to_string()))?;
    Ok(g)
}

/// Canonical text: header, optional generator line, vertices in id order, edges
/// in id order, root. Default densities and atoms are omitted.
pub fn serialize<S: Scalar>(file: &TreeFile<S>) -> String {
    let TreeFile { tree, measure, generator } = file;
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    if let Some(g) = generator {
        let _ = writeln!(out, "{GENERATOR_TAG} {} {} {}", g.k, g.c, g.first_edge);
    }
    for v in tree.vertices() {
        let _ = write!(out, "vertex {}", tree.name(v));
        let a = measure.atom(v);
        if a != S::zero() {
            let _ = write!(out, " atom {a}");
        }
        if tree.is_open(v) {
            out.push_str(" open");
        }
        out.push('\n');
    }
    for (i, e) in tree.edges().iter().enumerate() {
        let _ = write!(out, "edge {} {} {}", tree.name(e.u), tree.name(e.v), e.length);
        let d = measure.densities()[i];
        if d != S::one() {
            let _ = write!(out, " density {d}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "root {}", tree.name(tree.root()));
    out
}

/// Reads and parses a tree file from disk.
pub fn parse_tree_file<S: Scalar>(path: &std::path::Path) -> Result<TreeFile<S>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}
