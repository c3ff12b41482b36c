//! Bracketed constituency trees and noun-phrase switch-span selection.
//!
//! Trees use the Penn Treebank bracket notation, `(LABEL child ...)` with
//! leaves written as `(POS token)`. Selection walks the tree top-down and
//! picks the maximal `NP` constituents that can be code-switched, rejecting
//! sentences that would come out monolingual or mistranslated.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Part-of-speech tags treated as pronouns.
pub const PRONOUN_TAGS: [&str; 4] = ["PRP", "PRP$", "WP", "WP$"];

/// Punctuation tags ignored when deciding whether an NP spans the whole sentence.
pub const PUNCT_TAGS: [&str; 9] = [".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$"];

pub const NP_LABEL: &str = "NP";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("malformed tree at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

fn malformed<T>(offset: usize, message: impl Into<String>) -> Result<T, TreeError> {
    Err(TreeError::Malformed {
        offset,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf(String),
    Internal(Vec<ParseNode>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseNode {
    pub label: String,
    pub kind: NodeKind,
}

impl ParseNode {
    pub fn leaf(label: impl Into<String>, token: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            kind: NodeKind::Leaf(token.into()),
        }
    }

    pub fn internal(label: impl Into<String>, children: Vec<ParseNode>) -> Self {
        Self {
            label: label.into(),
            kind: NodeKind::Internal(children),
        }
    }

    pub fn token(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Leaf(t) => Some(t),
            NodeKind::Internal(_) => None,
        }
    }

    pub fn children(&self) -> &[ParseNode] {
        match &self.kind {
            NodeKind::Leaf(_) => &[],
            NodeKind::Internal(c) => c,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }

    pub fn leaf_count(&self) -> usize {
        match &self.kind {
            NodeKind::Leaf(_) => 1,
            NodeKind::Internal(c) => c.iter().map(ParseNode::leaf_count).sum(),
        }
    }

    /// Visits leaves left to right as `(pos_tag, token)`.
    pub fn for_each_leaf<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a str)) {
        match &self.kind {
            NodeKind::Leaf(t) => f(&self.label, t),
            NodeKind::Internal(c) => c.iter().for_each(|n| n.for_each_leaf(f)),
        }
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label);
        match &self.kind {
            NodeKind::Leaf(t) => {
                out.push(' ');
                out.push_str(t);
            }
            NodeKind::Internal(children) => {
                for c in children {
                    out.push(' ');
                    c.write_bracketed(out);
                }
            }
        }
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTree {
    root: ParseNode,
    token_count: usize,
}

impl ParseTree {
    pub fn new(root: ParseNode) -> Self {
        let token_count = root.leaf_count();
        Self { root, token_count }
    }

    pub fn root(&self) -> &ParseNode {
        &self.root
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    /// Left-to-right leaf tokens.
    pub fn fringe(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.token_count);
        self.root.for_each_leaf(&mut |_, t| out.push(t));
        out
    }

    /// Left-to-right part-of-speech tags, parallel to [`ParseTree::fringe`].
    pub fn tags(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.token_count);
        self.root.for_each_leaf(&mut |pos, _| out.push(pos));
        out
    }

    /// The sentence as single-space-joined tokens.
    pub fn sentence(&self) -> String {
        self.fringe().join(" ")
    }

    /// Resolves a child-index path from the root.
    pub fn node_at(&self, path: &[usize]) -> Option<&ParseNode> {
        let mut node = &self.root;
        for &i in path {
            node = node.children().get(i)?;
        }
        Some(node)
    }

    /// Leaf span `[start, end)` of the node at `path`.
    pub fn span_of(&self, path: &[usize]) -> Option<(usize, usize)> {
        let mut node = &self.root;
        let mut start = 0;
        for &i in path {
            let children = node.children();
            let child = children.get(i)?;
            start += children[..i].iter().map(ParseNode::leaf_count).sum::<usize>();
            node = child;
        }
        Some((start, start + node.leaf_count()))
    }

    pub fn to_bracketed(&self) -> String {
        let mut s = String::new();
        self.root.write_bracketed(&mut s);
        s
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn lex(text: &str) -> Vec<Tok<'_>> {
    let mut toks = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        let delim = ch == '(' || ch == ')' || ch.is_whitespace();
        if delim {
            if let Some(s) = start.take() {
                toks.push(Tok::Atom(s, &text[s..i]));
            }
            match ch {
                '(' => toks.push(Tok::Open(i)),
                ')' => toks.push(Tok::Close(i)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        toks.push(Tok::Atom(s, &text[s..]));
    }
    toks
}

/// Label, children, and the token when the node is a leaf.
type RawNode<'a> = (Option<&'a str>, Vec<ParseNode>, Option<&'a str>);

struct Parser<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn offset(&self) -> usize {
        match self.toks.get(self.pos) {
            Some(Tok::Open(o)) | Some(Tok::Close(o)) | Some(Tok::Atom(o, _)) => *o,
            None => self.len,
        }
    }

    /// Parses `( LABEL? child... )`. A missing label is allowed only for the
    /// conventional unlabeled treebank wrapper, handled by the caller.
    fn node(&mut self) -> Result<RawNode<'a>, TreeError> {
        let open = self.offset();
        match self.toks.get(self.pos) {
            Some(Tok::Open(_)) => self.pos += 1,
            _ => return malformed(open, "expected '('"),
        }
        let label = match self.toks.get(self.pos) {
            Some(Tok::Atom(_, a)) => {
                self.pos += 1;
                Some(*a)
            }
            _ => None,
        };
        let mut token = None;
        let mut children = Vec::new();
        loop {
            match self.toks.get(self.pos).copied() {
                None => return malformed(self.len, "unbalanced brackets: missing ')'"),
                Some(Tok::Close(_)) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Atom(o, a)) => {
                    if token.is_some() || !children.is_empty() {
                        return malformed(o, format!("unexpected token '{a}'"));
                    }
                    token = Some(a);
                    self.pos += 1;
                }
                Some(Tok::Open(o)) => {
                    if token.is_some() {
                        return malformed(o, "leaf node cannot have children");
                    }
                    let (l, c, t) = self.node()?;
                    let Some(l) = l else {
                        return malformed(o, "node without a label");
                    };
                    children.push(build(o, l, c, t)?);
                }
            }
        }
        if token.is_none() && children.is_empty() {
            return malformed(open, "empty node");
        }
        Ok((label, children, token))
    }
}

fn build(
    offset: usize,
    label: &str,
    children: Vec<ParseNode>,
    token: Option<&str>,
) -> Result<ParseNode, TreeError> {
    match token {
        Some(t) if children.is_empty() => Ok(ParseNode::leaf(label, t)),
        Some(_) => malformed(offset, "leaf node cannot have children"),
        None => Ok(ParseNode::internal(label, children)),
    }
}

/// Parses a single bracketed tree. An unlabeled outer wrapper with exactly
/// one child, as in `( (S ...) )`, is unwrapped.
pub fn parse_bracketed(text: &str) -> Result<ParseTree, TreeError> {
    let mut p = Parser {
        toks: lex(text),
        pos: 0,
        len: text.len(),
    };
    if p.toks.is_empty() {
        return malformed(0, "empty input");
    }
    let (label, mut children, token) = p.node()?;
    if p.pos != p.toks.len() {
        return malformed(p.offset(), "trailing input after tree");
    }
    let root = match label {
        Some(l) => build(0, l, children, token)?,
        None if token.is_none() && children.len() == 1 => children.pop().expect("one child"),
        None => return malformed(0, "root node without a label"),
    };
    Ok(ParseTree::new(root))
}

/// Parses a batch file body: one tree per non-blank line.
pub fn parse_lines(text: &str) -> Vec<Result<ParseTree, TreeError>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_bracketed)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSpan {
    pub start: usize,
    pub end: usize,
    pub phrase: String,
    pub node_path: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchPlan {
    pub spans: Vec<SwitchSpan>,
}

impl SwitchPlan {
    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    WholeSentenceNP,
    NoEligibleSpan,
    PronounOnlyExhausted,
    MalformedTree,
}

impl Rejection {
    pub const ALL: [Rejection; 4] = [
        Rejection::WholeSentenceNP,
        Rejection::NoEligibleSpan,
        Rejection::PronounOnlyExhausted,
        Rejection::MalformedTree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::WholeSentenceNP => "whole_sentence_np",
            Rejection::NoEligibleSpan => "no_eligible_span",
            Rejection::PronounOnlyExhausted => "pronoun_only_exhausted",
            Rejection::MalformedTree => "malformed_tree",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<TreeError> for Rejection {
    fn from(_: TreeError) -> Self {
        Rejection::MalformedTree
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    /// Keep at most this many spans (leftmost first). `None` keeps all.
    pub max_spans: Option<usize>,
}

impl SelectionPolicy {
    pub fn single() -> Self {
        Self { max_spans: Some(1) }
    }
}

fn is_pronoun_only(node: &ParseNode) -> bool {
    let mut all = true;
    node.for_each_leaf(&mut |pos, _| all &= PRONOUN_TAGS.contains(&pos));
    all
}

#[derive(Default)]
struct Walk {
    spans: Vec<SwitchSpan>,
    candidates: usize,
    whole_sentence: usize,
    pronoun_only: usize,
}

struct Ctx<'t> {
    tokens: Vec<&'t str>,
    /// Number of non-punctuation tokens in the sentence.
    content: usize,
    /// Prefix sums of non-punctuation tokens, length `token_count + 1`.
    content_prefix: Vec<usize>,
}

impl Ctx<'_> {
    fn covers_sentence(&self, start: usize, end: usize) -> bool {
        self.content_prefix[end] - self.content_prefix[start] == self.content
    }
}

fn walk(node: &ParseNode, start: usize, path: &mut Vec<usize>, ctx: &Ctx<'_>, out: &mut Walk) {
    let NodeKind::Internal(children) = &node.kind else {
        return;
    };
    let end = start + node.leaf_count();
    if node.label == NP_LABEL {
        out.candidates += 1;
        if ctx.covers_sentence(start, end) {
            out.whole_sentence += 1;
        } else if is_pronoun_only(node) {
            out.pronoun_only += 1;
        } else {
            out.spans.push(SwitchSpan {
                start,
                end,
                phrase: ctx.tokens[start..end].join(" "),
                node_path: path.clone(),
            });
            return;
        }
    }
    let mut offset = start;
    for (i, child) in children.iter().enumerate() {
        path.push(i);
        walk(child, offset, path, ctx, out);
        path.pop();
        offset += child.leaf_count();
    }
}

/// Chooses the NP spans to code-switch.
///
/// Maximal NPs are collected in pre-order. An NP spanning the whole sentence
/// (ignoring punctuation) is skipped, and rejects the sentence when it is the
/// only NP. Pronoun-only NPs are skipped and the descent continues to the next
/// NP. A sentence left with no span is rejected.
pub fn select_switch_spans(
    tree: &ParseTree,
    policy: &SelectionPolicy,
) -> Result<SwitchPlan, Rejection> {
    let tokens = tree.fringe();
    let tags = tree.tags();
    let mut content_prefix = Vec::with_capacity(tokens.len() + 1);
    content_prefix.push(0);
    for t in &tags {
        let last = *content_prefix.last().expect("non-empty");
        content_prefix.push(last + usize::from(!PUNCT_TAGS.contains(t)));
    }
    let content = *content_prefix.last().expect("non-empty");
    let ctx = Ctx {
        tokens,
        content,
        content_prefix,
    };

    let mut w = Walk::default();
    walk(tree.root(), 0, &mut Vec::new(), &ctx, &mut w);

    if w.spans.is_empty() {
        return Err(if w.whole_sentence > 0 && w.candidates == w.whole_sentence {
            Rejection::WholeSentenceNP
        } else if w.pronoun_only > 0 {
            Rejection::PronounOnlyExhausted
        } else {
            Rejection::NoEligibleSpan
        });
    }
    let mut spans = w.spans;
    if let Some(cap) = policy.max_spans {
        spans.truncate(cap);
    }
    Ok(SwitchPlan { spans })
}
