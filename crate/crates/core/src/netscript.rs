//! A small subset of the Net# network description language.
//!
//! Grammar (whitespace and `//` or `/* */` comments are ignored, keywords
//! are case-sensitive):
//!
//! ```text
//! script     := decl+
//! decl       := input | hidden | output
//! input      := "input" NAME "auto" ";"
//! hidden     := "hidden" NAME "[" INT "]" "from" NAME "all" ";"
//! output     := "output" NAME "[" INT "]" "sigmoid" "from" NAME "all" ";"
//! ```
//!
//! Other Net# constructs (convolution and pooling bundles, explicit input
//! shapes, other activations, `const` declarations) are rejected with an
//! "unsupported construct" diagnostic.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based source location.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetScriptError {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: unsupported construct `{construct}`")]
    Unsupported { span: Span, construct: String },
    #[error("{span}: {message}")]
    Semantic { span: Span, message: String },
    #[error("shape error: {0}")]
    Shape(String),
}

impl NetScriptError {
    pub fn span(&self) -> Option<Span> {
        match self {
            NetScriptError::Syntax { span, .. }
            | NetScriptError::Unsupported { span, .. }
            | NetScriptError::Semantic { span, .. } => Some(*span),
            NetScriptError::Shape(_) => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softmax,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Input,
    Hidden,
    Output,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSize {
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDecl {
    pub kind: LayerKind,
    pub name: String,
    pub size: LayerSize,
    /// Only output layers carry an explicit activation.
    pub activation: Option<Activation>,
    pub source: Option<String>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetScriptAst {
    pub layers: Vec<LayerDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Int(u64),
    LBracket,
    RBracket,
    Semi,
    Other(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

/// Keywords of the full language this subset does not implement.
const UNSUPPORTED: &[&str] = &[
    "const", "convolve", "pool", "response", "norm", "share", "sharing", "bundle", "linear", "rlinear", "brlinear",
    "softmax", "tanh", "sqrt", "abs", "max", "where", "filter", "bias",
];

fn lex(text: &str) -> Result<Vec<Token>, NetScriptError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, column: col };
        if c.is_whitespace() {
            bump!();
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(NetScriptError::Syntax {
                        span,
                        message: "unterminated comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            tokens.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                span,
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits.parse().map_err(|_| NetScriptError::Syntax {
                span,
                message: format!("integer {digits} too large"),
            })?;
            tokens.push(Token {
                tok: Tok::Int(value),
                span,
            });
        } else {
            let tok = match c {
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ';' => Tok::Semi,
                other => Tok::Other(other),
            };
            tokens.push(Token { tok, span });
            bump!();
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: Span,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> Span {
        self.peek().map_or(self.end, |t| t.span)
    }

    fn describe(tok: Option<&Token>) -> String {
        match tok.map(|t| &t.tok) {
            None => "end of input".into(),
            Some(Tok::Word(w)) => format!("`{w}`"),
            Some(Tok::Int(n)) => format!("`{n}`"),
            Some(Tok::LBracket) => "`[`".into(),
            Some(Tok::RBracket) => "`]`".into(),
            Some(Tok::Semi) => "`;`".into(),
            Some(Tok::Other(c)) => format!("`{c}`"),
        }
    }

    fn error<T>(&self, expected: &str) -> Result<T, NetScriptError> {
        let tok = self.peek();
        if let Some(Token {
            tok: Tok::Word(w),
            span,
        }) = tok
        {
            if UNSUPPORTED.contains(&w.as_str()) {
                return Err(NetScriptError::Unsupported {
                    span: *span,
                    construct: w.clone(),
                });
            }
        }
        Err(NetScriptError::Syntax {
            span: self.here(),
            message: format!("expected {expected}, found {}", Self::describe(tok)),
        })
    }

    fn keyword(&mut self, kw: &str) -> Result<Span, NetScriptError> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w),
                span,
            }) if w == kw => {
                let span = *span;
                self.pos += 1;
                Ok(span)
            }
            _ => self.error(&format!("`{kw}`")),
        }
    }

    fn punct(&mut self, want: Tok, text: &str) -> Result<(), NetScriptError> {
        match self.peek() {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(())
            }
            _ => self.error(text),
        }
    }

    fn name(&mut self) -> Result<String, NetScriptError> {
        match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) if !is_keyword(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.error("a layer name"),
        }
    }

    fn bracketed_size(&mut self) -> Result<(usize, Span), NetScriptError> {
        self.punct(Tok::LBracket, "`[`")?;
        let span = self.here();
        let size = match self.peek() {
            Some(Token { tok: Tok::Int(n), .. }) => *n as usize,
            _ => {
                // shapes like [4, 4] are multi-dimensional bundles
                return self.error("a layer size");
            }
        };
        self.pos += 1;
        if let Some(Token {
            tok: Tok::Other(','),
            span,
        }) = self.peek()
        {
            return Err(NetScriptError::Unsupported {
                span: *span,
                construct: "multi-dimensional layer shape".into(),
            });
        }
        self.punct(Tok::RBracket, "`]`")?;
        Ok((size, span))
    }

    fn decl(&mut self) -> Result<LayerDecl, NetScriptError> {
        let span = self.here();
        let kind = match self.peek() {
            Some(Token { tok: Tok::Word(w), .. }) => match w.as_str() {
                "input" => LayerKind::Input,
                "hidden" => LayerKind::Hidden,
                "output" => LayerKind::Output,
                _ => return self.error("`input`, `hidden` or `output`"),
            },
            _ => return self.error("`input`, `hidden` or `output`"),
        };
        self.pos += 1;
        let name = self.name()?;
        let decl = match kind {
            LayerKind::Input => {
                if matches!(self.peek(), Some(Token { tok: Tok::LBracket, .. })) {
                    return Err(NetScriptError::Unsupported {
                        span: self.here(),
                        construct: "explicit input size".into(),
                    });
                }
                self.keyword("auto")?;
                LayerDecl {
                    kind,
                    name,
                    size: LayerSize::Auto,
                    activation: None,
                    source: None,
                    span,
                }
            }
            LayerKind::Hidden | LayerKind::Output => {
                let (size, size_span) = self.bracketed_size()?;
                if size == 0 {
                    return Err(NetScriptError::Semantic {
                        span: size_span,
                        message: format!("layer `{name}` has size 0"),
                    });
                }
                let activation = if kind == LayerKind::Output {
                    self.keyword("sigmoid")?;
                    Some(Activation::Sigmoid)
                } else {
                    None
                };
                self.keyword("from")?;
                let source = self.name()?;
                self.keyword("all")?;
                LayerDecl {
                    kind,
                    name,
                    size: LayerSize::Fixed(size),
                    activation,
                    source: Some(source),
                    span,
                }
            }
        };
        self.punct(Tok::Semi, "`;`")?;
        Ok(decl)
    }
}

fn is_keyword(w: &str) -> bool {
    matches!(w, "input" | "hidden" | "output" | "auto" | "from" | "all" | "sigmoid") || UNSUPPORTED.contains(&w)
}

pub fn parse(text: &str) -> Result<NetScriptAst, NetScriptError> {
    let tokens = lex(text)?;
    let end = {
        let line = text.lines().count().max(1);
        let column = text.lines().last().map_or(0, |l| l.chars().count()) + 1;
        Span { line, column }
    };
    let mut parser = Parser { tokens, pos: 0, end };
    let mut layers = Vec::new();
    while parser.peek().is_some() {
        layers.push(parser.decl()?);
    }
    let ast = NetScriptAst { layers };
    check(&ast, end)?;
    Ok(ast)
}

fn check(ast: &NetScriptAst, end: Span) -> Result<(), NetScriptError> {
    let semantic = |span: Span, message: String| NetScriptError::Semantic { span, message };
    let first = ast.layers.first().map_or(end, |l| l.span);

    let mut seen: Vec<&LayerDecl> = Vec::new();
    for layer in &ast.layers {
        if seen.iter().any(|l| l.name == layer.name) {
            return Err(semantic(layer.span, format!("duplicate layer name `{}`", layer.name)));
        }
        if let Some(src) = &layer.source {
            match seen.iter().find(|l| &l.name == src) {
                None => {
                    return Err(semantic(layer.span, format!("unknown source layer `{src}`")));
                }
                Some(l) if l.kind == LayerKind::Output => {
                    return Err(semantic(
                        layer.span,
                        format!("output layer `{src}` cannot feed `{}`", layer.name),
                    ));
                }
                Some(_) => {}
            }
        }
        seen.push(layer);
    }

    let count = |kind| ast.layers.iter().filter(|l| l.kind == kind).count();
    match count(LayerKind::Input) {
        0 => return Err(semantic(first, "missing input layer".into())),
        1 => {}
        _ => {
            let second = ast.layers.iter().filter(|l| l.kind == LayerKind::Input).nth(1).unwrap();
            return Err(semantic(second.span, "more than one input layer".into()));
        }
    }
    match count(LayerKind::Output) {
        0 => return Err(semantic(end, "missing output layer".into())),
        1 => {}
        _ => {
            let second = ast
                .layers
                .iter()
                .filter(|l| l.kind == LayerKind::Output)
                .nth(1)
                .unwrap();
            return Err(semantic(second.span, "more than one output layer".into()));
        }
    }

    let chain = source_chain(ast);
    for layer in &ast.layers {
        if !chain.iter().any(|l| l.name == layer.name) {
            return Err(semantic(
                layer.span,
                format!("layer `{}` is not connected to the output", layer.name),
            ));
        }
    }
    Ok(())
}

/// Layers from input to output, following `from` links backwards from the
/// output declaration.
fn source_chain(ast: &NetScriptAst) -> Vec<&LayerDecl> {
    let mut chain = Vec::new();
    let mut cur = ast.layers.iter().find(|l| l.kind == LayerKind::Output);
    while let Some(layer) = cur {
        chain.push(layer);
        cur = layer
            .source
            .as_ref()
            .and_then(|s| ast.layers.iter().find(|l| &l.name == s));
    }
    chain.reverse();
    chain
}

pub fn total_hidden_nodes(ast: &NetScriptAst) -> usize {
    ast.layers
        .iter()
        .filter(|l| l.kind == LayerKind::Hidden)
        .map(|l| match l.size {
            LayerSize::Fixed(n) => n,
            LayerSize::Auto => 0,
        })
        .sum()
}

/// Dense layer stack: `sizes[0]` inputs, `sizes[L]` outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub sizes: Vec<usize>,
    /// Activation of each non-input layer.
    pub activations: Vec<Activation>,
}

impl NetworkTopology {
    /// Fully connected stack with sigmoid hidden and output units.
    pub fn dense(input: usize, hidden: &[usize], outputs: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(outputs);
        NetworkTopology {
            activations: vec![Activation::Sigmoid; sizes.len() - 1],
            sizes,
        }
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn hidden_nodes(&self) -> usize {
        self.sizes[1..self.sizes.len() - 1].iter().sum()
    }
}

pub fn elaborate(ast: &NetScriptAst, input_width: usize, n_classes: usize) -> Result<NetworkTopology, NetScriptError> {
    elaborate_with(ast, input_width, n_classes, Activation::Sigmoid)
}

/// Like [`elaborate`] with an explicit activation for hidden layers.
pub fn elaborate_with(
    ast: &NetScriptAst,
    input_width: usize,
    n_classes: usize,
    hidden_activation: Activation,
) -> Result<NetworkTopology, NetScriptError> {
    if input_width == 0 {
        return Err(NetScriptError::Shape("input width 0".into()));
    }
    let mut sizes = Vec::new();
    let mut activations = Vec::new();
    for layer in source_chain(ast) {
        match (layer.kind, layer.size) {
            (LayerKind::Input, _) => sizes.push(input_width),
            (LayerKind::Hidden, LayerSize::Fixed(n)) => {
                sizes.push(n);
                activations.push(hidden_activation);
            }
            (LayerKind::Output, LayerSize::Fixed(n)) => {
                if n != n_classes {
                    return Err(NetScriptError::Shape(format!(
                        "output layer `{}` declares {n} units but there are {n_classes} classes",
                        layer.name
                    )));
                }
                sizes.push(n);
                activations.push(layer.activation.unwrap_or(Activation::Sigmoid));
            }
            (_, LayerSize::Auto) => {
                return Err(NetScriptError::Shape(format!("layer `{}` has no size", layer.name)));
            }
        }
    }
    if sizes.first() != Some(&input_width) || sizes.len() < 2 {
        return Err(NetScriptError::Shape("script does not start at its input layer".into()));
    }
    Ok(NetworkTopology { sizes, activations })
}

impl fmt::Display for NetScriptAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match (layer.kind, layer.size) {
                (LayerKind::Input, _) => write!(f, "input {} auto;", layer.name)?,
                (LayerKind::Hidden, LayerSize::Fixed(n)) => write!(
                    f,
                    "hidden {} [{n}] from {} all;",
                    layer.name,
                    layer.source.as_deref().unwrap_or("?")
                )?,
                (LayerKind::Output, LayerSize::Fixed(n)) => write!(
                    f,
                    "output {} [{n}] sigmoid from {} all;",
                    layer.name,
                    layer.source.as_deref().unwrap_or("?")
                )?,
                (_, LayerSize::Auto) => write!(f, "/* {} without size */", layer.name)?,
            }
        }
        Ok(())
    }
}
