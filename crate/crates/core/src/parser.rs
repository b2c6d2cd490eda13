//! Port extraction from SystemC-syntax module declarations.
//!
//! This is a scanner over the declaration subset, not a C++ front end. It
//! finds `SC_MODULE(name) { ... }` (or `struct`/`class name : sc_module`)
//! blocks and collects the `sc_in<T>` / `sc_out<T>` / `sc_in_clk` /
//! `sc_out_clk` members declared directly in the body. Function bodies,
//! constructors and child module instances are skipped.

use std::collections::HashSet;
use std::path::PathBuf;

use thiserror::Error;

use crate::types::{RtlType, MAX_BITVECTOR_WIDTH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("module `{0}` not found")]
    ModuleNotFound(String),
    #[error("module `{0}` declares no ports")]
    EmptyInterface(String),
    #[error("port `{name}` has unsupported type `{type_text}`")]
    UnsupportedType { name: String, type_text: String },
    #[error("duplicate port `{0}`")]
    DuplicatePort(String),
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortSpec {
    pub name: String,
    pub direction: Direction,
    pub rtl_type: RtlType,
    pub declaration_index: usize,
}

impl PortSpec {
    pub fn new(name: &str, direction: Direction, rtl_type: RtlType, declaration_index: usize) -> Self {
        PortSpec {
            name: name.to_string(),
            direction,
            rtl_type,
            declaration_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleInterface {
    pub module_name: String,
    pub ports: Vec<PortSpec>,
    pub source_file: PathBuf,
}

impl ModuleInterface {
    pub fn port(&self, name: &str) -> Option<&PortSpec> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Punct(char),
    Str,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            c if c.is_whitespace() => i += 1,
            '/' if chars.get(i + 1) == Some(&'/') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '/' if chars.get(i + 1) == Some(&'*') => {
                let start = line;
                i += 2;
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(ParseError::Syntax {
                                line: start,
                                message: "unterminated block comment".into(),
                            })
                        }
                        Some('*') if chars.get(i + 1) == Some(&'/') => {
                            i += 2;
                            break;
                        }
                        Some('\n') => {
                            line += 1;
                            i += 1;
                        }
                        Some(_) => i += 1,
                    }
                }
            }
            '#' => {
                // preprocessor lines are ignored, including continuations
                while i < chars.len() && chars[i] != '\n' {
                    if chars[i] == '\\' && chars.get(i + 1) == Some(&'\n') {
                        line += 1;
                        i += 1;
                    }
                    i += 1;
                }
            }
            '"' | '\'' => {
                let quote = c;
                i += 1;
                while i < chars.len() && chars[i] != quote {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    if chars.get(i) == Some(&'\n') {
                        line += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(ParseError::Syntax {
                        line,
                        message: "unterminated literal".into(),
                    });
                }
                i += 1;
                out.push(Token { tok: Tok::Str, line });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let mut ident: String = chars[start..i].iter().collect();
                // fold `ns::name` into one identifier token
                while chars.get(i) == Some(&':') && chars.get(i + 1) == Some(&':') {
                    let s = i + 2;
                    let mut j = s;
                    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    if j == s {
                        break;
                    }
                    ident.push_str("::");
                    ident.extend(&chars[s..j]);
                    i = j;
                }
                out.push(Token {
                    tok: Tok::Ident(ident),
                    line,
                });
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '\'') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().filter(|&&c| c != '\'').collect();
                let digits = text.trim_end_matches(['u', 'U', 'l', 'L']);
                let value = if let Some(h) = digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
                    u64::from_str_radix(h, 16).ok()
                } else {
                    digits.parse().ok()
                };
                match value {
                    Some(v) => out.push(Token { tok: Tok::Num(v), line }),
                    // floats and other literals never matter for port types
                    None => out.push(Token { tok: Tok::Str, line }),
                }
            }
            _ => {
                out.push(Token {
                    tok: Tok::Punct(c),
                    line,
                });
                i += 1;
            }
        }
    }
    Ok(out)
}

fn strip_ns(ident: &str) -> &str {
    ident
        .strip_prefix("sc_core::")
        .or_else(|| ident.strip_prefix("sc_dt::"))
        .or_else(|| ident.strip_prefix("std::"))
        .or_else(|| ident.strip_prefix("::"))
        .unwrap_or(ident)
}

fn is_punct(t: &Token, c: char) -> bool {
    t.tok == Tok::Punct(c)
}

/// Index just past the bracket matching the opener at `open`.
fn skip_balanced(toks: &[Token], open: usize) -> Result<usize, ParseError> {
    let (o, c) = match toks[open].tok {
        Tok::Punct('{') => ('{', '}'),
        Tok::Punct('(') => ('(', ')'),
        Tok::Punct('[') => ('[', ']'),
        _ => unreachable!("not an opener"),
    };
    let mut depth = 0usize;
    for (k, t) in toks.iter().enumerate().skip(open) {
        if is_punct(t, o) {
            depth += 1;
        } else if is_punct(t, c) {
            depth -= 1;
            if depth == 0 {
                return Ok(k + 1);
            }
        }
    }
    Err(ParseError::Syntax {
        line: toks[open].line,
        message: format!("unbalanced `{o}`"),
    })
}

/// Locates module bodies: returns (name, body token range) for each.
fn find_modules(toks: &[Token]) -> Result<Vec<(String, usize, usize)>, ParseError> {
    let mut found = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let name_and_brace = match &toks[i].tok {
            Tok::Ident(id) if strip_ns(id) == "SC_MODULE" => {
                match (toks.get(i + 1), toks.get(i + 2), toks.get(i + 3)) {
                    (Some(p), Some(Token { tok: Tok::Ident(n), .. }), Some(q))
                        if is_punct(p, '(') && is_punct(q, ')') =>
                    {
                        toks[i + 4..]
                            .iter()
                            .position(|t| is_punct(t, '{') || is_punct(t, ';'))
                            .filter(|&k| is_punct(&toks[i + 4 + k], '{'))
                            .map(|k| (n.clone(), i + 4 + k))
                    }
                    _ => None,
                }
            }
            Tok::Ident(id) if id == "struct" || id == "class" => match toks.get(i + 1) {
                Some(Token { tok: Tok::Ident(n), .. }) => {
                    let rest = &toks[i + 2..];
                    let end = rest
                        .iter()
                        .position(|t| is_punct(t, '{') || is_punct(t, ';'))
                        .unwrap_or(rest.len());
                    let derives_module = rest[..end]
                        .iter()
                        .any(|t| matches!(&t.tok, Tok::Ident(b) if strip_ns(b) == "sc_module"));
                    if derives_module && end < rest.len() && is_punct(&rest[end], '{') {
                        Some((n.clone(), i + 2 + end))
                    } else {
                        None
                    }
                }
                _ => None,
            },
            _ => None,
        };
        match name_and_brace {
            Some((name, open)) => {
                let close = skip_balanced(toks, open)?;
                found.push((name, open + 1, close - 1));
                i = close;
            }
            None => i += 1,
        }
    }
    Ok(found)
}

fn port_keyword(t: &Token) -> Option<&str> {
    match &t.tok {
        Tok::Ident(id) => {
            let s = strip_ns(id);
            matches!(s, "sc_in" | "sc_out" | "sc_inout" | "sc_in_clk" | "sc_out_clk").then_some(s)
        }
        _ => None,
    }
}

fn render(toks: &[Token]) -> String {
    let mut s = String::new();
    for t in toks {
        match &t.tok {
            Tok::Ident(id) => {
                if s.ends_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
                    s.push(' ');
                }
                s.push_str(id);
            }
            Tok::Num(n) => s.push_str(&n.to_string()),
            Tok::Punct(c) => s.push(*c),
            Tok::Str => s.push_str("\"\""),
        }
    }
    s
}

/// Maps a port's template argument to an RTL type.
fn resolve_type(arg: &[Token]) -> Option<RtlType> {
    let idents: Vec<&str> = arg
        .iter()
        .filter_map(|t| match &t.tok {
            Tok::Ident(s) => Some(strip_ns(s)),
            _ => None,
        })
        .collect();
    let width = || match arg {
        [_, lt, Token { tok: Tok::Num(n), .. }, gt] if is_punct(lt, '<') && is_punct(gt, '>') => Some(*n),
        _ => None,
    };
    let int_width = |lo: u64, hi: u64| width().filter(|w| (lo..=hi).contains(w)).map(|w| w as u8);
    if idents.len() == 1 && arg.len() == 4 {
        return match idents[0] {
            "sc_int" | "sc_bigint" => int_width(1, 64).map(RtlType::SignedInt),
            "sc_uint" | "sc_biguint" => int_width(1, 64).map(RtlType::UnsignedInt),
            "sc_bv" | "sc_lv" => width()
                .filter(|w| (1..=MAX_BITVECTOR_WIDTH as u64).contains(w))
                .map(|w| RtlType::BitVector(w as u16)),
            _ => None,
        };
    }
    if idents.len() != arg.len() {
        return None;
    }
    let words: Vec<&str> = idents
        .iter()
        .copied()
        .filter(|w| *w != "signed" || idents.len() == 1)
        .collect();
    let joined = words.join(" ");
    Some(match joined.as_str() {
        "bool" | "sc_logic" | "sc_bit" => RtlType::Logic,
        "float" | "sc_float" => RtlType::Float32,
        "double" | "sc_double" => RtlType::Float64,
        "char" | "int8_t" => RtlType::SignedInt(8),
        "short" | "short int" | "int16_t" => RtlType::SignedInt(16),
        "int" | "signed" | "long" | "long int" | "int32_t" => RtlType::SignedInt(32),
        "long long" | "long long int" | "int64_t" => RtlType::SignedInt(64),
        "unsigned char" | "uint8_t" => RtlType::UnsignedInt(8),
        "unsigned short" | "unsigned short int" | "uint16_t" => RtlType::UnsignedInt(16),
        "unsigned" | "unsigned int" | "unsigned long" | "uint32_t" => RtlType::UnsignedInt(32),
        "unsigned long long" | "uint64_t" => RtlType::UnsignedInt(64),
        _ => return None,
    })
}

/// Parses one member declaration starting with a port keyword.
fn parse_port_decl(stmt: &[Token], next_index: &mut usize, ports: &mut Vec<PortSpec>) -> Result<(), ParseError> {
    let kw = port_keyword(&stmt[0]).expect("caller checked keyword");
    let line = stmt[0].line;
    let (direction, rtl_type, type_text, mut k) = match kw {
        "sc_in_clk" => (Direction::In, Some(RtlType::Logic), "sc_in_clk".to_string(), 1),
        "sc_out_clk" => (Direction::Out, Some(RtlType::Logic), "sc_out_clk".to_string(), 1),
        _ => {
            if !stmt.get(1).is_some_and(|t| is_punct(t, '<')) {
                return Err(ParseError::Syntax {
                    line,
                    message: format!("expected `<` after `{kw}`"),
                });
            }
            let mut depth = 0usize;
            let mut end = None;
            for (j, t) in stmt.iter().enumerate().skip(1) {
                if is_punct(t, '<') {
                    depth += 1;
                } else if is_punct(t, '>') {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                }
            }
            let end = end.ok_or_else(|| ParseError::Syntax {
                line,
                message: format!("unterminated template argument for `{kw}`"),
            })?;
            let arg = &stmt[2..end];
            let type_text = render(&stmt[..=end]);
            let ty = if kw == "sc_inout" { None } else { resolve_type(arg) };
            let dir = if kw == "sc_out" { Direction::Out } else { Direction::In };
            (dir, ty, type_text, end + 1)
        }
    };
    // declarator list: name [ ("label") | {"label"} ] , ...
    let mut declared_any = false;
    while k < stmt.len() {
        let name = match &stmt[k].tok {
            Tok::Ident(n) => n.clone(),
            _ => {
                return Err(ParseError::Syntax {
                    line: stmt[k].line,
                    message: format!("expected port name in `{}`", render(stmt)),
                })
            }
        };
        k += 1;
        if let Some(t) = stmt.get(k) {
            if is_punct(t, '[') {
                return Err(ParseError::UnsupportedType {
                    name,
                    type_text: format!("{type_text}[]"),
                });
            }
            if is_punct(t, '(') || is_punct(t, '{') {
                k = skip_balanced(stmt, k)?;
            } else if is_punct(t, '=') {
                // `= value` initializer; skip to the next top-level comma
                let mut depth = 0i32;
                while k < stmt.len() {
                    let t = &stmt[k];
                    if is_punct(t, '(') || is_punct(t, '{') || is_punct(t, '<') {
                        depth += 1;
                    } else if is_punct(t, ')') || is_punct(t, '}') || is_punct(t, '>') {
                        depth -= 1;
                    } else if depth == 0 && is_punct(t, ',') {
                        break;
                    }
                    k += 1;
                }
            }
        }
        let rtl_type = rtl_type.ok_or_else(|| ParseError::UnsupportedType {
            name: name.clone(),
            type_text: type_text.clone(),
        })?;
        if ports.iter().any(|p| p.name == name) {
            return Err(ParseError::DuplicatePort(name));
        }
        ports.push(PortSpec {
            name,
            direction,
            rtl_type,
            declaration_index: *next_index,
        });
        *next_index += 1;
        declared_any = true;
        match stmt.get(k) {
            None => break,
            Some(t) if is_punct(t, ',') => k += 1,
            Some(t) => {
                return Err(ParseError::Syntax {
                    line: t.line,
                    message: format!("unexpected token in `{}`", render(stmt)),
                })
            }
        }
    }
    if !declared_any {
        return Err(ParseError::Syntax {
            line,
            message: format!("`{type_text}` declares no port"),
        });
    }
    Ok(())
}

fn parse_body(toks: &[Token]) -> Result<Vec<PortSpec>, ParseError> {
    let mut ports = Vec::new();
    let mut next_index = 0;
    let mut stmt_start = 0;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        let is_port_stmt = toks.get(stmt_start).and_then(port_keyword).is_some();
        if is_punct(t, ';') {
            if is_port_stmt && stmt_start < i {
                parse_port_decl(&toks[stmt_start..i], &mut next_index, &mut ports)?;
            }
            i += 1;
            stmt_start = i;
        } else if is_punct(t, '{') || is_punct(t, '(') {
            let end = skip_balanced(toks, i)?;
            if is_punct(t, '{') && !is_port_stmt {
                // function body, constructor or nested type: not a member declaration
                i = end;
                stmt_start = i;
            } else {
                i = end;
            }
        } else if is_punct(t, ':') && i == stmt_start + 1 {
            // access specifier such as `public:`
            i += 1;
            stmt_start = i;
        } else {
            i += 1;
        }
    }
    Ok(ports)
}

/// Extracts the interface of `top_module` from SystemC-syntax source.
pub fn parse_interface(source_text: &str, top_module: &str) -> Result<ModuleInterface, ParseError> {
    let toks = tokenize(source_text)?;
    let modules = find_modules(&toks)?;
    let (_, start, end) = modules
        .iter()
        .find(|(n, _, _)| n == top_module)
        .ok_or_else(|| ParseError::ModuleNotFound(top_module.to_string()))?;
    let ports = parse_body(&toks[*start..*end])?;
    if ports.is_empty() {
        return Err(ParseError::EmptyInterface(top_module.to_string()));
    }
    let mut seen = HashSet::new();
    for p in &ports {
        if !seen.insert(&p.name) {
            return Err(ParseError::DuplicatePort(p.name.clone()));
        }
    }
    Ok(ModuleInterface {
        module_name: top_module.to_string(),
        ports,
        source_file: PathBuf::new(),
    })
}

/// Names of every module block found in `source_text`.
pub fn module_names(source_text: &str) -> Result<Vec<String>, ParseError> {
    Ok(find_modules(&tokenize(source_text)?)?
        .into_iter()
        .map(|(n, _, _)| n)
        .collect())
}
