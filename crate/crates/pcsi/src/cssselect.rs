//! CSS selector matching for the Hex `selmatch` built-in.
//!
//! Supported grammar: comma-separated complex selectors; compound
//! selectors joined by descendant (whitespace) or child (`>`)
//! combinators; simple selectors for type, `*`, `#id`, `.class`, `[attr]`
//! and `[attr=value]`. Anything else (pseudo-classes, sibling
//! combinators, substring attribute operators) is a parse error so
//! script authors find out immediately rather than silently matching
//! nothing.

use crate::htmldom::{Axis, DomTree, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectorError {
    #[error("empty selector")]
    Empty,
    #[error("unsupported simple selector at '{0}'")]
    Unsupported(String),
    #[error("expected identifier after '{0}'")]
    MissingIdent(String),
    #[error("unterminated attribute selector")]
    UnterminatedAttr,
    #[error("dangling combinator")]
    DanglingCombinator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Simple {
    Universal,
    /// Element name, matched case-insensitively.
    Type(String),
    Id(String),
    Class(String),
    AttrPresent(String),
    AttrEq(String, Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Compound {
    parts: Vec<Simple>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Combinator {
    Descendant,
    Child,
}

#[derive(Debug, Clone)]
struct Complex {
    /// Left to right; one fewer combinator than compounds.
    compounds: Vec<Compound>,
    combinators: Vec<Combinator>,
}

/// A parsed selector list.
#[derive(Debug, Clone)]
pub struct Selector {
    alternatives: Vec<Complex>,
}

pub fn parse_selector(input: &str) -> Result<Selector, SelectorError> {
    let mut alternatives = Vec::new();
    for part in input.split(',') {
        alternatives.push(parse_complex(part)?);
    }
    Ok(Selector { alternatives })
}

fn parse_complex(input: &str) -> Result<Complex, SelectorError> {
    let mut compounds = Vec::new();
    let mut combinators = Vec::new();
    let mut rest = input.trim();
    if rest.is_empty() {
        return Err(SelectorError::Empty);
    }
    loop {
        let (compound, after) = parse_compound(rest)?;
        compounds.push(compound);
        rest = after.trim_start();
        if rest.is_empty() {
            break;
        }
        if let Some(stripped) = rest.strip_prefix('>') {
            combinators.push(Combinator::Child);
            rest = stripped.trim_start();
            if rest.is_empty() {
                return Err(SelectorError::DanglingCombinator);
            }
        } else {
            combinators.push(Combinator::Descendant);
        }
    }
    Ok(Complex {
        compounds,
        combinators,
    })
}

fn ident_len(s: &str) -> usize {
    s.chars()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '_')
        .map(|c| c.len_utf8())
        .sum()
}

/// Parse one compound selector from the front of `input`; returns it and
/// the remainder.
fn parse_compound(input: &str) -> Result<(Compound, &str), SelectorError> {
    let mut parts = Vec::new();
    let mut rest = input;
    loop {
        let Some(c) = rest.chars().next() else { break };
        match c {
            '*' => {
                parts.push(Simple::Universal);
                rest = &rest[1..];
            }
            '#' | '.' => {
                let len = ident_len(&rest[1..]);
                if len == 0 {
                    return Err(SelectorError::MissingIdent(c.to_string()));
                }
                let name = rest[1..1 + len].to_string();
                parts.push(if c == '#' {
                    Simple::Id(name)
                } else {
                    Simple::Class(name)
                });
                rest = &rest[1 + len..];
            }
            '[' => {
                let close = rest
                    .find(']')
                    .ok_or(SelectorError::UnterminatedAttr)?;
                let body = &rest[1..close];
                let simple = match body.split_once('=') {
                    None => {
                        let name = body.trim();
                        if name.is_empty() || ident_len(name) != name.len() {
                            return Err(SelectorError::Unsupported(format!("[{body}]")));
                        }
                        Simple::AttrPresent(name.to_string())
                    }
                    Some((name, value)) => {
                        let name = name.trim();
                        // Reject ~= |= ^= $= *= operator forms.
                        if name.is_empty()
                            || ident_len(name) != name.len()
                            || name.ends_with(['~', '|', '^', '$', '*'])
                        {
                            return Err(SelectorError::Unsupported(format!("[{body}]")));
                        }
                        let value = value.trim();
                        let unquoted = value
                            .strip_prefix('"')
                            .and_then(|v| v.strip_suffix('"'))
                            .or_else(|| {
                                value.strip_prefix('\'').and_then(|v| v.strip_suffix('\''))
                            })
                            .unwrap_or(value);
                        Simple::AttrEq(name.to_string(), unquoted.as_bytes().to_vec())
                    }
                };
                parts.push(simple);
                rest = &rest[close + 1..];
            }
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' => {
                let len = ident_len(rest);
                parts.push(Simple::Type(rest[..len].to_string()));
                rest = &rest[len..];
            }
            c if c.is_whitespace() || c == '>' => break,
            other => {
                return Err(SelectorError::Unsupported(
                    rest[..other.len_utf8()].to_string(),
                ))
            }
        }
    }
    if parts.is_empty() {
        return Err(SelectorError::Empty);
    }
    Ok((Compound { parts }, rest))
}

impl Selector {
    /// True iff `node` is an ELEMENT that some comma-alternative matches.
    /// Only ancestors of `node` are ever inspected.
    pub fn matches(&self, tree: &DomTree, node: u32) -> bool {
        match tree.get(node) {
            Some(n) if n.kind == NodeKind::Element => {}
            _ => return false,
        }
        self.alternatives
            .iter()
            .any(|complex| matches_complex(tree, node, complex))
    }
}

fn matches_compound(tree: &DomTree, node: u32, compound: &Compound) -> bool {
    let Some(n) = tree.get(node) else { return false };
    if n.kind != NodeKind::Element {
        return false;
    }
    compound.parts.iter().all(|part| match part {
        Simple::Universal => true,
        Simple::Type(name) => n.name.eq_ignore_ascii_case(name),
        Simple::Id(id) => n.attr("id") == Some(id.as_bytes()),
        Simple::Class(class) => n
            .attr("class")
            .is_some_and(|v| v.split(|b| b.is_ascii_whitespace()).any(|w| w == class.as_bytes())),
        Simple::AttrPresent(name) => n.attr(name).is_some(),
        Simple::AttrEq(name, value) => n.attr(name) == Some(value.as_slice()),
    })
}

fn matches_complex(tree: &DomTree, node: u32, complex: &Complex) -> bool {
    let last = complex.compounds.len() - 1;
    if !matches_compound(tree, node, &complex.compounds[last]) {
        return false;
    }
    matches_prefix(tree, node, complex, last)
}

/// Right-to-left walk: compounds[..idx] must match ancestors of `node`
/// according to the combinator between compound idx-1 and idx.
fn matches_prefix(tree: &DomTree, node: u32, complex: &Complex, idx: usize) -> bool {
    if idx == 0 {
        return true;
    }
    let combinator = complex.combinators[idx - 1];
    let target = idx - 1;
    match combinator {
        Combinator::Child => {
            let parent = tree.nav(node, Axis::Parent);
            parent != 0
                && matches_compound(tree, parent, &complex.compounds[target])
                && matches_prefix(tree, parent, complex, target)
        }
        Combinator::Descendant => {
            let mut ancestor = tree.nav(node, Axis::Parent);
            while ancestor != 0 {
                if matches_compound(tree, ancestor, &complex.compounds[target])
                    && matches_prefix(tree, ancestor, complex, target)
                {
                    return true;
                }
                ancestor = tree.nav(ancestor, Axis::Parent);
            }
            false
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::htmldom::parse_html;

    fn first_named(tree: &DomTree, name: &str) -> u32 {
        (1..=tree.node_count() as u32)
            .find(|id| tree.inspect_name(*id) == name)
            .unwrap()
    }

    #[test]
    fn paper_selector_shape() {
        let sel = parse_selector("main#main-content article div p").unwrap();
        assert_eq!(sel.alternatives.len(), 1);
        let complex = &sel.alternatives[0];
        assert_eq!(complex.compounds.len(), 4);
        assert!(complex
            .combinators
            .iter()
            .all(|c| *c == Combinator::Descendant));
        assert_eq!(
            complex.compounds[0].parts,
            vec![
                Simple::Type("main".into()),
                Simple::Id("main-content".into())
            ]
        );
    }

    #[test]
    fn matches_article_paragraphs() {
        let tree = parse_html(
            b"<html><body><main id=\"main-content\"><article><div><p>a</p>\
              <p>b</p></div></article></main><p>outside</p></body></html>",
        );
        let sel = parse_selector("main#main-content article div p").unwrap();
        let mut matched = Vec::new();
        for id in 1..=tree.node_count() as u32 {
            if sel.matches(&tree, id) {
                matched.push(id);
            }
        }
        assert_eq!(matched.len(), 2);
        for id in &matched {
            assert_eq!(tree.inspect_name(*id), "p");
        }
        let outside = (1..=tree.node_count() as u32)
            .filter(|id| tree.inspect_name(*id) == "p")
            .last()
            .unwrap();
        assert!(!sel.matches(&tree, outside));
    }

    #[test]
    fn child_combinator_requires_direct_parent() {
        let tree = parse_html(b"<div><span><b>x</b></span></div>");
        let b = first_named(&tree, "b");
        assert!(parse_selector("div b").unwrap().matches(&tree, b));
        assert!(!parse_selector("div > b").unwrap().matches(&tree, b));
        assert!(parse_selector("span > b").unwrap().matches(&tree, b));
        assert!(parse_selector("div > span > b").unwrap().matches(&tree, b));
    }

    #[test]
    fn text_nodes_never_match() {
        let tree = parse_html(b"<p>hi</p>");
        let sel = parse_selector("p").unwrap();
        assert!(sel.matches(&tree, 2));
        assert!(!sel.matches(&tree, 3)); // the text node
        assert!(!sel.matches(&tree, 0));
        assert!(!sel.matches(&tree, 1)); // ROOT
        assert!(!sel.matches(&tree, 999));
    }

    #[test]
    fn class_splits_on_whitespace_runs() {
        let tree = parse_html(b"<div class=\"a  b\tc\">x</div>");
        assert!(parse_selector(".a").unwrap().matches(&tree, 2));
        assert!(parse_selector(".b").unwrap().matches(&tree, 2));
        assert!(parse_selector(".c").unwrap().matches(&tree, 2));
        assert!(!parse_selector(".d").unwrap().matches(&tree, 2));
        // Case-sensitive values.
        assert!(!parse_selector(".A").unwrap().matches(&tree, 2));
    }

    #[test]
    fn type_names_match_case_insensitively() {
        let tree = parse_html(b"<DIV>x</DIV>");
        assert!(parse_selector("div").unwrap().matches(&tree, 2));
        assert!(parse_selector("DIV").unwrap().matches(&tree, 2));
    }

    #[test]
    fn attribute_selectors() {
        let tree = parse_html(b"<script type=\"application/ld+json\">x</script>");
        assert!(parse_selector("[type]").unwrap().matches(&tree, 2));
        assert!(parse_selector("script[type=\"application/ld+json\"]")
            .unwrap()
            .matches(&tree, 2));
        assert!(parse_selector("[type='application/ld+json']")
            .unwrap()
            .matches(&tree, 2));
        assert!(!parse_selector("[type=other]").unwrap().matches(&tree, 2));
        assert!(!parse_selector("[missing]").unwrap().matches(&tree, 2));
    }

    #[test]
    fn comma_alternatives() {
        let tree = parse_html(b"<div>x</div><span>y</span>");
        let sel = parse_selector("div, span").unwrap();
        assert!(sel.matches(&tree, 2));
        assert!(sel.matches(&tree, 4));
        // Universal alternative never flips results off.
        let with_universal = parse_selector("div, span, *").unwrap();
        assert!(with_universal.matches(&tree, 2));
    }

    #[test]
    fn unsupported_syntax_is_an_error() {
        assert!(matches!(
            parse_selector("p:hover"),
            Err(SelectorError::Unsupported(_))
        ));
        assert!(parse_selector("").is_err());
        assert!(parse_selector("   ").is_err());
        assert!(parse_selector("a >").is_err());
        assert!(parse_selector("a + b").is_err());
        assert!(parse_selector("[a~=b]").is_err());
        assert!(parse_selector("#").is_err());
        assert!(parse_selector("[").is_err());
    }

    #[test]
    fn id_match_is_case_sensitive() {
        let tree = parse_html(b"<main id=\"main-content\">x</main>");
        assert!(parse_selector("#main-content").unwrap().matches(&tree, 2));
        assert!(!parse_selector("#Main-Content").unwrap().matches(&tree, 2));
    }
}
