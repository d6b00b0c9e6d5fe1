//! Tolerant HTML parsing into an immutable tree of integer-addressed nodes.
//!
//! Node IDs are assigned in pre-order document order starting at 1 for the
//! synthetic ROOT; 0 is the universal "no node" value that every
//! navigation returns when a link is absent. Parsing never fails:
//! unclosed tags are closed implicitly, stray end tags are dropped, and
//! unknown markup degrades to text. No html/head/body synthesis is
//! performed, so scripts match what is literally present in the input.

use std::collections::BTreeMap;

/// What a node is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Root,
    Element,
    Text,
    Comment,
    Declaration,
    ProcIns,
}

impl NodeKind {
    /// The type string the Hex `type` built-in reports.
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeKind::Root => "ROOT",
            NodeKind::Element => "ELEMENT",
            NodeKind::Text => "TEXT",
            NodeKind::Comment => "COMMENT",
            NodeKind::Declaration => "DECLARATION",
            NodeKind::ProcIns => "PROCINS",
        }
    }
}

/// A single node. Which fields are populated depends on the kind.
#[derive(Debug, Clone)]
pub struct DomNode {
    pub kind: NodeKind,
    /// Lowercase element name (ELEMENT only).
    pub name: String,
    /// Text content (TEXT and COMMENT only).
    pub text: Vec<u8>,
    /// Attributes in source order, first occurrence wins (ELEMENT only).
    pub attrs: Vec<(String, Vec<u8>)>,
    pub parent: u32,
    pub first_child: u32,
    pub next_sibling: u32,
}

impl DomNode {
    fn new(kind: NodeKind) -> DomNode {
        DomNode {
            kind,
            name: String::new(),
            text: Vec::new(),
            attrs: Vec::new(),
            parent: 0,
            first_child: 0,
            next_sibling: 0,
        }
    }

    pub fn attr(&self, name: &str) -> Option<&[u8]> {
        self.attrs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Navigation axes for [`DomTree::nav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Parent,
    Sister,
    Children,
}

/// An immutable parsed document. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct DomTree {
    /// Index 0 is a placeholder so IDs index directly.
    nodes: Vec<DomNode>,
}

impl DomTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn get(&self, id: u32) -> Option<&DomNode> {
        if id == 0 {
            None
        } else {
            self.nodes.get(id as usize)
        }
    }

    /// Linked node along `axis`, or 0 when there is none (including when
    /// `id` itself is 0 or out of range).
    pub fn nav(&self, id: u32, axis: Axis) -> u32 {
        match self.get(id) {
            None => 0,
            Some(node) => match axis {
                Axis::Parent => node.parent,
                Axis::Sister => node.next_sibling,
                Axis::Children => node.first_child,
            },
        }
    }

    /// Kind string, or "" for an invalid ID.
    pub fn inspect_type(&self, id: u32) -> &'static str {
        self.get(id).map(|n| n.kind.as_str()).unwrap_or("")
    }

    /// Lowercase element name; "" for non-elements and invalid IDs.
    pub fn inspect_name(&self, id: u32) -> &str {
        self.get(id).map(|n| n.name.as_str()).unwrap_or("")
    }

    /// Text content of a TEXT node; "" otherwise.
    pub fn inspect_text(&self, id: u32) -> &[u8] {
        match self.get(id) {
            Some(n) if n.kind == NodeKind::Text => &n.text,
            _ => b"",
        }
    }

    /// Attribute value on an ELEMENT node; "" when absent.
    pub fn inspect_attr(&self, id: u32, name: &str) -> &[u8] {
        self.get(id).and_then(|n| n.attr(name)).unwrap_or(b"")
    }

    /// IDs of an element's children in document order.
    pub fn children_of(&self, id: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut child = self.nav(id, Axis::Children);
        while child != 0 {
            out.push(child);
            child = self.nav(child, Axis::Sister);
        }
        out
    }
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param",
    "source", "track", "wbr",
];

/// Elements whose raw contents are a single undecoded text node.
const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style"];

/// Openers that implicitly close an open `p`.
const P_CLOSERS: &[&str] = &[
    "address", "article", "aside", "blockquote", "details", "div", "dl", "fieldset",
    "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "header",
    "hr", "main", "menu", "nav", "ol", "p", "pre", "section", "table", "ul",
];

/// Parse arbitrary bytes as a tolerant HTML document. Never fails; empty
/// input yields a tree holding only the ROOT node.
pub fn parse_html(input: &[u8]) -> DomTree {
    Builder::new().run(input)
}

struct Builder {
    nodes: Vec<DomNode>,
    /// Open-element stack of node IDs; bottom is ROOT.
    open: Vec<u32>,
}

impl Builder {
    fn new() -> Builder {
        let mut nodes = vec![DomNode::new(NodeKind::Root)]; // placeholder at 0
        nodes.push(DomNode::new(NodeKind::Root)); // the real ROOT, ID 1
        Builder {
            nodes,
            open: vec![1],
        }
    }

    fn append(&mut self, mut node: DomNode) -> u32 {
        let id = self.nodes.len() as u32;
        let parent = *self.open.last().unwrap();
        node.parent = parent;
        // Link as last child.
        let mut slot = self.nodes[parent as usize].first_child;
        if slot == 0 {
            self.nodes[parent as usize].first_child = id;
        } else {
            while self.nodes[slot as usize].next_sibling != 0 {
                slot = self.nodes[slot as usize].next_sibling;
            }
            self.nodes[slot as usize].next_sibling = id;
        }
        self.nodes.push(node);
        id
    }

    fn append_text(&mut self, bytes: Vec<u8>) {
        if bytes.is_empty() {
            return;
        }
        let mut node = DomNode::new(NodeKind::Text);
        node.text = bytes;
        self.append(node);
    }

    fn open_name(&self, id: u32) -> &str {
        &self.nodes[id as usize].name
    }

    /// Pop open elements up to and including the first with `name`,
    /// stopping the search at any of the `barriers`. No-op if not found.
    fn close_through(&mut self, names: &[&str], barriers: &[&str]) {
        let mut found = None;
        for (depth, &id) in self.open.iter().enumerate().skip(1).rev() {
            let n = self.open_name(id);
            if names.contains(&n) {
                found = Some(depth);
                break;
            }
            if barriers.contains(&n) {
                return;
            }
        }
        if let Some(depth) = found {
            self.open.truncate(depth);
        }
    }

    fn implicit_close_for(&mut self, tag: &str) {
        match tag {
            t if P_CLOSERS.contains(&t) => {
                self.close_through(&["p"], &["table", "td", "th", "caption"]);
            }
            "li" => self.close_through(&["li"], &["ul", "ol", "table"]),
            "dt" | "dd" => self.close_through(&["dt", "dd"], &["dl", "table"]),
            "td" | "th" => self.close_through(&["td", "th"], &["tr", "table"]),
            "tr" => self.close_through(&["tr"], &["table"]),
            "thead" | "tbody" | "tfoot" => {
                self.close_through(&["tr"], &["table", "thead", "tbody", "tfoot"]);
                self.close_through(&["thead", "tbody", "tfoot"], &["table"]);
            }
            "option" => self.close_through(&["option"], &["select"]),
            "optgroup" => self.close_through(&["option", "optgroup"], &["select"]),
            "body" => self.close_through(&["head"], &["body"]),
            _ => {}
        }
    }

    fn start_tag(&mut self, name: String, attrs: Vec<(String, Vec<u8>)>, self_closing: bool) {
        self.implicit_close_for(&name);
        let mut node = DomNode::new(NodeKind::Element);
        let is_void = VOID_ELEMENTS.contains(&name.as_str());
        node.name = name;
        node.attrs = attrs;
        let id = self.append(node);
        if !is_void && !self_closing {
            self.open.push(id);
        }
    }

    fn end_tag(&mut self, name: &str) {
        // Close the nearest matching open element; ignore strays.
        if let Some(depth) = self
            .open
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .find(|(_, &id)| self.open_name(id) == name)
            .map(|(d, _)| d)
        {
            self.open.truncate(depth);
        }
    }

    fn run(mut self, input: &[u8]) -> DomTree {
        let mut pos = 0usize;
        let mut text = Vec::new();
        while pos < input.len() {
            let b = input[pos];
            if b != b'<' {
                text.push(b);
                pos += 1;
                continue;
            }
            // Decide what kind of markup starts here.
            let rest = &input[pos + 1..];
            if rest.starts_with(b"!--") {
                self.flush_text(&mut text);
                let (content, consumed) = scan_comment(rest);
                let mut node = DomNode::new(NodeKind::Comment);
                node.text = content;
                self.append(node);
                pos += 1 + consumed;
            } else if rest.first() == Some(&b'!') {
                self.flush_text(&mut text);
                let consumed = scan_until_gt(rest);
                let mut content = &rest[1..consumed];
                if content.last() == Some(&b'>') {
                    content = &content[..content.len() - 1];
                }
                let mut node = DomNode::new(NodeKind::Declaration);
                node.text = content.to_vec();
                self.append(node);
                pos += 1 + consumed;
            } else if rest.first() == Some(&b'?') {
                self.flush_text(&mut text);
                let consumed = scan_procins(rest);
                self.append(DomNode::new(NodeKind::ProcIns));
                pos += 1 + consumed;
            } else if rest.first() == Some(&b'/') {
                if let Some((name, consumed)) = scan_end_tag(rest) {
                    self.flush_text(&mut text);
                    self.end_tag(&name);
                    pos += 1 + consumed;
                } else {
                    text.push(b'<');
                    pos += 1;
                }
            } else if rest.first().is_some_and(|c| c.is_ascii_alphabetic()) {
                self.flush_text(&mut text);
                let (name, attrs, self_closing, consumed) = scan_start_tag(rest);
                pos += 1 + consumed;
                let raw = RAW_TEXT_ELEMENTS.contains(&name.as_str());
                self.start_tag(name.clone(), attrs, self_closing);
                if raw && !self_closing {
                    let (content, consumed) = scan_raw_text(&input[pos..], &name);
                    self.append_text(content);
                    self.end_tag(&name);
                    pos += consumed;
                }
            } else {
                // "<" not followed by markup: literal text.
                text.push(b'<');
                pos += 1;
            }
        }
        self.flush_text(&mut text);
        DomTree { nodes: self.nodes }
    }

    fn flush_text(&mut self, text: &mut Vec<u8>) {
        if !text.is_empty() {
            let decoded = decode_entities(text);
            self.append_text(decoded);
            text.clear();
        }
    }
}

/// Scan `!--...-->` starting after `<`. Returns (content, consumed).
fn scan_comment(rest: &[u8]) -> (Vec<u8>, usize) {
    let body = &rest[3..];
    match body.windows(3).position(|w| w == b"-->") {
        Some(end) => (body[..end].to_vec(), 3 + end + 3),
        None => (body.to_vec(), rest.len()),
    }
}

fn scan_until_gt(rest: &[u8]) -> usize {
    match rest.iter().position(|b| *b == b'>') {
        Some(end) => end + 1,
        None => rest.len(),
    }
}

fn scan_procins(rest: &[u8]) -> usize {
    // Prefer "?>", fall back to ">".
    match rest.windows(2).position(|w| w == b"?>") {
        Some(end) => end + 2,
        None => scan_until_gt(rest),
    }
}

/// Scan `/name...>` after `<`. Returns lowercased name and consumed count.
fn scan_end_tag(rest: &[u8]) -> Option<(String, usize)> {
    let mut pos = 1;
    let start = pos;
    while rest.get(pos).is_some_and(|b| is_name_byte(*b)) {
        pos += 1;
    }
    if pos == start {
        return None;
    }
    let name = to_lower_name(&rest[start..pos]);
    while rest.get(pos).is_some_and(|b| *b != b'>') {
        pos += 1;
    }
    if rest.get(pos) == Some(&b'>') {
        pos += 1;
    }
    Some((name, pos))
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b':'
}

fn to_lower_name(bytes: &[u8]) -> String {
    bytes
        .iter()
        .map(|b| (*b as char).to_ascii_lowercase())
        .collect()
}

/// Scan `name attrs...>` after `<`. Returns (name, attrs, self_closing, consumed).
fn scan_start_tag(rest: &[u8]) -> (String, Vec<(String, Vec<u8>)>, bool, usize) {
    let mut pos = 0;
    while rest.get(pos).is_some_and(|b| is_name_byte(*b)) {
        pos += 1;
    }
    let name = to_lower_name(&rest[..pos]);
    let mut attrs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut self_closing = false;
    loop {
        while rest.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
            pos += 1;
        }
        match rest.get(pos) {
            None => break,
            Some(b'>') => {
                pos += 1;
                break;
            }
            Some(b'/') => {
                if rest.get(pos + 1) == Some(&b'>') {
                    self_closing = true;
                    pos += 2;
                    break;
                }
                pos += 1;
            }
            Some(_) => {
                let start = pos;
                while rest
                    .get(pos)
                    .is_some_and(|b| !b.is_ascii_whitespace() && !b"=/>".contains(b))
                {
                    pos += 1;
                }
                if pos == start {
                    pos += 1; // unexpected byte; skip it
                    continue;
                }
                let attr_name = to_lower_name(&rest[start..pos]);
                while rest.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
                    pos += 1;
                }
                let value = if rest.get(pos) == Some(&b'=') {
                    pos += 1;
                    while rest.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
                        pos += 1;
                    }
                    match rest.get(pos) {
                        Some(&q @ (b'"' | b'\'')) => {
                            pos += 1;
                            let vstart = pos;
                            while rest.get(pos).is_some_and(|b| *b != q) {
                                pos += 1;
                            }
                            let raw = &rest[vstart..pos];
                            if rest.get(pos) == Some(&q) {
                                pos += 1;
                            }
                            decode_entities(raw)
                        }
                        _ => {
                            let vstart = pos;
                            while rest
                                .get(pos)
                                .is_some_and(|b| !b.is_ascii_whitespace() && *b != b'>')
                            {
                                pos += 1;
                            }
                            decode_entities(&rest[vstart..pos])
                        }
                    }
                } else {
                    Vec::new()
                };
                if !attrs.iter().any(|(n, _)| *n == attr_name) {
                    attrs.push((attr_name, value));
                }
            }
        }
    }
    (name, attrs, self_closing, pos)
}

/// Scan raw element content up to the matching case-insensitive end tag.
/// Returns (content, consumed including the end tag).
fn scan_raw_text(input: &[u8], name: &str) -> (Vec<u8>, usize) {
    let mut pos = 0;
    while pos < input.len() {
        if input[pos] == b'<' && input.get(pos + 1) == Some(&b'/') {
            let after = &input[pos + 2..];
            if after.len() >= name.len()
                && after[..name.len()].eq_ignore_ascii_case(name.as_bytes())
            {
                let content = input[..pos].to_vec();
                let close_end = input[pos..]
                    .iter()
                    .position(|b| *b == b'>')
                    .map(|p| pos + p + 1)
                    .unwrap_or(input.len());
                return (content, close_end);
            }
        }
        pos += 1;
    }
    (input.to_vec(), input.len())
}

// ---- character references ----

/// The named entities worth knowing for news-page extraction; unknown
/// references pass through untouched.
static NAMED_ENTITIES: &[(&str, &str)] = &[
    ("amp", "&"),
    ("lt", "<"),
    ("gt", ">"),
    ("quot", "\""),
    ("apos", "'"),
    ("nbsp", "\u{a0}"),
    ("copy", "\u{a9}"),
    ("reg", "\u{ae}"),
    ("trade", "\u{2122}"),
    ("hellip", "\u{2026}"),
    ("mdash", "\u{2014}"),
    ("ndash", "\u{2013}"),
    ("lsquo", "\u{2018}"),
    ("rsquo", "\u{2019}"),
    ("ldquo", "\u{201c}"),
    ("rdquo", "\u{201d}"),
    ("laquo", "\u{ab}"),
    ("raquo", "\u{bb}"),
    ("times", "\u{d7}"),
    ("divide", "\u{f7}"),
    ("deg", "\u{b0}"),
    ("plusmn", "\u{b1}"),
    ("pound", "\u{a3}"),
    ("euro", "\u{20ac}"),
    ("cent", "\u{a2}"),
    ("yen", "\u{a5}"),
    ("sect", "\u{a7}"),
    ("para", "\u{b6}"),
    ("middot", "\u{b7}"),
    ("bull", "\u{2022}"),
    ("dagger", "\u{2020}"),
    ("Dagger", "\u{2021}"),
    ("permil", "\u{2030}"),
    ("prime", "\u{2032}"),
    ("Prime", "\u{2033}"),
    ("minus", "\u{2212}"),
    ("frac12", "\u{bd}"),
    ("frac14", "\u{bc}"),
    ("frac34", "\u{be}"),
    ("sup1", "\u{b9}"),
    ("sup2", "\u{b2}"),
    ("sup3", "\u{b3}"),
    ("micro", "\u{b5}"),
    ("shy", "\u{ad}"),
    ("eacute", "\u{e9}"),
    ("egrave", "\u{e8}"),
    ("agrave", "\u{e0}"),
    ("uuml", "\u{fc}"),
    ("ouml", "\u{f6}"),
    ("auml", "\u{e4}"),
    ("ccedil", "\u{e7}"),
    ("ntilde", "\u{f1}"),
];

/// Decode `&name;`, `&#123;`, and `&#xAB;` references. Anything
/// unrecognized (including a bare '&') is preserved byte-for-byte.
pub fn decode_entities(input: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(input.len());
    let mut pos = 0;
    while pos < input.len() {
        if input[pos] != b'&' {
            out.push(input[pos]);
            pos += 1;
            continue;
        }
        let Some(semi) = input[pos + 1..]
            .iter()
            .take(32)
            .position(|b| *b == b';')
            .map(|p| pos + 1 + p)
        else {
            out.push(b'&');
            pos += 1;
            continue;
        };
        let body = &input[pos + 1..semi];
        let decoded: Option<String> = if let Some(num) = body.strip_prefix(b"#") {
            let (digits, radix) = match num.first() {
                Some(b'x') | Some(b'X') => (&num[1..], 16),
                _ => (num, 10),
            };
            std::str::from_utf8(digits)
                .ok()
                .and_then(|s| u32::from_str_radix(s, radix).ok())
                .and_then(char::from_u32)
                .map(String::from)
        } else {
            std::str::from_utf8(body)
                .ok()
                .and_then(|name| {
                    NAMED_ENTITIES
                        .iter()
                        .find(|(n, _)| *n == name)
                        .map(|(_, v)| (*v).to_string())
                })
        };
        match decoded {
            Some(s) => {
                out.extend_from_slice(s.as_bytes());
                pos = semi + 1;
            }
            None => {
                out.push(b'&');
                pos += 1;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(tree: &DomTree) -> Vec<(u32, NodeKind, String)> {
        (1..=tree.node_count() as u32)
            .map(|id| {
                let n = tree.get(id).unwrap();
                let label = match n.kind {
                    NodeKind::Element => n.name.clone(),
                    NodeKind::Text => String::from_utf8_lossy(&n.text).into_owned(),
                    _ => String::new(),
                };
                (id, n.kind, label)
            })
            .collect()
    }

    #[test]
    fn preorder_ids_for_simple_document() {
        let t = parse_html(b"<html><body><p>hi</p></body></html>");
        assert_eq!(
            kinds(&t),
            vec![
                (1, NodeKind::Root, String::new()),
                (2, NodeKind::Element, "html".into()),
                (3, NodeKind::Element, "body".into()),
                (4, NodeKind::Element, "p".into()),
                (5, NodeKind::Text, "hi".into()),
            ]
        );
        // No synthetic head inserted.
        assert_eq!(t.node_count(), 5);
    }

    #[test]
    fn empty_input_is_root_only() {
        let t = parse_html(b"");
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.inspect_type(1), "ROOT");
        assert_eq!(t.nav(1, Axis::Children), 0);
    }

    #[test]
    fn unclosed_p_tags_become_siblings() {
        let t = parse_html(b"<p>a<p>b");
        // 1 ROOT, 2 p, 3 text a, 4 p, 5 text b
        assert_eq!(t.node_count(), 5);
        assert_eq!(t.inspect_name(2), "p");
        assert_eq!(t.inspect_name(4), "p");
        assert_eq!(t.nav(2, Axis::Sister), 4);
        assert_eq!(t.nav(2, Axis::Parent), 1);
        assert_eq!(t.nav(4, Axis::Parent), 1);
        assert_eq!(t.inspect_text(3), b"a");
        assert_eq!(t.inspect_text(t.nav(4, Axis::Children)), b"b");
    }

    #[test]
    fn nav_returns_zero_for_invalid_nodes() {
        let t = parse_html(b"<p>hi</p>");
        assert_eq!(t.nav(0, Axis::Parent), 0);
        assert_eq!(t.nav(1, Axis::Parent), 0);
        assert_eq!(t.nav(999, Axis::Children), 0);
        assert_eq!(t.inspect_name(0), "");
        assert_eq!(t.inspect_type(999), "");
    }

    #[test]
    fn text_navigation_chain() {
        let t = parse_html(b"<html><body><p>hi</p></body></html>");
        let body = 3;
        let p = t.nav(body, Axis::Children);
        let text = t.nav(p, Axis::Children);
        assert_eq!(t.inspect_type(text), "TEXT");
        assert_eq!(t.inspect_text(text), b"hi");
        assert_eq!(t.nav(text, Axis::Sister), 0);
    }

    #[test]
    fn void_elements_take_no_children() {
        let t = parse_html(b"<p><br>text<img src=x>more</p>");
        let p = 2;
        let br = t.nav(p, Axis::Children);
        assert_eq!(t.inspect_name(br), "br");
        assert_eq!(t.nav(br, Axis::Children), 0);
        let text = t.nav(br, Axis::Sister);
        assert_eq!(t.inspect_text(text), b"text");
        let img = t.nav(text, Axis::Sister);
        assert_eq!(t.inspect_name(img), "img");
        assert_eq!(t.inspect_attr(img, "src"), b"x");
        assert_eq!(t.inspect_text(t.nav(img, Axis::Sister)), b"more");
    }

    #[test]
    fn attributes_decode_and_first_wins() {
        let t = parse_html(br#"<a href="x&amp;y" href="z" Class='c d' bare novalue>t</a>"#);
        let a = 2;
        assert_eq!(t.inspect_attr(a, "href"), b"x&y");
        assert_eq!(t.inspect_attr(a, "class"), b"c d");
        assert_eq!(t.inspect_attr(a, "bare"), b"");
        assert_eq!(t.inspect_attr(a, "missing"), b"");
    }

    #[test]
    fn script_content_is_raw_text() {
        let t = parse_html(b"<script type=\"application/ld+json\">{\"a\":\"<b>&amp;\"}</script>");
        let script = 2;
        assert_eq!(t.inspect_name(script), "script");
        assert_eq!(t.inspect_attr(script, "type"), b"application/ld+json");
        let text = t.nav(script, Axis::Children);
        assert_eq!(t.inspect_text(text), b"{\"a\":\"<b>&amp;\"}");
    }

    #[test]
    fn comments_declarations_procins() {
        let t = parse_html(b"<!DOCTYPE html><!-- note --><?xml version=\"1\"?><p>x</p>");
        assert_eq!(t.inspect_type(2), "DECLARATION");
        assert_eq!(t.inspect_type(3), "COMMENT");
        assert_eq!(t.inspect_type(4), "PROCINS");
        assert_eq!(t.inspect_name(5), "p");
        // text(n) applies to TEXT nodes only.
        assert_eq!(t.inspect_text(3), b"");
    }

    #[test]
    fn entities_in_text() {
        let t = parse_html(b"<p>a &amp; b &#169; &#x41; &rsquo; &notanentity; &unterminated</p>");
        let text = t.nav(2, Axis::Children);
        assert_eq!(
            t.inspect_text(text),
            "a & b \u{a9} A \u{2019} &notanentity; &unterminated".as_bytes()
        );
    }

    #[test]
    fn stray_end_tags_are_ignored() {
        let t = parse_html(b"</div><p>a</p></div>");
        assert_eq!(t.inspect_name(2), "p");
        assert_eq!(t.nav(2, Axis::Parent), 1);
    }

    #[test]
    fn mismatched_nesting_recovers() {
        let t = parse_html(b"<div><b>x</div>y");
        // </div> closes b implicitly; y lands under ROOT.
        let div = 2;
        let b = t.nav(div, Axis::Children);
        assert_eq!(t.inspect_name(b), "b");
        let y = t.nav(div, Axis::Sister);
        assert_eq!(t.inspect_text(y), b"y");
    }

    #[test]
    fn li_and_table_cells_close_implicitly() {
        let t = parse_html(b"<ul><li>a<li>b</ul><table><tr><td>1<td>2<tr><td>3</table>");
        let ul = 2;
        let li1 = t.nav(ul, Axis::Children);
        let li2 = t.nav(li1, Axis::Sister);
        assert_eq!(t.inspect_name(li2), "li");
        assert_eq!(t.nav(li2, Axis::Sister), 0);
        let table = t.nav(ul, Axis::Sister);
        let tr1 = t.nav(table, Axis::Children);
        let td1 = t.nav(tr1, Axis::Children);
        let td2 = t.nav(td1, Axis::Sister);
        assert_eq!(t.inspect_name(td2), "td");
        let tr2 = t.nav(tr1, Axis::Sister);
        assert_eq!(t.inspect_name(tr2), "tr");
    }

    #[test]
    fn literal_angle_bracket_degrades_to_text() {
        let t = parse_html(b"<p>1 < 2 and 3 <4</p>");
        let text = t.nav(2, Axis::Children);
        assert_eq!(t.inspect_text(text), b"1 < 2 and 3 <4");
    }

    #[test]
    fn parse_is_deterministic() {
        let input = b"<div><p>a<p>b<ul><li>x</ul></div>" as &[u8];
        let a = parse_html(input);
        let b = parse_html(input);
        assert_eq!(a.node_count(), b.node_count());
        for id in 1..=a.node_count() as u32 {
            assert_eq!(a.inspect_type(id), b.inspect_type(id));
            assert_eq!(a.inspect_name(id), b.inspect_name(id));
            assert_eq!(a.nav(id, Axis::Parent), b.nav(id, Axis::Parent));
        }
    }

    #[test]
    fn every_node_reachable_exactly_once() {
        let t = parse_html(
            b"<html><head><title>t</title></head><body><p>a<p>b<br><div>c</div></body></html>",
        );
        let mut seen = vec![false; t.node_count() + 1];
        fn walk(t: &DomTree, id: u32, seen: &mut Vec<bool>) {
            if id == 0 {
                return;
            }
            assert!(!seen[id as usize], "node {id} visited twice");
            seen[id as usize] = true;
            walk(t, t.nav(id, Axis::Children), seen);
            walk(t, t.nav(id, Axis::Sister), seen);
        }
        walk(&t, 1, &mut seen);
        assert!(seen[1..].iter().all(|s| *s));
        // Parent/child consistency.
        for id in 2..=t.node_count() as u32 {
            assert_ne!(t.nav(id, Axis::Parent), 0);
            let parent = t.nav(id, Axis::Parent);
            let mut child = t.nav(parent, Axis::Children);
            let mut found = false;
            while child != 0 {
                if child == id {
                    found = true;
                }
                child = t.nav(child, Axis::Sister);
            }
            assert!(found, "node {id} missing from its parent's child list");
        }
    }

    #[test]
    fn invalid_utf8_passes_through() {
        let t = parse_html(b"<p>\xff\xfe</p>");
        let text = t.nav(2, Axis::Children);
        assert_eq!(t.inspect_text(text), b"\xff\xfe");
    }
}

/// Render an indented, ID-annotated dump of the tree for fixture authoring.
pub fn dump_tree(tree: &DomTree) -> String {
    let mut out = String::new();
    let mut depths: BTreeMap<u32, usize> = BTreeMap::new();
    depths.insert(1, 0);
    for id in 1..=tree.node_count() as u32 {
        let node = tree.get(id).unwrap();
        let depth = if id == 1 {
            0
        } else {
            let d = *depths.get(&node.parent).unwrap_or(&0) + 1;
            depths.insert(id, d);
            d
        };
        depths.insert(id, depth);
        out.push_str(&"  ".repeat(depth));
        out.push_str(&id.to_string());
        out.push(' ');
        out.push_str(node.kind.as_str());
        match node.kind {
            NodeKind::Element => {
                out.push(' ');
                out.push_str(&node.name);
                for (name, value) in &node.attrs {
                    out.push(' ');
                    out.push_str(name);
                    out.push_str("=\"");
                    out.push_str(&String::from_utf8_lossy(value));
                    out.push('"');
                }
            }
            NodeKind::Text | NodeKind::Comment => {
                out.push(' ');
                let preview = String::from_utf8_lossy(&node.text);
                let preview = preview.replace('\n', "\\n").replace('\t', "\\t");
                if preview.len() > 60 {
                    out.push_str(&format!("{:?}…", &preview[..60.min(preview.len())]));
                } else {
                    out.push_str(&format!("{preview:?}"));
                }
            }
            _ => {}
        }
        out.push('\n');
    }
    out
}
