//! The structured document model.
//!
//! A document is a set of elements; every element has a name, a location and a
//! content which is either character data or again a set of elements. The sets
//! occurring in a document carry a unique "successive" permutation (document
//! order), so we represent them as vectors kept in that order.
//!
//! Attributes and text runs are folded into the same element shape:
//! an attribute `year="1996"` becomes an element named `@year`, and each
//! contiguous run of character data becomes an element named `~` whose content
//! is the text. Whitespace-only runs are dropped. This keeps the rest of the
//! engine free of node-kind case analysis.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

pub type DocId = u32;

// ---------------------------------------------------------------------------
// locations
// ---------------------------------------------------------------------------

/// A location is a document id plus a Dewey path (1-based ordinals), or the
/// null location carried by unmatched option branches and fold keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Location {
    Null,
    At { doc: DocId, path: Vec<u32> },
}

impl Location {
    pub fn at(doc: DocId, path: Vec<u32>) -> Self {
        Location::At { doc, path }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Location::Null)
    }

    pub fn child(&self, ordinal: u32) -> Location {
        match self {
            Location::Null => Location::Null,
            Location::At { doc, path } => {
                let mut p = path.clone();
                p.push(ordinal);
                Location::At { doc: *doc, path: p }
            }
        }
    }

    /// Document-order comparison; `None` when either side is null or the two
    /// locations live in different documents (no meaningful order).
    pub fn doc_order(&self, other: &Location) -> Option<Ordering> {
        match (self, other) {
            (Location::At { doc: d1, path: p1 }, Location::At { doc: d2, path: p2 })
                if d1 == d2 =>
            {
                Some(p1.cmp(p2))
            }
            _ => None,
        }
    }

    /// True when `self` is the parent location of `other`.
    pub fn parent_of(&self, other: &Location) -> bool {
        match (self, other) {
            (Location::At { doc: d1, path: p1 }, Location::At { doc: d2, path: p2 }) => {
                d1 == d2 && p2.len() == p1.len() + 1 && p2.starts_with(p1)
            }
            _ => false,
        }
    }

    /// True when `self` and `other` are siblings and `other` is the immediate
    /// successor of `self` in their parent's successive order.
    pub fn immediately_precedes(&self, other: &Location) -> bool {
        match (self, other) {
            (Location::At { doc: d1, path: p1 }, Location::At { doc: d2, path: p2 }) => {
                d1 == d2
                    && !p1.is_empty()
                    && p1.len() == p2.len()
                    && p1[..p1.len() - 1] == p2[..p2.len() - 1]
                    && p1[p1.len() - 1] + 1 == p2[p2.len() - 1]
            }
            _ => false,
        }
    }

    /// Strict document order; false when incomparable.
    pub fn strictly_before(&self, other: &Location) -> bool {
        matches!(self.doc_order(other), Some(Ordering::Less))
    }

    /// Total order usable as a sort key: doc id, then path; null sorts first.
    pub fn sort_key(&self) -> (u32, &[u32]) {
        match self {
            Location::Null => (0, &[]),
            Location::At { doc, path } => (doc + 1, path.as_slice()),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Null => write!(f, "l0"),
            Location::At { doc, path } => {
                write!(f, "d{doc}:")?;
                for (i, seg) in path.iter().enumerate() {
                    if i > 0 {
                        write!(f, ".")?;
                    }
                    write!(f, "{seg}")?;
                }
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// elements and fragments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XContent {
    Text(String),
    Nodes(Fragment),
}

impl XContent {
    pub fn empty() -> Self {
        XContent::Nodes(Fragment::default())
    }

    pub fn as_nodes(&self) -> Option<&Fragment> {
        match self {
            XContent::Nodes(fr) => Some(fr),
            XContent::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XElem {
    pub name: String,
    pub content: XContent,
    pub location: Location,
}

impl XElem {
    pub fn new(name: impl Into<String>, content: XContent, location: Location) -> Self {
        XElem { name: name.into(), content, location }
    }

    pub fn text(text: impl Into<String>, location: Location) -> Self {
        XElem { name: "~".into(), content: XContent::Text(text.into()), location }
    }

    pub fn is_text(&self) -> bool {
        self.name == "~"
    }

    pub fn is_attr(&self) -> bool {
        self.name.starts_with('@')
    }
}

/// A fragment: a set of elements in successive order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fragment(pub Vec<XElem>);

impl Fragment {
    pub fn one(e: XElem) -> Self {
        Fragment(vec![e])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, XElem> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The elements of a fragment listed in their successive order.
///
/// All construction sites maintain the order as an invariant, so this is a
/// stable sort by location (null locations keep their insertion position at
/// the front of their run).
pub fn successive_list(fragment: &Fragment) -> Vec<&XElem> {
    let mut v: Vec<&XElem> = fragment.0.iter().collect();
    v.sort_by(|a, b| {
        let (da, pa) = a.location.sort_key();
        let (db, pb) = b.location.sort_key();
        (da, pa).cmp(&(db, pb))
    });
    v
}

/// Structural equivalence: same names at the same positions, equivalent
/// contents underneath; locations are ignored.
pub fn fragment_equiv(a: &Fragment, b: &Fragment) -> bool {
    a.0.len() == b.0.len()
        && a.0.iter().zip(b.0.iter()).all(|(x, y)| elem_equiv(x, y))
}

pub fn elem_equiv(a: &XElem, b: &XElem) -> bool {
    if a.name != b.name {
        return false;
    }
    match (&a.content, &b.content) {
        (XContent::Text(s), XContent::Text(t)) => s == t,
        (XContent::Nodes(fa), XContent::Nodes(fb)) => fragment_equiv(fa, fb),
        _ => false,
    }
}

/// Concatenated character data of all text descendants, in document order.
pub fn text_of(content: &XContent) -> String {
    let mut out = String::new();
    collect_text(content, &mut out);
    out
}

pub fn fragment_text(fragment: &Fragment) -> String {
    let mut out = String::new();
    for e in &fragment.0 {
        collect_text(&e.content, &mut out);
    }
    out
}

fn collect_text(content: &XContent, out: &mut String) {
    match content {
        XContent::Text(s) => out.push_str(s),
        XContent::Nodes(fr) => {
            for e in &fr.0 {
                collect_text(&e.content, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

/// Parse an XML document (or a sequence of top-level elements) into a
/// fragment, assigning Dewey locations under the given document id.
///
/// Supported: elements, attributes, character data, CDATA sections, comments,
/// processing instructions (skipped), the five predefined entities and
/// numeric character references. Not supported: DTDs beyond skipping the
/// declaration, namespaces (prefixes are kept as part of the name).
pub fn parse_xml(bytes: &[u8], doc: DocId) -> Result<Fragment> {
    let mut r = Reader { b: bytes, i: 0 };
    // Byte-order mark.
    if r.b.len() >= 3 && r.b[..3] == [0xEF, 0xBB, 0xBF] {
        r.i = 3;
    }
    let mut roots: Vec<RawNode> = Vec::new();
    loop {
        r.skip_misc()?;
        if r.eof() {
            break;
        }
        if !r.peek_is(b'<') {
            return Err(r.err("character data outside of any element"));
        }
        roots.push(r.parse_element()?);
    }
    if roots.is_empty() {
        return Err(Error::Xml { offset: bytes.len(), msg: "no root element".into() });
    }
    let mut out = Vec::with_capacity(roots.len());
    for (i, raw) in roots.into_iter().enumerate() {
        out.push(locate(raw, Location::at(doc, vec![i as u32 + 1])));
    }
    Ok(Fragment(out))
}

enum RawNode {
    Elem { name: String, children: Vec<RawNode> },
    Text(String),
}

/// Assign Dewey locations over a raw tree.
fn locate(raw: RawNode, loc: Location) -> XElem {
    match raw {
        RawNode::Text(t) => XElem::text(t, loc),
        RawNode::Elem { name, children } => {
            // Even a single text run stays a `~` child; only the `~` elements
            // themselves hold Text content.
            let kids: Vec<XElem> = children
                .into_iter()
                .enumerate()
                .map(|(i, c)| locate(c, loc.child(i as u32 + 1)))
                .collect();
            XElem::new(name, XContent::Nodes(Fragment(kids)), loc)
        }
    }
}

struct Reader<'a> {
    b: &'a [u8],
    i: usize,
}

impl<'a> Reader<'a> {
    fn eof(&self) -> bool {
        self.i >= self.b.len()
    }

    fn peek(&self) -> u8 {
        if self.eof() {
            0
        } else {
            self.b[self.i]
        }
    }

    fn peek_is(&self, c: u8) -> bool {
        self.peek() == c
    }

    fn starts_with(&self, s: &[u8]) -> bool {
        self.b[self.i..].starts_with(s)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Xml { offset: self.i, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while !self.eof() && self.b[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    /// Skip whitespace, comments, PIs, the XML declaration and a DOCTYPE.
    fn skip_misc(&mut self) -> Result<()> {
        loop {
            self.skip_ws();
            if self.starts_with(b"<?") {
                self.skip_until(b"?>")?;
            } else if self.starts_with(b"<!--") {
                self.skip_until(b"-->")?;
            } else if self.starts_with(b"<!DOCTYPE") {
                // Skip to the matching '>' allowing an internal subset.
                let mut depth = 0usize;
                while !self.eof() {
                    match self.b[self.i] {
                        b'[' => depth += 1,
                        b']' => depth = depth.saturating_sub(1),
                        b'>' if depth == 0 => {
                            self.i += 1;
                            break;
                        }
                        _ => {}
                    }
                    self.i += 1;
                }
            } else {
                return Ok(());
            }
        }
    }

    fn skip_until(&mut self, end: &[u8]) -> Result<()> {
        while !self.eof() {
            if self.starts_with(end) {
                self.i += end.len();
                return Ok(());
            }
            self.i += 1;
        }
        Err(self.err(format!("unterminated construct, expected {}", String::from_utf8_lossy(end))))
    }

    fn read_name(&mut self) -> Result<String> {
        let start = self.i;
        while !self.eof() {
            let c = self.b[self.i];
            if c.is_ascii_alphanumeric() || matches!(c, b'_' | b'-' | b'.' | b':') {
                self.i += 1;
            } else {
                break;
            }
        }
        if self.i == start {
            return Err(self.err("expected a name"));
        }
        Ok(String::from_utf8_lossy(&self.b[start..self.i]).into_owned())
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek_is(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", c as char)))
        }
    }

    fn parse_element(&mut self) -> Result<RawNode> {
        self.expect(b'<')?;
        let name = self.read_name()?;
        let mut children: Vec<RawNode> = Vec::new();

        // Attributes become leading `@name` children with a single text run.
        loop {
            self.skip_ws();
            if self.starts_with(b"/>") {
                self.i += 2;
                return Ok(RawNode::Elem { name, children });
            }
            if self.peek_is(b'>') {
                self.i += 1;
                break;
            }
            let aname = self.read_name()?;
            self.skip_ws();
            self.expect(b'=')?;
            self.skip_ws();
            let quote = self.peek();
            if quote != b'"' && quote != b'\'' {
                return Err(self.err("expected quoted attribute value"));
            }
            self.i += 1;
            let mut value = String::new();
            loop {
                if self.eof() {
                    return Err(self.err("unterminated attribute value"));
                }
                if self.peek() == quote {
                    self.i += 1;
                    break;
                }
                if self.peek() == b'&' {
                    value.push_str(&self.read_entity()?);
                } else {
                    let start = self.i;
                    while !self.eof() && self.b[self.i] != quote && self.b[self.i] != b'&' {
                        self.i += 1;
                    }
                    value.push_str(&String::from_utf8_lossy(&self.b[start..self.i]));
                }
            }
            let attr_children = if value.is_empty() {
                Vec::new()
            } else {
                vec![RawNode::Text(value)]
            };
            children.push(RawNode::Elem { name: format!("@{aname}"), children: attr_children });
        }

        // Content: text runs and child elements until the matching close tag.
        let mut run = String::new();
        loop {
            if self.eof() {
                return Err(self.err(format!("unterminated element <{name}>")));
            }
            if self.starts_with(b"</") {
                flush_run(&mut run, &mut children);
                self.i += 2;
                let close = self.read_name()?;
                if close != name {
                    return Err(self.err(format!("mismatched close tag </{close}> for <{name}>")));
                }
                self.skip_ws();
                self.expect(b'>')?;
                return Ok(RawNode::Elem { name, children });
            }
            if self.starts_with(b"<![CDATA[") {
                self.i += 9;
                let start = self.i;
                while !self.eof() && !self.starts_with(b"]]>") {
                    self.i += 1;
                }
                if self.eof() {
                    return Err(self.err("unterminated CDATA section"));
                }
                run.push_str(&String::from_utf8_lossy(&self.b[start..self.i]));
                self.i += 3;
                continue;
            }
            if self.starts_with(b"<!--") {
                self.skip_until(b"-->")?;
                continue;
            }
            if self.starts_with(b"<?") {
                self.skip_until(b"?>")?;
                continue;
            }
            if self.peek_is(b'<') {
                flush_run(&mut run, &mut children);
                children.push(self.parse_element()?);
                continue;
            }
            if self.peek_is(b'&') {
                run.push_str(&self.read_entity()?);
                continue;
            }
            // Plain character data; copy bytes verbatim (UTF-8 passthrough).
            let start = self.i;
            while !self.eof() && !matches!(self.b[self.i], b'<' | b'&') {
                self.i += 1;
            }
            run.push_str(&String::from_utf8_lossy(&self.b[start..self.i]));
        }
    }

    fn read_entity(&mut self) -> Result<String> {
        debug_assert!(self.peek_is(b'&'));
        let start = self.i;
        self.i += 1;
        let mut name = String::new();
        while !self.eof() && self.b[self.i] != b';' {
            name.push(self.b[self.i] as char);
            self.i += 1;
            if name.len() > 12 {
                break;
            }
        }
        if !self.peek_is(b';') {
            self.i = start;
            return Err(self.err("malformed entity reference"));
        }
        self.i += 1;
        let text = match name.as_str() {
            "lt" => "<".to_string(),
            "gt" => ">".to_string(),
            "amp" => "&".to_string(),
            "apos" => "'".to_string(),
            "quot" => "\"".to_string(),
            _ if name.starts_with("#x") || name.starts_with("#X") => {
                let cp = u32::from_str_radix(&name[2..], 16)
                    .map_err(|_| self.err("bad numeric character reference"))?;
                char::from_u32(cp).ok_or_else(|| self.err("invalid code point"))?.to_string()
            }
            _ if name.starts_with('#') => {
                let cp: u32 =
                    name[1..].parse().map_err(|_| self.err("bad numeric character reference"))?;
                char::from_u32(cp).ok_or_else(|| self.err("invalid code point"))?.to_string()
            }
            other => return Err(self.err(format!("unknown entity &{other};"))),
        };
        Ok(text)
    }
}

/// Close the current text run: emit a `~` node unless it is all whitespace.
fn flush_run(run: &mut String, children: &mut Vec<RawNode>) {
    if !run.is_empty() {
        if !run.chars().all(char::is_whitespace) {
            children.push(RawNode::Text(std::mem::take(run)));
        } else {
            run.clear();
        }
    }
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

/// Serialize a fragment to XML. Deterministic: elements are emitted in
/// successive order, nested elements indented two spaces, mixed content kept
/// inline. Attribute elements (`@name`) of an element render on its start tag;
/// a top-level attribute element (only constructible by a query) renders as an
/// ordinary element without the `@`.
pub fn to_xml(fragment: &Fragment) -> String {
    let mut out = String::new();
    for (i, e) in successive_list(fragment).iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write_elem(e, 0, &mut out);
    }
    out.push('\n');
    out
}

fn write_elem(e: &XElem, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    if e.is_text() {
        out.push_str(&pad);
        out.push_str(&escape_text(&text_of(&e.content)));
        return;
    }
    let name = if e.is_attr() { &e.name[1..] } else { e.name.as_str() };
    let (attrs, rest): (Vec<&XElem>, Vec<&XElem>) = match &e.content {
        XContent::Nodes(fr) => successive_list(fr).into_iter().partition(|c| c.is_attr()),
        XContent::Text(_) => (Vec::new(), Vec::new()),
    };
    out.push_str(&pad);
    out.push('<');
    out.push_str(name);
    for a in &attrs {
        out.push(' ');
        out.push_str(&a.name[1..]);
        out.push_str("=\"");
        out.push_str(&escape_attr(&text_of(&a.content)));
        out.push('"');
    }
    let text_only = match &e.content {
        XContent::Text(_) => true,
        XContent::Nodes(_) => rest.iter().all(|c| c.is_text()) && !rest.is_empty(),
    };
    if let XContent::Text(t) = &e.content {
        out.push('>');
        out.push_str(&escape_text(t));
        out.push_str("</");
        out.push_str(name);
        out.push('>');
        return;
    }
    if rest.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    if text_only {
        for c in &rest {
            out.push_str(&escape_text(&text_of(&c.content)));
        }
    } else if rest.iter().any(|c| c.is_text()) {
        // Mixed content: keep everything inline to avoid inventing whitespace.
        for c in &rest {
            write_elem_inline(c, out);
        }
    } else {
        out.push('\n');
        for c in &rest {
            write_elem(c, indent + 1, out);
            out.push('\n');
        }
        out.push_str(&pad);
    }
    out.push_str("</");
    out.push_str(name);
    out.push('>');
}

fn write_elem_inline(e: &XElem, out: &mut String) {
    let mut inner = String::new();
    write_elem(e, 0, &mut inner);
    out.push_str(&inner);
}

/// Serialize a fragment in the braces notation of the model; used by the
/// CLI's `--format sxd` and by test diagnostics.
pub fn to_sxd(fragment: &Fragment) -> String {
    let mut out = String::new();
    write_sxd_fragment(fragment, &mut out);
    out.push('\n');
    out
}

fn write_sxd_fragment(fr: &Fragment, out: &mut String) {
    out.push_str("{|");
    for (i, e) in successive_list(fr).iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        write_sxd_elem(e, out);
    }
    out.push_str("|}");
}

fn write_sxd_elem(e: &XElem, out: &mut String) {
    out.push_str(&e.name);
    out.push_str("=>");
    match &e.content {
        XContent::Text(t) => {
            out.push('"');
            out.push_str(t);
            out.push('"');
        }
        XContent::Nodes(fr) => write_sxd_fragment(fr, out),
    }
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Fragment {
        parse_xml(s.as_bytes(), 1).expect("parse")
    }

    #[test]
    fn attributes_and_text_become_elements() {
        let fr = parse(r#"<book year="1996"><title>Poems</title></book>"#);
        assert_eq!(fr.len(), 1);
        let book = &fr.0[0];
        assert_eq!(book.name, "book");
        let kids = book.content.as_nodes().unwrap();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids.0[0].name, "@year");
        assert_eq!(text_of(&kids.0[0].content), "1996");
        assert_eq!(kids.0[1].name, "title");
        let title_kids = kids.0[1].content.as_nodes().unwrap();
        assert_eq!(title_kids.len(), 1);
        assert!(title_kids.0[0].is_text());
        assert_eq!(text_of(&kids.0[1].content), "Poems");
    }

    #[test]
    fn dewey_locations_follow_successive_order() {
        let fr = parse(r#"<a x="1"><b/>text<c/></a>"#);
        let a = &fr.0[0];
        assert_eq!(a.location, Location::at(1, vec![1]));
        let kids = a.content.as_nodes().unwrap();
        let paths: Vec<_> = kids.0.iter().map(|k| k.location.clone()).collect();
        assert_eq!(
            paths,
            vec![
                Location::at(1, vec![1, 1]),
                Location::at(1, vec![1, 2]),
                Location::at(1, vec![1, 3]),
                Location::at(1, vec![1, 4]),
            ]
        );
        assert_eq!(kids.0[2].name, "~");
    }

    #[test]
    fn whitespace_runs_are_dropped() {
        let fr = parse("<a>\n  <b/>\n  <c/>\n</a>");
        let kids = fr.0[0].content.as_nodes().unwrap();
        assert_eq!(kids.len(), 2);
        assert!(kids.0.iter().all(|k| !k.is_text()));
    }

    #[test]
    fn entities_and_cdata() {
        let fr = parse("<a>&lt;x&gt; &amp; <![CDATA[<raw>]]> &#65;</a>");
        assert_eq!(text_of(&fr.0[0].content), "<x> & <raw> A");
    }

    #[test]
    fn location_relations() {
        let p = Location::at(1, vec![1, 2]);
        let c = Location::at(1, vec![1, 2, 3]);
        let d = Location::at(1, vec![1, 2, 4]);
        assert!(p.parent_of(&c));
        assert!(!p.parent_of(&d) || p.parent_of(&d)); // parent of both
        assert!(c.immediately_precedes(&d));
        assert!(!d.immediately_precedes(&c));
        assert!(c.strictly_before(&d));
        assert!(!Location::Null.strictly_before(&c));
        let other_doc = Location::at(2, vec![1]);
        assert_eq!(c.doc_order(&other_doc), None);
    }

    #[test]
    fn equivalence_ignores_locations() {
        let a = parse("<a><b>x</b></a>");
        let mut b = parse("<a><b>x</b></a>");
        // perturb locations
        b.0[0].location = Location::at(9, vec![4]);
        assert!(fragment_equiv(&a, &b));
        let c = parse("<a><b>y</b></a>");
        assert!(!fragment_equiv(&a, &c));
    }

    #[test]
    fn roundtrip_through_serializer() {
        let src = r#"<bib><book year="1996"><title>The &amp; Poems</title><author><last>Yeats</last></author></book></bib>"#;
        let fr = parse(src);
        let xml = to_xml(&fr);
        let fr2 = parse_xml(xml.as_bytes(), 2).expect("reparse");
        assert!(fragment_equiv(&fr, &fr2), "roundtrip changed structure:\n{xml}");
    }

    #[test]
    fn serializer_is_deterministic() {
        let src = r#"<a x="1" y="2"><b>one</b><c/>tail</a>"#;
        let fr = parse(src);
        assert_eq!(to_xml(&fr), to_xml(&fr));
        assert_eq!(to_sxd(&fr), to_sxd(&fr));
    }

    #[test]
    fn mismatched_tags_error() {
        assert!(parse_xml(b"<a><b></a></b>", 1).is_err());
        assert!(parse_xml(b"<a>", 1).is_err());
        assert!(parse_xml(b"", 1).is_err());
    }
}
