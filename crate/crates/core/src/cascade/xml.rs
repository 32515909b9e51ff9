//! Minimal XML reader covering what cascade files contain: a prolog,
//! comments, nested elements with optional attributes, and text. No DTDs,
//! no CDATA, no namespaces. Every element remembers the byte offset of its
//! opening `<` so callers can report located errors.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for XmlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// Concatenated character data directly inside this element.
    pub text: String,
    pub offset: usize,
}

impl Element {
    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }
}

struct Reader<'a> {
    src: &'a [u8],
    pos: usize,
}

pub fn parse(src: &[u8]) -> Result<Element, XmlError> {
    let mut r = Reader { src, pos: 0 };
    r.skip_misc()?;
    if r.pos >= src.len() {
        return Err(r.err(r.pos, "document contains no root element"));
    }
    let root = r.element()?;
    r.skip_misc()?;
    if r.pos < src.len() {
        return Err(r.err(r.pos, "unexpected content after the root element"));
    }
    Ok(root)
}

fn is_name_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.' | b':')
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, message: impl Into<String>) -> XmlError {
        XmlError { offset, message: message.into() }
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s.as_bytes())
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn skip_until(&mut self, end: &str, what: &str) -> Result<(), XmlError> {
        let start = self.pos;
        match find(&self.src[self.pos..], end.as_bytes()) {
            Some(i) => {
                self.pos += i + end.len();
                Ok(())
            }
            None => Err(self.err(start, format!("unexpected end of input inside {what}"))),
        }
    }

    /// Whitespace, comments and processing instructions outside the root.
    fn skip_misc(&mut self) -> Result<(), XmlError> {
        loop {
            self.skip_ws();
            if self.starts_with("<?") {
                self.skip_until("?>", "processing instruction")?;
            } else if self.starts_with("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.starts_with("<!") {
                return Err(self.err(self.pos, "DOCTYPE and CDATA sections are not supported"));
            } else {
                return Ok(());
            }
        }
    }

    fn name(&mut self) -> Result<String, XmlError> {
        let start = self.pos;
        while self.pos < self.src.len() && is_name_byte(self.src[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(start, "expected an element or attribute name"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn element(&mut self) -> Result<Element, XmlError> {
        let offset = self.pos;
        if self.src.get(self.pos) != Some(&b'<') {
            return Err(self.err(offset, "expected '<'"));
        }
        self.pos += 1;
        let mut el = Element { name: self.name()?, offset, ..Default::default() };
        loop {
            self.skip_ws();
            match self.src.get(self.pos) {
                Some(b'/') => {
                    if self.src.get(self.pos + 1) != Some(&b'>') {
                        return Err(self.err(self.pos, "expected '/>'"));
                    }
                    self.pos += 2;
                    return Ok(el);
                }
                Some(b'>') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => {
                    let key = self.name()?;
                    self.skip_ws();
                    if self.src.get(self.pos) != Some(&b'=') {
                        return Err(self.err(self.pos, format!("expected '=' after attribute {key}")));
                    }
                    self.pos += 1;
                    self.skip_ws();
                    let quote = match self.src.get(self.pos) {
                        Some(&q @ (b'"' | b'\'')) => q,
                        _ => return Err(self.err(self.pos, "expected a quoted attribute value")),
                    };
                    self.pos += 1;
                    let start = self.pos;
                    while self.pos < self.src.len() && self.src[self.pos] != quote {
                        self.pos += 1;
                    }
                    if self.pos >= self.src.len() {
                        return Err(self.err(start, "unterminated attribute value"));
                    }
                    let value = unescape(&self.src[start..self.pos], start)?;
                    self.pos += 1;
                    el.attrs.push((key, value));
                }
                None => {
                    return Err(
                        self.err(offset, format!("unexpected end of input inside the start tag of <{}>", el.name))
                    )
                }
            }
        }
        loop {
            let text_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos] != b'<' {
                self.pos += 1;
            }
            if self.pos > text_start {
                el.text.push_str(&unescape(&self.src[text_start..self.pos], text_start)?);
            }
            if self.pos >= self.src.len() {
                return Err(self.err(
                    self.pos,
                    format!("unexpected end of input: element <{}> opened at byte {} is not closed", el.name, offset),
                ));
            }
            if self.starts_with("<!--") {
                self.skip_until("-->", "comment")?;
            } else if self.starts_with("</") {
                let close_at = self.pos;
                self.pos += 2;
                let name = self.name()?;
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b'>') {
                    return Err(self.err(self.pos, "expected '>' to end the closing tag"));
                }
                self.pos += 1;
                if name != el.name {
                    return Err(self.err(close_at, format!("closing tag </{name}> does not match <{}>", el.name)));
                }
                return Ok(el);
            } else if self.starts_with("<?") {
                self.skip_until("?>", "processing instruction")?;
            } else if self.starts_with("<!") {
                return Err(self.err(self.pos, "DOCTYPE and CDATA sections are not supported"));
            } else {
                let child = self.element()?;
                el.children.push(child);
            }
        }
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

fn unescape(raw: &[u8], offset: usize) -> Result<String, XmlError> {
    let s = std::str::from_utf8(raw)
        .map_err(|e| XmlError { offset: offset + e.valid_up_to(), message: "invalid UTF-8".into() })?;
    if !s.contains('&') {
        return Ok(s.to_owned());
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        let end = tail.find(';').ok_or_else(|| XmlError {
            offset: offset + (s.len() - tail.len()),
            message: "unterminated entity reference".into(),
        })?;
        out.push(match &tail[1..end] {
            "lt" => '<',
            "gt" => '>',
            "amp" => '&',
            "quot" => '"',
            "apos" => '\'',
            other => {
                return Err(XmlError {
                    offset: offset + (s.len() - tail.len()),
                    message: format!("unknown entity &{other};"),
                })
            }
        });
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_elements_text_and_attributes() {
        let doc = br#"<?xml version="1.0"?>
<!-- header -->
<root><a type_id="x">  1 2 </a><b/><c>&lt;ok&gt;<!-- note --></c></root>"#;
        let root = parse(doc).unwrap();
        assert_eq!(root.name, "root");
        let a = root.child("a").unwrap();
        assert_eq!(a.attr("type_id"), Some("x"));
        assert_eq!(a.text.trim(), "1 2");
        assert!(root.child("b").unwrap().children.is_empty());
        assert_eq!(root.child("c").unwrap().text, "<ok>");
        assert_eq!(root.offset, find(doc, b"<root>").unwrap());
    }

    #[test]
    fn truncation_names_the_open_element() {
        let err = parse(b"<root><stages><_>1</_>").unwrap_err();
        assert!(err.message.contains("<stages>"), "{}", err.message);
    }

    #[test]
    fn mismatched_close_is_located() {
        let err = parse(b"<a><b></a>").unwrap_err();
        assert_eq!(err.offset, 6);
    }
}
