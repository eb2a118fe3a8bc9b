use std::borrow::Cow;
use std::fs;
use std::path::Path;

use quick_xml::escape::resolve_xml_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{AuthorRecord, Lang};
use crate::error::{Error, Result};

/// Labels predicted for one author, as stored in a prediction file.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PredictedAuthor {
    pub author_id: String,
    pub lang: Lang,
    pub variety: Option<String>,
    pub gender: Option<String>,
}

struct Attrs {
    id: Option<String>,
    lang: Option<String>,
    variety: Option<String>,
    gender: Option<String>,
}

fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Xml {
        path: path.to_owned(),
        offset: e.utf8_error().valid_up_to() as u64,
        message: "invalid UTF-8".into(),
    })
}

fn xml_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Xml {
        path: path.to_owned(),
        offset,
        message: message.into(),
    }
}

fn author_attrs(path: &Path, offset: u64, tag: &BytesStart<'_>) -> Result<Attrs> {
    if tag.name().as_ref() != b"author" {
        return Err(xml_err(
            path,
            offset,
            format!(
                "expected <author>, found <{}>",
                String::from_utf8_lossy(tag.name().as_ref())
            ),
        ));
    }
    let mut attrs = Attrs {
        id: None,
        lang: None,
        variety: None,
        gender: None,
    };
    for attr in tag.attributes() {
        let attr = attr.map_err(|e| xml_err(path, offset, e.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|e| xml_err(path, offset, e.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"id" => attrs.id = Some(value),
            b"lang" => attrs.lang = Some(value),
            b"variety" => attrs.variety = Some(value),
            b"gender" => attrs.gender = Some(value),
            _ => {}
        }
    }
    Ok(attrs)
}

fn required(path: &Path, offset: u64, value: Option<String>, name: &str) -> Result<String> {
    value.ok_or_else(|| xml_err(path, offset, format!("<author> lacks the {name} attribute")))
}

/// Parses one PAN author file. Label attributes, when present, are kept.
pub fn read_author_file(path: &Path) -> Result<AuthorRecord> {
    let text = read_utf8(path)?;
    let mut reader = Reader::from_str(&text);
    reader.config_mut().trim_text(false);

    let mut attrs: Option<Attrs> = None;
    let mut documents = Vec::new();
    let mut current: Option<String> = None;
    let mut closed = false;

    loop {
        let offset = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_err(path, reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(tag) => match tag.name().as_ref() {
                b"author" if attrs.is_none() => attrs = Some(author_attrs(path, offset, &tag)?),
                b"documents" if attrs.is_some() && current.is_none() => {}
                b"document" if attrs.is_some() && current.is_none() => current = Some(String::new()),
                other => {
                    return Err(xml_err(
                        path,
                        offset,
                        format!("unexpected element <{}>", String::from_utf8_lossy(other)),
                    ))
                }
            },
            Event::Empty(tag) => match tag.name().as_ref() {
                b"author" if attrs.is_none() => {
                    attrs = Some(author_attrs(path, offset, &tag)?);
                    closed = true;
                }
                b"document" if attrs.is_some() && current.is_none() => documents.push(String::new()),
                b"documents" if attrs.is_some() => {}
                other => {
                    return Err(xml_err(
                        path,
                        offset,
                        format!("unexpected element <{}/>", String::from_utf8_lossy(other)),
                    ))
                }
            },
            Event::End(tag) => match tag.name().as_ref() {
                b"document" => documents.push(
                    current
                        .take()
                        .ok_or_else(|| xml_err(path, offset, "stray </document>"))?,
                ),
                b"author" => closed = true,
                _ => {}
            },
            Event::Text(t) => {
                if let Some(doc) = current.as_mut() {
                    let s = t.xml10_content().map_err(|e| xml_err(path, offset, e.to_string()))?;
                    doc.push_str(&s);
                }
            }
            Event::CData(t) => {
                if let Some(doc) = current.as_mut() {
                    let s = t.decode().map_err(|e| xml_err(path, offset, e.to_string()))?;
                    doc.push_str(&s);
                }
            }
            Event::GeneralRef(r) => {
                if let Some(doc) = current.as_mut() {
                    if let Some(c) = r.resolve_char_ref().map_err(|e| xml_err(path, offset, e.to_string()))? {
                        doc.push(c);
                    } else {
                        let name = r.decode().map_err(|e| xml_err(path, offset, e.to_string()))?;
                        let resolved = resolve_xml_entity(&name)
                            .ok_or_else(|| xml_err(path, offset, format!("unknown entity &{name};")))?;
                        doc.push_str(resolved);
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }

    let end = text.len() as u64;
    let attrs = attrs.ok_or_else(|| xml_err(path, 0, "no <author> element"))?;
    if !closed || current.is_some() {
        return Err(xml_err(path, end, "unexpected end of file"));
    }
    let id = required(path, 0, attrs.id, "id")?;
    let lang: Lang = required(path, 0, attrs.lang, "lang")?
        .parse()
        .map_err(|e: Error| xml_err(path, 0, e.to_string()))?;
    if documents.is_empty() {
        return Err(Error::validation(format!(
            "{}: author {id:?} has no documents",
            path.display()
        )));
    }
    Ok(AuthorRecord {
        author_id: id,
        lang,
        documents,
        gender: attrs.gender,
        variety: attrs.variety,
    })
}

/// Escapes text content; `\r` becomes a character reference so that EOL
/// normalisation on read does not alter it.
fn escape_text(s: &str) -> Cow<'_, str> {
    if !s.contains(['&', '<', '>', '\r']) {
        return Cow::Borrowed(s);
    }
    let mut out = String::with_capacity(s.len() + 8);
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Cow::Owned(out)
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

fn author_tag(id: &str, lang: Lang, variety: Option<&str>, gender: Option<&str>) -> String {
    let mut tag = format!("<author id=\"{}\" lang=\"{}\"", escape_attr(id), lang);
    if let Some(v) = variety {
        tag.push_str(&format!(" variety=\"{}\"", escape_attr(v)));
    }
    if let Some(g) = gender {
        tag.push_str(&format!(" gender=\"{}\"", escape_attr(g)));
    }
    tag
}

pub fn write_author_file(author: &AuthorRecord, path: &Path) -> Result<()> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&author_tag(
        &author.author_id,
        author.lang,
        author.variety.as_deref(),
        author.gender.as_deref(),
    ));
    out.push_str(">\n<documents>\n");
    for doc in &author.documents {
        out.push_str("<document>");
        out.push_str(&escape_text(doc));
        out.push_str("</document>\n");
    }
    out.push_str("</documents>\n</author>\n");
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `<author id=".." lang=".." variety=".." gender=".."/>`.
pub fn write_prediction_file(pred: &PredictedAuthor, path: &Path) -> Result<()> {
    let mut out = author_tag(
        &pred.author_id,
        pred.lang,
        pred.variety.as_deref(),
        pred.gender.as_deref(),
    );
    out.push_str("/>\n");
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_prediction_file(path: &Path) -> Result<PredictedAuthor> {
    let text = read_utf8(path)?;
    let mut reader = Reader::from_str(&text);
    loop {
        let offset = reader.buffer_position();
        let event = reader
            .read_event()
            .map_err(|e| xml_err(path, reader.error_position(), e.to_string()))?;
        match event {
            Event::Empty(tag) | Event::Start(tag) => {
                let attrs = author_attrs(path, offset, &tag)?;
                let lang: Lang = required(path, offset, attrs.lang, "lang")?
                    .parse()
                    .map_err(|e: Error| xml_err(path, offset, e.to_string()))?;
                return Ok(PredictedAuthor {
                    author_id: required(path, offset, attrs.id, "id")?,
                    lang,
                    variety: attrs.variety,
                    gender: attrs.gender,
                });
            }
            Event::Eof => return Err(xml_err(path, text.len() as u64, "no <author> element")),
            _ => {}
        }
    }
}
