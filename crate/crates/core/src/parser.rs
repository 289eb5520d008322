//! The `.rdn` reaction-network text format.
//!
//! ```text
//! # comment
//! species A1 A2 A3 A4
//! diffusion A1=1 A2=1 A3=1 A4=1
//! reaction A1 + A3 <-> A2 + A4 : kf=1 kb=1
//! reaction 2 A1 <-> 0 : kf=0.5 kb=2
//! ```
//!
//! Exactly one `species` line, which must come first, exactly one
//! `diffusion` line naming every species once, and at least one `reaction`
//! line. Terms are `Name`, `k Name` or `k*Name` with an integer `k >= 1`;
//! `0` stands for an empty side.

use std::fmt;

use thiserror::Error;

use crate::network::{Reaction, ReactionNetwork};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind} at line {line}, column {column}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownDirective(String),
    MissingSpecies,
    DuplicateSpeciesLine,
    DuplicateDiffusionLine,
    MissingDiffusion,
    MissingReaction,
    DeclarationOrder(&'static str),
    InvalidName(String),
    DuplicateSpecies(String),
    UnknownSpecies(String),
    DiffusionMissingFor(String),
    DuplicateDiffusion(String),
    InvalidNumber(String),
    NonPositive(String),
    BadCoefficient(String),
    MissingArrow,
    MissingRates,
    MissingRate(&'static str),
    DuplicateRate(String),
    Malformed(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ParseErrorKind::*;
        match self {
            UnknownDirective(w) => write!(f, "unknown directive `{w}`"),
            MissingSpecies => write!(f, "missing `species` line"),
            DuplicateSpeciesLine => write!(f, "more than one `species` line"),
            DuplicateDiffusionLine => write!(f, "more than one `diffusion` line"),
            MissingDiffusion => write!(f, "missing `diffusion` line"),
            MissingReaction => write!(f, "no `reaction` line"),
            DeclarationOrder(what) => write!(f, "`{what}` line before `species` line"),
            InvalidName(n) => write!(f, "invalid species name `{n}`"),
            DuplicateSpecies(n) => write!(f, "duplicate species {n}"),
            UnknownSpecies(n) => write!(f, "unknown species {n}"),
            DiffusionMissingFor(n) => write!(f, "no diffusion coefficient for {n}"),
            DuplicateDiffusion(n) => write!(f, "diffusion of {n} given twice"),
            InvalidNumber(s) => write!(f, "invalid number `{s}`"),
            NonPositive(what) => write!(f, "{what} must be strictly positive"),
            BadCoefficient(s) => write!(f, "invalid stoichiometric coefficient `{s}`"),
            MissingArrow => write!(f, "expected `<->`"),
            MissingRates => write!(f, "expected `: kf=<rate> kb=<rate>`"),
            MissingRate(which) => write!(f, "missing rate {which}"),
            DuplicateRate(which) => write!(f, "rate {which} given twice"),
            Malformed(msg) => write!(f, "malformed line: {msg}"),
        }
    }
}

/// A slice of the current line together with its byte offset.
#[derive(Clone, Copy)]
struct Span<'a> {
    text: &'a str,
    offset: usize,
}

impl<'a> Span<'a> {
    fn trim(self) -> Self {
        let start = self.text.len() - self.text.trim_start().len();
        Span {
            text: self.text.trim(),
            offset: self.offset + start,
        }
    }

    fn split_once(self, pat: &str) -> Option<(Span<'a>, Span<'a>)> {
        let idx = self.text.find(pat)?;
        Some((
            Span {
                text: &self.text[..idx],
                offset: self.offset,
            },
            Span {
                text: &self.text[idx + pat.len()..],
                offset: self.offset + idx + pat.len(),
            },
        ))
    }

    fn split(self, sep: char) -> impl Iterator<Item = Span<'a>> {
        let mut offset = self.offset;
        self.text.split(sep).map(move |piece| {
            let span = Span {
                text: piece,
                offset,
            };
            offset += piece.len() + sep.len_utf8();
            span
        })
    }

    fn words(self) -> impl Iterator<Item = Span<'a>> {
        self.text.split_whitespace().map(move |w| {
            // sub-slice of self.text, so pointer arithmetic yields the offset
            let start = w.as_ptr() as usize - self.text.as_ptr() as usize;
            Span {
                text: w,
                offset: self.offset + start,
            }
        })
    }
}

struct LineCtx<'a> {
    number: usize,
    raw: &'a str,
}

impl LineCtx<'_> {
    fn err(&self, at: usize, kind: ParseErrorKind) -> ParseError {
        let at = at.min(self.raw.len());
        let column = self.raw[..floor_boundary(self.raw, at)].chars().count() + 1;
        ParseError {
            line: self.number,
            column,
            kind,
        }
    }
}

fn floor_boundary(s: &str, mut i: usize) -> usize {
    while !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_positive(ctx: &LineCtx, span: Span, what: &str) -> Result<f64, ParseError> {
    let value: f64 = span
        .text
        .parse()
        .map_err(|_| ctx.err(span.offset, ParseErrorKind::InvalidNumber(span.text.to_string())))?;
    if !value.is_finite() {
        return Err(ctx.err(span.offset, ParseErrorKind::InvalidNumber(span.text.to_string())));
    }
    if value <= 0.0 {
        return Err(ctx.err(span.offset, ParseErrorKind::NonPositive(what.to_string())));
    }
    Ok(value)
}

fn parse_side(ctx: &LineCtx, side: Span, species: &[String]) -> Result<Vec<u32>, ParseError> {
    let side = side.trim();
    let mut coeffs = vec![0u32; species.len()];
    if side.text == "0" {
        return Ok(coeffs);
    }
    if side.text.is_empty() {
        return Err(ctx.err(side.offset, ParseErrorKind::Malformed("empty reaction side (use `0`)".into())));
    }
    for term in side.split('+') {
        let term = term.trim();
        if term.text.is_empty() {
            return Err(ctx.err(term.offset, ParseErrorKind::Malformed("empty term".into())));
        }
        let (coef, name) = if let Some((k, n)) = term.split_once("*") {
            (Some(k.trim()), n.trim())
        } else {
            let mut words = term.words();
            let first = words.next().expect("non-empty term");
            match (words.next(), words.next()) {
                (None, _) => (None, first),
                (Some(second), None) => (Some(first), second),
                (Some(_), Some(extra)) => {
                    return Err(ctx.err(extra.offset, ParseErrorKind::Malformed("expected `k Name`".into())))
                }
            }
        };
        let k = match coef {
            None => 1,
            Some(c) => match c.text.parse::<u32>() {
                Ok(k) if k >= 1 => k,
                _ => return Err(ctx.err(c.offset, ParseErrorKind::BadCoefficient(c.text.to_string()))),
            },
        };
        if !is_identifier(name.text) {
            return Err(ctx.err(name.offset, ParseErrorKind::InvalidName(name.text.to_string())));
        }
        let idx = species
            .iter()
            .position(|s| s == name.text)
            .ok_or_else(|| ctx.err(name.offset, ParseErrorKind::UnknownSpecies(name.text.to_string())))?;
        coeffs[idx] = coeffs[idx]
            .checked_add(k)
            .ok_or_else(|| ctx.err(name.offset, ParseErrorKind::BadCoefficient(name.text.to_string())))?;
    }
    Ok(coeffs)
}

fn parse_reaction(ctx: &LineCtx, body: Span, species: &[String]) -> Result<Reaction, ParseError> {
    let (scheme, rates) = body
        .split_once(":")
        .ok_or_else(|| ctx.err(body.offset + body.text.len(), ParseErrorKind::MissingRates))?;
    let (lhs, rhs) = scheme
        .split_once("<->")
        .ok_or_else(|| ctx.err(scheme.offset, ParseErrorKind::MissingArrow))?;
    let reactants = parse_side(ctx, lhs, species)?;
    let products = parse_side(ctx, rhs, species)?;

    let mut kf = None;
    let mut kb = None;
    for word in rates.words() {
        let (key, value) = word
            .split_once("=")
            .ok_or_else(|| ctx.err(word.offset, ParseErrorKind::Malformed(format!("expected key=value, got `{}`", word.text))))?;
        let slot = match key.text {
            "kf" => &mut kf,
            "kb" => &mut kb,
            other => {
                return Err(ctx.err(key.offset, ParseErrorKind::Malformed(format!("unknown rate key `{other}`"))))
            }
        };
        if slot.is_some() {
            return Err(ctx.err(key.offset, ParseErrorKind::DuplicateRate(key.text.to_string())));
        }
        *slot = Some(parse_positive(ctx, value, &format!("rate {}", key.text))?);
    }
    let end = rates.offset + rates.text.len();
    let kf = kf.ok_or_else(|| ctx.err(end, ParseErrorKind::MissingRate("kf")))?;
    let kb = kb.ok_or_else(|| ctx.err(end, ParseErrorKind::MissingRate("kb")))?;
    Ok(Reaction::new(reactants, products, kf, kb))
}

/// Parses `.rdn` text. Never panics; every failure carries a line and column.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    let mut species: Option<Vec<String>> = None;
    let mut diffusion: Option<Vec<f64>> = None;
    let mut reactions = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx {
            number: idx + 1,
            raw,
        };
        last_line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let line = Span {
            text: content,
            offset: 0,
        };
        let mut words = line.words();
        let Some(keyword) = words.next() else {
            continue;
        };
        let rest = Span {
            text: &content[keyword.offset + keyword.text.len()..],
            offset: keyword.offset + keyword.text.len(),
        };
        match keyword.text {
            "species" => {
                if species.is_some() {
                    return Err(ctx.err(keyword.offset, ParseErrorKind::DuplicateSpeciesLine));
                }
                let mut names: Vec<String> = Vec::new();
                for w in rest.words() {
                    if !is_identifier(w.text) {
                        return Err(ctx.err(w.offset, ParseErrorKind::InvalidName(w.text.to_string())));
                    }
                    if names.iter().any(|n| n == w.text) {
                        return Err(ctx.err(w.offset, ParseErrorKind::DuplicateSpecies(w.text.to_string())));
                    }
                    names.push(w.text.to_string());
                }
                if names.is_empty() {
                    return Err(ctx.err(rest.offset, ParseErrorKind::Malformed("no species listed".into())));
                }
                species = Some(names);
            }
            "diffusion" => {
                let Some(names) = species.as_ref() else {
                    return Err(ctx.err(keyword.offset, ParseErrorKind::DeclarationOrder("diffusion")));
                };
                if diffusion.is_some() {
                    return Err(ctx.err(keyword.offset, ParseErrorKind::DuplicateDiffusionLine));
                }
                let mut values: Vec<Option<f64>> = vec![None; names.len()];
                for w in rest.words() {
                    let (name, value) = w.split_once("=").ok_or_else(|| {
                        ctx.err(w.offset, ParseErrorKind::Malformed(format!("expected Name=value, got `{}`", w.text)))
                    })?;
                    let i = names
                        .iter()
                        .position(|n| n == name.text)
                        .ok_or_else(|| ctx.err(name.offset, ParseErrorKind::UnknownSpecies(name.text.to_string())))?;
                    if values[i].is_some() {
                        return Err(ctx.err(name.offset, ParseErrorKind::DuplicateDiffusion(name.text.to_string())));
                    }
                    values[i] = Some(parse_positive(&ctx, value, &format!("diffusion of {}", name.text))?);
                }
                let mut d = Vec::with_capacity(names.len());
                for (name, v) in names.iter().zip(values) {
                    d.push(v.ok_or_else(|| {
                        ctx.err(content.len(), ParseErrorKind::DiffusionMissingFor(name.clone()))
                    })?);
                }
                diffusion = Some(d);
            }
            "reaction" => {
                let Some(names) = species.as_ref() else {
                    return Err(ctx.err(keyword.offset, ParseErrorKind::DeclarationOrder("reaction")));
                };
                reactions.push(parse_reaction(&ctx, rest, names)?);
            }
            other => {
                return Err(ctx.err(keyword.offset, ParseErrorKind::UnknownDirective(other.to_string())));
            }
        }
    }

    let at_end = |kind| ParseError {
        line: last_line.max(1),
        column: 1,
        kind,
    };
    let species = species.ok_or_else(|| at_end(ParseErrorKind::MissingSpecies))?;
    let diffusion = diffusion.ok_or_else(|| at_end(ParseErrorKind::MissingDiffusion))?;
    if reactions.is_empty() {
        return Err(at_end(ParseErrorKind::MissingReaction));
    }
    Ok(ReactionNetwork {
        species,
        reactions,
        diffusion,
    })
}

fn write_side(out: &mut String, coeffs: &[u32], species: &[String]) {
    let mut first = true;
    for (k, name) in coeffs.iter().zip(species) {
        if *k == 0 {
            continue;
        }
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if *k > 1 {
            out.push_str(&format!("{k} "));
        }
        out.push_str(name);
    }
    if first {
        out.push('0');
    }
}

/// Canonical `.rdn` text; `parse_network(&serialize_network(n)) == Ok(n)`.
pub fn serialize_network(net: &ReactionNetwork) -> String {
    let mut out = String::new();
    out.push_str("species");
    for s in &net.species {
        out.push(' ');
        out.push_str(s);
    }
    out.push_str("\ndiffusion");
    for (s, d) in net.species.iter().zip(&net.diffusion) {
        out.push_str(&format!(" {s}={d}"));
    }
    out.push('\n');
    for r in &net.reactions {
        out.push_str("reaction ");
        write_side(&mut out, &r.reactants, &net.species);
        out.push_str(" <-> ");
        write_side(&mut out, &r.products, &net.species);
        out.push_str(&format!(" : kf={} kb={}\n", r.kf, r.kb));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: &str = "species A1 A2 A3 A4\n\
                        diffusion A1=1 A2=1 A3=1 A4=1\n\
                        reaction A1 + A3 <-> A2 + A4 : kf=1 kb=1\n";

    #[test]
    fn parses_four_species() {
        let net = parse_network(FOUR).unwrap();
        assert_eq!(net, ReactionNetwork::four_species(1.0, 1.0, [1.0; 4]));
        assert!(net.is_four_species());
    }

    #[test]
    fn coefficient_syntaxes() {
        for text in [
            "species A1 A2\ndiffusion A1=1 A2=1\nreaction 2 A1 <-> A2 : kf=1 kb=3",
            "species A1 A2\ndiffusion A1=1 A2=1\nreaction 2*A1 <-> A2 : kb=3 kf=1",
            "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 + A1 <-> A2 : kf=1 kb=3 # twice",
        ] {
            let net = parse_network(text).unwrap();
            assert_eq!(net.reactions[0].reactants, vec![2, 0]);
            assert_eq!(net.reactions[0].products, vec![0, 1]);
            assert_eq!(net.reactions[0].kb, 3.0);
        }
    }

    #[test]
    fn unknown_species_is_located() {
        let text = "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 <-> A9 : kf=1 kb=1\n";
        let err = parse_network(text).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownSpecies("A9".into()));
        assert_eq!(err.line, 3);
        assert_eq!(err.column, 17);
        assert!(err.to_string().starts_with("unknown species A9 at line 3"));
    }

    #[test]
    fn error_paths() {
        let cases: &[(&str, ParseErrorKind)] = &[
            ("species A1 A1\n", ParseErrorKind::DuplicateSpecies("A1".into())),
            (
                "species A1 A2\ndiffusion A1=1 A2=0\n",
                ParseErrorKind::NonPositive("diffusion of A2".into()),
            ),
            (
                "species A1 A2\ndiffusion A1=1\n",
                ParseErrorKind::DiffusionMissingFor("A2".into()),
            ),
            (
                "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 <-> A2 : kf=1\n",
                ParseErrorKind::MissingRate("kb"),
            ),
            (
                "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 <-> A2 : kf=1 kb=-2\n",
                ParseErrorKind::NonPositive("rate kb".into()),
            ),
            (
                "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 -> A2 : kf=1 kb=1\n",
                ParseErrorKind::MissingArrow,
            ),
            (
                "species A1 A2\ndiffusion A1=1 A2=1\nreaction A1 <-> A2\n",
                ParseErrorKind::MissingRates,
            ),
            (
                "species A1 A2\ndiffusion A1=1 A2=1\nreaction 0.5 A1 <-> A2 : kf=1 kb=1\n",
                ParseErrorKind::BadCoefficient("0.5".into()),
            ),
            ("species A1 A2\ndiffusion A1=1 A2=1\n", ParseErrorKind::MissingReaction),
            ("reaction A1 <-> A2 : kf=1 kb=1\n", ParseErrorKind::DeclarationOrder("reaction")),
            ("", ParseErrorKind::MissingSpecies),
            ("frobnicate\n", ParseErrorKind::UnknownDirective("frobnicate".into())),
            (
                "species A1 A2\ndiffusion A1=1 A2=nan\n",
                ParseErrorKind::InvalidNumber("nan".into()),
            ),
        ];
        for (text, kind) in cases {
            let err = parse_network(text).unwrap_err();
            assert_eq!(&err.kind, kind, "input {text:?}");
        }
    }

    #[test]
    fn serializes_canonically() {
        let net = parse_network(FOUR).unwrap();
        let text = serialize_network(&net);
        assert_eq!(text, FOUR);
        let dimer = parse_network("species A1 A2\ndiffusion A1=1 A2=0.5\nreaction 2*A1 <-> 0 : kf=0.1 kb=3").unwrap();
        let text = serialize_network(&dimer);
        assert!(text.contains("reaction 2 A1 <-> 0 : kf=0.1 kb=3"));
        assert_eq!(parse_network(&text).unwrap(), dimer);
    }

    #[test]
    fn columns_count_characters_not_bytes() {
        let err = parse_network("species Å1 A2\n").unwrap_err();
        assert_eq!(err.column, 9);
    }
}
