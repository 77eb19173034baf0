//! Canonical text form of a genome.
//!
//! ```text
//! version 1
//! inputs 2
//! outputs 1
//! born 0
//! parent -
//! next-layer 2
//! next-connector 4
//! layer 0 position 0 neurons 1 protected-neurons 1 protected 1
//! connector 0 source i:0 protected 1
//! connector 1 source i:1 protected 1
//! layer 1 position 1 neurons 1 protected-neurons 1 protected 1
//! connector 2 source n:0:0 protected 1
//! end
//! ```
//!
//! Layers appear in position order; each layer's connectors follow it in id
//! order. Structural rules are not checked here; run `validate` on the result.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{ConnectorGene, ConnectorId, Genome, LayerGene, LayerId, NodeRef};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

impl Genome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "version {FORMAT_VERSION}");
        let _ = writeln!(s, "inputs {}", self.num_inputs);
        let _ = writeln!(s, "outputs {}", self.num_outputs);
        let _ = writeln!(s, "born {}", self.born_generation);
        match self.parent_id {
            Some(p) => {
                let _ = writeln!(s, "parent {p}");
            }
            None => s.push_str("parent -\n"),
        }
        let _ = writeln!(s, "next-layer {}", self.next_layer_id);
        let _ = writeln!(s, "next-connector {}", self.next_connector_id);
        for (p, l) in self.layers.iter().enumerate() {
            let _ = writeln!(
                s,
                "layer {} position {p} neurons {} protected-neurons {} protected {}",
                l.id.0, l.neurons, l.protected_neurons, l.protected as u8
            );
            for c in &l.connectors {
                let _ = writeln!(s, "connector {} source {} protected {}", c.id.0, c.source, c.protected as u8);
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Genome, ParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let mut header = |key: &str| -> Result<(usize, String), ParseError> {
            let (n, line) = lines.next().ok_or_else(|| err(0, format!("missing `{key}`")))?;
            let rest = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| err(n, format!("expected `{key} <value>`")))?;
            Ok((n, rest.trim().to_string()))
        };

        let (n, v) = header("version")?;
        let version: u32 = num(n, &v)?;
        if version != FORMAT_VERSION {
            return Err(err(n, format!("unsupported version {version}")));
        }
        let (n, v) = header("inputs")?;
        let num_inputs = num(n, &v)?;
        let (n, v) = header("outputs")?;
        let num_outputs = num(n, &v)?;
        let (n, v) = header("born")?;
        let born_generation = num(n, &v)?;
        let (n, v) = header("parent")?;
        let parent_id = if v == "-" { None } else { Some(num(n, &v)?) };
        let (n, v) = header("next-layer")?;
        let next_layer_id = num(n, &v)?;
        let (n, v) = header("next-connector")?;
        let next_connector_id = num(n, &v)?;

        let mut layers: Vec<LayerGene> = Vec::new();
        let mut ended = false;
        for (n, line) in lines {
            if ended {
                return Err(err(n, "content after `end`"));
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.first().copied() {
                Some("layer") => {
                    let fields = pairs(n, &tokens[2..])?;
                    let id = LayerId(num(n, tokens.get(1).copied().unwrap_or(""))?);
                    let position: usize = num(n, field(n, &fields, "position")?)?;
                    if position != layers.len() {
                        return Err(err(n, format!("layer position {position} out of order")));
                    }
                    layers.push(LayerGene {
                        id,
                        neurons: num(n, field(n, &fields, "neurons")?)?,
                        protected_neurons: num(n, field(n, &fields, "protected-neurons")?)?,
                        protected: flag(n, field(n, &fields, "protected")?)?,
                        connectors: Vec::new(),
                    });
                }
                Some("connector") => {
                    let layer = layers.last_mut().ok_or_else(|| err(n, "connector before any layer"))?;
                    let fields = pairs(n, &tokens[2..])?;
                    layer.connectors.push(ConnectorGene {
                        id: ConnectorId(num(n, tokens.get(1).copied().unwrap_or(""))?),
                        source: parse_source(n, field(n, &fields, "source")?)?,
                        protected: flag(n, field(n, &fields, "protected")?)?,
                    });
                }
                Some("end") => ended = true,
                _ => return Err(err(n, format!("unexpected line `{line}`"))),
            }
        }
        if !ended {
            return Err(err(text.lines().count(), "missing `end`"));
        }

        Ok(Genome {
            num_inputs,
            num_outputs,
            layers,
            born_generation,
            parent_id,
            next_layer_id,
            next_connector_id,
        })
    }
}

fn num<T: FromStr>(line: usize, s: &str) -> Result<T, ParseError> {
    s.parse().map_err(|_| err(line, format!("`{s}` is not a valid number")))
}

fn flag(line: usize, s: &str) -> Result<bool, ParseError> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(err(line, format!("`{s}` is not a 0/1 flag"))),
    }
}

fn pairs<'a>(line: usize, tokens: &[&'a str]) -> Result<Vec<(&'a str, &'a str)>, ParseError> {
    if tokens.len() % 2 != 0 {
        return Err(err(line, "expected key/value pairs"));
    }
    Ok(tokens.chunks(2).map(|c| (c[0], c[1])).collect())
}

fn field<'a>(line: usize, fields: &[(&str, &'a str)], key: &str) -> Result<&'a str, ParseError> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| err(line, format!("missing field `{key}`")))
}

fn parse_source(line: usize, s: &str) -> Result<NodeRef, ParseError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["i", k] => Ok(NodeRef::Input(num(line, k)?)),
        ["n", l, k] => Ok(NodeRef::Neuron { layer: LayerId(num(line, l)?), index: num(line, k)? }),
        _ => Err(err(line, format!("bad source reference `{s}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{mutate, random_genome, validate, Violation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn control_text_matches_documented_layout() {
        let text = Genome::control(2, 1).to_text();
        assert_eq!(
            text,
            "version 1\ninputs 2\noutputs 1\nborn 0\nparent -\nnext-layer 1\nnext-connector 2\n\
             layer 0 position 0 neurons 1 protected-neurons 1 protected 1\n\
             connector 0 source i:0 protected 1\nconnector 1 source i:1 protected 1\nend\n"
        );
    }

    #[test]
    fn round_trip_after_mutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut g = random_genome(7, 3, &mut rng);
        for _ in 0..30 {
            g = mutate(&g, &mut rng).genome;
        }
        g.parent_id = Some(12);
        g.born_generation = 4;
        assert_eq!(Genome::from_text(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn tampered_layer_count_parses_but_fails_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let g = random_genome(3, 1, &mut rng);
        let mut text = g.to_text();
        text.truncate(text.len() - "end\n".len());
        let first = g.layers.len();
        for k in 0..(33 - first) {
            let id = 1000 + k;
            let cid = 5000 + 2 * k;
            text.push_str(&format!(
                "layer {id} position {} neurons 1 protected-neurons 0 protected 0\n\
                 connector {cid} source i:0 protected 0\nconnector {} source n:{id}:0 protected 0\n",
                first + k,
                cid + 1
            ));
        }
        text.push_str("end\n");
        let parsed = Genome::from_text(&text).unwrap();
        assert_eq!(parsed.layers.len(), 33);
        assert!(validate(&parsed).contains(&Violation::TooManyLayers { count: 33 }));
    }

    #[test]
    fn malformed_document_reports_line() {
        let text = Genome::control(2, 1).to_text().replace("source i:1", "source x:1");
        let e = Genome::from_text(&text).unwrap_err();
        assert_eq!(e.line, 10);
        let e = Genome::from_text("version 1\ninputs two\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn digest_is_stable_for_equal_seeds() {
        let a = random_genome(17, 3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = random_genome(17, 3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a.digest_hex(), b.digest_hex());
        assert_eq!(a.to_text().as_bytes(), b.to_text().as_bytes());
        let c = random_genome(17, 3, &mut ChaCha8Rng::seed_from_u64(6));
        assert_ne!(a.digest(), c.digest());
    }
}
