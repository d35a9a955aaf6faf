//! Instance files: a one-line JSON header followed by raw binary vectors.
//!
//! Byte layout, in order:
//!
//! 1. a UTF-8 JSON object on a single line, ending with `\n`. Fields:
//!    `format` (always `"qpinst"`), `version` (currently 1), `kind`
//!    (`"projection"` or `"qp"`), `n`, `b`, optional generator metadata
//!    (`seed`, `cond`, `ratio`, `ybar`), and `sections`, the ordered list
//!    of payload section names;
//! 2. for each name in `sections`, that vector as consecutive IEEE-754
//!    doubles in little-endian byte order with no padding. Sections
//!    `lower`, `upper`, `c`, `x0`, `xbar`, `zbar` hold `n` doubles; `q`
//!    holds `n*n` doubles, row-major.
//!
//! Projection instances require `lower`, `upper`, `x0`. QP instances
//! require `lower`, `upper`, `c`, `q`, and carry a planted solution when
//! `xbar`, `zbar`, and the header `ybar` are all present. Readers verify
//! the `q` payload is exactly symmetric and reject trailing bytes, so a
//! file round-trips bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::generator::GeneratedQp;
use crate::matrix::DenseSymmetricMatrix;
use crate::problem::QpProblem;
use crate::set::GeneralizedSimplex;

/// Hard cap on the number of payload doubles a reader will allocate.
const MAX_PAYLOAD_DOUBLES: usize = 1 << 28;
/// Hard cap on the header line length in bytes.
const MAX_HEADER_BYTES: u64 = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum FileFormatError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("header is not a valid JSON object: {0}")]
    Header(#[from] serde_json::Error),
    #[error("not an instance file (format tag {0:?})")]
    Format(String),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("unknown instance kind {0:?}")]
    Kind(String),
    #[error("unknown or repeated section {0:?}")]
    Section(String),
    #[error("required section {0:?} is missing")]
    MissingSection(&'static str),
    #[error("payload of {0} doubles exceeds the reader cap {MAX_PAYLOAD_DOUBLES}")]
    TooLarge(usize),
    #[error("file ends inside section {0:?}")]
    Truncated(String),
    #[error("file continues past the last declared section")]
    TrailingData,
    #[error("instance data is inconsistent: {0}")]
    Invalid(#[from] SolverError),
}

/// Known optimal solution shipped with a generated QP.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantedSolution {
    pub xbar: Vec<f64>,
    pub ybar: f64,
    pub zbar: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ProjectionInstance {
    pub set: GeneralizedSimplex,
    pub x0: Vec<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct QpInstance {
    pub problem: QpProblem,
    pub planted: Option<PlantedSolution>,
    pub seed: Option<u64>,
    pub cond: Option<f64>,
    pub ratio: Option<f64>,
}

impl QpInstance {
    pub fn from_generated(g: &GeneratedQp) -> Self {
        Self {
            problem: g.problem.clone(),
            planted: Some(PlantedSolution {
                xbar: g.xbar.clone(),
                ybar: g.ybar,
                zbar: g.zbar.clone(),
            }),
            seed: Some(g.spec.seed),
            cond: Some(g.spec.cond),
            ratio: Some(g.spec.ratio),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Instance {
    Projection(ProjectionInstance),
    Qp(QpInstance),
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    n: usize,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cond: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ybar: Option<f64>,
    sections: Vec<String>,
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), FileFormatError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_instance_to(&mut out, instance)?;
    out.flush()?;
    Ok(())
}

pub fn write_instance_to<W: Write>(out: &mut W, instance: &Instance) -> Result<(), FileFormatError> {
    let (header, payload): (Header, Vec<&[f64]>) = match instance {
        Instance::Projection(p) => {
            let set = &p.set;
            (
                Header {
                    format: "qpinst".to_owned(),
                    version: 1,
                    kind: "projection".to_owned(),
                    n: set.dim(),
                    b: set.b(),
                    seed: p.seed,
                    cond: None,
                    ratio: None,
                    ybar: None,
                    sections: vec!["lower".into(), "upper".into(), "x0".into()],
                },
                vec![set.lower(), set.upper(), &p.x0],
            )
        }
        Instance::Qp(qp) => {
            let set = qp.problem.set();
            let mut sections = vec!["lower".into(), "upper".into(), "c".into(), "q".into()];
            let mut payload = vec![
                set.lower(),
                set.upper(),
                qp.problem.c(),
                qp.problem.q().entries(),
            ];
            if let Some(planted) = &qp.planted {
                sections.push("xbar".into());
                sections.push("zbar".into());
                payload.push(&planted.xbar);
                payload.push(&planted.zbar);
            }
            (
                Header {
                    format: "qpinst".to_owned(),
                    version: 1,
                    kind: "qp".to_owned(),
                    n: set.dim(),
                    b: set.b(),
                    seed: qp.seed,
                    cond: qp.cond,
                    ratio: qp.ratio,
                    ybar: qp.planted.as_ref().map(|p| p.ybar),
                    sections,
                },
                payload,
            )
        }
    };
    let mut line = serde_json::to_string(&header)?;
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for section in payload {
        for v in section {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance, FileFormatError> {
    read_instance_from(&mut BufReader::new(File::open(path)?))
}

pub fn read_instance_from<R: BufRead>(input: &mut R) -> Result<Instance, FileFormatError> {
    let mut line = Vec::new();
    input.take(MAX_HEADER_BYTES).read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(FileFormatError::Truncated("header".to_owned()));
    }
    let header: Header = serde_json::from_slice(&line)?;
    if header.format != "qpinst" {
        return Err(FileFormatError::Format(header.format));
    }
    if header.version != 1 {
        return Err(FileFormatError::Version(header.version));
    }

    let n = header.n;
    let mut lower = None;
    let mut upper = None;
    let mut c = None;
    let mut q = None;
    let mut x0 = None;
    let mut xbar = None;
    let mut zbar = None;
    for name in &header.sections {
        let slot = match name.as_str() {
            "lower" => &mut lower,
            "upper" => &mut upper,
            "c" => &mut c,
            "q" => &mut q,
            "x0" => &mut x0,
            "xbar" => &mut xbar,
            "zbar" => &mut zbar,
            _ => return Err(FileFormatError::Section(name.clone())),
        };
        if slot.is_some() {
            return Err(FileFormatError::Section(name.clone()));
        }
        let len = if name == "q" {
            n.checked_mul(n).ok_or(FileFormatError::TooLarge(usize::MAX))?
        } else {
            n
        };
        *slot = Some(read_doubles(input, len, name)?);
    }
    let mut probe = [0u8; 1];
    if input.read(&mut probe)? != 0 {
        return Err(FileFormatError::TrailingData);
    }

    let lower = lower.ok_or(FileFormatError::MissingSection("lower"))?;
    let upper = upper.ok_or(FileFormatError::MissingSection("upper"))?;
    let set = GeneralizedSimplex::new(header.b, lower, upper)?;
    match header.kind.as_str() {
        "projection" => Ok(Instance::Projection(ProjectionInstance {
            set,
            x0: x0.ok_or(FileFormatError::MissingSection("x0"))?,
            seed: header.seed,
        })),
        "qp" => {
            let c = c.ok_or(FileFormatError::MissingSection("c"))?;
            let q = q.ok_or(FileFormatError::MissingSection("q"))?;
            let q = DenseSymmetricMatrix::from_entries(n, q)?;
            let problem = QpProblem::new(q, c, set)?;
            let planted = match (xbar, zbar, header.ybar) {
                (Some(xbar), Some(zbar), Some(ybar)) => {
                    Some(PlantedSolution { xbar, ybar, zbar })
                }
                (None, None, None) => None,
                _ => return Err(FileFormatError::MissingSection("xbar/zbar/ybar")),
            };
            Ok(Instance::Qp(QpInstance {
                problem,
                planted,
                seed: header.seed,
                cond: header.cond,
                ratio: header.ratio,
            }))
        }
        other => Err(FileFormatError::Kind(other.to_owned())),
    }
}

fn read_doubles<R: Read>(
    input: &mut R,
    len: usize,
    section: &str,
) -> Result<Vec<f64>, FileFormatError> {
    if len > MAX_PAYLOAD_DOUBLES {
        return Err(FileFormatError::TooLarge(len));
    }
    let mut bytes = vec![0u8; len * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|_| FileFormatError::Truncated(section.to_owned()))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|chunk| f64::from_le_bytes(chunk.try_into().expect("chunk is 8 bytes")))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{gen_projection_instance, gen_qp_instance, QpInstanceSpec};

    fn write_to_vec(instance: &Instance) -> Vec<u8> {
        let mut buf = Vec::new();
        write_instance_to(&mut buf, instance).unwrap();
        buf
    }

    #[test]
    fn projection_round_trip_is_byte_identical() {
        let (set, x0) = gen_projection_instance(40, 5).unwrap();
        let instance = Instance::Projection(ProjectionInstance { set, x0, seed: Some(5) });
        let bytes = write_to_vec(&instance);
        let reread = read_instance_from(&mut &bytes[..]).unwrap();
        assert_eq!(bytes, write_to_vec(&reread));
        let Instance::Projection(p) = reread else { panic!("wrong kind") };
        assert_eq!(p.seed, Some(5));
    }

    #[test]
    fn qp_round_trip_preserves_planted_solution() {
        let g = gen_qp_instance(&QpInstanceSpec { n: 12, cond: 100.0, ratio: 0.4, seed: 2 })
            .unwrap();
        let instance = Instance::Qp(QpInstance::from_generated(&g));
        let bytes = write_to_vec(&instance);
        let reread = read_instance_from(&mut &bytes[..]).unwrap();
        assert_eq!(bytes, write_to_vec(&reread));
        let Instance::Qp(qp) = reread else { panic!("wrong kind") };
        let planted = qp.planted.unwrap();
        assert_eq!(planted.xbar, g.xbar);
        assert_eq!(planted.ybar, g.ybar);
        assert_eq!(planted.zbar, g.zbar);
        assert_eq!(qp.problem.q().entries(), g.problem.q().entries());
        assert_eq!(qp.problem.c(), g.problem.c());
        assert_eq!(qp.cond, Some(100.0));
    }

    #[test]
    fn truncated_and_trailing_files_are_rejected() {
        let (set, x0) = gen_projection_instance(8, 1).unwrap();
        let instance = Instance::Projection(ProjectionInstance { set, x0, seed: None });
        let bytes = write_to_vec(&instance);
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            read_instance_from(&mut &cut[..]),
            Err(FileFormatError::Truncated(_))
        ));
        let mut extended = bytes.clone();
        extended.push(0);
        assert!(matches!(
            read_instance_from(&mut &extended[..]),
            Err(FileFormatError::TrailingData)
        ));
    }

    #[test]
    fn asymmetric_q_payload_is_rejected() {
        let g = gen_qp_instance(&QpInstanceSpec { n: 4, cond: 10.0, ratio: 0.4, seed: 7 })
            .unwrap();
        let instance = Instance::Qp(QpInstance::from_generated(&g));
        let mut bytes = write_to_vec(&instance);
        // Flip one bit inside the q section (it starts after the header
        // line and the three n-vectors).
        let header_len = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
        let q_offset = header_len + 3 * 4 * 8 + 8; // entry (0, 1)
        bytes[q_offset] ^= 1;
        assert!(matches!(
            read_instance_from(&mut &bytes[..]),
            Err(FileFormatError::Invalid(_))
        ));
    }

    #[test]
    fn alien_headers_are_rejected() {
        let bad = b"{\"format\":\"other\",\"version\":1,\"kind\":\"qp\",\"n\":2,\"b\":1.0,\"sections\":[]}\n";
        assert!(matches!(
            read_instance_from(&mut &bad[..]),
            Err(FileFormatError::Format(_))
        ));
        let bad = b"{\"format\":\"qpinst\",\"version\":9,\"kind\":\"qp\",\"n\":2,\"b\":1.0,\"sections\":[]}\n";
        assert!(matches!(
            read_instance_from(&mut &bad[..]),
            Err(FileFormatError::Version(9))
        ));
    }
}
