//! Text formats: problem files and solution files.
//!
//! Problem file:
//!
//! ```text
//! QP <n> <m>
//! H:
//! <n lines of n numbers>
//! g:
//! <n numbers>
//! C:            # only when m > 0
//! <m lines of n numbers>
//! d:
//! <m numbers>
//! ```
//!
//! `#` starts a comment. Numbers may also follow a section label on the same
//! line, and `;` separates matrix rows like a line break does.

use std::fmt::Write as _;

use crate::error::ParseError;
use crate::matrix::Matrix;
use crate::problem::QpProblem;
use crate::solver::Solution;

/// A row of numbers together with the line it came from.
struct Row {
    line: usize,
    values: Vec<f64>,
}

struct Section {
    label: String,
    line: usize,
    rows: Vec<Row>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_numbers(text: &str, line: usize) -> Result<Vec<f64>, ParseError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| ParseError::Number {
                line,
                token: tok.to_string(),
            })
        })
        .collect()
}

fn push_rows(section: &mut Section, text: &str, line: usize) -> Result<(), ParseError> {
    for piece in text.split(';') {
        let values = parse_numbers(piece, line)?;
        if !values.is_empty() {
            section.rows.push(Row { line, values });
        }
    }
    Ok(())
}

fn parse_usize(tok: Option<&str>, what: &str, line: usize) -> Result<usize, ParseError> {
    let tok = tok.ok_or_else(|| ParseError::Header {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| ParseError::Header {
        line,
        msg: format!("{what} is not a non-negative integer: {tok:?}"),
    })
}

fn matrix_from_rows(section: &Section, rows: usize, cols: usize) -> Result<Matrix, ParseError> {
    if section.rows.len() != rows {
        let line = section.rows.last().map_or(section.line, |r| r.line);
        return Err(ParseError::Dimension {
            line,
            msg: format!(
                "section {}: expected {rows} rows, found {}",
                section.label,
                section.rows.len()
            ),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in &section.rows {
        if r.values.len() != cols {
            return Err(ParseError::Dimension {
                line: r.line,
                msg: format!(
                    "section {}: expected {cols} numbers, found {}",
                    section.label,
                    r.values.len()
                ),
            });
        }
        data.extend_from_slice(&r.values);
    }
    Ok(Matrix::from_row_major(rows, cols, data).expect("row lengths checked"))
}

fn vector_from_rows(section: &Section, len: usize) -> Result<Vec<f64>, ParseError> {
    let values: Vec<f64> = section.rows.iter().flat_map(|r| r.values.clone()).collect();
    if values.len() != len || section.rows.len() > 1 {
        let line = section.rows.last().map_or(section.line, |r| r.line);
        return Err(ParseError::Dimension {
            line,
            msg: format!(
                "section {}: expected one line of {len} numbers, found {} numbers",
                section.label,
                values.len()
            ),
        });
    }
    Ok(values)
}

/// Parses a problem file. Structural checks only; run
/// [`QpProblem::validate`] for the numerical invariants.
pub fn load_qp(text: &str) -> Result<QpProblem, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(ParseError::Header {
        line: 1,
        msg: "empty file".into(),
    })?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("QP") {
        return Err(ParseError::Header {
            line: hline,
            msg: "expected `QP <n> <m>`".into(),
        });
    }
    let n = parse_usize(toks.next(), "n", hline)?;
    let m = parse_usize(toks.next(), "m", hline)?;
    if let Some(extra) = toks.next() {
        return Err(ParseError::Header {
            line: hline,
            msg: format!("unexpected token {extra:?}"),
        });
    }

    let mut sections: Vec<Section> = Vec::new();
    for (line, text) in lines {
        if let Some((label, rest)) = text.split_once(':') {
            let label = label.trim();
            if !matches!(label, "H" | "g" | "C" | "d") {
                return Err(ParseError::Section {
                    line,
                    msg: format!("unknown section {label:?}"),
                });
            }
            if sections.iter().any(|s| s.label == label) {
                return Err(ParseError::Section {
                    line,
                    msg: format!("duplicate section {label}"),
                });
            }
            let mut sec = Section {
                label: label.to_string(),
                line,
                rows: Vec::new(),
            };
            push_rows(&mut sec, rest, line)?;
            sections.push(sec);
        } else {
            let sec = sections.last_mut().ok_or_else(|| ParseError::Section {
                line,
                msg: "numbers before any section label".into(),
            })?;
            push_rows(sec, text, line)?;
        }
    }

    let last_line = text.lines().count().max(1);
    let find = |label: &str| sections.iter().find(|s| s.label == label);
    let require = |label: &str| {
        find(label).ok_or_else(|| ParseError::Section {
            line: last_line,
            msg: format!("missing section {label}"),
        })
    };

    let h = matrix_from_rows(require("H")?, n, n)?;
    let g = vector_from_rows(require("g")?, n)?;
    let (c, d) = if m > 0 {
        (
            matrix_from_rows(require("C")?, m, n)?,
            vector_from_rows(require("d")?, m)?,
        )
    } else {
        for label in ["C", "d"] {
            if let Some(s) = find(label) {
                if !s.rows.is_empty() {
                    return Err(ParseError::Dimension {
                        line: s.line,
                        msg: format!("section {label} present but m = 0"),
                    });
                }
            }
        }
        (Matrix::zeros(0, n), Vec::new())
    };

    Ok(QpProblem { h, g, c, d })
}

/// Shortest decimal that parses back to the same binary64 value.
pub fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn write_row(out: &mut String, values: &[f64]) {
    let row: Vec<String> = values.iter().map(|&v| fmt_num(v)).collect();
    out.push_str(&row.join(" "));
    out.push('\n');
}

pub fn save_qp(p: &QpProblem) -> String {
    let mut out = String::new();
    writeln!(out, "QP {} {}", p.n(), p.m()).unwrap();
    out.push_str("H:\n");
    for r in p.h.row_iter() {
        write_row(&mut out, r);
    }
    out.push_str("g:\n");
    write_row(&mut out, &p.g);
    if p.m() > 0 {
        out.push_str("C:\n");
        for r in p.c.row_iter() {
            write_row(&mut out, r);
        }
        out.push_str("d:\n");
        write_row(&mut out, &p.d);
    }
    out
}

/// Solution file: `z:`, `lambda:`, `iters:`, `residual:` and `gap:` lines.
pub fn save_solution(sol: &Solution) -> String {
    let join = |v: &[f64]| v.iter().map(|&x| format!(" {}", fmt_num(x))).collect::<String>();
    format!(
        "z:{}\nlambda:{}\niters: {}\nresidual: {}\ngap: {}\n",
        join(&sol.z),
        join(&sol.lambda),
        sol.iters,
        fmt_num(sol.primal_residual),
        fmt_num(sol.gap)
    )
}

/// Fields read back from a solution file.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFile {
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
    pub gap: f64,
}

pub fn load_solution(text: &str) -> Result<SolutionFile, ParseError> {
    let mut z = None;
    let mut lambda = None;
    let mut iters = None;
    let mut residual = None;
    let mut gap = None;
    let mut last = 1;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last = line;
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        let (key, rest) = text.split_once(':').ok_or_else(|| ParseError::Section {
            line,
            msg: "expected `key: value`".into(),
        })?;
        let nums = parse_numbers(rest, line)?;
        let single = |nums: &[f64]| -> Result<f64, ParseError> {
            match nums {
                [x] => Ok(*x),
                _ => Err(ParseError::Dimension {
                    line,
                    msg: format!("{key} takes one value"),
                }),
            }
        };
        match key.trim() {
            "z" => z = Some(nums),
            "lambda" => lambda = Some(nums),
            "iters" => {
                let v = single(&nums)?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(ParseError::Number {
                        line,
                        token: rest.trim().to_string(),
                    });
                }
                iters = Some(v as usize)
            }
            "residual" => residual = Some(single(&nums)?),
            "gap" => gap = Some(single(&nums)?),
            other => {
                return Err(ParseError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
    }
    let missing = |what: &str| ParseError::Section {
        line: last,
        msg: format!("missing {what}"),
    };
    Ok(SolutionFile {
        z: z.ok_or_else(|| missing("z"))?,
        lambda: lambda.ok_or_else(|| missing("lambda"))?,
        iters: iters.ok_or_else(|| missing("iters"))?,
        residual: residual.ok_or_else(|| missing("residual"))?,
        gap: gap.ok_or_else(|| missing("gap"))?,
    })
}
