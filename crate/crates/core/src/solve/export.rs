//! MPS (fixed and free form) and CPLEX LP writers, with parsers for the
//! files they produce.
//!
//! Output depends only on the problem, so exporting the same problem twice
//! gives byte-identical files. The objective constant is written as the
//! negated right-hand side of the objective row in MPS and as a constant term
//! in LP. Fixed-form MPS limits names to 8 characters, so columns and rows
//! are renamed `C0000000`/`R0000000` and the original names are kept in
//! `*@ code name` comment lines that [`parse_mps`] reads back.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{MipProblem, ProblemBuilder, RowSense, VarId, VarKey, VarKind, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFormat {
    MpsFixed,
    MpsFree,
    Lp,
}

impl ModelFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ModelFormat::MpsFixed | ModelFormat::MpsFree => "mps",
            ModelFormat::Lp => "lp",
        }
    }
}

impl FromStr for ModelFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mps" | "mps_free" | "free" => Ok(ModelFormat::MpsFree),
            "mps_fixed" | "fixed" => Ok(ModelFormat::MpsFixed),
            "lp" => Ok(ModelFormat::Lp),
            other => Err(Error::param("format", format!("unknown model format {other:?}; expected mps, mps_fixed or lp"))),
        }
    }
}

const OBJ_ROW: &str = "OBJ";

pub fn render_model(problem: &MipProblem, format: ModelFormat) -> String {
    match format {
        ModelFormat::MpsFixed => render_mps(problem, true),
        ModelFormat::MpsFree => render_mps(problem, false),
        ModelFormat::Lp => render_lp(problem),
    }
}

/// Writes `problem` after checking that the text parses back to the same
/// rows and coefficients within 1e-9.
pub fn write_model(problem: &MipProblem, format: ModelFormat, path: &Path) -> Result<()> {
    let text = render_model(problem, format);
    let back = match format {
        ModelFormat::Lp => parse_lp(&text)?,
        ModelFormat::MpsFixed | ModelFormat::MpsFree => parse_mps(&text)?,
    };
    match max_coefficient_difference(problem, &back) {
        Some(d) if d <= 1e-9 => {}
        other => {
            return Err(Error::Export(format!(
                "{format:?} text does not reproduce the model (difference {other:?})"
            )))
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an MPS or LP file, choosing the parser by extension.
pub fn read_model(path: &Path) -> Result<MipProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("lp") => parse_lp(&text),
        _ => parse_mps(&text),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Shortest accurate rendering that fits the 12-character numeric field.
fn fixed_num(x: f64) -> String {
    let exact = num(x);
    if exact.len() <= 12 {
        return exact;
    }
    let mut best: Option<(f64, String)> = None;
    let mut consider = |s: String| {
        if s.len() <= 12 {
            if let Ok(v) = s.parse::<f64>() {
                let err = (v - x).abs();
                if best.as_ref().is_none_or(|(e, _)| err < *e) {
                    best = Some((err, s));
                }
            }
        }
    };
    for p in 0..=11 {
        consider(format!("{x:.p$}"));
        consider(format!("{x:.p$e}"));
    }
    best.map(|(_, s)| s).unwrap_or(exact)
}

fn render_mps(problem: &MipProblem, fixed: bool) -> String {
    let vars = problem.variables();
    let rows = problem.constraints();
    let col_name = |i: usize| if fixed { format!("C{i:07}") } else { vars[i].name.clone() };
    let row_name = |i: usize| if fixed { format!("R{i:07}") } else { rows[i].name.clone() };
    let n = |x: f64| if fixed { fixed_num(x) } else { num(x) };
    let line = |f1: &str, f2: &str, f3: &str, f4: &str| {
        if fixed {
            format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}").trim_end().to_string()
        } else {
            format!(" {f1:<2} {f2}  {f3}  {f4}").trim_end().to_string()
        }
    };

    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", if problem.name().is_empty() { "model" } else { problem.name() });
    if fixed {
        for (i, v) in vars.iter().enumerate() {
            let _ = writeln!(out, "*@ {} {}", col_name(i), v.name);
        }
        for (i, r) in rows.iter().enumerate() {
            let _ = writeln!(out, "*@ {} {}", row_name(i), r.name);
        }
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for (i, r) in rows.iter().enumerate() {
        let t = match r.sense {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        };
        let _ = writeln!(out, " {t}  {}", row_name(i));
    }

    let mut entries: Vec<Vec<(String, f64)>> = vec![Vec::new(); vars.len()];
    for (v, c) in &problem.objective().terms {
        entries[v.0].push((OBJ_ROW.to_string(), *c));
    }
    for (i, r) in rows.iter().enumerate() {
        for (v, a) in &r.terms {
            entries[v.0].push((row_name(i), *a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (i, v) in vars.iter().enumerate() {
        if v.is_integral() != in_int {
            let tag = if in_int { "'INTEND'" } else { "'INTORG'" };
            let name = format!("MARKER{marker:02}");
            if fixed {
                let _ = writeln!(out, "    {name:<8}  {:<8}  {:12}   {tag}", "'MARKER'", "");
            } else {
                let _ = writeln!(out, "    {name}  'MARKER'  {tag}");
            }
            marker += 1;
            in_int = !in_int;
        }
        if entries[i].is_empty() {
            out.push_str(&line("", &col_name(i), OBJ_ROW, &n(0.0)));
            out.push('\n');
        }
        for (row, a) in &entries[i] {
            out.push_str(&line("", &col_name(i), row, &n(*a)));
            out.push('\n');
        }
    }
    if in_int {
        let name = format!("MARKER{marker:02}");
        if fixed {
            let _ = writeln!(out, "    {name:<8}  {:<8}  {:12}   'INTEND'", "'MARKER'", "");
        } else {
            let _ = writeln!(out, "    {name}  'MARKER'  'INTEND'");
        }
    }

    out.push_str("RHS\n");
    let constant = problem.objective().constant;
    if constant != 0.0 {
        out.push_str(&line("", "RHS", OBJ_ROW, &n(-constant)));
        out.push('\n');
    }
    for (i, r) in rows.iter().enumerate() {
        if r.rhs != 0.0 {
            out.push_str(&line("", "RHS", &row_name(i), &n(r.rhs)));
            out.push('\n');
        }
    }

    out.push_str("BOUNDS\n");
    for (i, v) in vars.iter().enumerate() {
        let c = col_name(i);
        let mut bound = |t: &str, val: Option<f64>| {
            let s = line(t, "BND", &c, &val.map(n).unwrap_or_default());
            out.push_str(&s);
            out.push('\n');
        };
        let (lo, hi) = (v.lower, v.upper);
        if lo == hi {
            bound("FX", Some(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            bound("FR", None);
        } else {
            if lo == f64::NEG_INFINITY {
                bound("MI", None);
            } else if lo != 0.0 || v.is_integral() {
                bound("LO", Some(lo));
            }
            if hi == f64::INFINITY {
                if v.is_integral() {
                    bound("PL", None);
                }
            } else {
                bound("UP", Some(hi));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn lp_terms(out: &mut String, terms: &[(VarId, f64)], vars: &[Variable], constant: Option<f64>) {
    let mut k = 0;
    let mut push = |out: &mut String, s: String| {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        out.push(' ');
        out.push_str(&s);
        k += 1;
    };
    for (v, a) in terms {
        let sign = if *a < 0.0 { '-' } else { '+' };
        push(out, format!("{sign} {} {}", num(a.abs()), vars[v.0].name));
    }
    if let Some(c) = constant.filter(|c| *c != 0.0) {
        let sign = if c < 0.0 { '-' } else { '+' };
        push(out, format!("{sign} {}", num(c.abs())));
    }
    let empty = terms.is_empty() && !constant.is_some_and(|c| c != 0.0);
    if empty {
        if let Some(first) = vars.first() {
            push(out, format!("+ 0 {}", first.name));
        }
    }
}

fn lp_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        num(x)
    }
}

fn render_lp(problem: &MipProblem) -> String {
    let vars = problem.variables();
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.name());
    out.push_str("Minimize\n obj:");
    lp_terms(&mut out, &problem.objective().terms, vars, Some(problem.objective().constant));
    out.push_str("\nSubject To\n");
    for r in problem.constraints() {
        let _ = write!(out, " {}:", r.name);
        lp_terms(&mut out, &r.terms, vars, None);
        let op = match r.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", num(r.rhs));
    }
    out.push_str("Bounds\n");
    for v in vars {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else if v.lower == v.upper {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lower));
        } else if v.lower != 0.0 || v.upper != f64::INFINITY {
            let _ = writeln!(out, " {} <= {} <= {}", lp_bound(v.lower), v.name, lp_bound(v.upper));
        }
    }
    let generals: Vec<&str> = vars
        .iter()
        .filter(|v| v.kind == VarKind::Integer || (v.kind == VarKind::Binary && (v.lower, v.upper) != (0.0, 1.0)))
        .map(|v| v.name.as_str())
        .collect();
    if !generals.is_empty() {
        out.push_str("Generals\n");
        for chunk in generals.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    let binaries: Vec<&str> = vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary && (v.lower, v.upper) == (0.0, 1.0))
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(8) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

/// Collects variables and rows in file order, then assembles the problem.
struct Assembler {
    b: ProblemBuilder,
    cols: HashMap<String, VarId>,
    rows: Vec<(String, RowSense, f64, Vec<(VarId, f64)>)>,
    row_index: HashMap<String, usize>,
    objective: Vec<(VarId, f64)>,
    constant: f64,
}

impl Assembler {
    fn new(name: &str) -> Self {
        Assembler {
            b: ProblemBuilder::new(name),
            cols: HashMap::new(),
            rows: Vec::new(),
            row_index: HashMap::new(),
            objective: Vec::new(),
            constant: 0.0,
        }
    }

    fn col(&mut self, name: &str, kind: VarKind) -> VarId {
        if let Some(id) = self.cols.get(name) {
            return *id;
        }
        let id = match VarKey::parse(name).filter(|k| k.to_string() == name) {
            Some(key) if self.b.get(key).is_none() => self.b.var(key, kind, 0.0, f64::INFINITY),
            _ => self.b.add_var(name.to_string(), kind, 0.0, f64::INFINITY),
        };
        self.cols.insert(name.to_string(), id);
        id
    }

    fn row(&mut self, name: &str, sense: RowSense, line: usize) -> Result<()> {
        if self.row_index.contains_key(name) {
            return Err(parse_err(line, format!("duplicate row {name}")));
        }
        self.row_index.insert(name.to_string(), self.rows.len());
        self.rows.push((name.to_string(), sense, 0.0, Vec::new()));
        Ok(())
    }

    fn finish(mut self, binaries_from_bounds: bool) -> MipProblem {
        if binaries_from_bounds {
            for id in self.cols.values().copied().collect::<Vec<_>>() {
                let v = self.b.variable(id);
                if v.kind == VarKind::Integer && v.lower == 0.0 && v.upper == 1.0 {
                    self.b.set_kind(id, VarKind::Binary);
                }
            }
        }
        for (name, sense, rhs, terms) in self.rows {
            self.b.add_row(name, terms, sense, rhs);
        }
        self.b.set_objective(self.objective, self.constant);
        self.b.finish()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::ModelParse {
        line,
        message: message.into(),
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| parse_err(line, format!("expected a number, found {tok:?}"))),
    }
}

/// Parses fixed or free MPS as written by this module (names without
/// spaces). Fixed-form name maps in `*@` comments are applied.
pub fn parse_mps(text: &str) -> Result<MipProblem> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Rows,
        Columns,
        Rhs,
        Bounds,
    }
    let mut rename: HashMap<String, String> = HashMap::new();
    let mut asm: Option<Assembler> = None;
    let mut obj_row: Option<String> = None;
    let mut section = Section::None;
    let mut in_int = false;
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(map) = raw.strip_prefix("*@") {
            let mut it = map.split_whitespace();
            if let (Some(code), Some(name)) = (it.next(), it.next()) {
                rename.insert(code.to_string(), name.to_string());
            }
            continue;
        }
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let name_of = |t: &str| rename.get(t).cloned().unwrap_or_else(|| t.to_string());
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            match toks[0].to_ascii_uppercase().as_str() {
                "NAME" => {
                    asm = Some(Assembler::new(toks.get(1).copied().unwrap_or("")));
                    section = Section::None;
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "BOUNDS" => section = Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                "OBJSENSE" | "OBJSENSE MIN" => {}
                other => return Err(parse_err(ln, format!("unsupported section {other}"))),
            }
            continue;
        }
        let a = asm.get_or_insert_with(|| Assembler::new(""));
        match section {
            Section::Rows => {
                if toks.len() < 2 {
                    return Err(parse_err(ln, "row line needs a type and a name"));
                }
                let name = name_of(toks[1]);
                match toks[0].to_ascii_uppercase().as_str() {
                    "N" if obj_row.is_none() => obj_row = Some(toks[1].to_string()),
                    "N" => return Err(parse_err(ln, "more than one objective row")),
                    "L" => a.row(&name, RowSense::Le, ln)?,
                    "G" => a.row(&name, RowSense::Ge, ln)?,
                    "E" => a.row(&name, RowSense::Eq, ln)?,
                    t => return Err(parse_err(ln, format!("unknown row type {t}"))),
                }
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1] == "'MARKER'" {
                    match toks[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        t => return Err(parse_err(ln, format!("unknown marker {t}"))),
                    }
                    continue;
                }
                if toks.len() < 3 || toks.len() % 2 == 0 {
                    return Err(parse_err(ln, "column line needs name and row/value pairs"));
                }
                let kind = if in_int { VarKind::Integer } else { VarKind::Continuous };
                let col = a.col(&name_of(toks[0]), kind);
                for pair in toks[1..].chunks(2) {
                    let val = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        a.objective.push((col, val));
                    } else {
                        let r = *a
                            .row_index
                            .get(&name_of(pair[0]))
                            .ok_or_else(|| parse_err(ln, format!("unknown row {}", pair[0])))?;
                        a.rows[r].3.push((col, val));
                    }
                }
            }
            Section::Rhs => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in pairs.chunks(2) {
                    let val = parse_num(pair[1], ln)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        a.constant = -val;
                    } else {
                        let r = *a
                            .row_index
                            .get(&name_of(pair[0]))
                            .ok_or_else(|| parse_err(ln, format!("unknown row {}", pair[0])))?;
                        a.rows[r].2 = val;
                    }
                }
            }
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(parse_err(ln, "bound line needs type, set and column"));
                }
                let t = toks[0].to_ascii_uppercase();
                let name = name_of(toks[2]);
                let id = *a.cols.get(&name).ok_or_else(|| parse_err(ln, format!("unknown column {name}")))?;
                let val = || toks.get(3).map(|v| parse_num(v, ln)).transpose();
                let v = a.b.variable(id).clone();
                let (mut lo, mut hi) = (v.lower, v.upper);
                match t.as_str() {
                    "LO" => lo = val()?.ok_or_else(|| parse_err(ln, "missing value"))?,
                    "UP" => hi = val()?.ok_or_else(|| parse_err(ln, "missing value"))?,
                    "FX" => {
                        lo = val()?.ok_or_else(|| parse_err(ln, "missing value"))?;
                        hi = lo;
                    }
                    "FR" => (lo, hi) = (f64::NEG_INFINITY, f64::INFINITY),
                    "MI" => lo = f64::NEG_INFINITY,
                    "PL" => hi = f64::INFINITY,
                    "BV" => {
                        (lo, hi) = (0.0, 1.0);
                        a.b.set_kind(id, VarKind::Binary);
                    }
                    "LI" | "UI" => {
                        let x = val()?.ok_or_else(|| parse_err(ln, "missing value"))?;
                        if t == "LI" {
                            lo = x;
                        } else {
                            hi = x;
                        }
                        if v.kind == VarKind::Continuous {
                            a.b.set_kind(id, VarKind::Integer);
                        }
                    }
                    other => return Err(parse_err(ln, format!("unsupported bound type {other}"))),
                }
                a.b.set_bounds(id, lo, hi);
            }
            Section::None => return Err(parse_err(ln, "data line outside a section")),
        }
    }
    if !ended {
        return Err(parse_err(text.lines().count(), "missing ENDATA"));
    }
    Ok(asm.unwrap_or_else(|| Assembler::new("")).finish(true))
}

fn is_number(tok: &str) -> bool {
    parse_num(tok, 0).is_ok()
}

/// Parses CPLEX LP as written by this module: tokens separated by spaces,
/// one section keyword per line.
pub fn parse_lp(text: &str) -> Result<MipProblem> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Objective,
        Rows,
        Bounds,
        Generals,
        Binaries,
    }
    let mut section = Section::None;
    let mut toks: Vec<(usize, Section, String)> = Vec::new();
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let key = line.to_ascii_lowercase();
        let next = match key.as_str() {
            "minimize" | "minimise" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
            "bounds" | "bound" => Some(Section::Bounds),
            "generals" | "general" | "gen" => Some(Section::Generals),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => {
                ended = true;
                break;
            }
            "maximize" | "maximise" | "max" => return Err(parse_err(i + 1, "only minimisation is supported")),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        if section == Section::Bounds {
            // One bound per line; keep the line boundary with a marker.
            toks.push((i + 1, section, "\n".into()));
        }
        toks.extend(line.split_whitespace().map(|t| (i + 1, section, t.to_string())));
    }
    if !ended {
        return Err(parse_err(text.lines().count(), "missing End"));
    }

    let mut asm = Assembler::new("");
    // Declare columns in order of first appearance.
    let mut pending_rows: Vec<(usize, String, Vec<(String, f64)>, RowSense, f64)> = Vec::new();
    let mut objective: Vec<(String, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut order: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut note = |name: &str, order: &mut Vec<String>| {
        if seen.insert(name.to_string()) {
            order.push(name.to_string());
        }
    };

    let mut k = 0;
    let mut bounds: Vec<(usize, Vec<String>)> = Vec::new();
    let mut generals = Vec::new();
    let mut binaries = Vec::new();
    while k < toks.len() {
        let (ln, sec, ref tok) = toks[k];
        match sec {
            Section::Objective | Section::Rows => {
                let mut label = None;
                if let Some(l) = tok.strip_suffix(':') {
                    label = Some(l.to_string());
                    k += 1;
                }
                let mut terms = Vec::new();
                let mut cst = 0.0;
                let mut sign = 1.0;
                let mut coef: Option<f64> = None;
                let mut rel = None;
                while k < toks.len() && toks[k].1 == sec {
                    let t = toks[k].2.as_str();
                    if sec == Section::Objective && t.ends_with(':') {
                        break;
                    }
                    if sec == Section::Rows && t.ends_with(':') {
                        break;
                    }
                    match t {
                        "+" => sign = 1.0,
                        "-" => sign = -1.0,
                        "<=" | "=<" | "<" => rel = Some(RowSense::Le),
                        ">=" | "=>" | ">" => rel = Some(RowSense::Ge),
                        "=" => rel = Some(RowSense::Eq),
                        _ if rel.is_some() => {
                            let rhs = parse_num(t, toks[k].0)?;
                            let name = label.clone().ok_or_else(|| parse_err(toks[k].0, "row without a name"))?;
                            pending_rows.push((toks[k].0, name, std::mem::take(&mut terms), rel.unwrap(), rhs));
                            k += 1;
                            break;
                        }
                        _ if is_number(t) => {
                            let v = parse_num(t, toks[k].0)?;
                            let next_is_name = toks
                                .get(k + 1)
                                .is_some_and(|n| n.1 == sec && !is_number(&n.2) && !matches!(n.2.as_str(), "+" | "-" | "<=" | ">=" | "=" | "<" | ">" | "=<" | "=>") && !n.2.ends_with(':'));
                            if next_is_name {
                                coef = Some(sign * v);
                            } else {
                                cst += sign * v;
                                sign = 1.0;
                            }
                        }
                        name => {
                            note(name, &mut order);
                            terms.push((name.to_string(), coef.take().unwrap_or(sign)));
                            sign = 1.0;
                        }
                    }
                    k += 1;
                }
                if sec == Section::Objective {
                    objective.extend(terms);
                    constant += cst;
                } else if rel.is_none() {
                    return Err(parse_err(ln, "row without a relation"));
                }
            }
            Section::Bounds => {
                if tok == "\n" {
                    let mut line = Vec::new();
                    k += 1;
                    while k < toks.len() && toks[k].1 == Section::Bounds && toks[k].2 != "\n" {
                        line.push(toks[k].2.clone());
                        k += 1;
                    }
                    bounds.push((ln, line));
                } else {
                    k += 1;
                }
            }
            Section::Generals => {
                generals.push(tok.clone());
                k += 1;
            }
            Section::Binaries => {
                binaries.push(tok.clone());
                k += 1;
            }
            Section::None => return Err(parse_err(ln, "data before the objective")),
        }
    }
    for name in generals.iter().chain(&binaries) {
        note(name, &mut order);
    }
    for (_, line) in &bounds {
        if let Some(name) = line.iter().find(|t| !is_number(t) && !matches!(t.as_str(), "<=" | ">=" | "=" | "free" | "<" | ">")) {
            note(name, &mut order);
        }
    }
    for name in &order {
        asm.col(name, VarKind::Continuous);
    }
    for name in &generals {
        let id = asm.cols[name];
        asm.b.set_kind(id, VarKind::Integer);
    }
    for name in &binaries {
        let id = asm.cols[name];
        asm.b.set_kind(id, VarKind::Binary);
        asm.b.set_bounds(id, 0.0, 1.0);
    }
    for (ln, line) in bounds {
        let t: Vec<&str> = line.iter().map(String::as_str).collect();
        let col = |n: &str| asm.cols.get(n).copied().ok_or_else(|| parse_err(ln, format!("unknown column {n}")));
        match t.as_slice() {
            [n, "free"] => {
                let id = col(n)?;
                asm.b.set_bounds(id, f64::NEG_INFINITY, f64::INFINITY);
            }
            [lo, "<=", n, "<=", hi] => {
                let id = col(n)?;
                asm.b.set_bounds(id, parse_num(lo, ln)?, parse_num(hi, ln)?);
            }
            [n, "=", v] => {
                let id = col(n)?;
                let v = parse_num(v, ln)?;
                asm.b.set_bounds(id, v, v);
            }
            [n, "<=", v] => {
                let id = col(n)?;
                let lo = asm.b.variable(id).lower;
                asm.b.set_bounds(id, lo, parse_num(v, ln)?);
            }
            [n, ">=", v] => {
                let id = col(n)?;
                let hi = asm.b.variable(id).upper;
                asm.b.set_bounds(id, parse_num(v, ln)?, hi);
            }
            _ => return Err(parse_err(ln, format!("unsupported bound {}", t.join(" ")))),
        }
    }
    for (ln, name, terms, sense, rhs) in pending_rows {
        asm.row(&name, sense, ln)?;
        let r = asm.rows.len() - 1;
        asm.rows[r].2 = rhs;
        asm.rows[r].3 = terms.iter().map(|(n, c)| (asm.cols[n], *c)).collect();
    }
    asm.objective = objective.iter().map(|(n, c)| (asm.cols[n], *c)).collect();
    asm.constant = constant;
    Ok(asm.finish(false))
}

/// Largest coefficient difference between two problems with the same
/// variables and rows, or `None` when their structure differs.
pub fn max_coefficient_difference(a: &MipProblem, b: &MipProblem) -> Option<f64> {
    if a.num_vars() != b.num_vars() || a.num_rows() != b.num_rows() {
        return None;
    }
    let rel = |x: f64, y: f64| {
        if x == y {
            0.0
        } else {
            (x - y).abs() / 1f64.max(x.abs())
        }
    };
    let by_name: HashMap<&str, usize> = b.variables().iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut map = Vec::with_capacity(a.num_vars());
    let mut worst: f64 = 0.0;
    for u in a.variables() {
        let j = *by_name.get(u.name.as_str())?;
        let v = &b.variables()[j];
        if u.is_integral() != v.is_integral() {
            return None;
        }
        worst = worst.max(rel(u.lower, v.lower)).max(rel(u.upper, v.upper));
        map.push(j);
    }
    let terms = |x: &[(VarId, f64)], y: &[(VarId, f64)], worst: &mut f64| -> bool {
        if x.len() != y.len() {
            return false;
        }
        let mut y: Vec<(usize, f64)> = y.iter().map(|(j, q)| (j.0, *q)).collect();
        y.sort_by_key(|t| t.0);
        let mut x: Vec<(usize, f64)> = x.iter().map(|(i, p)| (map[i.0], *p)).collect();
        x.sort_by_key(|t| t.0);
        for ((i, p), (j, q)) in x.into_iter().zip(y) {
            if i != j {
                return false;
            }
            *worst = worst.max(rel(p, q));
        }
        true
    };
    for (r, s) in a.constraints().iter().zip(b.constraints()) {
        if r.name != s.name || r.sense != s.sense || !terms(&r.terms, &s.terms, &mut worst) {
            return None;
        }
        worst = worst.max(rel(r.rhs, s.rhs));
    }
    if !terms(&a.objective().terms, &b.objective().terms, &mut worst) {
        return None;
    }
    Some(worst.max(rel(a.objective().constant, b.objective().constant)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PlaneAxis, PlaneSide};
    use crate::terrain::Cell;

    fn sample() -> MipProblem {
        let mut b = ProblemBuilder::new("sample");
        let x = b.binary(VarKey::X(Cell::new(0, 1)));
        let u = b.var(VarKey::U(Cell::new(2, 3)), VarKind::Integer, 0.0, 7.0);
        let p = b.binary(VarKey::Plane { axis: PlaneAxis::Diag, side: PlaneSide::Upper, index: 4 });
        let c = b.add_var("slack".into(), VarKind::Continuous, f64::NEG_INFINITY, 3.5);
        let f = b.add_var("free".into(), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        b.add_row("r1", [(x, 1.0), (u, -2.5), (c, 1e-3)], RowSense::Le, 4.0);
        b.add_row("r2", [(p, 12345678.901234), (f, -1.0)], RowSense::Ge, -1.5);
        b.add_row("r3", [(x, 1.0), (p, 1.0)], RowSense::Eq, 1.0);
        b.set_objective([(x, 189.08123456789), (u, 1.0)], 67_012_345.678_9);
        b.finish()
    }

    #[test]
    fn round_trips() {
        let p = sample();
        for (fmt, tol) in [(ModelFormat::MpsFree, 0.0), (ModelFormat::Lp, 0.0), (ModelFormat::MpsFixed, 1e-9)] {
            let text = render_model(&p, fmt);
            let q = match fmt {
                ModelFormat::Lp => parse_lp(&text).unwrap(),
                _ => parse_mps(&text).unwrap(),
            };
            let d = max_coefficient_difference(&p, &q).unwrap_or_else(|| panic!("{fmt:?} structure differs:\n{text}"));
            assert!(d <= tol, "{fmt:?}: {d}");
            assert_eq!(render_model(&p, fmt), text);
            let name = |m: &MipProblem| m.var(VarKey::U(Cell::new(2, 3))).map(|v| m.variables()[v.0].name.clone());
            assert_eq!(name(&q), name(&p));
            assert!(name(&q).is_some());
        }
    }

    #[test]
    fn fixed_form_fields() {
        let text = render_model(&sample(), ModelFormat::MpsFixed);
        for line in text.lines().filter(|l| l.starts_with("    C")) {
            assert!(line.len() <= 36, "{line}");
            assert_eq!(&line[4..12], line.split_whitespace().next().unwrap());
        }
        assert!(text.contains("*@ C0000000 x_0_1"));
        assert_eq!(fixed_num(67_012_345.678_9), "67012345.679");
        assert!(fixed_num(-67_012_345.678_9).len() <= 12);
        assert!(fixed_num(1.0 / 3.0).len() <= 12);
    }

    #[test]
    fn empty_objective() {
        let mut b = ProblemBuilder::new("e");
        let x = b.binary(VarKey::X(Cell::new(0, 0)));
        b.add_row("r", [(x, 1.0)], RowSense::Le, 1.0);
        let p = b.finish();
        for fmt in [ModelFormat::MpsFree, ModelFormat::MpsFixed, ModelFormat::Lp] {
            let text = render_model(&p, fmt);
            let q = if fmt == ModelFormat::Lp { parse_lp(&text).unwrap() } else { parse_mps(&text).unwrap() };
            assert_eq!(max_coefficient_difference(&p, &q), Some(0.0));
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_mps("NAME x\nROWS\n N OBJ\nBOGUS\n"), Err(Error::ModelParse { .. })));
        assert!(parse_mps("NAME x\nROWS\n N OBJ\n").is_err());
        assert!(parse_lp("Minimize\n obj: x\n").is_err());
        assert!("mps".parse::<ModelFormat>().is_ok());
        assert!("xlsx".parse::<ModelFormat>().is_err());
    }
}
