//! Line-delimited machine records and the human-readable report rendered
//! from them.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` exactly. Non-finite values are written as
//! the strings `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Int(i64),
    Bool(bool),
    Null,
}

/// Ordered set of named fields; the first field is always `record`.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    fields: Vec<(String, Value)>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Self {
            fields: vec![("record".into(), Value::Str(kind.into()))],
        }
    }

    pub fn kind(&self) -> &str {
        match &self.fields[0].1 {
            Value::Str(s) => s,
            _ => "",
        }
    }

    fn push(mut self, key: &str, v: Value) -> Self {
        self.fields.push((key.into(), v));
        self
    }

    pub fn str(self, key: &str, v: &str) -> Self {
        self.push(key, Value::Str(v.into()))
    }

    pub fn num(self, key: &str, v: f64) -> Self {
        self.push(key, Value::Num(v))
    }

    pub fn int(self, key: &str, v: usize) -> Self {
        self.push(key, Value::Int(v as i64))
    }

    pub fn uint(self, key: &str, v: u64) -> Self {
        // Seeds may exceed i64; keep them as decimal strings.
        self.push(key, Value::Str(v.to_string()))
    }

    pub fn bool(self, key: &str, v: bool) -> Self {
        self.push(key, Value::Bool(v))
    }

    pub fn opt_num(self, key: &str, v: Option<f64>) -> Self {
        self.push(key, v.map_or(Value::Null, Value::Num))
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            Some(Value::Num(x)) => Ok(*x),
            Some(Value::Int(i)) => Ok(*i as f64),
            Some(Value::Str(s)) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(Error::Record(format!("`{key}` is not a number"))),
            },
            _ => Err(Error::Record(format!("missing number `{key}` in {} record", self.kind()))),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key) {
            Some(Value::Int(i)) if *i >= 0 => Ok(*i as usize),
            _ => Err(Error::Record(format!("missing count `{key}` in {} record", self.kind()))),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.get(key) {
            Some(Value::Str(s)) => Ok(s),
            _ => Err(Error::Record(format!("missing string `{key}` in {} record", self.kind()))),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            Some(Value::Bool(b)) => Ok(*b),
            _ => Err(Error::Record(format!("missing flag `{key}` in {} record", self.kind()))),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&serde_json::to_string(k).expect("string key"));
            out.push(':');
            match v {
                Value::Str(s) => out.push_str(&serde_json::to_string(s).expect("string value")),
                Value::Num(x) => out.push_str(&format_num(*x)),
                Value::Int(i) => write!(out, "{i}").expect("write to string"),
                Value::Bool(b) => write!(out, "{b}").expect("write to string"),
                Value::Null => out.push_str("null"),
            }
        }
        out.push('}');
        out
    }

    pub fn parse(line: &str) -> Result<Self> {
        let raw: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::Record(format!("{e}: {line}")))?;
        let serde_json::Value::Object(map) = raw else {
            return Err(Error::Record(format!("expected an object: {line}")));
        };
        let mut fields = Vec::with_capacity(map.len());
        let mut kind = None;
        for (k, v) in map {
            let v = match v {
                serde_json::Value::String(s) => Value::Str(s),
                serde_json::Value::Bool(b) => Value::Bool(b),
                serde_json::Value::Null => Value::Null,
                serde_json::Value::Number(n) => match n.as_i64() {
                    Some(i) => Value::Int(i),
                    None => Value::Num(n.as_f64().ok_or_else(|| Error::Record(format!("bad number {n}")))?),
                },
                other => return Err(Error::Record(format!("unsupported value {other} for `{k}`"))),
            };
            if k == "record" {
                kind = Some(v);
            } else {
                fields.push((k, v));
            }
        }
        let kind = kind.ok_or_else(|| Error::Record(format!("missing `record` field: {line}")))?;
        fields.insert(0, ("record".into(), kind));
        Ok(Self { fields })
    }
}

/// `{:.16e}` for finite values; quoted names otherwise.
pub fn format_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".into()
    } else if x > 0.0 {
        "\"inf\"".into()
    } else {
        "\"-inf\"".into()
    }
}

pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Record::parse)
        .collect()
}

/// Two-column whitespace-separated data for plotting.
pub fn write_dat(path: &Path, header: &str, rows: &[(f64, f64)]) -> Result<()> {
    let mut text = format!("# {header}\n");
    for (x, y) in rows {
        writeln!(text, "{x:.16e} {y:.16e}").expect("write to string");
    }
    fs::write(path, text)?;
    Ok(())
}

fn six(x: f64) -> String {
    format!("{x:.6e}")
}

fn opt_six(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), six)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Renders the report from records alone.
pub fn render_report(records: &[Record]) -> Result<String> {
    let run = records
        .iter()
        .find(|r| r.kind() == "run")
        .ok_or_else(|| Error::Record("no run record".into()))?;
    let estimator = run.text("estimator")?;
    let mut out = String::new();
    writeln!(out, "estimator   {estimator}").unwrap();
    writeln!(out, "seed        {}", run.text("seed")?).unwrap();
    writeln!(out, "config      sha256:{}", run.text("config_hash")?).unwrap();
    writeln!(out, "version     {}", run.text("code_version")?).unwrap();
    out.push('\n');
    let of = |kind: &'static str| records.iter().filter(move |r| r.kind() == kind);
    match estimator {
        "one-volume" | "two-volume" => render_wegner(&mut out, of("summary").next(), of("epsilon"))?,
        "geometry-check" => {
            for r in of("geometry") {
                writeln!(
                    out,
                    "d={}: {}/{} classified, {} violations (complete {}, A {}, B {}, C {}, D {}, brute-force mismatches {})",
                    r.usize("dim")?,
                    r.usize("classified")?,
                    r.usize("trials")?,
                    r.usize("violations")?,
                    r.usize("complete")?,
                    r.usize("case_a")?,
                    r.usize("case_b")?,
                    r.usize("case_c")?,
                    r.usize("case_d")?,
                    r.usize("brute_force_mismatches")?,
                )
                .unwrap();
            }
            let s = of("separation").next().ok_or_else(|| Error::Record("no separation record".into()))?;
            writeln!(
                out,
                "separation: {}/{} classified, {} violations",
                s.usize("classified")?,
                s.usize("trials")?,
                s.usize("violations")?
            )
            .unwrap();
        }
        "field-diagnostics" => {
            let s = of("diagnostics").next().ok_or_else(|| Error::Record("no diagnostics record".into()))?;
            writeln!(out, "samples             {}", s.usize("samples")?).unwrap();
            writeln!(out, "space dimension     {}", s.usize("space_dim")?).unwrap();
            writeln!(out, "Z                   {}", six(s.f64("z")?)).unwrap();
            writeln!(out, "max |cov - I|       {}", six(s.f64("max_cov_deviation")?)).unwrap();
            out.push('\n');
            writeln!(out, "{:>6} {:>14} {:>14} {:>14} {:>14}", "index", "mean", "variance", "ks_d", "ks_p").unwrap();
            for r in of("coefficient") {
                writeln!(
                    out,
                    "{:>6} {:>14} {:>14} {:>14} {:>14}",
                    r.usize("index")?,
                    six(r.f64("mean")?),
                    six(r.f64("variance")?),
                    six(r.f64("ks_d")?),
                    six(r.f64("ks_p")?)
                )
                .unwrap();
            }
        }
        "modulus" => {
            writeln!(
                out,
                "{:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
                "b", "nu_hat", "std_error", "closed_form", "b/sqrt(2pi)", "cond_sd"
            )
            .unwrap();
            for r in of("modulus") {
                writeln!(
                    out,
                    "{:>14} {:>14} {:>14} {:>14} {:>14} {:>14}",
                    six(r.f64("b")?),
                    six(r.f64("nu_hat")?),
                    six(r.f64("std_error")?),
                    six(r.f64("closed_form")?),
                    six(r.f64("bound")?),
                    six(r.f64("conditional_sd")?)
                )
                .unwrap();
            }
        }
        other => return Err(Error::Record(format!("unknown estimator `{other}`"))),
    }
    Ok(out)
}

fn render_wegner<'a>(
    out: &mut String,
    summary: Option<&Record>,
    rows: impl Iterator<Item = &'a Record>,
) -> Result<()> {
    let s = summary.ok_or_else(|| Error::Record("no summary record".into()))?;
    writeln!(
        out,
        "samples     {} ({} failed)",
        s.usize("samples")?,
        s.usize("failed")?
    )
    .unwrap();
    if let Some(e) = s.opt_f64("energy")? {
        writeln!(out, "energy      {}", six(e)).unwrap();
    }
    if let (Some(lo), Some(hi)) = (s.opt_f64("j_lo")?, s.opt_f64("j_hi")?) {
        writeln!(out, "window J    [{}, {}]", six(lo), six(hi)).unwrap();
    }
    writeln!(out, "volume      {}", six(s.f64("volume")?)).unwrap();
    if let Some(v) = s.opt_f64("volume_prime")? {
        writeln!(out, "volume'     {}", six(v)).unwrap();
    }
    writeln!(out, "moment      {}", six(s.f64("moment")?)).unwrap();
    writeln!(out, "Z           {}", six(s.f64("z")?)).unwrap();
    if let Some(z) = s.opt_f64("z_prime")? {
        writeln!(out, "Z'          {}", six(z)).unwrap();
    }
    writeln!(out, "c_hat       {}", opt_six(s.opt_f64("c_hat")?)).unwrap();
    writeln!(out, "monotone    {}", yes_no(s.flag("monotone")?)).unwrap();
    writeln!(out, "shape       {}", if s.flag("shape_holds")? { "pass" } else { "fail" }).unwrap();
    if let Some(c) = s.opt_f64("level_count_correlation")? {
        writeln!(out, "corr N(J)   {}", six(c)).unwrap();
        writeln!(
            out,
            "mean N(J)   {} / {}",
            six(s.f64("mean_count")?),
            six(s.f64("mean_count_prime")?)
        )
        .unwrap();
    }
    out.push('\n');
    writeln!(
        out,
        "{:>14} {:>8} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "epsilon", "hits", "p_hat", "ci_lo", "ci_hi", "modulus", "rhs"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:>14} {:>8} {:>14} {:>14} {:>14} {:>14} {:>14}",
            six(r.f64("epsilon")?),
            r.usize("hits")?,
            six(r.f64("p_hat")?),
            six(r.f64("ci_lo")?),
            six(r.f64("ci_hi")?),
            six(r.f64("modulus")?),
            six(r.f64("rhs")?)
        )
        .unwrap();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn json_layout() {
        let r = Record::new("epsilon")
            .str("estimator", "one-volume")
            .num("p_hat", 0.25)
            .int("hits", 3)
            .bool("ok", true)
            .opt_num("c_hat", None)
            .num("d", f64::INFINITY);
        assert_eq!(
            r.to_json(),
            r#"{"record":"epsilon","estimator":"one-volume","p_hat":2.5000000000000000e-1,"hits":3,"ok":true,"c_hat":null,"d":"inf"}"#
        );
        let back = Record::parse(&r.to_json()).unwrap();
        assert_eq!(back.kind(), "epsilon");
        assert_eq!(back.f64("p_hat").unwrap(), 0.25);
        assert_eq!(back.usize("hits").unwrap(), 3);
        assert_eq!(back.opt_f64("c_hat").unwrap(), None);
        assert_eq!(back.f64("d").unwrap(), f64::INFINITY);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(Record::parse("[1,2]").is_err());
        assert!(Record::parse(r#"{"x":1}"#).is_err());
        assert!(Record::parse("{").is_err());
    }

    proptest! {
        #[test]
        fn floats_round_trip_exactly(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let line = Record::new("t").num("x", x).to_json();
            prop_assert_eq!(Record::parse(&line).unwrap().f64("x").unwrap().to_bits(), x.to_bits());
        }
    }
}
