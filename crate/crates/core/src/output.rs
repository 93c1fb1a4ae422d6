//! Plain-text table output shared by the report writers.

use std::fmt::Write;

/// Formats a float with 17 significant digits, `.` decimal separator.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.16e}")
}

/// Minimal CSV builder; all fields are numeric or plain identifiers so no quoting is needed.
#[derive(Debug, Default, Clone)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn with_header<S: AsRef<str>>(columns: &[S]) -> Self {
        let mut csv = Self::default();
        let cols: Vec<&str> = columns.iter().map(|c| c.as_ref()).collect();
        csv.buf.push_str(&cols.join(","));
        csv.buf.push('\n');
        csv
    }

    pub fn row(&mut self, fields: &[Field]) {
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match f {
                Field::Int(v) => write!(self.buf, "{v}").unwrap(),
                Field::Float(v) => self.buf.push_str(&fmt_f64(*v)),
                Field::Text(s) => self.buf.push_str(s),
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

#[derive(Debug, Clone)]
pub enum Field {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<i64> for Field {
    fn from(v: i64) -> Self {
        Field::Int(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.0), "0");
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::with_header(&["j", "value"]);
        c.row(&[1usize.into(), 0.5.into()]);
        assert_eq!(c.finish(), "j,value\n1,5.0000000000000000e-1\n");
    }
}
