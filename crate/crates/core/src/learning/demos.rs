use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One demonstration: time stamps with joint positions and velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qdot: Vec<DVector<f64>>,
}

impl Trajectory {
    /// Validates the samples. Missing velocities are filled by central
    /// differences over the time stamps (one-sided at the ends).
    pub fn new(t: Vec<f64>, q: Vec<DVector<f64>>, qdot: Option<Vec<DVector<f64>>>) -> Result<Self> {
        if t.is_empty() || t.len() != q.len() {
            return Err(Error::Demo(format!("{} time stamps for {} positions", t.len(), q.len())));
        }
        let d = q[0].len();
        if d == 0 || q.iter().any(|x| x.len() != d) {
            return Err(Error::Demo("positions must share one positive dimension".into()));
        }
        if let Some(i) = t.windows(2).position(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::Demo(format!("time stamps must strictly increase (row {})", i + 1)));
        }
        let qdot = match qdot {
            Some(v) => {
                if v.len() != q.len() || v.iter().any(|x| x.len() != d) {
                    return Err(Error::Demo("velocities must match positions in count and dimension".into()));
                }
                v
            }
            None => {
                if t.len() < 2 {
                    return Err(Error::Demo("velocities need at least two samples to be differenced".into()));
                }
                let n = t.len();
                (0..n)
                    .map(|i| {
                        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
                        (&q[hi] - &q[lo]) / (t[hi] - t[lo])
                    })
                    .collect()
            }
        };
        let finite = |v: &DVector<f64>| v.iter().all(|x| x.is_finite());
        if t.iter().any(|x| !x.is_finite()) || !q.iter().all(finite) || !qdot.iter().all(finite) {
            return Err(Error::Demo("non-finite value in demonstration".into()));
        }
        Ok(Self { t, q, qdot })
    }

    pub fn dim(&self) -> usize {
        self.q.first().map_or(0, DVector::len)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Reads `t,q0..q{d-1}[,qd0..qd{d-1}][,phi]`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cols: &[String] = &header;
        if cols.last().is_some_and(|c| c == "phi") {
            cols = &cols[..cols.len() - 1];
        }
        if cols.first().map(String::as_str) != Some("t") {
            return Err(Error::Demo("first column must be `t`".into()));
        }
        let d = cols[1..].iter().take_while(|c| c.starts_with('q') && !c.starts_with("qd")).count();
        let expect_q: Vec<String> = (0..d).map(|i| format!("q{i}")).collect();
        let expect_qd: Vec<String> = (0..d).map(|i| format!("qd{i}")).collect();
        let has_qd = match &cols[1 + d..] {
            [] => false,
            rest if rest == expect_qd.as_slice() => true,
            _ => return Err(Error::Demo(format!("expected columns t,q0..q{},qd0..qd{} (qd optional)", d.max(1) - 1, d.max(1) - 1))),
        };
        if d == 0 || cols[1..1 + d] != expect_q[..] {
            return Err(Error::Demo("position columns must be named q0, q1, ...".into()));
        }
        let (mut t, mut q, mut qd) = (Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Demo(format!("row {}: column {} is not a number", row + 1, header[i])))
            };
            t.push(parse(0)?);
            q.push(DVector::from_iterator(d, (1..=d).map(&parse).collect::<Result<Vec<_>>>()?));
            if has_qd {
                qd.push(DVector::from_iterator(d, (d + 1..=2 * d).map(&parse).collect::<Result<Vec<_>>>()?));
            }
        }
        Self::new(t, q, has_qd.then_some(qd))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_csv(std::fs::File::open(path)?).map_err(|e| match e {
            Error::Demo(msg) => Error::Demo(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Writes the demo format, with a trailing `phi` column when given.
    pub fn write_csv<W: Write>(&self, writer: W, phi: Option<&[f64]>) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("q{i}")));
        header.extend((0..d).map(|i| format!("qd{i}")));
        if phi.is_some() {
            header.push("phi".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![self.t[i].to_string()];
            rec.extend(self.q[i].iter().map(f64::to_string));
            rec.extend(self.qdot[i].iter().map(f64::to_string));
            if let Some(p) = phi {
                rec.push(p[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemoSet {
    pub trajectories: Vec<Trajectory>,
}

impl DemoSet {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        if let Some(first) = trajectories.first() {
            let d = first.dim();
            if trajectories.iter().any(|tr| tr.dim() != d) {
                return Err(Error::Demo("trajectories have different dimensions".into()));
            }
        }
        Ok(Self { trajectories })
    }

    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        Self::new(paths.iter().map(Trajectory::load).collect::<Result<_>>()?)
    }

    pub fn dim(&self) -> Option<usize> {
        self.trajectories.first().map(Trajectory::dim)
    }

    /// All `(q, qdot)` pairs in trajectory order.
    pub fn samples(&self) -> Vec<(DVector<f64>, DVector<f64>)> {
        self.trajectories
            .iter()
            .flat_map(|tr| tr.q.iter().cloned().zip(tr.qdot.iter().cloned()))
            .collect()
    }

    pub fn sample_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocities_from_differences() {
        let csv = "t,q0\n0,0\n1,1\n2,4\n";
        let tr = Trajectory::read_csv(csv.as_bytes()).unwrap();
        let v: Vec<f64> = tr.qdot.iter().map(|v| v[0]).collect();
        assert_eq!(v, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn explicit_velocities_and_round_trip() {
        let csv = "t,q0,q1,qd0,qd1\n0,1,2,3,4\n0.5,1.5,2,3,4\n";
        let tr = Trajectory::read_csv(csv.as_bytes()).unwrap();
        assert_eq!(tr.qdot[1], DVector::from_vec(vec![3.0, 4.0]));
        let mut out = Vec::new();
        tr.write_csv(&mut out, Some(&[1.0, 0.5])).unwrap();
        assert_eq!(Trajectory::read_csv(out.as_slice()).unwrap(), tr);
    }

    #[test]
    fn rejects_unsorted_time() {
        let csv = "t,q0\n0,0\n0,1\n";
        assert!(matches!(Trajectory::read_csv(csv.as_bytes()), Err(Error::Demo(_))));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(Trajectory::read_csv("time,q0\n0,0\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("t,q0,qd1\n0,0,0\n".as_bytes()).is_err());
    }
}
