use std::io::{Read, Write};

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};

/// One logged sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: f64,
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
    pub u: DVector<f64>,
    pub xc: Vector2<f64>,
    pub e_kin: f64,
    pub e_pot: f64,
}

impl Record {
    pub fn energy(&self) -> f64 {
        self.e_kin + self.e_pot
    }
}

/// Uniformly sampled closed-loop rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub links: usize,
    pub records: Vec<Record>,
}

const COORDS: [&str; 5] = ["alpha", "beta", "gamma", "qm1", "qm2"];

/// `t,alpha,...,qr<n>,d_alpha,...,u_yaw,u_m1,u_m2,u_r1..,xc_x,xc_y,E_kin,E_pot`
pub fn csv_header(links: usize) -> Vec<String> {
    let coords: Vec<String> = COORDS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=links).map(|k| format!("qr{k}")))
        .collect();
    let mut h = vec!["t".to_string()];
    h.extend(coords.iter().cloned());
    h.extend(coords.iter().map(|c| format!("d_{c}")));
    h.extend(["u_yaw", "u_m1", "u_m2"].map(String::from));
    h.extend((1..=links).map(|k| format!("u_r{k}")));
    h.extend(["xc_x", "xc_y", "E_kin", "E_pot"].map(String::from));
    h
}

impl Trajectory {
    pub fn new(links: usize) -> Self {
        Self {
            links,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    /// Extracts a multi-component signal per record.
    pub fn signal<F: Fn(&Record) -> Vec<f64>>(&self, f: F) -> Vec<Vec<f64>> {
        self.records.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(csv_header(self.links))?;
        for r in &self.records {
            let row = std::iter::once(r.t)
                .chain(r.q.iter().copied())
                .chain(r.qd.iter().copied())
                .chain(r.u.iter().copied())
                .chain([r.xc.x, r.xc.y, r.e_kin, r.e_pot])
                .map(|x| x.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        // 1 + 2N + (N - 2) + 4 columns with N = 5 + n.
        let links = header
            .len()
            .checked_sub(18)
            .filter(|x| x % 3 == 0)
            .map(|x| x / 3)
            .ok_or_else(|| Error::InvalidScenario(format!("unexpected CSV column count {}", header.len())))?;
        if header != csv_header(links) {
            return Err(Error::InvalidScenario(
                "CSV header does not match the trajectory layout".into(),
            ));
        }
        let dof = 5 + links;
        let mut records = Vec::new();
        for row in rd.records() {
            let row = row?;
            let v: Vec<f64> = row
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::InvalidScenario(format!("bad CSV value {s:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            let mut at = 1;
            let mut take = |k: usize| {
                let s = DVector::from_column_slice(&v[at..at + k]);
                at += k;
                s
            };
            let q = take(dof);
            let qd = take(dof);
            let u = take(dof - 2);
            let tail = take(4);
            records.push(Record {
                t: v[0],
                q,
                qd,
                u,
                xc: Vector2::new(tail[0], tail[1]),
                e_kin: tail[2],
                e_pot: tail[3],
            });
        }
        Ok(Self { links, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(links: usize, v: &[f64]) -> Record {
        let dof = 5 + links;
        let at = |i: usize| v[i % v.len()];
        Record {
            t: at(0).abs(),
            q: DVector::from_fn(dof, |i, _| at(i + 1)),
            qd: DVector::from_fn(dof, |i, _| at(i + 2) * 3.0),
            u: DVector::from_fn(dof - 2, |i, _| at(i + 3) * 1e5),
            xc: Vector2::new(at(4) * 1e-9, at(5)),
            e_kin: at(6).abs(),
            e_pot: -at(7).abs() * 1e3,
        }
    }

    #[test]
    fn header_layout() {
        let h = csv_header(3);
        assert_eq!(h.len(), 1 + 8 + 8 + 6 + 4);
        assert_eq!(&h[..7], &["t", "alpha", "beta", "gamma", "qm1", "qm2", "qr1"]);
        assert_eq!(h[9], "d_alpha");
        assert_eq!(&h[17..20], &["u_yaw", "u_m1", "u_m2"]);
        assert_eq!(h.last().unwrap(), "E_pot");
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "t,a,b\n0,1,2\n";
        assert!(Trajectory::read_csv(text.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_exact(
            links in prop_oneof![Just(3usize), Just(7usize)],
            values in proptest::collection::vec(-1e6f64..1e6, 8..40),
            rows in 1usize..5,
        ) {
            let traj = Trajectory {
                links,
                records: (0..rows).map(|k| record(links, &values[k..])).collect(),
            };
            let mut buf = Vec::new();
            traj.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), traj);
        }
    }
}
