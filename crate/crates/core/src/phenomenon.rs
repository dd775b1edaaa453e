//! Block-correlated ground-truth fields over an `nx × ny` sensor grid and
//! `nt` time instants.
//!
//! The grid is tiled into `s_p × s_p` spatial blocks and `t_p`-long time
//! windows, aligned at the origin. Every block holds one value drawn
//! uniformly from `[lo, hi]`; edge blocks may be partial.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Grid dimensions and correlation block sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    /// Spatial block side [cells].
    pub s_p: usize,
    /// Temporal block length [instants].
    pub t_p: usize,
}

impl Geometry {
    /// 20×20 sensors, 20 instants, 10×10×10 blocks.
    pub const STANDARD: Geometry = Geometry {
        nx: 20,
        ny: 20,
        nt: 20,
        s_p: 10,
        t_p: 10,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nx", self.nx),
            ("ny", self.ny),
            ("nt", self.nt),
            ("s_p", self.s_p),
            ("t_p", self.t_p),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        if self.s_p > self.nx || self.s_p > self.ny {
            return Err(Error::invalid("s_p", "must not exceed nx or ny"));
        }
        if self.t_p > self.nt {
            return Err(Error::invalid("t_p", "must not exceed nt"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sensors(&self) -> usize {
        self.nx * self.ny
    }

    /// Blocks per axis `(x, y, t)`.
    pub fn block_dims(&self) -> (usize, usize, usize) {
        (
            self.nx.div_ceil(self.s_p),
            self.ny.div_ceil(self.s_p),
            self.nt.div_ceil(self.t_p),
        )
    }

    pub fn n_blocks(&self) -> usize {
        let (bx, by, bt) = self.block_dims();
        bx * by * bt
    }

    /// Flat index; time is the fastest axis so each sensor's stream is
    /// contiguous.
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        (x * self.ny + y) * self.nt + t
    }

    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let t = index % self.nt;
        let xy = index / self.nt;
        (xy / self.ny, xy % self.ny, t)
    }

    pub fn block_of(&self, x: usize, y: usize, t: usize) -> usize {
        let (_, by, bt) = self.block_dims();
        ((x / self.s_p) * by + y / self.s_p) * bt + t / self.t_p
    }
}

/// A ground-truth field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub geometry: Geometry,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
    /// Indexed by [`Geometry::index`].
    pub values: Vec<f64>,
}

/// Draw a field. `jitter` adds independent uniform `±jitter` per cell on top
/// of the block value (clamped into `[lo, hi]`); 0 gives block-identical
/// values.
pub fn generate_field(
    geometry: Geometry,
    lo: f64,
    hi: f64,
    seed: u64,
    jitter: f64,
) -> Result<Field> {
    geometry.validate()?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(
            "range",
            format!("need lo < hi, got ({lo}, {hi})"),
        ));
    }
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(Error::invalid("jitter", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<f64> = (0..geometry.n_blocks())
        .map(|_| lo + rng.random::<f64>() * (hi - lo))
        .collect();
    let mut values = vec![0.0; geometry.len()];
    for x in 0..geometry.nx {
        for y in 0..geometry.ny {
            for t in 0..geometry.nt {
                let mut v = blocks[geometry.block_of(x, y, t)];
                if jitter > 0.0 {
                    v = (v + rng.random_range(-jitter..=jitter)).clamp(lo, hi);
                }
                values[geometry.index(x, y, t)] = v;
            }
        }
    }
    Ok(Field {
        geometry,
        lo,
        hi,
        seed,
        values,
    })
}

impl Field {
    /// Time series of sensor `(x, y)`.
    pub fn stream(&self, x: usize, y: usize) -> &[f64] {
        let start = self.geometry.index(x, y, 0);
        &self.values[start..start + self.geometry.nt]
    }

    /// Mean of `values` over each correlation block, in block order.
    pub fn block_means(&self, values: &[f64]) -> Result<Vec<f64>> {
        let g = &self.geometry;
        if values.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: g.len(),
                actual: values.len(),
            });
        }
        let mut sums = vec![0.0; g.n_blocks()];
        let mut counts = vec![0usize; g.n_blocks()];
        for (i, &v) in values.iter().enumerate() {
            let (x, y, t) = g.coords(i);
            let b = g.block_of(x, y, t);
            sums[b] += v;
            counts[b] += 1;
        }
        Ok(sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| s / c as f64)
            .collect())
    }

    /// Write as `x,y,t,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "t", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            let (x, y, t) = self.geometry.coords(i);
            w.write_record(&[x.to_string(), y.to_string(), t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read `x,y,t,value` rows back into a field with the given block sizes.
    ///
    /// Grid extents come from the largest coordinates; every cell must be
    /// present exactly once. `lo`/`hi` are the observed extremes.
    pub fn read_csv<R: Read>(reader: R, s_p: usize, t_p: usize, seed: u64) -> Result<Field> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for (n, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            if rec.len() != 4 {
                return Err(Error::FieldCsv {
                    line,
                    reason: format!("expected 4 columns, got {}", rec.len()),
                });
            }
            let idx = |k: usize| {
                rec[k].trim().parse::<usize>().map_err(|e| Error::FieldCsv {
                    line,
                    reason: format!("column {k}: {e}"),
                })
            };
            let value = rec[3].trim().parse::<f64>().map_err(|e| Error::FieldCsv {
                line,
                reason: format!("value: {e}"),
            })?;
            rows.push((idx(0)?, idx(1)?, idx(2)?, value));
        }
        if rows.is_empty() {
            return Err(Error::FieldCsv {
                line: 1,
                reason: "no data rows".into(),
            });
        }
        let nx = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
        let ny = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
        let nt = rows.iter().map(|r| r.2).max().unwrap_or(0) + 1;
        let geometry = Geometry {
            nx,
            ny,
            nt,
            s_p,
            t_p,
        };
        geometry.validate()?;
        let mut values = vec![f64::NAN; geometry.len()];
        for &(x, y, t, v) in &rows {
            let i = geometry.index(x, y, t);
            if !values[i].is_nan() {
                return Err(Error::FieldCsv {
                    line: 0,
                    reason: format!("duplicate cell ({x}, {y}, {t})"),
                });
            }
            values[i] = v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            let (x, y, t) = geometry.coords(i);
            return Err(Error::FieldCsv {
                line: 0,
                reason: format!("missing cell ({x}, {y}, {t})"),
            });
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Field {
            geometry,
            lo,
            hi,
            seed,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn distinct(values: &[f64]) -> usize {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    }

    #[test]
    fn standard_geometry_has_eight_blocks() {
        let f = generate_field(Geometry::STANDARD, 5.0, 10.0, 42, 0.0).unwrap();
        assert_eq!(f.values.len(), 8000);
        assert_eq!(Geometry::STANDARD.n_blocks(), 8);
        assert_eq!(distinct(&f.values), 8);
        assert!(f.values.iter().all(|&v| (5.0..=10.0).contains(&v)));
    }

    #[test]
    fn values_are_constant_within_blocks() {
        let g = Geometry {
            nx: 7,
            ny: 5,
            nt: 9,
            s_p: 3,
            t_p: 4,
        };
        let f = generate_field(g, 0.0, 1.0, 9, 0.0).unwrap();
        assert_eq!(g.n_blocks(), 3 * 2 * 3);
        let means = f.block_means(&f.values).unwrap();
        for (i, &v) in f.values.iter().enumerate() {
            let (x, y, t) = g.coords(i);
            assert!((v - means[g.block_of(x, y, t)]).abs() < 1e-12);
        }
        assert_eq!(distinct(&f.values), g.n_blocks());
    }

    #[test]
    fn single_cell_field() {
        let g = Geometry {
            nx: 1,
            ny: 1,
            nt: 1,
            s_p: 1,
            t_p: 1,
        };
        let f = generate_field(g, 5.0, 10.0, 0, 0.0).unwrap();
        assert_eq!(f.values.len(), 1);
        assert!((5.0..=10.0).contains(&f.values[0]));
    }

    #[test]
    fn same_seed_same_field() {
        let a = generate_field(Geometry::STANDARD, 5.0, 10.0, 3, 0.0).unwrap();
        let b = generate_field(Geometry::STANDARD, 5.0, 10.0, 3, 0.0).unwrap();
        let c = generate_field(Geometry::STANDARD, 5.0, 10.0, 4, 0.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut g = Geometry::STANDARD;
        g.nx = 0;
        assert!(generate_field(g, 5.0, 10.0, 0, 0.0).is_err());
        let mut g = Geometry::STANDARD;
        g.s_p = 21;
        assert!(generate_field(g, 5.0, 10.0, 0, 0.0).is_err());
        let mut g = Geometry::STANDARD;
        g.t_p = 0;
        assert!(generate_field(g, 5.0, 10.0, 0, 0.0).is_err());
        assert!(generate_field(Geometry::STANDARD, 10.0, 5.0, 0, 0.0).is_err());
    }

    #[test]
    fn jitter_breaks_block_identity_but_respects_range() {
        let f = generate_field(Geometry::STANDARD, 5.0, 10.0, 1, 0.2).unwrap();
        assert!(distinct(&f.values) > 8);
        assert!(f.values.iter().all(|&v| (5.0..=10.0).contains(&v)));
    }

    #[test]
    fn streams_are_time_contiguous() {
        let f = generate_field(Geometry::STANDARD, 5.0, 10.0, 1, 0.0).unwrap();
        let s = f.stream(13, 4);
        assert_eq!(s.len(), 20);
        for (t, &v) in s.iter().enumerate() {
            assert_eq!(v, f.values[Geometry::STANDARD.index(13, 4, t)]);
        }
    }

    #[test]
    fn csv_round_trip() {
        let g = Geometry {
            nx: 4,
            ny: 3,
            nt: 6,
            s_p: 2,
            t_p: 3,
        };
        let f = generate_field(g, 5.0, 10.0, 8, 0.0).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y,t,value\n"));
        assert_eq!(text.lines().count(), 1 + g.len());
        let back = Field::read_csv(buf.as_slice(), 2, 3, 8).unwrap();
        assert_eq!(back.geometry, g);
        assert_eq!(back.values, f.values);
    }

    #[test]
    fn csv_rejects_missing_cells() {
        let text = "x,y,t,value\n0,0,0,5.0\n1,0,0,6.0\n0,0,1,7.0\n";
        assert!(Field::read_csv(text.as_bytes(), 1, 1, 0).is_err());
        let text = "x,y,t,value\n0,0,0,abc\n";
        assert!(matches!(
            Field::read_csv(text.as_bytes(), 1, 1, 0),
            Err(Error::FieldCsv { line: 2, .. })
        ));
    }
}
