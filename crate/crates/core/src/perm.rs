//! Permutation tables over n-bit strings: generation, inversion, file I/O.
//!
//! A table is a validated bijection on {0,1}^n, stored densely. Widths are
//! capped at 20 bits (a 2^20-entry table); the seeded generators additionally
//! require n ≥ 2. File format, bit-exact:
//!
//! ```text
//! perm v1 n=<n>
//! <line i: f(i) as an n-character 0/1 string, MSB first>
//! ```
//!
//! Lines starting with `#` and blank lines are ignored; the trailing newline
//! is optional.

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::bits;
use crate::error::{Error, Result};

pub const MIN_TABLE_WIDTH: usize = 1;
pub const MAX_TABLE_WIDTH: usize = 20;
pub const MIN_GENERATED_WIDTH: usize = 2;

const AFFINE_RETRY_LIMIT: usize = 256;

/// The built-in table generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    Identity,
    BitReverse,
    AffineGf2,
    Random,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Identity => "identity",
            GeneratorKind::BitReverse => "bit_reverse",
            GeneratorKind::AffineGf2 => "affine_gf2",
            GeneratorKind::Random => "random",
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(GeneratorKind::Identity),
            "bit_reverse" => Ok(GeneratorKind::BitReverse),
            "affine_gf2" => Ok(GeneratorKind::AffineGf2),
            "random" => Ok(GeneratorKind::Random),
            other => Err(Error::BadBitString(format!("unknown generator `{other}`"))),
        }
    }
}

/// A bijection on n-bit values, stored as a lookup table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationTable {
    n: usize,
    table: Vec<usize>,
}

impl PermutationTable {
    /// Validates and wraps an explicit value table (`values[i] = f(i)`).
    pub fn from_values(n: usize, values: Vec<usize>) -> Result<Self> {
        if !(MIN_TABLE_WIDTH..=MAX_TABLE_WIDTH).contains(&n) {
            return Err(Error::TableWidth {
                n,
                min: MIN_TABLE_WIDTH,
                max: MAX_TABLE_WIDTH,
            });
        }
        let expected = 1usize << n;
        if values.len() != expected {
            return Err(Error::TableLength { len: values.len(), n, expected });
        }
        let mut seen = vec![false; expected];
        for &v in &values {
            if v >= expected {
                return Err(Error::ValueWidth { value: v, width: n });
            }
            if seen[v] {
                return Err(Error::NotABijection { value: v });
            }
            seen[v] = true;
        }
        Ok(Self { n, table: values })
    }

    /// Seeded generation. `identity` and `bit_reverse` ignore the seed.
    pub fn generate(kind: GeneratorKind, n: usize, seed: u64) -> Result<Self> {
        if !(MIN_GENERATED_WIDTH..=MAX_TABLE_WIDTH).contains(&n) {
            return Err(Error::TableWidth {
                n,
                min: MIN_GENERATED_WIDTH,
                max: MAX_TABLE_WIDTH,
            });
        }
        match kind {
            GeneratorKind::Identity => Self::from_values(n, (0..1usize << n).collect()),
            GeneratorKind::BitReverse => {
                let shift = usize::BITS as usize - n;
                Self::from_values(n, (0..1usize << n).map(|x| x.reverse_bits() >> shift).collect())
            }
            GeneratorKind::AffineGf2 => Self::affine_gf2(n, seed),
            GeneratorKind::Random => {
                let mut table: Vec<usize> = (0..1usize << n).collect();
                table.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                Self::from_values(n, table)
            }
        }
    }

    /// x ↦ Mx ⊕ c over GF(2) with a seeded invertible M and offset c.
    fn affine_gf2(n: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = (1u64 << n) - 1;
        for _ in 0..AFFINE_RETRY_LIMIT {
            let rows: Vec<usize> =
                (0..n).map(|_| (rng.r#gen::<u64>() & mask) as usize).collect();
            if !gf2_invertible(&rows, n) {
                continue;
            }
            let offset = (rng.r#gen::<u64>() & mask) as usize;
            let table = (0..1usize << n)
                .map(|x| {
                    let mut y = 0usize;
                    for (i, row) in rows.iter().enumerate() {
                        // output bit i (MSB first) is the parity of row_i · x
                        y |= (((row & x).count_ones() as usize) & 1) << (n - 1 - i);
                    }
                    y ^ offset
                })
                .collect();
            return Self::from_values(n, table);
        }
        Err(Error::SingularRetries(AFFINE_RETRY_LIMIT))
    }

    pub fn width(&self) -> usize {
        self.n
    }

    /// Number of table entries, `2^n`.
    pub fn cardinality(&self) -> usize {
        self.table.len()
    }

    /// f(x). Panics on out-of-range input (caller validates widths).
    #[inline]
    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn values(&self) -> &[usize] {
        &self.table
    }

    /// The inverse bijection, as a fresh table.
    pub fn inverse(&self) -> Self {
        let mut inv = vec![0usize; self.table.len()];
        for (x, &fx) in self.table.iter().enumerate() {
            inv[fx] = x;
        }
        Self { n: self.n, table: inv }
    }

    /// Scans for f⁻¹(y) without building the inverse table.
    pub fn preimage(&self, y: usize) -> usize {
        self.table.iter().position(|&v| v == y).expect("bijection covers every value")
    }

    /// Serializes in the `perm v1` format, trailing newline included.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(16 + self.table.len() * (self.n + 1));
        out.push_str(&format!("perm v1 n={}\n", self.n));
        for &v in &self.table {
            out.push_str(&bits::format_bits(v, self.n));
            out.push('\n');
        }
        out
    }

    /// Parses the `perm v1` format. See the module docs for the grammar.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (header_line, header) = lines
            .next()
            .ok_or(Error::PermFormat { line: 1, problem: "missing header".into() })?;
        let n = parse_header(header)
            .ok_or_else(|| Error::PermFormat {
                line: header_line,
                problem: format!("expected `perm v1 n=<n>`, got `{header}`"),
            })?;
        if !(MIN_TABLE_WIDTH..=MAX_TABLE_WIDTH).contains(&n) {
            return Err(Error::TableWidth {
                n,
                min: MIN_TABLE_WIDTH,
                max: MAX_TABLE_WIDTH,
            });
        }

        let expected = 1usize << n;
        let mut values = Vec::with_capacity(expected);
        let mut last_line = header_line;
        for (line, text) in lines {
            last_line = line;
            if values.len() == expected {
                return Err(Error::PermFormat {
                    line,
                    problem: format!("more than {expected} data lines"),
                });
            }
            values.push(bits::parse_bits(text, n).map_err(|_| Error::PermFormat {
                line,
                problem: format!("expected an {n}-bit 0/1 string, got `{text}`"),
            })?);
        }
        if values.len() != expected {
            return Err(Error::PermFormat {
                line: last_line,
                problem: format!("expected {expected} data lines, found {}", values.len()),
            });
        }
        Self::from_values(n, values)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_header(line: &str) -> Option<usize> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("perm") || tokens.next() != Some("v1") {
        return None;
    }
    let n = tokens.next()?.strip_prefix("n=")?.parse().ok()?;
    if tokens.next().is_some() {
        return None;
    }
    Some(n)
}

/// Gaussian elimination over GF(2); rows are n-bit masks.
fn gf2_invertible(rows: &[usize], n: usize) -> bool {
    let mut m = rows.to_vec();
    for col in 0..n {
        let bit = 1usize << (n - 1 - col);
        let Some(pivot) = (col..n).find(|&r| m[r] & bit != 0) else {
            return false;
        };
        m.swap(col, pivot);
        for r in 0..n {
            if r != col && m[r] & bit != 0 {
                m[r] ^= m[col];
            }
        }
    }
    true
}
