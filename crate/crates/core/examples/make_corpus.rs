//! Regenerates `tests/corpus`: small binary matrices plus a manifest of
//! disjunctness verdicts.
//!
//!     cargo run -p onebit --example make_corpus -- crates/core/tests/corpus

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use onebit::group_testing::{build_kautz_singleton_with_q, is_disjunct, is_list_disjunct, ConcatCodeMatrix};
use onebit::sensing::{write_matrix, BinaryTestMatrix, StoredMatrix};
use onebit::Seed;
use rand::Rng;

fn bernoulli(rows: usize, cols: usize, p: f64, seed: u64) -> BinaryTestMatrix {
    let mut rng = Seed::new(seed).rng();
    let dense: Vec<Vec<u8>> = (0..rows)
        .map(|_| (0..cols).map(|_| u8::from(rng.random_bool(p))).collect())
        .collect();
    BinaryTestMatrix::from_dense(&dense).unwrap()
}

/// Column 0 is the union of columns 1 and 2, so the matrix is not 2-disjunct.
fn covered() -> BinaryTestMatrix {
    let mut dense = bernoulli(10, 9, 0.3, 77).to_dense();
    for row in dense.iter_mut() {
        row[0] = row[1] | row[2];
    }
    BinaryTestMatrix::from_dense(&dense).unwrap()
}

fn main() -> onebit::Result<()> {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/tests/corpus".into()),
    );
    std::fs::create_dir_all(&dir)?;
    let matrices: Vec<(&str, u64, BinaryTestMatrix)> = vec![
        ("identity_8", 0, BinaryTestMatrix::identity(8)),
        ("all_ones_4x6", 0, BinaryTestMatrix::all_ones(4, 6)),
        ("ks_q3_n9", 0, build_kautz_singleton_with_q(9, 3)?.into_matrix()),
        ("ks_q5_n14", 0, build_kautz_singleton_with_q(14, 5)?.into_matrix()),
        (
            "concat_n14_k2",
            1,
            ConcatCodeMatrix::build(14, 2, 4, Seed::new(1))?.to_binary()?,
        ),
        (
            "concat_n12_k3",
            2,
            ConcatCodeMatrix::build(12, 3, 3, Seed::new(2))?.to_binary()?,
        ),
        ("bern_8x10", 11, bernoulli(8, 10, 0.3, 11)),
        ("bern_12x12", 12, bernoulli(12, 12, 0.3, 12)),
        ("bern_16x14", 13, bernoulli(16, 14, 0.25, 13)),
        ("bern_24x14", 14, bernoulli(24, 14, 0.2, 14)),
        ("covered_10x9", 77, covered()),
    ];
    let mut manifest = BufWriter::new(File::create(dir.join("manifest.csv"))?);
    writeln!(manifest, "file,k,l,holds")?;
    for (name, seed, m) in &matrices {
        let file = format!("{name}.txt");
        let w = BufWriter::new(File::create(dir.join(&file))?);
        write_matrix(
            w,
            &StoredMatrix::Binary {
                matrix: m.clone(),
                seed: *seed,
            },
        )?;
        for k in 1..=3 {
            writeln!(manifest, "{file},{k},0,{}", u8::from(is_disjunct(m, k)?))?;
            for l in 1..=3 {
                writeln!(manifest, "{file},{k},{l},{}", u8::from(is_list_disjunct(m, k, l)?))?;
            }
        }
    }
    manifest.flush()?;
    Ok(())
}
