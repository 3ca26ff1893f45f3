//! Expands the Joe-Kuo primitive polynomials and initial direction numbers
//! into full 32-bit direction vectors for the Sobol generator.

use std::{env, fs::File, io::Write, path::Path};

const DIRECTION_NUMBERS_TEXT: &str = include_str!("direction_numbers/new-joe-kuo-6.1024.txt");

/// Bits per direction vector entry; bounds the sequence length at 2^32 points.
const SOBOL_BITS: usize = 32;

fn main() {
    println!("cargo:rerun-if-changed=direction_numbers/new-joe-kuo-6.1024.txt");
    let out_dir = env::var("OUT_DIR").unwrap();
    let dest = Path::new(&out_dir).join("sobol_vectors.rs");
    let mut f = File::create(&dest).unwrap();

    let vectors = direction_vectors();
    writeln!(f, "/// Number of dimensions covered by the embedded direction numbers.").unwrap();
    writeln!(f, "pub const MAX_DIMENSION: usize = {};", vectors.len()).unwrap();
    writeln!(f, "static DIRECTIONS: [[u32; {}]; {}] = [", SOBOL_BITS, vectors.len()).unwrap();
    for v in &vectors {
        let row: Vec<String> = v.iter().map(|x| format!("0x{x:08x}")).collect();
        writeln!(f, "    [{}],", row.join(", ")).unwrap();
    }
    writeln!(f, "];").unwrap();
}

fn direction_vectors() -> Vec<[u32; SOBOL_BITS]> {
    let mut out = Vec::new();

    // first dimension is the van der Corput sequence in base 2
    let mut first = [0u32; SOBOL_BITS];
    for (i, v) in first.iter_mut().enumerate() {
        *v = 1 << (SOBOL_BITS - 1 - i);
    }
    out.push(first);

    for line in DIRECTION_NUMBERS_TEXT.lines().skip(1) {
        let nums: Vec<u64> = line
            .split_whitespace()
            .map(|t| t.parse().expect("malformed direction number"))
            .collect();
        if nums.is_empty() {
            continue;
        }
        let s = nums[1] as usize;
        let a = nums[2];
        let m = &nums[3..];
        assert_eq!(m.len(), s, "dimension {} lists {} numbers, expected {}", nums[0], m.len(), s);

        let mut v = [0u32; SOBOL_BITS];
        for i in 0..s.min(SOBOL_BITS) {
            v[i] = (m[i] << (SOBOL_BITS - 1 - i)) as u32;
        }
        for i in s..SOBOL_BITS {
            v[i] = v[i - s] ^ (v[i - s] >> s);
            for k in 1..s {
                if (a >> (s - 1 - k)) & 1 == 1 {
                    v[i] ^= v[i - k];
                }
            }
        }
        out.push(v);
    }
    out
}
