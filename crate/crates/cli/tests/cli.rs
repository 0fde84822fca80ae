use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = cpc(args);
    assert!(
        out.status.success(),
        "cpc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn kv(s: &str) -> HashMap<String, String> {
    s.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

// small deterministic generator so the tests need no extra crates
struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> u32 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 33) as u32
    }

    fn gauss(&mut self) -> f32 {
        let s: f32 = (0..12).map(|_| self.next() as f32 / (1u64 << 31) as f32).sum();
        s - 6.0
    }
}

fn weights(n: usize) -> Vec<f32> {
    let mut r = Lcg(7);
    (0..n).map(|_| r.gauss() * 0.02).collect()
}

fn bf16_bytes(w: &[f32]) -> Vec<u8> {
    w.iter()
        .flat_map(|x| ((x.to_bits() >> 16) as u16).to_le_bytes())
        .collect()
}

fn write(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, bytes).unwrap();
    path
}

fn round_trip(dir: &TempDir, format: &str, input: &[u8], extra: &[&str]) -> HashMap<String, String> {
    let src = write(dir, "in.bin", input);
    let stream = dir.path().join("s.cpc");
    let back = dir.path().join("back.bin");
    let mut args = vec!["compress", "--format", format, "--report", "kv", "-o", p(&stream)];
    args.extend_from_slice(extra);
    args.push(p(&src));
    let report = kv(&ok(&args));
    ok(&["decompress", "-o", p(&back), p(&stream)]);
    assert_eq!(fs::read(&back).unwrap(), input, "{format} {extra:?}");
    assert_eq!(
        report["compressed_bytes"].parse::<u64>().unwrap(),
        fs::metadata(&stream).unwrap().len()
    );
    report
}

#[test]
fn every_format_round_trips_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let w = weights(20_000);
    let bf16 = bf16_bytes(&w);
    for coder in ["rans", "tans"] {
        for lanes in ["1", "3"] {
            round_trip(&dir, "bf16", &bf16, &["--coder", coder, "--lanes", lanes]);
        }
        round_trip(&dir, "bf16", &bf16, &["--coder", coder, "--dynamic-blocks", "4096"]);
    }
    let fp32: Vec<u8> = w.iter().flat_map(|x| x.to_le_bytes()).collect();
    round_trip(&dir, "fp32", &fp32, &[]);
    let padded: Vec<u8> = w
        .iter()
        .flat_map(|x| (x.to_bits() & 0xffff_0000).to_le_bytes())
        .collect();
    round_trip(&dir, "bf16", &padded, &["--input-type", "fp32-padded-bf16"]);
    let fp16: Vec<u8> = (0..5000u32).flat_map(|i| ((i * 40503) as u16).to_le_bytes()).collect();
    round_trip(&dir, "fp16", &fp16, &[]);
    let posit: Vec<u8> = (0..=255u8).collect();
    round_trip(&dir, "posit:8,0", &posit, &[]);

    let ints: Vec<i16> = w.iter().map(|x| (x * 50_000.0).clamp(-32767.0, 32767.0) as i16).collect();
    let int_bytes: Vec<u8> = ints.iter().flat_map(|v| v.to_le_bytes()).collect();
    round_trip(&dir, "int:15", &int_bytes, &["--checkpoint-stride", "1000"]);

    let mut r = Lcg(3);
    let ternary: Vec<u8> = (0..10_000)
        .map(|_| match r.next() % 10 {
            0 => 1u8,
            1 => 0xff,
            _ => 0,
        })
        .collect();
    round_trip(&dir, "ternary-runs", &ternary, &[]);
    round_trip(&dir, "ternary-groups", &ternary, &["--coder", "tans"]);
    let binary: Vec<u8> = ternary.iter().map(|&t| (t == 1) as u8).collect();
    round_trip(&dir, "binary-runs", &binary, &[]);
    round_trip(&dir, "binary-groups", &binary, &[]);

    let table = write(&dir, "values.txt", b"# allowed\n0 3 0x7f\n200\n");
    let direct: Vec<u8> = (0..3000).map(|i| [0u8, 3, 127, 200][i % 4]).collect();
    round_trip(&dir, &format!("direct:{}", p(&table)), &direct, &[]);
}

#[test]
fn narrow_floats_decompress_to_rounded_bf16() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "w.bf16", &bf16_bytes(&weights(5000)));
    let stream = dir.path().join("s.cpc");
    let back = dir.path().join("back.bf16");
    ok(&["compress", "--format", "e8m2", "-o", p(&stream), p(&src)]);
    ok(&["decompress", "-o", p(&back), p(&stream)]);
    let out = fs::read(&back).unwrap();
    assert_eq!(out.len(), 10_000);
    for c in out.chunks(2) {
        // five mantissa bits dropped
        assert_eq!(u16::from_le_bytes([c[0], c[1]]) & 0x1f, 0);
    }
    // values already on the grid survive unchanged
    round_trip(&dir, "e8m2", &out, &[]);
}

#[test]
fn saturate_keeps_top_payload_bits() {
    let dir = TempDir::new().unwrap();
    let v: Vec<u8> = [1000i16, -3, 5, -2001].iter().flat_map(|v| v.to_le_bytes()).collect();
    let src = write(&dir, "i.bin", &v);
    let stream = dir.path().join("s.cpc");
    let back = dir.path().join("back.bin");
    ok(&["compress", "--format", "int:15", "--saturate", "4", "-o", p(&stream), p(&src)]);
    ok(&["decompress", "-o", p(&back), p(&stream)]);
    let out: Vec<i16> = fs::read(&back)
        .unwrap()
        .chunks(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    // sign plus three bits below the leading one
    assert_eq!(out, [1024, -3, 5, -2048]);
}

#[test]
fn analyze_constant_tensor_and_thirteen_bit_code() {
    let dir = TempDir::new().unwrap();
    let constant = write(&dir, "c.bf16", &[0x80, 0x3f].repeat(4096));
    let a = kv(&ok(&["analyze", "--report", "kv", p(&constant)]));
    assert_eq!(a["unique_exponents"], "1");
    assert_eq!(a["ideal_avg_code_bits"], "0.0000");
    assert_eq!(a["ideal_avg_bits_per_weight"], "8.0000");

    // 32 distinct exponents: the fixed-width code needs 5 + 8 bits
    let v: Vec<u8> = (0..3200u32)
        .flat_map(|i| ((((100 + i % 32) << 7) | (i % 128)) as u16).to_le_bytes())
        .collect();
    let f = write(&dir, "e.bf16", &v);
    let hist = dir.path().join("h.csv");
    let a = kv(&ok(&["analyze", "--report", "kv", "--histogram", p(&hist), p(&f)]));
    assert_eq!(a["unique_exponents"], "32");
    assert_eq!(a["simple_avg_bits_per_weight"], "13.0000");
    let csv = fs::read_to_string(&hist).unwrap();
    assert_eq!(csv.lines().count(), 33);
    assert_eq!(csv.lines().nth(1), Some("100,100"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let src = write(&dir, "w.bf16", &bf16_bytes(&weights(1000)));
    let stream = dir.path().join("s.cpc");
    let out = dir.path().join("o");

    assert_eq!(cpc(&["--help"]).status.code(), Some(0));
    assert_eq!(cpc(&["--version"]).status.code(), Some(0));
    assert_eq!(cpc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cpc(&["compress", "--lanes", "x", p(&src)]).status.code(), Some(1));

    let missing = dir.path().join("missing");
    assert_eq!(cpc(&["decompress", "-o", p(&out), p(&missing)]).status.code(), Some(3));

    // odd length for a 2-byte layout
    let odd = write(&dir, "odd", &[1, 2, 3]);
    assert_eq!(cpc(&["compress", "-o", p(&stream), p(&odd)]).status.code(), Some(2));

    let garbage = write(&dir, "g.cpc", b"not a stream at all");
    assert_eq!(cpc(&["decompress", "-o", p(&out), p(&garbage)]).status.code(), Some(2));

    ok(&["compress", "-o", p(&stream), p(&src)]);
    let mut bytes = fs::read(&stream).unwrap();
    let n = bytes.len();
    bytes[n - 10] ^= 0x10;
    let bad = write(&dir, "bad.cpc", &bytes);
    let r = cpc(&["decompress", "-o", p(&out), p(&bad)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("lane 0"));

    // values outside the declared range
    let big = write(&dir, "big", &[0x00, 0x40]);
    assert_eq!(cpc(&["compress", "--format", "int:7", "--input-type", "i16", "-o", p(&stream), p(&big)]).status.code(), Some(4));
    assert_eq!(cpc(&["compress", "--format", "posit:8", "-o", p(&stream), p(&src)]).status.code(), Some(4));
    assert_eq!(
        cpc(&["compress", "--dynamic-blocks", "10", "--checkpoint-stride", "5", "-o", p(&stream), p(&src)]).status.code(),
        Some(4)
    );
}

#[test]
fn quantize_sweep_shrinks_with_fewer_bits() {
    let dir = TempDir::new().unwrap();
    let w = weights(50_000);
    let src = write(&dir, "w.f32", &w.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<_>>());
    let stream = dir.path().join("q.cpc");
    let mut last = f64::INFINITY;
    for nb in (2..=8).rev() {
        let nb = nb.to_string();
        let r = kv(&ok(&["quantize", "--bits", &nb, "--report", "kv", "-o", p(&stream), p(&src)]));
        let bits: f64 = r["avg_bits_per_weight"].parse().unwrap();
        let ideal: f64 = r["ideal_avg_bits_per_weight"].parse().unwrap();
        assert!(bits < last, "{nb}: {bits} >= {last}");
        assert!(bits >= ideal - 1e-3 && bits < ideal * 1.01 + 0.01, "{nb}: {bits} vs {ideal}");
        last = bits;
    }
    assert_eq!(cpc(&["quantize", "--bits", "0", "-o", p(&stream), p(&src)]).status.code(), Some(4));
}

#[test]
fn bench_reports_both_coders() {
    let r = kv(&ok(&["bench", "--pairs", "20000", "--report", "kv"]));
    for key in [
        "rans_encode_pairs_per_sec",
        "rans_decode_pairs_per_sec",
        "tans_encode_pairs_per_sec",
        "tans_decode_pairs_per_sec",
    ] {
        assert!(r[key].parse::<f64>().unwrap() > 0.0, "{key}");
    }
}
