use std::io::Cursor;

use coding_pairs::coder::CoderKind;
use coding_pairs::container::{
    append_pairs, decode_parallel, write_blocks_dynamic, write_stream, StreamReader, WriteOptions,
};
use coding_pairs::error::Error;
use coding_pairs::formats::FormatDescriptor;
use coding_pairs::model::{count_codes, normalize_counts, CodeSpec, Mapping, ProbabilityModel};
use coding_pairs::pair::CodingPair;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Geometric};

const KINDS: [CoderKind; 2] = [CoderKind::Rans16, CoderKind::Tans8];

/// Pairs with geometric codes; code `c` carries `c % 9` payload bits.
fn random_pairs(n: usize, codes: u8, seed: u64) -> Vec<CodingPair> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let g = Geometric::new(0.3).unwrap();
    (0..n)
        .map(|_| {
            let c = (g.sample(&mut rng) as u8).min(codes - 1);
            let len = c % 9;
            CodingPair::masked(c, rng.random(), len)
        })
        .collect()
}

fn model_for(pairs: &[CodingPair], codes: u8, kind: CoderKind) -> ProbabilityModel {
    // every code gets one occurrence so the model covers the alphabet
    let mut all: Vec<CodingPair> = pairs.to_vec();
    all.extend((0..codes).map(|c| CodingPair::masked(c, 0, c % 9)));
    let freq = count_codes(&all, codes as usize).unwrap();
    normalize_counts(&freq, kind.precision())
        .unwrap()
        .attach(|s| Ok((Mapping::Symbol(s), s as u8 % 9)))
        .unwrap()
}

fn encode(pairs: &[CodingPair], kind: CoderKind, opts: WriteOptions) -> Vec<u8> {
    let model = model_for(pairs, 20, kind);
    let mut out = Vec::new();
    let n = write_stream(pairs, Some(&model), &FormatDescriptor::pairs(), &opts, &mut out).unwrap();
    assert_eq!(n as usize, out.len());
    out
}

fn read_all(bytes: &[u8]) -> Vec<CodingPair> {
    StreamReader::open(Cursor::new(bytes)).unwrap().read_all().unwrap()
}

#[test]
fn zero_pairs_is_header_only() {
    for kind in KINDS {
        let mut out = Vec::new();
        let opts = WriteOptions::new(kind).lanes(4);
        write_stream(&[], None, &FormatDescriptor::pairs(), &opts, &mut out).unwrap();
        assert_eq!(&out[..4], b"CPC1");
        assert!(read_all(&out).is_empty());
        assert!(decode_parallel(&out).unwrap().1.is_empty());
    }
}

#[test]
fn lane_count_does_not_change_decoded_order() {
    let pairs = random_pairs(20_011, 20, 1);
    for kind in KINDS {
        for lanes in [1u8, 2, 3, 4, 7, 16] {
            for crc in [true, false] {
                let bytes = encode(&pairs, kind, WriteOptions::new(kind).lanes(lanes).crc(crc));
                assert_eq!(read_all(&bytes), pairs, "{kind:?} lanes={lanes}");
                assert_eq!(decode_parallel(&bytes).unwrap().1, pairs);
            }
        }
    }
}

#[test]
fn more_lanes_than_pairs() {
    let pairs = random_pairs(3, 20, 2);
    for kind in KINDS {
        let bytes = encode(&pairs, kind, WriteOptions::new(kind).lanes(8));
        assert_eq!(read_all(&bytes), pairs);
    }
}

#[test]
fn golden_header_layout() {
    let model = ProbabilityModel::new(
        16,
        vec![
            CodeSpec { freq: 49152, payload_bits: 1, mapping: Mapping::IntMagnitude(1) },
            CodeSpec { freq: 16384, payload_bits: 0, mapping: Mapping::DirectValue(0) },
        ],
    )
    .unwrap();
    let pairs = [CodingPair::bare(1), CodingPair::masked(0, 1, 1)];
    let mut out = Vec::new();
    let opts = WriteOptions::new(CoderKind::Rans16).crc(false);
    write_stream(&pairs, Some(&model), &FormatDescriptor::pairs(), &opts, &mut out).unwrap();
    let mut want = Vec::new();
    want.extend_from_slice(b"CPC1");
    want.extend_from_slice(&[1, 0, 0, 1]); // version, rans16, flags, lanes
    want.extend_from_slice(&2u64.to_le_bytes());
    want.extend_from_slice(&[1, 0, 0, 0, 0, 0]); // descriptor: pairs, end
    want.extend_from_slice(&2u16.to_le_bytes());
    want.extend_from_slice(&49152u16.to_le_bytes());
    want.extend_from_slice(&[1, 5]);
    want.extend_from_slice(&1i32.to_le_bytes());
    want.extend_from_slice(&16384u16.to_le_bytes());
    want.extend_from_slice(&[0, 2]);
    want.extend_from_slice(&0i32.to_le_bytes());
    assert_eq!(&out[..want.len()], &want[..]);
    let lane_len = u64::from_le_bytes(out[want.len()..want.len() + 8].try_into().unwrap());
    assert_eq!(out.len() as u64, want.len() as u64 + 8 + lane_len);
    assert_eq!(read_all(&out), pairs);
}

#[test]
fn truncation_names_lane_and_offset() {
    let pairs = random_pairs(10_000, 20, 3);
    for kind in KINDS {
        let bytes = encode(&pairs, kind, WriteOptions::new(kind).lanes(4));
        for cut in [bytes.len() - 1, bytes.len() - 17, bytes.len() * 2 / 3, 40, 5] {
            let r = StreamReader::open(Cursor::new(&bytes[..cut])).and_then(|r| r.read_all());
            match r {
                Err(Error::Corrupt { offset, .. }) | Err(Error::Parse { offset, .. }) => {
                    assert!(offset <= cut as u64, "offset {offset} past cut {cut}")
                }
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
        let r = StreamReader::open(Cursor::new(&bytes[..bytes.len() * 2 / 3]));
        assert!(matches!(r, Err(Error::Corrupt { lane: 2 | 3, .. })), "{r:?}");
    }
}

#[test]
fn flipped_payload_bit_is_detected() {
    let pairs = random_pairs(10_000, 20, 4);
    for kind in KINDS {
        let bytes = encode(&pairs, kind, WriteOptions::new(kind).lanes(2));
        let mut bad = bytes.clone();
        let i = bytes.len() - 8 - 100;
        bad[i] ^= 0x10;
        let r = StreamReader::open(Cursor::new(&bad)).unwrap().read_all();
        assert!(matches!(r, Err(Error::Corrupt { lane: 1, .. })), "{r:?}");
        assert!(matches!(decode_parallel(&bad), Err(Error::Corrupt { lane: 1, .. })));
    }
}

#[test]
fn bad_magic_and_version() {
    let pairs = random_pairs(10, 20, 5);
    let mut bytes = encode(&pairs, CoderKind::Rans16, WriteOptions::default());
    bytes[4] = 2;
    assert!(matches!(StreamReader::open(Cursor::new(&bytes)), Err(Error::Parse { offset: 4, .. })));
    bytes[0] = b'X';
    assert!(matches!(StreamReader::open(Cursor::new(&bytes)), Err(Error::Parse { offset: 0, .. })));
}

#[test]
fn checkpoints_resume_to_suffix() {
    let pairs = random_pairs(30_000, 20, 6);
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for kind in KINDS {
        for lanes in [1u8, 3] {
            let opts = WriteOptions::new(kind).lanes(lanes).checkpoint_stride(Some(997));
            let bytes = encode(&pairs, kind, opts);
            let r = StreamReader::open(Cursor::new(&bytes)).unwrap();
            assert_eq!(r.checkpoints().len(), 30_000usize.div_ceil(997));
            assert_eq!(r.checkpoint_stride(), Some(997));
            for cp in r.checkpoints() {
                let got: Vec<_> = r.resume_from(cp).unwrap().map(|p| p.unwrap()).collect();
                assert_eq!(got, pairs[cp.pair_index as usize..]);
            }
            // checkpoints taken while decoding
            let mut it = r.pairs().unwrap();
            let stops: Vec<u64> = (0..10).map(|_| rng.random_range(0..=30_000)).collect();
            let mut taken = Vec::new();
            for i in 0..=30_000u64 {
                if stops.contains(&i) {
                    taken.push(it.checkpoint().unwrap());
                }
                if i < 30_000 {
                    it.next().unwrap().unwrap();
                }
            }
            assert!(it.next().is_none());
            for cp in taken {
                let got: Vec<_> = r.resume_from(&cp).unwrap().map(|p| p.unwrap()).collect();
                assert_eq!(got, pairs[cp.pair_index as usize..]);
            }
        }
    }
}

#[test]
fn checkpoint_from_other_stream_is_stale() {
    let a = encode(&random_pairs(1000, 20, 8), CoderKind::Rans16, WriteOptions::default());
    let b = encode(&random_pairs(1000, 20, 9), CoderKind::Rans16, WriteOptions::default());
    let ra = StreamReader::open(Cursor::new(&a)).unwrap();
    let rb = StreamReader::open(Cursor::new(&b)).unwrap();
    let cp = ra.pairs().unwrap().checkpoint().unwrap();
    assert!(matches!(rb.resume_from(&cp), Err(Error::Stale { .. })));
}

#[test]
fn append_decodes_new_then_old() {
    let old = random_pairs(10_001, 20, 10);
    let new = random_pairs(4_000, 20, 11);
    for kind in KINDS {
        for lanes in [1u8, 4] {
            let opts = WriteOptions::new(kind).lanes(lanes).checkpoint_stride(Some(1500));
            let bytes = encode(&old, kind, opts);
            let appended = append_pairs(&bytes, &new).unwrap();
            let mut want = new.clone();
            want.extend_from_slice(&old);
            assert_eq!(read_all(&appended), want);
            let r = StreamReader::open(Cursor::new(&appended)).unwrap();
            assert_eq!(r.checkpoints().len(), 3 + 7);
            for cp in r.checkpoints() {
                let got: Vec<_> = r.resume_from(cp).unwrap().map(|p| p.unwrap()).collect();
                assert_eq!(got, want[cp.pair_index as usize..]);
            }
            // old checkpoints no longer fit
            let old_cp = StreamReader::open(Cursor::new(&bytes)).unwrap().checkpoints()[1].clone();
            assert!(matches!(r.resume_from(&old_cp), Err(Error::Stale { .. })));
        }
    }
}

#[test]
fn append_requires_whole_lane_rounds() {
    let bytes = encode(&random_pairs(100, 20, 12), CoderKind::Rans16, WriteOptions::default().lanes(4));
    assert!(matches!(append_pairs(&bytes, &random_pairs(3, 20, 13)), Err(Error::Contract(_))));
}

fn alphabet(codes: u8) -> Vec<(Mapping, u8)> {
    (0..codes).map(|c| (Mapping::Symbol(c as u32), c % 9)).collect()
}

#[test]
fn dynamic_blocks_round_trip() {
    let pairs = random_pairs(50_000, 20, 14);
    for kind in KINDS {
        for (block, lanes) in [(4096usize, 1u8), (4096, 4), (1, 2), (50_000, 3), (99_999, 1)] {
            let mut out = Vec::new();
            let opts = WriteOptions::new(kind).lanes(lanes);
            write_blocks_dynamic(&pairs, &alphabet(20), block, &FormatDescriptor::pairs(), &opts, &mut out)
                .unwrap();
            assert_eq!(read_all(&out), pairs, "{kind:?} block={block}");
            assert_eq!(decode_parallel(&out).unwrap().1, pairs);
        }
    }
}

#[test]
fn one_block_matches_static_payload() {
    let pairs = random_pairs(20_000, 20, 15);
    let freq = count_codes(&pairs, 20).unwrap();
    let present = freq.nonzero();
    for kind in KINDS {
        let model = normalize_counts(&freq, kind.precision())
            .unwrap()
            .attach(|s| Ok((Mapping::Symbol(s), s as u8 % 9)))
            .unwrap();
        // static stream over the same model with the codes renumbered
        let mut local = [0u8; 20];
        for (i, c) in model.codes.iter().enumerate() {
            if let Mapping::Symbol(g) = c.mapping {
                local[g as usize] = i as u8;
            }
        }
        let renum: Vec<CodingPair> = pairs
            .iter()
            .map(|p| CodingPair::masked(local[p.code() as usize], p.payload(), p.payload_len()))
            .collect();
        let mut s = Vec::new();
        let opts = WriteOptions::new(kind).crc(false);
        write_stream(&renum, Some(&model), &FormatDescriptor::pairs(), &opts, &mut s).unwrap();
        let mut d = Vec::new();
        write_blocks_dynamic(&pairs, &alphabet(20), pairs.len(), &FormatDescriptor::pairs(), &opts, &mut d)
            .unwrap();
        // same lane payload bytes; only the framing differs
        let lane = &s[s.len() - (s.len() - header_len(&s))..];
        assert!(d.ends_with(lane), "{kind:?}");
        assert_eq!(model.len(), present);
    }

    fn header_len(s: &[u8]) -> usize {
        let r = StreamReader::open(Cursor::new(s)).unwrap();
        r.header().to_bytes().len()
    }
}

#[test]
fn constant_block_costs_almost_nothing() {
    let pairs = vec![CodingPair::bare(9); 100_000];
    let mut out = Vec::new();
    write_blocks_dynamic(&pairs, &alphabet(20), 50_000, &FormatDescriptor::pairs(), &WriteOptions::default(), &mut out)
        .unwrap();
    // two blocks, each: count, one-code table, lane length and crc; the
    // lane itself never leaves its initial state
    let header = StreamReader::open(Cursor::new(&out)).unwrap().header().to_bytes().len();
    assert_eq!(out.len() - header, 2 * (4 + 10 + 8 + 4));
    assert_eq!(read_all(&out), pairs);
}

#[test]
fn dynamic_rejects_checkpoints() {
    let opts = WriteOptions::default().checkpoint_stride(Some(10));
    let r = write_blocks_dynamic(&random_pairs(10, 20, 16), &alphabet(20), 5, &FormatDescriptor::pairs(), &opts, Vec::new());
    assert!(matches!(r, Err(Error::Contract(_))));
}

#[test]
fn streaming_memory_is_bounded_by_lanes() {
    let pairs = random_pairs(2_000_000, 20, 17);
    for kind in KINDS {
        let bytes = encode(&pairs, kind, WriteOptions::new(kind).lanes(4));
        let r = StreamReader::open(Cursor::new(&bytes)).unwrap();
        let mut it = r.pairs().unwrap();
        let mut peak = 0;
        let mut n = 0;
        while let Some(p) = it.next() {
            p.unwrap();
            n += 1;
            if n % 4096 == 0 {
                peak = peak.max(it.buffered_bytes());
            }
        }
        assert_eq!(n, pairs.len());
        assert!(peak > 0);
        assert!(peak <= 4 * (1 << 14) * 4, "peak {peak} bytes for {} stream bytes", bytes.len());
        assert!(bytes.len() > 4 * peak);
    }
}

struct FailAfter(usize);

impl std::io::Write for FailAfter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if buf.len() > self.0 {
            return Err(std::io::Error::other("disk full"));
        }
        self.0 -= buf.len();
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn sink_failure_reports_bytes_written() {
    let pairs = random_pairs(1000, 20, 18);
    let model = model_for(&pairs, 20, CoderKind::Rans16);
    let r = write_stream(&pairs, Some(&model), &FormatDescriptor::pairs(), &WriteOptions::default(), FailAfter(200));
    match r {
        Err(Error::Io { written, .. }) => assert!(written <= 200),
        other => panic!("{other:?}"),
    }
}
