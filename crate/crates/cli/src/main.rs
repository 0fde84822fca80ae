mod output;
mod format_arg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coding_pairs::coder::CoderKind;
use coding_pairs::container::WriteOptions;
use coding_pairs::error::Error;
use coding_pairs::formats::SampleType;
use coding_pairs::pipeline::{compress_values, decompress_values, model_symbols, CompressOptions};
use coding_pairs::quantize::{quant_report, quantize_linear, QuantConfig, ReportCoder};
use coding_pairs::report::{analyze, measure_throughput, SizeRow};
use rand::SeedableRng;
use rand_distr::{Distribution, StudentT};

use output::{Report, ReportFormat};
use format_arg::{FormatArg, InputType};

#[derive(Parser, Debug)]
#[command(name = "cpc", version, about = "Compress tensor files as entropy-coded coding pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum Coder {
    #[default]
    Rans,
    Tans,
}

impl From<Coder> for CoderKind {
    fn from(c: Coder) -> Self {
        match c {
            Coder::Rans => CoderKind::Rans16,
            Coder::Tans => CoderKind::Tans8,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compress a flat tensor file into a CPC1 stream
    Compress {
        /// bf16, fp16, fp32, e8m2, e8m3, posit:<n>,<es>, int:<Nb>,
        /// ternary-runs, ternary-groups, binary-runs, binary-groups,
        /// direct:<file>
        #[arg(long, default_value = "bf16")]
        format: String,
        /// Layout of the input file (defaults to the format's natural one)
        #[arg(long, value_enum)]
        input_type: Option<InputType>,
        #[arg(long, value_enum, default_value_t)]
        coder: Coder,
        #[arg(long, default_value_t = 1)]
        lanes: u8,
        /// Fit a new model every L pairs
        #[arg(long, value_name = "L")]
        dynamic_blocks: Option<usize>,
        /// Keep at most B payload bits per integer (lossy)
        #[arg(long, value_name = "B")]
        saturate: Option<u8>,
        /// Store a checkpoint every S pairs
        #[arg(long, value_name = "S")]
        checkpoint_stride: Option<u64>,
        #[arg(long)]
        no_crc: bool,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
        #[arg(short, long)]
        output: PathBuf,
        input: PathBuf,
    },
    /// Rebuild the original file from a stream
    Decompress {
        #[arg(short, long)]
        output: PathBuf,
        input: PathBuf,
    },
    /// Estimate sizes without writing anything
    Analyze {
        #[arg(long, default_value = "bf16")]
        format: String,
        #[arg(long, value_enum)]
        input_type: Option<InputType>,
        /// Write the code histogram as CSV (`-` for stdout)
        #[arg(long, value_name = "PATH")]
        histogram: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
        input: PathBuf,
    },
    /// Linearly quantize weights to N_b bits plus sign and compress them
    Quantize {
        #[arg(long, value_name = "NB")]
        bits: u8,
        #[arg(long, value_enum, default_value = "fp32")]
        input_type: InputType,
        #[arg(long, value_enum, default_value_t)]
        coder: Coder,
        #[arg(long, default_value_t = 1)]
        lanes: u8,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
        #[arg(short, long)]
        output: PathBuf,
        input: PathBuf,
    },
    /// Measure single-threaded coder speed on synthetic data
    Bench {
        #[arg(long, default_value_t = 10_000_000)]
        pairs: usize,
        #[arg(long, value_enum, default_value_t)]
        report: ReportFormat,
    },
}

/// Exit codes: 1 usage, 2 malformed input data, 3 I/O, 4 values or
/// options the chosen format cannot take.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Corrupt { .. } | Error::Stale { .. } => 2,
        Error::Io { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cpc: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| {
        Error::Io {
            written: 0,
            source: std::io::Error::new(e.kind(), format!("{}: {e}", path.display())),
        }
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        written: 0,
        source: std::io::Error::new(e.kind(), format!("{}: {e}", path.display())),
    })
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Compress {
            format,
            input_type,
            coder,
            lanes,
            dynamic_blocks,
            saturate,
            checkpoint_stride,
            no_crc,
            report,
            output,
            input,
        } => {
            if dynamic_blocks.is_some() && checkpoint_stride.is_some() {
                return Err(usage("--checkpoint-stride cannot be combined with --dynamic-blocks"));
            }
            let spec = FormatArg::parse(&format, saturate)?;
            let storage: SampleType = input_type.map(Into::into).unwrap_or(spec.default_input);
            let bytes = read(&input)?;
            let values = storage.decode(&bytes)?;
            let opts = CompressOptions {
                write: WriteOptions::new(coder.into())
                    .lanes(lanes)
                    .crc(!no_crc)
                    .checkpoint_stride(checkpoint_stride),
                dynamic_block: dynamic_blocks,
            };
            let (stream, stats) = compress_values(&values, &spec.for_storage(storage)?, Some(storage), &opts)?;
            write(&output, &stream)?;

            let orig_bits = bytes.len() as f64 * 8.0;
            let n = stats.values.max(1) as f64;
            let stream_bits = stream.len() as f64 * 8.0;
            let mut r = Report::new(report, format!("{} -> {}", input.display(), output.display()));
            r.field("format", &format)
                .field("coder", CoderKind::from(coder).name())
                .field("lanes", lanes)
                .field("values", stats.values)
                .field("pairs", stats.pairs)
                .field("original_bytes", bytes.len())
                .field("compressed_bytes", stream.len())
                .float("percent_of_original", 100.0 * stream_bits / orig_bits.max(1.0), 3)
                .float("avg_bits_per_weight", stream_bits / n, 4)
                .float("avg_code_bits", (stream_bits - stats.ideal.payload_bits) / n, 4)
                .float("ideal_percent_of_original", 100.0 * stats.ideal.total_bits / orig_bits.max(1.0), 3)
                .float("ideal_avg_bits_per_weight", stats.ideal.total_bits / n, 4)
                .field("saturated", stats.saturated);
            r.print();
            Ok(())
        }
        Command::Decompress { output, input } => {
            let stream = read(&input)?;
            let (values, d) = decompress_values(&stream)?;
            let storage = d
                .storage
                .ok_or_else(|| usage("stream does not record a file layout"))?;
            write(&output, &storage.encode(&values))
        }
        Command::Analyze {
            format,
            input_type,
            histogram,
            report,
            input,
        } => {
            let spec = FormatArg::parse(&format, None)?;
            let storage: SampleType = input_type.map(Into::into).unwrap_or(spec.default_input);
            let bytes = read(&input)?;
            let values = storage.decode(&bytes)?;
            let a = analyze(&values, &spec.for_storage(storage)?, storage.bytes() as u32 * 8)?;
            let mut r = Report::new(report, input.display().to_string());
            r.field("format", &format)
                .field("values", a.values)
                .field("original_bytes", bytes.len())
                .field("unique_codes", a.unique_codes())
                .field("unique_exponents", a.unique_exponents());
            for row in a.rows() {
                add_row(&mut r, &row);
            }
            r.field("saturated", a.saturated);
            r.print();
            match histogram {
                Some(p) if p.as_os_str() == "-" => print!("{}", a.histogram_csv()),
                Some(p) => write(&p, a.histogram_csv().as_bytes())?,
                None => {}
            }
            Ok(())
        }
        Command::Quantize {
            bits,
            input_type,
            coder,
            lanes,
            report,
            output,
            input,
        } => {
            let cfg = QuantConfig::new(bits)?;
            let storage: SampleType = input_type.into();
            let w: Vec<f32> = match storage {
                SampleType::F32 => storage.decode(&read(&input)?)?.into_iter().map(f32::from_bits).collect(),
                SampleType::Bf16 | SampleType::F32PaddedBf16 => storage
                    .decode(&read(&input)?)?
                    .into_iter()
                    .map(|b| f32::from_bits(b << 16))
                    .collect(),
                _ => return Err(usage("quantize reads fp32 or bf16 weights")),
            };
            let q = quantize_linear(&w, &cfg)?;
            let ints: Vec<u32> = q.values.iter().map(|&v| v as u32).collect();
            let format = coding_pairs::formats::Format::Int { nb: bits, max_payload: None };
            let opts = CompressOptions {
                write: WriteOptions::new(coder.into()).lanes(lanes),
                dynamic_block: None,
            };
            let (stream, _) = compress_values(&ints, &format, Some(SampleType::I16), &opts)?;
            write(&output, &stream)?;
            let ideal = quant_report(&[&q.values], ReportCoder::Ideal)?;
            let real = quant_report(
                &[&q.values],
                match coder {
                    Coder::Rans => ReportCoder::Rans,
                    Coder::Tans => ReportCoder::Tans,
                },
            )?;
            let mut r = Report::new(report, format!("N_b = {bits}"));
            r.field("nb", bits)
                .field("values", ideal.total_values)
                .float("max_abs", q.max_abs, 8)
                .float("step", q.step(), 10)
                .float("ideal_avg_bits_per_weight", ideal.avg_bits_per_weight, 4)
                .float("ideal_avg_code_bits", ideal.avg_code_bits, 4)
                .float("ideal_percent_of_bf16", ideal.compressed_fraction, 3)
                .field("coder", CoderKind::from(coder).name())
                .float("avg_bits_per_weight", real.avg_bits_per_weight, 4)
                .float("avg_code_bits", real.avg_code_bits, 4)
                .float("percent_of_bf16", real.compressed_fraction, 3)
                .field("stream_bytes", stream.len());
            r.print();
            Ok(())
        }
        Command::Bench { pairs, report } => bench(pairs, report),
    }
}

fn add_row(r: &mut Report, row: &SizeRow) {
    let m = &row.method;
    r.field(&format!("{m}_bytes"), row.size_bytes)
        .float(&format!("{m}_percent_of_original"), row.percent, 3)
        .float(&format!("{m}_avg_bits_per_weight"), row.avg_bits, 4)
        .float(&format!("{m}_avg_code_bits"), row.avg_code_bits, 4);
}

fn bench(n: usize, report: ReportFormat) -> Result<(), Error> {
    if n == 0 {
        return Err(usage("--pairs must be at least 1"));
    }
    // weight-like bfloat16 values
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
    let t = StudentT::new(4.0f32).map_err(|e| usage(e.to_string()))?;
    let values: Vec<u32> = (0..n)
        .map(|_| {
            let b = (t.sample(&mut rng) * 0.015).to_bits();
            (b + 0x7fff + ((b >> 16) & 1)) >> 16
        })
        .collect();
    let format = coding_pairs::formats::Format::Float {
        source: coding_pairs::formats::FloatFormat::BF16,
        target: coding_pairs::formats::FloatFormat::BF16,
    };
    let symbols = format.symbolize(&values)?.symbols;
    let mut r = Report::new(report, format!("{n} pairs, single thread"));
    r.field("pairs", n);
    for (kind, key) in [(CoderKind::Rans16, "rans"), (CoderKind::Tans8, "tans")] {
        let (model, pairs, _) = model_symbols(&symbols, kind.precision())?;
        let th = measure_throughput(kind, &model, &pairs)?;
        r.float(&format!("{key}_encode_pairs_per_sec"), th.encode_pairs_per_sec, 0)
            .float(&format!("{key}_decode_pairs_per_sec"), th.decode_pairs_per_sec, 0)
            .float(&format!("{key}_bits_per_pair"), th.compressed_bits as f64 / n as f64, 4);
    }
    r.print();
    Ok(())
}
