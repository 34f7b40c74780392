use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{bail, Context, Result};
use cabs_core::synth::ZipfPool;

use crate::manifest::RunManifest;
use crate::SynthArgs;

pub fn cmd_synth(args: &SynthArgs, command_line: &str) -> Result<()> {
    if args.num_concepts == 0 || args.exponent <= 0.0 || args.mean_extra < 0.0 {
        bail!("need at least one concept, a positive exponent and a non-negative mean");
    }
    if !(0.0..=1.0).contains(&args.repeat_prob) {
        bail!("--repeat-prob must lie in [0, 1]");
    }
    let pool = ZipfPool {
        num_concepts: args.num_concepts,
        exponent: args.exponent,
        num_samples: args.num_samples,
        mean_extra: args.mean_extra,
        seed: args.seed,
        repeat_prob: args.repeat_prob,
        captions: args.captions,
    };
    let vocab = pool.vocabulary();
    let create = |p: &std::path::Path| {
        File::create(p).map(BufWriter::new).with_context(|| format!("creating {}", p.display()))
    };
    let mut v = create(&args.vocab_out)?;
    vocab.write_to(&mut v)?;
    v.flush()?;

    let mut out = create(&args.out)?;
    for sample in pool.generate() {
        out.write_all(sample.to_json_line(&vocab).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.output(&args.out).output(&args.vocab_out);
    manifest.write_beside(&args.out)?;
    Ok(())
}
