"""Fit the sample and variance constants and write the frozen calibration file.

    python3 scripts/calibrate.py                         # everything, ~30 min on one core
    python3 scripts/calibrate.py --reuse-sample           # refit only the variance constants
    python3 scripts/calibrate.py --kind MM_A --kind UNKNOWN_Z
"""

import json
import time
from importlib import resources
from pathlib import Path

import click

from noniid import calibration as cb
from noniid.observables import KINDS

DEFAULT_OUT = Path(str(resources.files("noniid.data").joinpath("calibration.json")))


@click.command()
@click.option("--kind", "kinds", multiple=True, type=click.Choice(KINDS),
              help="Refit the sample constant of these kinds only; the rest are read from --out.")
@click.option("--reuse-sample", is_flag=True, help="Keep every sample constant already in --out.")
@click.option("--variance-count", default=2000, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=DEFAULT_OUT, show_default=True)
def main(kinds, reuse_sample, variance_count, out):
    log = lambda msg: click.echo(f"[{time.strftime('%H:%M:%S')}] {msg}", err=True)
    previous = json.loads(out.read_text()) if out.exists() else {}
    sample = dict(previous.get("sample_constants", {}))
    todo = [] if reuse_sample else list(kinds or KINDS)
    for tag in todo:
        log(f"sample constant for {tag}")
        sample[tag] = round(cb.calibrate_sample_constant(cb.FIXTURES[tag](), log=log), 4)
        log(f"{tag}: C = {sample[tag]}")
    missing = [k for k in KINDS if k not in sample]
    if missing:
        raise click.ClickException(f"no sample constant for {missing}; run without --reuse-sample")
    variance, observed = {}, {}
    for tag in KINDS:
        variance[tag], observed[tag] = cb.calibrate_variance_constant(tag, variance_count)
        log(f"variance constant for {tag}: K = {variance[tag]} (largest ratio {observed[tag]:.4g})")
    result = cb.calibration_record(sample, variance, observed, variance_count)
    out.write_text(json.dumps(result, indent=2) + "\n")
    log(f"wrote {out}")


if __name__ == "__main__":
    main()
