"""Null and far rejection rates against T, as CSV on stdout.

    python3 scripts/power_sweep.py --kind MM_A --dim 2 --theta 0.25 --T 10,20,40,81 --trials 400 --seed 1
    python3 scripts/power_sweep.py --kind CLASSICAL_M --dim 200 --theta 0.5 --trials 1000 --seed 1

Without --T the sweep runs over required_T scaled by 1/4, 1/2 and 1.
"""

import csv
import sys

import click
import numpy as np

from noniid.cli import power_instances
from noniid.observables import CLASSICAL_M, KINDS, KNOWN_M, ObservableKind
from noniid.simulate import estimate_success
from noniid.states import maximally_mixed
from noniid.testers import ChebyshevRule, required_T


def _kind(tag: str, d: int) -> ObservableKind:
    if tag == CLASSICAL_M:
        # half the symbols at 1/(2d), the rest at 3/(2d): gamma = 1/(2d)
        q = np.full(d, 3 / (2 * d))
        q[: d // 2] = 1 / (2 * d)
        return ObservableKind(tag, q / q.sum())
    if tag == KNOWN_M:
        return ObservableKind(tag, maximally_mixed(d))
    return ObservableKind(tag)


@click.command()
@click.option("--kind", "tag", type=click.Choice(KINDS), required=True)
@click.option("--dim", "d", type=int, required=True)
@click.option("--theta", type=float, required=True)
@click.option("--T", "Ts", default=None, help="Comma-separated sample counts.")
@click.option("--trials", type=int, default=400, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--far-factor", type=float, default=2.0, show_default=True)
def main(tag, d, theta, Ts, trials, seed, far_factor):
    kind = _kind(tag, d)
    rule = ChebyshevRule(theta)
    if Ts:
        sizes = [int(x) for x in Ts.split(",")]
    else:
        full = required_T(kind, theta, d)
        sizes = sorted({max(1, full // 4), max(1, full // 2), full})
    mu = far_factor * theta
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["T", "null_rate", "null_low", "null_high", "far_rate", "far_low", "far_high"])
    for T in sizes:
        null, null2, far, far2 = power_instances(kind, d, T, mu, seed)
        a, b = estimate_success(kind, null, far, rule, trials, seed, null2, far2)
        out.writerow([T, a.far_rate, a.wilson_low, a.wilson_high, b.far_rate, b.wilson_low, b.wilson_high])
        sys.stdout.flush()


if __name__ == "__main__":
    main()
