"""Python access to the salign core: FFT, alignment loss, synthetic scenes,
metrics, checkpoints and the command line."""

import sys

from ._salign import (
    egf_scaling,
    evaluate,
    gen_scene,
    main,
    predict,
    rfft2,
    round_trip,
    scal_loss,
    verify,
)

__all__ = [
    "egf_scaling",
    "evaluate",
    "gen_scene",
    "main",
    "predict",
    "rfft2",
    "round_trip",
    "scal_loss",
    "verify",
]


def _console():
    code, out, err = main(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    raise SystemExit(code)
