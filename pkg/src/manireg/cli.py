"""Command-line front end.

Subcommands communicate only through files: images in the ``MANIREG v1``
format, DWI stacks as directories (see ``manireg.io``), and JSON side files
(``<out>.json``) holding manifests and diagnostics.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import dti, io, phantoms, qball
from .dp1d import MsParams, solve_1d
from .manifold import ManifoldError, Sphere, Spd3
from .prox import CppaConfig, VqProblem, cppa_image, cppa_solve
from .solver2d import SplitConfig, solve_2d

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n")


def _side(out) -> Path:
    return Path(str(out) + ".json")


def _set_threads(n) -> None:
    if n is None:
        env = os.environ.get("MANIREG_THREADS")
        n = int(env) if env else None
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# -- simulate --------------------------------------------------------------

def cmd_simulate(a) -> None:
    if a.rows < 1 or a.cols < 1:
        raise UsageError("--rows and --cols must be positive")
    if a.kind == "dti-pwconst":
        img, info = phantoms.dti_pwconst(a.rows, a.cols, a.seed)
        m = Spd3()
    elif a.kind == "dti-smooth":
        img, info = phantoms.dti_smooth(a.rows, a.cols, a.seed)
        m = Spd3()
    else:
        img, info = phantoms.qball_crossing(a.rows, a.cols, a.seed, n=a.samples, kappa=a.sharpness)
        m = Sphere(img.shape[-1])
    io.save(io.Dataset(m, img), a.out)
    manifest = dict(command="simulate", kind=a.kind, rows=a.rows, cols=a.cols, seed=a.seed,
                    manifold=m.tag(), **info)
    if a.kind == "qball-crossing":
        manifest.update(samples=a.samples, sharpness=a.sharpness)
    _write_json(_side(a.out), manifest)


# -- noise -----------------------------------------------------------------

def _sigma(a, a0) -> tuple[float, dict]:
    if a.sigma is not None:
        return a.sigma, dict(sigma=a.sigma)
    return a0 / a.kappa, dict(kappa=a.kappa, sigma=a0 / a.kappa, sigma_rule="sigma = A0 / kappa")


def cmd_noise(a) -> None:
    inp = Path(a.inp)
    if inp.is_dir():
        stack = io.load_dwi(inp)
        clean_kind = "dwi"
    else:
        ds = io.load(inp)
        if isinstance(ds.manifold, Spd3):
            stack = dti.simulate_dwi(ds.values)
            clean_kind = "tensors"
        elif isinstance(ds.manifold, Sphere):
            sigma, rec = _sigma(a, 1.0)
            grid = qball.default_grid(ds.manifold.ambient_dim)
            out = qball.odf_noise(ds.values, sigma, a.seed, grid)
            io.save(io.Dataset(ds.manifold, out), a.out)
            _write_json(_side(a.out), dict(command="noise", domain="odf-raw", seed=a.seed,
                                           input=str(a.inp), **rec))
            return
        else:
            raise UsageError("noise expects an spd3 or sphere image, or a DWI directory")
    sigma, rec = _sigma(a, stack.A0)
    noisy = dti.add_rician(stack, sigma, a.seed)
    io.save_dwi(noisy, a.out)
    _write_json(_side(a.out), dict(command="noise", domain="dwi-rician", seed=a.seed,
                                   input=str(a.inp), input_kind=clean_kind, b=stack.b,
                                   A0=stack.A0, directions=len(stack.directions), **rec))


# -- fit -------------------------------------------------------------------

def cmd_fit(a) -> None:
    stack = io.load_dwi(a.inp)
    T, flags = dti.fit_tensors(stack, return_flags=True)
    io.save(io.Dataset(Spd3(), T), a.out)
    _write_json(_side(a.out), dict(command="fit", input=str(a.inp), clamped=int(flags.sum()),
                                   clamped_pixels=np.argwhere(flags).tolist()))


# -- regularize ------------------------------------------------------------

def _model_params(a):
    if a.model == "potts":
        if a.gamma is None:
            raise UsageError("potts needs --gamma")
        if a.alpha is not None:
            raise UsageError("--alpha is only used by the ms and lpvq models")
        if a.q not in (None, 1):
            raise UsageError("--q is only used by the ms and lpvq models")
        return MsParams("potts", a.p, 1, 1.0, a.gamma)
    q = 2 if a.q is None else a.q
    if a.alpha is None:
        raise UsageError(f"{a.model} needs --alpha")
    if a.model == "ms":
        if a.gamma is None:
            raise UsageError("ms needs --gamma")
        return MsParams("ms", a.p, q, a.alpha, a.gamma)
    if a.gamma is not None:
        raise UsageError("lpvq takes no --gamma")
    return MsParams("ms", a.p, q, a.alpha, 1.0)


def cmd_regularize(a) -> None:
    params = _model_params(a)
    ds = io.load(a.inp)
    m, f = ds.manifold, ds.values
    rows = f.shape[0]
    diag = dict(command="regularize", model=a.model, p=params.p, input=str(a.inp),
                manifold=m.tag(), rows=int(f.shape[0]), cols=int(f.shape[1]))
    if a.model != "potts":
        diag.update(q=params.q, alpha=params.alpha)
    if a.model != "lpvq":
        diag["gamma"] = params.gamma
    if a.model == "lpvq":
        cfg = CppaConfig(sweeps=a.sweeps)
        if rows == 1:
            res = cppa_solve(m, VqProblem(f[0], params.p, params.q, params.alpha), cfg=cfg)
            x, energy, sweeps = res.x[None], res.energy, res.sweeps
        else:
            x, energy, sweeps = cppa_image(m, f, params.p, params.q, params.alpha, cfg=cfg)
        diag.update(energy=energy, sweeps=int(sweeps))
    elif rows == 1:
        res = solve_1d(m, f[0], params)
        x = res.x[None]
        diag.update(energy=res.energy, dp_value=res.dp_value, jumps=res.jumps,
                    partition=[list(b) for b in res.partition.bounds],
                    may_be_nonunique=bool(res.may_be_nonunique))
    else:
        cfg = SplitConfig(mu0=a.mu0, tau=a.tau, outer_iters=a.outer)
        res = solve_2d(m, f, params, cfg=cfg)
        x = res.x
        diag.update(energy=res.energy, converged=res.converged, mu0=cfg.mu0,
                    tau=cfg.growth(params.p), outer=cfg.outer_iters,
                    iterations=len(res.trace))
        if a.trace:
            diag["trace"] = [r.as_dict(with_time=False) for r in res.trace]
    if isinstance(m, Sphere):
        diag["nonpositive_pixels"] = int(qball.nonpositive_mask(x).sum())
    io.save(io.Dataset(m, x), a.out)
    _write_json(_side(a.out), diag)


# -- export ----------------------------------------------------------------

def cmd_export(a) -> None:
    ds = io.load(a.inp)
    if a.glyphs == "ellipsoid":
        if not isinstance(ds.manifold, Spd3):
            raise UsageError("ellipsoid glyphs need an spd3 image")
        text = dti.format_glyphs(ds.values, a.c)
    else:
        if not isinstance(ds.manifold, Sphere):
            raise UsageError("odf glyphs need a sphere image")
        text = qball.format_odf_glyphs(ds.values, qball.default_grid(ds.manifold.ambient_dim))
    Path(a.out).write_text(text)


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="manireg", description="Potts and Mumford-Shah regularization of "
                 "manifold-valued signals and images.")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: all cores; env MANIREG_THREADS)")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a synthetic ground-truth image")
    s.add_argument("--kind", required=True, choices=phantoms.KINDS)
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--cols", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--samples", type=int, default=181, help="ODF samples (qball-crossing)")
    s.add_argument("--sharpness", type=float, default=8.0, help="peak sharpness (qball-crossing)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("noise", help="add Rician (DTI) or raw-domain Gaussian (ODF) noise")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--sigma", type=float)
    g.add_argument("--kappa", type=float, help="noise level label; sigma = A0 / kappa")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--in", dest="inp", required=True, help="spd3/sphere image or DWI directory")
    s.add_argument("--out", required=True, help="DWI directory (DTI) or image (ODF)")
    s.set_defaults(func=cmd_noise)

    s = sub.add_parser("fit", help="least-squares tensors from a DWI directory")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("regularize", help="Potts, Mumford-Shah or L^p-V^q regularization")
    s.add_argument("--model", required=True, choices=("potts", "ms", "lpvq"))
    s.add_argument("--p", type=int, default=2, choices=(1, 2))
    s.add_argument("--q", type=int, default=None, choices=(1, 2))
    s.add_argument("--alpha", type=float)
    s.add_argument("--gamma", type=float)
    s.add_argument("--mu0", type=float, default=SplitConfig.mu0)
    s.add_argument("--tau", type=float, default=None, help="growth of mu (default 2^p)")
    s.add_argument("--outer", type=int, default=SplitConfig.outer_iters)
    s.add_argument("--sweeps", type=int, default=CppaConfig.sweeps, help="CPPA sweeps (lpvq)")
    s.add_argument("--trace", action="store_true", help="include the 2D iteration trace")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_regularize)

    s = sub.add_parser("export", help="glyph tables for plotting")
    s.add_argument("--glyphs", required=True, choices=("ellipsoid", "odf"))
    s.add_argument("--c", type=float, default=1.0, help="isosurface level (ellipsoid)")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _set_threads(args.threads)
        args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ValueError, OSError, ManifoldError) as exc:
        print(f"manireg: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        print(f"manireg: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
