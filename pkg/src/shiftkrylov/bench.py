"""Experiment harness: build a shifted family, run the solvers, export histories.

Run ``python3 -m shiftkrylov.bench --help`` (or the ``shiftkrylov-bench``
script) for the command-line interface. Each run writes one CSV per
(solver, shift) pair with columns ``matvecs,relres_recursive,relres_true``,
a gnuplot script plotting them, and ``summary.json``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .history import ResidualHistory
from .qcd import (bipartite_parity, family_from_hoppings, load_manifest, odd_even_split,
                  wilson_hopping_matrix)
from .shift_engine import ShiftFamily, ShiftedSolveResult, shifted_bicgstab, sqmrcgstab
from .sparsela import (SparseComplexMatrix, example_5_3_diagonal, make_bidiagonal_test,
                       read_matrix_market)

__all__ = [
    "ExperimentConfig",
    "ShiftReport",
    "RunReport",
    "ExperimentError",
    "PRESETS",
    "smoothness_metric",
    "run_experiment",
    "build_parser",
    "main",
]

SOLVERS: Dict[str, Callable[..., ShiftedSolveResult]] = {
    "sbicgstab": shifted_bicgstab,
    "sqmrcgstab": sqmrcgstab,
}


class ExperimentError(RuntimeError):
    """Raised after outputs are written when some solver broke down."""

    def __init__(self, message, report: "RunReport"):
        super().__init__(message)
        self.report = report


@dataclass
class ExperimentConfig:
    """One experiment. Exactly one of ``matrix`` and ``preset`` is required.

    ``shifts`` and ``hoppings`` are alternatives; hopping parameters only
    make sense for the QCD presets. ``rhs`` is ``"unit:IDX"``, ``"ones"``
    (normalised) or ``"file:PATH"``; ``None`` picks the preset default.
    ``shadow`` is ``"b"`` or ``"seed:INT"``. ``maxit`` counts iterations
    and defaults to ten times the system dimension.
    """

    matrix: Optional[str] = None
    preset: Optional[str] = None
    shifts: Optional[List[complex]] = None
    hoppings: Optional[List[float]] = None
    rhs: Optional[str] = None
    solver: str = "both"
    tol: float = 1e-8
    maxit: Optional[int] = None
    shadow: str = "b"
    true_res_every: int = 1
    out: Optional[str] = None

    def validate(self):
        if self.matrix is None and self.preset is None:
            raise ValueError("no problem source: give --matrix or --preset")
        if self.matrix is not None and self.preset is not None and self.preset not in _NEEDS_MATRIX:
            raise ValueError(f"preset {self.preset!r} generates its matrix; drop --matrix")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.preset in _NEEDS_MATRIX and self.matrix is None:
            raise ValueError(f"preset {self.preset!r} needs --matrix PATH")
        if self.shifts is not None and self.hoppings is not None:
            raise ValueError("give either shifts or hopping parameters, not both")
        if self.hoppings is not None and self.preset not in _QCD_PRESETS:
            raise ValueError("hopping parameters need a QCD preset")
        if self.solver not in ("sbicgstab", "sqmrcgstab", "both"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ValueError("maxit must be at least 1")
        if self.true_res_every < 0:
            raise ValueError("true_res_every must be non-negative")
        return self

    @property
    def solvers(self) -> List[str]:
        return ["sbicgstab", "sqmrcgstab"] if self.solver == "both" else [self.solver]


@dataclass
class ShiftReport:
    solver: str
    shift: complex
    status: str
    iterations: int
    matvecs: int
    extra_matvecs: int
    true_relres: float
    wall_time: float
    smoothness: Optional[float]
    csv: Optional[str] = None
    hopping: Optional[float] = None


@dataclass
class RunReport:
    problem: str
    n: int
    shifts: List[complex]
    entries: List[ShiftReport] = field(default_factory=list)
    histories: Dict[tuple, ResidualHistory] = field(default_factory=dict, repr=False)

    def summary(self) -> str:
        lines = [f"problem {self.problem}  n={self.n}",
                 f"{'solver':<11} {'shift':>14} {'status':<10} {'iter':>6} {'matvecs':>8} "
                 f"{'extra':>6} {'true relres':>12} {'smooth':>7} {'time[s]':>8}"]
        for e in self.entries:
            sm = "-" if e.smoothness is None else f"{e.smoothness:.3f}"
            lines.append(f"{e.solver:<11} {_fmt_shift(e.shift):>14} {e.status:<10} {e.iterations:>6} "
                         f"{e.matvecs:>8} {e.extra_matvecs:>6} {e.true_relres:>12.3e} {sm:>7} "
                         f"{e.wall_time:>8.3f}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        def enc(e: ShiftReport):
            d = asdict(e)
            d["shift"] = [e.shift.real, e.shift.imag]
            return d
        return {"problem": self.problem, "n": self.n, "runs": [enc(e) for e in self.entries]}


def smoothness_metric(history) -> float:
    """Fraction of strict increases in the sampled true relative residual.

    ``history`` is a :class:`ResidualHistory` or a plain sequence of
    residual norms. Unsampled (NaN) entries are dropped first. Returns the
    number of strict increases divided by the number of records, so a
    monotone history scores 0.
    """
    if isinstance(history, ResidualHistory):
        vals = history.relres_true
    else:
        vals = np.asarray(history, dtype=float)
    vals = vals[~np.isnan(vals)]
    if vals.size < 3:
        raise ValueError(f"need at least 3 sampled records, got {vals.size}")
    return float(np.count_nonzero(np.diff(vals) > 0)) / vals.size


# ------------------------------------------------------------------- problems

@dataclass
class Problem:
    name: str
    family: ShiftFamily
    hoppings: Optional[List[float]] = None


def _unit_or_ones(spec: Optional[str], n: int, default: str) -> np.ndarray:
    spec = default if spec is None else spec
    if spec == "ones":
        return np.ones(n, dtype=np.complex128) / math.sqrt(n)
    if spec.startswith("unit:"):
        idx = int(spec[5:])
        if not 0 <= idx < n:
            raise ValueError(f"unit vector index {idx} out of range for n={n}")
        b = np.zeros(n, dtype=np.complex128)
        b[idx] = 1.0
        return b
    if spec.startswith("file:"):
        return _read_vector(spec[5:], n)
    raise ValueError(f"bad rhs spec {spec!r}; use unit:IDX, ones or file:PATH")


def _read_vector(path: str, n: int) -> np.ndarray:
    """One entry per line, either ``re`` or ``re im``."""
    data = np.loadtxt(path, ndmin=2, comments="#")
    if data.shape[1] == 1:
        v = data[:, 0].astype(np.complex128)
    elif data.shape[1] == 2:
        v = data[:, 0] + 1j * data[:, 1]
    else:
        raise ValueError(f"{path}: expected 1 or 2 columns, got {data.shape[1]}")
    if v.size != n:
        raise ValueError(f"{path}: vector has {v.size} entries, system has {n}")
    return v


def _check_size(A: SparseComplexMatrix, dataset: str):
    info = load_manifest()[dataset]
    if A.shape != (info.n_rows, info.n_cols):
        warnings.warn(f"{dataset} is {info.n_rows}x{info.n_cols} but the given matrix is "
                      f"{A.shape[0]}x{A.shape[1]}", UserWarning, stacklevel=3)


def _circuit(dataset, default_shifts):
    def build(cfg: ExperimentConfig) -> Problem:
        A = read_matrix_market(cfg.matrix)
        _check_size(A, dataset)
        b = _unit_or_ones(cfg.rhs, A.shape[0], "unit:0")
        shifts = default_shifts if cfg.shifts is None else cfg.shifts
        return Problem(cfg.preset, ShiftFamily(A, shifts, b))
    return build


def _lattice_family(name, D: SparseComplexMatrix, cfg: ExperimentConfig) -> Problem:
    if np.any(D.diagonal() != 0):
        warnings.warn("hopping matrix has a nonzero diagonal; dropping it before the "
                      "odd-even split", UserWarning, stacklevel=3)
        D = D.without_diagonal()
    split = odd_even_split(D, bipartite_parity(D))
    b = _unit_or_ones(cfg.rhs, D.shape[0], "unit:0")
    ks = [0.2, 0.196] if cfg.hoppings is None else cfg.hoppings
    red = family_from_hoppings(split, ks, b)
    return Problem(name, red.family(), list(red.hoppings))


def _qcd(dataset):
    def build(cfg: ExperimentConfig) -> Problem:
        D = read_matrix_market(cfg.matrix)
        _check_size(D, dataset)
        return _lattice_family(cfg.preset, D, cfg)
    return build


def _qcd_synthetic(cfg: ExperimentConfig) -> Problem:
    return _lattice_family("qcd-synthetic", wilson_hopping_matrix((4, 4, 4, 4), 0.6, rng=1), cfg)


def _bidiagonal(case):
    def build(cfg: ExperimentConfig) -> Problem:
        d = example_5_3_diagonal(case)
        A = make_bidiagonal_test(d.size, d)
        b = _unit_or_ones(cfg.rhs, d.size, "ones")
        shifts = [1.0, -1.0] if cfg.shifts is None else cfg.shifts
        return Problem(cfg.preset, ShiftFamily(A, shifts, b))
    return build


def _identity(cfg: ExperimentConfig) -> Problem:
    n = 8
    A = SparseComplexMatrix.identity(n)
    b = _unit_or_ones(cfg.rhs, n, "ones")
    return Problem("identity", ShiftFamily(A, [0.0] if cfg.shifts is None else cfg.shifts, b))


def _from_file(cfg: ExperimentConfig) -> Problem:
    A = read_matrix_market(cfg.matrix)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{cfg.matrix}: matrix is not square {A.shape}")
    b = _unit_or_ones(cfg.rhs, A.shape[0], "ones")
    shifts = [0.0] if cfg.shifts is None else cfg.shifts
    return Problem(os.path.basename(cfg.matrix), ShiftFamily(A, shifts, b))


PRESETS: Dict[str, Callable[[ExperimentConfig], Problem]] = {
    "example5.1-binary": _circuit("circuit-binary-1960", [1.0, 10.0]),
    "example5.1-unsym": _circuit("circuit-unsym-1879", [0.1, 1.0]),
    "qcd-1400": _qcd("conf5.4-00l4x4-1400"),
    "qcd-1800": _qcd("conf5.4-00l4x4-1800"),
    "qcd-synthetic": _qcd_synthetic,
    "example5.3-case1": _bidiagonal(1),
    "example5.3-case2": _bidiagonal(2),
    "identity": _identity,
}
_NEEDS_MATRIX = {"example5.1-binary", "example5.1-unsym", "qcd-1400", "qcd-1800"}
_QCD_PRESETS = {"qcd-1400", "qcd-1800", "qcd-synthetic"}


def build_problem(cfg: ExperimentConfig) -> Problem:
    cfg.validate()
    if cfg.preset is None:
        return _from_file(cfg)
    return PRESETS[cfg.preset](cfg)


def _shadow(spec: str, n: int):
    if spec == "b":
        return None
    if spec.startswith("seed:"):
        rng = np.random.default_rng(int(spec[5:]))
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return w / np.linalg.norm(w)
    raise ValueError(f"bad shadow spec {spec!r}; use b or seed:INT")


# ----------------------------------------------------------------------- output

def _fmt_shift(s: complex) -> str:
    s = complex(s)
    return f"{s.real:.6g}" if s.imag == 0 else f"{s.real:.6g}{s.imag:+.6g}j"


def write_history_csv(path, history: ResidualHistory) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("matvecs,relres_recursive,relres_true\n")
        for mv, rec, tru in zip(history.matvecs, history.relres_recursive, history.relres_true):
            fh.write(f"{int(mv)},{rec:.17e},{tru:.17e}\n")


def write_gnuplot(path, csv_files: Sequence[str], titles: Sequence[str]) -> None:
    plots = ", \\\n     ".join(f"'{os.path.basename(f)}' using 1:2 with lines title '{t}'"
                              for f, t in zip(csv_files, titles))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("set datafile separator ','\n")
        fh.write("set logscale y\n")
        fh.write("set format y '10^{%L}'\n")
        fh.write("set xlabel 'matrix-vector products'\n")
        fh.write("set ylabel 'relative residual'\n")
        fh.write("set key top right\n")
        fh.write(f"plot {plots}\n")


# -------------------------------------------------------------------- driver

def run_experiment(cfg: ExperimentConfig, *, verbose: bool = False) -> RunReport:
    """Run every requested solver on the configured family.

    When ``cfg.out`` is set, histories, the plot script and the summary are
    written there before any breakdown is reported through
    :class:`ExperimentError`.
    """
    prob = build_problem(cfg)
    fam = prob.family
    shadow = _shadow(cfg.shadow, fam.n)
    report = RunReport(prob.name, fam.n, [complex(s) for s in fam.shifts])
    csvs, titles = [], []
    if cfg.out is not None:
        os.makedirs(cfg.out, exist_ok=True)
    for name in cfg.solvers:
        t0 = time.perf_counter()
        res = SOLVERS[name](fam, tol=cfg.tol, maxit=cfg.maxit, shadow=shadow,
                            true_res_every=cfg.true_res_every)
        elapsed = time.perf_counter() - t0
        for i, tr in enumerate(res.tracks):
            try:
                sm = smoothness_metric(tr.history)
            except ValueError:
                sm = None
            entry = ShiftReport(name, complex(tr.sigma), tr.status, tr.iterations, tr.matvecs,
                                tr.extra_matvecs, float(tr.true_relres), elapsed, sm,
                                hopping=None if prob.hoppings is None else prob.hoppings[i])
            if cfg.out is not None:
                fname = f"{name}_shift{i}.csv"
                write_history_csv(os.path.join(cfg.out, fname), tr.history)
                entry.csv = fname
                csvs.append(fname)
                label = f"{name} sigma={_fmt_shift(tr.sigma)}"
                if entry.hopping is not None:
                    label += f" (k={entry.hopping:g})"
                titles.append(label)
            report.entries.append(entry)
            report.histories[(name, i)] = tr.history
    if cfg.out is not None:
        write_gnuplot(os.path.join(cfg.out, "plot.gp"), csvs, titles)
        with open(os.path.join(cfg.out, "summary.json"), "w", encoding="ascii") as fh:
            json.dump(report.to_json(), fh, indent=2)
    if verbose:
        print(report.summary())
    broken = [e for e in report.entries if e.status == "breakdown"]
    if broken:
        raise ExperimentError(f"solver breakdown on {len(broken)} shift(s)", report)
    return report


# ----------------------------------------------------------------------- CLI

def _parse_list(text: str, kind=complex):
    try:
        return [kind(t.strip().replace(" ", "")) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftkrylov-bench",
                                description="Run shifted Krylov solvers and export residual histories.")
    p.add_argument("--matrix", metavar="PATH", help="Matrix Market file (also used by file-based presets)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named experiment")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--sigma", type=_parse_list, metavar="LIST", help="comma-separated shifts")
    grp.add_argument("--k", type=lambda t: _parse_list(t, float), metavar="LIST",
                     help="comma-separated hopping parameters (QCD presets)")
    p.add_argument("--rhs", metavar="{unit:IDX|ones|file:PATH}", help="right-hand side")
    p.add_argument("--solver", choices=["sbicgstab", "sqmrcgstab", "both"], default="both")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--maxit", type=int, help="iteration limit (default 10*n)")
    p.add_argument("--shadow", default="b", metavar="{b|seed:INT}")
    p.add_argument("--true-res-every", type=int, default=1, metavar="N",
                   help="sample the true residual every N iterations (0 disables)")
    p.add_argument("--out", metavar="DIR", help="directory for CSV, plot script and summary")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ExperimentConfig(matrix=args.matrix, preset=args.preset, shifts=args.sigma,
                           hoppings=args.k, rhs=args.rhs, solver=args.solver, tol=args.tol,
                           maxit=args.maxit, shadow=args.shadow,
                           true_res_every=args.true_res_every, out=args.out)
    try:
        run_experiment(cfg, verbose=True)
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
