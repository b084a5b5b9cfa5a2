"""Problem files: a strict, line-oriented ``key = value`` format.

Example::

    # Omega = 2 exp(x/2), minimize J((D_Omega y)^2)
    lagrangian = z^2
    omega      = 2*exp(x/2)
    interval   = 0 1
    boundary   = 0 1
    mesh       = 200

Required keys: lagrangian, omega, interval, boundary.  Optional: mesh,
quad_panels, seed, convexity_box (eight numbers: x, y, z ranges then the
increment range), convexity_samples.  Unknown or duplicate keys are errors.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .expr import ParseError, parse
from .operators import NotIncreasingError, OmegaFunction
from .variational import VariationalProblem

REQUIRED = ("lagrangian", "omega", "interval", "boundary")
OPTIONAL = ("mesh", "quad_panels", "seed", "convexity_box", "convexity_samples")


class ProblemFileError(ValueError):
    def __init__(self, message: str, path: str = "", line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


@dataclass(frozen=True)
class ProblemSpec:
    lagrangian: str
    omega: str
    interval: tuple[float, float]
    boundary: tuple[float, float]
    problem: VariationalProblem
    mesh: int | None = None
    quad_panels: int | None = None
    seed: int | None = None
    convexity_box: tuple[float, ...] | None = None
    convexity_samples: int | None = None
    source: str = ""


def _numbers(text: str, line: int, count: int, key: str, path: str) -> tuple[float, ...]:
    parts = text.split()
    if len(parts) != count:
        raise ProblemFileError(f"{key} needs {count} numbers, got {len(parts)}", path, line)
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ProblemFileError(f"{key}: not a number in {text!r}", path, line) from None


def _integer(text: str, line: int, key: str, path: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ProblemFileError(f"{key}: expected an integer, got {text!r}", path, line) from None
    if value < minimum:
        raise ProblemFileError(f"{key} must be >= {minimum}", path, line)
    return value


def parse_problem(text: str, path: str = "<string>") -> ProblemSpec:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ProblemFileError(f"expected 'key = value', got {stripped!r}", path, lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if key not in REQUIRED and key not in OPTIONAL:
            raise ProblemFileError(f"unknown key {key!r}", path, lineno)
        if key in raw:
            raise ProblemFileError(f"duplicate key {key!r} (first on line {raw[key][1]})", path, lineno)
        raw[key] = (value, lineno)
    for key in REQUIRED:
        if key not in raw:
            raise ProblemFileError(f"missing required key {key!r}", path)

    exprs = {}
    for key in ("lagrangian", "omega"):
        value, lineno = raw[key]
        try:
            exprs[key] = parse(value)
        except ParseError as exc:
            raise ProblemFileError(f"{key}: {exc}", path, lineno) from exc
    interval = _numbers(*raw["interval"], 2, "interval", path)
    boundary = _numbers(*raw["boundary"], 2, "boundary", path)
    opts = {}
    for key, minimum in (("mesh", 4), ("quad_panels", 1), ("seed", 0), ("convexity_samples", 1)):
        if key in raw:
            opts[key] = _integer(*raw[key], key, path, minimum)
    if "convexity_box" in raw:
        opts["convexity_box"] = _numbers(*raw["convexity_box"], 8, "convexity_box", path)

    a, b = interval
    if not a < b:
        raise ProblemFileError(f"interval must satisfy a < b, got {a} {b}", path, raw["interval"][1])
    try:
        w = OmegaFunction(exprs["omega"], (a, b))
        problem = VariationalProblem(exprs["lagrangian"], w, a, b, *boundary)
    except NotIncreasingError as exc:
        raise ProblemFileError(f"omega: {exc}", path, raw["omega"][1]) from exc
    except ValueError as exc:
        raise ProblemFileError(str(exc), path) from exc
    return ProblemSpec(raw["lagrangian"][0], raw["omega"][0], interval, boundary, problem,
                       source=path, **opts)


def load_problem(path) -> ProblemSpec:
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc.strerror}", path) from exc
    return parse_problem(text, path)
