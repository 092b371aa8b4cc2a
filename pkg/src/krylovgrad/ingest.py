"""Readers and writers for FCIDUMP integrals, integral-derivative files and
flat ``key=value`` run configurations.

Derivative file format (UTF-8, ``#`` starts a comment)::

    norb 2              # spatial orbitals; or ``nspinorb N`` for spin orbitals
    coord O_x           # starts a coordinate section
    K 0 1 0.3           # d k_pq / dx, 0-based, symmetric partner implied
    G 0 0 1 1 0.1       # d g_pqrs / dx, chemists' notation, 8-fold partners implied
    E 0.1               # d E_nuc / dx

Values in ``K`` records are derivatives of the *effective* one-body matrix
``k = h - 1/2 sum_r g_prrq`` used by :class:`MolecularHamiltonian`.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .operators import MolecularHamiltonian, effective_one_body, spin_expand

log = logging.getLogger(__name__)

_KNOWN_KEYS = {"NORB", "NELEC", "MS2", "ORBSYM", "ISYM", "UHF", "IUHF", "ST", "III", "PNTGRP"}


class ParseError(ValueError):
    """Malformed integral or derivative input."""


def _text(src) -> str:
    if isinstance(src, bytes):
        return src.decode("utf-8")
    if isinstance(src, Path):
        return src.read_text()
    if hasattr(src, "read"):
        data = src.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    return src


def _symmetrize_g(g, i, j, k, l, v):
    for a, b, c, d in {(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                       (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)}:
        g[a, b, c, d] = v


@dataclass
class Fcidump:
    """Spatial-orbital integrals as stored in an FCIDUMP file."""

    norb: int
    nelec: int
    ms2: int
    h: np.ndarray
    g: np.ndarray
    e_core: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_hamiltonian(self) -> MolecularHamiltonian:
        k, g = spin_expand(effective_one_body(self.h, self.g), self.g)
        return MolecularHamiltonian(2 * self.norb, self.e_core, k, g, n_electrons=self.nelec)

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"&FCI NORB={self.norb},NELEC={self.nelec},MS2={self.ms2},\n")
        buf.write(" ORBSYM=" + ",".join("1" for _ in range(self.norb)) + ",\n ISYM=1,\n&END\n")
        n = self.norb
        for i in range(n):
            for j in range(i + 1):
                for k in range(n):
                    for l in range(k + 1):
                        if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                            continue
                        v = self.g[i, j, k, l]
                        if v != 0.0:
                            buf.write(f"{float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
        for i in range(n):
            for j in range(i + 1):
                if self.h[i, j] != 0.0:
                    buf.write(f"{float(self.h[i, j])!r} {i + 1} {j + 1} 0 0\n")
        buf.write(f"{float(self.e_core)!r} 0 0 0 0\n")
        return buf.getvalue()


def read_fcidump(src) -> Fcidump:
    """Parse FCIDUMP text (str, bytes, path or file object)."""
    text = _text(src)
    m = re.search(r"&END|^\s*/\s*$", text, flags=re.IGNORECASE | re.MULTILINE)
    if not text.lstrip().upper().startswith("&FCI") or m is None:
        raise ParseError("missing &FCI ... &END namelist header")
    header, body = text[:m.start()], text[m.end():]
    header = re.sub(r"^\s*&FCI", "", header.strip(), flags=re.IGNORECASE)

    values: dict[str, list[str]] = {}
    key = None
    for tok in re.split(r"[,\s]+", header):
        if not tok:
            continue
        if "=" in tok:
            key, _, val = tok.partition("=")
            key = key.upper()
            values[key] = [val] if val else []
        elif key is not None:
            values[key].append(tok)
        else:
            raise ParseError(f"unexpected header token {tok!r}")
    for k in values:
        if k not in _KNOWN_KEYS:
            log.warning("ignoring unknown FCIDUMP key %s", k)
    try:
        norb = int(values["NORB"][0])
        nelec = int(values.get("NELEC", ["0"])[0])
        ms2 = int(values.get("MS2", ["0"])[0])
    except (KeyError, IndexError, ValueError) as exc:
        raise ParseError(f"malformed FCIDUMP header: {exc}") from None

    h = np.zeros((norb, norb))
    g = np.zeros((norb,) * 4)
    e_core = 0.0
    seen: dict[tuple, float] = {}
    for lineno, line in enumerate(body.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 'value i j k l', got {line!r}")
        try:
            v = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(p) for p in parts[1:])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field in {line!r}") from None
        if max(i, j, k, l) > norb or min(i, j, k, l) < 0:
            raise ParseError(f"line {lineno}: index exceeds NORB={norb}")
        idx = (i, j, k, l)
        if idx in seen and seen[idx] != v:
            log.warning("conflicting duplicate entry %s: %r replaced by %r", idx, seen[idx], v)
        seen[idx] = v
        if i == j == k == l == 0:
            e_core = v
        elif k == l == 0 and j != 0:
            h[i - 1, j - 1] = h[j - 1, i - 1] = v
        elif j == k == l == 0:
            continue  # orbital energy record
        else:
            _symmetrize_g(g, i - 1, j - 1, k - 1, l - 1, v)
    return Fcidump(norb, nelec, ms2, h, g, e_core)


def parse_fcidump(src) -> MolecularHamiltonian:
    """Parse FCIDUMP text into a spin-orbital :class:`MolecularHamiltonian`."""
    return read_fcidump(src).to_hamiltonian()


@dataclass
class IntegralDerivatives:
    """Per-coordinate derivatives of ``k``, ``g`` and ``E_nuc`` over spin orbitals."""

    labels: list[str]
    dk_dx: np.ndarray   # (ncoord, N, N)
    dg_dx: np.ndarray   # (ncoord, N, N, N, N)
    de_nuc_dx: np.ndarray
    spatial: bool = True

    @property
    def n_spin_orbitals(self) -> int:
        return self.dk_dx.shape[1]

    def dumps(self) -> str:
        """Serialize back to the text format (spatial if the input was spatial)."""
        step = 2 if self.spatial else 1
        n = self.n_spin_orbitals // step
        lines = [f"norb {n}" if self.spatial else f"nspinorb {n}"]
        for c, label in enumerate(self.labels):
            lines.append(f"coord {label}")
            dk = self.dk_dx[c][::step, ::step]
            dg = self.dg_dx[c][::step, ::step, ::step, ::step]
            for i in range(n):
                for j in range(i, n):
                    if dk[i, j] != 0.0:
                        lines.append(f"K {i} {j} {float(dk[i, j])!r}")
            for i, j, k, l in np.argwhere(dg != 0.0):
                if (i, j, k, l) == min(((i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
                                        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i))):
                    lines.append(f"G {i} {j} {k} {l} {float(dg[i, j, k, l])!r}")
            lines.append(f"E {float(self.de_nuc_dx[c])!r}")
        return "\n".join(lines) + "\n"


def parse_derivatives(src, n_orbitals: int | None = None, spatial: bool = True) -> IntegralDerivatives:
    """Parse the integral-derivative text format described in the module docstring.

    ``n_orbitals``/``spatial`` supply the orbital count when the file has no
    ``norb``/``nspinorb`` header line.
    """
    text = _text(src)
    sections: list[tuple[str, list]] = []
    n = n_orbitals
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        try:
            if tag in ("norb", "nspinorb"):
                n, spatial = int(rest[0]), tag == "norb"
            elif tag == "coord":
                if not rest:
                    raise ParseError(f"line {lineno}: coord needs a label")
                sections.append((" ".join(rest), []))
            elif tag in ("K", "G", "E"):
                if not sections:
                    raise ParseError(f"line {lineno}: record before any coord section")
                nidx = {"K": 2, "G": 4, "E": 0}[tag]
                if len(rest) != nidx + 1:
                    raise ParseError(f"line {lineno}: wrong field count for {tag}")
                idx = tuple(int(t) for t in rest[:nidx])
                sections[-1][1].append((tag, idx, float(rest[-1])))
            else:
                raise ParseError(f"line {lineno}: unknown record tag {tag!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"line {lineno}: {exc}") from None
    if n is None:
        raise ParseError("orbital count unknown: add a 'norb N' line")
    if not sections:
        raise ParseError("no coord sections")

    dk = np.zeros((len(sections), n, n))
    dg = np.zeros((len(sections), n, n, n, n))
    de = np.zeros(len(sections))
    for c, (label, records) in enumerate(sections):
        if not records:
            raise ParseError(f"coord {label!r} has no records")
        for tag, idx, v in records:
            if any(i < 0 or i >= n for i in idx):
                raise ParseError(f"coord {label!r}: index {idx} out of range for {n} orbitals")
            if tag == "K":
                dk[c, idx[0], idx[1]] = dk[c, idx[1], idx[0]] = v
            elif tag == "G":
                _symmetrize_g(dg[c], *idx, v)
            else:
                de[c] = v
    if spatial:
        pairs = [spin_expand(dk[c], dg[c]) for c in range(len(sections))]
        dk = np.array([p[0] for p in pairs])
        dg = np.array([p[1] for p in pairs])
    return IntegralDerivatives([s[0] for s in sections], dk, dg, de, spatial)


def finite_difference_derivatives(plus: Fcidump, minus: Fcidump, step: float,
                                  label: str = "x") -> IntegralDerivatives:
    """Central-difference integral derivatives from FCIDUMPs at ``x +- step``."""
    kp = effective_one_body(plus.h, plus.g)
    km = effective_one_body(minus.h, minus.g)
    dk = (kp - km) / (2 * step)
    dg = (plus.g - minus.g) / (2 * step)
    de = (plus.e_core - minus.e_core) / (2 * step)
    dks, dgs = spin_expand(dk, dg)
    return IntegralDerivatives([label], dks[None], dgs[None], np.array([de]), True)


ESTIMATORS = ("exact", "post", "coherent", "direct")


@dataclass
class RunConfig:
    """Settings for one CLI run; every field can come from a config file or a flag."""

    dim: int = 4
    threshold: float = 1e-3
    shots: int | str = "analytic"
    ensemble: int = 100
    state: int = 0
    estimator: str = "coherent"
    seed: int = 1234
    p_floor: float = 1e-6
    sweep_dim: list[int] = field(default_factory=list)
    sweep_threshold: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.dim < 1:
            raise ValueError("krylov dimension must be >= 1")
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.state < 0 or self.state >= self.dim:
            raise ValueError("state index must satisfy 0 <= state < dim")
        if self.ensemble < 1:
            raise ValueError("ensemble size must be >= 1")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if not 0.0 <= self.p_floor <= 1.0:
            raise ValueError("p_floor must lie in [0, 1]")
        if self.shots != "analytic" and (not isinstance(self.shots, int) or self.shots < 1):
            raise ValueError("shots must be 'analytic' or a positive integer")

    @property
    def shot_count(self) -> int:
        """Number of shots used to scale single-shot variances (1 when analytic)."""
        return 1 if self.shots == "analytic" else int(self.shots)


def _coerce(name: str, value: str):
    if name == "shots":
        return value if value == "analytic" else int(value)
    if name == "sweep_dim":
        return [int(v) for v in value.replace(",", " ").split()]
    if name == "sweep_threshold":
        return [float(v) for v in value.replace(",", " ").split()]
    if name in ("dim", "ensemble", "state", "seed"):
        return int(value)
    if name in ("threshold", "p_floor"):
        return float(value)
    return value


def load_config(src=None, **overrides) -> RunConfig:
    """Read a flat ``key=value`` file; keyword overrides take precedence."""
    names = {f.name for f in fields(RunConfig)}
    values = {}
    if src is not None:
        for lineno, raw in enumerate(_text(Path(src) if isinstance(src, str) else src).splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in names:
                raise ParseError(f"config line {lineno}: bad entry {raw!r}")
            values[key] = _coerce(key, val.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)
