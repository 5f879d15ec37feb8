"""Declarative experiment configs, result tables and the runners behind the CLI."""

import copy
import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import fock, hamiltonian, hartree, measures, phase_space, states, wick

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w


class ConfigError(ValueError):
    """The experiment description is malformed or inconsistent."""


class StageError(RuntimeError):
    """A named stage of an experiment failed."""

    def __init__(self, stage, err):
        super().__init__(f"stage '{stage}' failed: {err}")
        self.stage = stage


DEFAULTS = {
    "grid": {"length": 2 * math.pi, "dim": 1, "points_per_axis": 32},
    "modes": 2,
    "potential": {"kind": "soft_coulomb", "strength": 1.0, "softening": 0.1},
    "n_max": None,
    "epsilons": [0.5, 0.25, 0.125, 0.0625],
    "family": {"kind": "hermite", "psi": [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]]},
    "panel": {
        "xis": [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.5]], [[0.4, 0.0], [0.4, 0.0]],
                [[0.7, 0.0], [0.0, -0.3]], [[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.3], [0.8, 0.0]]],
        "times": [0.25, 0.5],
        "bound": 2.0,
    },
    "flow": {"integrator": "rk4_interaction", "dt": 1e-3},
    "measure": {"n_angles": 64},
    "hartree": {"z0": [[1.0, 0.0], [0.5, 0.0], [0.0, 0.3]], "t1": 1.0},
    "tolerances": {"ccr": 1e-10, "weyl": 1e-8, "composition": 1e-10, "drift": 1e-8, "commutator": 1e-7},
    "output_dir": "results",
    "seed": 0,
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def complex_vector(spec):
    """Decode [[re, im], ...] or [x, ...] into a complex array."""
    arr = np.asarray(spec, dtype=float)
    if arr.ndim >= 2 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def encode_complex(v):
    v = np.asarray(v, dtype=complex)
    return np.stack([v.real, v.imag], axis=-1).tolist()


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, d))
        cfg.validate()
        return cfg

    def to_dict(self):
        return copy.deepcopy(self.data)

    @classmethod
    def load(cls, path):
        ext = os.path.splitext(str(path))[1].lower()
        try:
            with open(path, "rb") as fh:
                if ext == ".toml":
                    raw = tomllib.load(fh)
                elif ext == ".json":
                    raw = json.load(fh)
                else:
                    raise ConfigError(f"config must be .toml or .json, got {ext!r}")
        except (OSError, ValueError) as err:
            if isinstance(err, ConfigError):
                raise
            raise ConfigError(f"cannot read config {path}: {err}") from err
        if raw.get("n_max") == "auto":
            raw["n_max"] = None
        return cls.from_dict(raw)

    def dump(self, path):
        ext = os.path.splitext(str(path))[1].lower()
        data = self.to_dict()
        if data.get("n_max") is None:
            data["n_max"] = "auto"
        if ext == ".toml":
            with open(path, "wb") as fh:
                tomli_w.dump(data, fh)
        else:
            with open(path, "w") as fh:
                json.dump(data, fh, indent=2, sort_keys=True)

    def __getitem__(self, key):
        return self.data[key]

    def validate(self):
        d = self.data
        eps = d["epsilons"]
        if not eps or any(not 0 < e <= 1 for e in eps):
            raise ConfigError("epsilons must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon list must be strictly decreasing")
        if d["n_max"] is not None and (int(d["n_max"]) != d["n_max"] or d["n_max"] < 1):
            raise ConfigError("n_max must be a positive integer or 'auto'")
        try:
            self.grid()
            space = self.mode_space()
            self.potential()
            self.family()
            panel = self.panel()
            hartree.FlowConfig(**d["flow"])
        except (ValueError, KeyError, TypeError) as err:
            raise ConfigError(str(err)) from err
        if panel.xis.shape[1] != space.d:
            raise ConfigError("panel vectors do not match the number of modes")

    def grid(self):
        return phase_space.Grid(**self.data["grid"])

    def mode_space(self):
        return phase_space.make_mode_space(self.grid(), int(self.data["modes"]))

    def potential(self, grid=None):
        return phase_space.PairPotential.from_spec(grid or self.grid(), self.data["potential"])

    def family(self):
        spec = dict(self.data["family"])
        kind = spec.pop("kind")
        params = {}
        for k, v in spec.items():
            if k in ("psi", "psi1", "psi2", "z0"):
                params[k] = complex_vector(v)
            elif k == "T":
                params[k] = np.asarray(v, dtype=float)
            else:
                params[k] = v
        return states.StateFamily(kind, params)

    def panel(self):
        p = self.data["panel"]
        return measures.ObservablePanel(complex_vector(p["xis"]), tuple(p["times"]), p.get("bound", 2.0))

    def flow_config(self):
        return hartree.FlowConfig(**self.data["flow"])


CONVERGENCE_COLUMNS = ["experiment", "epsilon", "t", "xi_index", "quantum_re", "quantum_im",
                       "classical_re", "classical_im", "abs_error"]
SUMMARY_COLUMNS = ["epsilon", "sup_error", "w2"]


@dataclass
class ResultTable:
    columns: list
    rows: list
    summary_columns: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([_fmt(x) for x in r])

    def summary_to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.summary_columns)
            for r in self.summary:
                w.writerow([_fmt(x) for x in r])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            return cls([], [])
        return cls(rows[0], [[_parse(x) for x in r] for r in rows[1:]])

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _parse(x):
    try:
        return float(x) if any(c in x for c in ".eEn") or x.lstrip("-").isdigit() else x
    except ValueError:
        return x


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except Exception as err:  # noqa: BLE001 - re-raised with the stage name
        raise StageError(name, err) from err


def convergence_sweep(cfg):
    """Quantum vs classical characteristic functions along the epsilon list."""
    space = _stage("mode space", cfg.mode_space)
    V = _stage("potential", cfg.potential, space.grid)
    kernel = _stage("pair kernel", phase_space.pair_kernel, V, space)
    family = _stage("state family", cfg.family)
    panel = cfg.panel()
    mu0 = _stage("initial measure", family.known_measure, cfg["measure"]["n_angles"])
    evaluator = hartree.galerkin_evaluator(kernel, dt=cfg["flow"]["dt"])
    classical = {t: _stage("push-forward", measures.pushforward, mu0, evaluator, t) for t in panel.times}
    rows, summary = [], []
    name = family.kind
    for eps in cfg["epsilons"]:
        n_max = cfg["n_max"] or family.required_cutoff(eps)
        F = fock.FockSpace(space, n_max, eps)
        rho = _stage("state", family.build, F)
        H = _stage("hamiltonian", hamiltonian.build, F, kernel)
        sup = 0.0
        for t in panel.times:
            rho_t = _stage("quantum propagation", hamiltonian.propagate, rho, H, t)
            for i, xi in enumerate(panel.xis):
                q = _stage("quantum characteristic", measures.quantum_char, rho_t, xi)
                c = measures.classical_char(classical[t], xi)
                err = abs(q - c)
                sup = max(sup, err)
                rows.append([name, eps, t, i, q.real, q.imag, c.real, c.imag, err])
        summary.append([eps, sup, ""])
    return ResultTable(list(CONVERGENCE_COLUMNS), rows, list(SUMMARY_COLUMNS), summary)


def run_convergence(cfg, output_dir=None):
    table = convergence_sweep(cfg)
    out = output_dir or cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    table.to_csv(os.path.join(out, "convergence.csv"))
    table.summary_to_csv(os.path.join(out, "convergence_summary.csv"))
    eps = [r[0] for r in table.summary]
    err = [r[1] for r in table.summary]
    with open(os.path.join(out, "convergence.svg"), "w", encoding="utf-8") as fh:
        fh.write(svg_line_chart([(eps, err, table.rows[0][0] if table.rows else "")],
                                "epsilon", "sup error", log=True))
    return table


HARTREE_COLUMNS = ["t", "mass", "energy", "mass_drift", "energy_drift"]


def run_hartree(cfg, output_dir=None):
    space = cfg.mode_space()
    V = cfg.potential(space.grid)
    # mode coefficients, truncated or zero-padded to the retained modes
    c = complex_vector(cfg["hartree"]["z0"])[:space.d]
    z0 = space.synthesize(np.pad(c, (0, space.d - c.size)))
    flow_cfg = cfg.flow_config()
    traj = _stage("hartree flow", hartree.flow, z0, 0.0, cfg["hartree"]["t1"], flow_cfg, V)
    m0, e0 = traj.mass[0], traj.energy[0]
    rows = [[t, m, e, abs(m - m0) / abs(m0) if m0 else 0.0, abs(e - e0) / abs(e0) if e0 else abs(e - e0)]
            for t, m, e in zip(traj.times, traj.mass, traj.energy)]
    table = ResultTable(list(HARTREE_COLUMNS), rows)
    out = output_dir or cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    table.to_csv(os.path.join(out, "hartree.csv"))
    with open(os.path.join(out, "hartree.svg"), "w", encoding="utf-8") as fh:
        fh.write(svg_line_chart([(table.column("t"), table.column("energy_drift"), "energy drift"),
                                 (table.column("t"), table.column("mass_drift"), "mass drift")],
                                "t", "relative drift"))
    return table


def invariant_suite(cfg):
    """Fast versions of every module's invariants; returns [(name, value, tolerance, ok)]."""
    rng = np.random.default_rng(cfg["seed"])
    tol = cfg["tolerances"]
    space = cfg.mode_space()
    V = cfg.potential(space.grid)
    kernel = phase_space.pair_kernel(V, space)
    d = space.d
    F = fock.FockSpace(space, 8, 0.25)
    results = []

    def record(name, value, bound):
        results.append((name, float(value), float(bound), bool(value <= bound)))

    # fock
    f = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    a, ad = fock.annihilate(f, F), fock.create(g, F)
    comm = (a @ ad - ad @ a).toarray()
    s = F.sector_upto(F.n_max - 1)
    record("ccr", np.max(np.abs(comm[s, s] - F.epsilon * np.vdot(f, g) * np.eye(s.stop))), tol["ccr"])
    z1, z2 = 0.4 * f / np.linalg.norm(f), 0.4j * g / np.linalg.norm(g)
    Fw = fock.FockSpace(space, 16, 0.25)
    W1, W2, W12 = fock.weyl(z1, Fw), fock.weyl(z2, Fw), fock.weyl(z1 + z2, Fw)
    n = min(fock.weyl_protected_cutoff(W, Fw, 1e-12) for W in (W2, W12))
    s = Fw.sector_upto(n)
    phase = np.exp(-0.5j * Fw.epsilon * np.vdot(z1, z2).imag)
    record("weyl_product", np.max(np.abs((W1.matrix @ W2.matrix)[:, s] - phase * W12.matrix[:, s])), tol["weyl"])
    # wick
    worst = 0.0
    for p1, q1, p2, q2 in [(1, 1, 1, 2), (2, 1, 2, 2), (1, 2, 2, 1)]:
        b1 = wick.WickSymbol.random(p1, q1, d, rng)
        b2 = wick.WickSymbol.random(p2, q2, d, rng)
        lhs = (wick.wick_quantize(b1, F) @ wick.wick_quantize(b2, F)).toarray()
        rhs = wick.wick_quantize(wick.compose(b1, b2), F).toarray()
        s = F.sector_upto(F.n_max - (q1 + q2))
        worst = max(worst, np.max(np.abs(lhs - rhs)[:, s]))
    record("wick_composition", worst, tol["composition"])
    b = wick.WickSymbol.random(2, 1, d, rng)
    rep = wick.number_estimate_check(b, F)
    record("number_estimate", rep["lhs"] - rep["bound"], 0.0)
    # hamiltonian
    H = hamiltonian.build(F, kernel)
    record("hamiltonian_hermitian", H.hermiticity_defect(), 1e-12)
    record("number_conservation", H.number_leak(), 0.0)
    xi = 0.3 * f / np.linalg.norm(f)
    bs = hamiltonian.bj_symbols(0.3, xi, kernel)
    Vs = wick.WickSymbol(2, 2, hamiltonian.conjugated_kernel(kernel.matrix, space.kinetic, 0.3), d)
    Vw = wick.wick_quantize(Vs, F).toarray()
    with warnings.catch_warnings():
        # only the protected sectors below are compared
        warnings.simplefilter("ignore", fock.LeakageWarning)
        Wx = fock.weyl(xi, F).matrix
    B = sum(F.epsilon ** (j + 1) * wick.wick_quantize(bj, F).toarray() for j, bj in enumerate(bs))
    s = F.sector_upto(F.n_max - 6)
    record("commutator_expansion", np.max(np.abs((Vw @ Wx - Wx @ Vw - Wx @ B)[:, s])), tol["commutator"])
    # hartree
    z0 = space.synthesize(rng.standard_normal(d) + 1j * rng.standard_normal(d)) * 0.3
    traj = hartree.flow(z0, 0.0, 0.2, cfg.flow_config(), V)
    record("hartree_mass_drift", traj.relative_drift("mass"), tol["drift"])
    record("hartree_energy_drift", traj.relative_drift("energy"), tol["drift"])
    # measures
    mu1 = measures.MeasureEnsemble.random(4, d, cfg["seed"])
    mu2 = measures.MeasureEnsemble.random(4, d, cfg["seed"] + 1)
    w = space.sobolev_weight
    record("w2_exact", abs(measures.wasserstein2(mu1, mu2, w) - measures.wasserstein2_bruteforce(mu1, mu2, w)), 1e-12)
    # states
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1.0
    rho = states.hermite_state(psi, 4, F)
    record("rdm_hermite", np.max(np.abs(states.rdm(rho, 1) - np.outer(psi, psi.conj()))), 1e-12)
    return results


def check_invariants(cfg, output_dir=None):
    results = invariant_suite(cfg)
    table = ResultTable(["check", "value", "tolerance", "ok"], [list(r) for r in results])
    out = output_dir or cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    table.to_csv(os.path.join(out, "invariants.csv"))
    return table, all(r[3] for r in results)


# static plots

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def svg_line_chart(series, xlabel, ylabel, log=False, width=480, height=320):
    """Deterministic SVG line chart of [(xs, ys, label), ...]."""
    pts = [(float(x), float(y)) for xs, ys, _ in series for x, y in zip(xs, ys)]
    if not pts:
        raise ValueError("empty table")

    def tr(v):
        if log:
            return math.log10(max(v, 1e-300))
        return v

    xs = [tr(x) for x, _ in pts]
    ys = [tr(y) for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    m = 50

    def px(x):
        return m + (tr(x) - x0) / (x1 - x0) * (width - 2 * m)

    def py(y):
        return height - m - (tr(y) - y0) / (y1 - y0) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{m}" y1="{height - m}" x2="{width - m}" y2="{height - m}" stroke="black"/>',
           f'<line x1="{m}" y1="{m}" x2="{m}" y2="{height - m}" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}{" (log10)" if log else ""}</text>',
           f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {height / 2:.1f})">{ylabel}{" (log10)" if log else ""}</text>',
           f'<text x="{m}" y="{height - m + 16}" font-size="10" text-anchor="middle">{x0:.3g}</text>',
           f'<text x="{width - m}" y="{height - m + 16}" font-size="10" text-anchor="middle">{x1:.3g}</text>',
           f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{m - 4}" y="{m + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>']
    for k, (sx, sy, label) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(sx, sy))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        for x, y in zip(sx, sy):
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{width - m}" y="{m + 14 * k}" font-size="11" text-anchor="end" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot(table, kind, path):
    """Render a result table as SVG; ``kind`` is 'convergence' or 'hartree'."""
    if isinstance(table, (str, os.PathLike)):
        table = ResultTable.from_csv(table)
    if not table.rows:
        raise ValueError("empty table")
    if kind == "convergence":
        if "sup_error" in table.columns:
            eps, err = table.column("epsilon"), table.column("sup_error")
        else:
            sup = {}
            for e, a in zip(table.column("epsilon"), table.column("abs_error")):
                sup[e] = max(sup.get(e, 0.0), a)
            eps, err = list(sup), list(sup.values())
        svg = svg_line_chart([(eps, err, "sup error")], "epsilon", "sup error", log=True)
    elif kind == "hartree":
        t = table.column("t")
        svg = svg_line_chart([(t, table.column("energy_drift"), "energy drift"),
                              (t, table.column("mass_drift"), "mass drift")], "t", "relative drift")
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg)
    return path
