"""Analysis configuration: strict parsing, validation, and normalization.

The config is a single YAML document with fixed snake_case blocks; unknown
keys anywhere are errors.  Loading produces an ``AnalysisConfig``; resolving
it produces a ``Problem``, the normalized form every downstream stage
consumes.

Normalization handles the declared direction of monotone response: dimensions
declared decreasing are sign-flipped so that internally "monotone" always
means weakly increasing.  The flip relabels lattice points, effect pairs and
diamond declarations; a flipped diamond keeps its restriction when its
incomparable pair survives the flip and swaps complementarity for
substitutability when the flip turns its pair into the bottom/top chain.
Reports translate back to the original coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .bounds import OutcomeBounds
from .lattice import (
    Point,
    TreatmentLattice,
    as_point,
    enumerate_diamonds,
    grid_lattice,
    validate_lattice,
)
from .partition import SublatticeFlags, merge_flag_sets


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


def _require_mapping(node: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(node, Mapping):
        raise ConfigError(f"{path}: expected a mapping, got {type(node).__name__}")
    return node


def _check_keys(node: Mapping[str, Any], allowed: set[str], path: str) -> None:
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}; allowed {sorted(allowed)}")


def _as_pair_of_points(node: Any, path: str) -> tuple[Point, Point]:
    if not isinstance(node, (list, tuple)) or len(node) != 2:
        raise ConfigError(f"{path}: expected [t1, t2]")
    try:
        return as_point(node[0]), as_point(node[1])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class InstrumentBlock:
    column: str
    direction: str = "supermodular"
    bin_edges: tuple[float, ...] | None = None
    target_level: float = 0.0
    cell: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class DistributionBlock:
    independence: bool = True
    quantiles: tuple[float, ...] = ()
    effects: tuple[tuple[Point, Point], ...] | None = None
    qspmiv: bool = False


@dataclass(frozen=True)
class BootstrapBlock:
    replicates: int = 999
    seed: int = 0
    level: float = 0.95


@dataclass(frozen=True)
class OutputBlock:
    report: str = "report.json"
    plot_data: str = "plot_data.csv"
    dist_data: str = "dist_bounds.csv"


@dataclass(frozen=True)
class AnalysisConfig:
    dimensions: tuple[str, ...]
    levels: tuple[tuple[int, ...], ...]
    points: tuple[Point, ...] | None
    outcome_column: str
    k: OutcomeBounds
    smtr_direction: tuple[int, ...] | None
    spm_decl: str | tuple[tuple[Point, Point], ...]  # "all" | ((bottom, top), ...)
    sbm_decl: str | tuple[tuple[Point, Point], ...]
    effects: tuple[tuple[Point, Point], ...]
    instrument: InstrumentBlock | None
    distribution: DistributionBlock | None
    bootstrap: BootstrapBlock
    output: OutputBlock


def load_config(path: str | Path) -> AnalysisConfig:
    """Parse and validate a YAML config; errors carry line/column context."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config is not valid YAML{where}: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: Any) -> AnalysisConfig:
    root = _require_mapping(doc, "config")
    _check_keys(
        root,
        {
            "lattice",
            "outcome",
            "assumptions",
            "effects",
            "instrument",
            "distribution",
            "bootstrap",
            "output",
        },
        "config",
    )
    for required in ("lattice", "outcome", "effects"):
        if required not in root:
            raise ConfigError(f"config: missing required block {required!r}")

    lat = _require_mapping(root["lattice"], "lattice")
    _check_keys(lat, {"dimensions", "levels", "points"}, "lattice")
    dims = tuple(str(d) for d in lat.get("dimensions", ()))
    if not dims:
        raise ConfigError("lattice.dimensions: at least one dimension required")
    levels_node = lat.get("levels")
    if levels_node is None:
        raise ConfigError("lattice.levels: required (one level list per dimension)")
    levels = tuple(tuple(int(v) for v in axis) for axis in levels_node)
    if len(levels) != len(dims):
        raise ConfigError("lattice.levels: need exactly one level list per dimension")
    points = None
    if lat.get("points") is not None:
        points = tuple(as_point(p) for p in lat["points"])
        for p in points:
            if len(p) != len(dims):
                raise ConfigError(f"lattice.points: point {p} has wrong dimension")

    out = _require_mapping(root["outcome"], "outcome")
    _check_keys(out, {"column", "k_lo", "k_hi"}, "outcome")
    if "column" not in out:
        raise ConfigError("outcome.column: required")
    try:
        k = OutcomeBounds(float(out.get("k_lo", 0.0)), float(out.get("k_hi", 1.0)))
    except ValueError as exc:
        raise ConfigError(f"outcome: {exc}") from exc

    smtr_direction: tuple[int, ...] | None = None
    spm_decl: str | tuple = ()
    sbm_decl: str | tuple = ()
    if root.get("assumptions") is not None:
        blk = _require_mapping(root["assumptions"], "assumptions")
        _check_keys(blk, {"smtr", "spm", "sbm"}, "assumptions")
        smtr_node = blk.get("smtr", "off")
        if smtr_node in ("off", None, False):
            smtr_direction = None
        elif smtr_node in ("on", True):
            smtr_direction = tuple(1 for _ in dims)
        else:
            smtr_direction = tuple(int(v) for v in smtr_node)
            if len(smtr_direction) != len(dims) or any(
                v not in (-1, 1) for v in smtr_direction
            ):
                raise ConfigError(
                    "assumptions.smtr: direction must be a +1/-1 vector, one "
                    "entry per dimension (or 'on'/'off')"
                )
        spm_decl = _parse_flag_decl(blk.get("spm"), "assumptions.spm")
        sbm_decl = _parse_flag_decl(blk.get("sbm"), "assumptions.sbm")

    effects_node = root["effects"]
    if not isinstance(effects_node, (list, tuple)) or not effects_node:
        raise ConfigError("effects: need a nonempty list of [t1, t2] pairs")
    effects = tuple(
        _as_pair_of_points(e, f"effects[{i}]") for i, e in enumerate(effects_node)
    )
    for i, (t1, t2) in enumerate(effects):
        if t1 == t2:
            raise ConfigError(f"effects[{i}]: t1 and t2 must differ")

    instrument = None
    if root.get("instrument") is not None:
        blk = _require_mapping(root["instrument"], "instrument")
        _check_keys(
            blk,
            {"column", "direction", "bin_edges", "target_level", "cell"},
            "instrument",
        )
        if "column" not in blk or "target_level" not in blk:
            raise ConfigError("instrument: column and target_level are required")
        direction = str(blk.get("direction", "supermodular"))
        if direction not in ("supermodular", "submodular", "modular"):
            raise ConfigError(f"instrument.direction: unknown value {direction!r}")
        edges = None
        if blk.get("bin_edges") is not None:
            edges = tuple(float(v) for v in blk["bin_edges"])
            if list(edges) != sorted(edges):
                raise ConfigError("instrument.bin_edges: must be sorted ascending")
        cell_node = blk.get("cell") or {}
        cell = tuple(sorted((str(k_), float(v)) for k_, v in cell_node.items()))
        instrument = InstrumentBlock(
            column=str(blk["column"]),
            direction=direction,
            bin_edges=edges,
            target_level=float(blk["target_level"]),
            cell=cell,
        )

    distribution = None
    if root.get("distribution") is not None:
        blk = _require_mapping(root["distribution"], "distribution")
        _check_keys(blk, {"independence", "quantiles", "effects", "qspmiv"}, "distribution")
        qs = tuple(float(q) for q in blk.get("quantiles", ()))
        if any(not 0.0 < q < 1.0 for q in qs):
            raise ConfigError("distribution.quantiles: levels must be inside (0, 1)")
        d_effects = None
        if blk.get("effects") is not None:
            d_effects = tuple(
                _as_pair_of_points(e, f"distribution.effects[{i}]")
                for i, e in enumerate(blk["effects"])
            )
        distribution = DistributionBlock(
            independence=bool(blk.get("independence", True)),
            quantiles=qs,
            effects=d_effects,
            qspmiv=bool(blk.get("qspmiv", False)),
        )

    bootstrap = BootstrapBlock()
    if root.get("bootstrap") is not None:
        blk = _require_mapping(root["bootstrap"], "bootstrap")
        _check_keys(blk, {"replicates", "seed", "level"}, "bootstrap")
        bootstrap = BootstrapBlock(
            replicates=int(blk.get("replicates", 999)),
            seed=int(blk.get("seed", 0)),
            level=float(blk.get("level", 0.95)),
        )
        if bootstrap.replicates < 1:
            raise ConfigError("bootstrap.replicates: need at least 1")
        if not 0.0 < bootstrap.level < 1.0:
            raise ConfigError("bootstrap.level: must be inside (0, 1)")

    output = OutputBlock()
    if root.get("output") is not None:
        blk = _require_mapping(root["output"], "output")
        _check_keys(blk, {"report", "plot_data", "dist_data"}, "output")
        output = OutputBlock(
            report=str(blk.get("report", "report.json")),
            plot_data=str(blk.get("plot_data", "plot_data.csv")),
            dist_data=str(blk.get("dist_data", "dist_bounds.csv")),
        )

    return AnalysisConfig(
        dimensions=dims,
        levels=levels,
        points=points,
        outcome_column=str(out["column"]),
        k=k,
        smtr_direction=smtr_direction,
        spm_decl=spm_decl,
        sbm_decl=sbm_decl,
        effects=effects,
        instrument=instrument,
        distribution=distribution,
        bootstrap=bootstrap,
        output=output,
    )


def _parse_flag_decl(node: Any, path: str) -> str | tuple[tuple[Point, Point], ...]:
    if node in (None, "none", False, ()):
        return ()
    if node == "all":
        return "all"
    if isinstance(node, (list, tuple)):
        return tuple(_as_pair_of_points(e, f"{path}[{i}]") for i, e in enumerate(node))
    raise ConfigError(f"{path}: expected 'all', 'none', or a list of [bottom, top] pairs")


# ---------------------------------------------------------------------------
# Resolution to a normalized problem.


@dataclass(frozen=True)
class EffectEntry:
    """One requested contrast, in both display and normalized coordinates."""

    display_t1: Point
    display_t2: Point
    t1: Point
    t2: Point


@dataclass(frozen=True)
class Problem:
    """Everything the runner needs, in monotone-normalized coordinates."""

    config: AnalysisConfig
    lattice: TreatmentLattice
    orientation: tuple[int, ...]
    k: OutcomeBounds
    monotone: bool
    flags: tuple[SublatticeFlags, ...]
    effects: tuple[EffectEntry, ...]

    def to_internal(self, p: Point) -> Point:
        return tuple(s * c for s, c in zip(self.orientation, p))

    def to_display(self, p: Point) -> Point:
        return tuple(s * c for s, c in zip(self.orientation, p))


def _flip(p: Point, orientation: tuple[int, ...]) -> Point:
    return tuple(s * c for s, c in zip(orientation, p))


def resolve_problem(config: AnalysisConfig) -> Problem:
    """Validate the lattice and normalize orientation and declarations."""
    if config.points is not None:
        original = validate_lattice(config.points)
    else:
        original = grid_lattice(config.levels)

    orientation = config.smtr_direction or tuple(1 for _ in config.dimensions)
    monotone = config.smtr_direction is not None
    if any(s == -1 for s in orientation):
        from .lattice import LatticeError

        try:
            lattice = validate_lattice(_flip(p, orientation) for p in original.points)
        except LatticeError as exc:
            raise ConfigError(
                "treatment set is not a lattice after the monotone-direction "
                f"flip ({exc}); declare the analysis in normalized orientation"
            ) from exc
    else:
        lattice = original

    flags = _resolve_flags(config, original, lattice, orientation)

    effects = []
    for t1, t2 in config.effects:
        nt1, nt2 = _flip(t1, orientation), _flip(t2, orientation)
        if nt1 not in lattice or nt2 not in lattice:
            raise ConfigError(f"effects: pair ({t1}, {t2}) not contained in the lattice")
        effects.append(EffectEntry(display_t1=t1, display_t2=t2, t1=nt1, t2=nt2))

    return Problem(
        config=config,
        lattice=lattice,
        orientation=orientation,
        k=config.k,
        monotone=monotone,
        flags=flags,
        effects=tuple(effects),
    )


def _resolve_flags(
    config: AnalysisConfig,
    original: TreatmentLattice,
    lattice: TreatmentLattice,
    orientation: tuple[int, ...],
) -> tuple[SublatticeFlags, ...]:
    original_diamonds = enumerate_diamonds(original)
    target_diamonds = enumerate_diamonds(lattice)
    by_pair = {frozenset((d.left, d.right)): d for d in target_diamonds}

    def matching(decl: str | tuple, label: str):
        if decl == "all":
            return list(original_diamonds)
        matched = []
        for bottom, top in decl:
            hits = [
                d for d in original_diamonds if d.bottom == bottom and d.top == top
            ]
            if not hits:
                raise ConfigError(
                    f"assumptions.{label}: no diamond with bottom {bottom} and top {top}"
                )
            matched.extend(hits)
        return matched

    spm_ids: set[int] = set()
    sbm_ids: set[int] = set()
    for label, decl, own, other in (
        ("spm", config.spm_decl, spm_ids, sbm_ids),
        ("sbm", config.sbm_decl, sbm_ids, spm_ids),
    ):
        for d in matching(decl, label):
            image = [_flip(p, orientation) for p in (d.bottom, d.left, d.right, d.top)]
            pair_members = {image[1], image[2]}
            new_bottom = tuple(map(min, zip(*image)))
            new_top = tuple(map(max, zip(*image)))
            image_set = set(image)
            if new_bottom not in image_set or new_top not in image_set:
                raise ConfigError(
                    f"assumptions.{label}: declaration on diamond "
                    f"(bottom {d.bottom}, top {d.top}) does not survive the "
                    "monotone-direction flip; declare it in normalized orientation"
                )
            new_pair = frozenset(image_set - {new_bottom, new_top})
            target = by_pair.get(new_pair)
            if target is None:
                raise ConfigError(
                    f"assumptions.{label}: flipped diamond {sorted(image_set)} is "
                    "not a sublattice of the normalized treatment set"
                )
            if new_pair == frozenset(pair_members):
                own.add(target.id)  # pair survived: restriction unchanged
            else:
                other.add(target.id)  # pair became the chain: restriction flips
    return merge_flag_sets(lattice, sorted(spm_ids), sorted(sbm_ids))
