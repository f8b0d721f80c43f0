"""Attack generators.

Three attacker models:

* a black-box multi-objective evolutionary search over image pixels,
  maximizing several detector confidences at once;
* an open-box projected-gradient patch attack against the differentiable
  window scorer;
* AIS/radar spoof injection, with AIS spoofs passing through the real NMEA
  wire format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import ais_wire
from .core import (
    AisStaticData,
    ClassLabel,
    GroundTruthObject,
    RadarBlob,
    Scenario,
    enu_from_latlon,
    latlon_from_enu,
)
from .detectors import RasterImage, make_raster


@dataclass(frozen=True)
class EaConfig:
    """Evolutionary attack hyperparameters."""

    max_iterations: int = 500
    min_iterations: int = 50
    population_size: int = 50
    perturbation_epsilon: float = 50.0
    epsilon_decay: float = 0.9
    no_improvement_threshold: int = 30
    objective_count: int = 2

    def __post_init__(self) -> None:
        if not 1 <= self.min_iterations <= self.max_iterations:
            raise ValueError("need 1 <= min_iterations <= max_iterations")
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be even and >= 2")
        if self.perturbation_epsilon < 0:
            raise ValueError("perturbation_epsilon must be non-negative")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if self.no_improvement_threshold < 1:
            raise ValueError("no_improvement_threshold must be >= 1")
        if self.objective_count < 1:
            raise ValueError("objective_count must be >= 1")


@dataclass(frozen=True)
class PgdConfig:
    """Projected-gradient patch attack on [0, 1]-normalized pixels."""

    alpha: float = 0.05
    iterations: int = 10
    epsilon: float = 0.3
    norm_order: float = math.inf
    patch_region: tuple[int, int, int, int] = (0, 0, 16, 16)  # x0, y0, x1, y1

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.norm_order != math.inf:
            raise ValueError("only the infinity norm is supported")
        x0, y0, x1, y1 = self.patch_region
        if not (x0 < x1 and y0 < y1):
            raise ValueError("patch_region must be a non-empty rectangle")


@dataclass
class Individual:
    genome: np.ndarray  # additive perturbation, image-shaped
    fitness: np.ndarray | None = None  # objective vector, maximization sense


def nondominated_sort(objectives: Sequence[Sequence[float]]) -> list[list[int]]:
    """Partition points into Pareto fronts (maximization sense).

    Front 0 holds the non-dominated points; each later front is
    non-dominated once earlier fronts are removed. Returns index lists.
    """
    pts = np.asarray(objectives, dtype=float)
    if pts.ndim != 2:
        raise ValueError("objectives must be a list of equal-length vectors")
    n = pts.shape[0]
    if n == 0:
        return []
    # dominates[i, j]: i is >= j everywhere and > j somewhere.
    ge = np.all(pts[:, None, :] >= pts[None, :, :], axis=2)
    gt = np.any(pts[:, None, :] > pts[None, :, :], axis=2)
    dominates = ge & gt
    dominated_count = dominates.sum(axis=0)
    fronts: list[list[int]] = []
    assigned = np.zeros(n, dtype=bool)
    while not assigned.all():
        current = [i for i in range(n) if not assigned[i] and dominated_count[i] == 0]
        if not current:  # defensive: cannot happen for a strict partial order
            current = [int(np.flatnonzero(~assigned)[0])]
        fronts.append(current)
        assigned[current] = True
        for i in current:
            dominated_count -= dominates[i].astype(int)
    return fronts


def das_dennis_directions(n_partitions: int = 12, m: int = 2) -> np.ndarray:
    """Uniform reference directions on the unit simplex."""
    if m != 2:
        raise NotImplementedError("reference directions implemented for 2 objectives")
    steps = np.linspace(0.0, 1.0, n_partitions + 1)
    return np.stack([steps, 1.0 - steps], axis=1)


def _niche_select(
    front: list[int],
    fitness: np.ndarray,
    already: list[int],
    k: int,
    directions: np.ndarray,
) -> list[int]:
    """Pick k members of the overflowing front by reference-direction niching.

    Objectives are min-max normalized over the candidate pool, each point is
    associated with its nearest direction (perpendicular distance), and
    directions are filled starting from the least crowded niche.
    """
    pool = np.array(already + front)
    f = fitness[pool]
    lo = f.min(axis=0)
    span = f.max(axis=0) - lo
    span[span < 1e-12] = 1.0
    normed = (f - lo) / span

    def associate(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        norms = np.linalg.norm(directions, axis=1)
        proj = rows @ directions.T / norms
        dist2 = (rows**2).sum(axis=1)[:, None] - proj**2
        dist2 = np.clip(dist2, 0.0, None)
        return np.argmin(dist2, axis=1), np.sqrt(np.min(dist2, axis=1))

    assoc, dist = associate(normed)
    niche_count = np.zeros(len(directions), dtype=int)
    for pos in range(len(already)):
        niche_count[assoc[pos]] += 1

    front_pos = list(range(len(already), len(pool)))
    chosen: list[int] = []
    remaining = set(front_pos)
    while len(chosen) < k and remaining:
        counts = {d: niche_count[d] for d in {assoc[p] for p in remaining}}
        target_dir = min(counts, key=lambda d: (counts[d], d))
        candidates = [p for p in remaining if assoc[p] == target_dir]
        pick = min(candidates, key=lambda p: (dist[p], p))
        chosen.append(int(pool[pick]))
        remaining.remove(pick)
        niche_count[target_dir] += 1
    return chosen


@dataclass
class EvolutionResult:
    adversarial: RasterImage
    best_objectives: tuple[float, ...]
    history: list[float]  # per-generation population mean of summed objectives
    best_history: list[float]  # per-generation best-so-far summed objectives
    generations_run: int


def evolve_perturbation(
    image: RasterImage,
    objectives: Sequence[Callable[[RasterImage], float]],
    cfg: EaConfig = EaConfig(),
    seed: int = 0,
) -> EvolutionResult:
    """Multi-objective evolutionary perturbation search.

    Uniform mutation within +/- epsilon (epsilon decaying each generation),
    survivor selection by non-dominated sorting with reference-direction
    niching, and an elitist best-by-sum archive. The generation budget is
    drawn uniformly between the configured min and max; the loop stops early
    once the archive has not improved for ``no_improvement_threshold``
    generations (never before the minimum budget). Candidate images are
    clipped to [0, 255] before every evaluation.
    """
    if len(objectives) != cfg.objective_count:
        raise ValueError(
            f"{len(objectives)} objective functions but objective_count={cfg.objective_count}"
        )
    rng = np.random.default_rng(seed)
    budget = int(rng.integers(cfg.min_iterations, cfg.max_iterations + 1))
    shape = image.data.shape
    pop = [Individual(genome=np.zeros(shape)) for _ in range(cfg.population_size)]

    def evaluate(ind: Individual) -> None:
        candidate = make_raster(np.clip(image.data + ind.genome, 0.0, 255.0))
        ind.fitness = np.array([f(candidate) for f in objectives], dtype=float)

    for ind in pop:
        evaluate(ind)

    directions = das_dennis_directions(12, m=2) if cfg.objective_count == 2 else None
    best: Individual = max(pop, key=lambda i: float(i.fitness.sum()))
    best = Individual(genome=best.genome.copy(), fitness=best.fitness.copy())
    stall = 0
    history: list[float] = []
    best_history: list[float] = []
    generations = 0
    eps = cfg.perturbation_epsilon

    for gen in range(budget):
        generations = gen + 1
        offspring = []
        if eps > 0:
            noise = rng.uniform(-eps, eps, size=(cfg.population_size, *shape))
            for parent, delta in zip(pop, noise):
                child = Individual(genome=parent.genome + delta)
                evaluate(child)
                offspring.append(child)
        combined = pop + offspring

        fitness = np.array([ind.fitness for ind in combined])
        fronts = nondominated_sort(fitness)
        survivors: list[int] = []
        for front in fronts:
            if len(survivors) + len(front) <= cfg.population_size:
                survivors.extend(front)
            else:
                k = cfg.population_size - len(survivors)
                if directions is not None:
                    survivors.extend(
                        _niche_select(front, fitness, survivors, k, directions)
                    )
                else:
                    ranked = sorted(front, key=lambda i: -float(fitness[i].sum()))
                    survivors.extend(ranked[:k])
                break
        pop = [combined[i] for i in survivors]

        gen_best = max(combined, key=lambda i: float(i.fitness.sum()))
        if float(gen_best.fitness.sum()) > float(best.fitness.sum()):
            best = Individual(genome=gen_best.genome.copy(),
                              fitness=gen_best.fitness.copy())
            stall = 0
        else:
            stall += 1
        history.append(float(np.mean([ind.fitness.sum() for ind in pop])))
        best_history.append(float(best.fitness.sum()))
        eps *= cfg.epsilon_decay
        if generations >= cfg.min_iterations and stall >= cfg.no_improvement_threshold:
            break

    adversarial = make_raster(np.clip(image.data + best.genome, 0.0, 255.0))
    return EvolutionResult(
        adversarial=adversarial,
        best_objectives=tuple(float(v) for v in best.fitness),
        history=history,
        best_history=best_history,
        generations_run=generations,
    )


def pgd_patch(
    image: RasterImage,
    cfg: PgdConfig,
    gradient_fn: Callable[[RasterImage], np.ndarray],
) -> RasterImage:
    """Iterated signed-gradient ascent projected into the patch epsilon-ball.

    Pixels are normalized to [0, 1] for the attack; ``gradient_fn`` returns
    the objective's gradient with respect to the raw [0, 255] pixels (only
    its sign is used, so the scale is immaterial). Pixels outside the patch
    region never move; sgn(0) = 0, so a flat gradient moves nothing.
    """
    x0, y0, x1, y1 = cfg.patch_region
    if x1 > image.width or y1 > image.height:
        raise ValueError("patch_region lies outside the image")
    mask = np.zeros(image.data.shape)
    mask[y0:y1, x0:x1] = 1.0
    origin = image.data / 255.0
    x = origin.copy()
    for _ in range(cfg.iterations):
        grad = gradient_fn(make_raster(np.clip(x * 255.0, 0.0, 255.0)))
        x = x + cfg.alpha * np.sign(grad) * mask
        x = np.clip(x, origin - cfg.epsilon * mask, origin + cfg.epsilon * mask)
        x = np.clip(x, 0.0, 1.0)
    return make_raster(np.clip(x * 255.0, 0.0, 255.0))


# ---------------------------------------------------------------------------
# Spoof injection


SPOOF_KINDS = ("ais", "radar", "both")


def _spoof_position(rng: np.random.Generator, scenario: Scenario,
                    taken: list[tuple[float, float]],
                    min_separation_m: float) -> tuple[float, float]:
    radar_range = scenario.sensor_config.radar_range_m
    for _ in range(1000):
        dist = radar_range * math.sqrt(rng.uniform(0.01, 0.81))  # uniform in disk
        bearing = rng.uniform(-math.pi, math.pi)
        east = dist * math.sin(bearing)
        north = dist * math.cos(bearing)
        if all(
            math.hypot(east - e, north - n) >= min_separation_m for e, n in taken
        ):
            return (east, north)
    raise RuntimeError("could not place spoof with required separation")


def inject_spoofs(
    scenario: Scenario,
    count: int,
    kind: str = "ais",
    seed: int = 0,
    min_separation_m: float = 400.0,
) -> Scenario:
    """Return a new scenario with ``count`` spoofed contacts injected.

    AIS spoofs claim tanker-sized vessels and are round-tripped through the
    AIVDM encoder/decoder, so downstream consumers see exactly what the wire
    would deliver (including position quantization). Radar spoofs plant
    attacker-chosen blob extents. ``both`` plants a co-located pair with a
    tanker-sized AIS claim over a buoy-sized radar return. The input
    scenario is never mutated.
    """
    if count not in (1, 3, 5):
        raise ValueError(f"spoof count must be 1, 3, or 5, got {count}")
    if kind not in SPOOF_KINDS:
        raise ValueError(f"kind must be one of {SPOOF_KINDS}, got {kind!r}")
    rng = np.random.default_rng(seed)
    taken = [o.position for o in scenario.all_objects]
    new_spoofs: list[GroundTruthObject] = []
    for i in range(count):
        position = _spoof_position(rng, scenario, taken, min_separation_m)
        taken.append(position)
        spoof_id = f"spoof-{len(scenario.spoofed) + i}"
        claimed_length = float(rng.uniform(150.0, 300.0))
        claimed_width = claimed_length * 0.15
        mmsi = int(rng.integers(200_000_000, 800_000_000))

        if kind in ("ais", "both"):
            lat, lon = latlon_from_enu(*position)
            group = ais_wire.synthesize_spoof(
                msg_type=1, mmsi=mmsi, latitude=lat, longitude=lon,
                speed_over_ground=float(rng.uniform(0.0, 12.0)),
                course_over_ground=float(rng.uniform(0.0, 359.9)),
            )
            static_group = ais_wire.synthesize_spoof(
                msg_type=5, mmsi=mmsi, ship_type=80,
                dim_to_bow=int(round(claimed_length / 2)),
                dim_to_stern=int(round(claimed_length)) - int(round(claimed_length / 2)),
                dim_to_port=int(round(claimed_width / 2)),
                dim_to_starboard=int(round(claimed_width)) - int(round(claimed_width / 2)),
                name=f"SPOOF {i}",
            )
            pos_msg = ais_wire.parse_aivdm(group)
            static_msg = ais_wire.parse_aivdm(static_group)
            wire_position = enu_from_latlon(pos_msg.latitude, pos_msg.longitude)
            static = AisStaticData(
                mmsi=static_msg.mmsi,
                ship_type=static_msg.ship_type,
                dim_to_bow=static_msg.dim_to_bow,
                dim_to_stern=static_msg.dim_to_stern,
                dim_to_port=static_msg.dim_to_port,
                dim_to_starboard=static_msg.dim_to_starboard,
            )
        else:
            wire_position = position
            static = None

        if kind == "ais":
            new_spoofs.append(
                GroundTruthObject(
                    id=spoof_id,
                    class_label=ClassLabel.TANKER,
                    position=wire_position,
                    length=claimed_length,
                    width=claimed_width,
                    carries_ais=True,
                    ais_static=static,
                    radar_reflective=False,
                    optically_visible=False,
                )
            )
        elif kind == "radar":
            extent = float(rng.uniform(2.0, 8.0))
            new_spoofs.append(
                GroundTruthObject(
                    id=spoof_id,
                    class_label=ClassLabel.RADAR_CONTACT,
                    position=position,
                    length=extent,
                    width=extent * 0.8,
                    carries_ais=False,
                    radar_reflective=True,
                    optically_visible=False,
                    radar_signature=RadarBlob(
                        centroid=position, extent_major=extent,
                        extent_minor=extent * 0.8,
                    ),
                )
            )
        else:  # both: tanker-sized AIS claim over a buoy-sized radar return
            extent = float(rng.uniform(2.0, 8.0))
            new_spoofs.append(
                GroundTruthObject(
                    id=spoof_id,
                    class_label=ClassLabel.TANKER,
                    position=wire_position,
                    length=claimed_length,
                    width=claimed_width,
                    carries_ais=True,
                    ais_static=static,
                    radar_reflective=True,
                    optically_visible=False,
                    radar_signature=RadarBlob(
                        centroid=wire_position, extent_major=extent,
                        extent_minor=extent * 0.8,
                    ),
                )
            )
    return replace(scenario, spoofed=scenario.spoofed + tuple(new_spoofs))
