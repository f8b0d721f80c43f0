"""Built-in oracle checks behind ``dfcr validate --self-test``.

Each check validates a core operation against an independent reference
computation (byte loops, finite differences, exhaustive enumeration). These
are quick smoke oracles; the full property suites live in the test tree.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import ais_wire
from .attacks import nondominated_sort
from .detectors import ToyDetectorParams, make_raster, toy_optical_forward, toy_optical_gradient
from .geometry import Homography, estimate_homography, project_xy
from .metrics import compute_metrics, wilcoxon_signed_rank
from .scoring import DeltaConfig, adjust_confidence


def _check_armoring() -> bool:
    for v in range(64):
        if ais_wire.decode_armoring(ais_wire.encode_armoring(v)) != v:
            return False
    return True


def _check_checksum() -> bool:
    group = ais_wire.synthesize_spoof(msg_type=1, mmsi=123456789,
                                      latitude=50.1, longitude=-4.2)
    body = group[0].body
    acc = 0
    for byte in body.encode("ascii"):
        acc ^= byte
    return f"{acc:02X}" == ais_wire.checksum(body)


def _check_ais_roundtrip() -> bool:
    rng = np.random.default_rng(42)
    for _ in range(50):
        mmsi = int(rng.integers(0, 10**9))
        lat = float(rng.uniform(-89.9, 89.9))
        lon = float(rng.uniform(-179.9, 179.9))
        msg = ais_wire.parse_aivdm(
            ais_wire.synthesize_spoof(msg_type=1, mmsi=mmsi, latitude=lat, longitude=lon)
        )
        if msg.mmsi != mmsi:
            return False
        if abs(msg.latitude - lat) > 1.0 / 600_000.0:
            return False
        if abs(msg.longitude - lon) > 1.0 / 600_000.0:
            return False
    return True


def _check_homography() -> bool:
    h_true = Homography(np.array([[1.2, 0.1, 5.0], [-0.05, 0.9, 3.0], [1e-4, -2e-4, 1.0]]))
    src = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0), (4.0, 7.0)]
    pairs = [(p, project_xy(h_true, p)) for p in src]
    est, rms = estimate_homography(pairs)
    if rms > 1e-6:
        return False
    p = (3.3, 8.8)
    q = project_xy(est, p)
    back = project_xy(est.inverse(), q)
    return math.hypot(back[0] - p[0], back[1] - p[1]) < 1e-9


def _check_gradient() -> bool:
    rng = np.random.default_rng(7)
    params = ToyDetectorParams(window=(4, 4), weights=rng.normal(0, 0.2, 16), bias=-0.3)
    image = make_raster(rng.uniform(60, 200, size=(8, 8)))
    grad = toy_optical_gradient(image, params, (1, 1))
    h = 1e-4
    for _ in range(20):
        y, x = int(rng.integers(4, 8)), int(rng.integers(4, 8))
        up = image.copy()
        up.data[y, x] += h
        dn = image.copy()
        dn.data[y, x] -= h
        fd = (toy_optical_forward(up, params)[1, 1] - toy_optical_forward(dn, params)[1, 1]) / (2 * h)
        if abs(fd - grad[y, x]) > 1e-5 * max(abs(fd), 1e-9):
            return False
    return True


def _check_confidence_adjustment() -> bool:
    deltas = DeltaConfig(delta=(0.4, 0.3, 0.3))
    for initial in np.arange(0.0, 1.01, 0.1):
        for indicators in itertools.product((-1, 0, 1), repeat=3):
            # Independent transcription of the sequential clamped update.
            c = float(initial)
            for k in range(3):
                c = c + deltas.delta[k] * indicators[k]
                c = min(max(c, 0.0), 1.0)
            trace = adjust_confidence(float(initial), indicators, deltas)
            if trace.final != c:
                return False
    return True


def _check_wilcoxon() -> bool:
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(4, 11))
        a = rng.normal(0.4, 1.0, n)
        b = rng.normal(0.0, 1.0, n)
        d = a - b
        d = d[d != 0]
        result = wilcoxon_signed_rank(a, b)
        # Brute-force enumeration over all sign assignments.
        abs_d = np.abs(d)
        order = np.argsort(abs_d, kind="stable")
        ranks = np.empty(len(d))
        sorted_abs = abs_d[order]
        i = 0
        while i < len(d):
            j = i
            while j + 1 < len(d) and sorted_abs[j + 1] == sorted_abs[i]:
                j += 1
            ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
            i = j + 1
        w_obs = ranks[d > 0].sum()
        le = ge = 0
        for signs in itertools.product((0, 1), repeat=len(d)):
            w = sum(r for r, s in zip(ranks, signs) if s)
            le += w <= w_obs
            ge += w >= w_obs
        p = min(1.0, 2.0 * min(le, ge) / 2 ** len(d))
        if abs(p - result.p_value) > 1e-12:
            return False
    return True


def _check_nondominance() -> bool:
    rng = np.random.default_rng(11)
    pts = rng.uniform(0, 1, size=(20, 2))
    fronts = nondominated_sort(pts)
    rank = {}
    for level, front in enumerate(fronts):
        for i in front:
            rank[i] = level

    def dominates(i: int, j: int) -> bool:
        return bool(np.all(pts[i] >= pts[j]) and np.any(pts[i] > pts[j]))

    for i in range(20):
        expected = 0
        changed = True
        # Peel fronts by repeated scanning (independent of the sort under test).
        remaining = set(range(20))
        level = 0
        while remaining:
            current = {a for a in remaining if not any(dominates(b, a) for b in remaining if b != a)}
            if i in current:
                expected = level
                break
            remaining -= current
            level += 1
        if rank[i] != expected:
            return False
    return True


def _check_metrics() -> bool:
    rng = np.random.default_rng(5)
    p = rng.uniform(0, 1, 100)
    t = rng.integers(0, 2, 100).astype(float)
    m = compute_metrics(p, t)
    d = sorted(abs(a - b) for a, b in zip(t, p))
    mse = sum(x * x for x in d) / len(d)
    mae = sum(d) / len(d)
    return abs(m.mse - mse) < 1e-12 and abs(m.mae - mae) < 1e-12 and abs(m.rmse - math.sqrt(mse)) < 1e-12


CHECKS = [
    ("armoring-roundtrip", _check_armoring),
    ("nmea-checksum-xor", _check_checksum),
    ("ais-encode-decode", _check_ais_roundtrip),
    ("homography-dlt", _check_homography),
    ("gradient-finite-difference", _check_gradient),
    ("confidence-adjustment", _check_confidence_adjustment),
    ("wilcoxon-enumeration", _check_wilcoxon),
    ("nondominated-sort", _check_nondominance),
    ("metrics-reference", _check_metrics),
]


def run_self_test(verbose: bool = True) -> int:
    failures = 0
    for name, check in CHECKS:
        ok = False
        try:
            ok = check()
        except Exception as exc:  # noqa: BLE001 - report, don't crash the suite
            if verbose:
                print(f"FAIL {name}: {exc}")
            failures += 1
            continue
        if ok:
            if verbose:
                print(f"ok   {name}")
        else:
            if verbose:
                print(f"FAIL {name}")
            failures += 1
    return 0 if failures == 0 else 1
