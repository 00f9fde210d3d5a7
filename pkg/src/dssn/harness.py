"""Dataset-level certification runs, certificate CSVs, and the runtime benchmark."""
from __future__ import annotations

import csv
import io
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .certify import (
    DEFAULT_ALPHA,
    DEFAULT_N,
    DEFAULT_N0,
    Certificate,
    certify_exact,
    certify_randomized,
    smooth_exact_dssn,
)
from .data import Dataset
from .noise import NoiseKind, NoiseModel, SplitSpec, lambda_to_sigma

__all__ = [
    "METHODS",
    "CertRow",
    "certify_point",
    "run_certify",
    "format_certificates",
    "read_certificates",
    "bench",
    "dssn_scaling",
]

METHODS = ("dssn", "ssn-mc", "uniform-mc")
CSV_FIELDS = ["index", "label", "predicted", "correct", "radius", "radius_num", "radius_den",
              "abstained", "eval_count"]


@dataclass(frozen=True)
class CertRow:
    index: int
    label: int
    predicted: int
    radius: Fraction | float | None
    abstained: bool
    eval_count: int
    wall_time: float | None = None

    @property
    def correct(self) -> bool:
        return self.predicted == self.label and not self.abstained

    def certified_at(self, rho) -> bool:
        if not self.correct or self.radius is None:
            return False
        if isinstance(self.radius, Fraction):
            return self.radius >= Fraction(rho)
        return self.radius >= float(rho)


def method_noise(model, method: str, lam: float | None = None) -> NoiseModel:
    """Noise distribution ``method`` certifies under, using the model's stored spec."""
    spec: SplitSpec = model.noise.spec
    if method == "dssn":
        return NoiseModel(NoiseKind.DSSN, spec)
    if method == "ssn-mc":
        return NoiseModel(NoiseKind.INDEPENDENT_SSN, spec)
    if method == "uniform-mc":
        if lam is None:
            lam = float(model.noise.lam)
        return NoiseModel(NoiseKind.UNIFORM_ADDITIVE, spec, float(lam))
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def certify_point(model, ds: Dataset, i: int, method: str, n0: int = DEFAULT_N0, n: int = DEFAULT_N,
                  alpha: float = DEFAULT_ALPHA, seed: int = 0, gap: str = "multiclass",
                  lam: float | None = None) -> tuple[Certificate, float]:
    x = ds.point(i)
    noise = method_noise(model, method, lam)
    t0 = time.perf_counter()
    if method == "dssn":
        cert = certify_exact(smooth_exact_dssn(model, x, noise.spec), noise.spec.q, gap=gap)
    else:
        # one stream per sample so results do not depend on scheduling
        rng = np.random.default_rng([seed, i])
        cert = certify_randomized(model, x, noise, n0=n0, n=n, alpha=alpha, rng=rng)
    return cert, time.perf_counter() - t0


def run_certify(ds: Dataset, model, method: str, n0: int = DEFAULT_N0, n: int = DEFAULT_N,
                alpha: float = DEFAULT_ALPHA, seed: int = 0, threads: int = 1,
                gap: str = "multiclass", lam: float | None = None) -> list[CertRow]:
    spec = model.noise.spec
    if ds.d != spec.d or ds.q != spec.q:
        raise ValueError(f"dataset has (d, q)=({ds.d}, {ds.q}), model has ({spec.d}, {spec.q})")
    if ds.num_classes > model.num_classes:
        raise ValueError(f"dataset has {ds.num_classes} classes, model only {model.num_classes}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")

    def one(i):
        cert, dt = certify_point(model, ds, i, method, n0, n, alpha, seed, gap, lam)
        return CertRow(i, int(ds.labels[i]), cert.predicted_class, cert.radius, cert.abstained,
                       cert.eval_count, dt)

    if threads <= 1:
        return [one(i) for i in range(len(ds))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(ds))))


def _radius_fields(r) -> tuple[str, str, str]:
    if r is None:
        return "", "", ""
    if isinstance(r, Fraction):
        return f"{float(r):.6f}", str(r.numerator), str(r.denominator)
    return repr(float(r)), "", ""


def format_certificates(rows: list[CertRow], header: dict | None = None, timing: bool = False) -> str:
    """Certificate CSV; ``header`` entries become leading ``# key=value`` lines."""
    buf = io.StringIO()
    for key, value in (header or {}).items():
        buf.write(f"# {key}={value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS + (["wall_time"] if timing else []))
    for r in sorted(rows, key=lambda r: r.index):
        dec, num, den = _radius_fields(r.radius)
        rec = [r.index, r.label, r.predicted, int(r.correct), dec, num, den, int(r.abstained), r.eval_count]
        if timing:
            rec.append(f"{r.wall_time:.6f}")
        w.writerow(rec)
    return buf.getvalue()


def read_certificates(text: str) -> tuple[dict, list[CertRow]]:
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            header[key] = value
        elif line.strip():
            body.append(line)
    if not body:
        raise ValueError("certificate file has no header row")
    reader = csv.DictReader(body)
    missing = set(CSV_FIELDS) - set(reader.fieldnames or [])
    if missing:
        raise ValueError(f"certificate file lacks columns {sorted(missing)}")
    rows = []
    for k, rec in enumerate(reader, start=2):
        try:
            if rec["abstained"] == "1":
                radius = None
            elif rec["radius_num"]:
                radius = Fraction(int(rec["radius_num"]), int(rec["radius_den"]))
            else:
                radius = float(rec["radius"])
            wall = float(rec["wall_time"]) if rec.get("wall_time") else None
            rows.append(CertRow(int(rec["index"]), int(rec["label"]), int(rec["predicted"]), radius,
                                rec["abstained"] == "1", int(rec["eval_count"]), wall))
        except (TypeError, ValueError) as err:
            raise ValueError(f"row {k}: {err}") from None
    return header, rows


def audit_header(model, method: str, **extra) -> dict:
    spec = model.noise.spec
    lam = model.noise.lam
    head = {
        "method": method,
        "q": spec.q,
        "L": spec.L,
        "lambda": str(lam),
        "sigma": repr(lambda_to_sigma(float(lam))),
        "generator_id": spec.generator_id,
        "offset_seed": spec.seed,
    }
    head.update(extra)
    return head


# --- benchmark -------------------------------------------------------------------


def bench(model, ds: Dataset, methods=("dssn", "uniform-mc"), n0: int = DEFAULT_N0, n: int = DEFAULT_N,
          repetitions: int = 3, alpha: float = DEFAULT_ALPHA, seed: int = 0) -> dict:
    """Per-image certification time for each method.

    Each image is certified ``repetitions`` times per method; the report keeps
    the median per-image time. The evaluation-count ratio between the Monte
    Carlo and exact paths must come out as exactly ``(n0 + n) / L``.
    """
    L = model.noise.spec.L
    report = {"images": len(ds), "repetitions": repetitions, "L": L, "n0": n0, "n": n, "methods": {}}
    for method in methods:
        times, evals = [], set()
        for i in range(len(ds)):
            per = []
            for _ in range(repetitions):
                cert, dt = certify_point(model, ds, i, method, n0, n, alpha, seed)
                per.append(dt)
                evals.add(cert.eval_count)
            times.append(statistics.median(per))
        if len(evals) != 1:
            raise AssertionError(f"{method}: eval count varies across images: {sorted(evals)}")
        report["methods"][method] = {
            "median_seconds_per_image": statistics.median(times),
            "mean_seconds_per_image": statistics.fmean(times),
            "evals_per_image": evals.pop(),
        }
    m = report["methods"]
    if "dssn" in m:
        if m["dssn"]["evals_per_image"] != L:
            raise AssertionError("exact path did not evaluate the base classifier L times")
        for other in ("ssn-mc", "uniform-mc"):
            if other in m:
                ratio = Fraction(m[other]["evals_per_image"], m["dssn"]["evals_per_image"])
                if ratio != Fraction(n0 + n, L):
                    raise AssertionError(f"eval ratio {ratio} != (n0 + n)/L")
                m[other]["eval_ratio_vs_dssn"] = str(ratio)
                m[other]["eval_ratio_vs_dssn_float"] = float(ratio)
                m[other]["time_ratio_vs_dssn"] = (m[other]["median_seconds_per_image"]
                                                  / m["dssn"]["median_seconds_per_image"])
    return report


def dssn_scaling(model, ds: Dataset, Ls=(64, 128, 256), repetitions: int = 5) -> dict:
    """Exact-path time per image as ``L`` varies, with a least-squares slope."""
    base = model.noise.spec
    out = {}
    for L in Ls:
        spec = SplitSpec.generate(base.q, L, base.d, seed=base.seed, generator_id=base.generator_id)
        times = []
        for i in range(len(ds)):
            per = []
            for _ in range(repetitions):
                t0 = time.perf_counter()
                smooth_exact_dssn(model, ds.point(i), spec)
                per.append(time.perf_counter() - t0)
            times.append(statistics.median(per))
        out[L] = statistics.median(times)
    slope, intercept = np.polyfit(list(out), list(out.values()), 1)
    return {"seconds_per_image": {str(k): v for k, v in out.items()},
            "slope_seconds_per_eval": float(slope), "intercept_seconds": float(intercept)}


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
