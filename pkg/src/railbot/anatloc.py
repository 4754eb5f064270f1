"""Where-am-I-on-the-body localization from IMU data.

A calibration sweep drives the robot from the left wrist to the tailbone
while streaming the accelerometer at 15 Hz and counting hall detections.
Because the garment holds each stretch of track at a characteristic
orientation, gravity's direction in the body frame fingerprints the
anatomical region the robot is passing.  The pipeline turns each sample
into six features (median-filtered acceleration plus median-filtered
acceleration differentials), projects them onto the top two principal
components, and labels them by the nearest class centroid among six
locations: tailbone, upper back, turntable, shoulder, elbow, wrist.

Everything here is value-in/value-out; only `calibration_run` touches a
simulator, and it drives one it is handed.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .layout import TrackLayout
from .routing import ConnectorOverlay, Path, shortest_path
from .simcore import CALIBRATION_IMU_HZ, Simulator, TICK_S
from .simcore import RotorLocus, SegmentLocus, VertexLocus

MEDIAN_WIDTH = 5  # ~0.33 s at 15 Hz; wide enough to swallow single-sample spikes
DEFAULT_TRIALS = 5
SWEEP_START = "left_wrist"
SWEEP_END = "tailbone"

# Fixed order; doubles as the tie-break order for nearest-centroid draws.
LOCATION_LABELS = ("elbow", "shoulder", "tailbone", "turntable", "upper_back", "wrist")

_ANCHOR_CLASS = {
    "left_wrist": "wrist",
    "left_elbow": "elbow",
    "left_shoulder": "shoulder",
    "upper_back": "upper_back",
    "tailbone": "tailbone",
}

CSV_COLUMNS = ("t", "ax", "ay", "az", "gx", "gy", "gz", "label", "trial")


class BadWidthError(ValueError):
    """Median filter width is even, non-positive, or exceeds the series."""


class TooShortError(ValueError):
    """Series too short for the requested transform."""


class DegenerateDataError(ValueError):
    """Input has no variance (or is missing classes) so fitting is impossible."""


class UnfittedError(RuntimeError):
    """Classifier used before it holds a full set of centroids."""


# ----------------------------------------------------------------------
# signal transforms


def median_filter(series: Sequence[float], width: int = MEDIAN_WIDTH) -> list[float]:
    """Running median; the window stays centered and shrinks symmetrically
    near the edges, so every window has odd length and the filter never
    averages two samples.
    """
    if width < 1 or width % 2 == 0:
        raise BadWidthError(f"width must be a positive odd integer, got {width}")
    n = len(series)
    if n < width:
        raise BadWidthError(f"series of {n} is shorter than width {width}")
    reach = width // 2
    out = []
    for i in range(n):
        r = min(reach, i, n - 1 - i)
        out.append(statistics.median(series[i - r : i + r + 1]))
    return out


def differentials(series: Sequence[float], rate_hz: float = CALIBRATION_IMU_HZ) -> list[float]:
    """First differences scaled by the sample rate (g -> g/s for accel
    input).  Output is one shorter than the input.
    """
    if len(series) < 2:
        raise TooShortError(f"need at least 2 samples, got {len(series)}")
    return [(b - a) * rate_hz for a, b in zip(series, series[1:])]


def feature_rows(samples: Sequence, width: int = MEDIAN_WIDTH,
                 rate_hz: float = CALIBRATION_IMU_HZ) -> list[tuple[float, ...]]:
    """Per-sample 6-vectors: median-filtered accel and median-filtered
    accel differentials, for anything with a 3-tuple `accel` attribute.

    Differencing consumes the first sample, so row k (k = 1..n-1)
    describes sample k and the output has n-1 rows.
    """
    if len(samples) < width + 1:
        raise TooShortError(
            f"need at least {width + 1} samples for width-{width} features")
    axes = [[s.accel[i] for s in samples] for i in range(3)]
    med = [median_filter(a, width) for a in axes]
    dif = [median_filter(differentials(a, rate_hz), width) for a in axes]
    return [
        (med[0][k], med[1][k], med[2][k], dif[0][k - 1], dif[1][k - 1], dif[2][k - 1])
        for k in range(1, len(samples))
    ]


@dataclass(frozen=True)
class FeatureWindow:
    """A run of IMU samples plus the filter settings used to featurize it."""

    samples: tuple
    width: int = MEDIAN_WIDTH
    rate_hz: float = CALIBRATION_IMU_HZ

    def __post_init__(self):
        if self.width < 1 or self.width % 2 == 0:
            raise BadWidthError(f"width must be a positive odd integer, got {self.width}")
        if len(self.samples) < self.width + 1:
            raise TooShortError(
                f"window of {len(self.samples)} samples cannot carry "
                f"width-{self.width} features")

    @property
    def features(self) -> list[tuple[float, ...]]:
        return feature_rows(self.samples, self.width, self.rate_hz)


# ----------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    mean: tuple[float, ...]
    components: tuple[tuple[float, ...], tuple[float, ...]]
    explained_variance: tuple[float, float]


def pca_fit(rows: Sequence[Sequence[float]]) -> PcaModel:
    """Top-2 principal components of the mean-centered rows.

    `explained_variance` holds the matching sample-covariance eigenvalues,
    nonincreasing.  Sign convention: each component's largest-magnitude
    entry is positive, so refits land on the same orientation.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError(f"expected a 2D matrix with >=2 columns, got shape {x.shape}")
    if x.shape[0] < 3:
        raise TooShortError(f"need at least 3 rows, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise ValueError("non-finite feature values")
    mean = x.mean(axis=0)
    centered = x - mean
    spread = float(np.abs(centered).max())
    if spread <= 1e-12 * max(1.0, float(np.abs(x).max())):
        raise DegenerateDataError("all rows identical; covariance has rank 0")
    cov = (centered.T @ centered) / (x.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    comps = []
    for j in (-1, -2):
        v = eigvecs[:, j]
        if v[int(np.argmax(np.abs(v)))] < 0:
            v = -v
        comps.append(tuple(float(c) for c in v))
    variance = tuple(max(float(eigvals[j]), 0.0) for j in (-1, -2))
    return PcaModel(tuple(float(m) for m in mean), (comps[0], comps[1]), variance)


def project(model: PcaModel, row: Sequence[float]) -> tuple[float, float]:
    """Coordinates of one feature row in the model's 2D component space."""
    centered = [v - m for v, m in zip(row, model.mean)]
    return (
        sum(c * v for c, v in zip(model.components[0], centered)),
        sum(c * v for c, v in zip(model.components[1], centered)),
    )


# ----------------------------------------------------------------------
# nearest-centroid classification


@dataclass(frozen=True)
class LocationClassifier:
    """Per-label centroids in the 2D projected space."""

    centroids: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def fitted(self) -> bool:
        if set(self.centroids) != set(LOCATION_LABELS):
            return False
        return all(math.isfinite(c[0]) and math.isfinite(c[1])
                   for c in self.centroids.values())


def fit_classifier(points: Sequence[tuple[float, float]],
                   labels: Sequence[str]) -> LocationClassifier:
    """Mean projected point per location label."""
    if len(points) != len(labels):
        raise ValueError("points and labels differ in length")
    sums: dict[str, list[float]] = {}
    for (px, py), label in zip(points, labels):
        acc = sums.setdefault(label, [0.0, 0.0, 0])
        acc[0] += px
        acc[1] += py
        acc[2] += 1
    missing = [lab for lab in LOCATION_LABELS if lab not in sums]
    if missing:
        raise DegenerateDataError(f"no samples for {', '.join(missing)}")
    centroids = {
        lab: (sums[lab][0] / sums[lab][2], sums[lab][1] / sums[lab][2])
        for lab in LOCATION_LABELS
    }
    return LocationClassifier(centroids)


def classify_features(classifier: LocationClassifier, model: PcaModel,
                      features: Sequence[float]) -> str:
    """Label of the centroid nearest to one 6-vector, Euclidean in the
    projected space; ties go to the earlier label in LOCATION_LABELS.
    """
    if not classifier.fitted:
        raise UnfittedError("classifier lacks a full set of finite centroids")
    px, py = project(model, features)
    best, best_d = None, math.inf
    for label in LOCATION_LABELS:
        cx, cy = classifier.centroids[label]
        d = (px - cx) ** 2 + (py - cy) ** 2
        if d < best_d:
            best, best_d = label, d
    return best


def classify(classifier: LocationClassifier, model: PcaModel,
             window: FeatureWindow) -> str:
    """One label for a whole window: per-sample votes, majority wins,
    ties broken by LOCATION_LABELS order.
    """
    votes: dict[str, int] = {}
    for row in window.features:
        label = classify_features(classifier, model, row)
        votes[label] = votes.get(label, 0) + 1
    top = max(votes.values())
    return next(lab for lab in LOCATION_LABELS if votes.get(lab) == top)


# ----------------------------------------------------------------------
# calibration sweep


@dataclass(frozen=True)
class SweepRow:
    t: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]
    label: str


@dataclass(frozen=True)
class CalibrationSweep:
    trial: int
    rows: tuple[SweepRow, ...]
    magnet_count: int


def sweep_route(layout: TrackLayout,
                detached: Iterable[int] = ()) -> Path:
    """Shortest wrist-to-tailbone path; the sweep covers all six class
    regions on the default garment.
    """
    by_label = {v.label: v.id for v in layout.vertices.values()}
    for name in (SWEEP_START, SWEEP_END):
        if name not in by_label:
            raise KeyError(f"layout has no vertex labelled {name!r}")
    overlay = ConnectorOverlay(frozenset(detached))
    return shortest_path(layout, overlay, by_label[SWEEP_START], by_label[SWEEP_END])


def _region_label(sim: Simulator) -> str:
    """Ground-truth region for the robot's current position.  Parked at a
    class anchor (or anywhere on the rotor) yields the class label; in
    transit the nearest vertex names the region, prefixed with `near_`
    when that would shadow a class label.  Restricting classes to settled
    positions keeps the labels honest: mid-hop the robot is between
    regions, not at one.
    """
    locus = sim.locus
    if isinstance(locus, RotorLocus):
        return "turntable"
    if isinstance(locus, VertexLocus):
        label = sim.layout.vertices[locus.vertex].label
        if label in _ANCHOR_CLASS:
            return _ANCHOR_CLASS[label]
        if label in LOCATION_LABELS:  # custom layouts: never shadow a class
            return f"near_{label}"
        return label
    if isinstance(locus, SegmentLocus):
        seg = sim.layout.segments[locus.segment]
        a, b = seg.endpoints
        da = locus.s_mm
        vertex = a if da <= seg.length_mm - da else b
        label = sim.layout.vertices[vertex].label
        if label in _ANCHOR_CLASS:
            return f"near_{_ANCHOR_CLASS[label]}"
        if label in LOCATION_LABELS:
            return f"near_{label}"
        return label
    raise ValueError("robot has no position; place it before sweeping")


def _demote_unsettled(labelled: list[tuple[SweepRow, bool]],
                      width: int) -> list[SweepRow]:
    """Downgrade a class label to its transit form whenever the filter
    window around the sample straddles commanded motion, a region
    change, or the edge of the recording.  The ground truth knows the
    command timeline, and a windowed filter needs a full window to flush
    a transient, so only samples the instrument can actually resolve
    keep a class label.
    """
    guard = width // 2 + 1  # +1: differencing shifts the window by one
    out = []
    for i, (row, busy) in enumerate(labelled):
        label = row.label
        if label in LOCATION_LABELS:
            edge = i < guard or i >= len(labelled) - guard
            lo = max(0, i - guard)
            hi = min(len(labelled), i + guard + 1)
            if edge or any(b or r.label != label
                           for r, b in labelled[lo:hi]):
                label = f"near_{row.label}"
        out.append(row if label == row.label else
                   SweepRow(row.t, row.accel, row.gyro, label))
    return out


def calibration_run(sim: Simulator, trial: int = 0, dwell_s: float = 0.8,
                    dock_dwell_s: float = 1.0,
                    width: int = MEDIAN_WIDTH) -> CalibrationSweep:
    """Drive one wrist-to-tailbone sweep, labelling every 15 Hz sample with
    the region the robot was in and counting hall detections along the way.

    The robot pauses at each class anchor (and while docked on the rotor)
    long enough for the median filter to settle, so every location
    contributes cleanly resolvable samples.
    """
    path = sweep_route(sim.layout, sim.detached_connectors)
    labelled: list[tuple[SweepRow, bool]] = []
    halls = 0

    def tick() -> None:
        nonlocal halls
        events = sim.step(TICK_S)
        halls += sum(1 for e in events if e.kind == "HallDetect")
        label = _region_label(sim)
        busy = sim.busy
        for s in sim.drain_imu():
            labelled.append((SweepRow(s.t, s.accel, s.gyro, label), busy))

    def settle(duration_s: float) -> None:
        end = sim.time_s + duration_s
        while sim.time_s < end - 1e-9:
            tick()

    def finish_motion() -> None:
        while sim.busy:
            tick()

    sim.place_at_vertex(path.vertices[0])
    sim.drain_events()
    sim.drain_imu()
    sim.set_imu_stream(CALIBRATION_IMU_HZ, True)
    settle(dwell_s)

    for target, segment in zip(path.vertices[1:], path.segments):
        if segment is None:
            tt = sim.layout.turntable_of_port(target)
            port = tt.port_vertices.index(target)
            sim.rotate_turntable(port)
            finish_motion()
            settle(dock_dwell_s)
        sim.move_to(target)
        finish_motion()
        label = sim.layout.vertices[target].label
        if label in _ANCHOR_CLASS:
            settle(dwell_s)

    sim.set_imu_stream(CALIBRATION_IMU_HZ, False)
    return CalibrationSweep(trial, tuple(_demote_unsettled(labelled, width)), halls)


def collect_trials(layout: TrackLayout, trials: int = DEFAULT_TRIALS,
                   seed: int = 0, imu_noise_g: float | None = None,
                   cloth_sway_mm: float = 0.0) -> list[CalibrationSweep]:
    """Independent sweeps; each trial reseeds the simulator so noise and
    sway draws differ while the track and drive are identical.
    """
    sweeps = []
    for i in range(trials):
        kwargs = {} if imu_noise_g is None else {"imu_noise_g": imu_noise_g}
        sim = Simulator(layout, seed=seed + i, cloth_sway_mm=cloth_sway_mm, **kwargs)
        sweeps.append(calibration_run(sim, trial=i))
    return sweeps


# ----------------------------------------------------------------------
# dataset files and end-to-end fitting


def write_csv(path, sweeps: Iterable[CalibrationSweep]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for sweep in sweeps:
            for r in sweep.rows:
                writer.writerow([r.t, *r.accel, *r.gyro, r.label, sweep.trial])


def read_csv(path) -> dict[int, list[SweepRow]]:
    """Rows grouped by trial, in file order."""
    dataset: dict[int, list[SweepRow]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_COLUMNS:
            raise ValueError(f"expected columns {','.join(CSV_COLUMNS)}")
        for rec in reader:
            t, ax, ay, az, gx, gy, gz, label, trial = rec
            dataset.setdefault(int(trial), []).append(SweepRow(
                float(t), (float(ax), float(ay), float(az)),
                (float(gx), float(gy), float(gz)), label))
    return dataset


def to_dataset(sweeps: Iterable[CalibrationSweep]) -> dict[int, list[SweepRow]]:
    return {s.trial: list(s.rows) for s in sweeps}


def dataset_features(dataset: Mapping[int, Sequence[SweepRow]],
                     width: int = MEDIAN_WIDTH,
                     rate_hz: float = CALIBRATION_IMU_HZ,
                     ) -> tuple[list[tuple[float, ...]], list[str], list[int]]:
    """Aligned (features, labels, trials) across the whole dataset.
    Filtering never crosses a trial boundary.
    """
    feats: list[tuple[float, ...]] = []
    labels: list[str] = []
    trials: list[int] = []
    for trial in sorted(dataset):
        samples = sorted(dataset[trial], key=lambda r: r.t)
        rows = feature_rows(samples, width, rate_hz)
        feats.extend(rows)
        labels.extend(s.label for s in samples[1:])
        trials.extend([trial] * len(rows))
    return feats, labels, trials


def fit(dataset: Mapping[int, Sequence[SweepRow]], width: int = MEDIAN_WIDTH,
        rate_hz: float = CALIBRATION_IMU_HZ, exclude_trial: int | None = None,
        ) -> tuple[PcaModel, LocationClassifier]:
    """PCA + centroids from every class-labelled sample, optionally holding
    one trial out.
    """
    feats, labels, trials = dataset_features(dataset, width, rate_hz)
    kept = [(f, lab) for f, lab, tr in zip(feats, labels, trials)
            if lab in LOCATION_LABELS and tr != exclude_trial]
    if not kept:
        raise DegenerateDataError("no class-labelled samples to fit")
    model = pca_fit([f for f, _ in kept])
    points = [project(model, f) for f, _ in kept]
    classifier = fit_classifier(points, [lab for _, lab in kept])
    return model, classifier


def evaluate_holdout(dataset: Mapping[int, Sequence[SweepRow]], holdout: int,
                     width: int = MEDIAN_WIDTH, rate_hz: float = CALIBRATION_IMU_HZ,
                     ) -> tuple[float, dict[tuple[str, str], int]]:
    """Fit on all trials but one, classify that trial's class-labelled
    samples.  Returns (accuracy, confusion counts keyed (truth, predicted)).
    """
    if holdout not in dataset:
        raise ValueError(f"dataset has no trial {holdout}")
    model, classifier = fit(dataset, width, rate_hz, exclude_trial=holdout)
    feats, labels, trials = dataset_features(dataset, width, rate_hz)
    confusion: dict[tuple[str, str], int] = {}
    correct = total = 0
    for f, truth, tr in zip(feats, labels, trials):
        if tr != holdout or truth not in LOCATION_LABELS:
            continue
        predicted = classify_features(classifier, model, f)
        confusion[(truth, predicted)] = confusion.get((truth, predicted), 0) + 1
        total += 1
        if predicted == truth:
            correct += 1
    if total == 0:
        raise DegenerateDataError(f"trial {holdout} has no class-labelled samples")
    return correct / total, confusion
