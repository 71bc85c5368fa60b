"""Event-stream data model and synthetic stimulus generation.

Events mimic the output of a dynamic vision sensor: per-pixel luminance-change
events with microsecond timestamps. Stimuli are black shapes on a white
background, rendered frame by frame; a pixel emits one event each time its
accumulated luminance change since the last emitted event exceeds the contrast
threshold (ON for darkening, OFF for lightening). Large luminance swings
therefore produce short bursts of events, as a real sensor does when a
high-contrast edge crosses a pixel.

Recordings carry ground-truth label intervals (looming / not looming) that
tile the full duration and drive classification downstream.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

US_PER_S = 1_000_000

#: polarity codes: ON = darkening, OFF = lightening
POLARITY_ON = 1
POLARITY_OFF = 0

_MAGIC = 0x4556  # "EV"
_VERSION = 1
_HEADER = struct.Struct("<HHHHQ")  # magic, version, W, H, duration_us
_EVENT_DTYPE = np.dtype(
    {
        "names": ["t", "x", "y", "p"],
        "formats": ["<u8", "<u2", "<u2", "u1"],
        "offsets": [0, 8, 10, 12],
        "itemsize": 16,
    }
)
_LABEL = struct.Struct("<QQB")  # start_us, end_us, is_looming


class RecordingError(Exception):
    """Base class for event-recording failures."""


class RecordingParseError(RecordingError):
    """Malformed recording file; message names the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class RecordingValidationError(RecordingError):
    """Recording violates a structural invariant."""


class InvalidStimulusError(ValueError):
    """Stimulus specification cannot be rendered."""


@dataclass(frozen=True)
class DvsEvent:
    t_us: int
    x: int
    y: int
    polarity: int


@dataclass(frozen=True)
class LabelInterval:
    start_us: int
    end_us: int
    is_looming: bool

    def __post_init__(self) -> None:
        if self.start_us >= self.end_us:
            raise RecordingValidationError(
                f"label interval start {self.start_us} >= end {self.end_us}"
            )

    @property
    def length_us(self) -> int:
        return self.end_us - self.start_us


@dataclass
class EventRecording:
    """Time-sorted event stream plus label intervals covering [0, duration).

    Events are stored columnar (t_us, x, y, polarity arrays) for speed; use
    :meth:`events` to iterate as :class:`DvsEvent` values. Recordings are
    treated as immutable after construction.
    """

    width: int
    height: int
    duration_us: int
    t_us: np.ndarray
    x: np.ndarray
    y: np.ndarray
    polarity: np.ndarray
    labels: tuple[LabelInterval, ...]

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def num_events(self) -> int:
        return int(self.t_us.shape[0])

    def events(self) -> Iterator[DvsEvent]:
        for i in range(self.num_events):
            yield DvsEvent(
                int(self.t_us[i]), int(self.x[i]), int(self.y[i]), int(self.polarity[i])
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventRecording):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.duration_us == other.duration_us
            and self.labels == other.labels
            and np.array_equal(self.t_us, other.t_us)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.polarity, other.polarity)
        )


def make_recording(
    width: int,
    height: int,
    duration_us: int,
    t_us: Sequence[int],
    x: Sequence[int],
    y: Sequence[int],
    polarity: Sequence[int],
    labels: Sequence[LabelInterval],
) -> EventRecording:
    """Build a recording from event columns and validate it."""
    rec = EventRecording(
        width=int(width),
        height=int(height),
        duration_us=int(duration_us),
        t_us=np.asarray(t_us, dtype=np.int64),
        x=np.asarray(x, dtype=np.int32),
        y=np.asarray(y, dtype=np.int32),
        polarity=np.asarray(polarity, dtype=np.int8),
        labels=tuple(labels),
    )
    validate_recording(rec)
    return rec


def validate_recording(rec: EventRecording) -> None:
    """Check every EventRecording invariant; raise RecordingValidationError."""
    if rec.width <= 0 or rec.height <= 0:
        raise RecordingValidationError("resolution must be positive")
    if rec.duration_us <= 0:
        raise RecordingValidationError("duration must be positive")
    n = rec.num_events
    for name, col in (("x", rec.x), ("y", rec.y), ("polarity", rec.polarity)):
        if col.shape[0] != n:
            raise RecordingValidationError(f"column {name} length != event count")
    if n:
        if rec.t_us[0] < 0:
            raise RecordingValidationError("negative event timestamp")
        if np.any(np.diff(rec.t_us) < 0):
            raise RecordingValidationError("events not sorted by timestamp")
        if rec.t_us[-1] >= rec.duration_us:
            raise RecordingValidationError(
                f"event at t={int(rec.t_us[-1])} beyond duration {rec.duration_us}"
            )
        if np.any(rec.x < 0) or np.any(rec.x >= rec.width):
            raise RecordingValidationError("event x outside resolution")
        if np.any(rec.y < 0) or np.any(rec.y >= rec.height):
            raise RecordingValidationError("event y outside resolution")
        bad = ~np.isin(rec.polarity, (POLARITY_ON, POLARITY_OFF))
        if np.any(bad):
            raise RecordingValidationError("polarity must be 0 or 1")
    if not rec.labels:
        raise RecordingValidationError("recording has no label intervals")
    if rec.labels[0].start_us != 0:
        raise RecordingValidationError("first label interval must start at 0")
    for a, b in zip(rec.labels, rec.labels[1:]):
        if a.end_us != b.start_us:
            raise RecordingValidationError(
                f"label gap/overlap at {a.end_us} != {b.start_us}"
            )
    if rec.labels[-1].end_us != rec.duration_us:
        raise RecordingValidationError("label intervals must tile the full duration")


# ---------------------------------------------------------------------------
# Stimulus synthesis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StimulusSpec:
    """Black shape on white background.

    speed_px_s is the size growth rate (radius or half-side) for loom/recede
    and the lateral speed for translate. contrast_threshold is the luminance
    change fraction per emitted event; a full black/white swing emits
    floor(1/threshold) events. gap_fraction scales the static hold inserted
    before each loom/recede sweep, as a fraction of the sweep time.
    noise_rate_hz adds uniform per-pixel background events (propeller-style
    noise); it is off by default.
    """

    shape: str = "circle"  # circle | square
    trajectory: str = "loom"  # loom | recede | translate | composite
    speed_px_s: float = 24.0
    contrast_threshold: float = 0.125
    size_min_px: float = 2.0
    size_max_px: Optional[float] = None
    gap_fraction: float = 1.0
    noise_rate_hz: float = 0.0

    def __post_init__(self) -> None:
        if self.shape not in ("circle", "square"):
            raise InvalidStimulusError(f"unknown shape {self.shape!r}")
        if self.trajectory not in ("loom", "recede", "translate", "composite"):
            raise InvalidStimulusError(f"unknown trajectory {self.trajectory!r}")
        if self.speed_px_s <= 0:
            raise InvalidStimulusError("speed must be > 0")
        if not 0.0 < self.contrast_threshold < 1.0:
            raise InvalidStimulusError("contrast threshold must lie in (0, 1)")
        if self.size_min_px <= 0:
            raise InvalidStimulusError("size_min_px must be > 0")
        if self.gap_fraction < 0:
            raise InvalidStimulusError("gap_fraction must be >= 0")
        if self.noise_rate_hz < 0:
            raise InvalidStimulusError("noise_rate_hz must be >= 0")


@dataclass(frozen=True)
class _Phase:
    n_frames: int
    looming: bool
    # size and center-x as functions of the frame index within the phase
    size_fn: Callable[[int], float]
    cx_fn: Callable[[int], float]


def _max_size(width: int, height: int) -> float:
    return min(width, height) / 2.0 - 1.0


def _render(shape: str, cx: float, cy: float, size: float,
            xx: np.ndarray, yy: np.ndarray) -> np.ndarray:
    """Luminance image: white 1.0 background, black 0.0 shape."""
    if shape == "circle":
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= size * size
    else:
        mask = (np.abs(xx - cx) <= size) & (np.abs(yy - cy) <= size)
    img = np.ones(xx.shape)
    img[mask] = 0.0
    return img


def _loom_phases(spec: StimulusSpec, duration_us: int, frame_us: int,
                 size_max: float, shrink: bool) -> list[_Phase]:
    """Repeated [hold, sweep] cycles filling the duration.

    Growing sweeps are labeled looming; holds, resets and shrinking sweeps
    are not. The shape resets to its start size at the beginning of each hold.
    """
    sweep_s = (size_max - spec.size_min_px) / spec.speed_px_s
    sweep_frames = max(1, int(round(sweep_s * US_PER_S / frame_us)))
    gap_frames = max(1, int(round(sweep_frames * spec.gap_fraction)))
    total_frames = duration_us // frame_us
    lo, hi = spec.size_min_px, size_max
    start, end = (hi, lo) if shrink else (lo, hi)
    rate = (end - start) / sweep_frames

    phases: list[_Phase] = []
    done = 0
    while done < total_frames:
        g = min(gap_frames, total_frames - done)
        phases.append(_Phase(g, False, lambda k, s=start: s, lambda k: np.nan))
        done += g
        if done >= total_frames:
            break
        s = min(sweep_frames, total_frames - done)
        phases.append(
            _Phase(s, not shrink,
                   lambda k, s0=start, r=rate: s0 + r * (k + 1),
                   lambda k: np.nan)
        )
        done += s
    return phases


def _translate_phases(spec: StimulusSpec, duration_us: int, frame_us: int,
                      width: int, size: float) -> list[_Phase]:
    """Constant-size shape bouncing horizontally; never looming."""
    total_frames = duration_us // frame_us
    px_per_frame = spec.speed_px_s * frame_us / US_PER_S
    lo, hi = size + 1.0, width - size - 2.0
    span = max(hi - lo, 1.0)

    def cx(k: int) -> float:
        # triangle wave between lo and hi
        u = (k * px_per_frame) % (2 * span)
        return lo + (u if u <= span else 2 * span - u)

    return [_Phase(total_frames, False, lambda k, s=size: s, cx)]


def _composite_phases(spec: StimulusSpec, duration_us: int, frame_us: int,
                      width: int, size_max: float) -> list[_Phase]:
    """Translate right, half loom, full recession, full loom.

    Phase lengths are chosen so looming time equals non-looming time:
    fractions 0.2 / 0.3 / 0.3 / 0.2 of the duration.
    """
    total = duration_us // frame_us
    n_tr = int(round(total * 0.2))
    n_hl = int(round(total * 0.3))
    n_rc = int(round(total * 0.3))
    n_fl = total - n_tr - n_hl - n_rc
    lo = spec.size_min_px
    mid = (lo + size_max) / 2.0
    cx0 = width / 2.0

    def tr_cx(k: int) -> float:
        px_per_frame = spec.speed_px_s * frame_us / US_PER_S
        return min(cx0 + k * px_per_frame, width - lo - 2.0)

    return [
        _Phase(n_tr, False, lambda k: lo, tr_cx),
        _Phase(n_hl, True, lambda k: lo + (mid - lo) * (k + 1) / n_hl, lambda k: np.nan),
        _Phase(n_rc, False, lambda k: mid + (lo - mid) * (k + 1) / n_rc, lambda k: np.nan),
        _Phase(n_fl, True, lambda k: lo + (size_max - lo) * (k + 1) / n_fl, lambda k: np.nan),
    ]


def generate_stimulus(
    spec: StimulusSpec,
    resolution: tuple[int, int],
    duration_us: int,
    frame_us: int = 100,
    seed: Optional[int] = None,
) -> EventRecording:
    """Render the stimulus and difference it into a labeled event stream.

    Frames are rendered every `frame_us` microseconds (the simulation
    timestep by default). Events of one burst are spaced 1 us apart within
    their frame. `seed` only matters when noise injection is enabled.
    """
    width, height = resolution
    if duration_us <= 0:
        raise InvalidStimulusError("duration must be > 0")
    size_max = spec.size_max_px if spec.size_max_px is not None else _max_size(width, height)
    if size_max <= spec.size_min_px:
        raise InvalidStimulusError("size_max_px must exceed size_min_px")
    start_size = size_max if spec.trajectory == "recede" else spec.size_min_px
    if start_size > _max_size(width, height):
        raise InvalidStimulusError(
            f"shape size {start_size} px does not fit {width}x{height} at t=0"
        )

    if spec.trajectory in ("loom", "recede"):
        phases = _loom_phases(spec, duration_us, frame_us, size_max,
                              shrink=spec.trajectory == "recede")
    elif spec.trajectory == "translate":
        phases = _translate_phases(spec, duration_us, frame_us, width, spec.size_min_px)
    else:
        phases = _composite_phases(spec, duration_us, frame_us, width, size_max)

    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    cx0, cy0 = width / 2.0, height / 2.0
    theta = spec.contrast_threshold
    ref = np.ones((height, width))
    rng = np.random.default_rng(seed) if spec.noise_rate_hz > 0 else None
    noise_lam = spec.noise_rate_hz * width * height * frame_us / US_PER_S

    ts: list[np.ndarray] = []
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    ps: list[np.ndarray] = []
    labels: list[LabelInterval] = []
    t0 = 0
    for phase in phases:
        for k in range(phase.n_frames):
            t = t0 + k * frame_us
            cx = phase.cx_fn(k)
            img = _render(spec.shape, cx if np.isfinite(cx) else cx0, cy0,
                          phase.size_fn(k), xx, yy)
            diff = img - ref
            counts = np.floor(np.abs(diff) / theta).astype(np.int64)
            iy, ix = np.nonzero(counts)
            if iy.size:
                c = counts[iy, ix]
                sign = np.sign(diff[iy, ix])
                total = int(c.sum())
                rep = np.repeat(np.arange(iy.size), c)
                offs = np.arange(total) - np.repeat(np.cumsum(c) - c, c)
                ev_t = t + np.minimum(offs, frame_us - 1)
                order = np.argsort(ev_t, kind="stable")
                ts.append(ev_t[order])
                xs.append(ix[rep][order])
                ys.append(iy[rep][order])
                pol = np.where(sign < 0, POLARITY_ON, POLARITY_OFF)
                ps.append(pol[rep][order].astype(np.int8))
                ref[iy, ix] += sign * theta * c
            if rng is not None:
                n_noise = rng.poisson(noise_lam)
                if n_noise:
                    npix = rng.integers(0, width * height, n_noise)
                    nt = np.sort(t + rng.integers(0, frame_us, n_noise))
                    ts.append(nt)
                    xs.append((npix % width).astype(np.int64))
                    ys.append((npix // width).astype(np.int64))
                    ps.append(rng.integers(0, 2, n_noise).astype(np.int8))
        end = t0 + phase.n_frames * frame_us
        if labels and labels[-1].is_looming == phase.looming:
            prev = labels.pop()
            labels.append(LabelInterval(prev.start_us, end, phase.looming))
        else:
            labels.append(LabelInterval(t0, end, phase.looming))
        t0 = end
    if t0 < duration_us:  # duration not divisible by frame interval
        last = labels.pop()
        labels.append(LabelInterval(last.start_us, duration_us, last.is_looming))

    if ts:
        t_all = np.concatenate(ts)
        x_all = np.concatenate(xs)
        y_all = np.concatenate(ys)
        p_all = np.concatenate(ps)
        order = np.argsort(t_all, kind="stable")
        t_all, x_all, y_all, p_all = (
            t_all[order], x_all[order], y_all[order], p_all[order])
    else:
        t_all = x_all = y_all = np.empty(0, dtype=np.int64)
        p_all = np.empty(0, dtype=np.int8)
    return make_recording(width, height, duration_us,
                          t_all, x_all, y_all, p_all, labels)


def generate_composite(
    resolution: tuple[int, int],
    duration_us: int,
    frame_us: int = 100,
    seed: Optional[int] = None,
    contrast_threshold: float = 0.125,
) -> EventRecording:
    """Composite benchmark stimulus: translation, half loom, recession, loom.

    Total looming-labeled time equals non-looming time to within one frame.
    """
    spec = StimulusSpec(shape="circle", trajectory="composite",
                        speed_px_s=24.0, contrast_threshold=contrast_threshold)
    return generate_stimulus(spec, resolution, duration_us, frame_us, seed)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_recording(rec: EventRecording, destination: str | Path) -> None:
    """Write the binary recording container (bit-exact round trip)."""
    validate_recording(rec)
    arr = np.zeros(rec.num_events, dtype=_EVENT_DTYPE)
    arr["t"] = rec.t_us
    arr["x"] = rec.x
    arr["y"] = rec.y
    arr["p"] = rec.polarity
    with open(destination, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, rec.width, rec.height, rec.duration_us))
        fh.write(struct.pack("<Q", rec.num_events))
        fh.write(arr.tobytes())
        fh.write(struct.pack("<I", len(rec.labels)))
        for lab in rec.labels:
            fh.write(_LABEL.pack(lab.start_us, lab.end_us, int(lab.is_looming)))


def load_recording(source: str | Path) -> EventRecording:
    """Parse a recording container; validates the result."""
    blob = Path(source).read_bytes()
    off = 0
    if len(blob) < _HEADER.size:
        raise RecordingParseError("file shorter than header", len(blob))
    magic, version, width, height, duration = _HEADER.unpack_from(blob, off)
    if magic != _MAGIC:
        raise RecordingParseError(f"bad magic 0x{magic:04x}", 0)
    if version != _VERSION:
        raise RecordingParseError(f"unsupported version {version}", 2)
    off = _HEADER.size
    if len(blob) < off + 8:
        raise RecordingParseError("truncated event count", off)
    (n_events,) = struct.unpack_from("<Q", blob, off)
    off += 8
    ev_bytes = n_events * _EVENT_DTYPE.itemsize
    if len(blob) < off + ev_bytes:
        raise RecordingParseError(
            f"truncated event table ({n_events} events)", len(blob))
    arr = np.frombuffer(blob, dtype=_EVENT_DTYPE, count=n_events, offset=off)
    off += ev_bytes
    if len(blob) < off + 4:
        raise RecordingParseError("truncated label count", off)
    (n_labels,) = struct.unpack_from("<I", blob, off)
    off += 4
    labels = []
    for _ in range(n_labels):
        if len(blob) < off + _LABEL.size:
            raise RecordingParseError("truncated label table", off)
        start, end, loom = _LABEL.unpack_from(blob, off)
        try:
            labels.append(LabelInterval(start, end, bool(loom)))
        except RecordingValidationError as exc:
            raise RecordingParseError(str(exc), off) from exc
        off += _LABEL.size
    if off != len(blob):
        raise RecordingParseError("trailing bytes after label table", off)
    return make_recording(
        width, height, duration,
        arr["t"].astype(np.int64), arr["x"].astype(np.int32),
        arr["y"].astype(np.int32), arr["p"].astype(np.int8), labels)


def downsample(rec: EventRecording, factor: int) -> EventRecording:
    """Spatially downsample by an integer factor dividing both dimensions.

    Events mapping to the same (t, x, y, polarity) merge into one; the first
    occurrence keeps its position in the stream.
    """
    if factor <= 0:
        raise ValueError("factor must be a positive integer")
    if rec.width % factor or rec.height % factor:
        raise ValueError(
            f"factor {factor} does not divide resolution {rec.width}x{rec.height}")
    x = rec.x // factor
    y = rec.y // factor
    rows = np.empty(rec.num_events,
                    dtype=[("t", np.int64), ("x", np.int32), ("y", np.int32), ("p", np.int8)])
    rows["t"], rows["x"], rows["y"], rows["p"] = rec.t_us, x, y, rec.polarity
    _, first = np.unique(rows, return_index=True)
    keep = np.sort(first)
    return make_recording(
        rec.width // factor, rec.height // factor, rec.duration_us,
        rec.t_us[keep], x[keep], y[keep], rec.polarity[keep], rec.labels)
