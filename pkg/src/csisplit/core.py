"""Shared data model: complex CSI matrices, real-concatenated views, node
geometry and the binary/CSV file formats used to exchange datasets.

Conventions fixed here and relied on by every other module:

* a CSI matrix is complex valued with shape (m, n): m time snapshots down
  the rows, n nodes across the columns;
* the real view stacks real parts above imaginary parts, giving a
  (2m, n) float64 matrix ([Re; Im] column stacking);
* all arithmetic is float64 / complex128.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

CSI_MAGIC = b"CSI1"
_HEADER = struct.Struct("<4sIIBd")  # magic | u32 m | u32 n | u8 direction | f64 snr_db
#: refuse to allocate more complex entries than this when reading a file (1 GiB payload)
MAX_FILE_ENTRIES = 1 << 26


class Direction(enum.IntEnum):
    UPLINK = 0
    DOWNLINK = 1


class CsiFileError(ValueError):
    """Malformed CSI file."""


class BadMagicError(CsiFileError):
    """File does not start with the CSI1 magic."""


class TruncatedFileError(CsiFileError):
    """Header or payload shorter than the declared dimensions require."""


class DimensionOverflowError(CsiFileError):
    """Declared dimensions are zero or exceed the supported size."""


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class CsiMatrix:
    """Immutable m x n complex matrix of channel snapshots.

    ``snr_db`` records the simulated noise level when known (None for
    measured/ingested data).
    """

    data: np.ndarray
    direction: Direction = Direction.UPLINK
    snr_db: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"CSI data must be a 2-D m x n matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
            raise ValueError("CSI data contains non-finite entries")
        object.__setattr__(self, "data", _as_readonly(arr))
        object.__setattr__(self, "direction", Direction(self.direction))

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]


def to_real_view(csi: CsiMatrix) -> np.ndarray:
    """Real-concatenated view: rows 1..m are real parts, rows m+1..2m imaginary."""
    return np.vstack([csi.data.real, csi.data.imag])


def from_real_view(
    view: np.ndarray,
    direction: Direction = Direction.UPLINK,
    snr_db: float | None = None,
) -> CsiMatrix:
    """Inverse of :func:`to_real_view`; requires an even row count."""
    view = np.asarray(view, dtype=np.float64)
    if view.ndim != 2 or view.shape[0] % 2 != 0:
        raise ValueError(f"real view must be 2-D with an even row count, got {view.shape}")
    m = view.shape[0] // 2
    return CsiMatrix(view[:m] + 1j * view[m:], direction=direction, snr_db=snr_db)


def view_to_complex(view: np.ndarray) -> np.ndarray:
    """Real view (2m, n) -> bare complex array (m, n), no CsiMatrix wrapping."""
    view = np.asarray(view, dtype=np.float64)
    m = view.shape[0] // 2
    return view[:m] + 1j * view[m:]


@dataclass(frozen=True)
class NodeGeometry:
    """Node positions in R^2 or R^3 (meters) plus the neighbor rule defaults.

    Neighbor queries use Euclidean distance with ties broken by ascending
    node index, so results are reproducible across platforms.
    """

    positions: np.ndarray
    k: int = 8
    neighbor_radius: float | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3):
            raise ValueError(f"positions must be (n, 2) or (n, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite values")
        # pairwise distinct
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(d2, np.inf)
        if np.min(d2) <= 0.0:
            raise ValueError("node positions must be pairwise distinct")
        object.__setattr__(self, "positions", _as_readonly(pos))

    @property
    def n(self) -> int:
        return self.positions.shape[0]


def nearest_neighbors(geom: NodeGeometry, node: int, k: int) -> np.ndarray:
    """Indices of the k nodes closest to ``node`` (self excluded).

    Sorted by distance, ties by ascending index. Raises ValueError when
    k >= number of nodes.
    """
    n = geom.n
    if not 0 <= node < n:
        raise ValueError(f"node index {node} out of range [0, {n})")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n:
        raise ValueError(f"insufficient nodes: k={k} with only {n} nodes")
    delta = geom.positions - geom.positions[node]
    dist = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    dist[node] = np.inf
    order = np.argsort(dist, kind="stable")  # stable keeps index order on ties
    return order[:k].copy()


def neighbor_pairs(geom: NodeGeometry, k: int) -> list[tuple[int, int]]:
    """All ordered (node, neighbor) pairs under the k-nearest-neighbor rule."""
    return [(i, int(j)) for i in range(geom.n) for j in nearest_neighbors(geom, i, k)]


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_csi_file(csi: CsiMatrix, path) -> None:
    """Binary CSI format, little-endian.

    Layout: magic "CSI1" | u32 m | u32 n | u8 direction (0=UL, 1=DL)
    | f64 snr_db (NaN = absent) | m*n entries column-major, each f64 re
    then f64 im.
    """
    snr = math.nan if csi.snr_db is None else float(csi.snr_db)
    header = _HEADER.pack(CSI_MAGIC, csi.m, csi.n, int(csi.direction), snr)
    flat = csi.data.flatten(order="F")
    payload = np.empty(2 * flat.size, dtype="<f8")
    payload[0::2] = flat.real
    payload[1::2] = flat.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def read_csi_file(path) -> CsiMatrix:
    """Read the binary CSI format written by :func:`write_csi_file`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"truncated header: {len(raw)} bytes, need {_HEADER.size}")
    magic, m, n, direction, snr = _HEADER.unpack_from(raw)
    if magic != CSI_MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {CSI_MAGIC!r}")
    if m == 0 or n == 0 or m * n > MAX_FILE_ENTRIES:
        raise DimensionOverflowError(f"unsupported dimensions m={m}, n={n}")
    if direction not in (0, 1):
        raise CsiFileError(f"invalid direction byte {direction}")
    expected = _HEADER.size + 16 * m * n
    if len(raw) < expected:
        raise TruncatedFileError(f"truncated payload: {len(raw)} bytes, need {expected}")
    if len(raw) > expected:
        raise CsiFileError(f"trailing bytes: {len(raw) - expected} past end of payload")
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    data = (payload[0::2] + 1j * payload[1::2]).reshape((m, n), order="F")
    return CsiMatrix(data, direction=Direction(direction), snr_db=None if math.isnan(snr) else snr)


def read_csi_csv(path, direction: Direction = Direction.UPLINK, snr_db: float | None = None) -> CsiMatrix:
    """CSV import for measurement exports.

    Expected header ``re_1,im_1,re_2,im_2,...`` with one row per snapshot;
    column pair k holds node k's sample.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise CsiFileError("empty CSV file")
        cols = [c.strip() for c in header.split(",")]
        want = [f"{tag}_{i + 1}" for i in range(len(cols) // 2) for tag in ("re", "im")]
        if len(cols) % 2 != 0 or cols != want:
            raise CsiFileError(f"unexpected CSV header {header!r}; want re_1,im_1,...")
        body = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
    if body.shape[1] != len(cols):
        raise CsiFileError(f"row width {body.shape[1]} != header width {len(cols)}")
    return CsiMatrix(body[:, 0::2] + 1j * body[:, 1::2], direction=direction, snr_db=snr_db)


def write_csi_csv(csi: CsiMatrix, path) -> None:
    """Companion writer for :func:`read_csi_csv` (spreadsheet interoperability)."""
    header = ",".join(f"re_{k + 1},im_{k + 1}" for k in range(csi.n))
    body = np.empty((csi.m, 2 * csi.n))
    body[:, 0::2] = csi.data.real
    body[:, 1::2] = csi.data.imag
    np.savetxt(path, body, delimiter=",", header=header, comments="")
