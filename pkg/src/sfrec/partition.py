"""Overlapping subdomain extraction, padding and circular convolution.

Patch extraction treats its input array as a (possibly padded) periodic
domain: with stride 1 and circular boundaries every node starts one
subdomain, so the number of patches equals the node count.  Reassembly
averages the overlapping patch values per node, normalizing by how many
subdomains cover it.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import CoverageError, ParameterError
from .grids import Grid


@dataclass(frozen=True)
class PartitionScheme:
    """Subdomain geometry attached to a grid.

    ``subdomain_shape`` gives nodes per axis of one subdomain,
    ``pad_per_side`` the zero-padding width per axis on each side, and
    ``stride``/``circular`` control how patch start positions are placed.
    """

    grid: Grid
    subdomain_shape: tuple[int, ...]
    pad_per_side: tuple[int, ...]
    stride: int = 1
    circular: bool = True

    def __post_init__(self):
        if len(self.subdomain_shape) != self.grid.ndim:
            raise ParameterError("subdomain shape must match grid dimensionality")
        if any(n < 1 for n in self.subdomain_shape):
            raise ParameterError("subdomain shape entries must be >= 1")
        if len(self.pad_per_side) != self.grid.ndim or any(p < 0 for p in self.pad_per_side):
            raise ParameterError("pad widths must be non-negative, one per axis")
        if self.stride < 1:
            raise ParameterError("stride must be >= 1")

    @property
    def padded_shape(self) -> tuple[int, ...]:
        return tuple(n + 2 * p for n, p in zip(self.grid.shape, self.pad_per_side))

    @property
    def padded_size(self) -> int:
        return int(np.prod(self.padded_shape))

    @property
    def subdomain_size(self) -> int:
        return int(np.prod(self.subdomain_shape))

    def n_subdomains(self, domain_shape: tuple[int, ...] | None = None) -> int:
        """Number of patches extracted from a domain (default: the padded grid)."""
        shape = self.padded_shape if domain_shape is None else domain_shape
        return int(np.prod([len(r) for r in self._starts(shape)]))

    def _starts(self, domain_shape: tuple[int, ...]) -> list[np.ndarray]:
        if self.circular:
            return [np.arange(0, n, self.stride) for n in domain_shape]
        return [np.arange(0, n - s + 1, self.stride)
                for n, s in zip(domain_shape, self.subdomain_shape)]


def wavelength_partition(grid: Grid, pad_per_side: tuple[int, ...] | None = None,
                         stride: int = 1, circular: bool = True) -> PartitionScheme:
    """Canonical scheme: subdomains one wavelength wide per axis.

    Subdomain nodes per axis are ``floor(wavelength / spacing) + 1``; padding
    defaults to one subdomain width minus one node on each side, which keeps
    wrap-around artifacts of circular operations out of the interior.
    """
    sub = tuple(int(np.floor(grid.wavelength / grid.spacing)) + 1 for _ in grid.shape)
    sub = tuple(min(s, n) for s, n in zip(sub, grid.shape))
    if pad_per_side is None:
        pad_per_side = tuple(s - 1 for s in sub)
    return PartitionScheme(grid=grid, subdomain_shape=sub,
                           pad_per_side=tuple(pad_per_side), stride=stride,
                           circular=circular)


def padded_grid(scheme: PartitionScheme) -> Grid:
    """Grid covering the zero-padded domain; interior nodes keep their positions."""
    g = scheme.grid
    origin = list(g.origin)
    for axis, p in enumerate(scheme.pad_per_side):
        origin[axis] -= p * g.spacing
    return Grid(shape=scheme.padded_shape, spacing=g.spacing,
                origin=tuple(origin), wavelength=g.wavelength)


def _as_domain(values: np.ndarray, scheme: PartitionScheme) -> np.ndarray:
    """Reshape flat input to the grid or padded-grid shape it matches."""
    arr = np.asarray(values)
    if arr.ndim == scheme.grid.ndim and scheme.grid.ndim > 1:
        return arr
    flat = arr.reshape(-1)
    if flat.size == scheme.grid.size:
        return flat.reshape(scheme.grid.shape)
    if flat.size == scheme.padded_size:
        return flat.reshape(scheme.padded_shape)
    raise ParameterError(
        f"array of size {flat.size} matches neither grid {scheme.grid.shape} "
        f"nor padded domain {scheme.padded_shape}")


def zero_pad(values, scheme: PartitionScheme) -> np.ndarray:
    """Embed grid values in the padded domain, zeros outside the interior."""
    arr = np.asarray(values).reshape(scheme.grid.shape)
    out = np.zeros(scheme.padded_shape, dtype=np.result_type(arr.dtype, np.complex128))
    region = tuple(slice(p, p + n) for p, n in zip(scheme.pad_per_side, scheme.grid.shape))
    out[region] = arr
    return out


def crop(padded, scheme: PartitionScheme) -> np.ndarray:
    """Inverse of :func:`zero_pad` on the retained region."""
    arr = np.asarray(padded)
    if arr.shape != scheme.padded_shape:
        arr = arr.reshape(scheme.padded_shape)
    region = tuple(slice(p, p + n) for p, n in zip(scheme.pad_per_side, scheme.grid.shape))
    return arr[region].copy()


def interior_indices(scheme: PartitionScheme) -> np.ndarray:
    """Flat padded-domain indices of the original grid nodes, in grid order."""
    grids = np.meshgrid(*[p + np.arange(n) for p, n
                          in zip(scheme.pad_per_side, scheme.grid.shape)], indexing="ij")
    return np.ravel_multi_index(tuple(g.ravel() for g in grids), scheme.padded_shape)


@dataclass(frozen=True, eq=False)
class PartitionedField:
    """Patches of one domain: column ``s`` holds subdomain ``s``, C-ordered."""

    scheme: PartitionScheme
    domain_shape: tuple[int, ...]
    patches: np.ndarray

    @property
    def n_subdomains(self) -> int:
        return self.patches.shape[1]


def extract_patches(values, scheme: PartitionScheme) -> PartitionedField:
    """Collect every subdomain of the input array into a patch matrix.

    The patch starting at multi-index ``s`` contains
    ``values[s + o (mod shape)]`` for each local offset ``o``; the modulo
    applies only for circular schemes.
    """
    dom = _as_domain(values, scheme)
    starts = scheme._starts(dom.shape)
    n_patches = int(np.prod([len(r) for r in starts]))
    patches = np.empty((scheme.subdomain_size, n_patches), dtype=np.complex128)
    for row, offset in enumerate(product(*[range(s) for s in scheme.subdomain_shape])):
        if scheme.circular:
            shifted = np.roll(dom, tuple(-o for o in offset), axis=tuple(range(dom.ndim)))
            block = shifted[np.ix_(*starts)] if scheme.stride > 1 else shifted
        else:
            block = dom[np.ix_(*[r + o for r, o in zip(starts, offset)])]
        patches[row] = block.ravel()
    return PartitionedField(scheme=scheme, domain_shape=dom.shape, patches=patches)


def overlap_average(partitioned: PartitionedField,
                    scheme: PartitionScheme | None = None) -> np.ndarray:
    """Reassemble a domain as the coverage-normalized mean of its patches.

    Exact identity with :func:`extract_patches`: averaging is computed as a
    pivot value plus the mean deviation from it, so nodes whose covering
    patches agree reproduce the common value bit for bit.
    """
    scheme = partitioned.scheme if scheme is None else scheme
    dom_shape = partitioned.domain_shape
    patches = partitioned.patches
    starts = scheme._starts(dom_shape)
    start_grids = np.meshgrid(*starts, indexing="ij")
    start_flat = [g.ravel() for g in start_grids]

    pivot = np.full(dom_shape, np.nan + 0j, dtype=np.complex128)
    deviation = np.zeros(dom_shape, dtype=np.complex128)
    count = np.zeros(dom_shape, dtype=np.int64)

    offsets = list(product(*[range(s) for s in scheme.subdomain_shape]))
    # first pass fixes one covering value per node (later offsets win)
    for row, offset in enumerate(offsets):
        idx = tuple((sf + o) % n if scheme.circular else sf + o
                    for sf, o, n in zip(start_flat, offset, dom_shape))
        pivot[idx] = patches[row]
    if np.any(np.isnan(pivot.real)):
        raise CoverageError("some nodes are covered by no subdomain")
    for row, offset in enumerate(offsets):
        idx = tuple((sf + o) % n if scheme.circular else sf + o
                    for sf, o, n in zip(start_flat, offset, dom_shape))
        np.add.at(deviation, idx, patches[row] - pivot[idx])
        np.add.at(count, idx, 1)
    return pivot + deviation / count


def circular_convolve(filt, values, method: str = "fft") -> np.ndarray:
    """Circular convolution of a small filter with a periodic array.

    ``method="direct"`` evaluates the modulo-index sum
    ``out[n] = sum_k filt[k] * values[(n - k) % N]`` tap by tap;
    ``method="fft"`` multiplies spectra of the zero-extended filter and the
    array.  Both paths agree to floating-point accuracy.
    """
    h = np.asarray(filt, dtype=np.complex128)
    x = np.asarray(values, dtype=np.complex128)
    if h.ndim != x.ndim:
        raise ParameterError("filter and array must have equal dimensionality")
    if any(hs > xs for hs, xs in zip(h.shape, x.shape)):
        raise ParameterError(f"filter {h.shape} larger than array {x.shape}")
    if method == "fft":
        h_full = np.zeros_like(x)
        h_full[tuple(slice(0, s) for s in h.shape)] = h
        return np.fft.ifftn(np.fft.fftn(h_full) * np.fft.fftn(x))
    if method == "direct":
        out = np.zeros_like(x)
        for offset in product(*[range(s) for s in h.shape]):
            out += h[offset] * np.roll(x, offset, axis=tuple(range(x.ndim)))
        return out
    raise ParameterError(f"unknown convolution method {method!r}")
