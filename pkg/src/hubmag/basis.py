"""Bit-mask occupation basis with fixed particle numbers per spin channel.

Each many-body state is a pair of integers ``(up, down)``; bit ``i`` of each
integer marks site ``i`` as occupied by an electron of that spin. The basis
is the Cartesian product of the two single-species mask lists, each ordered
ascending by integer value, flattened as ``index = i_up * len(down) + i_down``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np


def _species_masks(n_sites: int, count: int) -> np.ndarray:
    """All masks of ``n_sites`` bits with exactly ``count`` bits set, ascending."""
    out = []
    for occ in combinations(range(n_sites), count):
        m = 0
        for i in occ:
            m |= 1 << i
        out.append(m)
    out.sort()
    return np.array(out, dtype=np.uint64)


@dataclass
class Basis:
    """Occupation basis for ``n_up`` spin-up and ``n_down`` spin-down electrons.

    Attributes
    ----------
    n_sites : int
        Number of lattice sites (bits per mask).
    n_up, n_down : int
        Electron count in each spin channel.
    up_masks, down_masks : ndarray of uint64
        Single-species masks, strictly ascending. The full basis is their
        product; the flat index of ``(up_masks[i], down_masks[j])`` is
        ``i * len(down_masks) + j``.
    """

    n_sites: int
    n_up: int
    n_down: int
    up_masks: np.ndarray
    down_masks: np.ndarray
    _doublons: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        """Total dimension ``C(n_sites, n_up) * C(n_sites, n_down)``."""
        return len(self.up_masks) * len(self.down_masks)

    @property
    def n_up_states(self) -> int:
        return len(self.up_masks)

    @property
    def n_down_states(self) -> int:
        return len(self.down_masks)

    def state(self, k: int) -> tuple[int, int]:
        """Return the ``(up, down)`` mask pair at flat index ``k``."""
        nd = len(self.down_masks)
        return int(self.up_masks[k // nd]), int(self.down_masks[k % nd])

    def index_of(self, up: int, down: int) -> int:
        """Flat index of a mask pair; inverse of :meth:`state`.

        Raises
        ------
        KeyError
            If either mask is not part of the basis.
        """
        iu = int(np.searchsorted(self.up_masks, np.uint64(up)))
        idn = int(np.searchsorted(self.down_masks, np.uint64(down)))
        if iu >= len(self.up_masks) or int(self.up_masks[iu]) != int(up):
            raise KeyError(f"up mask {up:#x} not in basis")
        if idn >= len(self.down_masks) or int(self.down_masks[idn]) != int(down):
            raise KeyError(f"down mask {down:#x} not in basis")
        return iu * len(self.down_masks) + idn

    def all_states(self):
        """Iterate over all ``(up, down)`` pairs in flat-index order."""
        for up in self.up_masks:
            for down in self.down_masks:
                yield int(up), int(down)

    def doublon_counts(self) -> np.ndarray:
        """Per-state number of doubly occupied sites, shape ``(n,)``.

        Cached after the first call.
        """
        if self._doublons is None:
            pairs = self.up_masks[:, None] & self.down_masks[None, :]
            self._doublons = np.bitwise_count(pairs).astype(np.int64).ravel()
        return self._doublons


def enumerate_basis(n_sites: int, n_up: int, n_down: int) -> Basis:
    """Enumerate the fixed-filling occupation basis.

    Parameters
    ----------
    n_sites : int
        Lattice size; at most 64 (masks are 64-bit words).
    n_up, n_down : int
        Electrons per spin channel.

    Returns
    -------
    Basis
        Dimension ``C(n_sites, n_up) * C(n_sites, n_down)``; deterministic
        ordering, ascending by ``(up, down)`` integer value.
    """
    if not (0 < n_sites <= 64):
        raise ValueError(f"n_sites must be in [1, 64], got {n_sites}")
    if not (0 <= n_up <= n_sites) or not (0 <= n_down <= n_sites):
        raise ValueError(
            f"electron counts ({n_up}, {n_down}) out of range for {n_sites} sites")
    b = Basis(n_sites, n_up, n_down,
              _species_masks(n_sites, n_up), _species_masks(n_sites, n_down))
    assert b.n == comb(n_sites, n_up) * comb(n_sites, n_down)
    return b


def apply_hop(mask: int, frm: int, to: int):
    """Apply ``c^+_to c_frm`` to a single-species mask.

    Returns ``None`` when the operator annihilates the state (source empty
    or target occupied); otherwise ``(new_mask, sign)`` where the fermionic
    sign is ``(-1)**(occupied bits strictly between frm and to)``.
    """
    if frm == to:
        raise ValueError("hop endpoints must differ")
    if frm < 0 or to < 0:
        raise ValueError("site indices must be nonnegative")
    mask = int(mask)
    if not (mask >> frm) & 1:
        return None
    if (mask >> to) & 1:
        return None
    new = (mask ^ (1 << frm)) | (1 << to)
    lo, hi = (frm, to) if frm < to else (to, frm)
    between = ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)
    sign = -1 if (mask & between).bit_count() & 1 else 1
    return new, sign


def doublon_count(up: int, down: int) -> int:
    """Number of doubly occupied sites: ``popcount(up AND down)``."""
    return (int(up) & int(down)).bit_count()
