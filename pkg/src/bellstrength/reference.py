"""Published strengths, optimal setting distributions and best local tables.

Used by the regression tests and by ``verify-paper-table``.  Tables are
entered in their printed layout and converted to the internal one:

* two-party blocks are listed with A's setting varying fastest, i.e.
  (1,1), (2,1), (1,2), (2,2) for two settings and row-major over
  (b, a) for three;
* inside a block, rows are B's outcome and columns A's, "true" first.

Internally tables are indexed ``[setting][x, y]`` with settings in row-major
(a, b) order and outcome 1 = true.
"""

from __future__ import annotations

import numpy as np

STRENGTHS = {
    "bell": (0.0141597409, 0.0158003672, 0.0169800305),
    "bell-optimized": (0.0177632822, 0.0191506613, 0.0211293952),
    "chsh": (0.0462738469, 0.0462738469, 0.0462738469),
    "hardy": (0.0278585182, 0.0279816333, 0.0280347655),
    "mermin": (0.0157895843, 0.0191506613, 0.0211293952),
    "ghz": (0.2075187496, 0.2075187496, 0.4150374993),
}

# uniform, uncorrelated, correlated
TABLE_TOL = (1e-7, 1e-6, 1e-7)


def _blocks(blocks, settings: int) -> np.ndarray:
    """Printed two-party blocks -> array [setting index, x, y]."""
    out = np.empty((settings * settings, 2, 2))
    for i, blk in enumerate(blocks):
        b, a = divmod(i, settings)
        printed = np.asarray(blk, dtype=float)  # [y true/false, x true/false]
        out[a * settings + b] = printed[::-1, ::-1].T
    return out


def _settings(printed, settings: int = 2) -> np.ndarray:
    """Printed per-setting list (A fastest) -> row-major (a, b) vector."""
    p = np.asarray(printed, dtype=float).reshape(settings, settings)
    return p.T.ravel()


def _sym(d, o):
    return [[d, o], [o, d]]


_R = 0.1029688643
BEST_UNIFORM = {
    "chsh": _blocks([_sym(0.375, 0.125)] * 3 + [_sym(0.125, 0.375)], 2),
    "bell": _blocks(
        [_sym(0.3970311357, _R), _sym(0.5, 0.0), _sym(0.2940622714, 0.2059377286), _sym(0.3970311357, _R)],
        2,
    ),
    "bell-optimized": _blocks(
        [_sym(0.5, 0.0), _sym(1 / 3, 1 / 6), _sym(1 / 6, 1 / 3), _sym(1 / 3, 1 / 6)], 2
    ),
    "hardy": _blocks(
        [
            [[0.0338829434, 0.3543640363], [0.3543640363, 0.2573889840]],
            [[0.2190090188, 0.1692379609], [0.0075052045, 0.6042478158]],
            [[0.2190090188, 0.0075052045], [0.1692379609, 0.6042478158]],
            [[0.0488933524, 0.1776208709], [0.1776208709, 0.5958649058]],
        ],
        2,
    ),
    "mermin": _blocks(
        [_sym(0.5, 0.0) if a == b else _sym(1 / 6, 1 / 3) for b in range(3) for a in range(3)], 3
    ),
}

BEST_UNCORRELATED = {
    "bell": _blocks(
        [
            _sym(0.3901023259, 0.1098976741),
            _sym(0.5, 0.0),
            _sym(0.2802046519, 0.2197953481),
            _sym(0.3901023259, 0.1098976741),
        ],
        2,
    ),
    "bell-optimized": _blocks(
        [
            _sym(0.5, 0.0),
            _sym(0.3267978563, 0.1732021436),
            _sym(0.1732021436, 0.3267978563),
            _sym(0.3464042873, 0.1535957127),
        ],
        2,
    ),
    "hardy": _blocks(
        [
            [[0.0198831449, 0.3612213769], [0.3612213769, 0.2576741013]],
            [[0.2143180373, 0.1667864844], [0.0141212511, 0.6047742271]],
            [[0.2143180373, 0.0141212511], [0.1667864844, 0.6047742271]],
            [[0.0481256471, 0.1803136414], [0.1803136414, 0.5912470702]],
        ],
        2,
    ),
}

BEST_CORRELATED = {
    "bell": _blocks(
        [
            _sym(0.3969913979, 0.1030086021),
            _sym(0.4941498806, 0.0058501194),
            _sym(0.2881326764, 0.2118673236),
            _sym(0.3969913979, 0.1030086021),
        ],
        2,
    ),
    "bell-optimized": _blocks(
        [
            _sym(0.4927305107, 0.0072694892),
            _sym(0.3357564964, 0.1642435036),
            _sym(0.1642435036, 0.3357564964),
            _sym(0.3357564964, 0.1642435036),
        ],
        2,
    ),
    "hardy": _blocks(
        [
            [[0.0173443545, 0.3620376608], [0.3620376608, 0.2585803238]],
            [[0.2123471649, 0.1670348504], [0.0165954828, 0.6040225019]],
            [[0.2123471649, 0.0165954828], [0.1670348504, 0.6040225019]],
            [[0.0505353201, 0.1784073276], [0.1784073276, 0.5926500247]],
        ],
        2,
    ),
}

# per-party marginals (A, B) of the optimal product distributions
UNCORRELATED_MARGINALS = {
    "bell": ((0.6356058924, 0.3643941076), (0.3643941076, 0.6356058924)),
    "bell-optimized": ((0.3869208948, 0.6130791052), (0.3869208948, 0.6130791052)),
    "hardy": ((0.5102051253, 0.4897948747), (0.5102051253, 0.4897948747)),
}

CORRELATED_SIGMA = {
    "bell": _settings([0.2836084841, 0.1020773549, 0.3307056768, 0.2836084841]),
    "bell-optimized": _settings([0.1046493146, 0.2984502285, 0.2984502285, 0.2984502285]),
    "hardy": _settings([0.2562288294, 0.2431695652, 0.2431695652, 0.2574320402]),
}

# trials in the "million runs" example and the evidence it is quoted to give
MERMIN_RUNS = 10**6
MERMIN_RUNS_BITS = 19150
