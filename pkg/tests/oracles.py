"""Reference computations independent of the package's vectorized paths."""

import numpy as np


class BruteForceCentroid:
    """Mamdani min/max aggregation and centroid on a fine output grid."""

    def __init__(self, fis, n=1_000_000):
        self.fis = fis
        self.grids = [np.linspace(v.lo, v.hi, n) for v in fis.outputs]
        # each output term stored only over the grid slice where it is nonzero
        self.supports = []
        for v, g in zip(fis.outputs, self.grids):
            terms = []
            for mf in v.terms:
                mu = mf(g)
                nz = np.flatnonzero(mu)
                lo, hi = (nz[0], nz[-1] + 1) if nz.size else (0, 0)
                terms.append((lo, hi, mu[lo:hi]))
            self.supports.append(terms)

    def term_strengths(self, e, ec):
        fis = self.fis
        e = min(max(e, fis.input_e.lo), fis.input_e.hi)
        ec = min(max(ec, fis.input_ec.lo), fis.input_ec.hi)
        mu_e = [float(mf(e)) for mf in fis.input_e.terms]
        mu_ec = [float(mf(ec)) for mf in fis.input_ec.terms]
        s = np.zeros((3, 7))
        for i in range(7):
            for j in range(7):
                w = min(mu_e[i], mu_ec[j])
                for ch in range(3):
                    k = fis.rules.cells[i][j][ch]
                    s[ch, k] = max(s[ch, k], w)
        return s

    def __call__(self, e, ec):
        s = self.term_strengths(e, ec)
        out = []
        for ch in range(3):
            grid = self.grids[ch]
            agg = np.zeros_like(grid)
            for strength, (lo, hi, mu) in zip(s[ch], self.supports[ch]):
                if strength > 0 and hi > lo:
                    np.maximum(agg[lo:hi], np.minimum(mu, strength), out=agg[lo:hi])
            out.append(float(np.dot(grid, agg) / agg.sum()))
        return tuple(out)


# Independent transcription of the reference rule grid, one string per e row
# (columns ec = NB..PB), doubled separators already collapsed.
EXPECTED_ROWS = {
    "NB": "PB/NB/PS PB/NB/NM PM/NB/NB PM/NM/NB PS/NS/NB PS/ZO/NM ZO/ZO/PS",
    "NM": "PB/NB/PS PB/NB/NS PM/NM/NB PS/NS/NM PS/NS/NM ZO/ZO/NS NS/ZO/PS",
    "NS": "PM/NB/ZO PM/NM/NS PM/NS/NM PS/NS/NM ZO/ZO/NS NS/PS/NS NM/PS/ZO",
    "ZO": "PM/NM/ZO PM/NS/NS PS/NS/NS ZO/ZO/NS NS/PS/NS NM/PM/NS NM/PM/ZO",
    "PS": "PS/NS/ZO PS/NS/NS ZO/ZO/ZO NS/PS/ZO NS/PS/ZO NM/PM/ZO NM/PB/PS",
    "PM": "ZO/ZO/PB ZO/ZO/NS NS/PS/PS NM/PS/PS NM/PM/PS NM/PB/PS NB/PB/PB",
    "PB": "ZO/ZO/PB NS/ZO/PM NM/PS/PM NM/PM/PM NM/PB/PS NB/PB/PS NB/PB/PB",
}


TERMS = ("NB", "NM", "NS", "ZO", "PS", "PM", "PB")


def expected_records():
    out = []
    for e, row in EXPECTED_ROWS.items():
        for ec, cell in zip(TERMS, row.split()):
            out.append((e, ec, *cell.split("/")))
    return out
