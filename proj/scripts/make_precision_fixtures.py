"""High-precision reference values (mpmath, 50 digits) frozen into
tests/fixtures/precision.json:

* smallest eigenvalue of the 7x7 Wilkinson matrix W7+ (diagonal 3,2,1,0,1,2,3,
  unit off-diagonals);
* the four Cramer-Rao bounds for the ten-anchor reference layout with target
  (28.7, 16.3), gamma = 4, sigma_n^2 = 1. The Fisher information is built from
  the full DRSS covariance sigma^2 (Gamma Gamma^T) and numerically
  differentiated mean vectors, independently of the closed-form gradients.
"""
import json
import pathlib

import mpmath as mp

mp.mp.dps = 50

ANCHORS = [(22.5, 10.2), (44.9, 38.1), (44.1, 14.2), (33.6, 33.2), (6.1, 20.3),
           (13.7, 35.8), (14.1, 44.8), (41.3, 19.5), (24.9, 34.7), (41.7, 30.5)]
TARGET = (mp.mpf("28.7"), mp.mpf("16.3"))
GAMMA = mp.mpf(4)
SIGMA2 = mp.mpf(1)


def wilkinson_min_eig():
    n = 7
    w = mp.matrix(n, n)
    for i in range(n):
        w[i, i] = abs(i - 3)
        if i + 1 < n:
            w[i, i + 1] = w[i + 1, i] = 1
    return min(mp.eigsy(w)[0])


def mean_drss(x, y, gamma):
    anchors = [(mp.mpf(str(a)), mp.mpf(str(b))) for a, b in ANCHORS]
    p = [-10 * gamma * mp.log10(mp.sqrt((x - a) ** 2 + (y - b) ** 2)) for a, b in anchors]
    return [p[i] - p[0] for i in range(1, len(p))]


def bounds():
    m = len(ANCHORS) - 1
    cols = []
    for which in range(3):
        def f(t, which=which):
            args = [TARGET[0], TARGET[1], GAMMA]
            args[which] = args[which] + t
            return mean_drss(*args)
        cols.append([mp.diff(lambda t, i=i: f(t)[i], 0) for i in range(m)])
    g = mp.matrix(m, 3)
    for j in range(3):
        for i in range(m):
            g[i, j] = cols[j][i]
    gg = mp.matrix(m, m)
    for i in range(m):
        for j in range(m):
            gg[i, j] = SIGMA2 * (2 if i == j else 1)  # sigma^2 (Gamma Gamma^T) = sigma^2 (I + 1 1^T)
    info = g.T * mp.inverse(gg) * g
    inv_joint = mp.inverse(info)
    inv_loc = mp.inverse(info[0:2, 0:2])
    return {
        "joint_location": mp.sqrt(inv_joint[0, 0] + inv_joint[1, 1]),
        "joint_ple": mp.sqrt(inv_joint[2, 2]),
        "location_known_ple": mp.sqrt(inv_loc[0, 0] + inv_loc[1, 1]),
        "ple_known_location": mp.sqrt(1 / info[2, 2]),
    }


def main():
    out = {"wilkinson7_min_eig": float(wilkinson_min_eig()),
           "fig1_crlb_gamma4_sigma1": {k: float(v) for k, v in bounds().items()}}
    path = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "precision.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
