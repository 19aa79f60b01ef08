"""Binary-classification metrics, ROC/AUC, the inverse normal CDF, d-prime,
and the repetition-accuracy simulator.

The simulator draws one score per stimulus code per repetition: targets
from Normal(d', 1), the ten non-targets from Normal(0, 1). Accumulated
over j repetitions, a character is decoded correctly iff the target row
and the target column both win their argmax, which the closed-form
companion evaluates as (integral of pdf(x - d' sqrt(j)) * cdf(x)^5 dx)
squared.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

SQRT2 = math.sqrt(2.0)
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    @property
    def true_predictions(self):
        return self.tp + self.tn

    def as_dict(self):
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(labels, scores, threshold=0.5):
    """Confusion counts with score >= threshold predicting the positive class."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError(f"{labels.shape} labels vs {scores.shape} scores")
    pred = scores >= threshold
    return ConfusionMatrix(
        tp=int(np.sum(pred & labels)),
        tn=int(np.sum(~pred & ~labels)),
        fp=int(np.sum(pred & ~labels)),
        fn=int(np.sum(~pred & labels)),
    )


def prf1(c):
    """Accuracy, precision, recall and F1 from confusion counts.

    Zero-denominator metrics are reported as 0.0 and named in the
    ``undefined`` list rather than raising.
    """
    undefined = []

    def _ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    precision = _ratio(c.tp, c.tp + c.fp, "precision")
    recall = _ratio(c.tp, c.tp + c.fn, "recall")
    accuracy = _ratio(c.tp + c.tn, c.total, "accuracy")
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1")
    return {"accuracy": accuracy, "precision": precision, "recall": recall,
            "f1": f1, "undefined": undefined}


@dataclass(frozen=True)
class RocCurve:
    """Threshold-sweep operating points, (0,0) to (1,1), and the trapezoid AUC."""
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float


def roc_auc(labels, scores):
    """ROC by descending-threshold sweep; trapezoidal AUC.

    Tied scores advance both rates in one simultaneous step, which makes
    the trapezoid area identical to the rank (Mann-Whitney) AUC.
    """
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    if labels.shape != scores.shape:
        raise ValueError(f"{labels.shape} labels vs {scores.shape} scores")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present for a ROC curve")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # one operating point after each distinct score value
    distinct = np.flatnonzero(np.diff(sorted_scores)) if len(scores) > 1 \
        else np.array([], dtype=int)
    cut = np.concatenate([distinct, [len(scores) - 1]])
    tp = np.cumsum(sorted_labels)[cut]
    fp = (cut + 1) - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], sorted_scores[cut]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


# Acklam's rational approximation to the inverse standard normal CDF,
# refined below with one Halley step to full double precision.
_NORMINV_A = (-3.969683028665376e+01, 2.209460984245205e+02,
              -2.759285104469687e+02, 1.383577518672690e+02,
              -3.066479806614716e+01, 2.506628277459239e+00)
_NORMINV_B = (-5.447609879822406e+01, 1.615858368580409e+02,
              -1.556989798598866e+02, 6.680131188771972e+01,
              -1.328068155288572e+01)
_NORMINV_C = (-7.784894002430293e-03, -3.223964580411365e-01,
              -2.400758277161838e+00, -2.549732539343734e+00,
              4.374664141464968e+00, 2.938163982698783e+00)
_NORMINV_D = (7.784695709041462e-03, 3.224671290700398e-01,
              2.445134137142996e+00, 3.754408661907416e+00)
_NORMINV_SPLIT = 0.02425


def norminv(p):
    """Inverse of the standard normal CDF, |error| below 1e-9."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability {p} outside (0, 1)")
    a, b, c, d = _NORMINV_A, _NORMINV_B, _NORMINV_C, _NORMINV_D
    if p < _NORMINV_SPLIT:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) \
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
        e = 0.5 * math.erfc(-x / SQRT2) - p
    elif p <= 1.0 - _NORMINV_SPLIT:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q \
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
        e = 0.5 * math.erfc(-x / SQRT2) - p
    else:
        # 1 - p is exact here (Sterbenz), and the complementary CDF keeps
        # the refinement residual free of cancellation in the upper tail
        om = 1.0 - p
        q = math.sqrt(-2.0 * math.log(om))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) \
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
        e = om - 0.5 * math.erfc(x / SQRT2)
    # one Halley refinement step
    u = e * SQRT_2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def d_prime(auc):
    """Detectability index sqrt(2) * norminv(auc)."""
    if not 0.0 < auc < 1.0:
        raise ValueError(f"AUC {auc} outside (0, 1)")
    return SQRT2 * norminv(auc)


def simulate_char_accuracy(dprime, max_reps=15, n_characters=100000, seed=0,
                           chunk=20000):
    """Monte-Carlo character accuracy for repetitions 1..max_reps.

    Per character and repetition, 12 code scores are drawn (2 targets at
    mean d', 10 non-targets at mean 0, unit variance) and summed across
    repetitions; a character counts as correct at j iff both the target
    row and target column lead their accumulated sums. Deterministic
    given (seed, n_characters).
    """
    if n_characters < 1:
        raise ValueError("need at least one character")
    if dprime < 0:
        raise ValueError("d' must be non-negative")
    correct = np.zeros(max_reps, dtype=np.int64)
    streams = np.random.SeedSequence(seed).spawn(
        (n_characters + chunk - 1) // chunk)
    done = 0
    for stream in streams:
        size = min(chunk, n_characters - done)
        rng = np.random.default_rng(stream)
        draws = rng.standard_normal((size, max_reps, 12))
        draws[:, :, 0] += dprime    # target column (codes 1..6 -> slots 0..5)
        draws[:, :, 6] += dprime    # target row (codes 7..12 -> slots 6..11)
        sums = np.cumsum(draws, axis=1)
        col_hit = np.argmax(sums[:, :, :6], axis=2) == 0
        row_hit = np.argmax(sums[:, :, 6:], axis=2) == 0
        correct += np.sum(col_hit & row_hit, axis=0)
        done += size
    return correct / n_characters


def analytic_char_accuracy(dprime, reps):
    """Closed-form counterpart of the simulator via adaptive quadrature.

    The accumulated target score beats five iid accumulated non-targets
    with probability integral(pdf(x - d' sqrt(reps)) cdf(x)^5 dx); rows
    and columns are independent and symmetric, so the character accuracy
    is that probability squared.
    """
    if reps < 1:
        raise ValueError("need at least one repetition")
    if dprime < 0:
        raise ValueError("d' must be non-negative")
    shift = dprime * math.sqrt(reps)

    def integrand(x):
        return (math.exp(-0.5 * (x - shift) ** 2) / SQRT_2PI
                * (0.5 * math.erfc(-x / SQRT2)) ** 5)

    p_axis, err = integrate.quad(integrand, -np.inf, np.inf,
                                 epsabs=1e-10, epsrel=1e-10, limit=200)
    if err > 1e-8:
        raise ArithmeticError(f"quadrature error {err} above 1e-8")
    return p_axis * p_axis


def write_roc_csv(curve, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr", "threshold"])
        for f, t, th in zip(curve.fpr, curve.tpr, curve.thresholds):
            writer.writerow([f"{f:.10g}", f"{t:.10g}", f"{th:.10g}"])


def write_simulation_csv(rows, path):
    """Rows of (dprime, reps, accuracy) to CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dprime", "repetitions", "accuracy"])
        for dp, reps, acc in rows:
            writer.writerow([f"{dp:.10g}", reps, f"{acc:.10g}"])
