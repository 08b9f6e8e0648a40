"""Brute-force oracles used to cross-check the fast implementations.

Everything here is written against flat absolute-weight vectors and plain
Python loops, on purpose: no pyramid code, no shared helpers.
"""

import numpy as np


def flat_sq_distance(a, b):
    """Sum of squared differences between two flat |weight| vectors."""
    a = np.abs(np.asarray(a, dtype=np.float64)).ravel()
    b = np.abs(np.asarray(b, dtype=np.float64)).ravel()
    return float(np.sum((a - b) ** 2))


def direct_mean(weights):
    """Mean of all absolute weights of a filter."""
    return float(np.mean(np.abs(np.asarray(weights, dtype=np.float64))))


def exhaustive_nearest(key_weights, candidate_weights, labels):
    """Exact argmin of flat_sq_distance, ties broken by smaller label."""
    best = None
    for lab, cand in zip(labels, candidate_weights):
        d = flat_sq_distance(key_weights, cand)
        if best is None or d < best[1] or (d == best[1] and lab < best[0]):
            best = (lab, d)
    return best


def brute_force_assign(weights_by_label, representative_labels):
    """Map every filter label to its nearest representative label."""
    out = {}
    reps = sorted(representative_labels)
    for lab, w in weights_by_label.items():
        if lab in reps:
            out[lab] = lab
            continue
        best = exhaustive_nearest(w, [weights_by_label[r] for r in reps], reps)
        out[lab] = best[0]
    return out


def median_root_label(weights_by_label, member_labels):
    """Member whose |weight| mean is the lower-middle of the sorted means."""
    ranked = sorted(member_labels, key=lambda lab: (direct_mean(weights_by_label[lab]), lab))
    return ranked[(len(ranked) - 1) // 2]
