"""JSON-ready views of analysis results with fixed 15-digit float formatting."""

from __future__ import annotations

import json
import math

import numpy as np

SCHEMA_VERSION = "1.0"


def num(x):
    """Round a scalar to 15 significant digits; complex values become {re, im}."""
    if x is None:
        return None
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        if x.imag == 0:
            return num(x.real)
        return {"re": num(x.real), "im": num(x.imag)}
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    v = float(f"{x:.15g}")
    return 0.0 if v == 0 else v


def arr(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return num(a.item())
    return [arr(v) for v in a]


def eigen_dict(ed):
    return {
        "eigenvalues": arr(ed.eigenvalues),
        "clusters": [
            {
                "value": num(cl.value),
                "multiplicity": cl.multiplicity,
                "chain_lengths": cl.chain_lengths,
                "chains": [[arr(v) for v in ch] for ch in cl.chains],
            }
            for cl in ed.clusters
        ],
        "condition": num(ed.condition),
    }


def decomposition_dict(decomp, identity=None):
    names = decomp.field.names
    out = {
        "variables": list(names),
        "alpha": list(decomp.alpha),
        "k": str(decomp.k),
        "qh_part": [c.to_str(names) for c in decomp.qh_part.components],
        "residual_part": [c.to_str(names) for c in decomp.residual_part.components],
        "residual_weight_deficits": [[str(d) for d in ds] for ds in decomp.residual_deficits],
    }
    if identity is not None:
        out["euler_identity_residual"] = [num(v) for v in identity.max_residual]
    return out


def compactification_dict(sys):
    return {
        "beta": list(sys.compact.beta),
        "c": sys.compact.c,
        "active": list(sys.compact.active),
        "assumption": sys.assumption,
        "warnings": list(sys.warnings),
    }


def root_dict(root, verdict=None):
    out = {
        "Y0": arr(root.Y0),
        "residual": num(root.residual),
        "r": num(root.r),
        "A": arr(root.A),
        "A_eigen": eigen_dict(root.A_eigen),
    }
    if verdict is not None:
        out["verdict"] = {
            "status": verdict.status,
            "reasons": list(verdict.reasons),
            "rates": [{k: (num(v) if isinstance(v, float) else v) for k, v in r.items()} for r in verdict.rates],
        }
    return out


def equilibrium_dict(eq):
    return {
        "x_star": arr(eq.x_star),
        "C_star": num(eq.C_star),
        "r": num(eq.r),
        "flags": list(eq.flags),
        "Dg": arr(eq.Dg),
        "Dg_eigen": eigen_dict(eq.Dg_eigen),
        "A_g": arr(eq.A_g),
        "P_star": arr(eq.P_star),
        "invariants": {k: num(v) for k, v in sorted(eq.invariants.items())},
    }


def pair_dict(p):
    return {
        "Y0": arr(p.root.Y0),
        "x_star": arr(p.equilibrium.x_star),
        "r_Y0": num(p.root.r),
        "r_xstar": num(p.equilibrium.r),
        "C_star": num(p.equilibrium.C_star),
        "spectrum_A": arr(p.root.A_eigen.eigenvalues),
        "spectrum_Dg": arr(p.equilibrium.Dg_eigen.eigenvalues),
        "identity_residuals": {k: num(v) for k, v in sorted(p.residuals.items())},
        "vector_maps": [
            {k: (num(v) if not isinstance(v, str) else v) for k, v in sorted(m.items())}
            for m in p.vector_maps
        ],
        "exception_branch": p.exception_branch,
        "verdict": p.verdict.status,
        "stability_gap": {"m": p.gap[0], "m_A": p.gap[1], "holds": p.gap_ok},
        "failures": {k: num(v) for k, v in sorted(p.failures.items())},
    }


def envelope(command, problem_name, body):
    return {"schema_version": SCHEMA_VERSION, "command": command, "problem": problem_name, **body}


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"
