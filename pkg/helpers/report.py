import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel

from helpers.errors import ProblemValidationError
from helpers.grid import PiecewiseGridFunction

# How each named constant is obtained, one line per quantity.
TRACES = {
    "gamma_norm": "sup of gamma_i on [0,1] = gamma_i(0)",
    "delta_norm": "sup of delta_i on [0,1] = delta_i(1)",
    "c_gamma": "gamma_i(b_i) / gamma_i(0)",
    "alpha_tilde_gamma": "alpha_tilde_i = h_i2 alpha_i + p_i12 (unit mass at tau_i), applied to gamma_i",
    "alpha_tilde_delta": "alpha_tilde_i = h_i2 alpha_i + p_i12 (unit mass at tau_i), applied to delta_i",
    "alpha_bar_gamma": "alpha_bar_i = h_i1 alpha_i + p_i11 (unit mass at tau_i), applied to gamma_i",
    "beta_one": "total mass of beta_i",
    "int_K_tilde": "integral over [0,1] of K_tilde_i(s) g_i(s), K_tilde_i(s) = alpha_tilde_i[k_i(., s)]",
    "int_K_bar": "integral over [a_i,b_i] of K_bar_i(s) g_i(s), K_bar_i(s) = alpha_bar_i[k_i(., s)]",
    "one_over_m": "sup over t of the integral over [0,1] of k_i(t,s) g_i(s)",
    "one_over_M": "inf over t in [a_i,b_i] of the integral over [a_i,b_i] of k_i(t,s) g_i(s)",
    "m": "1 / (sup over t of the integral over [0,1] of k_i(t,s) g_i(s))",
    "M": "1 / (inf over t in [a_i,b_i] of the integral over [a_i,b_i] of k_i(t,s) g_i(s))",
    "int_phi_g": "integral over [a_i,b_i] of Phi_i(s) g_i(s)",
    "c": "min over i of min{c_Phi_i, c_gamma_i, c_delta_i, c_gamma_i |gamma_i| p_i11 / max(|gamma_i| p_i12, |delta_i| p_i22)}",
    "c_i": "min{c_Phi_i, c_gamma_i, c_delta_i, c_gamma_i |gamma_i| p_i11 / max(|gamma_i| p_i12, |delta_i| p_i22)}",
}

DIGITS = 12


def _round(value: float) -> float:
    return float(f"{value:.{DIGITS}g}")


def rational(value: Fraction) -> Dict[str, Any]:
    return {"exact": f"{value.numerator}/{value.denominator}", "decimal": _round(float(value))}


def jsonable(obj: Any) -> Any:
    """Plain JSON data for reports. Rationals keep both their exact and decimal form."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return _round(value) if np.isfinite(value) else str(value)
    if isinstance(obj, np.ndarray):
        return [jsonable(x) for x in obj.tolist()]
    if isinstance(obj, PiecewiseGridFunction):
        return {"entries": len(obj.nodes), "sup_norm": _round(obj.sup_norm())}
    if isinstance(obj, BaseModel):
        return {name: jsonable(getattr(obj, name)) for name in type(obj).model_fields}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [jsonable(x) for x in obj]
    return str(obj)


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(jsonable(report), indent=2, ensure_ascii=False) + "\n"


def write_report(path, report: Dict[str, Any]) -> None:
    Path(path).write_text(dumps(report), encoding="utf-8")


def computed_values(constants, cone) -> Dict[str, Any]:
    """Flat name -> value table matching the keys problem files use under reference_values."""
    values: Dict[str, Any] = {}
    for k in constants.equations:
        i = k.index
        for name in TRACES:
            if name in ("c", "c_i"):
                continue
            values[f"{name}_{i}"] = getattr(k, name)
    for i, eq_cone in enumerate(cone.equations, start=1):
        values[f"c_{i}"] = eq_cone.c
    values["c"] = cone.c
    return values


def _trace_for(key: str) -> str:
    if key in TRACES:
        return TRACES[key]
    base, _, suffix = key.rpartition("_")
    if suffix.isdigit() and base == "c":
        return TRACES["c_i"].replace("_i", f"_{suffix}")
    if suffix.isdigit() and base in TRACES:
        return TRACES[base].replace("_i", f"_{suffix}")
    return "no derivation recorded"


def discrepancies(reference: Dict[str, Fraction], computed: Dict[str, Any], rtol: float = 1e-9) -> List[Dict[str, Any]]:
    """Reference values that disagree with the computed ones, each with a one-line derivation."""
    out = []
    for key, expected in reference.items():
        if key not in computed:
            out.append({"name": key, "reference": expected, "computed": None, "trace": "not a computed quantity"})
            continue
        got = computed[key]
        if isinstance(got, Fraction):
            same = got == expected
        else:
            same = abs(float(got) - float(expected)) <= rtol * max(1.0, abs(float(expected)))
        if not same:
            out.append(
                {
                    "name": key,
                    "reference": expected,
                    "computed": got,
                    "difference": got - expected if isinstance(got, Fraction) else float(got) - float(expected),
                    "trace": f"{key} = {_trace_for(key)}",
                }
            )
    return out


def residual_table(r) -> Dict[str, Any]:
    return {
        "integral": r.integral,
        "ode": r.ode,
        "jump": r.jump,
        "jump_fd": r.jump_fd,
        "bc": r.bc,
        "equations": r.equations,
    }


def solution_summary(solution) -> Dict[str, Any]:
    return {
        "start": solution.start,
        "iterations": solution.iterations,
        "update_norm": solution.update_norm,
        "sup_norm": (solution.u.sup_norm(), solution.v.sup_norm()),
        "residuals": residual_table(solution.residuals) if solution.residuals is not None else None,
        "cone": solution.cone,
    }


def write_csv(path, u: PiecewiseGridFunction, v: PiecewiseGridFunction) -> None:
    """Header t,u,v; an impulse point shows up on two rows, left value first."""
    rows = np.column_stack([u.nodes, u.values, v.values])
    np.savetxt(path, rows, fmt=f"%.{DIGITS}g", delimiter=",", header="t,u,v", comments="")


def read_csv(path) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        with open(path, encoding="utf-8") as handle:
            header = handle.readline().strip()
        if header.replace(" ", "") != "t,u,v":
            raise ProblemValidationError([f"{path}: expected header 't,u,v', found '{header}'"])
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as e:
        raise ProblemValidationError([f"{path}: cannot read solution file ({e})"]) from e
    except ValueError as e:
        raise ProblemValidationError([f"{path}: malformed solution file ({e})"]) from e
    if data.shape[1] != 3:
        raise ProblemValidationError([f"{path}: expected 3 columns, found {data.shape[1]}"])
    return data[:, 0], data[:, 1], data[:, 2]

