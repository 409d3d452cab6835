"""Named parameter bundles for the standard specializations.

Every preset is a plain dict of config-style field names so it can be
overridden field by field.
"""

_BASE = {
    "rho_plus": 2.0,
    "rho_minus": 1.0,
    "mu_plus": 1.0,
    "mu_minus": 1.0,
    "kappa_plus": 0.0,
    "kappa_minus": 0.0,
    "vartheta": 0.0,
    "g": 1.0,
    "lambda": 0.0,
    "m_bar": [0.0, 0.0, 0.0],
    "l": 1.0,
    "tau": 1.0,
    "l1": 1.0,
    "l2": 1.0,
}

PRESETS = {
    "pure-rt": dict(_BASE),
    "vrt": dict(_BASE, kappa_plus=0.1, kappa_minus=0.1),
    "mrt-vertical": dict(_BASE, **{"lambda": 1.0, "m_bar": [0.0, 0.0, 0.5]}),
    "mrt-horizontal": dict(_BASE, **{"lambda": 1.0, "m_bar": [1.0, 1.0, 0.0]}),
}


def preset(name):
    try:
        d = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    out = dict(d)
    out["m_bar"] = list(d["m_bar"])
    return out
