"""
Defining models: mutation kernels and killing-rate families
===========================================================

A model couples a finite-state mutation chain with a family of killing
rates indexed by an intensity parameter r.  Everything downstream
(simulation, condensate chains, condensation laws) consumes the same
validated Model object, so this is the natural place to start.
"""

import json

from fvlab import ModelError, validate_model

# A model config is a plain JSON-style document: a state list, mutation
# entries, and one killing family.  The power-law family assigns each
# site a rate c(x) * r**beta(x); exponents are exact rationals, given as
# strings like "3/2" (or plain integers).
config = {
    "states": ["a", "b", "c"],
    "mutation": [
        {"from": "a", "to": "b", "rate": 1.0},
        {"from": "b", "to": "c", "rate": 1.0},
        {"from": "c", "to": "a", "rate": 1.0},
    ],
    "killing": {
        "kind": "power",
        "c": {"a": 1.0, "b": 2.0, "c": 4.0},
        "beta": {"a": "1", "b": "1", "c": "3/2"},
    },
}

model = validate_model(config)
print("states:", model.states)
print("max mutation exit rate Q =", model.Q)

# Killing rates at a concrete intensity.
for r in (10.0, 1000.0):
    rates = [model.killing.rate(r, i) for i in range(len(model.states))]
    print(f"killing rates at r={r:g}:", rates)

# The behaviour of rate *ratios* as r grows is what the fast-selection
# theory runs on.  alpha(x, y, r) = rate(y)/rate(x); passing r=None asks
# for the large-r limit, which is an extended number: 0, a finite
# prefactor ratio (equal exponents), or infinity (strictly larger
# exponent at y).
print("\nlimit ratios alpha(x, y, infinity):")
for x in model.states:
    for y in model.states:
        if x != y:
            print(f"  {x} -> {y}: {model.alpha(x, y, None)}")

# The uniform-plus-bounded family r + m(x) has every ratio tending to 1:
# selection becomes site-blind at leading order, which is the regime
# where the empirical measure tracks the plain mutation chain.
uniform = validate_model(
    {
        "states": ["a", "b", "c"],
        "mutation": config["mutation"],
        "killing": {"kind": "uniform_plus", "m": {"a": 0.0, "b": 1.0, "c": 2.0}},
    }
)
print("\nuniform-plus ratios at r=1e6:",
      [str(uniform.alpha("a", y, 1e6)) for y in ("b", "c")])
print("uniform-plus limit ratios:",
      [str(uniform.alpha("a", y, None)) for y in ("b", "c")])

# Validation is strict: malformed documents fail loudly, before any
# simulation could consume them.
bad = dict(config, mutation=[{"from": "a", "to": "a", "rate": 1.0}])
try:
    validate_model(bad)
except ModelError as err:
    print("\nrejected config:", err)

# Models serialize back to their canonical document, and a content hash
# identifies one up to entry order -- reports embed it as provenance.
print("\ncanonical document round-trips:",
      validate_model(model.config_dict()).states == model.states)
print("content hash:", model.content_hash())
print(json.dumps(model.config_dict(), indent=2)[:160], "...")
