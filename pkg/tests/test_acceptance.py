"""Acceptance criteria, one test per criterion, at their stated tolerances.

Run with `pytest -s tests/test_acceptance.py` to see one PASS/FAIL line per
criterion.  Criterion 9's time-step sub-rate is implemented exactly as
stated and is a documented expected failure: for white noise the pure
temporal channel of the fourth-order equation converges at k^(3/4) with no
logarithmic factor, so the log-corrected fit cannot sit at 1/2 (see
notes/decisions ledger); the test is marked xfail(strict=True) to keep the
red visible without masking it.
"""

import os

import numpy as np
import pytest

from ratelab.experiments import ExperimentConfig, run_experiment
from ratelab import error_lab as el
from ratelab.models import ModelSpec, mild_law
from ratelab.schemes import DiscreteLawRequest, discrete_law, make_scheme
from ratelab.spectral_core import CovarianceSpec, build_basis

SEED = 20260809


def _report(tag, ok, detail=""):
    line = f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line, flush=True)
    return ok


def _run(kind, **extra):
    cfg = ExperimentConfig.from_dict({"experiment": kind, "seed": SEED, **extra})
    return run_experiment(cfg)


@pytest.fixture(scope="module")
def runs():
    """Shared experiment results (each heavy run executed once)."""
    cache = {}

    def get(kind, **extra):
        key = (kind, tuple(sorted(extra.items())))
        if key not in cache:
            cache[key] = _run(kind, **extra)
        return cache[key]

    return get


def _slope(result, name_contains):
    for rep in result.reports:
        if name_contains in rep["name"]:
            return rep
    raise KeyError(name_contains)


def test_criterion_01_trace_identity(runs):
    res = runs("trace_identity")
    ok = all(c["pass"] for c in res.checks)
    worst = max(c["value"] for c in res.checks)
    assert _report("1 trace identity", ok, f"max rel diff {worst:.2e} <= 1e-12")


def test_criterion_02_norm_chain(runs):
    res = runs("aq_check")
    ok = all(c["pass"] for c in res.checks)
    assert _report("2 trace/HS norm chain", ok,
                   "100 diagonal (exact equalities) + 20 dense PSD")


def test_criterion_03_holder(runs):
    res = runs("holder")
    ok = all(c["pass"] for c in res.checks)
    detail = ", ".join(f"a={c['name'][6:]}: {c['value']:.3f}<={c['tolerance']:.3f}"
                       for c in res.checks)
    assert _report("3 Hoelder constants", ok, detail)


def test_criterion_04_det_semigroup(runs):
    res = runs("det_semigroup")
    ok = all(r["pass"] for r in res.reports)
    detail = ", ".join(f"{r['name']}: {r['slope']:.3f} vs {r['expected']:.3f}"
                       for r in res.reports)
    assert _report("4 interpolated semigroup sup-error", ok, detail)


def test_criterion_05_temporal_weak(runs):
    be = _slope(runs("temporal_weak", scheme="backward_euler"), "k-sweep")
    cn = _slope(runs("temporal_weak", scheme="crank_nicolson"), "k-sweep")
    ok = be["pass"] and cn["pass"] and (cn["slope"] - be["slope"] >= 0.15)
    assert _report(
        "5 temporal weak rate", ok,
        f"BE {be['slope']:.3f} vs 0.75, CN {cn['slope']:.3f} vs 1.0, "
        f"CN-BE {cn['slope'] - be['slope']:.2f} >= 0.15")


def test_criterion_06_temporal_strong(runs):
    be = _slope(runs("temporal_strong", scheme="backward_euler"), "k-sweep")
    cn = _slope(runs("temporal_strong", scheme="crank_nicolson"), "k-sweep")
    wbe = _slope(runs("temporal_weak", scheme="backward_euler"), "k-sweep")
    wcn = _slope(runs("temporal_weak", scheme="crank_nicolson"), "k-sweep")
    ratios = (wbe["slope"] / be["slope"], wcn["slope"] / cn["slope"])
    ok = (be["pass"] and cn["pass"]
          and all(1.8 <= r <= 2.2 for r in ratios))
    assert _report(
        "6 temporal strong rate", ok,
        f"BE {be['slope']:.3f} vs 0.375, CN {cn['slope']:.3f} vs 0.5, "
        f"weak/strong ratios {ratios[0]:.2f}, {ratios[1]:.2f} in [1.8, 2.2]")


def test_criterion_07_full_weak(runs):
    h_rep = _slope(runs("full_weak", scheme="backward_euler"), "h-sweep")
    kbe = _slope(runs("full_weak", scheme="backward_euler"), "k-sweep")
    kcn = _slope(runs("full_weak", scheme="crank_nicolson"), "k-sweep")
    ok = h_rep["pass"] and kbe["pass"] and kcn["pass"]
    assert _report(
        "7 fully discrete weak rate", ok,
        f"h {h_rep['slope']:.3f} vs 1.0, k BE {kbe['slope']:.3f} vs 0.75, "
        f"k CN {kcn['slope']:.3f} vs 1.0")


def test_criterion_08_full_strong(runs):
    h_rep = _slope(runs("full_strong", scheme="backward_euler"), "h-sweep")
    kbe = _slope(runs("full_strong", scheme="backward_euler"), "k-sweep")
    kcn = _slope(runs("full_strong", scheme="crank_nicolson"), "k-sweep")
    ok = h_rep["pass"] and kbe["pass"] and kcn["pass"]
    assert _report(
        "8 fully discrete strong rate", ok,
        f"h {h_rep['slope']:.3f} vs 0.5, k BE {kbe['slope']:.3f} vs 0.375, "
        f"k CN {kcn['slope']:.3f} vs 0.5")


def test_criterion_09_chc_h_rate(runs):
    rep = _slope(runs("chc_weak"), "h-sweep")
    assert _report("9 CHC weak rate (h part, log-corrected)", rep["pass"],
                   f"{rep['slope']:.3f} vs 2.0 +- 0.20")


@pytest.mark.xfail(
    strict=True,
    reason="faithful implementation of an unattainable sub-criterion: the "
           "temporal channel of the fourth-order equation with white noise "
           "has sup-rate k^(3/4) without a log factor, so the log-corrected "
           "slope lands near 0.77, outside 0.5 +- 0.15 (see decisions ledger)")
def test_criterion_09_chc_k_rate(runs):
    rep = _slope(runs("chc_weak"), "k-sweep")
    _report("9 CHC weak rate (k part, log-corrected)", rep["pass"],
            f"{rep['slope']:.3f} vs 0.5 +- 0.15")
    assert rep["pass"]


def test_criterion_10_heat(runs):
    res = runs("heat_weak")
    det_h = _slope(res, "deterministic h-sweep")
    det_k = _slope(res, "deterministic k-sweep")
    wk = _slope(res, "k-sweep (h pinned")
    wh = _slope(res, "h-sweep (k pinned")
    ok = all(r["pass"] for r in (det_h, det_k, wk, wh))
    assert _report(
        "10 heat rates", ok,
        f"det h {det_h['slope']:.3f} vs 2, det k {det_k['slope']:.3f} vs 1, "
        f"weak k {wk['slope']:.3f} vs 0.5, weak h {wh['slope']:.3f} vs 1.0")


def test_criterion_11_representation(runs):
    res = runs("representation")
    ok = all(c["pass"] for c in res.checks)
    gaps = {c["name"]: c["value"] for c in res.checks}
    detail = ", ".join(f"{v:.2e}" for v in gaps.values())
    assert _report("11 representation identity", ok, f"gaps {detail}")


def test_criterion_12_mc_closure():
    basis = build_basis("dirichlet", 128)
    gamma = 0.25
    jj = np.arange(1, 129, dtype=float)
    profile = jj ** -2.05
    u0 = np.exp(1j * basis.nus * 1.0) * profile
    X0 = np.vstack([u0.real, basis.nus * u0.imag])
    model = ModelSpec(family="wave", basis=basis, Q=CovarianceSpec.power(gamma),
                      X0=X0)
    psi = np.vstack([0.8 / np.sum(jj ** -0.45 * profile) * jj ** -0.45,
                     np.zeros(128)])
    F = el.sine_functional(psi, selector="first_component")
    n_paths = 10_000
    oks, details = [], []
    for name in ("backward_euler", "crank_nicolson"):
        req = DiscreteLawRequest(model=model, scheme=make_scheme(name),
                                 k=1.0 / 64, N=64)
        exact = el.weak_error_exact(mild_law(model, 1.0), discrete_law(req), F)
        mc = el.weak_error_mc(model, req, F, n_paths, SEED)
        mc2 = el.weak_error_mc(model, req, F, n_paths, SEED)
        assert mc2.estimate == mc.estimate  # byte-exact reproducibility
        z = abs(mc.estimate - exact) / mc.standard_error
        oks.append(z <= 3.0)
        details.append(f"weak {name} z={z:.2f}")
    req = DiscreteLawRequest(model=model, scheme=make_scheme("backward_euler"),
                             k=1.0 / 64, N=64)
    exact_s = el.strong_error_exact(el.temporal_joint_law(req), norm="H")
    mcs = el.strong_error_mc(model, req, n_paths, SEED, norm="H")
    zs = abs(mcs.estimate - exact_s) / mcs.standard_error
    oks.append(zs <= 3.0)
    details.append(f"strong backward_euler z={zs:.2f}")
    ok = all(oks)
    assert _report("12 oracle/MC closure", ok,
                   ", ".join(details) + f" (n={n_paths})")


def test_criterion_13_plots_secondary(runs, tmp_path):
    """Secondary: figures for every rate-bearing experiment output."""
    import subprocess
    import sys
    from ratelab.cli import write_outputs

    outdir = tmp_path / "verify_out"
    outdir.mkdir()
    tagged = [
        ("det_semigroup", {}, ["k"]),
        ("temporal_weak", {"scheme": "backward_euler"}, ["k"]),
        ("temporal_weak", {"scheme": "crank_nicolson"}, ["k"]),
        ("temporal_strong", {"scheme": "backward_euler"}, ["k"]),
        ("temporal_strong", {"scheme": "crank_nicolson"}, ["k"]),
        ("full_weak", {"scheme": "backward_euler"}, ["h", "k"]),
        ("full_strong", {"scheme": "backward_euler"}, ["h", "k"]),
        ("chc_weak", {}, ["h", "k"]),
        ("heat_weak", {}, ["h", "k"]),
        ("representation", {}, ["k"]),
    ]
    script = os.path.join(os.path.dirname(__file__), "..", "plots", "render.py")
    made = 0
    for kind, extra, axes in tagged:
        res = runs(kind, **extra)
        tag = kind + (f"_{extra['scheme']}" if "scheme" in extra else "")
        prefix = str(outdir / tag)
        write_outputs(res, prefix)
        for ax in axes:
            fig = str(outdir / f"{tag}_{ax}.png")
            proc = subprocess.run(
                [sys.executable, script, "--csv", prefix + ".csv", "--x", ax,
                 "--experiment", kind, "--out", fig],
                capture_output=True, text=True)
            assert proc.returncode == 0, (tag, ax, proc.stderr)
            assert os.path.getsize(fig) > 5000
            made += 1
    # determinism: re-render one figure byte-identically
    fig1 = str(outdir / "repeat1.png")
    fig2 = str(outdir / "repeat2.png")
    for fig in (fig1, fig2):
        subprocess.run([sys.executable, script, "--csv",
                        str(outdir / "temporal_weak_backward_euler.csv"),
                        "--x", "k", "--experiment", "temporal_weak",
                        "--out", fig], check=True)
    with open(fig1, "rb") as f1, open(fig2, "rb") as f2:
        identical = f1.read() == f2.read()
    ok = made >= 12 and identical
    assert _report("13 plots secondary", ok,
                   f"{made} figures rendered, deterministic={identical}")
