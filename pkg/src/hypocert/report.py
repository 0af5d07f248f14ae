"""Orchestration: kalman -> tree -> lyapunov -> verify, and report rendering."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import lyapunov, tree, verify
from .errors import KalmanViolated, NonIntegerSlope, NotEquivalent
from .kalman import KalmanCertificate, SystemSpec, kalman_certificate
from .zoo import SystemFile

__all__ = ["Options", "RegimeResult", "Report", "analyze", "run_verify",
           "CERTIFIED", "CERTIFIED_WITH_FALLBACK", "FAILED"]

CERTIFIED = "CERTIFIED"
CERTIFIED_WITH_FALLBACK = "CERTIFIED-WITH-FALLBACK"
FAILED = "FAILED"


@dataclass
class Options:
    kmax: int | None = None
    xi_min_exp: int = 8
    xi_max_exp: int = 20
    eps_max: Fraction = Fraction(1, 4)
    eps_min: Fraction = Fraction(1, 4096)
    seed: int = 0
    monitor_states: int = 64
    monitor_points: int = 10

    def eps_sweep(self) -> list[Fraction]:
        out = [e for e in lyapunov.EPS_SWEEP if self.eps_min <= e <= self.eps_max]
        if not out:
            raise ValueError("empty epsilon sweep")
        return out


@dataclass
class RegimeResult:
    regime: str
    path: tree.PathReport | None = None
    certificate: tree.DecayCertificate | None = None
    exponent_without_cancellation: int | None = None
    functional: lyapunov.LyapunovFunctional | None = None
    error: str | None = None
    spectral: dict | None = None
    monitor: dict | None = None

    def as_dict(self) -> dict:
        out: dict = {"regime": self.regime, "error": self.error}
        if self.path is not None:
            out["path"] = [
                {"node": nd.label, "case": nd.case_tag, "variant": nd.variant,
                 "discrepancy": nd.discrepancy, "loss": nd.accumulated_loss,
                 "weighted": nd.weighted, "cancellation": nd.cancellation,
                 "eps_index": nd.eps_index,
                 "m": None if nd.m is None else str(nd.m)}
                for nd in self.path.nodes]
            out["mixed"] = [{"parent": m.parent, "m": str(m.m), "assumptions": m.assumption_set,
                             "cancellation": m.cancellation, "m_free": m.m_free}
                            for m in self.path.mixed_data]
            out["fallback"] = self.path.fallback
            out["notes"] = list(self.path.notes)
        if self.certificate is not None:
            out["exponent"] = self.certificate.exponent
            out["provenance"] = self.certificate.provenance
            out["exponent_per_node"] = self.certificate.exponent_per_node
            out["exponent_without_cancellation"] = self.exponent_without_cancellation
        if self.functional is not None:
            out["functional"] = {"epsilon": str(self.functional.epsilon),
                                 "source": self.functional.source,
                                 "text": lyapunov.render_text(self.functional),
                                 "latex": lyapunov.render_latex(self.functional)}
        if self.spectral is not None:
            out["spectral"] = self.spectral
        if self.monitor is not None:
            out["monitor"] = self.monitor
        return out


@dataclass
class Report:
    name: str
    parameters: dict
    kalman: KalmanCertificate
    regimes: dict[str, RegimeResult] = field(default_factory=dict)
    cancellations: list[str] = field(default_factory=list)
    verdict: str = FAILED
    reasons: list[str] = field(default_factory=list)
    sweep_rows: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": {k: str(v) for k, v in self.parameters.items()},
            "kalman": self.kalman.as_dict(),
            "regimes": {k: r.as_dict() for k, r in self.regimes.items()},
            "cancellations": self.cancellations,
            "verdict": self.verdict,
            "reasons": self.reasons,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, default=str)

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["regime", "kind", "xi", "value"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.sweep_rows:
            w.writerow(row)
        return buf.getvalue()

    def render_text(self) -> str:
        k = self.kalman
        lines = [f"system: {self.name}"]
        if self.parameters:
            lines.append("parameters: " + ", ".join(f"{a}={v}" for a, v in self.parameters.items()))
        if k.holds:
            lines.append(f"Kalman condition holds at K={k.K}; alpha={k.alpha}, beta={k.beta}")
        else:
            pts = ", ".join(str(r) for r in k.exceptional_points) or "generic rank deficit"
            lines.append(f"Kalman condition fails up to K={len(k.generic_ranks) - 1}: {pts}")
        for name, r in self.regimes.items():
            sym = "alpha~" if name == "HF" else "beta~"
            lines.append("")
            lines.append(f"[{name}]")
            if r.error:
                lines.append(f"  error: {r.error}")
            if r.path is not None:
                lines.append("  path: " + " -> ".join(
                    f"{nd.label}({nd.case_tag})" if nd.parent is not None else nd.label
                    for nd in r.path.nodes))
                for m in r.path.mixed_data:
                    lines.append(f"  mixed at {m.parent}: {m.assumption_set}, m={m.m}"
                                 + (", cancellation" if m.cancellation else ""))
                if r.path.fallback:
                    lines.append(f"  fallback: {r.path.fallback}")
            if r.certificate is not None:
                lines.append(f"  {sym} = {r.certificate.exponent} ({r.certificate.provenance})")
            if r.functional is not None:
                lines.append(f"  functional (epsilon={r.functional.epsilon}):")
                lines.extend("    " + s for s in lyapunov.render_text(r.functional).splitlines())
            if r.spectral is not None:
                s = r.spectral
                lines.append(f"  spectral exponent = {s.get('exponent')} "
                             f"(slope {s.get('slope', float('nan')):.3f})")
            if r.monitor is not None:
                m = r.monitor
                lines.append(f"  monitor: passed={m['passed']} spread={m['spread']:.3g} "
                             f"min c={min(m['c']):.3g}")
        if self.cancellations:
            lines.append("")
            lines.append("cancellation: " + "; ".join(self.cancellations))
        lines.append("")
        lines.append(f"verdict: {self.verdict}")
        lines.extend(f"  - {r}" for r in self.reasons)
        return "\n".join(lines)


def _regime(sys: SystemSpec, kc: KalmanCertificate, regime: str, opts: Options) -> RegimeResult:
    res = RegimeResult(regime)
    try:
        path = tree.run_tree(sys, regime)
    except KalmanViolated as exc:
        res.error = str(exc)
        return res
    res.path = path
    generic = kc.alpha if regime == "HF" else kc.beta
    res.certificate = tree.certificate_from_path(path, fallback_exponent=generic)
    if path.fallback is None:
        res.exponent_without_cancellation = tree.certificate_from_path(
            path, force_no_cancellation=True).exponent
        L = lyapunov.synthesize_improved_functional(path)
    else:
        L = lyapunov.synthesize_kalman_functional(sys, kc.K, regime)
    try:
        res.functional = lyapunov.choose_epsilon(L, sys, sweep=opts.eps_sweep())
    except NotEquivalent as exc:
        res.error = str(exc)
    return res


def analyze(sf: SystemFile, overrides: dict[str, str] | None = None,
            opts: Options | None = None) -> Report:
    """Symbolic part only: Kalman certificate, tree paths, functionals."""
    opts = opts or Options()
    sys = sf.to_spec(overrides)
    params = sf.parameter_values(overrides)
    kc = kalman_certificate(sys, opts.kmax)
    rep = Report(sf.name, params, kc)
    if not kc.holds:
        rep.reasons.append("Kalman condition fails")
        return rep
    for regime in ("HF", "LF"):
        rep.regimes[regime] = _regime(sys, kc, regime, opts)
    if any(r.path is not None and any(nd.cancellation for nd in r.path.nodes)
           for r in rep.regimes.values()):
        rep.cancellations = sf.active_cancellations(overrides) or ["detected at these parameters"]
    errors = [f"{k}: {r.error}" for k, r in rep.regimes.items() if r.error]
    if errors:
        rep.verdict = FAILED
        rep.reasons.extend(errors)
    elif any(r.path.fallback for r in rep.regimes.values()):
        rep.verdict = CERTIFIED_WITH_FALLBACK
        rep.reasons.extend(f"{k}: {r.path.fallback}, generic Kalman exponent used"
                           for k, r in rep.regimes.items() if r.path.fallback)
    else:
        rep.verdict = CERTIFIED
    return rep


def run_verify(sf: SystemFile, overrides: dict[str, str] | None = None,
               opts: Options | None = None) -> Report:
    """analyze plus spectral fits and Lyapunov monitoring."""
    opts = opts or Options()
    rep = analyze(sf, overrides, opts)
    if not rep.kalman.holds:
        return rep
    sys = sf.to_spec(overrides)
    exps = range(opts.xi_min_exp, opts.xi_max_exp + 1)
    failures: list[str] = []
    for regime, res in rep.regimes.items():
        fit = verify.fit_hf_exponent if regime == "HF" else verify.fit_lf_exponent
        sym = "alpha" if regime == "HF" else "beta"
        try:
            sf_ = fit(sys, exps)
            res.spectral = {"exponent": sf_.exponent, "slope": sf_.fit.slope,
                            "max_residual": sf_.fit.max_residual}
            for s in sf_.samples:
                rep.sweep_rows.append({"regime": regime, "kind": "spectral_rate",
                                       "xi": s.xi, "value": s.rate})
        except NonIntegerSlope as exc:
            res.spectral = {"exponent": None, "slope": exc.slope}
            failures.append(f"{regime}: {exc}")
        if res.certificate is not None and res.spectral.get("exponent") is not None:
            got, cert = res.spectral["exponent"], res.certificate.exponent
            if got > cert:
                failures.append(f"{regime}: spectral {sym}={got} exceeds certified {cert}")
            elif got < cert:
                rep.reasons.append(f"{regime}: certified {sym}={cert} is not sharp "
                                   f"(spectral {sym}={got})")
        if res.functional is not None and res.certificate is not None:
            xs = lyapunov.default_xi_samples(regime, opts.monitor_points)
            sw = verify.monitor_sweep(res.functional, sys, res.certificate.exponent, xs,
                                      states=opts.monitor_states, seed=opts.seed)
            res.monitor = sw.as_dict()
            for x, c in zip(sw.xi, sw.c):
                rep.sweep_rows.append({"regime": regime, "kind": "monitor_c", "xi": x, "value": c})
            if not sw.passed:
                failures.append(f"{regime}: Lyapunov monitor failed (spread {sw.spread:.3g})")
    if failures:
        rep.verdict = FAILED
        rep.reasons.extend(failures)
    return rep
